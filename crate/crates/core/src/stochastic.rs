//! Sampling of subordinators, subordinate Brownian motions, independent
//! arrays of them, and additive processes with time-dependent coefficients;
//! the Monte Carlo solution formula and characteristic-function checks.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(master_seed, path, slab, block)`, so ensembles do not depend on how
//! paths are scheduled across threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bernstein::{Anisotropy, BernsteinFunction, LevyPart};
use crate::coefficients::{CoefficientSet, JumpCoefficient};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid, ValueKind};
use crate::operators::jump_symbol;
use crate::quad::{integrate, integrate_to_infinity, Tolerance};
use crate::report::EstimateReport;

/// Neglected small-jump variance per unit time.
pub const NEGLECTED_VARIANCE: f64 = 1e-6;
pub const STREAM_SCHEME: &str = "chacha8(seed; stream = path; word offset = (slab·blocks + block)·2^40)";

/// Sampled paths on a common time grid, stored `[path][time][coordinate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub time_grid: Vec<f64>,
    pub dim: usize,
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub stream_scheme: String,
}

impl PathEnsemble {
    pub fn point(&self, path: usize, k: usize) -> &[f64] {
        let at = (path * self.time_grid.len() + k) * self.dim;
        &self.values[at..at + self.dim]
    }

    /// Coordinate `c` at time index `k` across all paths.
    pub fn marginal(&self, k: usize, c: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.point(p, k)[c]).collect()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        find_time(&self.time_grid, t)
    }
}

fn find_time(grid: &[f64], t: f64) -> Result<usize> {
    let last = *grid.last().unwrap();
    if t > last * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::arg(format!("time {t} lies beyond the path horizon {last}")));
    }
    grid.iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| Error::arg(format!("time {t} is not a point of the path time grid")))
}

fn validate_time_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 {
        return Err(Error::arg("time grid must start at 0 and contain at least two points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || !grid.iter().all(|t| t.is_finite()) {
        return Err(Error::arg("time grid must increase strictly"));
    }
    Ok(())
}

fn stream(seed: u64, path: usize, slab: usize, block: usize, blocks: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(path as u64);
    r.set_word_pos(((slab * blocks + block) as u128) << 40);
    r
}

/// One positive stable variable with `E e^{−λS} = e^{−λ^α}` (Kanter).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    (alpha * u).sin() / u.sin().powf(1.0 / alpha) * ((1.0 - alpha) * u).sin().powf((1.0 - alpha) / alpha) / e.powf((1.0 - alpha) / alpha)
}

/// `∫_lo^∞ g(s) μ(ds)` for the Lévy measure of `φ`, `lo > 0`.
fn measure_integral(phi: &BernsteinFunction, lo: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let tol = Tolerance::new(0.0, 1e-10);
    match phi.levy() {
        LevyPart::None => 0.0,
        LevyPart::Atoms(a) => a.iter().filter(|p| p.0 >= lo).map(|&(s, w)| w * g(s)).sum(),
        LevyPart::Stable { alpha } => {
            let c = alpha / gamma(1.0 - alpha);
            integrate_to_infinity(&|v: f64| {
                let s = lo * v.exp();
                g(s) * c * s.powf(-alpha)
            }, 0.0, tol)
            .value
        }
        LevyPart::Density(d) => integrate_to_infinity(&|v: f64| {
            let s = lo * v.exp();
            g(s) * d.density(s) * s
        }, 0.0, tol)
        .value,
    }
}

/// `∫_0^ε s^p μ(ds)`.
fn small_moment(phi: &BernsteinFunction, p: f64, eps: f64) -> f64 {
    match phi.levy() {
        LevyPart::None => 0.0,
        LevyPart::Atoms(a) => a.iter().filter(|q| q.0 < eps).map(|&(s, w)| w * s.powf(p)).sum(),
        LevyPart::Stable { alpha } => alpha / gamma(1.0 - alpha) * eps.powf(p - alpha) / (p - alpha),
        LevyPart::Density(d) => d.moment(p, 0.0, eps),
    }
}

/// Largest `ε` (on a log bisection) with `scale·∫_0^ε s^p μ(ds) ≤ budget`.
fn cutoff(phi: &BernsteinFunction, p: f64, scale: f64, budget: f64) -> f64 {
    if let LevyPart::Atoms(a) = phi.levy() {
        return a.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
    }
    let ok = |e: f64| scale * small_moment(phi, p, e) <= budget;
    let (mut lo, mut hi) = (-700.0_f64, 30.0_f64);
    if ok(hi.exp()) {
        return hi.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.exp()
}

/// The restriction of `μ` to `[ε, ∞)`, normalised, for sampling jump sizes.
#[derive(Debug, Clone)]
enum JumpLaw {
    Stable { alpha: f64, eps: f64 },
    Atoms { sizes: Vec<f64>, cumulative: Vec<f64> },
    /// Power pieces `(c, s, lo, hi)` with density `c t^s` and cumulative masses.
    Pieces { pieces: Vec<(f64, f64, f64, f64)>, cumulative: Vec<f64> },
}

impl JumpLaw {
    /// Returns the law and its total mass `μ[ε, ∞)`.
    fn new(phi: &BernsteinFunction, eps: f64) -> (Self, f64) {
        match phi.levy() {
            LevyPart::None => (Self::Atoms { sizes: vec![], cumulative: vec![] }, 0.0),
            LevyPart::Stable { alpha } => (
                Self::Stable { alpha: *alpha, eps },
                eps.powf(-alpha) / gamma(1.0 - alpha),
            ),
            LevyPart::Atoms(a) => {
                let kept: Vec<(f64, f64)> = a.iter().copied().filter(|q| q.0 >= eps).collect();
                let mut acc = 0.0;
                let cumulative = kept
                    .iter()
                    .map(|q| {
                        acc += q.1;
                        acc
                    })
                    .collect();
                (Self::Atoms { sizes: kept.iter().map(|q| q.0).collect(), cumulative }, acc)
            }
            LevyPart::Density(d) => {
                let mut pieces = Vec::new();
                let mut cumulative = Vec::new();
                let mut acc = 0.0;
                for (anchor, w, s, lo, hi) in d.pieces() {
                    let lo = lo.max(eps);
                    if hi <= lo {
                        continue;
                    }
                    let mass = crate::bernstein::power_piece_integral(anchor, w, s, 0.0, lo, hi);
                    acc += mass;
                    pieces.push((w * anchor.powf(-s), s, lo, hi));
                    cumulative.push(acc);
                }
                (Self::Pieces { pieces, cumulative }, acc)
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        match self {
            Self::Stable { alpha, eps } => eps * u.powf(-1.0 / alpha),
            Self::Atoms { sizes, cumulative } => {
                let target = u * cumulative.last().unwrap();
                sizes[cumulative.partition_point(|&c| c < target).min(sizes.len() - 1)]
            }
            Self::Pieces { pieces, cumulative } => {
                let target = u * cumulative.last().unwrap();
                let j = cumulative.partition_point(|&c| c < target).min(pieces.len() - 1);
                let (_, s, lo, hi) = pieces[j];
                let v: f64 = rng.sample(Open01);
                let e = s + 1.0;
                if e.abs() < 1e-12 {
                    lo * (hi / lo).powf(v)
                } else if hi.is_infinite() {
                    lo * (1.0 - v).powf(1.0 / e)
                } else {
                    (lo.powf(e) + v * (hi.powf(e) - lo.powf(e))).powf(1.0 / e)
                }
            }
        }
    }
}

/// Increment law of a subordinator over one slab of clock time `clock`.
#[derive(Debug, Clone)]
struct SubordinatorLaw {
    drift: f64,
    stable: Option<f64>,
    jumps: Option<(JumpLaw, f64)>,
}

impl SubordinatorLaw {
    /// With `include_drift = false` only the Lévy part is sampled.
    fn new(phi: &BernsteinFunction, clock: f64, include_drift: bool) -> Self {
        let mut drift = if include_drift { phi.drift() } else { 0.0 };
        let (stable, jumps) = match phi.levy() {
            LevyPart::None => (None, None),
            LevyPart::Stable { alpha } => (Some(*alpha), None),
            LevyPart::Atoms(_) => (None, Some(JumpLaw::new(phi, 0.0))),
            LevyPart::Density(_) => {
                let eps = if clock > 0.0 { cutoff(phi, 2.0, 1.0, NEGLECTED_VARIANCE) } else { 0.0 };
                drift += small_moment(phi, 1.0, eps);
                (None, Some(JumpLaw::new(phi, eps)))
            }
        };
        Self { drift, stable, jumps }
    }

    fn increment<R: Rng + ?Sized>(&self, clock: f64, rng: &mut R) -> f64 {
        if clock <= 0.0 {
            return 0.0;
        }
        let mut s = self.drift * clock;
        if let Some(alpha) = self.stable {
            s += clock.powf(1.0 / alpha) * positive_stable(alpha, rng);
        }
        if let Some((law, mass)) = &self.jumps {
            let rate = mass * clock;
            if rate > 0.0 {
                let n = Poisson::new(rate).map(|p| p.sample(rng)).unwrap_or(0.0) as u64;
                for _ in 0..n {
                    s += law.sample(rng);
                }
            }
        }
        s
    }
}

fn sample_paths(
    time_grid: &[f64],
    n_paths: usize,
    dim: usize,
    seed: u64,
    step: &(dyn Fn(&mut [f64], usize, usize) + Sync),
) -> PathEnsemble {
    let nt = time_grid.len();
    let mut values = vec![0.0; n_paths * nt * dim];
    values.par_chunks_mut(nt * dim).enumerate().for_each(|(p, path)| {
        for k in 1..nt {
            let (done, rest) = path.split_at_mut(k * dim);
            let cur = &mut rest[..dim];
            cur.copy_from_slice(&done[(k - 1) * dim..]);
            step(cur, p, k - 1);
        }
    });
    PathEnsemble {
        n_paths,
        time_grid: time_grid.to_vec(),
        dim,
        values,
        master_seed: seed,
        stream_scheme: STREAM_SCHEME.into(),
    }
}

/// Paths of the subordinator with Laplace exponent `φ`.
pub fn sample_subordinator(phi: &BernsteinFunction, time_grid: &[f64], n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    validate_time_grid(time_grid)?;
    let laws: Vec<SubordinatorLaw> = time_grid
        .windows(2)
        .map(|w| SubordinatorLaw::new(phi, w[1] - w[0], true))
        .collect();
    Ok(sample_paths(time_grid, n_paths, 1, seed, &|cur, p, slab| {
        let mut rng = stream(seed, p, slab, 0, 1);
        cur[0] += laws[slab].increment(time_grid[slab + 1] - time_grid[slab], &mut rng);
    }))
}

/// Brownian increments with variance `2s` per coordinate.
fn gaussian_step<R: Rng + ?Sized>(out: &mut [f64], s: f64, rng: &mut R) {
    let sd = (2.0 * s).sqrt();
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sd * z;
    }
}

/// Paths of `(B¹_{S¹}, …, B^ℓ_{S^ℓ})` with independent blocks.
pub fn sample_iasbm(aniso: &Anisotropy, time_grid: &[f64], n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    aniso.validate()?;
    validate_time_grid(time_grid)?;
    let ell = aniso.ell();
    let laws: Vec<Vec<SubordinatorLaw>> = time_grid
        .windows(2)
        .map(|w| aniso.phis.iter().map(|phi| SubordinatorLaw::new(phi, w[1] - w[0], true)).collect())
        .collect();
    let offsets = block_offsets(&aniso.dims);
    Ok(sample_paths(time_grid, n_paths, aniso.total_dim(), seed, &|cur, p, slab| {
        let dt = time_grid[slab + 1] - time_grid[slab];
        for i in 0..ell {
            let mut rng = stream(seed, p, slab, i, ell);
            let s = laws[slab][i].increment(dt, &mut rng);
            gaussian_step(&mut cur[offsets[i]..offsets[i] + aniso.dims[i]], s, &mut rng);
        }
    }))
}

fn block_offsets(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    dims.iter()
        .map(|d| {
            let o = acc;
            acc += d;
            o
        })
        .collect()
}

/// `(4πs)^{−1/2} e^{−y²/4s}`.
fn heat_1d(s: f64, y: f64) -> f64 {
    (4.0 * PI * s).powf(-0.5) * (-y * y / (4.0 * s)).exp()
}

/// Jump part of a block with y-dependent coefficient, frozen on one slab:
/// subordinator jumps above `ε` turned into Gaussian displacements, thinned
/// by `a(t, y)/ā`, plus the compensator drift.
#[derive(Debug, Clone)]
struct FrozenJumpLaw {
    law: JumpLaw,
    envelope_rate: f64,
    a_bound: f64,
    drift: f64,
    t: f64,
}

impl FrozenJumpLaw {
    fn new(phi: &BernsteinFunction, a: &JumpCoefficient, a_bound: f64, t: f64) -> Self {
        let eps = if phi.is_drift_only() {
            1.0
        } else {
            cutoff(phi, 1.0, 2.0 * a_bound, NEGLECTED_VARIANCE)
        };
        let (law, mass) = JumpLaw::new(phi, eps);
        let tol = Tolerance::new(1e-300, 1e-10);
        let inner = |s: f64| -> f64 {
            match a {
                JumpCoefficient::Split { negative, positive } => {
                    (positive.value(t) - negative.value(t)) * (s / PI).sqrt() * -(-1.0 / (4.0 * s)).exp_m1()
                }
                other => {
                    let h = (2.0 * s).sqrt();
                    let mut bps = vec![0.0];
                    let mut y = h / 64.0;
                    while y < 1.0 {
                        bps.push(y);
                        y *= 2.0;
                    }
                    bps.push(1.0);
                    integrate(&|y: f64| y * (other.value(t, y) - other.value(t, -y)) * heat_1d(s, y), &bps, tol).value
                }
            }
        };
        let drift = if mass > 0.0 { -measure_integral(phi, eps, &inner) } else { 0.0 };
        Self {
            law,
            envelope_rate: a_bound * mass,
            a_bound,
            drift,
            t,
        }
    }

    fn increment<R: Rng + ?Sized>(&self, a: &JumpCoefficient, dt: f64, rng: &mut R) -> f64 {
        let mut x = self.drift * dt;
        let rate = self.envelope_rate * dt;
        if rate > 0.0 {
            let n = Poisson::new(rate).map(|p| p.sample(rng)).unwrap_or(0.0) as u64;
            for _ in 0..n {
                let s = self.law.sample(rng);
                let z: f64 = rng.sample(StandardNormal);
                let y = (2.0 * s).sqrt() * z;
                let u: f64 = rng.random();
                if u * self.a_bound < a.value(self.t, y) {
                    x += y;
                }
            }
        }
        x
    }
}

enum SlabBlock {
    /// Gaussian variance rate `b` and Lévy-only subordinator on clock `a·Δ`.
    TimeOnly { b: f64, a: f64, law: SubordinatorLaw },
    TimeJump { b: f64, law: FrozenJumpLaw },
}

/// Additive process with coefficients frozen at slab midpoints.
pub fn sample_additive(
    coeffs: &CoefficientSet,
    aniso: &Anisotropy,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    validate_time_grid(time_grid)?;
    let mids: Vec<f64> = time_grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    coeffs.validate(aniso, &mids)?;
    let ell = aniso.ell();
    let bound = 1.0 / coeffs.c1;
    let slabs: Vec<Vec<SlabBlock>> = time_grid
        .windows(2)
        .zip(&mids)
        .map(|(w, &t)| {
            let dt = w[1] - w[0];
            (0..ell)
                .map(|i| {
                    let b = coeffs.b[i].value(t);
                    match coeffs.a[i].time_value(t) {
                        Some(a) => SlabBlock::TimeOnly { b, a, law: SubordinatorLaw::new(&aniso.phis[i], a * dt, false) },
                        None => SlabBlock::TimeJump { b, law: FrozenJumpLaw::new(&aniso.phis[i], &coeffs.a[i], bound, t) },
                    }
                })
                .collect()
        })
        .collect();
    let offsets = block_offsets(&aniso.dims);
    Ok(sample_paths(time_grid, n_paths, aniso.total_dim(), seed, &|cur, p, slab| {
        let dt = time_grid[slab + 1] - time_grid[slab];
        for i in 0..ell {
            let mut rng = stream(seed, p, slab, i, ell);
            let out = &mut cur[offsets[i]..offsets[i] + aniso.dims[i]];
            match &slabs[slab][i] {
                SlabBlock::TimeOnly { b, a, law } => {
                    let s = b * dt + law.increment(a * dt, &mut rng);
                    gaussian_step(out, s, &mut rng);
                }
                SlabBlock::TimeJump { b, law } => {
                    let x = law.increment(&coeffs.a[i], dt, &mut rng);
                    gaussian_step(out, b * dt, &mut rng);
                    out[0] += x;
                }
            }
        }
    }))
}

/// Monte Carlo field with its pointwise standard error.
#[derive(Debug, Clone)]
pub struct McSolution {
    pub u: GridFunction,
    pub std_error: GridFunction,
    pub n_paths: usize,
    pub seed: u64,
}

/// `u(t, x) = ∫_0^t E f(s, x + Z_t − Z_s) ds` with trapezoid weights over the
/// path time grid and one ensemble reused for every `s` and `x`.
#[allow(clippy::too_many_arguments)]
pub fn mc_solve(
    f: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    coeffs: &CoefficientSet,
    aniso: &Anisotropy,
    t_eval: f64,
    x_grid: &TorusGrid,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<McSolution> {
    if x_grid.time.is_some() {
        return Err(Error::arg("evaluation grid must be space-only"));
    }
    x_grid.check_anisotropy(aniso)?;
    validate_time_grid(time_grid)?;
    if n_paths < 2 {
        return Err(Error::arg("need at least two paths for a standard error"));
    }
    let kk = find_time(time_grid, t_eval)?;
    let ens = sample_additive(coeffs, aniso, &time_grid[..=kk.max(1)], n_paths, seed)?;
    let d = ens.dim;
    let mut weights = vec![0.0; kk + 1];
    for k in 0..kk {
        let h = 0.5 * (time_grid[k + 1] - time_grid[k]);
        weights[k] += h;
        weights[k + 1] += h;
    }
    // Displacements Z_t − Z_{s_k}.
    let disp: Vec<f64> = (0..n_paths)
        .flat_map(|p| {
            let end = ens.point(p, kk).to_vec();
            let ens = &ens;
            (0..=kk).flat_map(move |k| {
                let e = end.clone();
                ens.point(p, k).iter().zip(e).map(|(a, b)| b - a).collect::<Vec<_>>()
            })
        })
        .collect();
    let points: Vec<Vec<f64>> = (0..x_grid.spatial_len()).map(|i| x_grid.point(i)).collect();
    let stats: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let mut y = vec![0.0; d];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for p in 0..n_paths {
                let mut v = 0.0;
                for (k, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let at = (p * (kk + 1) + k) * d;
                    for c in 0..d {
                        y[c] = x[c] + disp[at + c];
                    }
                    v += w * f(time_grid[k], &y);
                }
                sum += v;
                sum_sq += v * v;
            }
            let n = n_paths as f64;
            let mean = sum / n;
            let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (mean, (var / n).sqrt())
        })
        .collect();
    let field = |g: fn(&(f64, f64)) -> f64| GridFunction {
        grid: x_grid.clone(),
        values: stats.iter().map(|s| Complex64::new(g(s), 0.0)).collect(),
        kind: ValueKind::Real,
    };
    Ok(McSolution {
        u: field(|s| s.0),
        std_error: field(|s| s.1),
        n_paths,
        seed,
    })
}

/// Reference law for [`char_function_check`].
pub enum CharTarget<'a> {
    Iasbm(&'a Anisotropy),
    /// Exponent integrated over slabs with coefficients frozen at midpoints.
    Additive { coeffs: &'a CoefficientSet, aniso: &'a Anisotropy },
}

/// `−log E e^{iξ⃗·X_t}` of the target law.
pub fn char_exponent(target: &CharTarget, time_grid: &[f64], xi: &[f64], t: f64) -> Result<Complex64> {
    let aniso = match target {
        CharTarget::Iasbm(a) => a,
        CharTarget::Additive { aniso, .. } => aniso,
    };
    if xi.len() != aniso.total_dim() {
        return Err(Error::arg(format!("probe frequency has {} entries, expected {}", xi.len(), aniso.total_dim())));
    }
    let offsets = block_offsets(&aniso.dims);
    let sq: Vec<f64> = (0..aniso.ell())
        .map(|i| xi[offsets[i]..offsets[i] + aniso.dims[i]].iter().map(|x| x * x).sum())
        .collect();
    match target {
        CharTarget::Iasbm(a) => Ok(Complex64::new(t * a.symbol(&sq), 0.0)),
        CharTarget::Additive { coeffs, aniso } => {
            let kk = find_time(time_grid, t)?;
            let mut total = Complex64::new(0.0, 0.0);
            for k in 0..kk {
                let dt = time_grid[k + 1] - time_grid[k];
                let tm = 0.5 * (time_grid[k] + time_grid[k + 1]);
                for i in 0..aniso.ell() {
                    let b = coeffs.b[i].value(tm);
                    let phi = &aniso.phis[i];
                    let rate = match coeffs.a[i].time_value(tm) {
                        Some(a) => Complex64::new(b * sq[i] + a * (phi.value(sq[i]) - coeffs.b0[i] * sq[i]).max(0.0), 0.0),
                        None => {
                            let at = |y: f64| coeffs.a[i].value(tm, y);
                            Complex64::new(b * sq[i], 0.0) - jump_symbol(phi, &at, 1.0 / coeffs.c1, xi[offsets[i]])?
                        }
                    };
                    total += rate * dt;
                }
            }
            Ok(total)
        }
    }
}

/// Largest deviation of the empirical characteristic function from the
/// target over the probes; passes below `4/√N`.
pub fn char_function_check(ens: &PathEnsemble, target: &CharTarget, probes: &[(Vec<f64>, f64)]) -> Result<EstimateReport> {
    if probes.is_empty() {
        return Err(Error::arg("need at least one probe"));
    }
    let threshold = 4.0 / (ens.n_paths as f64).sqrt();
    let mut report = EstimateReport::new("char_function").with_threshold(threshold);
    for (xi, t) in probes {
        if xi.len() != ens.dim {
            return Err(Error::arg(format!("probe frequency has {} entries, ensemble has dimension {}", xi.len(), ens.dim)));
        }
        let k = ens.time_index(*t)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..ens.n_paths {
            let phase: f64 = ens.point(p, k).iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += Complex64::from_polar(1.0, phase);
        }
        let empirical = acc / ens.n_paths as f64;
        let exact = (-char_exponent(target, &ens.time_grid, xi, *t)?).exp();
        report.push(format!("xi={xi:?},t={t}"), (empirical - exact).norm());
    }
    let mut report = report.finish();
    report.metrics.insert("n_paths".into(), ens.n_paths as f64);
    Ok(report)
}

/// Largest deviation of the empirical Laplace transform `E e^{−λS_t}` of a
/// one-dimensional ensemble from `e^{−tφ(λ)}` over `(λ, t)` probes; passes
/// below `4/√N`.
pub fn laplace_check(ens: &PathEnsemble, phi: &BernsteinFunction, probes: &[(f64, f64)]) -> Result<EstimateReport> {
    if probes.is_empty() || ens.dim != 1 {
        return Err(Error::arg("Laplace check needs probes and a one-dimensional ensemble"));
    }
    let mut report = EstimateReport::new("laplace_transform").with_threshold(4.0 / (ens.n_paths as f64).sqrt());
    for &(lambda, t) in probes {
        if !(lambda >= 0.0) {
            return Err(Error::arg(format!("Laplace probe must be nonnegative, got {lambda}")));
        }
        let k = ens.time_index(t)?;
        let empirical = ens.marginal(k, 0).iter().map(|s| (-lambda * s).exp()).sum::<f64>() / ens.n_paths as f64;
        report.push(format!("lambda={lambda},t={t}"), (empirical - (-t * phi.value(lambda)).exp()).abs());
    }
    let mut report = report.finish();
    report.metrics.insert("n_paths".into(), ens.n_paths as f64);
    Ok(report)
}
