//! Numerical forms of the operator inequalities: `L₂` contraction of `𝒢`,
//! mixed-norm boundedness under refinement, and the mean-oscillation bound
//! over anisotropic parabolic cubes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bernstein::Anisotropy;
use crate::error::{Error, Result};
use crate::grid::{BlockAxes, GridFunction, TimeAxis, TorusGrid, ValueKind};
use crate::multiplier::fit_line;
use crate::report::{relative_change, EstimateReport};
use crate::solver::{apply_g, apply_g_block};

pub const L2_TOLERANCE: f64 = 1e-6;
pub const REFINEMENT_CAP: f64 = 0.1;
pub const SLOPE_CAP: f64 = 0.1;

/// One term `amp · cos(k⃗·x⃗ + phase) · sin(π m t / T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMode {
    pub wave: Vec<i64>,
    pub time_mode: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// A real trigonometric polynomial vanishing at `t = 0`, sampled on any grid
/// with the same axis count so that refinement compares one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLimitedField {
    pub modes: Vec<FieldMode>,
}

impl BandLimitedField {
    /// `n_modes` terms with wave numbers in `[−max_wave, max_wave]` per axis.
    pub fn random(axes: usize, n_modes: usize, max_wave: i64, max_time_mode: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..n_modes)
            .map(|_| FieldMode {
                wave: (0..axes).map(|_| rng.random_range(-max_wave..=max_wave)).collect(),
                time_mode: rng.random_range(1..=max_time_mode.max(1)),
                amplitude: rng.random_range(-1.0..1.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        Self { modes }
    }

    /// Samples on a grid; on a space-only grid the time factor is dropped.
    pub fn sample(&self, grid: &TorusGrid) -> Result<GridFunction> {
        let horizon = grid.time.as_ref().map(|t| t.horizon);
        let lengths = grid.axis_lengths();
        if self.modes.iter().any(|m| m.wave.len() != lengths.len()) {
            return Err(Error::arg("field wave vectors do not match the grid axes"));
        }
        Ok(GridFunction::from_real_fn(grid.clone(), |t, x| {
            self.modes
                .iter()
                .map(|m| {
                    let arg: f64 = m.wave.iter().zip(x.iter().zip(&lengths)).map(|(&k, (&xa, &l))| 2.0 * PI * k as f64 / l * xa).sum();
                    let time = horizon.map_or(1.0, |h| (PI * m.time_mode as f64 * t / h).sin());
                    m.amplitude * (arg + m.phase).cos() * time
                })
                .sum()
        }))
    }
}

/// Independent `±1` node values smoothed by a `[1, 2, 1]/4` filter along
/// every axis (periodic in space, clamped in time) and rescaled to sup norm 1.
pub fn mollified_sign_field(grid: &TorusGrid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..grid.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut shape = vec![grid.time_len()];
    shape.extend(grid.spatial_shape());
    let mut stride = vec![1usize; shape.len()];
    for a in (0..shape.len() - 1).rev() {
        stride[a] = stride[a + 1] * shape[a + 1];
    }
    for a in 0..shape.len() {
        let n = shape[a];
        if n < 3 {
            continue;
        }
        let old = v.clone();
        for (idx, out) in v.iter_mut().enumerate() {
            let j = (idx / stride[a]) % n;
            let base = idx - j * stride[a];
            let (lo, hi) = if a == 0 {
                (j.saturating_sub(1), (j + 1).min(n - 1))
            } else {
                ((j + n - 1) % n, (j + 1) % n)
            };
            *out = 0.25 * old[base + lo * stride[a]] + 0.5 * old[idx] + 0.25 * old[base + hi * stride[a]];
        }
    }
    let m = v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    GridFunction {
        grid: grid.clone(),
        values: v.iter().map(|x| Complex64::new(x / m, 0.0)).collect(),
        kind: ValueKind::Real,
    }
}

/// `(∫_0^T ‖g(t)‖_p^q dt)^{1/q}` by the trapezoid rule in time.
pub fn mixed_norm(g: &GridFunction, p: f64, q: f64) -> Result<f64> {
    let dt = g.grid.time.as_ref().map(|t| t.dt()).ok_or_else(|| Error::arg("mixed norms need a space-time grid"))?;
    let nt = g.grid.time_len();
    let inner: Vec<f64> = (0..nt).map(|k| g.slice_lp_norm(k, p)).collect();
    if q.is_infinite() {
        return Ok(inner.iter().fold(0.0, |a: f64, b| a.max(*b)));
    }
    let sum: f64 = inner
        .iter()
        .enumerate()
        .map(|(k, v)| if k == 0 || k == nt - 1 { 0.5 } else { 1.0 } * v.powf(q))
        .sum();
    Ok((sum * dt).powf(1.0 / q))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `max ‖𝒢f‖₂ / ‖f‖₂` over the ensemble; passes at `1 + 1e−6`.
pub fn l2_check(fs: &[GridFunction], aniso: &Anisotropy) -> Result<EstimateReport> {
    let ratios: Vec<f64> = fs
        .par_iter()
        .map(|f| Ok(ratio(mixed_norm(&apply_g(f, aniso)?, 2.0, 2.0)?, mixed_norm(f, 2.0, 2.0)?)))
        .collect::<Result<_>>()?;
    let mut r = EstimateReport::new("l2").with_threshold(1.0 + L2_TOLERANCE);
    for (j, v) in ratios.into_iter().enumerate() {
        r.push(format!("f{j}"), v);
    }
    Ok(r.finish())
}

/// Doubles every spatial resolution and the number of time steps.
pub fn refine(grid: &TorusGrid) -> Result<TorusGrid> {
    TorusGrid::new(
        grid.blocks.iter().map(|b| BlockAxes { n: 2 * b.n, ..*b }).collect(),
        grid.time.as_ref().map(|t| TimeAxis { steps: 2 * t.steps, ..*t }),
    )
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Ensemble constructor evaluated on the base and the refined grid.
pub type EnsembleMaker<'a> = dyn Fn(&TorusGrid) -> Result<Vec<GridFunction>> + Sync + 'a;

/// Mixed-norm ratios for several `(p, q)` pairs; `𝒢f` is computed once per
/// member and grid.
fn mixed_ratios(fs: &[GridFunction], aniso: &Anisotropy, pairs: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    fs.par_iter()
        .map(|f| {
            let g = apply_g(f, aniso)?;
            pairs
                .iter()
                .map(|&(p, q)| Ok(ratio(mixed_norm(&g, p, q)?, mixed_norm(f, p, q)?)))
                .collect()
        })
        .collect()
}

/// `max ‖𝒢f‖_{L_q(L_p)} / ‖f‖_{L_q(L_p)}` for each pair together with the
/// conjugate pair; passes when the maxima change by less than 10% under one
/// refinement. For `p = q = 2` the contraction threshold also applies.
pub fn lqlp_reports(make: &EnsembleMaker, grid: &TorusGrid, aniso: &Anisotropy, pairs: &[(f64, f64)]) -> Result<Vec<EstimateReport>> {
    for &(p, q) in pairs {
        if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
            return Err(Error::arg(format!("mixed-norm exponents must lie in (1, ∞), got p = {p}, q = {q}")));
        }
    }
    let all: Vec<(f64, f64)> = pairs.iter().flat_map(|&(p, q)| [(p, q), (conjugate(p), conjugate(q))]).collect();
    let coarse = make(grid)?;
    let fine_grid = refine(grid)?;
    let fine = make(&fine_grid)?;
    if coarse.len() != fine.len() || coarse.is_empty() {
        return Err(Error::arg("ensemble must be nonempty and of equal size on both grids"));
    }
    let rc = mixed_ratios(&coarse, aniso, &all)?;
    let rf = mixed_ratios(&fine, aniso, &all)?;
    let column_max = |r: &[Vec<f64>], c: usize| r.iter().map(|row| row[c]).fold(0.0, f64::max);
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(j, &(p, q))| {
            let mut r = EstimateReport::new(format!("lqlp_p{p}_q{q}")).with_delta_cap(REFINEMENT_CAP);
            if p == 2.0 && q == 2.0 {
                r = r.with_threshold(1.0 + L2_TOLERANCE);
            }
            let mut delta: f64 = 0.0;
            for (c, (pp, qq)) in [(2 * j, (p, q)), (2 * j + 1, (conjugate(p), conjugate(q)))] {
                for (m, row) in rc.iter().enumerate() {
                    r.push(format!("f{m},p={pp},q={qq}"), row[c]);
                }
                let (a, b) = (column_max(&rc, c), column_max(&rf, c));
                r.metrics.insert(format!("refined_sup_p{pp}_q{qq}"), b);
                delta = delta.max(relative_change(a, b));
            }
            r.refinement_delta = Some(delta);
            r.finish()
        })
        .collect())
}

pub fn lqlp_report(make: &EnsembleMaker, grid: &TorusGrid, aniso: &Anisotropy, p: f64, q: f64) -> Result<EstimateReport> {
    Ok(lqlp_reports(make, grid, aniso, &[(p, q)])?.remove(0))
}

/// A grid node used as a cube center.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeCenter {
    pub time_index: usize,
    pub spatial_index: Vec<usize>,
}

/// Cubes `Q_b(t, x⃗) = (t − b, t + b) × ∏_i B_{κ_i(b)}(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    pub b_values: Vec<f64>,
    pub centers: Vec<CubeCenter>,
    /// `κ_i(b)` indexed `[b][block]`.
    pub radii: Vec<Vec<f64>>,
    pub dims: Vec<usize>,
}

fn unit_ball(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

impl CubeFamily {
    pub fn new(aniso: &Anisotropy, b_values: Vec<f64>, centers: Vec<CubeCenter>) -> Result<Self> {
        if b_values.is_empty() || centers.is_empty() {
            return Err(Error::arg("cube family needs at least one b and one center"));
        }
        let radii = b_values
            .iter()
            .map(|&b| aniso.phis.iter().map(|phi| phi.kappa(b)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(Self {
            b_values,
            centers,
            radii,
            dims: aniso.dims.clone(),
        })
    }

    pub fn log_spaced(aniso: &Anisotropy, b_lo: f64, b_hi: f64, count: usize, centers: Vec<CubeCenter>) -> Result<Self> {
        if !(b_lo > 0.0 && b_hi > b_lo) || count < 2 {
            return Err(Error::arg("need 0 < b_lo < b_hi and at least two b values"));
        }
        let r = (b_hi / b_lo).ln() / (count - 1) as f64;
        Self::new(aniso, (0..count).map(|j| b_lo * (j as f64 * r).exp()).collect(), centers)
    }

    /// `count` distinct random nodes whose time lies in `[t_lo, t_hi]`.
    pub fn random_centers(grid: &TorusGrid, count: usize, t_lo: f64, t_hi: f64, seed: u64) -> Result<Vec<CubeCenter>> {
        let time = grid.time.as_ref().ok_or_else(|| Error::arg("cube centers need a space-time grid"))?;
        let ks: Vec<usize> = (0..=time.steps).filter(|&k| (t_lo..=t_hi).contains(&time.time(k))).collect();
        if ks.is_empty() {
            return Err(Error::arg("no time node in the requested center window"));
        }
        let shape = grid.spatial_shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<CubeCenter> = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < 100 * count {
            attempts += 1;
            let c = CubeCenter {
                time_index: ks[rng.random_range(0..ks.len())],
                spatial_index: shape.iter().map(|&n| rng.random_range(0..n)).collect(),
            };
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }

    /// `2b · ∏_i |B_{κ_i(b)}|`.
    pub fn measure(&self, j: usize) -> f64 {
        2.0 * self.b_values[j] * self.dims.iter().zip(&self.radii[j]).map(|(&d, &r)| unit_ball(d) * r.powi(d as i32)).product::<f64>()
    }

    pub fn decades(&self) -> f64 {
        let lo = self.b_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.b_values.iter().cloned().fold(0.0, f64::max);
        (hi / lo).log10()
    }
}

/// Mean oscillations over a cube family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmoValue {
    pub value: f64,
    /// Largest mean oscillation per `b`.
    pub per_b: Vec<f64>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Flat spatial offsets of the periodic ball of radius `r` around the origin
/// in each block, or `None` when the ball wraps around the torus.
fn ball_offsets(grid: &TorusGrid, radii: &[f64]) -> Option<Vec<Vec<Vec<i64>>>> {
    let mut out = Vec::new();
    for (b, &r) in grid.blocks.iter().zip(radii) {
        if 2.0 * r > b.length {
            return None;
        }
        let h = b.length / b.n as f64;
        let m = (r / h).floor() as i64;
        let mut offs: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..b.dim {
            offs = offs
                .into_iter()
                .flat_map(|o| {
                    (-m..=m).map(move |j| {
                        let mut v = o.clone();
                        v.push(j);
                        v
                    })
                })
                .collect();
        }
        offs.retain(|o| (o.iter().map(|&j| (j * j) as f64).sum::<f64>()).sqrt() * h < r || o.iter().all(|&j| j == 0));
        out.push(offs);
    }
    Some(out)
}

/// `max_Q |Q|⁻¹∫_Q |g − g_Q|` by Riemann sums on the grid nodes inside each
/// cube. Cubes leaving `[0, T]` in time or wrapping around the torus are
/// skipped and counted.
pub fn bmo_seminorm(g: &GridFunction, cubes: &CubeFamily) -> Result<BmoValue> {
    let time = g.grid.time.as_ref().ok_or_else(|| Error::arg("mean oscillation needs a space-time grid function"))?;
    if g.grid.ell() != cubes.dims.len() || g.grid.blocks.iter().zip(&cubes.dims).any(|(b, &d)| b.dim != d) {
        return Err(Error::arg("cube family and grid have different block structure"));
    }
    let dt = time.dt();
    let shape = g.grid.spatial_shape();
    let sl = g.grid.spatial_len();
    let tasks: Vec<(usize, usize)> = (0..cubes.b_values.len()).flat_map(|j| (0..cubes.centers.len()).map(move |c| (j, c))).collect();
    let offsets: Vec<Option<Vec<Vec<Vec<i64>>>>> = cubes.radii.iter().map(|r| ball_offsets(&g.grid, r)).collect();
    let results: Vec<Option<f64>> = tasks
        .par_iter()
        .map(|&(j, c)| {
            let b = cubes.b_values[j];
            let center = &cubes.centers[c];
            let tc = time.time(center.time_index);
            let offs = offsets[j].as_ref()?;
            if tc - b < -1e-12 * time.horizon || tc + b > time.horizon * (1.0 + 1e-12) {
                return None;
            }
            let m = ((b / dt) * (1.0 - 1e-12)).ceil() as i64 - 1;
            let k0 = center.time_index as i64;
            let ks: Vec<usize> = (k0 - m.max(0)..=k0 + m.max(0)).filter(|&k| k >= 0 && k <= time.steps as i64).map(|k| k as usize).collect();
            // Spatial flat indices: product over blocks of ball offsets.
            let mut flat: Vec<Vec<usize>> = vec![center.spatial_index.clone()];
            let mut axis = 0;
            for (bi, block) in g.grid.blocks.iter().enumerate() {
                let shape = &shape;
                flat = flat
                    .into_iter()
                    .flat_map(|p| {
                        offs[bi].iter().map(move |o| {
                            let mut q = p.clone();
                            for (a, &d) in o.iter().enumerate() {
                                let n = shape[axis + a] as i64;
                                q[axis + a] = ((p[axis + a] as i64 + d).rem_euclid(n)) as usize;
                            }
                            q
                        })
                    })
                    .collect();
                axis += block.dim;
            }
            let idx: Vec<usize> = flat.iter().map(|p| g.grid.ravel(p)).collect();
            let count = (ks.len() * idx.len()) as f64;
            let mut mean = Complex64::new(0.0, 0.0);
            for &k in &ks {
                for &i in &idx {
                    mean += g.values[k * sl + i];
                }
            }
            mean /= count;
            let mut osc = 0.0;
            for &k in &ks {
                for &i in &idx {
                    osc += (g.values[k * sl + i] - mean).norm();
                }
            }
            Some(osc / count)
        })
        .collect();
    let mut per_b = vec![0.0_f64; cubes.b_values.len()];
    let (mut evaluated, mut skipped) = (0, 0);
    for (&(j, _), r) in tasks.iter().zip(&results) {
        match r {
            Some(v) => {
                evaluated += 1;
                per_b[j] = per_b[j].max(*v);
            }
            None => skipped += 1,
        }
    }
    Ok(BmoValue {
        value: per_b.iter().cloned().fold(0.0, f64::max),
        per_b,
        evaluated,
        skipped,
    })
}

/// Mean oscillation of `𝒢₁f` over the cube family, maximised over the
/// ensemble per `b`; passes when the fitted slope of that maximum against
/// `log₁₀ b` lies within `±0.1`. The same statistics for the full `𝒢` are
/// reported as `extrapolated_*` metrics.
pub fn bmo_check(fs: &[GridFunction], aniso: &Anisotropy, cubes: &CubeFamily) -> Result<EstimateReport> {
    if cubes.decades() < 3.0 - 1e-9 {
        return Err(Error::arg(format!("cube family spans {:.2} decades of b, at least 3 are needed", cubes.decades())));
    }
    for f in fs {
        if f.max_abs() > 1.0 + 1e-12 {
            return Err(Error::arg(format!("ensemble members need sup norm at most 1, got {}", f.max_abs())));
        }
    }
    let values: Vec<(BmoValue, BmoValue)> = fs
        .iter()
        .map(|f| Ok((bmo_seminorm(&apply_g_block(f, aniso, 0)?, cubes)?, bmo_seminorm(&apply_g(f, aniso)?, cubes)?)))
        .collect::<Result<_>>()?;
    let nb = cubes.b_values.len();
    let per_b = |pick: fn(&(BmoValue, BmoValue)) -> &BmoValue| -> Vec<f64> {
        (0..nb).map(|j| values.iter().map(|v| pick(v).per_b[j]).fold(0.0, f64::max)).collect()
    };
    let one = per_b(|v| &v.0);
    let full = per_b(|v| &v.1);
    let x: Vec<f64> = cubes.b_values.iter().map(|b| b.log10()).collect();
    let slope = |y: &[f64]| if y.iter().all(|v| *v == 0.0) { 0.0 } else { fit_line(&x, y).slope };
    let mut r = EstimateReport::new("bmo");
    for (b, v) in cubes.b_values.iter().zip(&one) {
        r.push(format!("b={b:.4e}"), *v);
    }
    let mut r = r.finish();
    let s1 = slope(&one);
    r.metrics.insert("slope_per_decade".into(), s1);
    r.metrics.insert("slope_cap".into(), SLOPE_CAP);
    r.metrics.insert("extrapolated_sup".into(), full.iter().cloned().fold(0.0, f64::max));
    r.metrics.insert("extrapolated_slope_per_decade".into(), slope(&full));
    r.metrics.insert("cubes_evaluated".into(), values.first().map_or(0, |v| v.0.evaluated) as f64);
    r.metrics.insert("cubes_skipped".into(), values.first().map_or(0, |v| v.0.skipped) as f64);
    r.notes.push("extrapolated_* metrics apply the bound to the full operator rather than one block".into());
    r.pass = r.pass && s1.is_finite() && s1.abs() <= SLOPE_CAP;
    Ok(r)
}
