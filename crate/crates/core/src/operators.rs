//! Spectral application of the anisotropic symbol, discrete Bessel-potential
//! norms, the jump integral by singular quadrature, and the coefficient
//! multiplier bound.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{Anisotropy, BernsteinFunction};
use crate::coefficients::{CoefficientSet, JumpCoefficient};
use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, lp_norm, GridFunction, SpatialFft};
use crate::quad::{integrate, Quadrature, Tolerance};
use crate::report::EstimateReport;

/// Inner-zone Taylor remainder bound of the jump quadrature.
pub const INNER_REMAINDER: f64 = 1e-8;
/// Energy fraction in the top octave above which a jump application is
/// flagged as under-resolved.
pub const TOP_OCTAVE_LIMIT: f64 = 1e-6;
pub const MULTIPLIER_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolMode {
    /// `(−Σ_i φ_i(|ξ_i|²))^k`, integer `k ≥ 0`.
    Generator,
    /// `(1 + Σ_i φ_i(|ξ_i|²))^{γ/2}`.
    Bessel,
}

fn require_space_only(u: &GridFunction, a: &Anisotropy) -> Result<()> {
    if u.is_space_time() {
        return Err(Error::arg("operation needs a space-only grid function"));
    }
    u.grid.check_anisotropy(a)
}

/// `ψ(ξ⃗) = Σ_i φ_i(|ξ_i|²)` for every mode of the grid.
pub fn total_symbol(u: &GridFunction, a: &Anisotropy) -> Result<Vec<f64>> {
    let ell = a.ell();
    let table = u.grid.symbol_table(a)?;
    Ok(table.chunks(ell).map(|c| c.iter().sum()).collect())
}

pub fn apply_anisotropic_symbol(u: &GridFunction, a: &Anisotropy, power: f64, mode: SymbolMode) -> Result<GridFunction> {
    require_space_only(u, a)?;
    let psi = total_symbol(u, a)?;
    let m: Vec<Complex64> = match mode {
        SymbolMode::Generator => {
            if !(power >= 0.0 && power.fract() == 0.0) {
                return Err(Error::arg(format!("generator power must be a nonnegative integer, got {power}")));
            }
            psi.iter().map(|&s| Complex64::new((-s).powi(power as i32), 0.0)).collect()
        }
        SymbolMode::Bessel => psi.iter().map(|&s| Complex64::new((1.0 + s).powf(0.5 * power), 0.0)).collect(),
    };
    Ok(apply_multiplier(u, &m))
}

/// Discrete `H_p^{φ⃗,γ}` norm.
pub fn sobolev_norm(u: &GridFunction, a: &Anisotropy, gamma: f64, p: f64) -> Result<f64> {
    let v = apply_anisotropic_symbol(u, a, gamma, SymbolMode::Bessel)?;
    Ok(lp_norm(&v.values, v.grid.cell_volume(), p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitNorms {
    pub full: f64,
    pub split: f64,
}

/// `‖(φ⃗·Δ)u‖_p` against `Σ_i ‖φ_i(Δ_{x_i})u‖_p`.
pub fn coordinate_split_norms(u: &GridFunction, a: &Anisotropy, p: f64) -> Result<SplitNorms> {
    require_space_only(u, a)?;
    let ell = a.ell();
    let table = u.grid.symbol_table(a)?;
    let cell = u.grid.cell_volume();
    let full_m: Vec<Complex64> = table.chunks(ell).map(|c| Complex64::new(-c.iter().sum::<f64>(), 0.0)).collect();
    let full = lp_norm(&apply_multiplier(u, &full_m).values, cell, p);
    let mut split = 0.0;
    for i in 0..ell {
        let m: Vec<Complex64> = table.chunks(ell).map(|c| Complex64::new(-c[i], 0.0)).collect();
        split += lp_norm(&apply_multiplier(u, &m).values, cell, p);
    }
    Ok(SplitNorms { full, split })
}

/// `sin x − x` without cancellation for small `x`.
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() - x
    }
}

fn cos_minus_one(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    -2.0 * s * s
}

fn check(q: &Quadrature, what: &str) -> Result<f64> {
    if !q.converged && q.abs_error > 1e-10 * q.value.abs().max(1.0) {
        return Err(Error::Accuracy {
            context: format!("jump quadrature ({what})"),
            achieved: q.abs_error,
        });
    }
    Ok(q.value)
}

/// Geometric breakpoints accumulating at zero plus `[.., hi]`.
fn geometric_to_zero(hi: f64) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=60).rev().map(|k| hi * 0.5f64.powi(k)).collect();
    b.insert(0, 0.0);
    b
}

/// Folded coefficient parts `A₊(y) = a(y) + a(−y)`, `A₋(y) = a(y) − a(−y)`.
struct Folded<'a> {
    a: &'a (dyn Fn(f64) -> f64 + Sync),
}

impl Folded<'_> {
    fn plus(&self, y: f64) -> f64 {
        (self.a)(y) + (self.a)(-y)
    }
    fn minus(&self, y: f64) -> f64 {
        (self.a)(y) - (self.a)(-y)
    }
}

/// The jump part of the symbol,
/// `M(ξ) = ∫(e^{iξy} − 1 − iξy·1_{|y|≤1}) a(y) j(|y|) dy`, for a
/// one-dimensional block.
///
/// `|y| ≤ h` uses the second-order Taylor term with the remainder bounded by
/// [`INNER_REMAINDER`] through `a_bound ≥ sup|a|`; `h < |y| ≤ 1` is integrated
/// with panels between oscillation zeros; `|y| > 1` splits into a
/// non-oscillatory part and half-period panels summed with the epsilon
/// algorithm.
pub fn jump_symbol(phi: &BernsteinFunction, a: &(dyn Fn(f64) -> f64 + Sync), a_bound: f64, xi: f64) -> Result<Complex64> {
    if xi == 0.0 || phi.is_drift_only() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if xi < 0.0 {
        return Ok(jump_symbol(phi, a, a_bound, -xi)?.conj());
    }
    let f = Folded { a };
    let j = |y: f64| phi.jump_density(1, y);
    let fine = Tolerance::new(1e-300, 1e-12);

    // Inner zone.
    let moment = |p: i32, h: f64| integrate(&|y: f64| y.powi(p) * j(y), &geometric_to_zero(h), fine).value;
    let remainder = |h: f64| 2.0 * a_bound * (xi.powi(4) / 24.0 * moment(4, h) + xi.powi(3) / 6.0 * moment(3, h));
    let mut h = 1.0_f64;
    while remainder(h) > INNER_REMAINDER && h > 1e-12 {
        h *= 0.5;
    }
    let inner_q = integrate(&|y: f64| y * y * f.plus(y) * j(y), &geometric_to_zero(h), fine);
    let inner = -0.5 * xi * xi * check(&inner_q, "inner zone")?;

    // h < y ≤ 1.
    let half = PI / xi;
    let mut bps = vec![h];
    let mut k = (h / half).floor() + 1.0;
    while k * half < 1.0 {
        bps.push(k * half);
        k += 1.0;
    }
    bps.push(1.0);
    let mid_re = integrate(&|y: f64| cos_minus_one(xi * y) * f.plus(y) * j(y), &bps, fine);
    let mid_im = integrate(&|y: f64| sin_minus_x(xi * y) * f.minus(y) * j(y), &bps, fine);
    let (mid_re, mid_im) = (check(&mid_re, "middle zone")?, check(&mid_im, "middle zone")?);

    // y > 1: −∫A₊ j plus the oscillatory transform.
    let flat = crate::quad::integrate_to_infinity(&|y: f64| f.plus(y) * j(y), 1.0, fine);
    let flat = check(&flat, "outer zone")?;
    let osc_re = oscillatory_tail(&|y: f64| f.plus(y) * j(y), xi, true)?;
    let osc_im = oscillatory_tail(&|y: f64| f.minus(y) * j(y), xi, false)?;

    Ok(Complex64::new(inner + mid_re - flat + osc_re, mid_im + osc_im))
}

/// `∫_1^∞ cos(ξy) g(y) dy` (or `sin`) by panels between consecutive zeros
/// of the trigonometric factor and epsilon acceleration of the partial sums.
fn oscillatory_tail(g: &(dyn Fn(f64) -> f64 + Sync), xi: f64, cosine: bool) -> Result<f64> {
    const MIN_PANELS: usize = 24;
    const MAX_PANELS: usize = 4000;
    let half = PI / xi;
    let shift = if cosine { 0.5 } else { 0.0 };
    let trig = |y: f64| if cosine { (xi * y).cos() } else { (xi * y).sin() };
    let tol = Tolerance::new(1e-300, 1e-13);
    let mut k = (1.0 / half - shift).floor() + 1.0;
    let mut lo = 1.0;
    let mut sums = Vec::new();
    let mut s = 0.0;
    loop {
        let hi = (k + shift) * half;
        k += 1.0;
        let q = integrate(&|y: f64| trig(y) * g(y), &[lo, hi], tol);
        lo = hi;
        s += check(&q, "oscillatory panel")?;
        sums.push(s);
        let n = sums.len();
        if n >= 2 && q.value.abs() <= 1e-17 * s.abs() + 1e-300 {
            return Ok(s);
        }
        if n >= MIN_PANELS && n % 2 == 0 {
            let (a, e) = accelerate(&sums);
            if e <= 1e-13 * a.abs().max(1e-6) {
                return Ok(a);
            }
            if n >= MAX_PANELS {
                return Err(Error::Accuracy {
                    context: "oscillatory tail of the jump quadrature".into(),
                    achieved: e,
                });
            }
        }
    }
}

/// Epsilon-accelerated limit of the last partial sums, with the spread of
/// two consecutive estimates as error.
fn accelerate(sums: &[f64]) -> (f64, f64) {
    let take = sums.len().min(21);
    let tail = &sums[sums.len() - take..];
    let (a, _) = crate::quad::wynn_epsilon(tail);
    let (b, _) = crate::quad::wynn_epsilon(&tail[..take - 2]);
    if a.is_finite() && b.is_finite() {
        (a, (a - b).abs())
    } else {
        let last = *sums.last().unwrap();
        (last, f64::INFINITY)
    }
}

/// `M(ξ_j)` for every axis index `j` of an `n`-point axis of period `length`.
///
/// The Nyquist entry keeps only the real part so that real inputs stay real.
pub fn jump_multiplier_table(
    phi: &BernsteinFunction,
    a: &(dyn Fn(f64) -> f64 + Sync),
    a_bound: f64,
    n: usize,
    length: f64,
) -> Result<Vec<Complex64>> {
    let half: Vec<Complex64> = (0..=n / 2)
        .into_par_iter()
        .map(|j| jump_symbol(phi, a, a_bound, 2.0 * PI / length * j as f64))
        .collect::<Result<_>>()?;
    Ok((0..n)
        .map(|j| {
            if j == n / 2 {
                Complex64::new(half[j].re, 0.0)
            } else if j < n / 2 {
                half[j]
            } else {
                half[n - j].conj()
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct JumpApplication {
    pub value: GridFunction,
    /// Spectral energy fraction in `|k| > n/4` along the block axis.
    pub top_octave_fraction: f64,
    pub accuracy_warning: bool,
}

/// Position of the axis of block `block` in storage order.
fn block_axis(u: &GridFunction, block: usize) -> Result<usize> {
    let b = u
        .grid
        .blocks
        .get(block)
        .ok_or_else(|| Error::arg(format!("block index {block} out of range")))?;
    if b.dim != 1 {
        return Err(Error::arg(format!("jump quadrature needs a one-dimensional block, block {} has d = {}", block + 1, b.dim)));
    }
    Ok(u.grid.blocks[..block].iter().map(|b| b.dim).sum())
}

/// Multiplies every time slice of `u` along the axis of `block` by
/// `table[j]`, returning the result and the top-octave energy fraction.
pub(crate) fn apply_axis_table(u: &GridFunction, block: usize, table: &[Complex64]) -> Result<(GridFunction, f64)> {
    let axis = block_axis(u, block)?;
    let shape = u.grid.spatial_shape();
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let fft = SpatialFft::new(&u.grid);
    let sl = u.grid.spatial_len();
    let mut out = u.clone();
    let energies: Vec<(f64, f64)> = out
        .values
        .par_chunks_mut(sl)
        .map(|c| {
            fft.forward(c);
            let (mut top, mut total) = (0.0, 0.0);
            for (idx, v) in c.iter_mut().enumerate() {
                let j = (idx / stride) % n;
                let e = v.norm_sqr();
                total += e;
                let kk = if j <= n / 2 { j } else { n - j };
                if kk > n / 4 {
                    top += e;
                }
                *v *= table[j];
            }
            fft.inverse(c);
            (top, total)
        })
        .collect();
    let (top, total) = energies.iter().fold((0.0, 0.0), |acc, e| (acc.0 + e.0, acc.1 + e.1));
    let frac = if total > 0.0 { top / total } else { 0.0 };
    Ok((out, frac))
}

/// `∫(u(x+y) − u(x) − u′(x)y·1_{|y|≤1}) a(y) j(|y|) dy` along block `block`
/// (which must be one-dimensional) for every time slice of `u`.
pub fn apply_jump_quadrature(
    u: &GridFunction,
    block: usize,
    phi: &BernsteinFunction,
    a: &(dyn Fn(f64) -> f64 + Sync),
    a_bound: f64,
) -> Result<JumpApplication> {
    block_axis(u, block)?;
    let b = &u.grid.blocks[block];
    let table = jump_multiplier_table(phi, a, a_bound, b.n, b.length)?;
    let (value, frac) = apply_axis_table(u, block, &table)?;
    Ok(JumpApplication {
        value,
        top_octave_fraction: frac,
        accuracy_warning: frac > TOP_OCTAVE_LIMIT,
    })
}

/// Numerator and denominator contributions of block `i` to `m(t, ξ⃗)`.
fn block_multiplier_parts(
    coeffs: &CoefficientSet,
    aniso: &Anisotropy,
    i: usize,
    t: f64,
    xi: &[f64],
) -> Result<(f64, f64)> {
    let phi = &aniso.phis[i];
    let sq: f64 = xi.iter().map(|x| x * x).sum();
    let b = coeffs.b[i].value(t);
    let b0 = coeffs.b0[i];
    let bound = 1.0 / coeffs.c1;
    match &coeffs.a[i] {
        JumpCoefficient::TimeOnly { profile } => {
            let phi_v = phi.value(sq);
            let jump = (phi_v - b0 * sq).max(0.0);
            Ok((b * sq + profile.value(t) * jump, phi_v))
        }
        other => {
            if xi.len() != 1 {
                return Err(Error::arg("y-dependent jump coefficients need one-dimensional blocks"));
            }
            let x = xi[0].abs();
            let at = |y: f64| other.value(t, y);
            let num = -jump_symbol(phi, &at, bound, x)?.re;
            let den = -jump_symbol(phi, &|_| 1.0, 1.0, x)?.re;
            Ok((num + b * sq, den + b0 * sq))
        }
    }
}

/// Samples `m(t, ξ⃗)` (ratio of the coefficient symbol to the reference
/// symbol) over `xi_grid`, each entry a full frequency vector in block order.
pub fn coefficient_multiplier_bound(
    coeffs: &CoefficientSet,
    aniso: &Anisotropy,
    t: f64,
    xi_grid: &[Vec<f64>],
) -> Result<EstimateReport> {
    coeffs.validate(aniso, &[t])?;
    let d = aniso.total_dim();
    let values: Vec<(String, f64)> = xi_grid
        .par_iter()
        .filter(|xi| xi.iter().any(|&x| x != 0.0))
        .map(|xi| {
            if xi.len() != d {
                return Err(Error::arg(format!("frequency vector has {} entries, expected {d}", xi.len())));
            }
            let mut off = 0;
            let (mut num, mut den) = (0.0, 0.0);
            for (i, &di) in aniso.dims.iter().enumerate() {
                let (n, dd) = block_multiplier_parts(coeffs, aniso, i, t, &xi[off..off + di])?;
                num += n;
                den += dd;
                off += di;
            }
            Ok((format!("xi={xi:?}"), num / den))
        })
        .collect::<Result<_>>()?;
    let mut report = EstimateReport::new("coefficient_multiplier").with_threshold(1.0 / coeffs.c1 + MULTIPLIER_TOL);
    let mut inf = f64::INFINITY;
    for (tag, v) in values {
        inf = inf.min(v);
        report.push(tag, v);
    }
    let mut report = report.finish();
    report.metrics.insert("inf".into(), inf);
    report.metrics.insert("lower_threshold".into(), coeffs.c1 - MULTIPLIER_TOL);
    report.pass = report.pass && inf >= coeffs.c1 - MULTIPLIER_TOL;
    Ok(report)
}
