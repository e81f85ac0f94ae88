//! Bernstein functions `φ(λ) = bλ + ∫(1 − e^{−λt}) μ(dt)` and the anisotropy
//! structure built from them.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};
use crate::report::{relative_change, EstimateReport};

/// Configuration record for one Bernstein function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BernsteinSpec {
    Stable {
        alpha: f64,
        #[serde(default)]
        drift: f64,
    },
    Atoms {
        atoms: Vec<(f64, f64)>,
        #[serde(default)]
        drift: f64,
    },
    Density {
        table: Vec<(f64, f64)>,
        #[serde(default)]
        drift: f64,
    },
    Drift {
        drift: f64,
    },
}

/// Lévy measure of the subordinator.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyPart {
    None,
    /// Density `α/Γ(1−α) t^{−1−α}` with `0 < α < 1`.
    Stable { alpha: f64 },
    /// Finite sum of point masses `(t_k, w_k)`.
    Atoms(Vec<(f64, f64)>),
    Density(DensityTable),
}

/// A positive Lévy density, log-linear between table knots and extended by
/// power laws below the first and above the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    knots: Vec<f64>,
    weights: Vec<f64>,
    /// `slopes[j]` is the log-log slope on `[knots[j], knots[j+1]]`.
    slopes: Vec<f64>,
}

impl DensityTable {
    pub fn new(table: &[(f64, f64)]) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::arg("density table needs at least two knots"));
        }
        for w in table.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::arg("density knots must be strictly increasing"));
            }
        }
        if table.iter().any(|&(t, w)| !(t > 0.0 && t.is_finite() && w > 0.0 && w.is_finite())) {
            return Err(Error::arg("density knots and weights must be positive and finite"));
        }
        let knots: Vec<f64> = table.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = table.iter().map(|p| p.1).collect();
        let slopes: Vec<f64> = table
            .windows(2)
            .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
            .collect();
        let d = Self {
            knots,
            weights,
            slopes,
        };
        if d.head_slope() <= -2.0 {
            return Err(Error::Integrability(format!(
                "density behaves like t^{:.4} near 0; min(1,t) is not integrable",
                d.head_slope()
            )));
        }
        if d.tail_slope() >= -1.0 {
            return Err(Error::Integrability(format!(
                "density behaves like t^{:.4} at infinity; min(1,t) is not integrable",
                d.tail_slope()
            )));
        }
        Ok(d)
    }

    pub fn head_slope(&self) -> f64 {
        self.slopes[0]
    }

    pub fn tail_slope(&self) -> f64 {
        *self.slopes.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.weights[0] * (t / self.knots[0]).powf(self.head_slope());
        }
        if t >= self.knots[n - 1] {
            return self.weights[n - 1] * (t / self.knots[n - 1]).powf(self.tail_slope());
        }
        let j = self.knots.partition_point(|&k| k <= t) - 1;
        self.weights[j] * (t / self.knots[j]).powf(self.slopes[j])
    }

    /// Power-law pieces `(anchor, weight, slope, lo, hi)` covering `(0, ∞)`.
    pub(crate) fn pieces(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        let n = self.knots.len();
        let mut out = Vec::with_capacity(n + 1);
        out.push((self.knots[0], self.weights[0], self.head_slope(), 0.0, self.knots[0]));
        for j in 0..n - 1 {
            out.push((self.knots[j], self.weights[j], self.slopes[j], self.knots[j], self.knots[j + 1]));
        }
        out.push((
            self.knots[n - 1],
            self.weights[n - 1],
            self.tail_slope(),
            self.knots[n - 1],
            f64::INFINITY,
        ));
        out
    }

    /// `∫_lo^hi t^p μ(dt)`; infinite when the integral diverges.
    pub fn moment(&self, p: f64, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for (anchor, w, s, a, b) in self.pieces() {
            let l = a.max(lo);
            let h = b.min(hi);
            if h <= l {
                continue;
            }
            total += power_piece_integral(anchor, w, s, p, l, h);
        }
        total
    }
}

/// `∫_lo^hi w (t/anchor)^s t^p dt`.
pub(crate) fn power_piece_integral(anchor: f64, w: f64, s: f64, p: f64, lo: f64, hi: f64) -> f64 {
    let e = s + p + 1.0;
    let c = w * anchor.powf(-s);
    if e.abs() < 1e-14 {
        if lo == 0.0 || hi.is_infinite() {
            return f64::INFINITY;
        }
        return c * (hi / lo).ln();
    }
    let upper = if hi.is_infinite() {
        if e < 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        hi.powf(e)
    };
    let lower = if lo == 0.0 {
        if e > 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        lo.powf(e)
    };
    c * (upper - lower) / e
}

const CACHE_LO_EXP: i32 = -12;
const CACHE_HI_EXP: i32 = 12;
const CACHE_PER_DECADE: i32 = 4;
const DENSITY_REL_TOL: f64 = 1e-10;

/// A Bernstein function with drift and one of the supported Lévy families.
///
/// Immutable after construction; the inversion table is filled eagerly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BernsteinSpec", into = "BernsteinSpec")]
pub struct BernsteinFunction {
    spec: BernsteinSpec,
    drift: f64,
    levy: LevyPart,
    eval_cache: Vec<(f64, f64)>,
}

impl TryFrom<BernsteinSpec> for BernsteinFunction {
    type Error = Error;

    fn try_from(spec: BernsteinSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl From<BernsteinFunction> for BernsteinSpec {
    fn from(f: BernsteinFunction) -> Self {
        f.spec
    }
}

impl BernsteinFunction {
    pub fn from_spec(spec: BernsteinSpec) -> Result<Self> {
        let drift = match &spec {
            BernsteinSpec::Stable { drift, .. }
            | BernsteinSpec::Atoms { drift, .. }
            | BernsteinSpec::Density { drift, .. }
            | BernsteinSpec::Drift { drift } => *drift,
        };
        if !(drift >= 0.0 && drift.is_finite()) {
            return Err(Error::arg(format!("drift must be nonnegative and finite, got {drift}")));
        }
        let (drift, levy) = match &spec {
            BernsteinSpec::Stable { alpha, .. } => {
                let alpha = *alpha;
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::arg(format!("stable index must lie in (0, 1], got {alpha}")));
                }
                if alpha == 1.0 {
                    (drift + 1.0, LevyPart::None)
                } else {
                    (drift, LevyPart::Stable { alpha })
                }
            }
            BernsteinSpec::Atoms { atoms, .. } => {
                if atoms.iter().any(|&(t, w)| !(t > 0.0 && w > 0.0 && t.is_finite() && w.is_finite())) {
                    return Err(Error::arg("atom locations and weights must be positive and finite"));
                }
                if atoms.is_empty() {
                    (drift, LevyPart::None)
                } else {
                    (drift, LevyPart::Atoms(atoms.clone()))
                }
            }
            BernsteinSpec::Density { table, .. } => (drift, LevyPart::Density(DensityTable::new(table)?)),
            BernsteinSpec::Drift { .. } => (drift, LevyPart::None),
        };
        if drift == 0.0 && levy == LevyPart::None {
            return Err(Error::arg("Bernstein function is identically zero"));
        }
        let mut f = Self {
            spec,
            drift,
            levy,
            eval_cache: Vec::new(),
        };
        let n = (CACHE_HI_EXP - CACHE_LO_EXP) * CACHE_PER_DECADE;
        f.eval_cache = (0..=n)
            .map(|i| {
                let lam = 10f64.powf(CACHE_LO_EXP as f64 + i as f64 / CACHE_PER_DECADE as f64);
                (lam, f.value(lam))
            })
            .collect();
        Ok(f)
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        Self::from_spec(BernsteinSpec::Stable { alpha, drift: 0.0 })
    }

    pub fn drift_only(b: f64) -> Result<Self> {
        Self::from_spec(BernsteinSpec::Drift { drift: b })
    }

    pub fn atoms(atoms: Vec<(f64, f64)>, drift: f64) -> Result<Self> {
        Self::from_spec(BernsteinSpec::Atoms { atoms, drift })
    }

    pub fn density(table: Vec<(f64, f64)>, drift: f64) -> Result<Self> {
        Self::from_spec(BernsteinSpec::Density { table, drift })
    }

    pub fn spec(&self) -> &BernsteinSpec {
        &self.spec
    }

    /// Effective drift (includes the linear term of `STABLE(1)`).
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn levy(&self) -> &LevyPart {
        &self.levy
    }

    pub fn is_drift_only(&self) -> bool {
        self.levy == LevyPart::None
    }

    /// Total Lévy mass, infinite for stable and for densities with head slope at most −1.
    pub fn levy_mass(&self) -> f64 {
        match &self.levy {
            LevyPart::None => 0.0,
            LevyPart::Stable { .. } => f64::INFINITY,
            LevyPart::Atoms(a) => a.iter().map(|p| p.1).sum(),
            LevyPart::Density(d) => d.moment(0.0, 0.0, f64::INFINITY),
        }
    }

    /// `sup φ`, infinite unless the drift vanishes and the Lévy mass is finite.
    pub fn supremum(&self) -> f64 {
        if self.drift > 0.0 {
            f64::INFINITY
        } else {
            self.levy_mass()
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.supremum().is_finite()
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) || lambda.is_infinite() {
            return Err(Error::domain(format!("φ is evaluated at positive λ, got {lambda}")));
        }
        Ok(self.value(lambda))
    }

    /// `φ(λ)` for `λ ≥ 0` without argument checks.
    pub fn value(&self, lambda: f64) -> f64 {
        self.value_with_tolerance(lambda, DENSITY_REL_TOL)
    }

    fn value_with_tolerance(&self, lambda: f64, rel: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        self.drift * lambda
            + match &self.levy {
                LevyPart::None => 0.0,
                LevyPart::Stable { alpha } => lambda.powf(*alpha),
                LevyPart::Atoms(atoms) => atoms.iter().map(|&(t, w)| -w * (-lambda * t).exp_m1()).sum(),
                LevyPart::Density(d) => density_levy_integral(d, rel, |t| -(-lambda * t).exp_m1(), Some(1.0 / lambda)),
            }
    }

    /// `φ^{(n)}(λ)` for `n ≤ 2`: closed form, or central differences with
    /// step `λ·1e−5` for densities.
    pub fn derivative(&self, n: u32, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::domain(format!("derivative requires λ > 0, got {lambda}")));
        }
        match n {
            0 => return Ok(self.value(lambda)),
            1 | 2 => {}
            _ => return Err(Error::arg("derivative order must be at most 2")),
        }
        let drift_part = if n == 1 { self.drift } else { 0.0 };
        let levy = match &self.levy {
            LevyPart::None => 0.0,
            LevyPart::Stable { alpha } => {
                if n == 1 {
                    alpha * lambda.powf(alpha - 1.0)
                } else {
                    alpha * (alpha - 1.0) * lambda.powf(alpha - 2.0)
                }
            }
            LevyPart::Atoms(atoms) => atoms
                .iter()
                .map(|&(t, w)| {
                    let e = w * (-lambda * t).exp();
                    if n == 1 {
                        t * e
                    } else {
                        -t * t * e
                    }
                })
                .sum(),
            LevyPart::Density(_) => {
                let h = lambda * 1e-5;
                let f = |x: f64| self.value_with_tolerance(x, 1e-13) - self.drift * x;
                if n == 1 {
                    (f(lambda + h) - f(lambda - h)) / (2.0 * h)
                } else {
                    (f(lambda + h) - 2.0 * f(lambda) + f(lambda - h)) / (h * h)
                }
            }
        };
        Ok(drift_part + levy)
    }

    /// The λ with `φ(λ) = y`, by bisection on a geometrically grown bracket.
    pub fn eval_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || y.is_infinite() {
            return Err(Error::domain(format!("φ⁻¹ is evaluated at positive finite y, got {y}")));
        }
        let sup = self.supremum();
        if y >= sup {
            return Err(Error::Range(format!("{y} is not below sup φ = {sup}")));
        }
        let idx = self.eval_cache.partition_point(|&(_, v)| v < y);
        let (mut lo, mut hi) = if idx == 0 {
            let mut lo = self.eval_cache[0].0;
            while self.value(lo) > y {
                lo *= 0.1;
            }
            (lo, self.eval_cache[0].0)
        } else if idx == self.eval_cache.len() {
            let mut hi = self.eval_cache[idx - 1].0;
            while self.value(hi) < y {
                hi *= 10.0;
                if hi.is_infinite() {
                    return Err(Error::Range(format!("{y} exceeds φ on every finite λ")));
                }
            }
            (self.eval_cache[idx - 1].0, hi)
        } else {
            (self.eval_cache[idx - 1].0, self.eval_cache[idx].0)
        };
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi || hi / lo - 1.0 < 2.0 * f64::EPSILON {
                break;
            }
            let v = self.value(mid);
            if v == y {
                return Ok(mid);
            }
            if v < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (vl, vh) = (self.value(lo), self.value(hi));
        Ok(if (vl - y).abs() <= (vh - y).abs() { lo } else { hi })
    }

    /// `κ(b) = (φ⁻¹(1/b))^{−1/2}`.
    pub fn kappa(&self, b: f64) -> Result<f64> {
        if !(b > 0.0) {
            return Err(Error::domain(format!("κ requires b > 0, got {b}")));
        }
        Ok(1.0 / self.eval_inverse(1.0 / b)?.sqrt())
    }

    /// Jump kernel `j(r) = ∫(4πt)^{−d/2} e^{−r²/4t} μ(dt)` of `φ(Δ)` on `ℝ^d`.
    pub(crate) fn jump_density(&self, dim: usize, r: f64) -> f64 {
        let d = dim as f64;
        match &self.levy {
            LevyPart::None => 0.0,
            LevyPart::Stable { alpha } => stable_jump_constant(dim, *alpha) * r.powf(-d - 2.0 * alpha),
            LevyPart::Atoms(atoms) => atoms
                .iter()
                .map(|&(t, w)| w * (4.0 * std::f64::consts::PI * t).powf(-0.5 * d) * (-r * r / (4.0 * t)).exp())
                .sum(),
            LevyPart::Density(tab) => {
                let g = |t: f64| (4.0 * std::f64::consts::PI * t).powf(-0.5 * d) * (-r * r / (4.0 * t)).exp();
                density_levy_integral(tab, 1e-10, g, Some(r * r / (2.0 * d)))
            }
        }
    }
}

/// `c(d, α)` with `j(r) = c(d, α) r^{−d−2α}` for the stable family.
pub fn stable_jump_constant(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    alpha / gamma(1.0 - alpha)
        * (4.0 * std::f64::consts::PI).powf(-0.5 * d)
        * gamma(0.5 * d + alpha)
        * 4f64.powf(0.5 * d + alpha)
}

/// `∫ g(t) μ(dt)` for a density table, integrated in `u = ln t` with knots
/// (and an optional scale hint) as breakpoints.
pub(crate) fn density_levy_integral(d: &DensityTable, rel: f64, g: impl Fn(f64) -> f64, hint: Option<f64>) -> f64 {
    let h = |u: f64| {
        let t = u.exp();
        let v = g(t) * d.density(t) * t;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let tol = Tolerance::new(0.0, rel).with_max_panels(4000);
    let u0 = d.knots[0].ln();
    let un = d.knots.last().unwrap().ln();
    let mut bps: Vec<f64> = d.knots.iter().map(|k| k.ln()).collect();
    if let Some(s) = hint {
        let us = s.ln();
        if us > u0 && us < un {
            bps.push(us);
        }
    }
    bps.sort_by(|a, b| a.total_cmp(b));
    let middle = integrate(&h, &bps, tol).value;
    let head = integrate_to_infinity(&|v: f64| h(u0 - v), 0.0, tol).value;
    let tail = integrate_to_infinity(&|v: f64| h(un + v), 0.0, tol).value;
    head + middle + tail
}

/// Reproducible lower-scaling certificate for a family of Bernstein functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCertificate {
    pub c0: f64,
    pub delta0: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub pass: bool,
    pub worst_pair: (f64, f64),
}

/// Searches log-spaced pairs `r < R` in `[grid_lo, grid_hi]` for the largest
/// `δ₀` (resolution `1e−3`) and the matching `c₀ ≤ 1` with
/// `min_i φ_i(R)/φ_i(r) ≥ c₀ (R/r)^{δ₀}`.
///
/// The exponent is read off pairs whose ratio `R/r` is at least the square
/// root of the range, so that it reflects scaling rather than local slope;
/// `c₀` then absorbs the remaining pairs.
pub fn scaling_certificate(phis: &[BernsteinFunction], grid_lo: f64, grid_hi: f64, n_grid: usize) -> Result<ScalingCertificate> {
    if phis.is_empty() {
        return Err(Error::arg("scaling certificate needs at least one Bernstein function"));
    }
    if !(grid_lo > 0.0 && grid_hi > grid_lo && grid_hi.is_finite()) {
        return Err(Error::arg("scaling certificate needs 0 < grid_lo < grid_hi"));
    }
    if n_grid < 16 {
        return Err(Error::arg("scaling certificate needs at least 16 grid points"));
    }
    let ln_lo = grid_lo.ln();
    let step = (grid_hi.ln() - ln_lo) / (n_grid - 1) as f64;
    let grid: Vec<f64> = (0..n_grid).map(|i| (ln_lo + step * i as f64).exp()).collect();
    let values: Vec<Vec<f64>> = phis.iter().map(|f| grid.iter().map(|&x| f.value(x)).collect()).collect();
    let ratio = |i: usize, j: usize| -> f64 {
        values
            .iter()
            .map(|v| v[j] / v[i])
            .fold(f64::INFINITY, f64::min)
    };
    let long_span = 0.5 * (grid_hi / grid_lo).ln();
    let mut delta_hat = f64::INFINITY;
    let mut upper_ok = true;
    for i in 0..n_grid {
        for j in i + 1..n_grid {
            let span = step * (j - i) as f64;
            let q = ratio(i, j);
            for v in &values {
                if v[j] / v[i] > (span.exp()) * (1.0 + 1e-12) {
                    upper_ok = false;
                }
            }
            if span >= long_span - 1e-12 {
                delta_hat = delta_hat.min(q.ln() / span);
            }
        }
    }
    let delta0 = ((delta_hat + 1e-9) * 1e3).floor() / 1e3;
    let delta0 = delta0.clamp(0.0, 1.0);
    let mut c0 = 1.0_f64;
    let mut worst = (grid[0], grid[n_grid - 1]);
    let mut worst_margin = f64::INFINITY;
    for i in 0..n_grid {
        for j in i + 1..n_grid {
            let span = step * (j - i) as f64;
            let margin = ratio(i, j) / (delta0 * span).exp();
            if margin < worst_margin {
                worst_margin = margin;
                worst = (grid[i], grid[j]);
            }
            c0 = c0.min(margin);
        }
    }
    let pass = delta0 > 0.0 && c0 > 0.0 && upper_ok;
    Ok(ScalingCertificate {
        c0,
        delta0,
        grid_lo,
        grid_hi,
        pass,
        worst_pair: worst,
    })
}

/// Sup over `grid` of `λⁿ|φ^{(n)}(λ)|/φ(λ)`, checked for stability under a
/// twofold refinement of the log grid (cap 5%).
pub fn derivative_ratio_check(phi: &BernsteinFunction, n: u32, grid: &[f64]) -> Result<EstimateReport> {
    if !(1..=2).contains(&n) {
        return Err(Error::arg("derivative order must be 1 or 2"));
    }
    if grid.is_empty() || grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("derivative grid must contain positive finite points"));
    }
    let ratio = |lam: f64| -> Result<f64> {
        Ok(lam.powi(n as i32) * phi.derivative(n, lam)?.abs() / phi.value(lam))
    };
    let coarse_sup = grid.iter().map(|&x| ratio(x)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let mut fine = Vec::with_capacity(2 * grid.len());
    for (i, &x) in grid.iter().enumerate() {
        fine.push(x);
        if let Some(&y) = grid.get(i + 1) {
            fine.push((x * y).sqrt());
        }
    }
    let mut report = EstimateReport::new(format!("derivative_ratio_n{n}")).with_delta_cap(0.05);
    for &x in &fine {
        report.push(format!("lambda={x:e}"), ratio(x)?);
    }
    let mut report = report.finish();
    report.refinement_delta = Some(relative_change(coarse_sup, report.sup));
    report.pass = report.evaluate_pass();
    Ok(report)
}

/// Block structure `(ℓ, d⃗, φ⃗)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    pub dims: Vec<usize>,
    pub phis: Vec<BernsteinFunction>,
}

impl Anisotropy {
    pub fn new(dims: Vec<usize>, phis: Vec<BernsteinFunction>) -> Result<Self> {
        let a = Self { dims, phis };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::arg("anisotropy needs at least one block"));
        }
        if self.dims.len() != self.phis.len() {
            return Err(Error::arg(format!(
                "anisotropy has {} block dimensions but {} Bernstein functions",
                self.dims.len(),
                self.phis.len()
            )));
        }
        if let Some(d) = self.dims.iter().find(|d| !(1..=3).contains(*d)) {
            return Err(Error::arg(format!("block dimension {d} is outside the supported range 1..=3")));
        }
        Ok(())
    }

    pub fn ell(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// `Σ_i φ_i(|ξ_i|²)` for per-block squared norms.
    pub fn symbol(&self, block_sq_norms: &[f64]) -> f64 {
        self.phis.iter().zip(block_sq_norms).map(|(f, &s)| f.value(s)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(BernsteinFunction::stable(0.5).unwrap().eval(4.0).unwrap(), 2.0);
        assert_eq!(BernsteinFunction::drift_only(2.0).unwrap().eval(3.0).unwrap(), 6.0);
        let a = BernsteinFunction::atoms(vec![(1.0, 1.0)], 0.0).unwrap();
        assert!(close(a.eval(std::f64::consts::LN_2).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn eval_rejects_nonpositive_lambda() {
        let f = BernsteinFunction::stable(0.5).unwrap();
        assert!(matches!(f.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(f.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn density_rejects_nonintegrable_tables() {
        // t^{-2.5} near zero
        let r = BernsteinFunction::density(vec![(1.0, 1.0), (2.0, 2f64.powf(-2.5))], 0.0);
        assert!(matches!(r, Err(Error::Integrability(_))));
        // t^{-0.5} at infinity
        let r = BernsteinFunction::density(vec![(1.0, 1.0), (2.0, 2f64.powf(-0.5))], 0.0);
        assert!(matches!(r, Err(Error::Integrability(_))));
    }

    #[test]
    fn density_table_reproduces_stable() {
        // A pure power table t^{-1-α} scaled by α/Γ(1−α) is the stable measure.
        let alpha: f64 = 0.5;
        let c = alpha / gamma(1.0 - alpha);
        let table = vec![(1.0, c), (2.0, c * 2f64.powf(-1.0 - alpha))];
        let f = BernsteinFunction::density(table, 0.0).unwrap();
        for &lam in &[1e-3, 0.1, 1.0, 7.0, 300.0] {
            let v = f.eval(lam).unwrap();
            assert!(close(v, lam.powf(alpha), 1e-9), "λ={lam}: {v}");
        }
    }

    #[test]
    fn inverse_examples() {
        let f = BernsteinFunction::stable(0.5).unwrap();
        assert!(close(f.eval_inverse(2.0).unwrap(), 4.0, 1e-14));
        let g = BernsteinFunction::drift_only(1.0).unwrap();
        assert!(close(g.eval_inverse(7.0).unwrap(), 7.0, 1e-14));
        let a = BernsteinFunction::atoms(vec![(1.0, 1.0)], 0.0).unwrap();
        assert!(close(a.eval_inverse(0.5).unwrap(), std::f64::consts::LN_2, 1e-13));
        assert!(matches!(a.eval_inverse(1.0), Err(Error::Range(_))));
        assert!(matches!(a.eval_inverse(3.0), Err(Error::Range(_))));
    }

    #[test]
    fn kappa_examples() {
        let g = BernsteinFunction::drift_only(1.0).unwrap();
        assert!(close(g.kappa(4.0).unwrap(), 2.0, 1e-14));
        let f = BernsteinFunction::stable(0.5).unwrap();
        assert!(close(f.kappa(0.25).unwrap(), 0.25, 1e-14));
        let h = BernsteinFunction::stable(0.25).unwrap();
        assert!(close(h.kappa(3.0).unwrap(), 9.0, 1e-13));
    }

    #[test]
    fn certificate_examples() {
        let phis = vec![BernsteinFunction::stable(0.3).unwrap(), BernsteinFunction::stable(0.7).unwrap()];
        let c = scaling_certificate(&phis, 1e-3, 1e3, 32).unwrap();
        assert!(c.pass);
        assert_eq!(c.delta0, 0.3);
        assert!(close(c.c0, 1.0, 1e-12));

        let c = scaling_certificate(&[BernsteinFunction::drift_only(1.0).unwrap()], 1e-3, 1e3, 32).unwrap();
        assert!(c.pass);
        assert_eq!(c.delta0, 1.0);
        assert!(close(c.c0, 1.0, 1e-12));

        let a = BernsteinFunction::atoms(vec![(1.0, 1.0)], 0.0).unwrap();
        let c = scaling_certificate(&[a], 1.0, 1e6, 64).unwrap();
        assert!(!c.pass);
        assert_eq!(c.delta0, 0.0);
    }

    #[test]
    fn certificate_rejects_empty_list() {
        assert!(matches!(scaling_certificate(&[], 1.0, 2.0, 16), Err(Error::Argument(_))));
    }

    #[test]
    fn derivative_ratio_examples() {
        let grid: Vec<f64> = (0..41).map(|i| 10f64.powf(-4.0 + 0.2 * i as f64)).collect();
        let f = BernsteinFunction::stable(0.5).unwrap();
        let r1 = derivative_ratio_check(&f, 1, &grid).unwrap();
        assert!(close(r1.sup, 0.5, 1e-12) && r1.pass);
        let r2 = derivative_ratio_check(&f, 2, &grid).unwrap();
        assert!(close(r2.sup, 0.25, 1e-12) && r2.pass);

        // Oracle: λe^{−λ}/(1 − e^{−λ}) is decreasing with limit 1 at 0.
        let a = BernsteinFunction::atoms(vec![(1.0, 1.0)], 0.0).unwrap();
        let r = derivative_ratio_check(&a, 1, &grid).unwrap();
        let oracle = grid.iter().map(|&l| l * (-l).exp() / -(-l).exp_m1()).fold(0.0, f64::max);
        assert!(r.sup <= 1.0 && close(r.sup, oracle, 1e-9));
    }

    #[test]
    fn density_derivatives_by_differences() {
        let alpha: f64 = 0.5;
        let c = alpha / gamma(1.0 - alpha);
        let f = BernsteinFunction::density(vec![(1.0, c), (2.0, c * 2f64.powf(-1.0 - alpha))], 0.0).unwrap();
        let d1 = f.derivative(1, 2.0).unwrap();
        assert!(close(d1, 0.5 * 2f64.powf(-0.5), 1e-6), "{d1}");
        let d2 = f.derivative(2, 2.0).unwrap();
        assert!(close(d2, -0.25 * 2f64.powf(-1.5), 5e-3), "{d2}");
    }

    #[test]
    fn spec_round_trip_through_json() {
        let text = r#"{"kind":"atoms","atoms":[[1.0,1.0]],"drift":0}"#;
        let f: BernsteinFunction = serde_json::from_str(text).unwrap();
        let back = serde_json::to_string(&f).unwrap();
        let g: BernsteinFunction = serde_json::from_str(&back).unwrap();
        assert_eq!(f, g);
        let bad = r#"{"kind":"stable","alpha":1.5}"#;
        assert!(serde_json::from_str::<BernsteinFunction>(bad).is_err());
    }

    #[test]
    fn stable_jump_constant_is_cauchy_for_half() {
        let c = stable_jump_constant(1, 0.5);
        assert!(close(c, 1.0 / std::f64::consts::PI, 1e-14));
    }

    fn families() -> Vec<BernsteinFunction> {
        vec![
            BernsteinFunction::stable(0.3).unwrap(),
            BernsteinFunction::stable(0.75).unwrap(),
            BernsteinFunction::drift_only(1.5).unwrap(),
            BernsteinFunction::atoms(vec![(0.5, 2.0), (3.0, 0.25)], 0.1).unwrap(),
            BernsteinFunction::from_spec(BernsteinSpec::Stable { alpha: 0.5, drift: 0.7 }).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn monotone_and_concave(which in 0usize..5, x in -4.0f64..4.0, h in 0.01f64..1.0) {
            let f = &families()[which];
            let (a, b, c) = (10f64.powf(x), 10f64.powf(x + h), 10f64.powf(x + 2.0 * h));
            let (fa, fb, fc) = (f.value(a), f.value(b), f.value(c));
            prop_assert!(fa <= fb && fb <= fc);
            // Concavity: the chord slope decreases.
            let s1 = (fb - fa) / (b - a);
            let s2 = (fc - fb) / (c - b);
            prop_assert!(s2 <= s1 * (1.0 + 1e-9));
        }

        #[test]
        fn inverse_is_left_inverse(which in 0usize..5, x in -4.0f64..4.0) {
            let f = &families()[which];
            let lam = 10f64.powf(x);
            let back = f.eval_inverse(f.value(lam)).unwrap();
            prop_assert!((back - lam).abs() <= 1e-10 * lam);
        }

        #[test]
        fn stable_certificate_recovers_alpha(alpha in 0.05f64..0.999) {
            let f = BernsteinFunction::stable(alpha).unwrap();
            let c = scaling_certificate(&[f], 1e-2, 1e2, 16).unwrap();
            prop_assert!(c.pass);
            prop_assert!((c.delta0 - alpha).abs() <= 1e-3);
            prop_assert!(c.c0 >= 0.999);
        }

        #[test]
        fn stable_kappa_is_power(alpha in 0.1f64..1.0, b in 1e-3f64..1e3) {
            let f = BernsteinFunction::stable(alpha).unwrap();
            let k = f.kappa(b).unwrap();
            prop_assert!((k - b.powf(0.5 / alpha)).abs() <= 1e-10 * k);
            prop_assert!(f.kappa(b * 1.01).unwrap() > k);
        }
    }
}
