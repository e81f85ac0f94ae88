//! Growth diagnostics for the space-time multiplier
//! `m(τ, ξ₁, ξ₂) = S/(iτ + S)`, `S = |ξ₁|^{2δ₁} + |ξ₂|^{2δ₂}`, which fails the
//! Mikhlin and Marcinkiewicz conditions.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, Tolerance};

/// Slope margin below the predicted growth exponent.
pub const SLOPE_MARGIN: f64 = 0.15;
pub const RESIDUAL_LIMIT: f64 = 0.2;
pub const DEFAULT_SAMPLES: usize = 1 << 16;

/// Which expression for `Re ∂_{ξ₁}m` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeForm {
    /// `S′·2Sτ²/(S² + τ²)²`, the derivative of `m`.
    #[default]
    Exact,
    /// `S′·2Sτ²/(S² + τ²)`, with a single power in the denominator.
    Unsquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierInputs {
    pub delta1: f64,
    pub delta2: f64,
    pub r_grid: Vec<f64>,
    pub j_grid: Vec<i32>,
    pub samples_per_radius: usize,
    /// Starting index into the low-discrepancy sequence.
    pub sequence_offset: u64,
    pub form: DerivativeForm,
}

impl MultiplierInputs {
    /// Twelve radii over `[1, 10⁴]`, dyadic levels `0..=11`, `2^16` points.
    pub fn new(delta1: f64, delta2: f64) -> Self {
        Self {
            delta1,
            delta2,
            r_grid: (0..12).map(|k| 10f64.powf(4.0 * k as f64 / 11.0)).collect(),
            j_grid: (0..=11).collect(),
            samples_per_radius: DEFAULT_SAMPLES,
            sequence_offset: 0,
            form: DerivativeForm::Exact,
        }
    }

    pub fn with_form(mut self, form: DerivativeForm) -> Self {
        self.form = form;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> SlopeFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    SlopeFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
        points: x.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierDiagnostics {
    pub delta1: f64,
    pub delta2: f64,
    pub form: DerivativeForm,
    pub r_grid: Vec<f64>,
    /// `R^{−1/2}(∫_{R<|ζ|<2R}|Re ∂_{ξ₁}m|²)^{1/2}` per radius.
    pub annulus: Vec<f64>,
    /// Fit of `ln quantity` against `ln R`.
    pub annulus_fit: SlopeFit,
    pub j_grid: Vec<i32>,
    /// Dyadic-box integral of `|Re ∂_{ξ₁}m|` per level.
    pub dyadic: Vec<f64>,
    /// Fit of `ln quantity` against `j`.
    pub dyadic_fit: SlopeFit,
    pub threshold: f64,
    pub dyadic_threshold: f64,
    /// Whether the growth condition `δ₁ > 1/4` or `δ₁ + δ₂ > 1/2` holds.
    pub divergence_required: bool,
    pub diverges: bool,
    pub dyadic_diverges: bool,
    pub low_confidence: bool,
}

impl MultiplierDiagnostics {
    /// Both slopes clear their thresholds whenever divergence is required.
    pub fn pass(&self) -> bool {
        !self.divergence_required || (self.diverges && self.dyadic_diverges)
    }
}

struct Symbol {
    d1: f64,
    d2: f64,
    form: DerivativeForm,
}

impl Symbol {
    fn re_dxi1(&self, tau: f64, xi1: f64, xi2: f64) -> f64 {
        let a1 = xi1.abs();
        if a1 == 0.0 {
            return 0.0;
        }
        let s = a1.powf(2.0 * self.d1) + xi2.abs().powf(2.0 * self.d2);
        let ds = 2.0 * self.d1 * a1.powf(2.0 * self.d1 - 1.0) * xi1.signum();
        let q = s * s + tau * tau;
        let den = match self.form {
            DerivativeForm::Exact => q * q,
            DerivativeForm::Unsquared => q,
        };
        ds * 2.0 * s * tau * tau / den
    }
}

/// The `n`-th point of the additive recurrence built on the plastic number
/// (the three-dimensional golden ratio).
fn r3_point(n: u64) -> [f64; 3] {
    const G: f64 = 1.220_744_084_605_759_5;
    let a = [1.0 / G, 1.0 / (G * G), 1.0 / (G * G * G)];
    let nf = n as f64;
    let mut p = [0.0; 3];
    for (k, v) in p.iter_mut().enumerate() {
        *v = (0.5 + nf * a[k]).fract();
    }
    p
}

fn annulus_quantity(sym: &Symbol, r: f64, samples: usize, offset: u64) -> f64 {
    let mut sum = 0.0;
    for n in 0..samples as u64 {
        let [u, v, w] = r3_point(offset + n);
        let rho = r * (1.0 + 7.0 * u).cbrt();
        let ct = 2.0 * v - 1.0;
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        let ph = 2.0 * PI * w;
        let g = sym.re_dxi1(rho * ct, rho * st * ph.cos(), rho * st * ph.sin());
        sum += g * g;
    }
    let volume = 28.0 * PI / 3.0 * r.powi(3);
    (volume * sum / samples as f64).sqrt() / r.sqrt()
}

fn dyadic_quantity(sym: &Symbol, j: i32) -> f64 {
    const BOX: usize = 8;
    let lo = 2f64.powi(j);
    let tol = Tolerance::new(0.0, 1e-10);
    let mut best = 0.0_f64;
    for a in 0..BOX {
        let tau = lo * (1.0 + (a as f64 + 0.5) / BOX as f64);
        for b in 0..BOX {
            let xi2 = lo * (1.0 + (b as f64 + 0.5) / BOX as f64);
            let q = integrate(&|x: f64| sym.re_dxi1(tau, x, xi2).abs(), &[lo, 1.5 * lo, 2.0 * lo], tol);
            best = best.max(q.value);
        }
    }
    // Both signs of ξ₁.
    2.0 * best
}

pub fn mikhlin_marcinkiewicz_diagnostic(inputs: &MultiplierInputs) -> Result<MultiplierDiagnostics> {
    let (d1, d2) = (inputs.delta1, inputs.delta2);
    if !(d1 > 0.0 && d1 < 1.0 && d2 > 0.0 && d2 < 1.0) {
        return Err(Error::arg(format!("δ₁, δ₂ must lie in (0, 1), got ({d1}, {d2})")));
    }
    if inputs.r_grid.len() < 8 || inputs.j_grid.len() < 8 {
        return Err(Error::arg("slope fits need at least 8 radii and 8 dyadic levels"));
    }
    if inputs.r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::arg("radii must be positive"));
    }
    let (rmin, rmax) = inputs
        .r_grid
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
    if rmax / rmin < 1e3 * (1.0 - 1e-12) {
        return Err(Error::arg("radius grid must span at least three decades"));
    }
    if inputs.samples_per_radius == 0 {
        return Err(Error::arg("need at least one sample per radius"));
    }
    let sym = Symbol { d1, d2, form: inputs.form };
    let annulus: Vec<f64> = inputs
        .r_grid
        .par_iter()
        .map(|&r| annulus_quantity(&sym, r, inputs.samples_per_radius, inputs.sequence_offset))
        .collect();
    let dyadic: Vec<f64> = inputs.j_grid.par_iter().map(|&j| dyadic_quantity(&sym, j)).collect();
    let lx: Vec<f64> = inputs.r_grid.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = annulus.iter().map(|q| q.ln()).collect();
    let annulus_fit = fit_line(&lx, &ly);
    let jx: Vec<f64> = inputs.j_grid.iter().map(|&j| j as f64).collect();
    let jy: Vec<f64> = dyadic.iter().map(|q| q.ln()).collect();
    let dyadic_fit = fit_line(&jx, &jy);
    let exponent = 2.0 * d1 - 1.0 + 2.0 * d1.max(d2);
    let threshold = exponent - SLOPE_MARGIN;
    let dyadic_threshold = exponent * LN_2 - SLOPE_MARGIN;
    Ok(MultiplierDiagnostics {
        delta1: d1,
        delta2: d2,
        form: inputs.form,
        r_grid: inputs.r_grid.clone(),
        divergence_required: d1 > 0.25 || d1 + d2 > 0.5,
        diverges: annulus_fit.slope >= threshold,
        dyadic_diverges: dyadic_fit.slope >= dyadic_threshold,
        low_confidence: annulus_fit.residual > RESIDUAL_LIMIT || dyadic_fit.residual > RESIDUAL_LIMIT,
        annulus,
        annulus_fit,
        j_grid: inputs.j_grid.clone(),
        dyadic,
        dyadic_fit,
        threshold,
        dyadic_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_derivative_matches_finite_differences() {
        let sym = Symbol { d1: 0.4, d2: 0.3, form: DerivativeForm::Exact };
        let m = |tau: f64, x1: f64, x2: f64| {
            let s = x1.abs().powf(0.8) + x2.abs().powf(0.6);
            num_complex::Complex64::new(s, 0.0) / num_complex::Complex64::new(s, tau)
        };
        for &(tau, x1, x2) in &[(1.0_f64, 0.7_f64, 2.0_f64), (5.0, -3.0, 0.5), (0.2, 8.0, 1.0)] {
            let h = 1e-6 * x1.abs();
            let fd = (m(tau, x1 + h, x2) - m(tau, x1 - h, x2)) / (2.0 * h);
            let exact = sym.re_dxi1(tau, x1, x2);
            assert!((fd.re - exact).abs() < 1e-7 * exact.abs().max(1e-3), "{fd} vs {exact}");
        }
    }

    #[test]
    fn line_fit_recovers_exact_slope() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v - 1.0).collect();
        let f = fit_line(&x, &y);
        assert!((f.slope - 0.3).abs() < 1e-14 && f.residual < 1e-14);
    }

    #[test]
    fn annulus_sampling_integrates_constants() {
        // With g ≡ 1 the quantity reduces to sqrt(volume / R).
        let mut sum = 0.0;
        let n = 1 << 12;
        for k in 0..n {
            let [u, _, _] = r3_point(k);
            sum += (1.0 + 7.0 * u).cbrt();
        }
        // E[(1 + 7u)^{1/3}] = 3/28 · (8^{4/3} − 1) = 45/28
        assert!((sum / n as f64 - 45.0 / 28.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mikhlin_marcinkiewicz_diagnostic(&MultiplierInputs::new(1.2, 0.4)).is_err());
        let mut i = MultiplierInputs::new(0.4, 0.4);
        i.r_grid = (0..8).map(|k| 1.0 + k as f64).collect();
        assert!(mikhlin_marcinkiewicz_diagnostic(&i).is_err());
    }

    #[test]
    fn unsquared_form_grows_and_exact_form_decays() {
        let mut i = MultiplierInputs::new(0.4, 0.4);
        i.samples_per_radius = 1 << 12;
        let exact = mikhlin_marcinkiewicz_diagnostic(&i).unwrap();
        let unsquared = mikhlin_marcinkiewicz_diagnostic(&i.clone().with_form(DerivativeForm::Unsquared)).unwrap();
        assert!(unsquared.annulus_fit.slope > exact.annulus_fit.slope + 1.0);
        assert!(unsquared.diverges && unsquared.dyadic_diverges);
        assert!((unsquared.annulus_fit.slope - 1.6).abs() < 0.15, "{}", unsquared.annulus_fit.slope);
        assert!(exact.dyadic_fit.slope < 0.0 && !exact.dyadic_diverges, "{}", exact.dyadic_fit.slope);
        assert!(exact.divergence_required);
        let small = MultiplierInputs { samples_per_radius: 1 << 10, ..MultiplierInputs::new(0.2, 0.2) };
        assert!(!mikhlin_marcinkiewicz_diagnostic(&small).unwrap().divergence_required);
    }
}
