//! Heat kernels of subordinate Brownian motions, their operator-applied
//! variants, jump kernels, and the quantitative bound reports.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::bernstein::{scaling_certificate, Anisotropy, BernsteinFunction, LevyPart};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, wynn_epsilon, Tolerance};
use crate::report::{relative_change, EstimateReport};
use crate::special::radial_profile_derivative;

/// Exponent level at which the Fourier integrand is cut: `tφ(Ξ²) = 46`.
pub const TRUNCATION_LEVEL: f64 = 46.0;

/// Admissible fractional powers in the diagnostics.
pub const NU_MENU: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy)]
pub struct KernelQuery<'a> {
    pub phi: &'a BernsteinFunction,
    pub dim: usize,
    pub t: f64,
    pub r: f64,
    pub k: u32,
    pub m: u32,
    pub nu: f64,
}

impl<'a> KernelQuery<'a> {
    pub fn heat(phi: &'a BernsteinFunction, dim: usize, t: f64, r: f64) -> Self {
        Self {
            phi,
            dim,
            t,
            r,
            k: 0,
            m: 0,
            nu: 1.0,
        }
    }

    pub fn with_powers(mut self, k: u32, m: u32, nu: f64) -> Self {
        self.k = k;
        self.m = m;
        self.nu = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::arg(format!("kernel dimension {} is outside 1..=3", self.dim)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::domain(format!("kernel time must be positive, got {}", self.t)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::domain(format!("kernel radius must be nonnegative, got {}", self.r)));
        }
        if self.k > 4 || self.m > 4 {
            return Err(Error::arg("operator power and derivative order are limited to 4"));
        }
        if !NU_MENU.contains(&self.nu) {
            return Err(Error::arg(format!("fractional power {} is not one of {:?}", self.nu, NU_MENU)));
        }
        if self.phi.is_bounded() {
            return Err(Error::domain(
                "bounded Bernstein function: e^{-tφ} is not integrable and the transition law has an atom",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub abs_error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpKernelValue {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// Set when the Lévy measure vanishes (drift-only symbol).
    pub zero_measure: bool,
}

/// `p(t, r)` by radial Fourier inversion of `e^{−tφ(|ξ|²)}`.
pub fn heat_kernel(q: &KernelQuery) -> Result<KernelValue> {
    if q.k != 0 || q.m != 0 {
        return Err(Error::arg("heat_kernel takes k = m = 0; use kernel_with_operator_powers"));
    }
    kernel_with_operator_powers(q)
}

/// `φ(Δ)^{νk} D^m p(t, ·)` at distance `r` along the first axis.
///
/// The operator factor is `(−1)^k φ(|ξ|²)^{νk}`, which is `(−φ)^k` for
/// `ν = 1`, and `D^m` becomes the m-th radial derivative of the inversion
/// profile.
pub fn kernel_with_operator_powers(q: &KernelQuery) -> Result<KernelValue> {
    q.validate()?;
    if q.phi.is_drift_only() {
        if let Some(v) = gaussian_closed_form(q) {
            return Ok(KernelValue {
                value: v,
                abs_error_estimate: 0.0,
            });
        }
    }
    let phi = q.phi;
    let d = q.dim;
    let xi_max = phi.eval_inverse(TRUNCATION_LEVEL / q.t)?.sqrt();
    let power = q.nu * q.k as f64;
    let sign = if q.k % 2 == 0 { 1.0 } else { -1.0 };
    let radial_power = (q.m + d as u32 - 1) as i32;
    let symbol = |rho: f64| {
        let f = phi.value(rho * rho);
        let op = if q.k == 0 { 1.0 } else { sign * f.powf(power) };
        (-q.t * f).exp() * op * rho.powi(radial_power)
    };
    let integrand = |rho: f64| symbol(rho) * radial_profile_derivative(d, q.m, rho * q.r);
    let constant = match d {
        1 => 1.0 / PI,
        2 => 1.0 / (2.0 * PI),
        _ => 1.0 / (2.0 * PI * PI),
    };

    let mut bps: Vec<f64> = (1..=60).rev().map(|j| xi_max * 0.5f64.powi(j)).collect();
    bps.insert(0, 0.0);
    let coarse = bps.clone();
    if q.r > 0.0 {
        let step = PI / q.r;
        let count = (xi_max / step).floor() as usize;
        bps.extend((1..=count).map(|j| j as f64 * step));
    }
    bps.push(xi_max);
    bps.sort_by(|a, b| a.total_cmp(b));
    bps.dedup();
    let mut coarse = coarse;
    coarse.push(xi_max);

    let mass = integrate(&|rho: f64| symbol(rho).abs(), &coarse, Tolerance::new(0.0, 1e-3).with_max_panels(2000)).value;
    let tol = Tolerance::new(1e-12 * mass, 1e-10);
    let res = integrate(&integrand, &bps, tol);
    let value = constant * res.value;
    let err = constant * res.abs_error;
    if !res.converged && err > 1e-8 * value.abs().max(1.0) {
        return Err(Error::Accuracy {
            context: format!("kernel inversion at t={}, r={}, k={}, m={}", q.t, q.r, q.k, q.m),
            achieved: err,
        });
    }
    Ok(KernelValue {
        value,
        abs_error_estimate: err,
    })
}

/// Closed forms for the Gaussian kernel of `φ(λ) = bλ`.
fn gaussian_closed_form(q: &KernelQuery) -> Option<f64> {
    let b = q.phi.drift();
    let s = 4.0 * b * q.t;
    let d = q.dim as f64;
    if q.k == 0 && q.m == 0 {
        return Some((PI * s).powf(-0.5 * d) * (-q.r * q.r / s).exp());
    }
    if q.dim != 1 || q.nu != 1.0 {
        return None;
    }
    // b^k ∂_x^{2k+m} of the 1-D Gaussian, via physicists' Hermite polynomials.
    let n = 2 * q.k + q.m;
    let y = q.r / s.sqrt();
    let (mut h_prev, mut h) = (1.0, 2.0 * y);
    if n == 0 {
        h = 1.0;
    }
    for j in 1..n {
        let next = 2.0 * y * h - 2.0 * j as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Some(b.powi(q.k as i32) * sign * s.powf(-0.5 * n as f64) * h * (PI * s).powf(-0.5) * (-y * y).exp())
}

/// `j(r) = ∫(4πt)^{−d/2} e^{−r²/4t} μ(dt)`.
pub fn jump_kernel(phi: &BernsteinFunction, dim: usize, r: f64) -> Result<JumpKernelValue> {
    if !(1..=3).contains(&dim) {
        return Err(Error::arg(format!("jump kernel dimension {dim} is outside 1..=3")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("jump kernel radius must be positive, got {r}")));
    }
    let zero_measure = matches!(phi.levy(), LevyPart::None);
    let value = phi.jump_density(dim, r);
    let abs_error_estimate = match phi.levy() {
        LevyPart::Density(_) => 1e-10 * value,
        _ => 0.0,
    };
    Ok(JumpKernelValue {
        value,
        abs_error_estimate,
        zero_measure,
    })
}

/// `∏_i p_i(t, |x_i|)` for a point given block by block.
pub fn product_kernel(a: &Anisotropy, t: f64, x: &[Vec<f64>]) -> Result<KernelValue> {
    if x.len() != a.ell() {
        return Err(Error::arg(format!("point has {} blocks, anisotropy has {}", x.len(), a.ell())));
    }
    let mut value = 1.0_f64;
    let mut err = 0.0_f64;
    for ((xi, &d), phi) in x.iter().zip(&a.dims).zip(&a.phis) {
        if xi.len() != d {
            return Err(Error::arg(format!("block coordinate has length {}, expected {d}", xi.len())));
        }
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let kv = heat_kernel(&KernelQuery::heat(phi, d, t, r))?;
        err = err * kv.value.abs() + value.abs() * kv.abs_error_estimate;
        value *= kv.value;
    }
    Ok(KernelValue {
        value,
        abs_error_estimate: err,
    })
}

/// Radial-quadrature settings for `∫|φ(Δ)^{νk} p(t, ·)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Options {
    /// Simpson points per decade in `r` (a multiple of 8).
    pub points_per_decade: usize,
    /// Inner cut-off relative to the natural length scale `φ⁻¹(1/t)^{−1/2}`.
    pub r_min_factor: f64,
    /// Outer cut-off relative to the same scale (a power of ten).
    pub r_max_factor: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            points_per_decade: 48,
            r_min_factor: 1e-4,
            r_max_factor: 1e3,
        }
    }
}

/// `∫_{ℝ^d} |φ(Δ)^{νk} p(t, x)| dx` by Simpson's rule in `ln r`.
///
/// The mass beyond the outer radius is estimated from the local power-law
/// slope, and the estimates at three decade-spaced outer radii are combined
/// by Aitken extrapolation.
pub fn l1_norm(phi: &BernsteinFunction, dim: usize, t: f64, k: u32, nu: f64, opts: L1Options) -> Result<f64> {
    KernelQuery::heat(phi, dim, t, 0.0).with_powers(k, 0, nu).validate()?;
    let ppd = opts.points_per_decade.max(2) & !1;
    let scale = 1.0 / phi.eval_inverse(1.0 / t)?.sqrt();
    let r_min = opts.r_min_factor * scale;
    let decades = (opts.r_max_factor / opts.r_min_factor).log10().round() as usize;
    let n = decades * ppd;
    let h = std::f64::consts::LN_10 / ppd as f64;
    let u0 = r_min.ln();
    let radii: Vec<f64> = (0..=n).map(|i| (u0 + h * i as f64).exp()).collect();
    let q: Vec<f64> = radii
        .par_iter()
        .map(|&r| kernel_with_operator_powers(&KernelQuery::heat(phi, dim, t, r).with_powers(k, 0, nu)).map(|v| v.value))
        .collect::<Result<Vec<_>>>()?;
    let d = dim as f64;
    let omega = match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    };
    let f: Vec<f64> = q.iter().zip(&radii).map(|(v, r)| v.abs() * r.powf(d)).collect();
    let cap = f[0] / d;
    let mut cumulative = vec![0.0; n + 1];
    for i in (2..=n).step_by(2) {
        cumulative[i] = cumulative[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
    }
    let tail = |i: usize| -> f64 {
        let (a, b) = (q[i - 1].abs(), q[i].abs());
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let sigma = -(b / a).ln() / h;
        if sigma > d + 1e-6 {
            f[i] / (sigma - d)
        } else {
            0.0
        }
    };
    let estimate = |i: usize| omega * (cap + cumulative[i] + tail(i));
    // Truncated estimates at quarter-decade outer radii over the last two
    // decades, accelerated by the epsilon algorithm.
    let stride = ppd / 4;
    if stride < 2 || stride % 2 != 0 || n < 8 * stride {
        return Ok(estimate(n));
    }
    let seq: Vec<f64> = (0..=8).rev().map(|j| estimate(n - j * stride)).collect();
    let (accelerated, err) = wynn_epsilon(&seq);
    if accelerated.is_finite() && err <= (seq[8] - seq[7]).abs() {
        Ok(accelerated)
    } else {
        Ok(seq[8])
    }
}

/// `t^k ∫|φ(Δ)^{νk} p(t,·)|` over `t_values`, with the radial resolution
/// doubled for the refinement delta (cap 10%).
pub fn l1_report(phi: &BernsteinFunction, dim: usize, k: u32, nu: f64, t_values: &[f64], opts: L1Options) -> Result<EstimateReport> {
    let fine_opts = L1Options {
        points_per_decade: 2 * opts.points_per_decade,
        ..opts
    };
    let mut report = EstimateReport::new(format!("kernel_l1_k{k}")).with_delta_cap(0.1);
    let mut delta: f64 = 0.0;
    for &t in t_values {
        let coarse = t.powi(k as i32) * l1_norm(phi, dim, t, k, nu, opts)?;
        let fine = t.powi(k as i32) * l1_norm(phi, dim, t, k, nu, fine_opts)?;
        delta = delta.max(relative_change(coarse, fine));
        report.push(format!("t={t:e}"), fine);
    }
    report.refinement_delta = Some(delta);
    Ok(report.finish())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn require_certificate(phi: &BernsteinFunction) -> Result<()> {
    let cert = scaling_certificate(std::slice::from_ref(phi), 1e-3, 1e3, 32)?;
    if cert.pass {
        Ok(())
    } else {
        Err(Error::domain("the scaling certificate fails for this Bernstein function"))
    }
}

/// Parameters of [`kernel_bound_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundGrid {
    pub t_lo: f64,
    pub t_hi: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Points of the coarse grids; the refined grids have `2n − 1`.
    pub n_t: usize,
    pub n_r: usize,
}

/// Sup over a `(t, r)` grid of `|φ(Δ)^{νk} D^m p| / min(A, B)` with
/// `A = t^{−k} φ⁻¹(1/t)^{(d+m)/2}` and `B = t^{1/2−k} φ(r^{−2})^{1/2} r^{−d−m}`,
/// together with `sup_t t^k ∫|φ(Δ)^{νk} p(t,·)|` (metric `l1_sup`).
pub fn kernel_bound_report(phi: &BernsteinFunction, dim: usize, k: u32, m: u32, nu: f64, grid: BoundGrid) -> Result<EstimateReport> {
    require_certificate(phi)?;
    KernelQuery::heat(phi, dim, 1.0, 0.0).with_powers(k, m, nu).validate()?;
    let fine_t = log_grid(grid.t_lo, grid.t_hi, 2 * grid.n_t - 1);
    let fine_r = log_grid(grid.r_lo, grid.r_hi, 2 * grid.n_r - 1);
    let d = dim as f64;
    let points: Vec<(usize, usize)> = (0..fine_t.len()).flat_map(|i| (0..fine_r.len()).map(move |j| (i, j))).collect();
    let ratios: Vec<f64> = points
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            let (t, r) = (fine_t[i], fine_r[j]);
            let v = kernel_with_operator_powers(&KernelQuery::heat(phi, dim, t, r).with_powers(k, m, nu))?.value;
            let a = t.powi(-(k as i32)) * phi.eval_inverse(1.0 / t)?.powf(0.5 * (d + m as f64));
            let b = t.powf(0.5 - k as f64) * phi.value(r.powi(-2)).sqrt() * r.powf(-d - m as f64);
            Ok(v.abs() / a.min(b))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = EstimateReport::new(format!("kernel_bound_k{k}_m{m}")).with_delta_cap(0.1);
    let mut coarse_sup: f64 = 0.0;
    for (&(i, j), &v) in points.iter().zip(&ratios) {
        report.push(format!("t={:e},r={:e}", fine_t[i], fine_r[j]), v);
        if i % 2 == 0 && j % 2 == 0 {
            coarse_sup = coarse_sup.max(v);
        }
    }
    let mut report = report.finish();
    let ratio_delta = relative_change(coarse_sup, report.sup);

    let l1_t: Vec<f64> = fine_t.iter().step_by(2).copied().collect();
    let l1 = l1_report(
        phi,
        dim,
        k,
        nu,
        &l1_t,
        L1Options {
            points_per_decade: 16,
            r_min_factor: 1e-4,
            r_max_factor: 1e2,
        },
    )?;
    report.metrics.insert("ratio_sup".into(), report.sup);
    report.metrics.insert("ratio_refinement_delta".into(), ratio_delta);
    report.metrics.insert("l1_sup".into(), l1.sup);
    report.metrics.insert("l1_refinement_delta".into(), l1.refinement_delta.unwrap_or(f64::NAN));
    report.refinement_delta = Some(ratio_delta.max(l1.refinement_delta.unwrap_or(f64::INFINITY)));
    report.pass = report.evaluate_pass() && l1.pass;
    Ok(report)
}

/// `∫_{1/λ}^∞ r^{−1} φ(r^{−2})^ν dr / φ(λ²)^ν` over a λ grid, with the grid
/// refined twofold for the refinement delta (cap 10%).
pub fn levy_integral_check(phi: &BernsteinFunction, nu: f64, lambdas: &[f64]) -> Result<EstimateReport> {
    require_certificate(phi)?;
    if !NU_MENU.contains(&nu) {
        return Err(Error::arg(format!("fractional power {nu} is not one of {NU_MENU:?}")));
    }
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::domain("λ grid must contain positive finite values"));
    }
    let ratio = |lam: f64| -> f64 {
        // r = e^s turns the integral into ∫_{−ln λ}^∞ φ(e^{−2s})^ν ds.
        let q = integrate_to_infinity(&|s: f64| phi.value((-2.0 * s).exp()).powf(nu), -lam.ln(), Tolerance::new(0.0, 1e-12));
        if !q.converged && q.abs_error > 1e-8 * q.value.abs() {
            return f64::INFINITY;
        }
        q.value / phi.value(lam * lam).powf(nu)
    };
    let mut fine = Vec::with_capacity(2 * lambdas.len());
    for (i, &x) in lambdas.iter().enumerate() {
        fine.push(x);
        if let Some(&y) = lambdas.get(i + 1) {
            fine.push((x * y).sqrt());
        }
    }
    let coarse_sup = lambdas.iter().map(|&l| ratio(l)).fold(0.0, f64::max);
    let mut report = EstimateReport::new(format!("levy_integral_nu{nu}")).with_delta_cap(0.1);
    for &l in &fine {
        report.push(format!("lambda={l:e}"), ratio(l));
    }
    let mut report = report.finish();
    report.refinement_delta = Some(relative_change(coarse_sup, report.sup));
    report.pass = report.evaluate_pass();
    Ok(report)
}
