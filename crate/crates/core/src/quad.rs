//! Adaptive Gauss–Kronrod quadrature.
//!
//! Global bisection on a set of panels seeded by caller breakpoints, a map
//! for semi-infinite intervals, and Wynn's epsilon acceleration for sums of
//! oscillation panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// Kronrod abscissae of the 7/15 rule; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Upper bound on the number of live panels.
    pub max_panels: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_panels: 400_000,
        }
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// One Kronrod-15 panel: returns (kronrod value, error estimate, |f| integral).
pub fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_g = f_center * WG[3];
    let mut res_k = f_center * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err, res_abs)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, starting from one
/// panel per consecutive pair of breakpoints and bisecting the worst panel
/// until the summed error estimate meets `tol`.
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(f: &F, breakpoints: &[f64], tol: Tolerance) -> Quadrature {
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::with_capacity(breakpoints.len() * 2);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let (value, err, _) = gk15(f, a, b);
        evaluations += 15;
        total += value;
        total_err += err;
        heap.push(Panel { a, b, value, err });
    }
    let mut iterations = 0usize;
    while total_err > tol.target(total) && heap.len() < tol.max_panels {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let (v1, e1, _) = gk15(f, worst.a, mid);
        let (v2, e2, _) = gk15(f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        iterations += 1;
        if iterations % 512 == 0 {
            // Resum to keep the running totals free of cancellation drift.
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let abs_error: f64 = panels.iter().map(|p| p.err).sum();
    Quadrature {
        value,
        abs_error,
        evaluations,
        converged: abs_error <= tol.target(value),
    }
}

/// Integrates over `[a, ∞)` through the map `x = a + (1 - w) / w`, which
/// keeps full floating-point resolution near `w = 0` for algebraic tails.
pub fn integrate_to_infinity<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, tol: Tolerance) -> Quadrature {
    let g = |w: f64| {
        let x = a + (1.0 - w) / w;
        let v = f(x) / (w * w);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut bps: Vec<f64> = (0..60).map(|k| 0.5f64.powi(60 - k)).collect();
    bps.insert(0, 0.0);
    bps.push(1.0);
    integrate(&g, &bps, tol)
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums. Returns
/// the accelerated limit and a crude error estimate taken from the last two
/// diagonal entries.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    if n < 3 {
        let last = partial_sums[n - 1];
        let err = if n == 2 {
            (last - partial_sums[0]).abs()
        } else {
            f64::INFINITY
        };
        return (last, err);
    }
    // Columns e_{-1} = 0, e_0 = S_k, e_{j+1}(k) = e_{j-1}(k+1) + 1/(e_j(k+1) - e_j(k)).
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial_sums.to_vec();
    let mut estimates = vec![partial_sums[n - 1]];
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        let mut broken = false;
        for k in 0..cur.len() - 1 {
            let diff = cur[k + 1] - cur[k];
            if diff == 0.0 || !diff.is_finite() {
                broken = true;
                break;
            }
            next.push(prev[k + 1] + 1.0 / diff);
        }
        if broken {
            break;
        }
        col += 1;
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    estimates.push(v);
                }
            }
        }
    }
    let m = estimates.len();
    let best = estimates[m - 1];
    let err = if m >= 2 {
        (best - estimates[m - 2]).abs()
    } else {
        (partial_sums[n - 1] - partial_sums[n - 2]).abs()
    };
    (best, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_degree_22() {
        // K15 integrates polynomials up to degree 3n+1 = 22 exactly.
        for deg in 0..=22 {
            let (v, _, _) = gk15(&|x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "degree {deg}: {v} vs {exact}");
        }
    }

    #[test]
    fn gauss_rule_matches_degree_13() {
        // With a degree-13 integrand the Gauss and Kronrod values coincide, so
        // the error estimate collapses to the roundoff floor.
        let (_, err, _) = gk15(&|x: f64| x.powi(13) + 1.0, -1.0, 1.0);
        assert!(err < 1e-13);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let q = integrate(&|x: f64| x.powf(-0.5), &[0.0, 1.0], Tolerance::new(1e-13, 1e-12));
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_power_law() {
        let q = integrate_to_infinity(&|x: f64| x.powf(-1.5), 1.0, Tolerance::new(1e-14, 1e-12));
        assert!((q.value - 2.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&sums);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12, "{v}");
    }
}
