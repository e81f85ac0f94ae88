//! Spectral solvers for `∂_t u = L(t)u + f`, `u(0) = 0`, with time-only
//! coefficients, the operator `𝒢`, the elliptic resolvent, and residuals
//! against the quadrature form of the operator.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bernstein::Anisotropy;
use crate::coefficients::{CoefficientSet, JumpCoefficient};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialFft, TorusGrid};
use crate::operators::jump_multiplier_table;

const MODE_CHUNK: usize = 256;

/// `(1 − e^{−z})/z`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 - z / 2.0 * (1.0 - z / 3.0 * (1.0 - z / 4.0))
    } else {
        -(-z).exp_m1() / z
    }
}

/// `(1 − e^{−z}(1 + z))/z²`.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (z * z)
    }
}

/// Per-mode symbol samples `ψ(t_k, ξ⃗)` of a time-only coefficient set.
#[derive(Debug, Clone)]
pub struct SymbolPath {
    pub times: Vec<f64>,
    ell: usize,
    sq: Vec<f64>,
    phi: Vec<f64>,
    rates: Vec<(Vec<f64>, Vec<f64>)>,
    coeffs: CoefficientSet,
}

impl SymbolPath {
    pub fn new(grid: &TorusGrid, aniso: &Anisotropy, coeffs: &CoefficientSet) -> Result<Self> {
        let times = grid.time.as_ref().map_or(vec![0.0], |t| t.samples());
        coeffs.validate(aniso, &times)?;
        if !coeffs.all_time_only() {
            return Err(Error::Unsupported(
                "y-dependent jump coefficients are not Fourier multipliers; use the Monte Carlo solver".into(),
            ));
        }
        let rates = times.iter().map(|&t| coeffs.time_only_rates(t)).collect::<Result<_>>()?;
        Ok(Self {
            ell: aniso.ell(),
            sq: grid.block_sq_norms(),
            phi: grid.symbol_table(aniso)?,
            rates,
            coeffs: coeffs.clone(),
            times,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.sq.len() / self.ell
    }

    pub fn psi(&self, k: usize, mode: usize) -> f64 {
        let (b, a) = &self.rates[k];
        let r = mode * self.ell..(mode + 1) * self.ell;
        self.coeffs.symbol_from_rates(b, a, &self.sq[r.clone()], &self.phi[r])
    }

    /// Trapezoid integral `Ψ(t_k, ξ⃗) = ∫_0^{t_k} ψ(s, ξ⃗) ds`.
    pub fn cumulative(&self, k: usize, mode: usize) -> f64 {
        (1..=k)
            .map(|j| 0.5 * (self.times[j] - self.times[j - 1]) * (self.psi(j - 1, mode) + self.psi(j, mode)))
            .sum()
    }
}

fn require_space_time(f: &GridFunction, aniso: &Anisotropy) -> Result<f64> {
    f.grid.check_anisotropy(aniso)?;
    f.grid
        .time
        .as_ref()
        .map(|t| t.dt())
        .ok_or_else(|| Error::arg("the parabolic solver needs a space-time grid function"))
}

fn spectrum(f: &GridFunction) -> (SpatialFft, Vec<Complex64>) {
    let fft = SpatialFft::new(&f.grid);
    let mut v = f.values.clone();
    fft.forward_all(&mut v);
    (fft, v)
}

/// Exponential-integrator Duhamel recursion on spectra laid out `[k][mode]`
/// with step symbol `(ψ_{k−1} + ψ_k)/2`, exact for piecewise-linear forcing.
fn duhamel(fhat: &[Complex64], n_modes: usize, dt: f64, psi: &(dyn Fn(usize, usize) -> f64 + Sync)) -> Vec<Complex64> {
    let steps = fhat.len() / n_modes;
    let mut u = vec![Complex64::new(0.0, 0.0); fhat.len()];
    for k in 1..steps {
        let (done, rest) = u.split_at_mut(k * n_modes);
        let prev = &done[(k - 1) * n_modes..];
        let cur = &mut rest[..n_modes];
        let f0 = &fhat[(k - 1) * n_modes..k * n_modes];
        let f1 = &fhat[k * n_modes..(k + 1) * n_modes];
        cur.par_chunks_mut(MODE_CHUNK).enumerate().for_each(|(c, chunk)| {
            for (o, v) in chunk.iter_mut().enumerate() {
                let m = c * MODE_CHUNK + o;
                let z = 0.5 * (psi(k - 1, m) + psi(k, m)) * dt;
                let (i1, i2) = (phi1(z), phi2(z));
                *v = prev[m] * (-z).exp() + (f0[m] * i2 + f1[m] * (i1 - i2)) * dt;
            }
        });
    }
    u
}

fn finish(f: &GridFunction, fft: &SpatialFft, mut values: Vec<Complex64>) -> GridFunction {
    fft.inverse_all(&mut values);
    GridFunction {
        grid: f.grid.clone(),
        values,
        kind: f.kind,
    }
}

/// Solves `∂_t u = L(t)u + f`, `u(0) = 0` mode by mode.
pub fn solve_parabolic(f: &GridFunction, aniso: &Anisotropy, coeffs: &CoefficientSet) -> Result<GridFunction> {
    let dt = require_space_time(f, aniso)?;
    let path = SymbolPath::new(&f.grid, aniso, coeffs)?;
    let (fft, fhat) = spectrum(f);
    let u = duhamel(&fhat, path.n_modes(), dt, &|k, m| path.psi(k, m));
    Ok(finish(f, &fft, u))
}

/// `𝒢f`: the generator applied to the unit-coefficient solution.
pub fn apply_g(f: &GridFunction, aniso: &Anisotropy) -> Result<GridFunction> {
    let dt = require_space_time(f, aniso)?;
    let ell = aniso.ell();
    let psi: Vec<f64> = f.grid.symbol_table(aniso)?.chunks(ell).map(|c| c.iter().sum()).collect();
    let n_modes = psi.len();
    let (fft, fhat) = spectrum(f);
    let mut u = duhamel(&fhat, n_modes, dt, &|_, m| psi[m]);
    u.par_chunks_mut(n_modes).for_each(|row| row.iter_mut().zip(&psi).for_each(|(v, p)| *v *= -p));
    Ok(finish(f, &fft, u))
}

/// `𝒢_i f = φ_i(Δ_i) u` with `u` the unit-coefficient solution, so that `𝒢 = Σ_i 𝒢_i`.
pub fn apply_g_block(f: &GridFunction, aniso: &Anisotropy, block: usize) -> Result<GridFunction> {
    let dt = require_space_time(f, aniso)?;
    let ell = aniso.ell();
    if block >= ell {
        return Err(Error::arg(format!("block index {block} out of range for {ell} blocks")));
    }
    let table = f.grid.symbol_table(aniso)?;
    let psi: Vec<f64> = table.chunks(ell).map(|c| c.iter().sum()).collect();
    let factor: Vec<f64> = table.chunks(ell).map(|c| c[block]).collect();
    let n_modes = psi.len();
    let (fft, fhat) = spectrum(f);
    let mut u = duhamel(&fhat, n_modes, dt, &|_, m| psi[m]);
    u.par_chunks_mut(n_modes).for_each(|row| row.iter_mut().zip(&factor).for_each(|(v, p)| *v *= -p));
    Ok(finish(f, &fft, u))
}

/// Solves `L u − λu = f` for time-constant coefficients.
pub fn solve_elliptic(f: &GridFunction, aniso: &Anisotropy, coeffs: &CoefficientSet, lambda: f64) -> Result<GridFunction> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("resolvent parameter λ must be positive, got {lambda}")));
    }
    if f.is_space_time() {
        return Err(Error::arg("the elliptic solver needs a space-only grid function"));
    }
    f.grid.check_anisotropy(aniso)?;
    if !coeffs.is_time_constant() {
        return Err(Error::arg("the elliptic solver needs time-constant coefficients"));
    }
    let path = SymbolPath::new(&f.grid, aniso, coeffs)?;
    let (fft, mut v) = spectrum(f);
    v.iter_mut().enumerate().for_each(|(m, x)| *x = -*x / (path.psi(0, m) + lambda));
    Ok(finish(f, &fft, v))
}

/// Second-order time derivative of spectra laid out `[k][mode]`.
fn time_derivative(u: &[Complex64], n_modes: usize, dt: f64) -> Vec<Complex64> {
    let steps = u.len() / n_modes;
    let row = |k: usize| &u[k * n_modes..(k + 1) * n_modes];
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    for k in 0..steps {
        let o = &mut out[k * n_modes..(k + 1) * n_modes];
        for m in 0..n_modes {
            o[m] = if steps < 3 {
                let (a, b) = if k == 0 { (0, 1) } else { (k - 1, k) };
                (row(b)[m] - row(a)[m]) / dt
            } else if k == 0 {
                (-row(0)[m] * 3.0 + row(1)[m] * 4.0 - row(2)[m]) / (2.0 * dt)
            } else if k == steps - 1 {
                (row(k)[m] * 3.0 - row(k - 1)[m] * 4.0 + row(k - 2)[m]) / (2.0 * dt)
            } else {
                (row(k + 1)[m] - row(k - 1)[m]) / (2.0 * dt)
            };
        }
    }
    out
}

/// Jump multiplier of one block at one time sample, indexed by mode.
enum BlockOperator {
    /// Fixed table times a time profile.
    Scaled { table: Vec<Complex64> },
    /// `negative(t)·T₋ + positive(t)·T₊`.
    Split { neg: Vec<Complex64>, pos: Vec<Complex64> },
    /// Recomputed per time sample.
    PerTime(Vec<Vec<Complex64>>),
    /// Symbol of a multi-dimensional block: `φ − b₀|ξ|²` per mode.
    Spectral(Vec<f64>),
}

/// `‖∂_t u − L(t)u − f‖₂ / ‖f‖₂` over all time samples; the jump parts of
/// one-dimensional blocks use the singular quadrature of
/// [`crate::operators::jump_symbol`].
pub fn residual(u: &GridFunction, f: &GridFunction, aniso: &Anisotropy, coeffs: &CoefficientSet) -> Result<f64> {
    u.same_shape(f)?;
    let dt = require_space_time(f, aniso)?;
    let grid = &f.grid;
    let times = grid.time.as_ref().unwrap().samples();
    coeffs.validate(aniso, &times)?;
    let ell = aniso.ell();
    let n_modes = grid.spatial_len();
    let sq = grid.block_sq_norms();
    let axis_blocks = grid.axis_blocks();
    let shape = grid.spatial_shape();
    let bound = 1.0 / coeffs.c1;

    let mut ops = Vec::with_capacity(ell);
    for i in 0..ell {
        let b = &grid.blocks[i];
        let phi = &aniso.phis[i];
        let op = if b.dim != 1 {
            let table = grid.symbol_table(aniso)?;
            BlockOperator::Spectral(
                (0..n_modes)
                    .map(|m| (table[m * ell + i] - coeffs.b0[i] * sq[m * ell + i]).max(0.0))
                    .collect(),
            )
        } else {
            match &coeffs.a[i] {
                JumpCoefficient::TimeOnly { .. } => BlockOperator::Scaled {
                    table: jump_multiplier_table(phi, &|_| 1.0, 1.0, b.n, b.length)?,
                },
                JumpCoefficient::Split { .. } => BlockOperator::Split {
                    neg: jump_multiplier_table(phi, &|y| if y < 0.0 { 1.0 } else { 0.0 }, 1.0, b.n, b.length)?,
                    pos: jump_multiplier_table(phi, &|y| if y > 0.0 { 1.0 } else { 0.0 }, 1.0, b.n, b.length)?,
                },
                a @ JumpCoefficient::Callable(_) => BlockOperator::PerTime(
                    times
                        .iter()
                        .map(|&t| jump_multiplier_table(phi, &|y| a.value(t, y), bound, b.n, b.length))
                        .collect::<Result<_>>()?,
                ),
            }
        };
        ops.push(op);
    }
    // Axis index of each one-dimensional block's axis per mode.
    let axis_of_block: Vec<Option<usize>> = (0..ell)
        .map(|i| axis_blocks.iter().position(|&b| b == i).filter(|_| grid.blocks[i].dim == 1))
        .collect();
    let strides: Vec<usize> = (0..shape.len()).map(|a| shape[a + 1..].iter().product()).collect();

    let (_, uhat) = spectrum(u);
    let (_, fhat) = spectrum(f);
    let du = time_derivative(&uhat, n_modes, dt);
    let rows: Vec<(f64, f64)> = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let t = times[k];
            let mut num = 0.0;
            let mut den = 0.0;
            for m in 0..n_modes {
                let mut l = Complex64::new(0.0, 0.0);
                for i in 0..ell {
                    let s = sq[m * ell + i];
                    l -= coeffs.b[i].value(t) * s;
                    let idx = axis_of_block[i].map(|a| (m / strides[a]) % shape[a]);
                    l += match &ops[i] {
                        BlockOperator::Scaled { table } => table[idx.unwrap()] * coeffs.a[i].value(t, 0.0),
                        BlockOperator::Split { neg, pos } => {
                            neg[idx.unwrap()] * coeffs.a[i].value(t, -1.0) + pos[idx.unwrap()] * coeffs.a[i].value(t, 1.0)
                        }
                        BlockOperator::PerTime(tabs) => tabs[k][idx.unwrap()],
                        BlockOperator::Spectral(v) => Complex64::new(-v[m] * coeffs.a[i].value(t, 0.0), 0.0),
                    };
                }
                let at = k * n_modes + m;
                let r = du[at] - l * uhat[at] - fhat[at];
                num += r.norm_sqr();
                den += fhat[at].norm_sqr();
            }
            (num, den)
        })
        .collect();
    let (num, den) = rows.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
    // Parseval: the common factor cell/N cancels in the ratio.
    if den == 0.0 {
        let scale = grid.cell_volume() / n_modes as f64 * dt;
        return Ok((num * scale).sqrt());
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::BernsteinFunction;
    use crate::coefficients::TimeProfile;
    use crate::grid::{TimeAxis, ValueKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn aniso() -> Anisotropy {
        Anisotropy::new(
            vec![1, 1],
            vec![BernsteinFunction::stable(0.5).unwrap(), BernsteinFunction::drift_only(1.0).unwrap()],
        )
        .unwrap()
    }

    fn grid(n: usize, steps: usize, horizon: f64) -> TorusGrid {
        TorusGrid::uniform_1d(2, 2.0 * PI, n, Some(TimeAxis { horizon, steps })).unwrap()
    }

    #[test]
    fn integrator_weights_have_series_continuity() {
        for z in [1e-3 * (1.0 - 1e-12), 1e-3 * (1.0 + 1e-12)] {
            assert!((phi1(z) - (-(-z).exp_m1() / z)).abs() < 1e-12);
            assert!((phi2(z) - (1.0 - (-z).exp() * (1.0 + z)) / (z * z)).abs() < 1e-9);
        }
        assert_eq!(phi1(0.0), 1.0);
        assert_eq!(phi2(0.0), 0.5);
    }

    #[test]
    fn constant_forcing_grows_linearly() {
        let a = aniso();
        let g = grid(16, 8, 2.0);
        let f = GridFunction::from_real_fn(g.clone(), |_, _| 3.0);
        let mut c = CoefficientSet::unit(&a);
        c.c1 = 0.5;
        c.a[0] = JumpCoefficient::time_only(TimeProfile::Sine { mean: 1.0, amplitude: 0.5, frequency: 3.0 });
        let u = solve_parabolic(&f, &a, &c).unwrap();
        for k in 0..=8 {
            let t = g.time.as_ref().unwrap().time(k);
            assert!(u.slice(k).iter().all(|v| (v.re - 3.0 * t).abs() < 1e-12 && v.im.abs() < 1e-12));
        }
    }

    #[test]
    fn single_mode_matches_scalar_ode() {
        let a = aniso();
        let g = grid(16, 10, 1.0);
        let f = GridFunction::from_fn(g.clone(), ValueKind::Complex, |_, x| Complex64::from_polar(1.0, 2.0 * x[0] - x[1]));
        let u = solve_parabolic(&f, &a, &CoefficientSet::unit(&a)).unwrap();
        let psi = 2.0 + 1.0;
        for k in 0..=10 {
            let t = g.time.as_ref().unwrap().time(k);
            let amp = -(-t * psi).exp_m1() / psi;
            for (v, w) in u.slice(k).iter().zip(f.slice(k)) {
                assert!((v - w * amp).norm() < 1e-13);
            }
        }
        let gf = apply_g(&f, &a).unwrap();
        for k in 0..=10 {
            let t = g.time.as_ref().unwrap().time(k);
            for (v, w) in gf.slice(k).iter().zip(f.slice(k)) {
                assert!((v + w * (-(-t * psi).exp_m1())).norm() < 1e-12);
            }
        }
    }

    /// Classical RK4 on `u′ = −ψ(t)u + f(t)` with a fine step.
    fn rk4(psi: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64, t_end: f64, steps: usize) -> f64 {
        let h = t_end / steps as f64;
        let rhs = |t: f64, u: f64| -psi(t) * u + f(t);
        let mut u = 0.0;
        for s in 0..steps {
            let t = s as f64 * h;
            let k1 = rhs(t, u);
            let k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2);
            let k4 = rhs(t + h, u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        u
    }

    #[test]
    fn oscillating_drift_matches_dense_ode() {
        let a = aniso();
        let mut c = CoefficientSet::unit(&a);
        c.c1 = 0.3;
        c.b[1] = TimeProfile::Sine { mean: 1.0, amplitude: 1.0 / 1.5, frequency: 1.0 };
        let g = grid(16, 4096, 1.0);
        let f = GridFunction::from_fn(g.clone(), ValueKind::Complex, |t, x| {
            Complex64::from_polar(1.0 + t.cos(), x[0] + 2.0 * x[1])
        });
        let u = solve_parabolic(&f, &a, &c).unwrap();
        let psi = |t: f64| 1.0 + (1.0 + (t.sin()) / 1.5) * 4.0;
        let want = rk4(psi, |t| 1.0 + t.cos(), 1.0, 20000);
        let got = u.slice(4096)[0].norm();
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn elliptic_examples() {
        let a = aniso();
        let g = TorusGrid::uniform_1d(2, 2.0 * PI, 16, None).unwrap();
        let f = GridFunction::from_real_fn(g.clone(), |_, _| 2.0);
        let u = solve_elliptic(&f, &a, &CoefficientSet::unit(&a), 4.0).unwrap();
        assert!(u.values.iter().all(|v| (v.re + 0.5).abs() < 1e-14));
        let f = GridFunction::from_fn(g, ValueKind::Complex, |_, x| Complex64::from_polar(1.0, 3.0 * x[0] + x[1]));
        let u = solve_elliptic(&f, &a, &CoefficientSet::unit(&a), 0.5).unwrap();
        let s = 3.0 + 1.0;
        for (v, w) in u.values.iter().zip(&f.values) {
            assert!((v + w / (s + 0.5)).norm() < 1e-13);
        }
        assert!(solve_elliptic(&u, &a, &CoefficientSet::unit(&a), 0.0).is_err());
    }

    #[test]
    fn time_jump_is_rejected_by_the_spectral_path() {
        let a = aniso();
        let mut c = CoefficientSet::unit(&a);
        c.c1 = 0.5;
        c.a[0] = JumpCoefficient::Split { negative: TimeProfile::constant(0.5), positive: TimeProfile::constant(2.0) };
        let f = GridFunction::zeros(grid(16, 4, 1.0), ValueKind::Real);
        assert!(matches!(solve_parabolic(&f, &a, &c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn residual_examples() {
        let a = aniso();
        let c = CoefficientSet::unit(&a);
        let g = grid(16, 8, 1.0);
        let z = GridFunction::zeros(g.clone(), ValueKind::Real);
        assert_eq!(residual(&z, &z, &a, &c).unwrap(), 0.0);
        let u = GridFunction::from_real_fn(g.clone(), |t, _| 2.0 * t);
        let f = GridFunction::from_real_fn(g, |_, _| 2.0);
        assert!(residual(&u, &f, &a, &c).unwrap() < 1e-13);
    }

    #[test]
    fn residual_converges_at_second_order() {
        let a = aniso();
        let mut c = CoefficientSet::unit(&a);
        c.c1 = 0.5;
        c.a[0] = JumpCoefficient::time_only(TimeProfile::Sine { mean: 1.0, amplitude: 0.5, frequency: 2.0 });
        let mut res = Vec::new();
        for steps in [16, 32, 64] {
            let g = grid(16, steps, 1.0);
            let f = GridFunction::from_real_fn(g, |t, x| (1.0 + t) * (x[0].sin() + (2.0 * x[1]).cos()));
            let u = solve_parabolic(&f, &a, &c).unwrap();
            res.push(residual(&u, &f, &a, &c).unwrap());
        }
        for w in res.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{res:?}");
        }
    }

    fn band_limited(g: &TorusGrid, c: &[(f64, f64)]) -> GridFunction {
        let c = c.to_vec();
        GridFunction::from_real_fn(g.clone(), move |t, x| {
            c.iter()
                .enumerate()
                .map(|(k, (p, q))| {
                    let (kx, ky) = ((k % 3) as f64, (k / 3) as f64);
                    (p + q * t) * (kx * x[0] + ky * x[1] + p).cos()
                })
                .sum()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn linear_causal_and_real(
            c1 in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 9),
            c2 in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 9),
            al in -2.0..2.0f64,
            be in -2.0..2.0f64,
            cut in 1usize..8,
        ) {
            let a = aniso();
            let c = CoefficientSet::scaled(&a, 0.7);
            let g = grid(16, 8, 1.0);
            let f = band_limited(&g, &c1);
            let h = band_limited(&g, &c2);
            let mut comb = f.clone();
            comb.values.iter_mut().zip(&h.values).for_each(|(x, y)| *x = *x * al + y * be);
            let uf = solve_parabolic(&f, &a, &c).unwrap();
            let uh = solve_parabolic(&h, &a, &c).unwrap();
            let uc = solve_parabolic(&comb, &a, &c).unwrap();
            for i in 0..uc.values.len() {
                prop_assert!((uc.values[i] - (uf.values[i] * al + uh.values[i] * be)).norm() < 1e-12);
            }
            prop_assert!(uf.max_imag() < 1e-10);
            // Perturbing f after t_cut leaves u up to t_cut unchanged.
            let mut pert = f.clone();
            for k in cut + 1..=8 {
                pert.slice_mut(k).iter_mut().for_each(|v| *v += 5.0);
            }
            let up = solve_parabolic(&pert, &a, &c).unwrap();
            for k in 0..=cut {
                for (x, y) in up.slice(k).iter().zip(uf.slice(k)) {
                    prop_assert!((x - y).norm() < 1e-13);
                }
            }
        }

        #[test]
        fn g_equals_generator_of_unit_solution(c1 in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 9)) {
            let a = aniso();
            let g = grid(16, 6, 1.0);
            let f = band_limited(&g, &c1);
            let gf = apply_g(&f, &a).unwrap();
            let u = solve_parabolic(&f, &a, &CoefficientSet::unit(&a)).unwrap();
            let space = TorusGrid::uniform_1d(2, 2.0 * PI, 16, None).unwrap();
            for k in 0..=6 {
                let uk = GridFunction { grid: space.clone(), values: u.slice(k).to_vec(), kind: ValueKind::Real };
                let lu = crate::operators::apply_anisotropic_symbol(&uk, &a, 1.0, crate::operators::SymbolMode::Generator).unwrap();
                for (x, y) in lu.values.iter().zip(gf.slice(k)) {
                    prop_assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn elliptic_is_the_long_time_limit() {
        let a = aniso();
        let lambda = 1.0;
        let c = CoefficientSet::unit(&a);
        let horizon = 20.0;
        let g = grid(16, 4000, horizon);
        let space = TorusGrid::uniform_1d(2, 2.0 * PI, 16, None).unwrap();
        let shape = |x: &[f64]| x[0].cos() + (x[1] + 1.0).sin() + 0.3;
        let f = GridFunction::from_real_fn(g, move |t, x| (lambda * t).exp() * shape(x));
        let w = solve_parabolic(&f, &a, &c).unwrap();
        let ue = solve_elliptic(&GridFunction::from_real_fn(space, move |_, x| shape(x)), &a, &c, lambda).unwrap();
        let damp = (-lambda * horizon).exp();
        let mut gap: f64 = 0.0;
        for (x, y) in w.slice(4000).iter().zip(&ue.values) {
            gap = gap.max((-x * damp - y).norm());
        }
        assert!(gap < 1e-4 * ue.max_abs(), "{gap}");
    }
}
