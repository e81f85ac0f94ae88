//! Bessel functions of small integer order and the radial-kernel derivatives
//! used by the Fourier inversion in [`crate::kernels`].

use std::f64::consts::PI;

const ASYMPTOTIC_FROM: f64 = 30.0;

/// `J_0(x), ..., J_4(x)`.
///
/// Small arguments use Miller's backward recurrence normalised by
/// `J_0 + 2 Σ J_{2k} = 1`; large arguments use Hankel's expansion.
pub fn bessel_j0_to_j4(x: f64) -> [f64; 5] {
    let x = x.abs();
    if x == 0.0 {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    if x >= ASYMPTOTIC_FROM {
        let mut out = [0.0; 5];
        for (n, o) in out.iter_mut().enumerate() {
            *o = hankel_asymptotic(n as u32, x);
        }
        return out;
    }
    let start = 2 * ((x as usize + 40) / 2);
    let mut out = [0.0; 5];
    let mut next = 0.0;
    let mut cur = 1e-30;
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds the unnormalised J_{n-1}.
        if n - 1 < 5 {
            out[n - 1] = cur;
        }
        if n - 1 > 0 && (n - 1) % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            next *= 1e-200;
            norm *= 1e-200;
            for o in out.iter_mut() {
                *o *= 1e-200;
            }
        }
    }
    norm += cur;
    for o in out.iter_mut() {
        *o /= norm;
    }
    out
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_j0_to_j4(x)[0]
}

fn hankel_asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev_abs = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > prev_abs {
            break;
        }
        prev_abs = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// m-th derivative of the radial profile `K_d` at `x`, where
/// `K_1 = cos`, `K_2 = J_0`, `K_3 = sin x / x`.
pub fn radial_profile_derivative(dim: usize, m: u32, x: f64) -> f64 {
    match dim {
        1 => (x + m as f64 * 0.5 * PI).cos(),
        2 => {
            let j = bessel_j0_to_j4(x);
            // J_n(-x) = (-1)^n J_n(x); the profile is evaluated at x >= 0 in practice.
            let sgn = |n: usize| if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            match m {
                0 => j[0],
                1 => -sgn(1) * j[1],
                2 => 0.5 * (j[2] - j[0]),
                3 => sgn(1) * 0.25 * (3.0 * j[1] - j[3]),
                4 => 0.125 * (j[4] - 4.0 * j[2] + 3.0 * j[0]),
                _ => panic!("derivative order above 4"),
            }
        }
        3 => sinc_derivative(m, x),
        _ => panic!("radial profile only for dimensions 1 to 3"),
    }
}

fn sinc_derivative(m: u32, x: f64) -> f64 {
    if x.abs() < 1.0 {
        // Taylor series of sum (-1)^n x^{2n} / (2n+1)!, differentiated m times.
        let mut sum = 0.0;
        let mut fact = 1.0; // (2n+1)!
        for n in 0..30u32 {
            if n > 0 {
                fact *= (2 * n) as f64 * (2 * n + 1) as f64;
            }
            let p = 2 * n;
            if p < m {
                continue;
            }
            let mut coeff = 1.0;
            for j in 0..m {
                coeff *= (p - j) as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * coeff * x.powi((p - m) as i32) / fact;
        }
        sum
    } else {
        // Leibniz on sin(x) * x^{-1}.
        let mut sum = 0.0;
        let mut binom = 1.0;
        for j in 0..=m {
            let sin_j = (x + j as f64 * 0.5 * PI).sin();
            let n = m - j;
            let mut inv_n = if n % 2 == 0 { 1.0 } else { -1.0 };
            for i in 1..=n {
                inv_n *= i as f64;
            }
            inv_n /= x.powi(n as i32 + 1);
            sum += binom * sin_j * inv_n;
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        sum
    }
}
