//! Time-measurable coefficients `a_i(t, y)`, `b_i(t)` of the operator
//! `L(t) = Σ_i [b_i(t) Δ_{x_i} + a_i(t, ·)·J_i]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bernstein::Anisotropy;
use crate::error::{Error, Result};

const RANGE_SLACK: f64 = 1e-12;

/// A scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimeProfile {
    Constant { value: f64 },
    /// `before` for `t ≤ at`, `after` for `t > at`.
    Step { before: f64, after: f64, at: f64 },
    /// `mean + amplitude·sin(frequency·t)`.
    Sine { mean: f64, amplitude: f64, frequency: f64 },
    /// Piecewise linear through the samples, constant outside.
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl TimeProfile {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Step { before, after, at } => {
                if t <= *at {
                    *before
                } else {
                    *after
                }
            }
            Self::Sine { mean, amplitude, frequency } => mean + amplitude * (frequency * t).sin(),
            Self::Samples { times, values } => {
                let i = times.partition_point(|&s| s <= t);
                if i == 0 {
                    values[0]
                } else if i == times.len() {
                    values[i - 1]
                } else {
                    let w = (t - times[i - 1]) / (times[i] - times[i - 1]);
                    values[i - 1] * (1.0 - w) + values[i] * w
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Step { before, after, .. } => before == after,
            Self::Sine { amplitude, frequency, .. } => *amplitude == 0.0 || *frequency == 0.0,
            Self::Samples { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn validate_shape(&self) -> Result<()> {
        if let Self::Samples { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(Error::arg("sampled profile needs equally many (at least one) times and values"));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::arg("sampled profile times must increase strictly"));
            }
        }
        Ok(())
    }

    /// Values at `times` plus any stored sample values.
    fn probe_values(&self, times: &[f64]) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = times.iter().map(|&t| (t, self.value(t))).collect();
        if let Self::Samples { times, values } = self {
            out.extend(times.iter().copied().zip(values.iter().copied()));
        }
        out
    }
}

/// `a(t, y)` supplied as code; only usable programmatically.
#[derive(Clone)]
pub struct JumpCallable(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for JumpCallable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("JumpCallable(..)")
    }
}

/// The jump coefficient `a_i` of one block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpCoefficient {
    TimeOnly { profile: TimeProfile },
    /// `a(t, y) = negative(t)` for `y < 0`, `positive(t)` for `y > 0`.
    Split { negative: TimeProfile, positive: TimeProfile },
    #[serde(skip)]
    Callable(JumpCallable),
}

impl JumpCoefficient {
    pub fn time_only(profile: TimeProfile) -> Self {
        Self::TimeOnly { profile }
    }

    pub fn constant(value: f64) -> Self {
        Self::time_only(TimeProfile::constant(value))
    }

    pub fn callable(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Callable(JumpCallable(Arc::new(f)))
    }

    pub fn is_time_only(&self) -> bool {
        matches!(self, Self::TimeOnly { .. })
    }

    pub fn time_value(&self, t: f64) -> Option<f64> {
        match self {
            Self::TimeOnly { profile } => Some(profile.value(t)),
            _ => None,
        }
    }

    pub fn value(&self, t: f64, y: f64) -> f64 {
        match self {
            Self::TimeOnly { profile } => profile.value(t),
            Self::Split { negative, positive } => {
                if y < 0.0 {
                    negative.value(t)
                } else {
                    positive.value(t)
                }
            }
            Self::Callable(f) => (f.0)(t, y),
        }
    }
}

/// Coefficients with ellipticity constant `c₁` and reference drifts `b⃗₀`
/// (the drifts of the block Bernstein functions).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub c1: f64,
    pub b0: Vec<f64>,
    pub b: Vec<TimeProfile>,
    pub a: Vec<JumpCoefficient>,
}

impl CoefficientSet {
    /// `a⃗ ≡ 1⃗`, `b⃗ = b⃗₀`.
    pub fn unit(aniso: &Anisotropy) -> Self {
        Self::scaled(aniso, 1.0)
    }

    /// `a⃗ ≡ c·1⃗`, `b⃗ = c·b⃗₀`, with `c₁ = min(c, 1/c)`.
    pub fn scaled(aniso: &Anisotropy, c: f64) -> Self {
        let b0: Vec<f64> = aniso.phis.iter().map(|p| p.drift()).collect();
        Self {
            c1: c.min(1.0 / c),
            b: b0.iter().map(|&b| TimeProfile::constant(c * b)).collect(),
            a: b0.iter().map(|_| JumpCoefficient::constant(c)).collect(),
            b0,
        }
    }

    pub fn ell(&self) -> usize {
        self.b0.len()
    }

    pub fn all_time_only(&self) -> bool {
        self.a.iter().all(JumpCoefficient::is_time_only)
    }

    pub fn is_time_constant(&self) -> bool {
        self.b.iter().all(TimeProfile::is_constant)
            && self.a.iter().all(|a| matches!(a, JumpCoefficient::TimeOnly { profile } if profile.is_constant()))
    }

    /// Per-block `(b_i(t), a_i(t))`; errors on y-dependent jump coefficients.
    pub fn time_only_rates(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.b.iter().map(|p| p.value(t)).collect();
        let a = self
            .a
            .iter()
            .map(|a| a.time_value(t))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Unsupported("y-dependent jump coefficients have no Fourier symbol".into()))?;
        Ok((b, a))
    }

    /// `ψ(t, ξ⃗) = Σ_i b_i|ξ_i|² + a_i(φ_i(|ξ_i|²) − b_{0i}|ξ_i|²)` from
    /// per-block rates, squared norms and symbol values.
    pub fn symbol_from_rates(&self, b: &[f64], a: &[f64], sq: &[f64], phi: &[f64]) -> f64 {
        (0..self.ell())
            .map(|i| b[i] * sq[i] + a[i] * (phi[i] - self.b0[i] * sq[i]).max(0.0))
            .sum()
    }

    /// Checks every range constraint at the given sample times; the error
    /// names the first violated constraint.
    pub fn validate(&self, aniso: &Anisotropy, times: &[f64]) -> Result<()> {
        let ell = aniso.ell();
        if !(self.c1 > 0.0 && self.c1 <= 1.0) {
            return Err(Error::arg(format!("ellipticity constant c1 must lie in (0, 1], got {}", self.c1)));
        }
        if self.b0.len() != ell || self.b.len() != ell || self.a.len() != ell {
            return Err(Error::arg(format!(
                "coefficients declare {}/{}/{} blocks (b0/b/a) but the anisotropy has {ell}",
                self.b0.len(),
                self.b.len(),
                self.a.len()
            )));
        }
        let (lo_a, hi_a) = (self.c1, 1.0 / self.c1);
        let probe_y: Vec<f64> = (-12..=12)
            .flat_map(|k| {
                let y = 10f64.powf(k as f64 / 4.0);
                [-y, y]
            })
            .collect();
        for i in 0..ell {
            let blk = i + 1;
            let drift = aniso.phis[i].drift();
            if (self.b0[i] - drift).abs() > RANGE_SLACK * drift.max(1.0) {
                return Err(Error::arg(format!(
                    "reference drift b0_{blk} = {} must equal the drift {drift} of φ_{blk}",
                    self.b0[i]
                )));
            }
            self.b[i].validate_shape()?;
            for (t, v) in self.b[i].probe_values(times) {
                if self.b0[i] == 0.0 {
                    if v != 0.0 {
                        return Err(Error::arg(format!(
                            "b0_{blk} = 0 forces b_{blk} ≡ 0, but b_{blk}(t={t}) = {v}"
                        )));
                    }
                    continue;
                }
                let (lo, hi) = (self.c1 * self.b0[i], self.b0[i] / self.c1);
                if !(v >= lo * (1.0 - RANGE_SLACK) && v <= hi * (1.0 + RANGE_SLACK)) {
                    return Err(Error::arg(format!(
                        "range constraint c1·b0_{blk} ≤ b_{blk}(t) ≤ b0_{blk}/c1 violated: b_{blk}(t={t}) = {v} outside [{lo}, {hi}]"
                    )));
                }
            }
            let mut samples: Vec<(f64, f64, f64)> = Vec::new();
            match &self.a[i] {
                JumpCoefficient::TimeOnly { profile } => {
                    profile.validate_shape()?;
                    samples.extend(profile.probe_values(times).into_iter().map(|(t, v)| (t, 0.0, v)));
                }
                JumpCoefficient::Split { negative, positive } => {
                    negative.validate_shape()?;
                    positive.validate_shape()?;
                    samples.extend(negative.probe_values(times).into_iter().map(|(t, v)| (t, -1.0, v)));
                    samples.extend(positive.probe_values(times).into_iter().map(|(t, v)| (t, 1.0, v)));
                }
                JumpCoefficient::Callable(f) => {
                    for &t in times {
                        samples.extend(probe_y.iter().map(|&y| (t, y, (f.0)(t, y))));
                    }
                }
            }
            if !self.a[i].is_time_only() && aniso.dims[i] != 1 {
                return Err(Error::arg(format!(
                    "y-dependent jump coefficient a_{blk} requires a one-dimensional block, got d_{blk} = {}",
                    aniso.dims[i]
                )));
            }
            for (t, y, v) in samples {
                if !(v >= lo_a * (1.0 - RANGE_SLACK) && v <= hi_a * (1.0 + RANGE_SLACK)) {
                    return Err(Error::arg(format!(
                        "ellipticity constraint c1 ≤ a_{blk}(t, y) ≤ 1/c1 violated: a_{blk}(t={t}, y={y}) = {v} outside [{lo_a}, {hi_a}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::BernsteinFunction;

    fn aniso() -> Anisotropy {
        Anisotropy::new(
            vec![1, 1],
            vec![BernsteinFunction::stable(0.5).unwrap(), BernsteinFunction::drift_only(1.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn unit_and_scaled_sets_validate() {
        let a = aniso();
        let times = [0.0, 0.5, 1.0];
        CoefficientSet::unit(&a).validate(&a, &times).unwrap();
        CoefficientSet::scaled(&a, 0.5).validate(&a, &times).unwrap();
        CoefficientSet::scaled(&a, 2.0).validate(&a, &times).unwrap();
    }

    #[test]
    fn out_of_range_jump_coefficient_is_named() {
        let a = aniso();
        let mut c = CoefficientSet::unit(&a);
        c.c1 = 0.5;
        c.a[0] = JumpCoefficient::time_only(TimeProfile::Step { before: 1.0, after: 3.0, at: 0.5 });
        let err = c.validate(&a, &[0.0, 1.0]).unwrap_err().to_string();
        assert!(err.contains("ellipticity constraint"), "{err}");
        assert!(err.contains("a_1"), "{err}");
    }

    #[test]
    fn zero_reference_drift_forces_zero_b() {
        let a = aniso();
        let mut c = CoefficientSet::unit(&a);
        c.b[0] = TimeProfile::constant(0.1);
        let err = c.validate(&a, &[0.0]).unwrap_err().to_string();
        assert!(err.contains("forces b_1"), "{err}");
    }

    #[test]
    fn split_coefficient_and_profiles() {
        let a = aniso();
        let mut c = CoefficientSet::unit(&a);
        c.c1 = 0.5;
        c.a[0] = JumpCoefficient::Split {
            negative: TimeProfile::constant(0.5),
            positive: TimeProfile::constant(2.0),
        };
        c.validate(&a, &[0.0, 1.0]).unwrap();
        assert_eq!(c.a[0].value(0.0, -1.0), 0.5);
        assert_eq!(c.a[0].value(0.0, 1.0), 2.0);
        assert!(c.time_only_rates(0.0).is_err());
        let s = TimeProfile::Samples { times: vec![0.0, 1.0], values: vec![1.0, 2.0] };
        assert_eq!(s.value(0.25), 1.25);
        assert_eq!(s.value(5.0), 2.0);
    }

    #[test]
    fn config_records_round_trip() {
        let json = r#"{"c1":0.5,"b0":[0.0],"b":[{"kind":"constant","value":0.0}],
            "a":[{"kind":"split","negative":{"kind":"constant","value":0.5},"positive":{"kind":"constant","value":2.0}}]}"#;
        let c: CoefficientSet = serde_json::from_str(json).unwrap();
        let back: CoefficientSet = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(format!("{c:?}"), format!("{back:?}"));
    }
}
