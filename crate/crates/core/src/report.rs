use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One sampled ratio together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub tag: String,
    pub value: f64,
}

/// A named numerical inequality check.
///
/// `pass` holds iff `sup <= threshold` (when a threshold is stated) and
/// `refinement_delta < delta_cap` (when a cap is stated), and every value is
/// finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub samples: Vec<RatioSample>,
    pub sup: f64,
    pub refinement_delta: Option<f64>,
    pub threshold: Option<f64>,
    pub delta_cap: Option<f64>,
    pub pass: bool,
    /// Secondary scalars (e.g. a second supremum computed alongside).
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            samples: Vec::new(),
            sup: 0.0,
            refinement_delta: None,
            threshold: None,
            delta_cap: None,
            pass: false,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, tag: impl Into<String>, value: f64) {
        self.samples.push(RatioSample {
            tag: tag.into(),
            value,
        });
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn with_delta_cap(mut self, cap: f64) -> Self {
        self.delta_cap = Some(cap);
        self
    }

    /// Recomputes `sup` from the samples and `pass` from the stated caps.
    pub fn finish(mut self) -> Self {
        self.sup = self
            .samples
            .iter()
            .map(|s| s.value)
            .fold(0.0_f64, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) });
        self.pass = self.evaluate_pass();
        self
    }

    pub fn evaluate_pass(&self) -> bool {
        if !self.sup.is_finite() || self.samples.iter().any(|s| !s.value.is_finite()) {
            return false;
        }
        if let Some(th) = self.threshold {
            if self.sup > th {
                return false;
            }
        }
        match (self.delta_cap, self.refinement_delta) {
            (Some(cap), Some(delta)) => delta.is_finite() && delta < cap,
            (Some(_), None) => false,
            _ => true,
        }
    }
}

/// Relative change `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rule_combines_threshold_and_cap() {
        let mut r = EstimateReport::new("x").with_threshold(1.0).with_delta_cap(0.1);
        r.push("a", 0.5);
        r.refinement_delta = Some(0.05);
        assert!(r.clone().finish().pass);
        r.refinement_delta = Some(0.2);
        assert!(!r.clone().finish().pass);
        r.refinement_delta = Some(0.0);
        r.push("b", 1.5);
        assert!(!r.finish().pass);
    }

    #[test]
    fn infinite_sample_fails() {
        let mut r = EstimateReport::new("x");
        r.push("a", f64::INFINITY);
        assert!(!r.finish().pass);
    }
}
