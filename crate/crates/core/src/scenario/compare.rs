use serde::{Deserialize, Serialize};

use super::run::{Metrics, Sample};
use crate::error::ScenarioError;

/// Difference of one metric between runs `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b - a`, when both exist.
    pub absolute: Option<f64>,
    /// `100 (b - a) / |a|`, when both exist and `a` is nonzero; zero when
    /// both are zero.
    pub percent: Option<f64>,
}

impl MetricDelta {
    pub fn new(a: Option<f64>, b: Option<f64>) -> Self {
        let (absolute, percent) = match (a, b) {
            (Some(x), Some(y)) => {
                let pct = if x != 0.0 {
                    Some(100.0 * (y - x) / x.abs())
                } else if y == 0.0 {
                    Some(0.0)
                } else {
                    None
                };
                (Some(y - x), pct)
            }
            _ => (None, None),
        };
        MetricDelta { a, b, absolute, percent }
    }
}

/// Metric deltas between two runs of the same timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub effluent: MetricDelta,
    pub convergence_time: MetricDelta,
    pub max_abs_ao_dev: MetricDelta,
}

impl ComparisonReport {
    /// One line per metric, for terminal output.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
        let mut out = String::from("metric,a,b,delta,delta_pct\n");
        for (name, d) in [
            ("total_effluent_kg", &self.effluent),
            ("convergence_time_s", &self.convergence_time),
            ("max_abs_ao_dev_pct", &self.max_abs_ao_dev),
        ] {
            out.push_str(&format!("{name},{},{},{},{}\n", fmt(d.a), fmt(d.b), fmt(d.absolute), fmt(d.percent)));
        }
        out
    }
}

/// Compare two metric sets directly.
pub fn compare_metrics(a: &Metrics, b: &Metrics) -> ComparisonReport {
    ComparisonReport {
        effluent: MetricDelta::new(Some(a.total_effluent), Some(b.total_effluent)),
        convergence_time: MetricDelta::new(a.convergence_time, b.convergence_time),
        max_abs_ao_dev: MetricDelta::new(Some(a.max_abs_ao_dev), Some(b.max_abs_ao_dev)),
    }
}

/// Check that two series share a sampling timeline.
pub fn check_timeline(a: &[Sample], b: &[Sample]) -> Result<(), ScenarioError> {
    if a.len() != b.len() {
        return Err(ScenarioError::TimelineMismatch(format!(
            "{} samples vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| (x.t - y.t).abs() > 1e-6 * x.t.abs().max(1.0)) {
        return Err(ScenarioError::TimelineMismatch(format!("sample times {} vs {} s", x.t, y.t)));
    }
    Ok(())
}

/// Compare two runs given their series and convergence targets. Metrics are
/// recomputed from the series, so exported CSV files compare exactly like
/// in-memory results.
pub fn compare(
    a: &[Sample],
    a_targets: (f64, f64),
    b: &[Sample],
    b_targets: (f64, f64),
) -> Result<ComparisonReport, ScenarioError> {
    check_timeline(a, b)?;
    Ok(compare_metrics(
        &Metrics::from_samples(a, a_targets),
        &Metrics::from_samples(b, b_targets),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_is_relative_to_the_first_argument() {
        let d = MetricDelta::new(Some(200.0), Some(150.0));
        assert_eq!(d.absolute, Some(-50.0));
        assert_eq!(d.percent, Some(-25.0));
        let r = MetricDelta::new(Some(150.0), Some(200.0));
        assert_eq!(r.absolute, Some(50.0));
        assert!((r.percent.unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(MetricDelta::new(Some(0.0), Some(0.0)).percent, Some(0.0));
        assert_eq!(MetricDelta::new(None, Some(1.0)).absolute, None);
    }
}
