//! Accuracy and outlier-detection metrics against simulator truth.

use gnss_fgo_core::state::EpochState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// 3-D position error per epoch, meters.
    pub per_epoch_position_error: Vec<f64>,
    /// RMSE of the east/north error, meters.
    pub horizontal_rmse: f64,
    pub position_rmse: f64,
    pub clock_rmse: f64,
    /// Present when the estimator yields per-measurement weights or switches.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iterations_total: usize,
    pub wall_time_s: f64,
}

/// Accuracy metrics; detection fields are filled in by the caller.
pub fn accuracy(estimates: &[EpochState], truth: &[EpochState]) -> MetricsReport {
    assert_eq!(estimates.len(), truth.len(), "one estimate per truth epoch");
    let n = truth.len().max(1) as f64;
    let mut horizontal = 0.0;
    let mut clock = 0.0;
    let mut full = 0.0;
    let per_epoch_position_error = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let d = e.position - t.position;
            horizontal += d.x * d.x + d.y * d.y;
            full += d.norm_squared();
            let dc = e.clock_bias - t.clock_bias;
            clock += dc * dc;
            d.norm()
        })
        .collect();
    MetricsReport {
        per_epoch_position_error,
        horizontal_rmse: (horizontal / n).sqrt(),
        position_rmse: (full / n).sqrt(),
        clock_rmse: (clock / n).sqrt(),
        precision: None,
        recall: None,
        iterations_total: 0,
        wall_time_s: 0.0,
    }
}

/// Detection counts over labelled measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn add(&mut self, flagged: bool, outlier: bool) {
        match (flagged, outlier) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, true) => self.false_negative += 1,
            (false, false) => self.true_negative += 1,
        }
    }

    /// 1 when nothing was flagged.
    pub fn precision(&self) -> f64 {
        let flagged = self.true_positive + self.false_positive;
        if flagged == 0 {
            1.0
        } else {
            self.true_positive as f64 / flagged as f64
        }
    }

    /// 1 when there were no outliers.
    pub fn recall(&self) -> f64 {
        let outliers = self.true_positive + self.false_negative;
        if outliers == 0 {
            1.0
        } else {
            self.true_positive as f64 / outliers as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn rmse_of_known_errors() {
        let truth = vec![EpochState::new(Vector3::zeros(), 0.0, 2.0); 2];
        let est = vec![
            EpochState::new(Vector3::new(3.0, 4.0, 12.0), 1.0, 2.0),
            EpochState::new(Vector3::new(0.0, 0.0, 0.0), -1.0, 2.0),
        ];
        let m = accuracy(&est, &truth);
        assert_eq!(m.per_epoch_position_error, vec![13.0, 0.0]);
        assert!((m.horizontal_rmse - (25.0f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!((m.clock_rmse - 1.0).abs() < 1e-12);
    }

    #[test]
    fn precision_recall() {
        let mut c = Confusion::default();
        assert_eq!((c.precision(), c.recall()), (1.0, 1.0));
        c.add(true, true);
        c.add(true, false);
        c.add(false, true);
        c.add(false, false);
        assert_eq!((c.precision(), c.recall()), (0.5, 0.5));
    }
}
