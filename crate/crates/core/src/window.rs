use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed time interval on the sample grid. Both endpoints are inclusive,
/// with a 1 ns slack so grid times built by repeated addition still land inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_start_s: f64,
    pub t_end_s: f64,
}

const GRID_EPS: f64 = 1e-9;

impl TimeWindow {
    pub fn new(t_start_s: f64, t_end_s: f64) -> Result<Self> {
        if !t_start_s.is_finite() || !t_end_s.is_finite() {
            return Err(Error::NonFinite {
                context: "time window".into(),
            });
        }
        if t_start_s >= t_end_s {
            return Err(Error::Invalid(format!(
                "window start {t_start_s} must precede end {t_end_s}"
            )));
        }
        Ok(Self { t_start_s, t_end_s })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start_s - GRID_EPS && t <= self.t_end_s + GRID_EPS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_inclusive() {
        let w = TimeWindow::new(4.0, 12.0).unwrap();
        assert!(w.contains(4.0));
        assert!(w.contains(12.0));
        assert!(!w.contains(3.98));
        assert!(!w.contains(12.02));
    }

    #[test]
    fn grid_times_from_accumulation_land_inside() {
        let w = TimeWindow::new(4.0, 12.0).unwrap();
        let dt = 0.02;
        let count = (0..=1000).filter(|&k| w.contains(k as f64 * dt)).count();
        assert_eq!(count, 401);
    }

    #[test]
    fn degenerate_window_rejected() {
        assert!(TimeWindow::new(5.0, 5.0).is_err());
        assert!(TimeWindow::new(f64::NAN, 1.0).is_err());
    }
}
