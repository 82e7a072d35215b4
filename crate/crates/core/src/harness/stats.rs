//! Small-sample statistics for paired comparisons across seeds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Result of a one-sided paired t-test of `mean(a - b) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
}

impl PairedTest {
    pub fn significant(&self, level: f64) -> bool {
        self.mean_diff > 0.0 && self.p_value < level
    }
}

/// One-sided paired t-test with alternative `mean(a - b) > 0`.
///
/// With zero spread the answer is exact: p = 0 when every difference is
/// positive, 1 otherwise. Fewer than two pairs give p = 1.
pub fn paired_t_greater(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean_diff = mean(&diffs);
    if n < 2 {
        return PairedTest {
            n,
            mean_diff,
            t: f64::NAN,
            p_value: 1.0,
        };
    }
    let sd = std_dev(&diffs);
    if sd == 0.0 {
        let p_value = if mean_diff > 0.0 { 0.0 } else { 1.0 };
        let t = if mean_diff > 0.0 { f64::INFINITY } else { f64::NAN };
        return PairedTest {
            n,
            mean_diff,
            t,
            p_value,
        };
    }
    let t = mean_diff / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2 gives positive dof");
    PairedTest {
        n,
        mean_diff,
        t,
        p_value: 1.0 - dist.cdf(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        // Sample variance 32 / 7.
        assert!((std_dev(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(std_dev(&[1.0]), 0.0);
        assert_eq!(mean(&[]), 0.0);
    }

    #[test]
    fn t_test_reference_value() {
        // diffs 1, 2, 3, 4, 5: mean 3, sd sqrt(2.5), t = 3 / (sqrt(2.5)/sqrt(5)) = 4.2426.
        // Upper tail of Student-t with 4 dof at 4.2426 is 0.006617 (scipy.stats.t.sf).
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = paired_t_greater(&a, &b);
        assert!((r.t - 4.242640687).abs() < 1e-8);
        assert!((r.p_value - 0.006617).abs() < 1e-5, "{}", r.p_value);
        assert!(r.significant(0.05));
    }

    #[test]
    fn t_test_direction() {
        let a = [1.0, 1.5, 0.5, 1.2];
        let b = [2.0, 2.5, 1.8, 2.1];
        let r = paired_t_greater(&a, &b);
        assert!(r.p_value > 0.95);
        assert!(!r.significant(0.05));
    }

    #[test]
    fn t_test_degenerate() {
        assert_eq!(paired_t_greater(&[1.0, 1.0], &[0.0, 0.0]).p_value, 0.0);
        assert_eq!(paired_t_greater(&[1.0, 1.0], &[1.0, 1.0]).p_value, 1.0);
        assert_eq!(paired_t_greater(&[3.0], &[1.0]).p_value, 1.0);
    }
}
