//! Classification, regression and parallel-computing metrics.
//!
//! Degenerate ratios (zero denominators) evaluate to 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} expected vs {1} estimated")]
    LengthMismatch(usize, usize),
    #[error("no examples to evaluate")]
    Empty,
    #[error("label {0} is not binary")]
    NotBinary(u8),
    #[error("timing {name} = {value} s must be strictly positive")]
    BadTiming { name: &'static str, value: f64 },
    #[error("processor count must be positive")]
    NoProcessors,
}

/// Counts of expected (`y_label`) against estimated (`ŷ_label`) labels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

pub fn confusion(expected: &[u8], estimated: &[u8]) -> Result<ConfusionMatrix, MetricError> {
    if expected.len() != estimated.len() {
        return Err(MetricError::LengthMismatch(expected.len(), estimated.len()));
    }
    if expected.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&e, &s) in expected.iter().zip(estimated) {
        match (e, s) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            (bad, 0 | 1) | (_, bad) => return Err(MetricError::NotBinary(bad)),
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp, cm.tp + cm.fp)
}

pub fn recall(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp, cm.tp + cm.fn_)
}

/// Harmonic mean of precision and recall.
pub fn f_score_pr(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn f_score(cm: &ConfusionMatrix) -> f64 {
    f_score_pr(precision(cm), recall(cm))
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    if cm.total() == 0 {
        return Err(MetricError::Empty);
    }
    Ok(ratio(cm.tp + cm.tn, cm.total()))
}

fn residuals<'a>(
    y: &'a [f64],
    y_hat: &'a [f64],
) -> Result<impl Iterator<Item = f64> + 'a, MetricError> {
    if y.len() != y_hat.len() {
        return Err(MetricError::LengthMismatch(y.len(), y_hat.len()));
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| b - a))
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    let n = y.len() as f64;
    Ok((residuals(y, y_hat)?.map(|r| r * r).sum::<f64>() / n).sqrt())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    let n = y.len() as f64;
    Ok(residuals(y, y_hat)?.map(f64::abs).sum::<f64>() / n)
}

/// Sequential and parallel wall times of the same workload.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingPair {
    pub t_s: f64,
    pub t_p: f64,
    pub processors: usize,
}

impl TimingPair {
    pub fn new(t_s: f64, t_p: f64, processors: usize) -> Result<Self, MetricError> {
        let t = TimingPair { t_s, t_p, processors };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        for (name, value) in [("t_s", self.t_s), ("t_p", self.t_p)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(MetricError::BadTiming { name, value });
            }
        }
        if self.processors == 0 {
            return Err(MetricError::NoProcessors);
        }
        Ok(())
    }
}

pub fn speedup(t: &TimingPair) -> Result<f64, MetricError> {
    t.validate()?;
    Ok(t.t_s / t.t_p)
}

pub fn efficiency(t: &TimingPair) -> Result<f64, MetricError> {
    Ok(speedup(t)? / t.processors as f64)
}

/// Rounds to the two decimals used in result tables.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// All classification and regression figures of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    pub rmse: f64,
    pub mae: f64,
}

impl Evaluation {
    pub fn compute(
        expected_labels: &[u8],
        estimated_labels: &[u8],
        y: &[f64],
        y_hat: &[f64],
    ) -> Result<Self, MetricError> {
        let cm = confusion(expected_labels, estimated_labels)?;
        Ok(Evaluation {
            confusion: cm,
            precision: precision(&cm),
            recall: recall(&cm),
            f_score: f_score(&cm),
            accuracy: accuracy(&cm)?,
            rmse: rmse(y, y_hat)?,
            mae: mae(y, y_hat)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_cells() {
        assert_eq!(confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), cm(1, 1, 1, 1));
        let same = confusion(&[1, 0, 1, 1], &[1, 0, 1, 1]).unwrap();
        assert_eq!((same.fp, same.fn_), (0, 0));
        assert_eq!(confusion(&[1], &[1, 0]), Err(MetricError::LengthMismatch(1, 2)));
        assert_eq!(confusion(&[], &[]), Err(MetricError::Empty));
        assert_eq!(confusion(&[2], &[1]), Err(MetricError::NotBinary(2)));
    }

    #[test]
    fn confusion_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e: Vec<u8> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let s: Vec<u8> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let mut cells = [[0u64; 2]; 2];
        for i in 0..1000 {
            cells[e[i] as usize][s[i] as usize] += 1;
        }
        let got = confusion(&e, &s).unwrap();
        assert_eq!(got, cm(cells[1][1], cells[0][1], cells[1][0], cells[0][0]));
        assert_eq!(got.total(), 1000);
    }

    #[test]
    fn precision_recall() {
        let m = cm(93, 7, 1, 0);
        assert!((precision(&m) - 0.93).abs() < 1e-12);
        assert!((recall(&m) - 93.0 / 94.0).abs() < 1e-12);
        assert_eq!(precision(&cm(0, 0, 5, 5)), 0.0);
        assert_eq!(recall(&cm(0, 5, 0, 5)), 0.0);
        let perfect = cm(40, 0, 0, 10);
        assert_eq!((precision(&perfect), recall(&perfect)), (1.0, 1.0));
    }

    #[test]
    fn f_score_reported_rows() {
        assert!((f_score_pr(0.93, 0.99) - 0.96).abs() <= 0.005);
        // harmonic mean of the rounded 0.94 / 0.89 row
        assert!((f_score_pr(0.94, 0.89) - 2.0 * 0.94 * 0.89 / 1.83).abs() < 1e-12);
        assert_eq!(f_score_pr(0.0, 0.0), 0.0);
        assert_eq!(f_score(&cm(0, 3, 3, 3)), 0.0);
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&cm(50, 0, 0, 50)).unwrap(), 1.0);
        assert_eq!(accuracy(&cm(0, 50, 50, 0)).unwrap(), 0.0);
        assert_eq!(accuracy(&cm(0, 0, 0, 0)), Err(MetricError::Empty));
        let m = cm(17, 4, 9, 31);
        assert!((accuracy(&m).unwrap() - 48.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn regression_metrics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, -3.0]).unwrap(), 3.0);
        assert_eq!(mae(&[0.0, 0.0], &[3.0, -3.0]).unwrap(), 3.0);
        // sqrt(9/3), 5/3
        assert!((rmse(&[0.0; 3], &[1.0, 2.0, 2.0]).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((mae(&[0.0; 3], &[1.0, 2.0, 2.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(rmse(&[0.0], &[]), Err(MetricError::LengthMismatch(1, 0)));
        assert_eq!(mae(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn parallel_metrics() {
        let t = TimingPair::new(736.46, 249.89, 3).unwrap();
        let s = speedup(&t).unwrap();
        assert!((s - 2.947).abs() < 1e-3);
        assert!((efficiency(&t).unwrap() - 0.982).abs() < 1e-3);
        assert_eq!(round2(s), 2.95);
        assert_eq!(speedup(&TimingPair::new(5.0, 5.0, 1).unwrap()).unwrap(), 1.0);
        assert_eq!(efficiency(&TimingPair::new(4.0, 2.0, 2).unwrap()).unwrap(), 1.0);
        assert!(matches!(
            TimingPair::new(0.0, 1.0, 1),
            Err(MetricError::BadTiming { name: "t_s", .. })
        ));
        assert_eq!(TimingPair::new(1.0, 1.0, 0), Err(MetricError::NoProcessors));
    }

    proptest! {
        #[test]
        fn ratios_bounded(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 1u64..500) {
            let m = cm(tp, fp, fn_, tn);
            let (p, r, f) = (precision(&m), recall(&m), f_score(&m));
            let a = accuracy(&m).unwrap();
            for v in [p, r, f, a] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if p > 0.0 && r > 0.0 {
                prop_assert!(f <= p.max(r) + 1e-12);
                prop_assert!(f >= p.min(r) - 1e-12);
            }
            prop_assert_eq!(f_score_pr(p, r), f_score_pr(r, p));
        }

        #[test]
        fn mae_le_rmse_and_permutation_invariant(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50),
            rot in 0usize..50,
        ) {
            let (y, yh): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let r = rmse(&y, &yh).unwrap();
            let m = mae(&y, &yh).unwrap();
            prop_assert!(m <= r + 1e-9);
            let k = rot % y.len();
            let (mut y2, mut yh2) = (y.clone(), yh.clone());
            y2.rotate_left(k);
            yh2.rotate_left(k);
            prop_assert!((rmse(&y2, &yh2).unwrap() - r).abs() < 1e-9);
            prop_assert!((mae(&y2, &yh2).unwrap() - m).abs() < 1e-9);
        }
    }
}
