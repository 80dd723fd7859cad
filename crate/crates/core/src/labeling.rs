//! Expected outputs, validity labels and the train/test split.
//!
//! A training example's expected output is the mean of the node readings
//! when it falls inside the rule's valid range (label 1); otherwise it is
//! clamped to the nearest range limit (label 0). An estimate is labeled
//! valid when it lies within a tolerance of the expected output.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sensors;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("input {0} is not finite")]
    NonFinite(f64),
    #[error("valid range [{0}, {1}] is empty")]
    EmptyRange(f64, f64),
    #[error("tolerance {0} must be > 0")]
    BadTolerance(f64),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("no examples")]
    Empty,
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Valid range plus the fixed values used outside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelingRule {
    pub lo: f64,
    pub hi: f64,
    pub clamp_low: f64,
    pub clamp_high: f64,
}

impl LabelingRule {
    pub fn new(lo: f64, hi: f64) -> Result<Self, LabelError> {
        if !(lo < hi) {
            return Err(LabelError::EmptyRange(lo, hi));
        }
        Ok(LabelingRule {
            lo,
            hi,
            clamp_low: lo,
            clamp_high: hi,
        })
    }

    /// Comfortable indoor temperature band, 26..=31 °C.
    pub fn temperature() -> Self {
        LabelingRule::new(26.0, 31.0).expect("non-empty")
    }

    /// Applies the rule to an already computed value.
    pub fn apply(&self, computed: f64) -> (f64, u8) {
        if computed < self.lo {
            (self.clamp_low, 0)
        } else if computed > self.hi {
            (self.clamp_high, 0)
        } else {
            (computed, 1)
        }
    }
}

impl Default for LabelingRule {
    fn default() -> Self {
        LabelingRule::temperature()
    }
}

/// Default estimate tolerance for temperature, the sensor resolution.
pub const TEMPERATURE_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    /// Acquisition sample index within its run.
    pub index: usize,
    pub inputs: Vec<f64>,
    pub expected: f64,
    pub label: u8,
}

fn finite(v: f64) -> Result<f64, LabelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabelError::NonFinite(v))
    }
}

/// Expected output and validity label of one temperature triple.
pub fn expected_output(
    x1: f64,
    x2: f64,
    x3: f64,
    rule: &LabelingRule,
) -> Result<(f64, u8), LabelError> {
    let mean = (finite(x1)? + finite(x2)? + finite(x3)?) / 3.0;
    Ok(rule.apply(mean))
}

/// 1 when `|y - y_hat| <= tol`. The comparison allows a few ulps of slack
/// so that decimal boundaries such as `28.01 - 28.0` count as on the line.
pub fn label_estimate(y: f64, y_hat: f64, tol: f64) -> Result<u8, LabelError> {
    if !(tol > 0.0) {
        return Err(LabelError::BadTolerance(tol));
    }
    let (y, y_hat) = (finite(y)?, finite(y_hat)?);
    let slack = 8.0 * f64::EPSILON * y.abs().max(y_hat.abs()).max(1.0);
    Ok(((y - y_hat).abs() <= tol + slack) as u8)
}

/// Temperatures outside the sensor operating range (-20, 85) °C.
pub fn is_temperature_outlier(celsius: f64) -> bool {
    !(celsius > -20.0 && celsius < 85.0)
}

/// Labels fused temperature triples, dropping any triple with an outlier.
pub fn label_triples(
    triples: &[[f64; 3]],
    rule: &LabelingRule,
) -> Result<Vec<LabeledExample>, LabelError> {
    let mut out = Vec::with_capacity(triples.len());
    for (index, t) in triples.iter().enumerate() {
        if t.iter().any(|&v| is_temperature_outlier(v)) {
            continue;
        }
        let (expected, label) = expected_output(t[0], t[1], t[2], rule)?;
        out.push(LabeledExample {
            index,
            inputs: t.to_vec(),
            expected,
            label,
        });
    }
    Ok(out)
}

/// Light-scale rule: the expected output is the scale of the mean ADC code,
/// valid when the nodes' own scales differ by at most `max_spread` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IlluminanceRule {
    pub max_spread: u8,
}

impl Default for IlluminanceRule {
    fn default() -> Self {
        IlluminanceRule { max_spread: 1 }
    }
}

/// Estimates count as valid when they round to the expected scale.
pub const ILLUMINANCE_TOLERANCE: f64 = 0.5;

impl IlluminanceRule {
    pub fn expected(&self, codes: [u16; 3]) -> Result<(f64, u8), sensors::SensorError> {
        let scales = codes
            .iter()
            .map(|&c| sensors::illuminance_scale(c as u32))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = codes.iter().map(|&c| c as f64).sum::<f64>() / 3.0;
        let scale = sensors::illuminance_scale(mean.round() as u32)?;
        let spread = scales.iter().max().unwrap() - scales.iter().min().unwrap();
        Ok((scale as f64, (spread <= self.max_spread) as u8))
    }

    pub fn label_codes(&self, codes: &[[u16; 3]]) -> Result<Vec<LabeledExample>, sensors::SensorError> {
        codes
            .iter()
            .enumerate()
            .map(|(index, c)| {
                let (expected, label) = self.expected(*c)?;
                Ok(LabeledExample {
                    index,
                    inputs: c.iter().map(|&v| v as f64).collect(),
                    expected,
                    label,
                })
            })
            .collect()
    }
}

/// Seeded shuffle, then the first `ceil(train_fraction * n)` examples train.
pub fn split_dataset<T: Clone>(
    data: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), LabelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(LabelError::BadFraction(train_fraction));
    }
    if data.is_empty() {
        return Err(LabelError::Empty);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // guard against 0.7 * 6460 = 4522.000000000001
    let n_train = (train_fraction * data.len() as f64 - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, data.len());
    let train = order[..n_train].iter().map(|&i| data[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| data[i].clone()).collect();
    Ok((train, test))
}

/// `x1,x2,x3,y,label` records with a header line.
pub fn examples_to_csv(examples: &[LabeledExample]) -> String {
    let mut s = String::from("x1,x2,x3,y,label\n");
    for e in examples {
        for v in &e.inputs {
            let _ = write!(s, "{v},");
        }
        let _ = writeln!(s, "{},{}", e.expected, e.label);
    }
    s
}

pub fn examples_from_csv(text: &str) -> Result<Vec<LabeledExample>, LabelError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('x')) {
            continue;
        }
        let err = |msg: String| LabelError::Csv { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(err(format!("expected at least 3 fields, got {}", fields.len())));
        }
        let nums = fields
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| err(format!("bad number {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let label = nums[nums.len() - 1];
        if label != 0.0 && label != 1.0 {
            return Err(err(format!("label {label} is not 0 or 1")));
        }
        out.push(LabeledExample {
            index: out.len(),
            inputs: nums[..nums.len() - 2].to_vec(),
            expected: nums[nums.len() - 2],
            label: label as u8,
        });
    }
    Ok(out)
}

pub fn write_examples_csv(path: impl AsRef<Path>, examples: &[LabeledExample]) -> io::Result<()> {
    fs::write(path, examples_to_csv(examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn expected_output_cases() {
        let r = LabelingRule::temperature();
        assert_eq!(expected_output(27.0, 28.0, 29.0, &r).unwrap(), (28.0, 1));
        assert_eq!(expected_output(20.0, 20.0, 20.0, &r).unwrap(), (26.0, 0));
        assert_eq!(expected_output(40.0, 40.0, 40.0, &r).unwrap(), (31.0, 0));
        assert_eq!(expected_output(26.0, 26.0, 26.0, &r).unwrap(), (26.0, 1));
        assert!(matches!(
            expected_output(f64::NAN, 1.0, 1.0, &r),
            Err(LabelError::NonFinite(_))
        ));
        assert!(LabelingRule::new(3.0, 3.0).is_err());
    }

    #[test]
    fn label_estimate_boundary() {
        assert_eq!(label_estimate(28.0, 28.0, 0.01).unwrap(), 1);
        assert_eq!(label_estimate(28.0, 28.01, 0.01).unwrap(), 1);
        assert_eq!(label_estimate(28.0, 28.02, 0.01).unwrap(), 0);
        assert_eq!(label_estimate(1.0, 1.25, 0.25).unwrap(), 1);
        assert_eq!(label_estimate(1.0, 1.0, 0.0), Err(LabelError::BadTolerance(0.0)));
    }

    #[test]
    fn split_counts() {
        let data: Vec<u32> = (0..10).collect();
        let (train, test) = split_dataset(&data, 0.7, 1).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        let mut all: Vec<u32> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, data);
        assert_eq!(split_dataset(&data, 0.7, 1).unwrap(), (train, test));

        let big: Vec<u32> = (0..6460).collect();
        let (train, test) = split_dataset(&big, 0.7, 3).unwrap();
        assert_eq!((train.len(), test.len()), (4522, 1938));

        assert_eq!(split_dataset::<u32>(&[], 0.7, 1), Err(LabelError::Empty));
        assert_eq!(split_dataset(&data, 1.0, 1), Err(LabelError::BadFraction(1.0)));
    }

    #[test]
    fn outliers_dropped() {
        let r = LabelingRule::temperature();
        let ex = label_triples(&[[27.0, 27.0, 27.0], [90.0, 27.0, 27.0], [28.0, 28.0, 28.0]], &r)
            .unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[1].index, 2);
    }

    #[test]
    fn illuminance_rule() {
        let rule = IlluminanceRule::default();
        // all in scale 4
        assert_eq!(rule.expected([700, 720, 740]).unwrap(), (4.0, 1));
        // one step apart: still valid
        assert_eq!(rule.expected([520, 720, 740]).unwrap(), (4.0, 1));
        // dark node against midday nodes
        assert_eq!(rule.expected([100, 930, 940]).unwrap(), (4.0, 0));
        assert!(rule.expected([2000, 0, 0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ex = vec![
            LabeledExample { index: 0, inputs: vec![27.1, 28.25, 29.0], expected: 28.116, label: 1 },
            LabeledExample { index: 1, inputs: vec![18.0, 18.5, 19.0], expected: 26.0, label: 0 },
        ];
        assert_eq!(examples_from_csv(&examples_to_csv(&ex)).unwrap(), ex);
        assert!(matches!(
            examples_from_csv("x1,x2,x3,y,label\n1,2,3,4,7\n"),
            Err(LabelError::Csv { line: 2, .. })
        ));
    }

    // Straight transcription of the three-case definition.
    fn brute_force(x1: f64, x2: f64, x3: f64) -> (f64, u8) {
        let y = (x1 + x2 + x3) / 3.0;
        if (26.0..=31.0).contains(&y) {
            (y, 1)
        } else if y < 26.0 {
            (26.0, 0)
        } else {
            (31.0, 0)
        }
    }

    #[test]
    fn grid_matches_brute_force() {
        let r = LabelingRule::temperature();
        let grid: Vec<f64> = (0..50).map(|i| 15.0 + 30.0 * i as f64 / 49.0).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    assert_eq!(expected_output(a, b, c, &r).unwrap(), brute_force(a, b, c));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn clamping_law(a in 0.0f64..60.0, b in 0.0f64..60.0, c in 0.0f64..60.0) {
            let r = LabelingRule::temperature();
            let (y, label) = expected_output(a, b, c, &r).unwrap();
            prop_assert!(y >= r.lo && y <= r.hi);
            let mean = (a + b + c) / 3.0;
            prop_assert_eq!(label == 0, y != mean);
            // symmetric in the inputs
            prop_assert_eq!(expected_output(c, a, b, &r).unwrap().1, label);
        }

        #[test]
        fn label_estimate_symmetric(y in -50.0f64..50.0, d in -1.0f64..1.0, tol in 0.001f64..1.0) {
            prop_assert_eq!(
                label_estimate(y, y + d, tol).unwrap(),
                label_estimate(y + d, y, tol).unwrap()
            );
        }

        #[test]
        fn split_is_partition(n in 1usize..300, f in 0.05f64..0.95, seed: u64) {
            let data: Vec<usize> = (0..n).collect();
            let (train, test) = split_dataset(&data, f, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            let mut all: Vec<usize> = train.into_iter().chain(test).collect();
            all.sort();
            prop_assert_eq!(all, data);
        }
    }
}
