use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with "fake" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Fake predicted fake.
    pub tp: usize,
    /// Real predicted fake.
    pub fp: usize,
    /// Real predicted real.
    pub tn: usize,
    /// Fake predicted real.
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Evaluation(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            c.record(t, p);
        }
        Ok(c)
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Fake, Label::Fake) => self.tp += 1,
            (Label::Real, Label::Fake) => self.fp += 1,
            (Label::Real, Label::Real) => self.tn += 1,
            (Label::Fake, Label::Real) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `[[tn, fp], [fn, tp]]`, rows indexed by the true label.
    pub fn matrix(&self) -> [[usize; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

/// F1 for one class; the flag is set when precision or recall has a zero
/// denominator, in which case F1 still comes from `2TP / (2TP + FP + FN)`
/// (and is 0 when that denominator is zero too).
pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> (f64, bool) {
    let degenerate = tp + fp == 0 || tp + fn_ == 0;
    let denom = 2 * tp + fp + fn_;
    let f1 = if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    };
    (f1, degenerate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_fake: f64,
    pub f1_real: f64,
    pub confusion: Confusion,
    pub n: usize,
    pub f1_fake_degenerate: bool,
    pub f1_real_degenerate: bool,
}

impl MetricsReport {
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        let n = confusion.total();
        if n == 0 {
            return Err(Error::Evaluation("cannot score an empty dataset".into()));
        }
        let Confusion { tp, fp, tn, fn_ } = confusion;
        let (f1_fake, f1_fake_degenerate) = f1_score(tp, fp, fn_);
        let (f1_real, f1_real_degenerate) = f1_score(tn, fn_, fp);
        Ok(Self {
            accuracy: (tp + tn) as f64 / n as f64,
            f1_fake,
            f1_real,
            confusion,
            n,
            f1_fake_degenerate,
            f1_real_degenerate,
        })
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        Self::from_confusion(Confusion::from_labels(truth, predicted)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(bits: &[bool]) -> Vec<Label> {
        bits.iter()
            .map(|&b| if b { Label::Fake } else { Label::Real })
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let truth = labels(&[
            false, true, false, true, false, true, false, true, false, true,
        ]);
        let r = MetricsReport::from_labels(&truth, &truth).unwrap();
        assert_eq!((r.accuracy, r.f1_fake, r.f1_real), (1.0, 1.0, 1.0));
        assert!(!r.f1_fake_degenerate && !r.f1_real_degenerate);
    }

    #[test]
    fn all_fake_predictor() {
        let truth = labels(&[
            false, true, false, true, false, true, false, true, false, true,
        ]);
        let r = MetricsReport::from_labels(&truth, &[Label::Fake; 10]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert!((r.f1_fake - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.f1_real, 0.0);
        assert!(r.f1_real_degenerate && !r.f1_fake_degenerate);
        assert_eq!(r.confusion.matrix(), [[0, 5], [0, 5]]);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(
            MetricsReport::from_labels(&[], &[]),
            Err(Error::Evaluation(_))
        ));
        assert!(Confusion::from_labels(&[Label::Real], &[]).is_err());
    }

    proptest! {
        #[test]
        fn accuracy_and_f1_bounds(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let truth = labels(&bits.iter().map(|b| b.0).collect::<Vec<_>>());
            let pred = labels(&bits.iter().map(|b| b.1).collect::<Vec<_>>());
            let r = MetricsReport::from_labels(&truth, &pred).unwrap();
            prop_assert_eq!(r.confusion.total(), r.n);
            prop_assert_eq!(r.n, bits.len());
            for v in [r.accuracy, r.f1_fake, r.f1_real] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let correct = bits.iter().filter(|b| b.0 == b.1).count();
            prop_assert_eq!(r.accuracy, correct as f64 / bits.len() as f64);
        }
    }
}
