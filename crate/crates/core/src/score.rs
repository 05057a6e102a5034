//! Voxelwise precision/recall sweep and maximum F1.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::volume::{Label, LabelVolume, Volume};

pub const DEFAULT_THRESHOLDS: usize = 255;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrCurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrCurvePoint {
    /// Scores the prediction `y >= threshold` from its confusion counts.
    /// Precision with no positive predictions is taken as 1.
    pub fn from_counts(threshold: f64, tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
        PrCurvePoint { threshold, precision, recall, f1 }
    }
}

/// Uniform grid of `n` thresholds strictly inside `(0, 1)`: `m / (n + 1)`.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|m| m as f64 / (n + 1) as f64).collect()
}

/// Accumulates per-threshold confusion counts over any number of volumes.
#[derive(Clone, Debug)]
pub struct PrAccumulator {
    thresholds: Vec<f64>,
    // hist[b] counts voxels whose prediction clears exactly the first b thresholds
    fg_hist: Vec<u64>,
    bg_hist: Vec<u64>,
}

impl PrAccumulator {
    pub fn new(thresholds: usize) -> Result<Self> {
        if thresholds < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 thresholds, got {thresholds}")));
        }
        Ok(PrAccumulator {
            thresholds: threshold_grid(thresholds),
            fg_hist: vec![0; thresholds + 1],
            bg_hist: vec![0; thresholds + 1],
        })
    }

    fn bin(&self, y: f64) -> usize {
        let n = self.thresholds.len();
        let mut b = ((y * (n + 1) as f64).floor().max(0.0) as usize).min(n);
        while b < n && self.thresholds[b] <= y {
            b += 1;
        }
        while b > 0 && self.thresholds[b - 1] > y {
            b -= 1;
        }
        b
    }

    pub fn add(&mut self, pred: &[f64], labels: &[Label]) -> Result<()> {
        if pred.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} predictions vs {} labels", pred.len(), labels.len())));
        }
        for (&y, &l) in pred.iter().zip(labels) {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::ProbabilityRange(y));
            }
            let b = self.bin(y);
            match l {
                Label::Foreground => self.fg_hist[b] += 1,
                Label::Background => self.bg_hist[b] += 1,
                Label::Ignore => {}
            }
        }
        Ok(())
    }

    pub fn add_volume(&mut self, pred: &Volume<f64>, labels: &LabelVolume) -> Result<()> {
        pred.same_dims(labels)?;
        self.add(pred.data(), labels.data())
    }

    pub fn curve(&self) -> Vec<PrCurvePoint> {
        let total_fg: u64 = self.fg_hist.iter().sum();
        let n = self.thresholds.len();
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut out = vec![PrCurvePoint::from_counts(0.0, 0, 0, 0); n];
        // threshold m (0-based) is cleared by every voxel in bins > m
        for m in (0..n).rev() {
            tp += self.fg_hist[m + 1];
            fp += self.bg_hist[m + 1];
            out[m] = PrCurvePoint::from_counts(self.thresholds[m], tp, fp, total_fg - tp);
        }
        out
    }

    /// Best point (smallest threshold among ties) and the whole curve.
    pub fn finish(&self) -> (PrCurvePoint, Vec<PrCurvePoint>) {
        let curve = self.curve();
        (best_of(&curve), curve)
    }
}

fn best_of(curve: &[PrCurvePoint]) -> PrCurvePoint {
    *curve
        .iter()
        .reduce(|best, p| if p.f1 > best.f1 { p } else { best })
        .expect("non-empty curve")
}

pub fn max_f1(pred: &Volume<f64>, labels: &LabelVolume, thresholds: usize) -> Result<(PrCurvePoint, Vec<PrCurvePoint>)> {
    let mut acc = PrAccumulator::new(thresholds)?;
    acc.add_volume(pred, labels)?;
    Ok(acc.finish())
}

/// Sweeps every distinct prediction value as a threshold, by sorting the
/// scored voxels in decreasing order; independent of the threshold grid.
pub fn max_f1_exact(pred: &[f64], labels: &[Label]) -> Result<PrCurvePoint> {
    if pred.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions vs {} labels", pred.len(), labels.len())));
    }
    let mut scored: Vec<(f64, bool)> = pred
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l != Label::Ignore)
        .map(|(&y, &l)| (y, l == Label::Foreground))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total_fg = scored.iter().filter(|s| s.1).count() as u64;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut best: Option<PrCurvePoint> = None;
    let mut n = 0;
    while n < scored.len() {
        let t = scored[n].0;
        // take every voxel at exactly this value before scoring
        while n < scored.len() && scored[n].0 == t {
            if scored[n].1 { tp += 1 } else { fp += 1 }
            n += 1;
        }
        let p = PrCurvePoint::from_counts(t, tp, fp, total_fg - tp);
        // sweep runs from high to low thresholds, so ties move to the lower one
        if best.map_or(true, |b| p.f1 >= b.f1) {
            best = Some(p);
        }
    }
    Ok(best.unwrap_or_else(|| PrCurvePoint::from_counts(0.0, 0, 0, 0)))
}

pub fn curve_to_csv(best: &PrCurvePoint, curve: &[PrCurvePoint]) -> String {
    let mut out = String::from("threshold,precision,recall,f1\n");
    for p in curve {
        writeln!(out, "{},{},{},{}", p.threshold, p.precision, p.recall, p.f1).unwrap();
    }
    writeln!(out, "best_f1={}", best.f1).unwrap();
    out
}
