//! Training objectives on a probability volume: dense cross entropy, the
//! max-projection loss and the annotated-slices baseline, each with its exact
//! gradient with respect to the predictions.

use std::fmt;

use crate::error::{Error, Result};
use crate::project::mip;
use crate::volume::{Axis, Label, LabelVolume, MipAnnotationSet, Volume};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

pub type PredVolume = Volume<f64>;
/// Gradient of a loss with respect to each predicted probability.
pub type PredGradient = Volume<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    Sum,
    #[default]
    MeanOverLabeled,
}

impl Normalization {
    fn scale(self, labeled: usize) -> f64 {
        match self {
            Normalization::Sum => 1.0,
            Normalization::MeanOverLabeled if labeled == 0 => 0.0,
            Normalization::MeanOverLabeled => 1.0 / labeled as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub total: f64,
    /// Contribution of each projection, in the same normalization as `total`.
    pub per_axis: Vec<(Axis, f64)>,
    pub labeled_pixel_count: usize,
    pub normalization: Normalization,
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loss_total={}", self.total)?;
        for (axis, v) in &self.per_axis {
            writeln!(f, "loss_axis{}={}", axis.index(), v)?;
        }
        writeln!(f, "labeled_count={}", self.labeled_pixel_count)?;
        let norm = match self.normalization {
            Normalization::Sum => "sum",
            Normalization::MeanOverLabeled => "mean",
        };
        writeln!(f, "normalization={norm}")
    }
}

#[inline]
fn clamp_prob(y: f64) -> f64 {
    y.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn check_prob(y: f64) -> Result<()> {
    if (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(Error::ProbabilityRange(y))
    }
}

/// `-log y` for foreground, `-log(1 - y)` for background, zero for ignore.
pub fn cross_entropy_term(y: f64, label: Label) -> Result<f64> {
    check_prob(y)?;
    Ok(term(y, label))
}

#[inline]
fn term(y: f64, label: Label) -> f64 {
    match label {
        Label::Foreground => -clamp_prob(y).ln(),
        Label::Background => -(1.0 - y).clamp(PROB_EPS, 1.0 - PROB_EPS).ln(),
        Label::Ignore => 0.0,
    }
}

#[inline]
fn term_grad(y: f64, label: Label) -> f64 {
    match label {
        Label::Foreground => -1.0 / clamp_prob(y),
        Label::Background => 1.0 / (1.0 - y).clamp(PROB_EPS, 1.0 - PROB_EPS),
        Label::Ignore => 0.0,
    }
}

fn check_pred(pred: &PredVolume) -> Result<()> {
    pred.data().iter().try_for_each(|&y| check_prob(y))
}

/// Voxelwise loss restricted to voxels accepted by `keep`.
fn masked_dense(
    pred: &PredVolume,
    labels: &LabelVolume,
    norm: Normalization,
    keep: impl Fn([usize; 3]) -> bool,
) -> Result<(LossReport, PredGradient)> {
    pred.same_dims(labels)?;
    check_pred(pred)?;
    let dims = pred.dims();
    let mut grad = Volume::filled(dims, 0.0)?;
    let mut sum = 0.0;
    let mut labeled = 0usize;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let v = [i, j, k];
                let label = labels.get(v);
                if label == Label::Ignore || !keep(v) {
                    continue;
                }
                let y = pred.get(v);
                sum += term(y, label);
                grad.set(v, term_grad(y, label));
                labeled += 1;
            }
        }
    }
    let scale = norm.scale(labeled);
    if scale != 1.0 {
        grad.data_mut().iter_mut().for_each(|g| *g *= scale);
    }
    let report = LossReport { total: sum * scale, per_axis: vec![], labeled_pixel_count: labeled, normalization: norm };
    Ok((report, grad))
}

/// Cross entropy summed (or averaged) over every non-ignore voxel.
pub fn loss3d(pred: &PredVolume, labels: &LabelVolume, norm: Normalization) -> Result<(LossReport, PredGradient)> {
    masked_dense(pred, labels, norm, |_| true)
}

/// Cross entropy restricted to the listed slices along `axis`.
pub fn loss_slices(
    pred: &PredVolume,
    labels: &LabelVolume,
    axis: Axis,
    slice_indices: &[usize],
    norm: Normalization,
) -> Result<(LossReport, PredGradient)> {
    let n = axis.ray_len(pred.dims());
    if let Some(&bad) = slice_indices.iter().find(|&&s| s >= n) {
        return Err(Error::OutOfBounds(format!("slice {bad} along {axis:?} with extent {n}")));
    }
    let mut in_set = vec![false; n];
    slice_indices.iter().for_each(|&s| in_set[s] = true);
    masked_dense(pred, labels, norm, |v| in_set[v[axis.index()]])
}

/// Cross entropy between each annotated projection and the max-projection of
/// the prediction. The gradient of every labeled ray lands on its argmax voxel
/// only; contributions of different axes add up.
pub fn loss_mip(pred: &PredVolume, mips: &MipAnnotationSet, norm: Normalization) -> Result<(LossReport, PredGradient)> {
    if mips.is_empty() {
        return Err(Error::TooFewEntries { needed: 1, got: 0 });
    }
    if pred.dims() != mips.volume_dims() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs annotations {:?}",
            pred.dims(),
            mips.volume_dims()
        )));
    }
    check_pred(pred)?;
    let mut grad = Volume::filled(pred.dims(), 0.0)?;
    let mut per_axis = Vec::with_capacity(mips.len());
    let mut labeled = 0usize;
    for entry in mips.entries() {
        let axis = entry.axis().expect("annotation sets carry axis tags");
        let (proj, arg) = mip(pred, axis);
        let [da, db] = proj.dims();
        let mut sum = 0.0;
        for a in 0..da {
            for b in 0..db {
                let label = entry.get(a, b);
                if label == Label::Ignore {
                    continue;
                }
                let y = proj.get(a, b);
                sum += term(y, label);
                let v = arg.voxel(a, b);
                grad.set(v, grad.get(v) + term_grad(y, label));
                labeled += 1;
            }
        }
        per_axis.push((axis, sum));
    }
    let scale = norm.scale(labeled);
    if scale != 1.0 {
        grad.data_mut().iter_mut().for_each(|g| *g *= scale);
    }
    per_axis.iter_mut().for_each(|(_, s)| *s *= scale);
    let total = per_axis.iter().map(|(_, s)| s).sum();
    Ok((LossReport { total, per_axis, labeled_pixel_count: labeled, normalization: norm }, grad))
}
