//! Visual hulls built from projection annotations, and hull-based removal of
//! annotation pixels that no voxel configuration can explain.

use crate::error::{Error, Result};
use crate::project::project_any;
use crate::volume::{Axis, BinaryImage, BinaryVolume, Label, LabelImage, MipAnnotationSet};

/// Binary volume: a voxel is set iff every annotation view is positive at its footprint.
pub type Hull = BinaryVolume;

/// Foreground and ignore count as positive, background as negative.
pub fn binarize_for_hull(img: &LabelImage) -> BinaryImage {
    img.map(Label::is_positive)
}

/// Conjunction of back-projected positive masks.
///
/// Works on any 2 or 3 binary views; the annotation entry point is
/// [`build_hull`].
pub fn hull_from_masks(dims: [usize; 3], masks: &[BinaryImage]) -> Result<Hull> {
    if masks.len() < 2 {
        return Err(Error::TooFewEntries { needed: 2, got: masks.len() });
    }
    for m in masks {
        let axis = m.axis().ok_or_else(|| Error::InvalidConfig("hull view without axis".into()))?;
        if m.dims() != axis.image_dims(dims) {
            return Err(Error::ShapeMismatch(format!("{axis:?} view {:?} for volume {dims:?}", m.dims())));
        }
    }
    BinaryVolume::from_fn(dims, |v| {
        masks.iter().all(|m| {
            let (a, b) = m.axis().unwrap().footprint(v);
            m.get(a, b)
        })
    })
}

pub fn build_hull(mips: &MipAnnotationSet) -> Result<Hull> {
    let masks: Vec<_> = mips.entries().iter().map(binarize_for_hull).collect();
    hull_from_masks(mips.volume_dims(), &masks)
}

/// Projects the hull along `axis` (existential).
pub fn project_hull(hull: &Hull, axis: Axis) -> BinaryImage {
    project_any(hull, axis, |h| h)
}

/// Result of hull filtering: the rewritten set and, per entry, the mask of
/// pixels that were relabeled to background.
#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub filtered: MipAnnotationSet,
    pub removed: Vec<BinaryImage>,
}

impl FilterOutcome {
    pub fn removed_count(&self) -> usize {
        self.removed.iter().map(BinaryImage::count).sum()
    }
}

/// Relabels to background every positive pixel whose ray misses the hull.
///
/// Sets with a single entry cannot be carved and are returned unchanged.
pub fn filter_labels_detailed(mips: &MipAnnotationSet) -> Result<FilterOutcome> {
    if mips.len() < 2 {
        let removed = mips.entries().iter().map(|e| e.map(|_| false)).collect();
        return Ok(FilterOutcome { filtered: mips.clone(), removed });
    }
    let hull = build_hull(mips)?;
    let mut entries = Vec::with_capacity(mips.len());
    let mut removed = Vec::with_capacity(mips.len());
    for e in mips.entries() {
        let support = project_hull(&hull, e.axis().unwrap());
        let mut out = e.clone();
        let mut gone = support.map(|_| false);
        for (n, l) in out.data_mut().iter_mut().enumerate() {
            if l.is_positive() && !support.data()[n] {
                *l = Label::Background;
                gone.data_mut()[n] = true;
            }
        }
        entries.push(out);
        removed.push(gone);
    }
    Ok(FilterOutcome { filtered: MipAnnotationSet::from_parts_unchecked(mips.volume_dims(), entries), removed })
}

pub fn filter_labels(mips: &MipAnnotationSet) -> Result<MipAnnotationSet> {
    filter_labels_detailed(mips).map(|o| o.filtered)
}
