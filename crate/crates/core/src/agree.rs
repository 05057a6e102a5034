//! Consistency analytics for projection annotations: agreement with projected
//! 3D annotations and cross-view consistency through dilated visual hulls.

use std::fmt::Write as _;

use crate::annotate::dilate_disk;
use crate::carve::{hull_from_masks, project_hull};
use crate::error::{Error, Result};
use crate::volume::{BinaryImage, Label, MipAnnotationSet};

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyCurve {
    pub distances: Vec<u32>,
    pub fraction: Vec<f64>,
}

impl ConsistencyCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,fraction\n");
        for (d, f) in self.distances.iter().zip(&self.fraction) {
            writeln!(out, "{d},{f}").unwrap();
        }
        out
    }

    pub fn at(&self, d: u32) -> Option<f64> {
        self.distances.iter().position(|&x| x == d).map(|n| self.fraction[n])
    }
}

/// Precision and recall of a 2D annotation against a projected 3D one; an
/// empty denominator yields 1.
pub fn pr_2d_vs_3d(ann2d: &BinaryImage, proj3d: &BinaryImage) -> Result<(f64, f64)> {
    ann2d.same_dims(proj3d)?;
    let both = ann2d.data().iter().zip(proj3d.data()).filter(|(&a, &b)| a && b).count() as f64;
    let ratio = |n: usize| if n == 0 { 1.0 } else { both / n as f64 };
    Ok((ratio(ann2d.count()), ratio(proj3d.count())))
}

fn positives(img: &BinaryImage) -> Vec<(i64, i64)> {
    let [da, db] = img.dims();
    (0..da)
        .flat_map(|a| (0..db).map(move |b| (a, b)))
        .filter(|&(a, b)| img.get(a, b))
        .map(|(a, b)| (a as i64, b as i64))
        .collect()
}

/// Fraction of positives of `a` lying within Euclidean distance `d` of some
/// positive of `b`, for `d = 0..=d_max`. An empty `a` is vacuously matched.
pub fn distance_match_curve(a: &BinaryImage, b: &BinaryImage, d_max: u32) -> Result<ConsistencyCurve> {
    a.same_dims(b)?;
    let pa = positives(a);
    let pb = positives(b);
    let nearest2: Vec<Option<i64>> = pa
        .iter()
        .map(|&(x, y)| pb.iter().map(|&(u, v)| (x - u).pow(2) + (y - v).pow(2)).min())
        .collect();
    let distances: Vec<u32> = (0..=d_max).collect();
    let fraction = distances
        .iter()
        .map(|&d| {
            if pa.is_empty() {
                return 1.0;
            }
            let d2 = (d as i64).pow(2);
            nearest2.iter().filter(|n| n.is_some_and(|n| n <= d2)).count() as f64 / pa.len() as f64
        })
        .collect();
    Ok(ConsistencyCurve { distances, fraction })
}

/// Per-entry masks of positive labels (foreground or ignore) whose ray misses
/// the hull built after dilating every view by `d`.
pub fn inconsistent_labels(mips: &MipAnnotationSet, d: u32) -> Result<Vec<BinaryImage>> {
    if mips.len() < 2 {
        return Err(Error::TooFewEntries { needed: 2, got: mips.len() });
    }
    let masks: Vec<BinaryImage> = mips
        .entries()
        .iter()
        .map(|e| dilate_disk(&e.map(Label::is_positive), d as f64))
        .collect();
    let hull = hull_from_masks(mips.volume_dims(), &masks)?;
    Ok(mips
        .entries()
        .iter()
        .map(|e| {
            let support = project_hull(&hull, e.axis().unwrap());
            let mut flagged = e.map(Label::is_positive);
            for (f, &s) in flagged.data_mut().iter_mut().zip(support.data()) {
                *f &= !s;
            }
            flagged
        })
        .collect())
}

/// Fraction of foreground labels that no hull built from `d`-dilated views can
/// explain, for `d = 0..=d_max`. Hull filtering can miss inconsistent labels,
/// so each value is a lower bound.
pub fn cross_view_inconsistency(mips: &MipAnnotationSet, d_max: u32) -> Result<ConsistencyCurve> {
    let total: usize = mips.entries().iter().map(|e| e.count(Label::Foreground)).sum();
    let distances: Vec<u32> = (0..=d_max).collect();
    let mut fraction = Vec::with_capacity(distances.len());
    for &d in &distances {
        let flagged = inconsistent_labels(mips, d)?;
        let count: usize = mips
            .entries()
            .iter()
            .zip(&flagged)
            .map(|(e, f)| e.data().iter().zip(f.data()).filter(|(&l, &f)| f && l == Label::Foreground).count())
            .sum();
        fraction.push(if total == 0 { 0.0 } else { count as f64 / total as f64 });
    }
    Ok(ConsistencyCurve { distances, fraction })
}
