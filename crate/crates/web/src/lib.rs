//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The page keeps one [`Demo`] (a phantom with its ground truth and three
//! projection annotations) and calls into it for three views: the maximum
//! intensity projections, crop filtering of the annotations, and the
//! cross-view consistency curve under an annotation shift.

use mipcarve::annotate::{mips_from_3d_labels, rasterize, LabelSource};
use mipcarve::agree::cross_view_inconsistency;
use mipcarve::carve::filter_labels_detailed;
use mipcarve::phantom::{generate, PhantomConfig};
use mipcarve::project::mip;
use mipcarve::{Axis, Image, Label, LabelImage, MipAnnotationSet, Result, ScalarVolume};
use wasm_bindgen::prelude::*;

const DIMS: [usize; 3] = [32, 64, 64];
const MARGIN: usize = 5;

fn js(e: mipcarve::Error) -> JsError {
    JsError::new(&format!("{}: {}", e.code(), e))
}

fn axis(index: u32) -> std::result::Result<Axis, JsError> {
    Axis::from_index(index as usize).ok_or_else(|| JsError::new("axis must be 0, 1 or 2"))
}

#[wasm_bindgen]
pub struct Demo {
    volume: ScalarVolume,
    mips: MipAnnotationSet,
}

/// RGBA colours of annotation overlays.
const BACKGROUND: [u8; 4] = [16, 16, 24, 255];
const KEPT: [u8; 4] = [80, 220, 120, 255];
const IGNORED: [u8; 4] = [90, 90, 110, 255];
const REMOVED: [u8; 4] = [240, 70, 60, 255];

impl Demo {
    pub fn build(seed: u64, tubes: usize, noise: f64) -> Result<Demo> {
        let cfg = PhantomConfig { dims: DIMS, tube_count: tubes, noise_sigma: noise, rng_seed: seed, ..Default::default() };
        let p = generate(&cfg)?;
        let labels = rasterize(&p.centerlines, DIMS, MARGIN)?;
        let mips = mips_from_3d_labels(LabelSource::Labels(&labels), &Axis::ALL, MARGIN)?;
        Ok(Demo { volume: p.volume, mips })
    }

    /// Grayscale RGBA of the intensity projection along `axis`.
    pub fn projection_rgba(&self, axis: Axis) -> Vec<u8> {
        let (img, _) = mip(&self.volume, axis);
        let hi = img.data().iter().cloned().fold(f32::MIN, f32::max).max(1e-6);
        img.data().iter().flat_map(|&v| {
            let g = (v / hi * 255.0).round() as u8;
            [g, g, g, 255]
        }).collect()
    }

    /// Annotations of the crop `[start, start + depth)` along axis 0 after
    /// filtering with `views` projections (1 to 3, axes in order). Returns
    /// the RGBA overlay of the axis-0 entry and the number of removed pixels.
    pub fn crop_filter(&self, start: usize, depth: usize, views: usize) -> Result<(Vec<u8>, usize)> {
        let axes = &Axis::ALL[..views.clamp(1, 3)];
        let size = [depth, DIMS[1], DIMS[2]];
        let cropped = self.mips.select(axes)?.crop([start, 0, 0], size)?;
        let outcome = filter_labels_detailed(&cropped)?;
        let entry = outcome.filtered.get(Axis::Axis0).expect("axis 0 selected");
        let removed = &outcome.removed[0];
        let rgba = entry
            .data()
            .iter()
            .zip(removed.data())
            .flat_map(|(&l, &r)| match (l, r) {
                (_, true) => REMOVED,
                (Label::Foreground, _) => KEPT,
                (Label::Ignore, _) => IGNORED,
                (Label::Background, _) => BACKGROUND,
            })
            .collect();
        Ok((rgba, outcome.removed_count()))
    }

    /// Inconsistency curve for `d = 0..=d_max` after shifting the axis-1
    /// annotation by `shift` pixels along its second image axis.
    pub fn consistency(&self, shift: i64, d_max: u32) -> Result<Vec<f64>> {
        let a1 = self.mips.get(Axis::Axis1).expect("all axes present");
        let [rows, cols] = a1.dims();
        let moved: LabelImage = Image::from_fn(Some(Axis::Axis1), [rows, cols], |r, c| {
            let src = c as i64 - shift;
            if (0..cols as i64).contains(&src) { a1.get(r, src as usize) } else { Label::Background }
        })?;
        let entries = vec![self.mips.get(Axis::Axis0).unwrap().clone(), moved, self.mips.get(Axis::Axis2).unwrap().clone()];
        let set = MipAnnotationSet::new(DIMS, entries)?;
        Ok(cross_view_inconsistency(&set, d_max)?.fraction)
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, tubes: u32, noise: f64) -> std::result::Result<Demo, JsError> {
        Demo::build(seed as u64, tubes as usize, noise).map_err(js)
    }

    /// Volume extent along `axis`.
    pub fn extent(&self, axis: u32) -> u32 {
        DIMS[(axis as usize).min(2)] as u32
    }

    /// `[rows, cols]` of the projection along `axis`.
    pub fn image_dims(&self, axis_index: u32) -> std::result::Result<Vec<u32>, JsError> {
        Ok(axis(axis_index)?.image_dims(DIMS).iter().map(|&d| d as u32).collect())
    }

    pub fn projection(&self, axis_index: u32) -> std::result::Result<Vec<u8>, JsError> {
        Ok(self.projection_rgba(axis(axis_index)?))
    }

    /// RGBA overlay of the cropped axis-0 annotation: kept foreground green,
    /// ignore gray, removed labels red.
    pub fn filtered_overlay(&self, start: u32, depth: u32, views: u32) -> std::result::Result<Vec<u8>, JsError> {
        self.crop_filter(start as usize, depth as usize, views as usize).map(|r| r.0).map_err(js)
    }

    pub fn removed_after_crop(&self, start: u32, depth: u32, views: u32) -> std::result::Result<u32, JsError> {
        self.crop_filter(start as usize, depth as usize, views as usize).map(|r| r.1 as u32).map_err(js)
    }

    pub fn consistency_curve(&self, shift: i32, d_max: u32) -> std::result::Result<Vec<f64>, JsError> {
        self.consistency(shift as i64, d_max).map_err(js)
    }
}
