//! Binary portable graymap (P5) previews.

use std::path::Path;

use mipcarve::Image;

/// Min-max normalized 8-bit rendering; a constant image renders black.
pub fn encode(img: &Image<f32>) -> Vec<u8> {
    let [rows, cols] = img.dims();
    let (lo, hi) = img.data().iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(img.data().iter().map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 }));
    out
}

pub fn write(path: impl AsRef<Path>, img: &Image<f32>) -> std::io::Result<()> {
    std::fs::write(path, encode(img))
}
