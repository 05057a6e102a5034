//! Axis-aligned maximum-intensity projections.

use crate::error::{Error, Result};
use crate::volume::{Axis, BinaryImage, Image, Label, LabelVolume, Volume};

/// Per-pixel index along the ray of the voxel that attains the maximum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgmaxMap {
    axis: Axis,
    dims: [usize; 2],
    data: Vec<u32>,
}

impl ArgmaxMap {
    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> usize {
        self.data[a * self.dims[1] + b] as usize
    }

    /// Volume coordinates of the maximizing voxel on the ray through `(a, b)`.
    pub fn voxel(&self, a: usize, b: usize) -> [usize; 3] {
        self.axis.voxel(self.get(a, b), a, b)
    }
}

/// Visits every ray along `axis` as `(a, b, offset of t=0, stride along t)`.
fn for_each_ray(dims: [usize; 3], axis: Axis, mut f: impl FnMut(usize, usize, usize, usize)) {
    let strides = [dims[1] * dims[2], dims[2], 1];
    let (pa, pb) = axis.plane();
    let step = strides[axis.index()];
    for a in 0..dims[pa] {
        for b in 0..dims[pb] {
            f(a, b, a * strides[pa] + b * strides[pb], step);
        }
    }
}

/// Maximum along each ray, with ties going to the smallest ray index.
pub fn mip<T: Copy + PartialOrd>(vol: &Volume<T>, axis: Axis) -> (Image<T>, ArgmaxMap) {
    let dims = vol.dims();
    let img_dims = axis.image_dims(dims);
    let n = axis.ray_len(dims);
    let data = vol.data();
    let mut values = Vec::with_capacity(img_dims[0] * img_dims[1]);
    let mut idx = Vec::with_capacity(img_dims[0] * img_dims[1]);
    for_each_ray(dims, axis, |_, _, base, step| {
        let mut best = data[base];
        let mut best_t = 0u32;
        for t in 1..n {
            let v = data[base + t * step];
            if v > best {
                best = v;
                best_t = t as u32;
            }
        }
        values.push(best);
        idx.push(best_t);
    });
    let image = Image::new(Some(axis), img_dims, values).expect("projection of a valid volume");
    (image, ArgmaxMap { axis, dims: img_dims, data: idx })
}

/// Projects a set of distinct axes.
pub fn mip_set<T: Copy + PartialOrd>(vol: &Volume<T>, axes: &[Axis]) -> Result<Vec<(Image<T>, ArgmaxMap)>> {
    check_axes(axes)?;
    Ok(axes.iter().map(|&a| mip(vol, a)).collect())
}

pub(crate) fn check_axes(axes: &[Axis]) -> Result<()> {
    if axes.is_empty() || axes.len() > 3 {
        return Err(Error::InvalidConfig(format!("expected 1 to 3 axes, got {}", axes.len())));
    }
    for (n, a) in axes.iter().enumerate() {
        if axes[..n].contains(a) {
            return Err(Error::DuplicateAxis(*a));
        }
    }
    Ok(())
}

/// Pixel is true iff some voxel on its ray satisfies `pred`.
pub fn project_any<T: Copy>(vol: &Volume<T>, axis: Axis, mut pred: impl FnMut(T) -> bool) -> BinaryImage {
    let dims = vol.dims();
    let n = axis.ray_len(dims);
    let data = vol.data();
    let mut out = Vec::with_capacity(axis.image_dims(dims).iter().product());
    for_each_ray(dims, axis, |_, _, base, step| {
        out.push((0..n).any(|t| pred(data[base + t * step])));
    });
    Image::new(Some(axis), axis.image_dims(dims), out).expect("projection of a valid volume")
}

/// Existential projection of a label volume: a pixel is set iff any voxel on
/// its ray carries one of the `positive` labels.
pub fn project_labels_any(lv: &LabelVolume, axis: Axis, positive: &[Label]) -> BinaryImage {
    project_any(lv, axis, |l| positive.contains(&l))
}
