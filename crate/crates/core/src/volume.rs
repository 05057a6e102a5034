//! Dense 3D and 2D containers, the ternary label alphabet and axis conventions.
//!
//! Volumes are indexed `(i, j, k)` and stored with `k` varying fastest.
//! Projecting along [`Axis::Axis0`] yields an image indexed `(j, k)`,
//! along [`Axis::Axis1`] an image indexed `(i, k)` and along [`Axis::Axis2`]
//! an image indexed `(i, j)`. Images store their second index fastest.

use crate::error::{Error, Result};

pub type Dims3 = [usize; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Axis0,
    Axis1,
    Axis2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Axis0, Axis::Axis1, Axis::Axis2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Axis> {
        Axis::ALL.get(index).copied()
    }

    /// The two volume axes spanning the image plane, in image index order.
    pub fn plane(self) -> (usize, usize) {
        match self {
            Axis::Axis0 => (1, 2),
            Axis::Axis1 => (0, 2),
            Axis::Axis2 => (0, 1),
        }
    }

    pub fn image_dims(self, dims: Dims3) -> [usize; 2] {
        let (a, b) = self.plane();
        [dims[a], dims[b]]
    }

    pub fn ray_len(self, dims: Dims3) -> usize {
        dims[self.index()]
    }

    /// Pixel hit by voxel `v` when projecting along this axis.
    pub fn footprint(self, v: [usize; 3]) -> (usize, usize) {
        let (a, b) = self.plane();
        (v[a], v[b])
    }

    /// Voxel at position `t` along the ray through pixel `(a, b)`.
    pub fn voxel(self, t: usize, a: usize, b: usize) -> [usize; 3] {
        match self {
            Axis::Axis0 => [t, a, b],
            Axis::Axis1 => [a, t, b],
            Axis::Axis2 => [a, b, t],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum Label {
    #[default]
    Background = 0,
    Foreground = 1,
    Ignore = 2,
}

impl Label {
    pub fn from_u8(byte: u8) -> Result<Label> {
        match byte {
            0 => Ok(Label::Background),
            1 => Ok(Label::Foreground),
            2 => Ok(Label::Ignore),
            other => Err(Error::InvalidLabel(other)),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// Foreground or ignore: the positive class used when carving.
    pub fn is_positive(self) -> bool {
        !matches!(self, Label::Background)
    }
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::EmptyDims(dims.to_vec()));
    }
    if dims.iter().any(|&d| d > i32::MAX as usize) {
        return Err(Error::OutOfBounds(format!("dimension exceeds 2^31-1: {dims:?}")));
    }
    let expected = dims.iter().product::<usize>();
    if expected != len {
        return Err(Error::LengthMismatch { dims: dims.to_vec(), len });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    dims: Dims3,
    data: Vec<T>,
}

pub type ScalarVolume = Volume<f32>;
pub type LabelVolume = Volume<Label>;
pub type BinaryVolume = Volume<bool>;

impl<T: Copy> Volume<T> {
    pub fn new(dims: Dims3, data: Vec<T>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        Ok(Volume { dims, data })
    }

    pub fn filled(dims: Dims3, value: T) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![value; n])
    }

    pub fn from_fn(dims: Dims3, mut f: impl FnMut([usize; 3]) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f([i, j, k]));
                }
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, v: [usize; 3]) -> usize {
        debug_assert!(v[0] < self.dims[0] && v[1] < self.dims[1] && v[2] < self.dims[2]);
        (v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]
    }

    #[inline]
    pub fn get(&self, v: [usize; 3]) -> T {
        self.data[self.offset(v)]
    }

    #[inline]
    pub fn set(&mut self, v: [usize; 3], value: T) {
        let o = self.offset(v);
        self.data[o] = value;
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Volume<U> {
        Volume { dims: self.dims, data: self.data.iter().copied().map(f).collect() }
    }

    pub fn crop(&self, origin: [usize; 3], size: Dims3) -> Result<Self> {
        for ax in 0..3 {
            if size[ax] == 0 || origin[ax] + size[ax] > self.dims[ax] {
                return Err(Error::OutOfBounds(format!(
                    "crop origin {origin:?} size {size:?} exceeds dims {:?}",
                    self.dims
                )));
            }
        }
        let mut data = Vec::with_capacity(size.iter().product());
        for i in 0..size[0] {
            for j in 0..size[1] {
                let start = self.offset([origin[0] + i, origin[1] + j, origin[2]]);
                data.extend_from_slice(&self.data[start..start + size[2]]);
            }
        }
        Ok(Volume { dims: size, data })
    }

    pub fn same_dims<U>(&self, other: &Volume<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }
}

impl LabelVolume {
    pub fn count(&self, label: Label) -> usize {
        self.data.iter().filter(|&&l| l == label).count()
    }
}

/// A 2D image, optionally tagged with the projection axis it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    axis: Option<Axis>,
    dims: [usize; 2],
    data: Vec<T>,
}

pub type LabelImage = Image<Label>;
pub type BinaryImage = Image<bool>;

impl<T: Copy> Image<T> {
    pub fn new(axis: Option<Axis>, dims: [usize; 2], data: Vec<T>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        Ok(Image { axis, dims, data })
    }

    pub fn filled(axis: Option<Axis>, dims: [usize; 2], value: T) -> Result<Self> {
        Self::new(axis, dims, vec![value; dims[0] * dims[1]])
    }

    pub fn from_fn(axis: Option<Axis>, dims: [usize; 2], mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(dims[0] * dims[1]);
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                data.push(f(a, b));
            }
        }
        Self::new(axis, dims, data)
    }

    pub fn axis(&self) -> Option<Axis> {
        self.axis
    }

    pub fn with_axis(mut self, axis: Option<Axis>) -> Self {
        self.axis = axis;
        self
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> T {
        self.data[a * self.dims[1] + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, value: T) {
        self.data[a * self.dims[1] + b] = value;
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Image<U> {
        Image { axis: self.axis, dims: self.dims, data: self.data.iter().copied().map(f).collect() }
    }

    pub fn crop(&self, origin: [usize; 2], size: [usize; 2]) -> Result<Self> {
        for ax in 0..2 {
            if size[ax] == 0 || origin[ax] + size[ax] > self.dims[ax] {
                return Err(Error::OutOfBounds(format!(
                    "crop origin {origin:?} size {size:?} exceeds image dims {:?}",
                    self.dims
                )));
            }
        }
        let mut data = Vec::with_capacity(size[0] * size[1]);
        for a in 0..size[0] {
            let start = (origin[0] + a) * self.dims[1] + origin[1];
            data.extend_from_slice(&self.data[start..start + size[1]]);
        }
        Ok(Image { axis: self.axis, dims: size, data })
    }

    pub fn same_dims<U>(&self, other: &Image<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }
}

impl BinaryImage {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl LabelImage {
    pub fn count(&self, label: Label) -> usize {
        self.data.iter().filter(|&&l| l == label).count()
    }
}

/// One to three per-axis label images annotating the projections of a volume.
#[derive(Clone, Debug, PartialEq)]
pub struct MipAnnotationSet {
    volume_dims: Dims3,
    entries: Vec<LabelImage>,
}

impl MipAnnotationSet {
    /// Entries must carry an axis tag; they are kept sorted by axis.
    pub fn new(volume_dims: Dims3, entries: Vec<LabelImage>) -> Result<Self> {
        check_dims(&volume_dims, volume_dims.iter().product())?;
        if entries.is_empty() || entries.len() > 3 {
            return Err(Error::InvalidConfig(format!(
                "annotation set needs 1 to 3 entries, got {}",
                entries.len()
            )));
        }
        let mut entries = entries;
        for e in &entries {
            let axis = e
                .axis()
                .ok_or_else(|| Error::InvalidHeader("annotation image without axis tag".into()))?;
            let want = axis.image_dims(volume_dims);
            if e.dims() != want {
                return Err(Error::ShapeMismatch(format!(
                    "{axis:?} annotation has dims {:?}, volume {volume_dims:?} requires {want:?}",
                    e.dims()
                )));
            }
        }
        entries.sort_by_key(|e| e.axis());
        for w in entries.windows(2) {
            if w[0].axis() == w[1].axis() {
                return Err(Error::DuplicateAxis(w[0].axis().unwrap()));
            }
        }
        Ok(MipAnnotationSet { volume_dims, entries })
    }

    /// Builds a set whose volume extents are read off the images; a single
    /// entry leaves its ray length unknown, so it needs `ray_len`.
    pub fn from_images(entries: Vec<LabelImage>, ray_len: Option<usize>) -> Result<Self> {
        let mut dims: [Option<usize>; 3] = [None; 3];
        let mut seen = [false; 3];
        for e in &entries {
            let axis = e
                .axis()
                .ok_or_else(|| Error::InvalidHeader("annotation image without axis tag".into()))?;
            if std::mem::replace(&mut seen[axis.index()], true) {
                return Err(Error::DuplicateAxis(axis));
            }
            let (a, b) = axis.plane();
            for (slot, v) in [(a, e.dims()[0]), (b, e.dims()[1])] {
                match dims[slot] {
                    Some(d) if d != v => {
                        return Err(Error::ShapeMismatch(format!("annotations disagree on extent {slot}: {d} vs {v}")))
                    }
                    _ => dims[slot] = Some(v),
                }
            }
        }
        if let (Some(n), Some(e)) = (ray_len, entries.first()) {
            let axis = e.axis().unwrap().index();
            if dims[axis].is_some_and(|d| d != n) {
                return Err(Error::ShapeMismatch(format!("given extent {n} disagrees with annotations")));
            }
            dims[axis] = Some(n);
        }
        let volume_dims = match dims {
            [Some(a), Some(b), Some(c)] => [a, b, c],
            _ => return Err(Error::InvalidConfig("cannot infer volume dims from a single annotation".into())),
        };
        MipAnnotationSet::new(volume_dims, entries)
    }

    pub fn volume_dims(&self) -> Dims3 {
        self.volume_dims
    }

    pub fn entries(&self) -> &[LabelImage] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn axes(&self) -> Vec<Axis> {
        self.entries.iter().filter_map(|e| e.axis()).collect()
    }

    pub fn get(&self, axis: Axis) -> Option<&LabelImage> {
        self.entries.iter().find(|e| e.axis() == Some(axis))
    }

    /// Keeps only the entries whose axis is listed.
    pub fn select(&self, axes: &[Axis]) -> Result<Self> {
        let picked: Vec<_> = axes
            .iter()
            .map(|&a| {
                self.get(a)
                    .cloned()
                    .ok_or_else(|| Error::InvalidConfig(format!("no annotation for {a:?}")))
            })
            .collect::<Result<_>>()?;
        MipAnnotationSet::new(self.volume_dims, picked)
    }

    /// Crops every entry to the window that the 3D crop projects onto.
    ///
    /// Labels of structures lying outside the crop along an entry's axis
    /// survive, since the 2D window cannot tell them apart.
    pub fn crop(&self, origin: [usize; 3], size: Dims3) -> Result<Self> {
        for ax in 0..3 {
            if size[ax] == 0 || origin[ax] + size[ax] > self.volume_dims[ax] {
                return Err(Error::OutOfBounds(format!(
                    "crop origin {origin:?} size {size:?} exceeds dims {:?}",
                    self.volume_dims
                )));
            }
        }
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let (a, b) = e.axis().unwrap().plane();
                e.crop([origin[a], origin[b]], [size[a], size[b]])
            })
            .collect::<Result<_>>()?;
        Ok(MipAnnotationSet { volume_dims: size, entries })
    }

    pub(crate) fn from_parts_unchecked(volume_dims: Dims3, entries: Vec<LabelImage>) -> Self {
        MipAnnotationSet { volume_dims, entries }
    }
}

/// Crops an annotation set to the projections of a 3D window.
pub fn crop_mip_set(mips: &MipAnnotationSet, origin: [usize; 3], size: Dims3) -> Result<MipAnnotationSet> {
    mips.crop(origin, size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(dims: Dims3) -> Volume<f32> {
        Volume::from_fn(dims, |[i, j, k]| (i * 100 + j * 10 + k) as f32).unwrap()
    }

    #[test]
    fn dims_inferred_from_images() {
        let img = |axis: Axis, dims: [usize; 2]| Image::filled(Some(axis), dims, Label::Background).unwrap();
        let set = MipAnnotationSet::from_images(vec![img(Axis::Axis2, [3, 4]), img(Axis::Axis0, [4, 5])], None).unwrap();
        assert_eq!(set.volume_dims(), [3, 4, 5]);
        assert_eq!(set.axes(), vec![Axis::Axis0, Axis::Axis2]);
        assert!(MipAnnotationSet::from_images(vec![img(Axis::Axis1, [3, 5])], None).is_err());
        let one = MipAnnotationSet::from_images(vec![img(Axis::Axis1, [3, 5])], Some(7)).unwrap();
        assert_eq!(one.volume_dims(), [3, 7, 5]);
        let clash = MipAnnotationSet::from_images(vec![img(Axis::Axis2, [3, 4]), img(Axis::Axis0, [6, 5])], None);
        assert_eq!(clash.unwrap_err().code(), "shape_mismatch");
    }

    #[test]
    fn storage_is_k_fastest() {
        let v = ramp([2, 3, 4]);
        assert_eq!(v.data()[1], 1.0);
        assert_eq!(v.data()[4], 10.0);
        assert_eq!(v.data()[12], 100.0);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(Volume::<f32>::new([0, 2, 2], vec![]), Err(Error::EmptyDims(_))));
        assert!(Volume::<f32>::new([2, 2, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn crop_full_extent_is_identity() {
        let v = ramp([3, 4, 5]);
        assert_eq!(v.crop([0, 0, 0], [3, 4, 5]).unwrap(), v);
    }

    #[test]
    fn crop_matches_direct_indexing() {
        let v = ramp([4, 4, 4]);
        let c = v.crop([1, 1, 1], [2, 2, 2]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for d in 0..2 {
                    assert_eq!(c.get([a, b, d]), v.get([1 + a, 1 + b, 1 + d]));
                }
            }
        }
    }

    #[test]
    fn crop_out_of_bounds() {
        let v = ramp([4, 4, 4]);
        assert!(matches!(v.crop([3, 0, 0], [2, 1, 1]), Err(Error::OutOfBounds(_))));
    }

    fn blank_set(dims: Dims3, axes: &[Axis]) -> MipAnnotationSet {
        let entries = axes
            .iter()
            .map(|&a| Image::filled(Some(a), a.image_dims(dims), Label::Background).unwrap())
            .collect();
        MipAnnotationSet::new(dims, entries).unwrap()
    }

    #[test]
    fn annotation_set_rejects_duplicate_axes_and_bad_dims() {
        let dims = [2, 3, 4];
        let e0 = Image::filled(Some(Axis::Axis0), [3, 4], Label::Background).unwrap();
        assert!(matches!(
            MipAnnotationSet::new(dims, vec![e0.clone(), e0.clone()]),
            Err(Error::DuplicateAxis(Axis::Axis0))
        ));
        let wrong = Image::filled(Some(Axis::Axis1), [3, 4], Label::Background).unwrap();
        assert!(MipAnnotationSet::new(dims, vec![wrong]).is_err());
        let untagged = Image::filled(None, [3, 4], Label::Background).unwrap();
        assert!(MipAnnotationSet::new(dims, vec![untagged]).is_err());
    }

    #[test]
    fn crop_mip_set_full_extent_unchanged() {
        let set = blank_set([3, 4, 5], &Axis::ALL);
        assert_eq!(crop_mip_set(&set, [0, 0, 0], [3, 4, 5]).unwrap(), set);
    }

    #[test]
    fn cropped_annotation_keeps_labels_from_outside_the_crop() {
        // fg voxel at (0,3,0) lies outside j in [0,2); along Axis1 its ray
        // collapses j, so the pixel (i=0,k=0) stays foreground.
        let dims = [4, 4, 4];
        let mut set = blank_set(dims, &Axis::ALL);
        let v = [0, 3, 0];
        let mut entries = set.entries().to_vec();
        for e in entries.iter_mut() {
            let (a, b) = e.axis().unwrap().footprint(v);
            e.set(a, b, Label::Foreground);
        }
        set = MipAnnotationSet::new(dims, entries).unwrap();
        let cropped = crop_mip_set(&set, [0, 0, 0], [4, 2, 4]).unwrap();
        assert_eq!(cropped.volume_dims(), [4, 2, 4]);
        let e1 = cropped.get(Axis::Axis1).unwrap();
        assert_eq!(e1.dims(), [4, 4]);
        assert_eq!(e1.get(0, 0), Label::Foreground);
        // The other views lose the pixel because j = 3 is cropped away.
        assert_eq!(cropped.get(Axis::Axis0).unwrap().count(Label::Foreground), 0);
        assert_eq!(cropped.get(Axis::Axis2).unwrap().count(Label::Foreground), 0);
    }

    #[test]
    fn crop_of_axis2_only_set_crops_both_image_dims() {
        let dims = [5, 6, 7];
        let img = Image::from_fn(Some(Axis::Axis2), [5, 6], |a, b| {
            Label::from_u8(((a * 6 + b) % 3) as u8).unwrap()
        })
        .unwrap();
        let set = MipAnnotationSet::new(dims, vec![img.clone()]).unwrap();
        let cropped = crop_mip_set(&set, [1, 2, 3], [3, 2, 4]).unwrap();
        let e = cropped.get(Axis::Axis2).unwrap();
        assert_eq!(e.dims(), [3, 2]);
        for a in 0..3 {
            for b in 0..2 {
                assert_eq!(e.get(a, b), img.get(1 + a, 2 + b));
            }
        }
    }

    proptest! {
        #[test]
        fn crop_composes(d0 in 1usize..7, d1 in 1usize..7, d2 in 1usize..7, seed in any::<u64>()) {
            let v = ramp([d0, d1, d2]);
            let pick = |n: usize, s: u64| (s as usize) % n;
            let s1 = [1 + pick(d0, seed), 1 + pick(d1, seed >> 8), 1 + pick(d2, seed >> 16)];
            let o1 = [pick(d0 - s1[0] + 1, seed >> 24), pick(d1 - s1[1] + 1, seed >> 28), pick(d2 - s1[2] + 1, seed >> 32)];
            let s2 = [1 + pick(s1[0], seed >> 36), 1 + pick(s1[1], seed >> 40), 1 + pick(s1[2], seed >> 44)];
            let o2 = [pick(s1[0] - s2[0] + 1, seed >> 48), pick(s1[1] - s2[1] + 1, seed >> 52), pick(s1[2] - s2[2] + 1, seed >> 56)];
            let twice = v.crop(o1, s1).unwrap().crop(o2, s2).unwrap();
            let once = v.crop([o1[0] + o2[0], o1[1] + o2[1], o1[2] + o2[2]], s2).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
