//! The `VSG1` binary container.
//!
//! Layout: magic `VSG1`; dtype byte (0 = f32 little-endian, 1 = label u8);
//! rank byte (2 or 3); axis tag byte (0/1/2 for tagged images, 255 otherwise);
//! one reserved zero byte; `rank` little-endian u32 dims; then the payload with
//! the last index varying fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Axis, BinaryImage, BinaryVolume, Image, Label, LabelImage, LabelVolume, ScalarVolume, Volume};

pub const MAGIC: &[u8; 4] = b"VSG1";
pub const DTYPE_SCALAR: u8 = 0;
pub const DTYPE_LABEL: u8 = 1;
pub const NO_AXIS: u8 = 255;
const HEADER_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum Container {
    ScalarVolume(ScalarVolume),
    LabelVolume(LabelVolume),
    ScalarImage(Image<f32>),
    LabelImage(LabelImage),
}

impl Container {
    pub fn kind(&self) -> &'static str {
        match self {
            Container::ScalarVolume(_) => "scalar volume",
            Container::LabelVolume(_) => "label volume",
            Container::ScalarImage(_) => "scalar image",
            Container::LabelImage(_) => "label image",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Container::ScalarVolume(v) => v.encode_vsg(),
            Container::LabelVolume(v) => v.encode_vsg(),
            Container::ScalarImage(v) => v.encode_vsg(),
            Container::LabelImage(v) => v.encode_vsg(),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Container> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            let mut found = [0u8; 4];
            let n = bytes.len().min(4);
            found[..n].copy_from_slice(&bytes[..n]);
            return Err(Error::BadMagic { expected: "VSG1", found });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        let (dtype, rank, axis_tag, reserved) = (bytes[4], bytes[5], bytes[6], bytes[7]);
        if dtype > DTYPE_LABEL {
            return Err(Error::InvalidHeader(format!("unknown dtype {dtype}")));
        }
        if rank != 2 && rank != 3 {
            return Err(Error::InvalidHeader(format!("unsupported rank {rank}")));
        }
        if reserved != 0 {
            return Err(Error::InvalidHeader(format!("reserved byte is {reserved}")));
        }
        let axis = match (rank, axis_tag) {
            (_, NO_AXIS) => None,
            (2, t) => Some(
                Axis::from_index(t as usize)
                    .ok_or_else(|| Error::InvalidHeader(format!("invalid axis tag {t}")))?,
            ),
            (_, t) => return Err(Error::InvalidHeader(format!("axis tag {t} on a rank-3 container"))),
        };
        let dims_end = HEADER_LEN + 4 * rank as usize;
        if bytes.len() < dims_end {
            return Err(Error::Truncated { expected: dims_end, found: bytes.len() });
        }
        let dims: Vec<usize> = bytes[HEADER_LEN..dims_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::EmptyDims(dims));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidHeader("dims overflow".into()))?;
        let width = if dtype == DTYPE_SCALAR { 4 } else { 1 };
        let expected = dims_end + count * width;
        if bytes.len() < expected {
            return Err(Error::Truncated { expected, found: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(Error::InvalidHeader(format!("{} trailing bytes", bytes.len() - expected)));
        }
        let payload = &bytes[dims_end..];
        let d3 = |d: &[usize]| [d[0], d[1], d[2]];
        let d2 = |d: &[usize]| [d[0], d[1]];
        Ok(if dtype == DTYPE_SCALAR {
            let data: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if rank == 3 {
                Container::ScalarVolume(Volume::new(d3(&dims), data)?)
            } else {
                Container::ScalarImage(Image::new(axis, d2(&dims), data)?)
            }
        } else {
            let data = payload.iter().map(|&b| Label::from_u8(b)).collect::<Result<Vec<_>>>()?;
            if rank == 3 {
                Container::LabelVolume(Volume::new(d3(&dims), data)?)
            } else {
                Container::LabelImage(Image::new(axis, d2(&dims), data)?)
            }
        })
    }

    pub fn into_scalar_volume(self) -> Result<ScalarVolume> {
        match self {
            Container::ScalarVolume(v) => Ok(v),
            other => Err(Error::WrongKind { expected: "scalar volume", found: other.kind() }),
        }
    }

    pub fn into_label_volume(self) -> Result<LabelVolume> {
        match self {
            Container::LabelVolume(v) => Ok(v),
            other => Err(Error::WrongKind { expected: "label volume", found: other.kind() }),
        }
    }

    pub fn into_label_image(self) -> Result<LabelImage> {
        match self {
            Container::LabelImage(v) => Ok(v),
            other => Err(Error::WrongKind { expected: "label image", found: other.kind() }),
        }
    }

    pub fn into_scalar_image(self) -> Result<Image<f32>> {
        match self {
            Container::ScalarImage(v) => Ok(v),
            other => Err(Error::WrongKind { expected: "scalar image", found: other.kind() }),
        }
    }
}

fn header(dtype: u8, axis: Option<Axis>, dims: &[usize], payload_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * dims.len() + payload_len);
    out.extend_from_slice(MAGIC);
    out.push(dtype);
    out.push(dims.len() as u8);
    out.push(axis.map_or(NO_AXIS, |a| a.index() as u8));
    out.push(0);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out
}

/// Anything that can be written as a `VSG1` container.
pub trait VsgEncode {
    fn encode_vsg(&self) -> Vec<u8>;
}

impl VsgEncode for ScalarVolume {
    fn encode_vsg(&self) -> Vec<u8> {
        let mut out = header(DTYPE_SCALAR, None, &self.dims(), self.len() * 4);
        for v in self.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

impl VsgEncode for LabelVolume {
    fn encode_vsg(&self) -> Vec<u8> {
        let mut out = header(DTYPE_LABEL, None, &self.dims(), self.len());
        out.extend(self.data().iter().map(|l| l.as_u8()));
        out
    }
}

/// Binary volumes (hulls) are written as label volumes holding 0 and 1.
impl VsgEncode for BinaryVolume {
    fn encode_vsg(&self) -> Vec<u8> {
        let mut out = header(DTYPE_LABEL, None, &self.dims(), self.len());
        out.extend(self.data().iter().map(|&b| b as u8));
        out
    }
}

impl VsgEncode for Image<f32> {
    fn encode_vsg(&self) -> Vec<u8> {
        let mut out = header(DTYPE_SCALAR, self.axis(), &self.dims(), self.data().len() * 4);
        for v in self.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

impl VsgEncode for LabelImage {
    fn encode_vsg(&self) -> Vec<u8> {
        let mut out = header(DTYPE_LABEL, self.axis(), &self.dims(), self.data().len());
        out.extend(self.data().iter().map(|l| l.as_u8()));
        out
    }
}

impl VsgEncode for BinaryImage {
    fn encode_vsg(&self) -> Vec<u8> {
        let mut out = header(DTYPE_LABEL, self.axis(), &self.dims(), self.data().len());
        out.extend(self.data().iter().map(|&b| b as u8));
        out
    }
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Container> {
    Container::decode(&fs::read(path)?)
}

/// Reads a rank-3 container, scalar or label.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Container> {
    match read_container(path)? {
        c @ (Container::ScalarVolume(_) | Container::LabelVolume(_)) => Ok(c),
        other => Err(Error::WrongKind { expected: "volume", found: other.kind() }),
    }
}

pub fn write_vsg(path: impl AsRef<Path>, value: &impl VsgEncode) -> Result<()> {
    fs::write(path, value.encode_vsg())?;
    Ok(())
}

pub fn write_volume(path: impl AsRef<Path>, value: &impl VsgEncode) -> Result<()> {
    write_vsg(path, value)
}
