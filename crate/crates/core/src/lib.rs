//! Training 3D segmentation networks from maximum intensity projection
//! annotations: projection, visual-hull label filtering, projection losses,
//! synthetic data, scoring and a small CPU 3D U-Net.

pub mod agree;
pub mod annotate;
pub mod carve;
pub mod error;
pub mod gradnet;
pub mod io;
pub mod phantom;
pub mod project;
pub mod rng;
pub mod score;
pub mod suite;
pub mod supervise;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{Axis, BinaryImage, BinaryVolume, Dims3, Image, Label, LabelImage, LabelVolume, MipAnnotationSet, ScalarVolume, Volume};
