//! Dataset directories: `<name>_volume.vsg` with optional `<name>_labels.vsg`
//! and `<name>_mip{0,1,2}.vsg` next to it.

use std::path::{Path, PathBuf};

use mipcarve::gradnet::TrainSample;
use mipcarve::io::read_container;
use mipcarve::{Axis, Error, MipAnnotationSet, Result};

pub const VOLUME_SUFFIX: &str = "_volume.vsg";

pub fn file_name(prefix: &str, what: &str) -> String {
    format!("{prefix}_{what}.vsg")
}

pub fn mip_name(prefix: &str, axis: Axis) -> String {
    file_name(prefix, &format!("mip{}", axis.index()))
}

/// Prefixes (full paths without the suffix) of every volume, sorted.
pub fn volume_prefixes(dir: &Path) -> Result<Vec<String>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.to_string_lossy();
        if let Some(prefix) = name.strip_suffix(VOLUME_SUFFIX) {
            found.push(prefix.to_string());
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::InvalidConfig(format!("no *{VOLUME_SUFFIX} files in {}", dir.display())));
    }
    Ok(found)
}

pub fn load_sample(prefix: &str) -> Result<TrainSample> {
    let volume = read_container(file_name(prefix, "volume"))?.into_scalar_volume()?;
    let labels_path = PathBuf::from(file_name(prefix, "labels"));
    let labels = if labels_path.exists() { Some(read_container(&labels_path)?.into_label_volume()?) } else { None };
    let mut entries = Vec::new();
    for axis in Axis::ALL {
        let p = PathBuf::from(mip_name(prefix, axis));
        if p.exists() {
            entries.push(read_container(&p)?.into_label_image()?);
        }
    }
    let mips = if entries.is_empty() { None } else { Some(MipAnnotationSet::new(volume.dims(), entries)?) };
    Ok(TrainSample { volume, labels, mips })
}

pub fn load_dir(dir: &Path) -> Result<Vec<TrainSample>> {
    volume_prefixes(dir)?.iter().map(|p| load_sample(p)).collect()
}
