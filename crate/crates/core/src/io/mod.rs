//! Volume files: `.qvol` (raw f32 + JSON sidecar) and single-file NIfTI-1.

mod nifti;
mod qvol;

pub use nifti::{read_nifti, write_nifti};
pub use qvol::{read_qvol, sidecar_path, write_qvol, QvolHeader};

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::Volume3;

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never observe a partial file.
pub fn atomic_write_with(path: &Path, write: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::format(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        write(&mut f)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write_with(path, |f| {
        use std::io::Write;
        f.write_all(bytes)?;
        Ok(())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeFormat {
    Qvol,
    Nifti,
}

impl VolumeFormat {
    /// `.nii` selects NIfTI; everything else is `.qvol`.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("nii") => Ok(VolumeFormat::Nifti),
            Some("qvol") => Ok(VolumeFormat::Qvol),
            Some("gz") => Err(Error::format(path, "compressed NIfTI is not supported")),
            _ => Err(Error::format(path, "expected a .qvol or .nii extension")),
        }
    }
}

pub fn read_volume<T: Real>(path: &Path) -> Result<Volume3<T>> {
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Qvol => read_qvol(path),
        VolumeFormat::Nifti => read_nifti(path),
    }
}

pub fn write_volume<T: Real>(path: &Path, v: &Volume3<T>) -> Result<()> {
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Qvol => write_qvol(path, v),
        VolumeFormat::Nifti => write_nifti(path, v),
    }
}
