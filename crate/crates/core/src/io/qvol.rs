use std::io::Write;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use super::{atomic_write, atomic_write_with};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{Dims, Unit, Volume3};

/// JSON sidecar stored next to the raw block as `<path>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvolHeader {
    pub dims: Dims,
    pub voxel_size_mm: [f64; 3],
    pub unit_tag: Unit,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the raw little-endian `f32` block and its sidecar.
pub fn write_qvol<T: Real>(path: &Path, v: &Volume3<T>) -> Result<()> {
    let mut bytes = vec![0u8; v.len() * 4];
    let samples: Vec<f32> = v.data().iter().map(|x| x.as_f64() as f32).collect();
    LittleEndian::write_f32_into(&samples, &mut bytes);
    atomic_write(path, &bytes)?;
    let header = QvolHeader { dims: v.dims(), voxel_size_mm: v.voxel_size(), unit_tag: v.unit() };
    atomic_write_with(&sidecar_path(path), |f| {
        serde_json::to_writer_pretty(&mut *f, &header)?;
        f.write_all(b"\n")?;
        Ok(())
    })
}

pub fn read_qvol<T: Real>(path: &Path) -> Result<Volume3<T>> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side)?;
    let header: QvolHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(&side, format!("bad sidecar: {e}")))?;
    let bytes = std::fs::read(path)?;
    let n: usize = header.dims.iter().product();
    if bytes.len() != n * 4 {
        return Err(Error::format(path, format!("{} bytes, sidecar dims {:?} need {}", bytes.len(), header.dims, n * 4)));
    }
    let mut samples = vec![0f32; n];
    LittleEndian::read_f32_into(&bytes, &mut samples);
    let data = samples.into_iter().map(|x| T::of(x as f64)).collect();
    Volume3::new(header.dims, header.voxel_size_mm, header.unit_tag, data).map_err(|e| Error::format(path, e.to_string()))
}
