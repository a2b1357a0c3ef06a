//! `.qpatch` patch files.
//!
//! Layout: one JSON header line
//! `{"version":1,"patch_size":P,"count":N,"voxel_size_mm":[dx,dy,dz]}\n`
//! followed by `N` fixed-length records, each three little-endian `f32`
//! blocks of `P³` values in x-fastest order: input, label, mask (0.0/1.0).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::patches::{PatchDataset, PatchRecord};
use crate::error::{Error, Result};
use crate::io::atomic_write_with;
use crate::scalar::Real;

pub const QPATCH_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpatchHeader {
    pub version: u32,
    pub patch_size: usize,
    pub count: usize,
    pub voxel_size_mm: [f64; 3],
}

pub fn write_qpatch<T: Real>(path: &Path, ds: &PatchDataset<T>) -> Result<()> {
    let n = ds.patch_size.pow(3);
    for (i, r) in ds.records.iter().enumerate() {
        if r.input.len() != n || r.label.len() != n || r.mask.len() != n {
            return Err(Error::format(path, format!("record {i} does not hold {n} voxels per block")));
        }
    }
    let header = QpatchHeader {
        version: QPATCH_VERSION,
        patch_size: ds.patch_size,
        count: ds.records.len(),
        voxel_size_mm: ds.voxel_size,
    };
    atomic_write_with(path, |file| {
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &ds.records {
            for v in r.input.iter().chain(&r.label) {
                w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
            }
            for &m in &r.mask {
                w.write_f32::<LittleEndian>(if m { 1.0 } else { 0.0 })?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

pub fn read_qpatch_header(path: &Path) -> Result<(QpatchHeader, u64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::format(path, "missing header line"));
    }
    let header: QpatchHeader =
        serde_json::from_slice(&line).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if header.version != QPATCH_VERSION {
        return Err(Error::format(path, format!("unsupported version {}", header.version)));
    }
    if header.patch_size == 0 {
        return Err(Error::format(path, "patch_size must be >= 1"));
    }
    Ok((header, line.len() as u64))
}

pub fn read_qpatch<T: Real>(path: &Path) -> Result<PatchDataset<T>> {
    let (header, offset) = read_qpatch_header(path)?;
    let n = header.patch_size.pow(3);
    let expected = offset + (header.count * 3 * n * 4) as u64;
    let actual = std::fs::metadata(path)?.len();
    if actual != expected {
        return Err(Error::format(path, format!("file is {actual} bytes, header implies {expected}")));
    }
    let mut r = BufReader::new(File::open(path)?);
    std::io::copy(&mut (&mut r).take(offset), &mut std::io::sink())?;
    let block = |r: &mut BufReader<File>| -> Result<Vec<f32>> {
        let mut v = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut v)?;
        Ok(v)
    };
    let mut records = Vec::with_capacity(header.count);
    for i in 0..header.count {
        let input = block(&mut r)?;
        let label = block(&mut r)?;
        let mask = block(&mut r)?;
        if input.iter().chain(&label).any(|v| !v.is_finite()) {
            return Err(Error::format(path, format!("record {i} holds non-finite values")));
        }
        if mask.iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::format(path, format!("record {i} mask is not binary")));
        }
        records.push(PatchRecord {
            origin: None,
            input: input.into_iter().map(|v| T::of(v as f64)).collect(),
            label: label.into_iter().map(|v| T::of(v as f64)).collect(),
            mask: mask.into_iter().map(|m| m == 1.0).collect(),
        });
    }
    Ok(PatchDataset {
        patch_size: header.patch_size,
        stride: 0,
        voxel_size: header.voxel_size_mm,
        records,
        provenance: vec![path.display().to_string()],
    })
}
