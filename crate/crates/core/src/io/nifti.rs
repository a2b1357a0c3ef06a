//! Single-file NIfTI-1 (`.nii`) restricted to 3D float32.

use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use super::atomic_write;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{Unit, Volume3};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;
const DT_FLOAT32: i16 = 16;
const UNIT_PREFIX: &str = "qsm unit=";

pub fn write_nifti<T: Real>(path: &Path, v: &Volume3<T>) -> Result<()> {
    type E = LittleEndian;
    let dims = v.dims();
    let vs = v.voxel_size();
    let mut buf = vec![0u8; DATA_OFFSET + v.len() * 4];
    let h = &mut buf[..DATA_OFFSET];
    E::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[38] = b'r';
    let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    if dims.iter().any(|&n| n > i16::MAX as usize) {
        return Err(Error::format(path, "dimension exceeds the NIfTI-1 limit of 32767"));
    }
    for (i, d) in dim.iter().enumerate() {
        E::write_i16(&mut h[40 + 2 * i..42 + 2 * i], *d);
    }
    E::write_i16(&mut h[70..72], DT_FLOAT32);
    E::write_i16(&mut h[72..74], 32);
    let pixdim: [f32; 8] = [1.0, vs[0] as f32, vs[1] as f32, vs[2] as f32, 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.iter().enumerate() {
        E::write_f32(&mut h[76 + 4 * i..80 + 4 * i], *p);
    }
    E::write_f32(&mut h[108..112], DATA_OFFSET as f32);
    E::write_f32(&mut h[112..116], 1.0);
    // mm, seconds
    h[123] = 10;
    let descrip = format!("{UNIT_PREFIX}{}", v.unit().as_str());
    h[148..148 + descrip.len()].copy_from_slice(descrip.as_bytes());
    E::write_i16(&mut h[254..256], 1);
    for (row, axis) in [(280usize, 0usize), (296, 1), (312, 2)] {
        E::write_f32(&mut h[row + 4 * axis..row + 4 * axis + 4], vs[axis] as f32);
    }
    h[344..348].copy_from_slice(b"n+1\0");
    let samples: Vec<f32> = v.data().iter().map(|x| x.as_f64() as f32).collect();
    E::write_f32_into(&samples, &mut buf[DATA_OFFSET..]);
    atomic_write(path, &buf)
}

pub fn read_nifti<T: Real>(path: &Path) -> Result<Volume3<T>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < HEADER_SIZE {
        return Err(Error::format(path, "shorter than a NIfTI-1 header"));
    }
    if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        parse::<T, LittleEndian>(path, &bytes)
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        parse::<T, BigEndian>(path, &bytes)
    } else {
        Err(Error::format(path, "sizeof_hdr is not 348"))
    }
}

fn parse<T: Real, E: ByteOrder>(path: &Path, b: &[u8]) -> Result<Volume3<T>> {
    if &b[344..348] != b"n+1\0" {
        return Err(Error::format(path, "not a single-file NIfTI-1 (magic must be n+1)"));
    }
    let dim: Vec<i16> = (0..8).map(|i| E::read_i16(&b[40 + 2 * i..42 + 2 * i])).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::format(path, format!("invalid dim[0] = {ndim}")));
    }
    if ndim < 3 || dim[4..=ndim as usize].iter().any(|&d| d > 1) {
        return Err(Error::format(path, format!("only 3D volumes are supported, dim = {:?}", &dim[..=ndim as usize])));
    }
    if dim[1..=3].iter().any(|&d| d < 1) {
        return Err(Error::format(path, format!("non-positive dimension in {:?}", &dim[1..=3])));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];
    let datatype = E::read_i16(&b[70..72]);
    let bitpix = E::read_i16(&b[72..74]);
    if datatype != DT_FLOAT32 || bitpix != 32 {
        return Err(Error::format(
            path,
            format!("unsupported datatype {datatype} (bitpix {bitpix}); only float32 (16) is accepted"),
        ));
    }
    let vs = [1usize, 2, 3].map(|i| E::read_f32(&b[76 + 4 * i..80 + 4 * i]) as f64);
    let offset = E::read_f32(&b[108..112]);
    if !(offset >= DATA_OFFSET as f32) || offset.fract() != 0.0 {
        return Err(Error::format(path, format!("invalid vox_offset {offset}")));
    }
    let offset = offset as usize;
    let n = dims.iter().product::<usize>();
    if b.len() < offset + 4 * n {
        return Err(Error::format(path, format!("truncated data: need {} bytes, have {}", offset + 4 * n, b.len())));
    }
    let mut samples = vec![0f32; n];
    E::read_f32_into(&b[offset..offset + 4 * n], &mut samples);
    let slope = E::read_f32(&b[112..116]) as f64;
    let inter = E::read_f32(&b[116..120]) as f64;
    let scale = |x: f32| -> f64 {
        if slope == 0.0 || (slope == 1.0 && inter == 0.0) { x as f64 } else { x as f64 * slope + inter }
    };
    let descrip = String::from_utf8_lossy(&b[148..228]);
    let unit = descrip
        .trim_end_matches('\0')
        .strip_prefix(UNIT_PREFIX)
        .and_then(|s| Unit::parse(s.trim()))
        .unwrap_or(Unit::Dimensionless);
    let data = samples.into_iter().map(|x| T::of(scale(x))).collect();
    Volume3::new(dims, vs, unit, data).map_err(|e| Error::format(path, e.to_string()))
}
