//! NIfTI-1 subset: single-file `.nii`, datatype 16 (float32), little-endian,
//! x-fastest payload, identity orientation. qform/sform are ignored on read
//! and written as a diagonal voxel-size sform. A `<name>.meta.json` sidecar
//! carries the channel-order string plus normalization / disruption records
//! when applicable.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::volume::{
    voxel_count, BrainMask, DisruptionMask, ScalarVolume, TensorField, COEFF_ORDER,
};
use crate::zscore::NormalizationParams;

pub const HEADER_SIZE: usize = 348;
pub const VOX_OFFSET: usize = 352;
const MAGIC: [u8; 4] = *b"n+1\0";
const DT_FLOAT32: i16 = 16;

/// Byte offsets of the header fields this subset touches.
mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const REGULAR: usize = 38;
    pub const DIM: usize = 40; // i16[8]
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76; // f32[8]
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const XYZT_UNITS: usize = 123;
    pub const SFORM_CODE: usize = 254;
    pub const SROW_X: usize = 280; // f32[4] x3
    pub const MAGIC: usize = 344;
}

#[derive(Debug)]
pub enum Volume {
    Scalar(ScalarVolume),
    Tensor(TensorField),
}

/// Borrowed view unifying the two writable volume kinds.
#[derive(Debug, Clone, Copy)]
pub enum VolumeRef<'a> {
    Scalar(&'a ScalarVolume),
    Tensor(&'a TensorField),
}

impl<'a> From<&'a ScalarVolume> for VolumeRef<'a> {
    fn from(v: &'a ScalarVolume) -> Self {
        VolumeRef::Scalar(v)
    }
}

impl<'a> From<&'a TensorField> for VolumeRef<'a> {
    fn from(v: &'a TensorField) -> Self {
        VolumeRef::Tensor(v)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoreError + '_ {
    move |source| CoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn put_i16(buf: &mut [u8], off: usize, v: i16) {
    buf[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut [u8], off: usize, v: f32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i16(buf: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([buf[off], buf[off + 1]])
}

fn get_f32(buf: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn build_header(dims: [usize; 3], channels: usize, voxel_size: [f64; 3]) -> [u8; HEADER_SIZE] {
    let mut h = [0u8; HEADER_SIZE];
    h[offsets::SIZEOF_HDR..offsets::SIZEOF_HDR + 4]
        .copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[offsets::REGULAR] = b'r';
    let ndim: i16 = if channels > 1 { 4 } else { 3 };
    put_i16(&mut h, offsets::DIM, ndim);
    let dim4 = [dims[0], dims[1], dims[2], channels];
    for (i, &d) in dim4.iter().enumerate() {
        put_i16(&mut h, offsets::DIM + 2 * (i + 1), d as i16);
    }
    for i in (ndim as usize + 1)..8 {
        put_i16(&mut h, offsets::DIM + 2 * i, 1);
    }
    put_i16(&mut h, offsets::DATATYPE, DT_FLOAT32);
    put_i16(&mut h, offsets::BITPIX, 32);
    put_f32(&mut h, offsets::PIXDIM, 1.0); // qfac
    for (i, &s) in voxel_size.iter().enumerate() {
        put_f32(&mut h, offsets::PIXDIM + 4 * (i + 1), s as f32);
    }
    if ndim == 4 {
        put_f32(&mut h, offsets::PIXDIM + 4 * 4, 1.0);
    }
    put_f32(&mut h, offsets::VOX_OFFSET, VOX_OFFSET as f32);
    put_f32(&mut h, offsets::SCL_SLOPE, 1.0);
    h[offsets::XYZT_UNITS] = 2; // millimeters
    put_i16(&mut h, offsets::SFORM_CODE, 1);
    // Identity orientation: diagonal sform scaled by voxel size.
    for (row, &s) in voxel_size.iter().enumerate() {
        put_f32(&mut h, offsets::SROW_X + 16 * row + 4 * row, s as f32);
    }
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(&MAGIC);
    h
}

/// Write a volume as NIfTI-1 float32. Lossless for values representable in
/// float32; callers that need exact f64 round-trips keep data in that set.
pub fn write_volume(vol: VolumeRef<'_>, path: &Path) -> Result<()> {
    let (dims, channels, voxel_size, data): ([usize; 3], usize, [f64; 3], &[f64]) = match vol {
        VolumeRef::Scalar(v) => (v.dims, 1, v.voxel_size, &v.data),
        VolumeRef::Tensor(f) => (f.dims, 6, f.voxel_size, &f.coeffs),
    };
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(&build_header(dims, channels, voxel_size))
        .map_err(io_err(path))?;
    w.write_all(&[0u8; 4]).map_err(io_err(path))?; // extension pad -> payload at 352
    for &v in data {
        w.write_f32::<LittleEndian>(v as f32)
            .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.len() < HEADER_SIZE {
        return Err(CoreError::MalformedHeader(format!(
            "file is {} bytes, shorter than the {HEADER_SIZE}-byte header",
            bytes.len()
        )));
    }
    let h = &bytes[..HEADER_SIZE];
    let sizeof_hdr = i32::from_le_bytes([h[0], h[1], h[2], h[3]]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(CoreError::MalformedHeader(format!(
            "sizeof_hdr = {sizeof_hdr}, expected {HEADER_SIZE} (big-endian files unsupported)"
        )));
    }
    if h[offsets::MAGIC..offsets::MAGIC + 4] != MAGIC {
        return Err(CoreError::MalformedHeader(format!(
            "magic bytes {:?}, expected \"n+1\\0\"",
            &h[offsets::MAGIC..offsets::MAGIC + 4]
        )));
    }
    let datatype = get_i16(h, offsets::DATATYPE);
    if datatype != DT_FLOAT32 {
        return Err(CoreError::UnsupportedDatatype(datatype));
    }
    let bitpix = get_i16(h, offsets::BITPIX);
    if bitpix != 32 {
        return Err(CoreError::MalformedHeader(format!(
            "bitpix = {bitpix}, expected 32"
        )));
    }
    let ndim = get_i16(h, offsets::DIM);
    if !(3..=4).contains(&ndim) {
        return Err(CoreError::UnsupportedDims { ndim, channels: 0 });
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let v = get_i16(h, offsets::DIM + 2 * (i + 1));
        if v < 1 {
            return Err(CoreError::MalformedHeader(format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    let channels = if ndim == 4 {
        let v = get_i16(h, offsets::DIM + 2 * 4);
        if v < 1 {
            return Err(CoreError::MalformedHeader(format!("dim[4] = {v}")));
        }
        v as usize
    } else {
        1
    };
    if channels != 1 && channels != 6 {
        return Err(CoreError::UnsupportedDims { ndim, channels });
    }
    let mut voxel_size = [0f64; 3];
    for (i, s) in voxel_size.iter_mut().enumerate() {
        let v = get_f32(h, offsets::PIXDIM + 4 * (i + 1));
        if !v.is_finite() || v <= 0.0 {
            return Err(CoreError::MalformedHeader(format!(
                "pixdim[{}] = {v}",
                i + 1
            )));
        }
        *s = v as f64;
    }
    let vox_offset = get_f32(h, offsets::VOX_OFFSET);
    if !vox_offset.is_finite() || vox_offset < HEADER_SIZE as f32 {
        return Err(CoreError::MalformedHeader(format!(
            "vox_offset = {vox_offset}"
        )));
    }
    let offset = vox_offset as usize;
    let n = voxel_count(dims) * channels;
    let expected = n * 4;
    let got = bytes.len().saturating_sub(offset);
    if got < expected {
        return Err(CoreError::TruncatedData { expected, got });
    }
    let mut payload = vec![0f32; n];
    (&bytes[offset..offset + expected])
        .read_f32_into::<LittleEndian>(&mut payload)
        .map_err(io_err(path))?;
    let data: Vec<f64> = payload.into_iter().map(f64::from).collect();
    Ok(if channels == 6 {
        Volume::Tensor(TensorField::new(dims, voxel_size, data))
    } else {
        Volume::Scalar(ScalarVolume::new(dims, voxel_size, data))
    })
}

pub fn read_tensor_field(path: &Path) -> Result<TensorField> {
    match read_volume(path)? {
        Volume::Tensor(f) => Ok(f),
        Volume::Scalar(v) => Err(CoreError::MalformedHeader(format!(
            "{} is a scalar volume, expected a 6-channel tensor field (dims {:?})",
            path.display(),
            v.dims
        ))),
    }
}

pub fn read_scalar_volume(path: &Path) -> Result<ScalarVolume> {
    match read_volume(path)? {
        Volume::Scalar(v) => Ok(v),
        Volume::Tensor(_) => Err(CoreError::MalformedHeader(format!(
            "{} is a 6-channel tensor field, expected a scalar volume",
            path.display()
        ))),
    }
}

/// Masks persist as float32 0/1 scalar volumes.
pub fn write_mask(mask: &BrainMask, voxel_size: [f64; 3], path: &Path) -> Result<()> {
    let data: Vec<f64> = mask.data.iter().map(|&v| f64::from(v)).collect();
    let vol = ScalarVolume::new(mask.dims, voxel_size, data);
    write_volume(VolumeRef::Scalar(&vol), path)
}

pub fn read_mask(path: &Path) -> Result<BrainMask> {
    let vol = read_scalar_volume(path)?;
    let data: Vec<u8> = vol.data.iter().map(|&v| u8::from(v >= 0.5)).collect();
    Ok(BrainMask::new(vol.dims, data))
}

/// Sidecar payload written next to `.nii` artifacts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetaSidecar {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_order: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disruption: Option<DisruptionInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisruptionInfo {
    pub fraction: f64,
    pub slices: Vec<usize>,
}

impl MetaSidecar {
    pub fn tensor() -> Self {
        MetaSidecar {
            channel_order: Some(COEFF_ORDER.to_string()),
            ..Default::default()
        }
    }
}

/// `foo.nii` -> `foo.meta.json`.
pub fn meta_path(volume_path: &Path) -> PathBuf {
    volume_path.with_extension("meta.json")
}

pub fn write_meta(volume_path: &Path, meta: &MetaSidecar) -> Result<()> {
    let path = meta_path(volume_path);
    let text = serde_json::to_string_pretty(meta).map_err(|source| CoreError::Json {
        path: path.clone(),
        source,
    })?;
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_meta(volume_path: &Path) -> Result<MetaSidecar> {
    let path = meta_path(volume_path);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| CoreError::Json { path, source })
}

/// Tensor field + sidecar carrying the channel-order string.
pub fn write_tensor_field(field: &TensorField, path: &Path) -> Result<()> {
    write_volume(VolumeRef::Tensor(field), path)?;
    write_meta(path, &MetaSidecar::tensor())
}

/// Disruption mask + sidecar noting fraction and slice indices.
pub fn write_disruption_mask(
    dmask: &DisruptionMask,
    voxel_size: [f64; 3],
    path: &Path,
) -> Result<()> {
    let as_mask = BrainMask::new(dmask.dims, dmask.data.clone());
    write_mask(&as_mask, voxel_size, path)?;
    write_meta(
        path,
        &MetaSidecar {
            disruption: Some(DisruptionInfo {
                fraction: dmask.fraction,
                slices: dmask.slices.clone(),
            }),
            ..Default::default()
        },
    )
}

pub fn read_disruption_mask(path: &Path) -> Result<DisruptionMask> {
    let mask = read_mask(path)?;
    let meta = read_meta(path)?;
    let info = meta.disruption.ok_or_else(|| {
        CoreError::MalformedHeader(format!(
            "{} sidecar lacks a disruption record",
            path.display()
        ))
    })?;
    Ok(DisruptionMask {
        dims: mask.dims,
        data: mask.data,
        slices: info.slices,
        fraction: info.fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_4x4x4_file_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.nii");
        let vol = ScalarVolume::zeros([4, 4, 4], [1.0; 3]);
        write_volume(VolumeRef::Scalar(&vol), &path).unwrap();
        // 348-byte header + 4-byte extension pad + 64 voxels x 4 bytes.
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 352 + 4 * 64);
    }

    #[test]
    fn minimal_1x1x1() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.nii");
        let vol = ScalarVolume::new([1, 1, 1], [1.0; 3], vec![0.25]);
        write_volume(VolumeRef::Scalar(&vol), &path).unwrap();
        match read_volume(&path).unwrap() {
            Volume::Scalar(v) => {
                assert_eq!(v.dims, [1, 1, 1]);
                assert_eq!(v.data, vec![0.25]);
            }
            Volume::Tensor(_) => panic!("expected scalar"),
        }
    }

    // Header fixture assembled by hand, independent of build_header, so the
    // reader is checked against the format and not against the writer.
    #[test]
    fn reads_handwritten_4d_header() {
        let dims = [3usize, 2, 2];
        let n = 3 * 2 * 2 * 6;
        let mut bytes = vec![0u8; 352 + n * 4];
        bytes[0..4].copy_from_slice(&348i32.to_le_bytes());
        let dim: [i16; 8] = [4, 3, 2, 2, 6, 1, 1, 1];
        for (i, d) in dim.iter().enumerate() {
            bytes[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
        }
        bytes[70..72].copy_from_slice(&16i16.to_le_bytes());
        bytes[72..74].copy_from_slice(&32i16.to_le_bytes());
        for i in 1..=3 {
            bytes[76 + 4 * i..80 + 4 * i].copy_from_slice(&1.25f32.to_le_bytes());
        }
        bytes[108..112].copy_from_slice(&352.0f32.to_le_bytes());
        bytes[344..348].copy_from_slice(b"n+1\0");
        for i in 0..n {
            let v = (i as f32) * 0.5;
            bytes[352 + 4 * i..356 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hand.nii");
        std::fs::write(&path, &bytes).unwrap();
        match read_volume(&path).unwrap() {
            Volume::Tensor(f) => {
                assert_eq!(f.dims, dims);
                assert_eq!(f.voxel_size, [1.25; 3]);
                assert_eq!(f.coeffs[5], 2.5);
                assert_eq!(f.coeffs.len(), n);
            }
            Volume::Scalar(_) => panic!("expected tensor field"),
        }
    }

    #[test]
    fn wrong_magic_reports_malformed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nii");
        let vol = ScalarVolume::zeros([2, 2, 2], [1.0; 3]);
        write_volume(VolumeRef::Scalar(&vol), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[344..348].copy_from_slice(b"ni1\0");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(CoreError::MalformedHeader(_))
        ));
    }

    #[test]
    fn wrong_datatype_reported_distinctly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dt.nii");
        let vol = ScalarVolume::zeros([2, 2, 2], [1.0; 3]);
        write_volume(VolumeRef::Scalar(&vol), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[70..72].copy_from_slice(&64i16.to_le_bytes()); // float64 code
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(CoreError::UnsupportedDatatype(64))
        ));
    }

    #[test]
    fn truncated_payload_reported_distinctly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.nii");
        let vol = ScalarVolume::zeros([4, 4, 4], [1.0; 3]);
        write_volume(VolumeRef::Scalar(&vol), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        match read_volume(&path) {
            Err(CoreError::TruncatedData { expected, got }) => {
                assert_eq!(expected, 256);
                assert_eq!(got, 246);
            }
            other => panic!("expected TruncatedData, got {other:?}"),
        }
    }

    #[test]
    fn disruption_mask_sidecar_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dmask.nii");
        let dm = DisruptionMask {
            dims: [2, 2, 3],
            data: vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 1],
            slices: vec![2],
            fraction: 0.1,
        };
        write_disruption_mask(&dm, [1.0; 3], &path).unwrap();
        let back = read_disruption_mask(&path).unwrap();
        assert_eq!(back, dm);
    }
}
