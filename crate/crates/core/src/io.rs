//! Volume and mask containers.
//!
//! The canonical container is a JSON sidecar (`<name>.vol.json`) pointing at
//! a little-endian raw payload (`<name>.raw`), x-fastest. The same header can
//! also be packed in front of the payload in a single byte stream: one line
//! of compact JSON, a `\n`, then the payload. Single-file NIfTI-1 (`.nii`,
//! int16 or float32, uncompressed) is accepted read-only.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::VolumeError;
use crate::volume::{Grid, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Int16,
    Float32,
    Uint8,
}

impl DType {
    pub const fn size(self) -> usize {
        match self {
            DType::Int16 => 2,
            DType::Float32 => 4,
            DType::Uint8 => 1,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            DType::Int16 => "int16",
            DType::Float32 => "float32",
            DType::Uint8 => "uint8",
        }
    }
}

/// Header of the canonical container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub dtype: DType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
    #[serde(default = "little")]
    pub byte_order: String,
}

fn little() -> String {
    "little".to_owned()
}

/// Decoded container contents before interpretation as volume or mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RawImage {
    pub grid: Grid,
    pub dtype: DType,
    pub values: Vec<f32>,
}

impl RawImage {
    pub fn into_volume(self) -> Result<Volume, VolumeError> {
        Volume::new(self.grid, self.values)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VolumeError + '_ {
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            VolumeError::Missing(path.to_path_buf())
        } else {
            VolumeError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

pub fn encode_payload(values: &[f32], dtype: DType) -> Result<Vec<u8>, VolumeError> {
    let mut out = Vec::with_capacity(values.len() * dtype.size());
    for (index, &value) in values.iter().enumerate() {
        let bad = || VolumeError::Unrepresentable {
            value,
            index,
            dtype: dtype.name(),
        };
        match dtype {
            DType::Float32 => out.extend_from_slice(&value.to_le_bytes()),
            DType::Int16 => {
                if value.fract() != 0.0 || value < i16::MIN as f32 || value > i16::MAX as f32 {
                    return Err(bad());
                }
                out.extend_from_slice(&(value as i16).to_le_bytes());
            }
            DType::Uint8 => {
                if value.fract() != 0.0 || !(0.0..=255.0).contains(&value) {
                    return Err(bad());
                }
                out.push(value as u8);
            }
        }
    }
    Ok(out)
}

pub fn decode_payload(bytes: &[u8], dtype: DType, count: usize) -> Result<Vec<f32>, VolumeError> {
    if bytes.len() != count * dtype.size() {
        return Err(VolumeError::SizeMismatch {
            expected: count,
            found: bytes.len() / dtype.size(),
        });
    }
    let values = match dtype {
        DType::Float32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        DType::Int16 => bytes
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        DType::Uint8 => bytes.iter().map(|&b| b as f32).collect(),
    };
    Ok(values)
}

fn check_header(h: &Sidecar) -> Result<Grid, VolumeError> {
    if h.byte_order != "little" {
        return Err(VolumeError::Header(format!(
            "unsupported byte_order '{}'",
            h.byte_order
        )));
    }
    Grid::new(h.dims, h.spacing_mm)
}

fn parse_sidecar(text: &[u8]) -> Result<Sidecar, VolumeError> {
    serde_json::from_slice(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown variant") && msg.contains("dtype") || msg.contains("`int16`") {
            VolumeError::Dtype(msg)
        } else {
            VolumeError::Header(msg)
        }
    })
}

/// `foo.vol.json` -> `foo`; anything else keeps its file stem.
fn container_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Some(s) = name.strip_suffix(".vol.json") {
        s.to_owned()
    } else if let Some(s) = name.strip_suffix(".json") {
        s.to_owned()
    } else {
        name
    }
}

/// Reads a canonical container or a NIfTI-1 file, chosen by extension.
pub fn load_image(path: &Path) -> Result<RawImage, VolumeError> {
    let name = path.to_string_lossy();
    if name.ends_with(".nii") {
        let bytes = fs::read(path).map_err(io_err(path))?;
        return read_nifti(&bytes);
    }
    if name.ends_with(".json") {
        let text = fs::read(path).map_err(io_err(path))?;
        let header = parse_sidecar(&text)?;
        let grid = check_header(&header)?;
        let data_file = header
            .data_file
            .clone()
            .ok_or_else(|| VolumeError::Header("sidecar lacks data_file".into()))?;
        let raw_path: PathBuf = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(data_file);
        let bytes = fs::read(&raw_path).map_err(io_err(&raw_path))?;
        let values = decode_payload(&bytes, header.dtype, grid.len())?;
        return Ok(RawImage {
            grid,
            dtype: header.dtype,
            values,
        });
    }
    Err(VolumeError::Format(format!(
        "{name}: expected a .vol.json sidecar or a .nii file"
    )))
}

pub fn load_volume(path: &Path) -> Result<Volume, VolumeError> {
    let img = load_image(path)?;
    if img.dtype == DType::Uint8 {
        return Err(VolumeError::Dtype("uint8 (mask container, not a volume)".into()));
    }
    img.into_volume()
}

/// Writes `values` as a canonical container at `path` (a `.vol.json` name)
/// and its `.raw` payload next to it.
pub fn save_image(path: &Path, grid: &Grid, dtype: DType, values: &[f32]) -> Result<(), VolumeError> {
    let payload = encode_payload(values, dtype)?;
    let stem = container_stem(path);
    let data_file = format!("{stem}.raw");
    let header = Sidecar {
        dims: grid.dims,
        spacing_mm: grid.spacing,
        dtype,
        data_file: Some(data_file.clone()),
        byte_order: little(),
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let raw_path = dir.join(data_file);
    fs::write(&raw_path, payload).map_err(io_err(&raw_path))?;
    let json = serde_json::to_vec_pretty(&header).expect("sidecar serializes");
    fs::write(path, json).map_err(io_err(path))?;
    Ok(())
}

pub fn save_volume(path: &Path, volume: &Volume, dtype: DType) -> Result<(), VolumeError> {
    save_image(path, volume.grid(), dtype, volume.data())
}

pub fn encode_packed(grid: &Grid, dtype: DType, values: &[f32]) -> Result<Vec<u8>, VolumeError> {
    let header = Sidecar {
        dims: grid.dims,
        spacing_mm: grid.spacing,
        dtype,
        data_file: None,
        byte_order: little(),
    };
    let mut out = serde_json::to_vec(&header).expect("sidecar serializes");
    out.push(b'\n');
    out.extend(encode_payload(values, dtype)?);
    Ok(out)
}

pub fn decode_packed(bytes: &[u8]) -> Result<RawImage, VolumeError> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| VolumeError::Header("packed container lacks header line".into()))?;
    let header = parse_sidecar(&bytes[..split])?;
    let grid = check_header(&header)?;
    let values = decode_payload(&bytes[split + 1..], header.dtype, grid.len())?;
    Ok(RawImage {
        grid,
        dtype: header.dtype,
        values,
    })
}

/// Decodes an in-memory upload: NIfTI-1 if the magic matches, else packed.
pub fn decode_bytes(bytes: &[u8]) -> Result<RawImage, VolumeError> {
    if looks_like_nifti(bytes) {
        read_nifti(bytes)
    } else if bytes.first() == Some(&b'{') {
        decode_packed(bytes)
    } else {
        Err(VolumeError::Format(
            "neither NIfTI-1 nor a packed canonical container".into(),
        ))
    }
}

const NIFTI_HEADER_LEN: usize = 348;

fn looks_like_nifti(bytes: &[u8]) -> bool {
    bytes.len() >= NIFTI_HEADER_LEN && &bytes[344..347] == b"n+1"
}

/// Parses the supported NIfTI-1 subset. Orientation fields and the
/// `scl_slope`/`scl_inter` pair are ignored: intensities are taken as stored.
pub fn read_nifti(bytes: &[u8]) -> Result<RawImage, VolumeError> {
    if bytes.len() < NIFTI_HEADER_LEN {
        return Err(VolumeError::Header("file shorter than NIfTI-1 header".into()));
    }
    let le = i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let be = i32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let little_endian = match (le, be) {
        (348, _) => true,
        (_, 348) => false,
        _ => return Err(VolumeError::Header("sizeof_hdr is not 348".into())),
    };
    if &bytes[344..347] != b"n+1" {
        return Err(VolumeError::Header(
            "only single-file NIfTI-1 ('n+1') is supported".into(),
        ));
    }
    let i16_at = |off: usize| {
        let b = [bytes[off], bytes[off + 1]];
        if little_endian {
            i16::from_le_bytes(b)
        } else {
            i16::from_be_bytes(b)
        }
    };
    let f32_at = |off: usize| {
        let b = [bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]];
        if little_endian {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    };
    let ndim = i16_at(40);
    if !(1..=4).contains(&ndim) {
        return Err(VolumeError::Header(format!("unsupported dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (a, d) in dims.iter_mut().enumerate().take((ndim as usize).min(3)) {
        let v = i16_at(42 + 2 * a);
        if v <= 0 {
            return Err(VolumeError::Dims([0; 3]));
        }
        *d = v as usize;
    }
    if ndim == 4 && i16_at(48) > 1 {
        return Err(VolumeError::Header("multi-volume (4D) files are not supported".into()));
    }
    let dtype = match i16_at(70) {
        4 => DType::Int16,
        16 => DType::Float32,
        other => return Err(VolumeError::Dtype(format!("NIfTI datatype code {other}"))),
    };
    let mut spacing = [1.0f64; 3];
    for (a, s) in spacing.iter_mut().enumerate() {
        *s = f32_at(80 + 4 * a) as f64;
    }
    let grid = Grid::new(dims, spacing)?;
    let offset = f32_at(108);
    if !(offset >= NIFTI_HEADER_LEN as f32) || offset.fract() != 0.0 {
        return Err(VolumeError::Header(format!("invalid vox_offset {offset}")));
    }
    let offset = offset as usize;
    let needed = grid.len() * dtype.size();
    let available = bytes.len().saturating_sub(offset);
    if available != needed {
        return Err(VolumeError::SizeMismatch {
            expected: grid.len(),
            found: available / dtype.size(),
        });
    }
    let payload = &bytes[offset..];
    let values = if little_endian {
        decode_payload(payload, dtype, grid.len())?
    } else {
        let swapped: Vec<u8> = payload
            .chunks_exact(dtype.size())
            .flat_map(|c| c.iter().rev().copied().collect::<Vec<_>>())
            .collect();
        decode_payload(&swapped, dtype, grid.len())?
    };
    Ok(RawImage {
        grid,
        dtype,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nifti_bytes(dims: [i16; 3], spacing: [f32; 3], code: i16, payload: &[u8]) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        h[0..4].copy_from_slice(&348i32.to_le_bytes());
        h[40..42].copy_from_slice(&3i16.to_le_bytes());
        for a in 0..3 {
            h[42 + 2 * a..44 + 2 * a].copy_from_slice(&dims[a].to_le_bytes());
            h[80 + 4 * a..84 + 4 * a].copy_from_slice(&spacing[a].to_le_bytes());
        }
        h[70..72].copy_from_slice(&code.to_le_bytes());
        h[108..112].copy_from_slice(&352f32.to_le_bytes());
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(payload);
        h
    }

    #[test]
    fn zero_int16_raw_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("z.raw"), vec![0u8; 4 * 4 * 4 * 2]).unwrap();
        fs::write(
            dir.path().join("z.vol.json"),
            r#"{"dims":[4,4,4],"spacing_mm":[1,1,1],"dtype":"int16","data_file":"z.raw","byte_order":"little"}"#,
        )
        .unwrap();
        let v = load_volume(&dir.path().join("z.vol.json")).unwrap();
        assert_eq!(v.dims(), [4, 4, 4]);
        assert_eq!(v.intensity_range(), (0.0, 0.0));
    }

    #[test]
    fn short_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("s.raw"), vec![0u8; 999 * 4]).unwrap();
        fs::write(
            dir.path().join("s.vol.json"),
            r#"{"dims":[10,10,10],"spacing_mm":[1,1,1],"dtype":"float32","data_file":"s.raw","byte_order":"little"}"#,
        )
        .unwrap();
        let err = load_volume(&dir.path().join("s.vol.json")).unwrap_err();
        assert!(matches!(err, VolumeError::SizeMismatch { expected: 1000, found: 999 }), "{err}");
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.vol.json");
        fs::write(dir.path().join("b.raw"), vec![0u8; 8]).unwrap();
        fs::write(
            &p,
            r#"{"dims":[2,2,2],"spacing_mm":[1,-1,1],"dtype":"uint8","data_file":"b.raw"}"#,
        )
        .unwrap();
        assert!(matches!(load_image(&p), Err(VolumeError::Spacing(_))));
        fs::write(
            &p,
            r#"{"dims":[2,2,2],"spacing_mm":[1,1,1],"dtype":"float64","data_file":"b.raw"}"#,
        )
        .unwrap();
        assert!(matches!(load_image(&p), Err(VolumeError::Dtype(_))), "{:?}", load_image(&p));
        assert!(matches!(
            load_volume(&dir.path().join("absent.vol.json")),
            Err(VolumeError::Missing(_))
        ));
    }

    #[test]
    fn mask_container_is_not_a_volume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.vol.json");
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        save_image(&p, &g, DType::Uint8, &[0.0, 1.0]).unwrap();
        assert!(matches!(load_volume(&p), Err(VolumeError::Dtype(_))));
        assert_eq!(load_image(&p).unwrap().values, vec![0.0, 1.0]);
    }

    #[test]
    fn int16_rejects_fractional_values() {
        let err = encode_payload(&[1.0, 2.5], DType::Int16).unwrap_err();
        assert!(matches!(err, VolumeError::Unrepresentable { index: 1, .. }));
    }

    #[test]
    fn packed_round_trip_and_truncation() {
        let g = Grid::new([3, 2, 1], [0.5, 0.5, 2.0]).unwrap();
        let vals = [1.0, -3.0, 7.5, 0.0, 2.25, 9.0];
        let bytes = encode_packed(&g, DType::Float32, &vals).unwrap();
        let img = decode_bytes(&bytes).unwrap();
        assert_eq!(img.grid, g);
        assert_eq!(img.values, vals);
        assert!(matches!(
            decode_bytes(&bytes[..bytes.len() - 3]),
            Err(VolumeError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn nifti_int16_and_float32() {
        let payload: Vec<u8> = (0..8i16).flat_map(|v| (v * 100).to_le_bytes()).collect();
        let bytes = nifti_bytes([2, 2, 2], [0.9, 0.9, 3.0], 4, &payload);
        let img = decode_bytes(&bytes).unwrap();
        assert_eq!(img.dtype, DType::Int16);
        assert_eq!(img.grid.dims, [2, 2, 2]);
        assert!((img.grid.spacing[2] - 3.0).abs() < 1e-12);
        assert_eq!(img.values[7], 700.0);

        let payload: Vec<u8> = [1.5f32, -2.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.nii");
        fs::write(&p, nifti_bytes([2, 1, 1], [1.0; 3], 16, &payload)).unwrap();
        let v = load_volume(&p).unwrap();
        assert_eq!(v.data(), &[1.5, -2.0]);
    }

    #[test]
    fn nifti_rejects_unsupported() {
        let bytes = nifti_bytes([2, 1, 1], [1.0; 3], 64, &[0u8; 16]);
        assert!(matches!(read_nifti(&bytes), Err(VolumeError::Dtype(_))));
        let bytes = nifti_bytes([2, 1, 1], [1.0; 3], 4, &[0u8; 3]);
        assert!(matches!(read_nifti(&bytes), Err(VolumeError::SizeMismatch { .. })));
        let bytes = nifti_bytes([2, 1, 1], [0.0, 1.0, 1.0], 4, &[0u8; 4]);
        assert!(matches!(read_nifti(&bytes), Err(VolumeError::Spacing(_))));
    }
}
