//! Raw volume files with JSON sidecars.
//!
//! `<name>.vol` holds little-endian `f32` samples in x-fastest order and
//! `<name>.msk` holds one byte (0 or 1) per voxel. Each payload has a sidecar
//! `<payload path>.json`:
//!
//! ```json
//! {"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"dtype":"f32"}
//! ```
//!
//! Distance maps and guidance volumes add optional fields (`kind`, `sigma`,
//! `theta_percent`, `per_click_sigmas`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask, Spacing, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_click_sigmas: Option<Vec<u32>>,
}

impl Sidecar {
    pub fn new(dims: Dims, spacing: Spacing, dtype: Dtype) -> Self {
        Self {
            dims: dims.as_array(),
            spacing: spacing.0,
            dtype,
            kind: None,
            sigma: None,
            theta_percent: None,
            per_click_sigmas: None,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn sidecar_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Sidecar {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let sc_path = sidecar_path(path);
    let text = fs::read_to_string(&sc_path).map_err(io_err(&sc_path))?;
    serde_json::from_str(&text).map_err(|e| sidecar_err(&sc_path, e.to_string()))
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    let sc_path = sidecar_path(path);
    let text = serde_json::to_string(sidecar).expect("sidecar serializes");
    fs::write(&sc_path, text).map_err(io_err(&sc_path))
}

fn checked_header(path: &Path, dtype: Dtype) -> Result<(Sidecar, Dims, Spacing)> {
    let sc = read_sidecar(path)?;
    if sc.dtype != dtype {
        return Err(sidecar_err(
            &sidecar_path(path),
            format!("expected dtype {dtype:?}, found {:?}", sc.dtype),
        ));
    }
    let [nx, ny, nz] = sc.dims;
    let dims = Dims::new(nx, ny, nz).map_err(|e| sidecar_err(&sidecar_path(path), e.to_string()))?;
    let spacing = Spacing(sc.spacing);
    spacing
        .validate()
        .map_err(|e| sidecar_err(&sidecar_path(path), e.to_string()))?;
    Ok((sc, dims, spacing))
}

pub fn save_volume(volume: &Volume, path: &Path) -> Result<()> {
    save_volume_with(volume, path, Sidecar::new(volume.dims(), volume.spacing(), Dtype::F32))
}

/// Writes the payload plus a caller-provided sidecar. `dims`, `spacing` and
/// `dtype` are overwritten from the volume.
pub fn save_volume_with(volume: &Volume, path: &Path, mut sidecar: Sidecar) -> Result<()> {
    sidecar.dims = volume.dims().as_array();
    sidecar.spacing = volume.spacing().0;
    sidecar.dtype = Dtype::F32;
    let mut bytes = Vec::with_capacity(volume.data().len() * 4);
    for v in volume.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))?;
    write_sidecar(path, &sidecar)
}

pub fn load_volume(path: &Path) -> Result<Volume> {
    load_volume_with_sidecar(path).map(|(v, _)| v)
}

pub fn load_volume_with_sidecar(path: &Path) -> Result<(Volume, Sidecar)> {
    let (sc, dims, spacing) = checked_header(path, Dtype::F32)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != dims.len() * 4 {
        return Err(Error::LengthMismatch {
            dims,
            expected: dims.len(),
            actual: bytes.len() / 4,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((Volume::new(dims, spacing, data)?, sc))
}

pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    fs::write(path, mask.data()).map_err(io_err(path))?;
    write_sidecar(path, &Sidecar::new(mask.dims(), mask.spacing(), Dtype::U8))
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let (_, dims, spacing) = checked_header(path, Dtype::U8)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != dims.len() {
        return Err(Error::LengthMismatch {
            dims,
            expected: dims.len(),
            actual: bytes.len(),
        });
    }
    Mask::with_spacing(dims, spacing, bytes)
}
