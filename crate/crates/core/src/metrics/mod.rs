//! Binary masks, volume measurement and Dice overlap.

mod voxelize;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use voxelize::{voxelize, voxelize_on};

use crate::error::{MetricsError, VolumeError};
use crate::io::{self, DType};
use crate::volume::{Axis, Grid};

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    grid: Grid,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(grid: Grid) -> Self {
        Self {
            bits: vec![false; grid.len()],
            grid,
        }
    }

    /// # Panics
    /// If `bits.len()` differs from the grid size.
    pub fn from_bits(grid: Grid, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), grid.len(), "mask size must match grid");
        Self { grid, bits }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.grid.linear(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.grid.linear(x, y, z);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Slice orthogonal to `axis` as rows of booleans, `(width, height, pixels)`
    /// with the in-plane axes from [`Axis::in_plane`] (u across, v down).
    pub fn slice(&self, axis: Axis, index: usize) -> Option<(usize, usize, Vec<bool>)> {
        let a = axis.index();
        if index >= self.grid.dims[a] {
            return None;
        }
        let (u, v) = axis.in_plane();
        let (w, h) = (self.grid.dims[u], self.grid.dims[v]);
        let mut out = Vec::with_capacity(w * h);
        let mut c = [0usize; 3];
        c[a] = index;
        for j in 0..h {
            c[v] = j;
            for i in 0..w {
                c[u] = i;
                out.push(self.get(c[0], c[1], c[2]));
            }
        }
        Some((w, h, out))
    }

    pub fn save(&self, path: &Path) -> Result<(), VolumeError> {
        let values: Vec<f32> = self.bits.iter().map(|&b| b as u8 as f32).collect();
        io::save_image(path, &self.grid, DType::Uint8, &values)
    }

    pub fn load(path: &Path) -> Result<Self, VolumeError> {
        Self::from_raw(io::load_image(path)?)
    }

    pub fn from_raw(img: io::RawImage) -> Result<Self, VolumeError> {
        if img.dtype != DType::Uint8 {
            return Err(VolumeError::Dtype(format!(
                "masks must be uint8, found {}",
                img.dtype.name()
            )));
        }
        let bits = img
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(VolumeError::Header(format!("mask value {v} at voxel {i} is not 0 or 1"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { grid: img.grid, bits })
    }

    pub fn to_packed(&self) -> Vec<u8> {
        let values: Vec<f32> = self.bits.iter().map(|&b| b as u8 as f32).collect();
        io::encode_packed(&self.grid, DType::Uint8, &values).expect("0/1 fits uint8")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskVolume {
    pub voxel_count: usize,
    pub volume_cm3: f64,
}

/// Voxel count and volume in cm³ (count × voxel size / 1000).
pub fn mask_volume(mask: &BinaryMask) -> MaskVolume {
    let voxel_count = mask.count();
    MaskVolume {
        voxel_count,
        volume_cm3: volume_cm3(voxel_count, mask.grid.voxel_volume_mm3()),
    }
}

pub fn volume_cm3(voxel_count: usize, voxel_volume_mm3: f64) -> f64 {
    voxel_count as f64 * voxel_volume_mm3 / 1000.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dice {
    pub percent: f64,
    /// Both masks were empty; `percent` is 100 by convention.
    pub both_empty: bool,
}

/// Dice overlap `100·2|A∩R| / (|A|+|R|)` with the empty/empty convention.
pub fn dice(a: &BinaryMask, r: &BinaryMask) -> Result<Dice, MetricsError> {
    if a.grid != r.grid {
        return Err(MetricsError::GridMismatch(a.grid, r.grid));
    }
    let (mut na, mut nr, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&r.bits) {
        na += x as usize;
        nr += y as usize;
        both += (x && y) as usize;
    }
    Ok(if na + nr == 0 {
        Dice {
            percent: 100.0,
            both_empty: true,
        }
    } else {
        Dice {
            percent: 100.0 * 2.0 * both as f64 / (na + nr) as f64,
            both_empty: false,
        }
    })
}

/// Dice overlap in percent.
pub fn dsc(a: &BinaryMask, r: &BinaryMask) -> Result<f64, MetricsError> {
    dice(a, r).map(|d| d.percent)
}
