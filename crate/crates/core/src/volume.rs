//! Scalar intensity volumes on an axis-aligned grid.
//!
//! Voxel `(i, j, k)` has its center at world position `(i·sx, j·sy, k·sz)` mm.
//! Intensities are stored x-fastest as `f32`, which holds every `int16` and
//! `float32` input value exactly.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::VolumeError;

/// Continuous position in millimetres.
pub type WorldPoint = Point3<f64>;
pub type Vec3 = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl VoxelCoord {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane axes of a slice orthogonal to `self`, in (u, v) order.
    pub const fn in_plane(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}'")),
        }
    }
}

/// Grid geometry shared by volumes and masks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::Dims(dims));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(VolumeError::Spacing(spacing));
        }
        dims[0]
            .checked_mul(dims[1])
            .and_then(|n| n.checked_mul(dims[2]))
            .ok_or(VolumeError::Dims(dims))?;
        Ok(Self { dims, spacing })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn linear(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coord(&self, linear: usize) -> VoxelCoord {
        let nx = self.dims[0];
        let ny = self.dims[1];
        VoxelCoord::new(linear % nx, (linear / nx) % ny, linear / (nx * ny))
    }

    pub fn contains(&self, c: VoxelCoord) -> bool {
        c.x < self.dims[0] && c.y < self.dims[1] && c.z < self.dims[2]
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn voxel_diagonal(&self) -> f64 {
        self.spacing.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn world(&self, c: VoxelCoord) -> WorldPoint {
        WorldPoint::new(
            c.x as f64 * self.spacing[0],
            c.y as f64 * self.spacing[1],
            c.z as f64 * self.spacing[2],
        )
    }

    /// Continuous index coordinates of a world point.
    pub fn continuous_index(&self, p: &WorldPoint) -> [f64; 3] {
        [
            p.x / self.spacing[0],
            p.y / self.spacing[1],
            p.z / self.spacing[2],
        ]
    }

    /// Voxel whose center is nearest to `p`, or `None` outside the grid.
    pub fn nearest_voxel(&self, p: &WorldPoint) -> Option<VoxelCoord> {
        let ci = self.continuous_index(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = ci[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            out[a] = r as usize;
        }
        Some(VoxelCoord::new(out[0], out[1], out[2]))
    }

    /// World-space extent covered by voxel centers.
    pub fn extent_mm(&self) -> [f64; 3] {
        [
            (self.dims[0] - 1) as f64 * self.spacing[0],
            (self.dims[1] - 1) as f64 * self.spacing[1],
            (self.dims[2] - 1) as f64 * self.spacing[2],
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    grid: Grid,
    data: Vec<f32>,
    range: (f32, f32),
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self, VolumeError> {
        if data.len() != grid.len() {
            return Err(VolumeError::SizeMismatch {
                expected: grid.len(),
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::Header(format!(
                "non-finite intensity at voxel {bad}"
            )));
        }
        let range = data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(Self { grid, data, range })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(VoxelCoord) -> f32) -> Result<Self, VolumeError> {
        let data = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn intensity_range(&self) -> (f32, f32) {
        self.range
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.linear(x, y, z)]
    }

    pub fn at_coord(&self, c: VoxelCoord) -> f32 {
        self.at(c.x, c.y, c.z)
    }

    /// Slice orthogonal to `axis` as `(width, height, pixels)`, row-major with
    /// the in-plane axes from [`Axis::in_plane`]; `None` if `index` is out of bounds.
    pub fn slice(&self, axis: Axis, index: usize) -> Option<(usize, usize, Vec<f32>)> {
        let a = axis.index();
        if index >= self.grid.dims[a] {
            return None;
        }
        let (u, v) = axis.in_plane();
        let (w, h) = (self.grid.dims[u], self.grid.dims[v]);
        let mut c = [0usize; 3];
        c[a] = index;
        let mut out = Vec::with_capacity(w * h);
        for j in 0..h {
            c[v] = j;
            for i in 0..w {
                c[u] = i;
                out.push(self.at(c[0], c[1], c[2]));
            }
        }
        Some((w, h, out))
    }

    /// Trilinear interpolation at a world point.
    ///
    /// Points outside the grid are clamped onto it, so the result is the
    /// boundary value nearest to `p`.
    pub fn sample(&self, p: &WorldPoint) -> f64 {
        let ci = self.grid.continuous_index(p);
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let max = (self.grid.dims[a] - 1) as f64;
            let mut u = if ci[a].is_nan() { 0.0 } else { ci[a].clamp(0.0, max) };
            // Undo the rounding of `index · spacing / spacing` on voxel centers.
            let r = u.round();
            if (u - r).abs() <= 1e-12 * r.max(1.0) {
                u = r;
            }
            let base = u.floor().min((max - 1.0).max(0.0));
            lo[a] = base as usize;
            frac[a] = u - base;
        }
        let [nx, ny, nz] = self.grid.dims;
        let hi = [
            (lo[0] + 1).min(nx - 1),
            (lo[1] + 1).min(ny - 1),
            (lo[2] + 1).min(nz - 1),
        ];
        let v = |x: usize, y: usize, z: usize| self.at(x, y, z) as f64;
        let [fx, fy, fz] = frac;
        let c00 = v(lo[0], lo[1], lo[2]) * (1.0 - fx) + v(hi[0], lo[1], lo[2]) * fx;
        let c10 = v(lo[0], hi[1], lo[2]) * (1.0 - fx) + v(hi[0], hi[1], lo[2]) * fx;
        let c01 = v(lo[0], lo[1], hi[2]) * (1.0 - fx) + v(hi[0], lo[1], hi[2]) * fx;
        let c11 = v(lo[0], hi[1], hi[2]) * (1.0 - fx) + v(hi[0], hi[1], hi[2]) * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        c0 * (1.0 - fz) + c1 * fz
    }
}

/// Free-function form of [`Volume::sample`].
pub fn sample_intensity(v: &Volume, p: &WorldPoint) -> f64 {
    v.sample(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: [usize; 3], s: [f64; 3]) -> Grid {
        Grid::new(n, s).unwrap()
    }

    #[test]
    fn slices_follow_in_plane_axes() {
        let v = Volume::from_fn(grid([2, 3, 4], [1.0; 3]), |c| (100 * c.x + 10 * c.y + c.z) as f32).unwrap();
        let (w, h, px) = v.slice(Axis::Z, 3).unwrap();
        assert_eq!((w, h), (2, 3));
        assert_eq!(px, vec![3.0, 103.0, 13.0, 113.0, 23.0, 123.0]);
        let (w, h, px) = v.slice(Axis::X, 1).unwrap();
        assert_eq!((w, h), (3, 4));
        assert_eq!(&px[..4], &[100.0, 110.0, 120.0, 101.0]);
        assert!(v.slice(Axis::Y, 3).is_none());
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(
            Grid::new([4, 0, 4], [1.0; 3]),
            Err(VolumeError::Dims(_))
        ));
        assert!(matches!(
            Grid::new([4, 4, 4], [1.0, 0.0, 1.0]),
            Err(VolumeError::Spacing(_))
        ));
        assert!(matches!(
            Grid::new([4, 4, 4], [1.0, f64::NAN, 1.0]),
            Err(VolumeError::Spacing(_))
        ));
        let g = grid([2, 2, 2], [1.0; 3]);
        assert!(matches!(
            Volume::new(g, vec![0.0; 7]),
            Err(VolumeError::SizeMismatch { expected: 8, found: 7 })
        ));
    }

    #[test]
    fn range_is_cached() {
        let g = grid([3, 1, 1], [1.0; 3]);
        let v = Volume::new(g, vec![-2.0, 5.0, 1.0]).unwrap();
        assert_eq!(v.intensity_range(), (-2.0, 5.0));
    }

    #[test]
    fn exact_on_voxel_centers() {
        let g = grid([4, 5, 3], [0.7, 1.3, 2.0]);
        let v = Volume::from_fn(g, |c| (c.x * 31 + c.y * 7 + c.z * 101) as f32).unwrap();
        for i in 0..g.len() {
            let c = g.coord(i);
            assert_eq!(v.sample(&g.world(c)), v.at_coord(c) as f64);
        }
    }

    #[test]
    fn midway_is_mean() {
        let g = grid([2, 1, 1], [1.0; 3]);
        let v = Volume::new(g, vec![0.0, 100.0]).unwrap();
        assert_eq!(v.sample(&WorldPoint::new(0.5, 0.0, 0.0)), 50.0);
    }

    #[test]
    fn clamps_outside() {
        let g = grid([2, 2, 2], [1.0; 3]);
        let v = Volume::from_fn(g, |c| (c.x * 10) as f32).unwrap();
        assert_eq!(v.sample(&WorldPoint::new(-5.0, 0.5, 0.5)), 0.0);
        assert_eq!(v.sample(&WorldPoint::new(7.0, 9.0, -3.0)), 10.0);
    }

    #[test]
    fn single_voxel_axis() {
        let g = grid([3, 1, 1], [1.0; 3]);
        let v = Volume::new(g, vec![0.0, 10.0, 20.0]).unwrap();
        assert_eq!(v.sample(&WorldPoint::new(1.5, 0.3, -1.0)), 15.0);
    }

    #[test]
    fn world_index_round_trip() {
        let g = grid([6, 7, 8], [0.5, 1.5, 2.25]);
        for i in 0..g.len() {
            let c = g.coord(i);
            assert_eq!(g.linear(c.x, c.y, c.z), i);
            assert_eq!(g.nearest_voxel(&g.world(c)), Some(c));
        }
        assert_eq!(g.nearest_voxel(&WorldPoint::new(-1.0, 0.0, 0.0)), None);
    }

    proptest! {
        // Integer-coefficient affine fields are stored exactly in f32, so the
        // interpolant must reproduce them to rounding error.
        #[test]
        fn affine_fields_reproduced(
            a in -5i32..5, b in -5i32..5, c in -5i32..5, d in -50i32..50,
            px in 0.0f64..1.0, py in 0.0f64..1.0, pz in 0.0f64..1.0,
        ) {
            let g = grid([9, 8, 7], [0.8, 1.1, 1.7]);
            let vol = Volume::from_fn(g, |v| {
                (a * v.x as i32 + b * v.y as i32 + c * v.z as i32 + d) as f32
            }).unwrap();
            let e = g.extent_mm();
            let p = WorldPoint::new(px * e[0], py * e[1], pz * e[2]);
            let ci = g.continuous_index(&p);
            let expected = a as f64 * ci[0] + b as f64 * ci[1] + c as f64 * ci[2] + d as f64;
            let got = vol.sample(&p);
            let scale = expected.abs().max(1.0);
            prop_assert!((got - expected).abs() / scale < 1e-9, "{got} vs {expected}");
        }

        #[test]
        fn ramp_matches_index(px in 0.0f64..1.0, py in 0.0f64..1.0, pz in 0.0f64..1.0) {
            let g = grid([16, 5, 4], [0.6, 1.0, 2.5]);
            let vol = Volume::from_fn(g, |v| v.x as f32).unwrap();
            let e = g.extent_mm();
            let p = WorldPoint::new(px * e[0], py * e[1], pz * e[2]);
            assert_relative_eq!(vol.sample(&p), p.x / 0.6, epsilon = 1e-9);
        }
    }
}
