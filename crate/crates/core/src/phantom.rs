//! Synthetic contrast-enhanced lesion phantoms with analytic ground truth.
//!
//! A phantom is a star-shaped body around `center` whose outer surface is
//! `r = R(d)` along each unit direction `d`. Voxels with `R − rim ≤ r ≤ R`
//! form the bright rim, those below it the core. The ground-truth mask is
//! everything with `r ≤ R`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::PhantomError;
use crate::metrics::BinaryMask;
use crate::volume::{Grid, Vec3, Volume, WorldPoint};

/// Relative radial amplitude of the lobulated shape.
pub const LOBE_AMPLITUDE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomShape {
    Sphere,
    Ellipsoid,
    Lobulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub shape: PhantomShape,
    pub center: [f64; 3],
    /// Semi-axes for ellipsoids; spheres and lobulated shapes use `radii[0]`.
    pub radii: [f64; 3],
    pub rim_intensity: f32,
    pub core_intensity: f32,
    pub background_intensity: f32,
    pub rim_thickness: f64,
    /// Solid angle (sr) of the cone around `rim_gap_direction` in which the
    /// rim is replaced by core intensity. Zero means a complete rim.
    #[serde(default)]
    pub rim_gap_solid_angle: f64,
    #[serde(default = "default_gap_direction")]
    pub rim_gap_direction: [f64; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

fn default_gap_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

/// Intensity class of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tissue {
    Core,
    Rim,
    Background,
}

impl PhantomSpec {
    /// Sphere of radius `radius` with the default contrast layout used by the
    /// tests and the phantom suite: background 50, core 80, rim 200.
    pub fn sphere(center: [f64; 3], radius: f64) -> Self {
        Self {
            shape: PhantomShape::Sphere,
            center,
            radii: [radius; 3],
            rim_intensity: 200.0,
            core_intensity: 80.0,
            background_intensity: 50.0,
            rim_thickness: 2.0,
            rim_gap_solid_angle: 0.0,
            rim_gap_direction: default_gap_direction(),
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }

    pub fn center_point(&self) -> WorldPoint {
        WorldPoint::from(self.center)
    }

    /// Rim contrast against the background; noise levels are quoted relative to it.
    pub fn rim_contrast(&self) -> f64 {
        (self.rim_intensity - self.background_intensity) as f64
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::Spec(m));
        if !(self.rim_intensity > self.core_intensity && self.core_intensity > self.background_intensity) {
            return bad("intensities must satisfy rim > core > background".into());
        }
        if !(self.rim_thickness > 0.0) {
            return bad("rim_thickness must be positive".into());
        }
        let min_r = self.min_outer_radius();
        if !(min_r > self.rim_thickness) {
            return bad(format!(
                "smallest outer radius {min_r:.3} mm must exceed rim_thickness {:.3} mm",
                self.rim_thickness
            ));
        }
        if !(0.0..4.0 * std::f64::consts::PI).contains(&self.rim_gap_solid_angle) {
            return bad("rim_gap_solid_angle must lie in [0, 4π)".into());
        }
        if self.rim_gap_solid_angle > 0.0 && Vec3::from(self.rim_gap_direction).norm() == 0.0 {
            return bad("rim_gap_direction must be non-zero".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative".into());
        }
        Ok(())
    }

    fn min_outer_radius(&self) -> f64 {
        match self.shape {
            PhantomShape::Sphere => self.radii[0],
            PhantomShape::Ellipsoid => self.radii.iter().copied().fold(f64::INFINITY, f64::min),
            PhantomShape::Lobulated => self.radii[0] * (1.0 - LOBE_AMPLITUDE),
        }
    }

    /// Half-extent of the phantom along each axis.
    pub fn half_extent(&self) -> [f64; 3] {
        match self.shape {
            PhantomShape::Sphere => [self.radii[0]; 3],
            PhantomShape::Ellipsoid => self.radii,
            PhantomShape::Lobulated => [self.radii[0] * (1.0 + LOBE_AMPLITUDE); 3],
        }
    }

    /// Outer surface radius along unit direction `d`.
    pub fn outer_radius(&self, d: &Vec3) -> f64 {
        match self.shape {
            PhantomShape::Sphere => self.radii[0],
            PhantomShape::Ellipsoid => {
                let q: f64 = (0..3).map(|a| (d[a] / self.radii[a]).powi(2)).sum();
                1.0 / q.sqrt()
            }
            PhantomShape::Lobulated => {
                // Im((x + iy)^3): a smooth three-lobed harmonic bounded by 1.
                let lobe = 3.0 * d.x * d.x * d.y - d.y.powi(3);
                self.radii[0] * (1.0 + LOBE_AMPLITUDE * lobe)
            }
        }
    }

    /// Cosine of the half-angle of the rim-gap cone.
    pub fn gap_cos_half_angle(&self) -> f64 {
        1.0 - self.rim_gap_solid_angle / (2.0 * std::f64::consts::PI)
    }

    pub fn in_gap_cone(&self, d: &Vec3) -> bool {
        if self.rim_gap_solid_angle <= 0.0 {
            return false;
        }
        let g = Vec3::from(self.rim_gap_direction).normalize();
        d.dot(&g) >= self.gap_cos_half_angle()
    }

    /// Whether `p` lies within the ground-truth lesion (core plus rim).
    pub fn contains(&self, p: &WorldPoint) -> bool {
        let rel = p - self.center_point();
        let r = rel.norm();
        r == 0.0 || r <= self.outer_radius(&(rel / r))
    }

    /// Noise-free tissue class at `p`, after applying the rim gap.
    pub fn tissue(&self, p: &WorldPoint) -> Tissue {
        let rel = p - self.center_point();
        let r = rel.norm();
        if r == 0.0 {
            return Tissue::Core;
        }
        let d = rel / r;
        let outer = self.outer_radius(&d);
        if r > outer {
            Tissue::Background
        } else if r >= outer - self.rim_thickness && !self.in_gap_cone(&d) {
            Tissue::Rim
        } else {
            Tissue::Core
        }
    }

    /// Analytic volume of the ground-truth region in mm³, by radial quadrature.
    pub fn analytic_volume_mm3(&self) -> f64 {
        match self.shape {
            PhantomShape::Sphere => 4.0 / 3.0 * std::f64::consts::PI * self.radii[0].powi(3),
            PhantomShape::Ellipsoid => {
                4.0 / 3.0 * std::f64::consts::PI * self.radii[0] * self.radii[1] * self.radii[2]
            }
            PhantomShape::Lobulated => {
                // V = ∫ R(d)^3 / 3 dΩ, midpoint rule in (cos θ, φ).
                let n = 400;
                let mut acc = 0.0;
                for i in 0..n {
                    let ct = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                    let st = (1.0 - ct * ct).sqrt();
                    for j in 0..n {
                        let phi = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64;
                        let d = Vec3::new(st * phi.cos(), st * phi.sin(), ct);
                        acc += self.outer_radius(&d).powi(3) / 3.0;
                    }
                }
                acc * (2.0 / n as f64) * (2.0 * std::f64::consts::PI / n as f64)
            }
        }
    }
}

/// Renders the phantom onto a grid and returns it with its ground-truth mask.
pub fn make_phantom(
    spec: &PhantomSpec,
    dims: [usize; 3],
    spacing: [f64; 3],
) -> Result<(Volume, BinaryMask), PhantomError> {
    spec.validate()?;
    let grid = Grid::new(dims, spacing)?;
    let half = spec.half_extent();
    for a in 0..3 {
        let margin = 2.0 * spacing[a];
        let hi = (dims[a] - 1) as f64 * spacing[a] - margin;
        let lo_needed = spec.center[a] - half[a];
        let hi_needed = spec.center[a] + half[a];
        if lo_needed < margin {
            return Err(PhantomError::OutOfBounds {
                axis: a,
                needed_mm: lo_needed,
                limit_mm: margin,
            });
        }
        if hi_needed > hi {
            return Err(PhantomError::OutOfBounds {
                axis: a,
                needed_mm: hi_needed,
                limit_mm: hi,
            });
        }
    }

    let mut data = Vec::with_capacity(grid.len());
    let mut bits = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = grid.world(grid.coord(i));
        let value = match spec.tissue(&p) {
            Tissue::Core => spec.core_intensity,
            Tissue::Rim => spec.rim_intensity,
            Tissue::Background => spec.background_intensity,
        };
        data.push(value);
        bits.push(spec.contains(&p));
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| PhantomError::Spec(e.to_string()))?;
        for v in &mut data {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    let volume = Volume::new(grid, data)?;
    let mask = BinaryMask::from_bits(grid, bits);
    Ok((volume, mask))
}
