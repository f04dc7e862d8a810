//! Seeded synthetic case suites with analytic references.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use super::{write_json, CaseManifest, CaseSpec};
use crate::balloon::OutlineInit;
use crate::error::HarnessError;
use crate::io::{save_volume, DType};
use crate::phantom::{make_phantom, PhantomShape, PhantomSpec};
use crate::volume::{Axis, Vec3};

/// Documented sampling ranges of [`generate_phantom_suite`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteRanges {
    /// Nominal radius, log-uniform and stratified over the cases.
    pub radius_mm: (f64, f64),
    /// Per-axis factor applied to the nominal radius for ellipsoids.
    pub ellipsoid_axis_factor: (f64, f64),
    /// Noise standard deviation as a fraction of rim contrast.
    pub noise_fraction: (f64, f64),
    /// Fraction of cases with an incomplete rim.
    pub gap_fraction: f64,
    pub gap_solid_angle_sr: (f64, f64),
    pub spacing_mm: f64,
    /// Background margin around the phantom's bounding box.
    pub margin_mm: f64,
    pub outline_points: usize,
}

pub const SUITE_RANGES: SuiteRanges = SuiteRanges {
    radius_mm: (6.0, 26.0),
    ellipsoid_axis_factor: (0.8, 1.2),
    noise_fraction: (0.0, 0.10),
    gap_fraction: 1.0 / 3.0,
    gap_solid_angle_sr: (0.25, 1.0),
    spacing_mm: 1.0,
    margin_mm: 8.0,
    outline_points: 48,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Shuffled `0..n`, so stratum `k` of a per-case quantity lands on a random case.
fn strata(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).collect();
    s.shuffle(rng);
    s
}

/// Writes `n` phantoms with references, equatorial outlines and center seeds
/// into `out_dir`, plus `manifest.json`, and returns the manifest.
pub fn generate_phantom_suite(seed: u64, n: usize, out_dir: &Path) -> Result<CaseManifest, HarnessError> {
    if n == 0 {
        return Err(HarnessError::Manifest("suite size must be at least 1".into()));
    }
    let r = SUITE_RANGES;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius_stratum = strata(n, &mut rng);
    let shape_stratum = strata(n, &mut rng);
    let gap_stratum = strata(n, &mut rng);
    let gaps = (n as f64 * r.gap_fraction).round() as usize;
    let width = n.to_string().len().max(2);

    let mut cases = Vec::with_capacity(n);
    for i in 0..n {
        let u = (radius_stratum[i] as f64 + rng.random::<f64>()) / n as f64;
        let radius = r.radius_mm.0 * (r.radius_mm.1 / r.radius_mm.0).powf(u);
        let shape = [PhantomShape::Sphere, PhantomShape::Ellipsoid, PhantomShape::Lobulated][shape_stratum[i] % 3];
        let radii = match shape {
            PhantomShape::Ellipsoid => {
                std::array::from_fn(|_| radius * rng.random_range(r.ellipsoid_axis_factor.0..=r.ellipsoid_axis_factor.1))
            }
            _ => [radius; 3],
        };
        let noise = rng.random_range(r.noise_fraction.0..=r.noise_fraction.1);
        let gap_angle = rng.random_range(r.gap_solid_angle_sr.0..=r.gap_solid_angle_sr.1);
        let gap_dir: [f64; 3] = UnitSphere.sample(&mut rng);
        let noise_seed = rng.random::<u64>();

        let mut spec = PhantomSpec::sphere([0.0; 3], radius);
        spec.shape = shape;
        spec.radii = radii;
        spec.noise_sigma = noise * spec.rim_contrast();
        spec.noise_seed = noise_seed;
        if gap_stratum[i] < gaps {
            spec.rim_gap_solid_angle = gap_angle;
            spec.rim_gap_direction = gap_dir;
        }
        let h = r.spacing_mm;
        let half = spec.half_extent();
        let dims: [usize; 3] = std::array::from_fn(|a| (2.0 * (half[a] + r.margin_mm) / h).ceil() as usize + 1);
        // Center on a voxel so the outline and seed lie on a slice.
        spec.center = std::array::from_fn(|a| ((dims[a] - 1) / 2) as f64 * h);

        let id = format!("phantom_{:0width$}", i + 1);
        let (volume, mask) = make_phantom(&spec, dims, [h; 3])?;
        save_volume(&out_dir.join(format!("{id}.vol.json")), &volume, DType::Float32)?;
        mask.save(&out_dir.join(format!("{id}_ref.vol.json")))?;

        let zi = (dims[2] - 1) / 2;
        let polygon_mm = (0..r.outline_points)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / r.outline_points as f64;
                let d = Vec3::new(t.cos(), t.sin(), 0.0);
                let rr = spec.outer_radius(&d);
                [spec.center[0] + rr * d.x, spec.center[1] + rr * d.y]
            })
            .collect();
        let outline = OutlineInit {
            axis: Axis::Z,
            index: zi,
            polygon_mm,
        };
        write_json(&out_dir.join(format!("{id}_outline.json")), &outline)?;

        cases.push(CaseSpec {
            id: id.clone(),
            volume_path: format!("{id}.vol.json").into(),
            reference_mask_path: Some(format!("{id}_ref.vol.json").into()),
            outline_path: Some(format!("{id}_outline.json").into()),
            seed: Some(spec.center),
            methods: None,
            params: Default::default(),
            phantom: Some(spec),
        });
    }
    let manifest = CaseManifest { cases };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
