//! Scan-line parity voxelization of closed triangle meshes.
//!
//! Each voxel center `q` is classified by counting surface crossings of the
//! ray `q + t·x̂, t > 0`. Degenerate hits (ray through an edge, a vertex, or
//! a crossing exactly at `q`) are resolved by treating `q` as displaced by
//! `(+ε, +ε², +ε³)` for infinitesimal `ε`. Edge tests are evaluated with the
//! edge's endpoints in canonical (lower index first) order so the two faces
//! sharing an edge always agree, which keeps parity consistent on watertight
//! input.

use crate::error::MetricsError;
use crate::mesh::TriangleMesh;
use crate::metrics::BinaryMask;
use crate::volume::{Grid, WorldPoint};

/// Signed area term of `q` against the edge `u → v` in the (y, z) plane.
#[inline]
fn edge_fn(u: &WorldPoint, v: &WorldPoint, qy: f64, qz: f64) -> f64 {
    (v.y - u.y) * (qz - u.z) - (v.z - u.z) * (qy - u.y)
}

/// Sign of the perturbed edge function for edge `(i, j)` (any order).
fn edge_sign(verts: &[WorldPoint], i: usize, j: usize, qy: f64, qz: f64) -> (i8, f64) {
    let (lo, hi, flip) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let (u, v) = (&verts[lo], &verts[hi]);
    let e = edge_fn(u, v, qy, qz);
    let s = if e != 0.0 {
        e.signum()
    } else {
        // d/dqy and d/dqz of the edge function: the y-perturbation dominates.
        let dy = -(v.z - u.z);
        let dz = v.y - u.y;
        if dy != 0.0 {
            dy.signum()
        } else {
            dz.signum()
        }
    };
    ((s * flip) as i8, e * flip)
}

/// Voxelizes `mesh` onto the grid `dims` × `spacing` (voxel centers at
/// `index · spacing`).
pub fn voxelize(mesh: &TriangleMesh, dims: [usize; 3], spacing: [f64; 3]) -> Result<BinaryMask, MetricsError> {
    let grid = Grid::new(dims, spacing).map_err(|e| {
        MetricsError::Mesh(crate::error::MeshError::Parse(e.to_string()))
    })?;
    voxelize_on(mesh, &grid)
}

pub fn voxelize_on(mesh: &TriangleMesh, grid: &Grid) -> Result<BinaryMask, MetricsError> {
    mesh.validate_topology()?;
    let [nx, ny, nz] = grid.dims;
    let [sx, sy, sz] = grid.spacing;
    let verts = &mesh.vertices;
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); ny * nz];

    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| verts[i]);
        let ymin = a.y.min(b.y).min(c.y);
        let ymax = a.y.max(b.y).max(c.y);
        let zmin = a.z.min(b.z).min(c.z);
        let zmax = a.z.max(b.z).max(c.z);
        // Projected area; zero-area projections are parallel to the ray.
        let area = (b.y - a.y) * (c.z - a.z) - (b.z - a.z) * (c.y - a.y);
        if area == 0.0 {
            continue;
        }
        let j0 = (ymin / sy).ceil().max(0.0);
        let j1 = (ymax / sy).floor().min((ny - 1) as f64);
        let k0 = (zmin / sz).ceil().max(0.0);
        let k1 = (zmax / sz).floor().min((nz - 1) as f64);
        if j0 > j1 || k0 > k1 {
            continue;
        }
        for k in k0 as usize..=k1 as usize {
            let qz = k as f64 * sz;
            for j in j0 as usize..=j1 as usize {
                let qy = j as f64 * sy;
                let (s0, w_c) = edge_sign(verts, f[0], f[1], qy, qz);
                let (s1, w_a) = edge_sign(verts, f[1], f[2], qy, qz);
                let (s2, w_b) = edge_sign(verts, f[2], f[0], qy, qz);
                if s0 != s1 || s1 != s2 {
                    continue;
                }
                let sum = w_a + w_b + w_c;
                let x = if sum != 0.0 {
                    (w_a * a.x + w_b * b.x + w_c * c.x) / sum
                } else {
                    (a.x + b.x + c.x) / 3.0
                };
                rows[j + ny * k].push(x);
            }
        }
    }

    let mut bits = vec![false; grid.len()];
    for (r, xs) in rows.iter_mut().enumerate() {
        if xs.is_empty() {
            continue;
        }
        xs.sort_unstable_by(f64::total_cmp);
        let (j, k) = (r % ny, r / ny);
        let base = nx * (j + ny * k);
        // Crossings strictly ahead of the (perturbed) center are counted.
        let mut ahead_start = 0usize;
        for i in 0..nx {
            let qx = i as f64 * sx;
            while ahead_start < xs.len() && xs[ahead_start] <= qx {
                ahead_start += 1;
            }
            if (xs.len() - ahead_start) % 2 == 1 {
                bits[base + i] = true;
            }
        }
    }
    Ok(BinaryMask::from_bits(*grid, bits))
}
