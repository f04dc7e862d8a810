//! Closed triangulated surfaces and the per-vertex geometry used by the
//! inflation step.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use crate::error::MeshError;
use crate::volume::{Vec3, WorldPoint};

/// Splits allowed in one `split_long_edges` call before it gives up.
pub const DEFAULT_SPLIT_BUDGET: usize = 200_000;

/// Deepest icosphere subdivision offered (163 842 vertices).
pub const MAX_ICOSPHERE_LEVEL: u32 = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<WorldPoint>,
    /// Counter-clockwise seen from outside.
    pub faces: Vec<[usize; 3]>,
    /// Seeding center used for center-vertex vectors.
    pub center: WorldPoint,
}

/// Vertex count of an icosphere at subdivision `level`.
pub const fn icosphere_vertex_count(level: u32) -> usize {
    10 * 4usize.pow(level) + 2
}

/// Subdivision level whose vertex count is closest to `target` (ties go to
/// the coarser level).
pub fn icosphere_level_for(target: usize) -> u32 {
    (0..=MAX_ICOSPHERE_LEVEL)
        .min_by_key(|&l| icosphere_vertex_count(l).abs_diff(target))
        .unwrap_or(0)
}

pub fn make_icosphere(target_vertex_count: usize, center: WorldPoint, radius: f64) -> Result<TriangleMesh, MeshError> {
    if target_vertex_count < 12 {
        return Err(MeshError::TargetCount(target_vertex_count));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(MeshError::Radius(radius));
    }
    let (dirs, faces) = unit_icosphere(icosphere_level_for(target_vertex_count));
    let vertices = dirs.iter().map(|d| center + d * radius).collect();
    Ok(TriangleMesh {
        vertices,
        faces,
        center,
    })
}

/// Unit-sphere icosphere directions and faces at `level`.
pub fn unit_icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::from(*p).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level.min(MAX_ICOSPHERE_LEVEL) {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

impl TriangleMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Unique undirected edges `(lo, hi)` in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::with_capacity(self.faces.len() * 3 / 2);
        let mut out = Vec::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Checks index range, non-degeneracy and that every edge is shared by
    /// exactly two oppositely oriented faces.
    pub fn validate(&self) -> Result<(), MeshError> {
        self.validate_topology()?;
        let scale = self.bounding_radius().max(1e-300);
        for (fi, f) in self.faces.iter().enumerate() {
            if self.face_cross(f).norm() <= 1e-14 * scale * scale {
                return Err(MeshError::DegenerateFace(fi));
            }
        }
        Ok(())
    }

    /// Closed-manifold check without the geometric degeneracy test.
    pub fn validate_topology(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.faces.len() * 3);
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i >= n {
                    return Err(MeshError::IndexOutOfRange { face: fi, index: i });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace(fi));
            }
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                if directed.insert(e, fi).is_some() {
                    return Err(MeshError::NonManifold(e.0.min(e.1), e.0.max(e.1)));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(MeshError::NonManifold(a.min(b), a.max(b)));
            }
        }
        Ok(())
    }

    fn bounding_radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - self.center).norm())
            .fold(0.0, f64::max)
    }

    fn face_cross(&self, f: &[usize; 3]) -> Vec3 {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a))
    }

    /// Enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        let o = self.center;
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i] - o);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Sorted, de-duplicated one-ring neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut rings = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                rings[a].push(b);
                rings[b].push(a);
            }
        }
        for r in &mut rings {
            r.sort_unstable();
            r.dedup();
        }
        rings
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges()
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .collect()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edge_lengths().into_iter().fold(0.0, f64::max)
    }

    pub fn mean_edge_length(&self) -> f64 {
        let l = self.edge_lengths();
        l.iter().sum::<f64>() / l.len().max(1) as f64
    }

    pub fn to_off(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "OFF\n{} {} 0", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
        }
        s
    }

    /// Parses an OFF file of triangles. The center is set to the vertex mean.
    pub fn from_off(text: &str) -> Result<Self, MeshError> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let perr = |m: &str| MeshError::Parse(m.to_owned());
        if tokens.next() != Some("OFF") {
            return Err(perr("missing OFF magic"));
        }
        let mut num = |what: &str| -> Result<f64, MeshError> {
            tokens
                .next()
                .ok_or_else(|| perr(&format!("unexpected end reading {what}")))?
                .parse::<f64>()
                .map_err(|e| perr(&format!("{what}: {e}")))
        };
        let nv = num("vertex count")? as usize;
        let nf = num("face count")? as usize;
        let _ = num("edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push(WorldPoint::new(num("x")?, num("y")?, num("z")?));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            if num("face arity")? as usize != 3 {
                return Err(perr("only triangular faces are supported"));
            }
            faces.push([num("i")? as usize, num("j")? as usize, num("k")? as usize]);
        }
        let center = if vertices.is_empty() {
            WorldPoint::origin()
        } else {
            let sum = vertices.iter().fold(Vec3::zeros(), |acc, v| acc + v.coords);
            WorldPoint::from(sum / vertices.len() as f64)
        };
        Ok(Self {
            vertices,
            faces,
            center,
        })
    }

    pub fn to_stl_ascii(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "solid {name}");
        for f in &self.faces {
            let n = self.face_cross(f);
            let n = if n.norm() > 0.0 { n.normalize() } else { n };
            let _ = writeln!(s, "  facet normal {:e} {:e} {:e}", n.x, n.y, n.z);
            let _ = writeln!(s, "    outer loop");
            for &i in f {
                let v = self.vertices[i];
                let _ = writeln!(s, "      vertex {:e} {:e} {:e}", v.x, v.y, v.z);
            }
            let _ = writeln!(s, "    endloop\n  endfacet");
        }
        let _ = writeln!(s, "endsolid {name}");
        s
    }
}

#[derive(PartialEq)]
struct LongEdge {
    len: f64,
    a: usize,
    b: usize,
}

impl Eq for LongEdge {}

impl Ord for LongEdge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .total_cmp(&other.len)
            .then_with(|| other.a.cmp(&self.a))
            .then_with(|| other.b.cmp(&self.b))
    }
}

impl PartialOrd for LongEdge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn split_long_edges(mesh: &TriangleMesh, max_edge_mm: f64) -> Result<TriangleMesh, MeshError> {
    split_long_edges_with_budget(mesh, max_edge_mm, DEFAULT_SPLIT_BUDGET)
}

/// Bisects edges longer than `max_edge_mm`, longest first, until none remain.
///
/// Each split inserts the edge midpoint and replaces both adjacent faces by
/// two faces each. Orientation and manifoldness are preserved.
pub fn split_long_edges_with_budget(
    mesh: &TriangleMesh,
    max_edge_mm: f64,
    budget: usize,
) -> Result<TriangleMesh, MeshError> {
    if !(max_edge_mm > 0.0) {
        return Err(MeshError::MaxEdge(max_edge_mm));
    }
    let mut m = mesh.clone();
    let len = |m: &TriangleMesh, a: usize, b: usize| (m.vertices[a] - m.vertices[b]).norm();

    let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(m.faces.len() * 3);
    for (fi, f) in m.faces.iter().enumerate() {
        for k in 0..3 {
            owner.insert((f[k], f[(k + 1) % 3]), fi);
        }
    }
    let mut heap = BinaryHeap::new();
    for (a, b) in m.edges() {
        let l = len(&m, a, b);
        if l > max_edge_mm {
            heap.push(LongEdge { len: l, a, b });
        }
    }

    let mut splits = 0usize;
    while let Some(LongEdge { a, b, .. }) = heap.pop() {
        let (Some(&f1), Some(&f2)) = (owner.get(&(a, b)), owner.get(&(b, a))) else {
            // Already split via another path.
            continue;
        };
        if splits == budget {
            return Err(MeshError::SplitBudget(budget));
        }
        splits += 1;
        let c = third(&m.faces[f1], a, b);
        let d = third(&m.faces[f2], b, a);
        let mid = m.vertices.len();
        m.vertices.push(WorldPoint::from((m.vertices[a].coords + m.vertices[b].coords) * 0.5));

        let f3 = m.faces.len();
        let f4 = f3 + 1;
        m.faces[f1] = [a, mid, c];
        m.faces.push([mid, b, c]);
        m.faces[f2] = [b, mid, d];
        m.faces.push([mid, a, d]);

        owner.remove(&(a, b));
        owner.remove(&(b, a));
        owner.insert((a, mid), f1);
        owner.insert((mid, c), f1);
        owner.insert((mid, b), f3);
        owner.insert((b, c), f3);
        owner.insert((c, mid), f3);
        owner.insert((b, mid), f2);
        owner.insert((mid, d), f2);
        owner.insert((mid, a), f4);
        owner.insert((a, d), f4);
        owner.insert((d, mid), f4);

        for (p, q) in [(a, mid), (mid, b), (c, mid), (d, mid)] {
            let l = len(&m, p, q);
            if l > max_edge_mm {
                heap.push(LongEdge {
                    len: l,
                    a: p.min(q),
                    b: p.max(q),
                });
            }
        }
    }
    Ok(m)
}

/// Vertex of `f` opposite to the directed edge `a → b`.
fn third(f: &[usize; 3], a: usize, b: usize) -> usize {
    for k in 0..3 {
        if f[k] == a && f[(k + 1) % 3] == b {
            return f[(k + 2) % 3];
        }
    }
    unreachable!("face {f:?} does not contain directed edge {a}->{b}")
}

/// Angle-weighted vertex normals.
pub fn vertex_normals(mesh: &TriangleMesh) -> Result<Vec<Vec3>, MeshError> {
    let mut acc = vec![Vec3::zeros(); mesh.vertices.len()];
    let mut touched = vec![false; mesh.vertices.len()];
    for f in &mesh.faces {
        let n = mesh.face_cross(f);
        let norm = n.norm();
        if norm == 0.0 {
            continue;
        }
        let n = n / norm;
        for k in 0..3 {
            let v = mesh.vertices[f[k]];
            let e1 = mesh.vertices[f[(k + 1) % 3]] - v;
            let e2 = mesh.vertices[f[(k + 2) % 3]] - v;
            let angle = e1.angle(&e2);
            acc[f[k]] += n * angle;
            touched[f[k]] = true;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, n)| {
            let norm = n.norm();
            if !touched[i] || norm == 0.0 {
                Err(MeshError::IsolatedVertex(i))
            } else {
                Ok(n / norm)
            }
        })
        .collect()
}

/// Uniform umbrella Laplacian: one-ring mean minus the vertex.
pub fn umbrella_laplacian(mesh: &TriangleMesh, rings: &[Vec<usize>]) -> Vec<Vec3> {
    mesh.vertices
        .iter()
        .zip(rings)
        .map(|(v, ring)| {
            if ring.is_empty() {
                return Vec3::zeros();
            }
            let sum = ring.iter().fold(Vec3::zeros(), |acc, &j| acc + mesh.vertices[j].coords);
            sum / ring.len() as f64 - v.coords
        })
        .collect()
}

/// Protrusion-sensitive mean-curvature estimate per vertex, in 1/mm.
///
/// `κ = max(0, −2·L(v)·n / mean_j |v_j − v|²)`, with `L` the umbrella
/// Laplacian. For vertices on a sphere of radius `R` with radial normals this
/// is exactly `1/R` whatever the valence; outward bumps score high and flat
/// or dented regions score zero.
pub fn estimate_curvature(mesh: &TriangleMesh, normals: &[Vec3]) -> Vec<f64> {
    let rings = mesh.neighbors();
    let lap = umbrella_laplacian(mesh, &rings);
    rings
        .iter()
        .enumerate()
        .map(|(i, ring)| {
            if ring.is_empty() {
                return 0.0;
            }
            let mean_sq = ring
                .iter()
                .map(|&j| (mesh.vertices[j] - mesh.vertices[i]).norm_squared())
                .sum::<f64>()
                / ring.len() as f64;
            if mean_sq == 0.0 {
                return 0.0;
            }
            (-2.0 * lap[i].dot(&normals[i]) / mean_sq).max(0.0)
        })
        .collect()
}

/// `iterations` Jacobi passes of `v ← v + λ·L(v)`; faces untouched.
pub fn laplacian_smooth(mesh: &TriangleMesh, lambda: f64, iterations: usize) -> TriangleMesh {
    let mut m = mesh.clone();
    if iterations == 0 || lambda == 0.0 {
        return m;
    }
    let rings = m.neighbors();
    for _ in 0..iterations {
        let lap = umbrella_laplacian(&m, &rings);
        for (v, l) in m.vertices.iter_mut().zip(&lap) {
            *v += l * lambda;
        }
    }
    m
}

/// Angle between each vertex normal and its center-vertex vector.
pub fn center_angles(mesh: &TriangleMesh, normals: &[Vec3]) -> Result<Vec<f64>, MeshError> {
    mesh.vertices
        .iter()
        .zip(normals)
        .enumerate()
        .map(|(i, (v, n))| {
            let d = v - mesh.center;
            let len = d.norm();
            if len == 0.0 {
                return Err(MeshError::VertexAtCenter(i));
            }
            Ok(n.dot(&(d / len)).clamp(-1.0, 1.0).acos())
        })
        .collect()
}
