//! Ray-graph segmentation by minimum s-t cut.
//!
//! Rays leave the seed through the vertices of a sphere polyhedron and are
//! sampled into `K` nodes each. Choosing a boundary index `b[r]` per ray
//! costs `c[r][b[r]]`; the cheapest choice subject to `|b[r] − b[q]| ≤ Δ`
//! for neighboring rays is a minimum-cost closed set, found exactly as the
//! source side of a minimum cut.
//!
//! Node `(r, z)` inside the closed set means "ray `r` is object at least up
//! to sample `z`". Terminal weights `w[r][z] = c[r][z] − c[r][z−1]` telescope
//! along each ray so a closed set with outermost node `b[r]` pays `c[r][b[r]]`.

pub mod flow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::mesh::{unit_icosphere, icosphere_level_for, TriangleMesh};
use crate::volume::{Vec3, Volume, WorldPoint};
use flow::{FlowNetwork, FlowStats, INF_CAPACITY};

/// Costs are multiplied by this and rounded before the flow computation.
pub const COST_SCALE: f64 = 1024.0;

/// How intensity differences become boundary costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceCost {
    /// `max − |mean − I|`: the boundary is drawn where the image differs most
    /// from the object mean (the enhancing rim).
    Contrast,
    /// `|mean − I|` used directly as the boundary cost.
    Difference,
}

/// Which minimum cut to report when several are optimal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Smallest source set: componentwise smallest boundary indices.
    Minimal,
    /// Largest source set: componentwise largest boundary indices.
    Maximal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphParams {
    pub polyhedron_vertex_target: usize,
    pub nodes_per_ray: usize,
    pub sample_spacing_mm: f64,
    pub delta: usize,
    pub object_mean_radius_mm: f64,
    pub surface_cost: SurfaceCost,
    pub tie_break: TieBreak,
}

impl GraphParams {
    pub fn defaults_for(volume: &Volume) -> Self {
        Self {
            polyhedron_vertex_target: 642,
            nodes_per_ray: 60,
            sample_spacing_mm: volume.grid().min_spacing(),
            delta: 2,
            object_mean_radius_mm: 5.0,
            surface_cost: SurfaceCost::Contrast,
            tie_break: TieBreak::Maximal,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::Spec(m.into()));
        if self.polyhedron_vertex_target < 12 {
            return bad("polyhedron_vertex_target must be at least 12");
        }
        if self.nodes_per_ray < 2 {
            return bad("nodes_per_ray must be at least 2");
        }
        if !(self.sample_spacing_mm > 0.0 && self.sample_spacing_mm.is_finite()) {
            return bad("sample_spacing_mm must be positive");
        }
        if !(self.object_mean_radius_mm > 0.0 && self.object_mean_radius_mm.is_finite()) {
            return bad("object_mean_radius_mm must be positive");
        }
        if self.delta + 1 > self.nodes_per_ray {
            return Err(GraphError::Delta {
                delta: self.delta,
                nodes_per_ray: self.nodes_per_ray,
            });
        }
        Ok(())
    }
}

/// Mean intensity of the voxels whose centers lie within `radius_mm` of
/// `seed`; the voxel nearest the seed is always included.
pub fn estimate_object_mean(volume: &Volume, seed: &WorldPoint, radius_mm: f64) -> Result<f64, GraphError> {
    let grid = volume.grid();
    let Some(nearest) = grid.nearest_voxel(seed) else {
        return Err(GraphError::SeedOutOfBounds([seed.x, seed.y, seed.z]));
    };
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let h = grid.spacing[a];
        lo[a] = ((seed[a] - radius_mm) / h).ceil().max(0.0) as usize;
        hi[a] = (((seed[a] + radius_mm) / h).floor().max(-1.0) as i64).min(grid.dims[a] as i64 - 1) as usize;
    }
    let r2 = radius_mm * radius_mm;
    let (mut sum, mut n) = (0.0f64, 0usize);
    let mut nearest_seen = false;
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let c = crate::volume::VoxelCoord::new(x, y, z);
                if (grid.world(c) - seed).norm_squared() <= r2 {
                    sum += volume.at(x, y, z) as f64;
                    n += 1;
                    nearest_seen |= c == nearest;
                }
            }
        }
    }
    if !nearest_seen {
        sum += volume.at_coord(nearest) as f64;
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Node costs on an `R × K` lattice, ray-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostField {
    pub rays: usize,
    pub nodes_per_ray: usize,
    pub values: Vec<f64>,
}

impl CostField {
    pub fn new(rays: usize, nodes_per_ray: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rays * nodes_per_ray, "cost field size");
        Self {
            rays,
            nodes_per_ray,
            values,
        }
    }

    pub fn at(&self, r: usize, z: usize) -> f64 {
        self.values[r * self.nodes_per_ray + z]
    }

    pub fn ray(&self, r: usize) -> &[f64] {
        &self.values[r * self.nodes_per_ray..(r + 1) * self.nodes_per_ray]
    }

    /// Costs rounded onto the integer flow scale.
    pub fn scaled(&self) -> Vec<i64> {
        self.values.iter().map(|c| (c * COST_SCALE).round() as i64).collect()
    }

    /// Total cost `Σ_r c[r][b[r]]` of a boundary assignment.
    pub fn surface_cost(&self, boundary: &[usize]) -> f64 {
        boundary.iter().enumerate().map(|(r, &b)| self.at(r, b)).sum()
    }
}

/// Terminal weights `w[r][0] = c[r][0]`, `w[r][z] = c[r][z] − c[r][z−1]`.
pub fn terminal_weights(cost: &CostField) -> Vec<f64> {
    let k = cost.nodes_per_ray;
    cost.values
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % k == 0 { c } else { c - cost.values[i - 1] })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SampledRays {
    pub seed: WorldPoint,
    pub directions: Vec<Vec3>,
    pub spacing_mm: f64,
    pub object_mean: f64,
    /// `|object_mean − I|` at every node.
    pub difference: CostField,
    /// Neighboring ray pairs (polyhedron edges), `r < q`.
    pub adjacency: Vec<(usize, usize)>,
    pub faces: Vec<[usize; 3]>,
}

impl SampledRays {
    pub fn position(&self, r: usize, z: usize) -> WorldPoint {
        self.seed + self.directions[r] * ((z + 1) as f64 * self.spacing_mm)
    }

    /// Boundary costs under `mode`.
    pub fn cost(&self, mode: SurfaceCost) -> CostField {
        match mode {
            SurfaceCost::Difference => self.difference.clone(),
            SurfaceCost::Contrast => {
                let top = self.difference.values.iter().copied().fold(0.0, f64::max);
                CostField {
                    values: self.difference.values.iter().map(|c| top - c).collect(),
                    ..self.difference
                }
            }
        }
    }
}

/// Samples `K` nodes along each ray from `seed` through the vertices of an
/// icosphere with about `params.polyhedron_vertex_target` vertices.
pub fn sample_rays(volume: &Volume, seed: &WorldPoint, params: &GraphParams) -> Result<SampledRays, GraphError> {
    params.validate()?;
    let object_mean = estimate_object_mean(volume, seed, params.object_mean_radius_mm)?;
    let (directions, faces) = unit_icosphere(icosphere_level_for(params.polyhedron_vertex_target));
    let k = params.nodes_per_ray;
    let h = params.sample_spacing_mm;
    let values: Vec<f64> = directions
        .par_iter()
        .flat_map_iter(|d| {
            (0..k).map(move |z| (object_mean - volume.sample(&(seed + d * ((z + 1) as f64 * h)))).abs())
        })
        .collect();
    let probe = TriangleMesh {
        vertices: directions.iter().map(|d| WorldPoint::from(*d)).collect(),
        faces: faces.clone(),
        center: WorldPoint::origin(),
    };
    Ok(SampledRays {
        seed: *seed,
        spacing_mm: h,
        object_mean,
        difference: CostField::new(directions.len(), k, values),
        adjacency: probe.edges(),
        directions,
        faces,
    })
}

/// Endpoint of an arc in the ray graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphNode {
    Source,
    Sink,
    Ray { r: usize, z: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Capacity {
    Finite(i64),
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArcRecord {
    pub from: GraphNode,
    pub to: GraphNode,
    pub capacity: Capacity,
}

/// Flow network for one cost field, plus a readable list of its arcs.
#[derive(Clone, Debug)]
pub struct RayGraph {
    pub rays: usize,
    pub nodes_per_ray: usize,
    pub delta: usize,
    pub network: FlowNetwork,
    pub arcs: Vec<ArcRecord>,
    /// Integer costs the network was built from.
    pub scaled_cost: Vec<i64>,
    /// Sum of the source-arc capacities of non-base nodes: the cut value
    /// exceeds the scaled surface cost change by exactly this constant.
    pub negative_weight_total: i64,
}

impl RayGraph {
    pub fn source(&self) -> usize {
        self.rays * self.nodes_per_ray
    }

    pub fn sink(&self) -> usize {
        self.source() + 1
    }

    pub fn node(&self, r: usize, z: usize) -> usize {
        r * self.nodes_per_ray + z
    }
}

/// Builds the closed-set flow network.
///
/// * `(r, z) → t` with capacity `w` when `w > 0`, `s → (r, z)` with `−w`
///   when `w < 0`, for `z ≥ 1`.
/// * `s → (r, 0)` with infinite capacity: the innermost shell is always
///   object, which rules out the empty surface.
/// * `(r, z) → (r, z − 1)` infinite, for `z ≥ 1`.
/// * `(r, z) → (q, z − Δ)` infinite for each neighbor pair in both
///   directions, when `z − Δ ≥ 1` (lower targets are base nodes, which are
///   inside anyway).
pub fn build_graph(cost: &CostField, adjacency: &[(usize, usize)], delta: usize) -> Result<RayGraph, GraphError> {
    let (rays, k) = (cost.rays, cost.nodes_per_ray);
    if delta + 1 > k {
        return Err(GraphError::Delta {
            delta,
            nodes_per_ray: k,
        });
    }
    if let Some(&(a, b)) = adjacency.iter().find(|&&(a, b)| a >= rays || b >= rays || a == b) {
        return Err(GraphError::Spec(format!("bad ray adjacency ({a}, {b}) for {rays} rays")));
    }
    let scaled = cost.scaled();
    let (s, t) = (rays * k, rays * k + 1);
    let mut network = FlowNetwork::new(rays * k + 2);
    let mut arcs = Vec::with_capacity(rays * k * 2 + adjacency.len() * 2 * k);
    let mut negative_weight_total = 0i64;
    let id = |r: usize, z: usize| r * k + z;
    let mut push = |network: &mut FlowNetwork, from: GraphNode, to: GraphNode, capacity: Capacity| {
        let idx = |n: GraphNode| match n {
            GraphNode::Source => s,
            GraphNode::Sink => t,
            GraphNode::Ray { r, z } => id(r, z),
        };
        let cap = match capacity {
            Capacity::Finite(c) => c,
            Capacity::Infinite => INF_CAPACITY,
        };
        network.add_arc(idx(from), idx(to), cap);
        arcs.push(ArcRecord { from, to, capacity });
    };

    for r in 0..rays {
        push(&mut network, GraphNode::Source, GraphNode::Ray { r, z: 0 }, Capacity::Infinite);
        for z in 1..k {
            let w = scaled[id(r, z)] - scaled[id(r, z - 1)];
            let node = GraphNode::Ray { r, z };
            if w > 0 {
                push(&mut network, node, GraphNode::Sink, Capacity::Finite(w));
            } else if w < 0 {
                push(&mut network, GraphNode::Source, node, Capacity::Finite(-w));
                negative_weight_total += -w;
            }
            push(&mut network, node, GraphNode::Ray { r, z: z - 1 }, Capacity::Infinite);
        }
    }
    for &(a, b) in adjacency {
        for (r, q) in [(a, b), (b, a)] {
            for z in delta + 1..k {
                push(
                    &mut network,
                    GraphNode::Ray { r, z },
                    GraphNode::Ray { r: q, z: z - delta },
                    Capacity::Infinite,
                );
            }
        }
    }
    Ok(RayGraph {
        rays,
        nodes_per_ray: k,
        delta,
        network,
        arcs,
        scaled_cost: scaled,
        negative_weight_total,
    })
}

/// Optimal boundary indices and the value of the cut that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct CutSurface {
    pub boundary: Vec<usize>,
    /// Minimum cut capacity on the integer scale.
    pub cut_value: i64,
    pub stats: FlowStats,
}

impl CutSurface {
    /// Largest `|b[r] − b[q]|` over neighboring rays.
    pub fn max_jump(&self, adjacency: &[(usize, usize)]) -> usize {
        adjacency
            .iter()
            .map(|&(a, b)| self.boundary[a].abs_diff(self.boundary[b]))
            .max()
            .unwrap_or(0)
    }
}

/// Exact minimum cut of `graph` (consumes its residual capacities).
pub fn min_cut(mut graph: RayGraph, tie_break: TieBreak) -> CutSurface {
    let (s, t) = (graph.source(), graph.sink());
    let (cut_value, stats) = graph.network.max_flow(s, t);
    let side = match tie_break {
        TieBreak::Minimal => graph.network.source_side(s),
        TieBreak::Maximal => graph.network.maximal_source_side(t),
    };
    let k = graph.nodes_per_ray;
    let boundary = (0..graph.rays)
        .map(|r| (0..k).rev().find(|&z| side[r * k + z]).unwrap_or(0))
        .collect();
    CutSurface {
        boundary,
        cut_value,
        stats,
    }
}

/// Closed surface with one vertex per ray, half a sample beyond the last
/// object node, connected like the polyhedron.
pub fn extract_surface(cut: &CutSurface, rays: &SampledRays) -> TriangleMesh {
    let vertices = cut
        .boundary
        .iter()
        .zip(&rays.directions)
        .map(|(&b, d)| rays.seed + d * ((b as f64 + 1.5) * rays.spacing_mm))
        .collect();
    TriangleMesh {
        vertices,
        faces: rays.faces.clone(),
        center: rays.seed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub rays: usize,
    pub nodes_per_ray: usize,
    pub delta: usize,
    pub sample_spacing_mm: f64,
    pub object_mean: f64,
    pub cost_scale: f64,
    pub cut_value: i64,
    pub surface_cost: f64,
    pub flow_phases: usize,
    pub augmenting_paths: usize,
    pub graph_nodes: usize,
    pub graph_arcs: usize,
    pub min_boundary_index: usize,
    pub max_boundary_index: usize,
}

#[derive(Clone, Debug)]
pub struct GraphRun {
    pub mesh: TriangleMesh,
    pub cut: CutSurface,
    pub diagnostics: GraphDiagnostics,
}

/// Seed → rays → graph → cut → surface.
pub fn segment_surface(volume: &Volume, seed: &WorldPoint, params: &GraphParams) -> Result<GraphRun, GraphError> {
    let rays = sample_rays(volume, seed, params)?;
    let cost = rays.cost(params.surface_cost);
    let graph = build_graph(&cost, &rays.adjacency, params.delta)?;
    let (graph_nodes, graph_arcs) = (graph.network.node_count(), graph.arcs.len());
    let cut = min_cut(graph, params.tie_break);
    let mesh = extract_surface(&cut, &rays);
    let diagnostics = GraphDiagnostics {
        rays: rays.directions.len(),
        nodes_per_ray: params.nodes_per_ray,
        delta: params.delta,
        sample_spacing_mm: params.sample_spacing_mm,
        object_mean: rays.object_mean,
        cost_scale: COST_SCALE,
        cut_value: cut.cut_value,
        surface_cost: cost.surface_cost(&cut.boundary),
        flow_phases: cut.stats.phases,
        augmenting_paths: cut.stats.augmenting_paths,
        graph_nodes,
        graph_arcs,
        min_boundary_index: cut.boundary.iter().copied().min().unwrap_or(0),
        max_boundary_index: cut.boundary.iter().copied().max().unwrap_or(0),
    };
    Ok(GraphRun { mesh, cut, diagnostics })
}

/// Exhaustive search over every Δ-feasible boundary assignment on the
/// integer cost scale. Returns the optimum and, among optimal assignments,
/// the componentwise smallest and largest ones.
pub fn brute_force_surface(
    cost: &CostField,
    adjacency: &[(usize, usize)],
    delta: usize,
) -> (i64, Vec<usize>, Vec<usize>) {
    let (rays, k) = (cost.rays, cost.nodes_per_ray);
    let scaled = cost.scaled();
    let mut best = i64::MAX;
    let mut lo: Vec<usize> = Vec::new();
    let mut hi: Vec<usize> = Vec::new();
    let mut b = vec![0usize; rays];
    loop {
        if adjacency.iter().all(|&(p, q)| b[p].abs_diff(b[q]) <= delta) {
            let value: i64 = b.iter().enumerate().map(|(r, &z)| scaled[r * k + z]).sum();
            if value < best {
                best = value;
                lo = b.clone();
                hi = b.clone();
            } else if value == best {
                for r in 0..rays {
                    lo[r] = lo[r].min(b[r]);
                    hi[r] = hi[r].max(b[r]);
                }
            }
        }
        // Odometer increment.
        let mut r = 0;
        loop {
            if r == rays {
                return (best, lo, hi);
            }
            b[r] += 1;
            if b[r] < k {
                break;
            }
            b[r] = 0;
            r += 1;
        }
    }
}
