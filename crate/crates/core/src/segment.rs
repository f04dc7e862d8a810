//! One entry point for both methods: resolve parameters, run, voxelize onto
//! the source grid, measure.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::balloon::{self, BalloonDiagnostics, BalloonParams, OutlineInit};
use crate::error::SegmentError;
use crate::graph::{self, GraphDiagnostics, GraphParams};
use crate::mesh::TriangleMesh;
use crate::metrics::{dice, mask_volume, voxelize_on, BinaryMask, Dice};
use crate::volume::{Volume, WorldPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Balloon,
    Graph,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Balloon, Method::Graph];

    pub fn name(self) -> &'static str {
        match self {
            Method::Balloon => "balloon",
            Method::Graph => "graph",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "balloon" => Ok(Method::Balloon),
            "graph" => Ok(Method::Graph),
            _ => Err(format!("unknown method '{s}' (expected balloon or graph)")),
        }
    }
}

/// User initialization: an outline for the balloon, a seed for the graph.
#[derive(Clone, Debug, PartialEq)]
pub enum Initialization {
    Outline(OutlineInit),
    Seed(WorldPoint),
}

/// Parameter overrides by field name, applied on top of the volume-derived
/// defaults.
pub type Overrides = BTreeMap<String, Value>;

/// Parses `key=value`; the value is read as JSON when possible and as a
/// bare string otherwise (`tie_break=minimal`).
pub fn parse_override(text: &str) -> Result<(String, Value), SegmentError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| SegmentError::Params(format!("expected key=value, got '{text}'")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(SegmentError::Params(format!("empty parameter name in '{text}'")));
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(defaults: &T, overrides: &Overrides) -> Result<T, SegmentError> {
    let mut v = serde_json::to_value(defaults).map_err(|e| SegmentError::Params(e.to_string()))?;
    let map = v.as_object_mut().expect("parameter structs serialize to objects");
    for (k, val) in overrides {
        if !map.contains_key(k) {
            let known: Vec<_> = map.keys().cloned().collect();
            return Err(SegmentError::Params(format!(
                "unknown parameter '{k}' (known: {})",
                known.join(", ")
            )));
        }
        map.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| SegmentError::Params(e.to_string()))
}

/// Fully resolved parameters of either method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodParams {
    Balloon(BalloonParams),
    Graph(GraphParams),
}

pub fn resolve_params(method: Method, volume: &Volume, overrides: &Overrides) -> Result<MethodParams, SegmentError> {
    Ok(match method {
        Method::Balloon => {
            let p: BalloonParams = merge(&BalloonParams::defaults_for(volume), overrides)?;
            p.validate()?;
            MethodParams::Balloon(p)
        }
        Method::Graph => {
            let p: GraphParams = merge(&GraphParams::defaults_for(volume), overrides)?;
            p.validate()?;
            MethodParams::Graph(p)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagnostics {
    Balloon(BalloonDiagnostics),
    Graph(GraphDiagnostics),
}

/// Everything about a run except the mesh and mask themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub volume_cm3: f64,
    pub voxel_count: usize,
    pub runtime_ms: f64,
    /// False only for a balloon run that hit its iteration cap.
    pub converged: bool,
    pub mesh_vertices: usize,
    pub mesh_faces: usize,
    pub params: MethodParams,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub mesh: TriangleMesh,
    pub mask: BinaryMask,
    pub record: RunRecord,
}

impl SegmentationResult {
    pub fn dice_against(&self, reference: &BinaryMask) -> Result<Dice, SegmentError> {
        Ok(dice(&self.mask, reference)?)
    }
}

/// Runs `method` on `volume`. The runtime covers surface computation and
/// voxelization.
pub fn run(
    volume: &Volume,
    method: Method,
    init: &Initialization,
    overrides: &Overrides,
) -> Result<SegmentationResult, SegmentError> {
    let params = resolve_params(method, volume, overrides)?;
    let start = Instant::now();
    let (mesh, converged, diagnostics) = match (&params, init) {
        (MethodParams::Balloon(p), Initialization::Outline(o)) => {
            let run = balloon::evolve(volume, o, p)?;
            let c = run.diagnostics.converged;
            (run.mesh, c, Diagnostics::Balloon(run.diagnostics))
        }
        (MethodParams::Graph(p), Initialization::Seed(s)) => {
            let run = graph::segment_surface(volume, s, p)?;
            (run.mesh, true, Diagnostics::Graph(run.diagnostics))
        }
        (MethodParams::Balloon(_), Initialization::Seed(_)) => {
            return Err(SegmentError::Init("the balloon method needs an outline, not a seed".into()))
        }
        (MethodParams::Graph(_), Initialization::Outline(_)) => {
            return Err(SegmentError::Init("the graph method needs a seed point, not an outline".into()))
        }
    };
    let mask = voxelize_on(&mesh, volume.grid())?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let mv = mask_volume(&mask);
    Ok(SegmentationResult {
        record: RunRecord {
            method,
            volume_cm3: mv.volume_cm3,
            voxel_count: mv.voxel_count,
            runtime_ms,
            converged,
            mesh_vertices: mesh.vertex_count(),
            mesh_faces: mesh.faces.len(),
            params,
            diagnostics,
        },
        mesh,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_phantom, PhantomSpec};
    use crate::volume::Axis;
    use serde_json::json;

    fn phantom() -> (Volume, BinaryMask) {
        make_phantom(&PhantomSpec::sphere([20.0; 3], 12.0), [41; 3], [1.0; 3]).unwrap()
    }

    #[test]
    fn override_parsing() {
        assert_eq!(parse_override("delta=3").unwrap(), ("delta".into(), json!(3)));
        assert_eq!(parse_override(" step_mm = 0.25").unwrap(), ("step_mm".into(), json!(0.25)));
        assert_eq!(parse_override("tie_break=minimal").unwrap(), ("tie_break".into(), json!("minimal")));
        assert!(parse_override("delta").is_err());
        assert!(parse_override("=3").is_err());
    }

    #[test]
    fn overrides_are_checked() {
        let (v, _) = phantom();
        let mut o = Overrides::new();
        o.insert("delta".into(), json!(1));
        match resolve_params(Method::Graph, &v, &o).unwrap() {
            MethodParams::Graph(p) => assert_eq!(p.delta, 1),
            other => panic!("{other:?}"),
        }
        o.insert("nonsense".into(), json!(1));
        assert!(matches!(resolve_params(Method::Graph, &v, &o), Err(SegmentError::Params(_))));
        let mut o = Overrides::new();
        o.insert("delta".into(), json!(99));
        assert!(matches!(resolve_params(Method::Graph, &v, &o), Err(SegmentError::Graph(_))));
        let mut o = Overrides::new();
        o.insert("step_mm".into(), json!("fast"));
        assert!(matches!(resolve_params(Method::Balloon, &v, &o), Err(SegmentError::Params(_))));
    }

    #[test]
    fn init_must_match_method() {
        let (v, _) = phantom();
        let seed = Initialization::Seed(WorldPoint::new(20.0, 20.0, 20.0));
        let e = run(&v, Method::Balloon, &seed, &Overrides::new()).unwrap_err();
        assert_eq!(e.stage(), "initialization");
        let outline = Initialization::Outline(OutlineInit::circle(Axis::Z, 20, [20.0, 20.0], 12.0, 24));
        assert!(run(&v, Method::Graph, &outline, &Overrides::new()).is_err());
    }

    #[test]
    fn record_matches_mask() {
        let (v, truth) = phantom();
        let r = run(
            &v,
            Method::Graph,
            &Initialization::Seed(WorldPoint::new(20.0, 20.0, 20.0)),
            &Overrides::new(),
        )
        .unwrap();
        assert_eq!(r.record.voxel_count, r.mask.count());
        assert_eq!(r.record.volume_cm3, r.mask.count() as f64 * v.grid().voxel_volume_mm3() / 1000.0);
        assert_eq!(r.mask.grid(), v.grid());
        assert!(r.dice_against(&truth).unwrap().percent > 90.0);
        let json = serde_json::to_value(&r.record).unwrap();
        assert_eq!(json["method"], "graph");
        assert_eq!(json["params"]["delta"], 2);
        assert_eq!(json["diagnostics"]["rays"], 642);
    }
}
