//! Manifest-driven batch evaluation.
//!
//! A manifest lists cases (a volume plus an optional reference mask, outline
//! and seed). Each case runs the requested methods through
//! [`segment::run`](crate::segment::run); failures are recorded per case and
//! never abort the batch.

mod suite;
mod summary;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use suite::{generate_phantom_suite, SuiteRanges, SUITE_RANGES};
pub use summary::{cell, render_table, stats, summarize, ColumnStats, Quantity, Source, SummaryReport, COLUMNS};

use crate::balloon::OutlineInit;
use crate::error::HarnessError;
use crate::io::load_volume;
use crate::metrics::{mask_volume, BinaryMask, Dice, MaskVolume};
use crate::phantom::PhantomSpec;
use crate::segment::{self, Initialization, Method, Overrides, RunRecord};
use crate::volume::WorldPoint;

/// One case. Paths are relative to the manifest's directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub id: String,
    pub volume_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_mask_path: Option<PathBuf>,
    /// JSON [`OutlineInit`]; required for the balloon method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outline_path: Option<PathBuf>,
    /// World point in mm; required for the graph method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<[f64; 3]>,
    /// Methods to run. Defaults to every method whose initialization is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<Method, Overrides>,
    /// Generator description for synthetic cases; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
}

impl CaseSpec {
    pub fn requested_methods(&self) -> Vec<Method> {
        match &self.methods {
            Some(m) => m.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
            None => Method::ALL
                .into_iter()
                .filter(|m| match m {
                    Method::Balloon => self.outline_path.is_some(),
                    Method::Graph => self.seed.is_some(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub cases: Vec<CaseSpec>,
}

impl CaseManifest {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut seen = BTreeSet::new();
        for c in &self.cases {
            if c.id.trim().is_empty() {
                return Err(HarnessError::Manifest("case id must not be empty".into()));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(HarnessError::Manifest(format!("duplicate case id '{}'", c.id)));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let m: Self = read_json(path)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        write_json(path, self)
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub detail: String,
}

impl StageError {
    fn new(stage: &str, detail: impl ToString) -> Self {
        Self {
            stage: stage.into(),
            detail: detail.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunRecord>,
    /// Present when the case has a reference mask.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsc: Option<Dice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    /// True when the case loaded and every requested method succeeded.
    pub ok: bool,
    /// First failure of the case, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<MaskVolume>,
    #[serde(default)]
    pub methods: BTreeMap<Method, MethodOutcome>,
}

impl EvalRecord {
    fn failed(id: &str, error: StageError) -> Self {
        Self {
            id: id.into(),
            ok: false,
            error: Some(error),
            reference: None,
            methods: BTreeMap::new(),
        }
    }
}

/// Overrides applied to every case before the case's own.
pub type GlobalOverrides = BTreeMap<Method, Overrides>;

fn initialization(case: &CaseSpec, base: &Path, method: Method) -> Result<Initialization, StageError> {
    match method {
        Method::Balloon => {
            let p = case
                .outline_path
                .as_ref()
                .ok_or_else(|| StageError::new("initialization", "balloon requested but the case has no outline_path"))?;
            let outline: OutlineInit =
                read_json(&resolve(base, p)).map_err(|e| StageError::new("initialization", e))?;
            Ok(Initialization::Outline(outline))
        }
        Method::Graph => {
            let s = case
                .seed
                .ok_or_else(|| StageError::new("initialization", "graph requested but the case has no seed"))?;
            Ok(Initialization::Seed(WorldPoint::from(s)))
        }
    }
}

/// Runs one case. Never fails: problems are recorded in the returned record.
pub fn run_case(case: &CaseSpec, base: &Path, global: &GlobalOverrides) -> EvalRecord {
    let volume = match load_volume(&resolve(base, &case.volume_path)) {
        Ok(v) => v,
        Err(e) => return EvalRecord::failed(&case.id, StageError::new("load", e)),
    };
    let reference = match &case.reference_mask_path {
        None => None,
        Some(p) => match BinaryMask::load(&resolve(base, p)) {
            Ok(m) if m.grid() == volume.grid() => Some(m),
            Ok(m) => {
                let detail = format!(
                    "reference grid {:?} / {:?} does not match volume grid {:?} / {:?}",
                    m.grid().dims,
                    m.grid().spacing,
                    volume.dims(),
                    volume.spacing()
                );
                return EvalRecord::failed(&case.id, StageError::new("reference", detail));
            }
            Err(e) => return EvalRecord::failed(&case.id, StageError::new("reference", e)),
        },
    };
    let methods = case.requested_methods();
    if methods.is_empty() {
        return EvalRecord::failed(&case.id, StageError::new("manifest", "case has neither an outline nor a seed"));
    }

    let mut record = EvalRecord {
        id: case.id.clone(),
        ok: true,
        error: None,
        reference: reference.as_ref().map(mask_volume),
        methods: BTreeMap::new(),
    };
    for method in methods {
        let mut overrides = global.get(&method).cloned().unwrap_or_default();
        if let Some(o) = case.params.get(&method) {
            overrides.extend(o.clone());
        }
        let outcome = initialization(case, base, method)
            .and_then(|init| segment::run(&volume, method, &init, &overrides).map_err(|e| StageError::new(e.stage(), e)))
            .and_then(|res| {
                let dsc = match &reference {
                    Some(r) => Some(res.dice_against(r).map_err(|e| StageError::new(e.stage(), e))?),
                    None => None,
                };
                Ok(MethodOutcome {
                    run: Some(res.record),
                    dsc,
                    error: None,
                })
            })
            .unwrap_or_else(|e| MethodOutcome {
                run: None,
                dsc: None,
                error: Some(e),
            });
        if let Some(e) = &outcome.error {
            record.ok = false;
            record.error.get_or_insert_with(|| StageError::new(&e.stage, format!("{}: {}", method.name(), e.detail)));
        }
        record.methods.insert(method, outcome);
    }
    record
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<EvalRecord>,
    /// Absent when no case succeeded.
    pub summary: Option<SummaryReport>,
}

impl Report {
    pub fn from_records(records: Vec<EvalRecord>) -> Self {
        let summary = summarize(&records).ok();
        Self { records, summary }
    }

    pub fn all_ok(&self) -> bool {
        self.records.iter().all(|r| r.ok)
    }

    pub fn table(&self) -> String {
        match &self.summary {
            Some(s) => render_table(&self.records, s),
            None => {
                let mut out = String::new();
                for r in &self.records {
                    let e = r.error.as_ref().map_or(String::new(), |e| format!("{}: {}", e.stage, e.detail));
                    out.push_str(&format!("{}  FAILED ({e})\n", r.id));
                }
                out.push_str(&format!("{} cases, 0 successful\n", self.records.len()));
                out
            }
        }
    }

    /// Report JSON with every `runtime_ms` replaced by null: the part that
    /// must be identical between repeated runs.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        mask_runtimes(&mut v);
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

pub fn mask_runtimes(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                if k == "runtime_ms" {
                    *x = Value::Null;
                } else {
                    mask_runtimes(x);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(mask_runtimes),
        _ => {}
    }
}

/// Runs every case on a pool of `jobs` workers (0 = one per core) and
/// assembles the report in manifest order.
pub fn evaluate(
    manifest: &CaseManifest,
    base: &Path,
    global: &GlobalOverrides,
    jobs: usize,
) -> Result<Report, HarnessError> {
    manifest.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Manifest(format!("cannot start worker pool: {e}")))?;
    let records = pool.install(|| manifest.cases.par_iter().map(|c| run_case(c, base, global)).collect());
    Ok(Report::from_records(records))
}

/// Loads the manifest at `path` and evaluates it relative to its directory.
pub fn evaluate_manifest(path: &Path, global: &GlobalOverrides, jobs: usize) -> Result<Report, HarnessError> {
    let manifest = CaseManifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    evaluate(&manifest, base, global, jobs)
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_json(&dir.join("report.json"), report)?;
    let txt = dir.join("report.txt");
    fs::write(&txt, report.table()).map_err(|source| HarnessError::Io { path: txt, source })
}

/// Reads either a full report or a bare list of records, recomputing the summary.
pub fn load_records(path: &Path) -> Result<Report, HarnessError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Input {
        Report(Report),
        Records(Vec<EvalRecord>),
    }
    let records = match read_json::<Input>(path)? {
        Input::Report(r) => r.records,
        Input::Records(r) => r,
    };
    Ok(Report::from_records(records))
}
