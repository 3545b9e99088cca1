use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, BenchProgram, Format, Located, OutputKind, ScanKind};
use crate::correlations::{dip_scan, linspace, DipCurve, Experiment, Pipeline, ScanVariable, Setting};
use crate::entanglement::{schmidt_decompose, SchmidtSummary, DEFAULT_THRESHOLD};
use crate::error::Error;
use crate::grid::TimeGrid;
use crate::optics::ElementSpec;
use crate::output;
use crate::overlap::{figure1_regions, overlap_report, Figure1Regions, OverlapReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapRecord {
    pub line: usize,
    pub requested: f64,
    pub snapped: f64,
    pub steps: isize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub n: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub snapped_delays: Vec<SnapRecord>,
    pub grid: GridRecord,
    pub versions: BTreeMap<String, String>,
}

impl RunManifest {
    /// Snap records whose delay actually moved.
    pub fn moved(&self) -> impl Iterator<Item = &SnapRecord> {
        self.snapped_delays.iter().filter(|r| r.snapped != r.requested)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub format: Format,
    pub kind: OutputKind,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub artifacts: Vec<Artifact>,
    pub manifest: RunManifest,
}

impl RunResult {
    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Write every artifact under `dir`, plus the manifest as `manifest_name`.
    pub fn write_to(&self, dir: &Path, manifest_name: &str) -> io::Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for a in &self.artifacts {
            let path = dir.join(&a.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, &a.contents)?;
            written.push(path);
        }
        let path = dir.join(manifest_name);
        std::fs::write(&path, self.manifest_json())?;
        written.push(path);
        Ok(written)
    }
}

struct Runner<'a> {
    p: &'a BenchProgram,
    exp: Experiment,
    snaps: Vec<SnapRecord>,
    dip: Option<DipCurve>,
    overlap: Option<OverlapReport>,
    schmidt: Option<SchmidtSummary>,
    regions: Option<Figure1Regions>,
}

impl<'a> Runner<'a> {
    fn first_line(&self, pick: impl Fn(&ElementSpec) -> bool) -> Option<usize> {
        self.p.elements.iter().find(|e| pick(&e.value)).map(|e| e.line)
    }

    fn delay_line(&self) -> usize {
        self.first_line(|e| matches!(e, ElementSpec::DelaySignal { .. })).unwrap_or(self.p.grid.line)
    }

    fn compensate_line(&self) -> usize {
        self.first_line(|e| matches!(e, ElementSpec::Compensate { .. })).unwrap_or(self.p.grid.line)
    }

    /// Line blamed for failures of the optical path.
    fn path_line(&self) -> usize {
        self.p
            .scan
            .map(|s| s.line)
            .or_else(|| self.first_line(|e| !matches!(e, ElementSpec::BeamSplitter)))
            .unwrap_or(self.p.kernel.line)
    }

    fn snap(&mut self, requested: f64, line: usize) -> f64 {
        let s = self.exp.grid.snap(requested);
        self.snaps.push(SnapRecord { line, requested, snapped: s.snapped, steps: s.steps });
        s.snapped
    }

    fn fixed_setting(&mut self) -> Setting {
        let (dl, cl) = (self.delay_line(), self.compensate_line());
        let tau1 = self.snap(self.p.tau1(), dl);
        let delta = self.p.delta().map(|d| self.snap(d, cl));
        Setting { tau1, delta }
    }

    fn fail(&self, line: usize) -> impl Fn(Error) -> BenchError {
        move |source| BenchError::Run { line, source }
    }

    fn dip(&mut self) -> Result<&DipCurve, BenchError> {
        if self.dip.is_none() {
            let Located { value: scan, line } = self.p.scan.expect("dip outputs are checked to have a scan");
            let values = linspace(scan.lo, scan.hi, scan.steps);
            let variable = match scan.variable {
                ScanKind::Tau1 => {
                    let cl = self.compensate_line();
                    ScanVariable::Tau1 { delta: self.p.delta().map(|d| self.snap(d, cl)) }
                }
                ScanKind::Delta => {
                    let dl = self.delay_line();
                    ScanVariable::Delta { tau1: self.snap(self.p.tau1(), dl) }
                }
            };
            for &v in &values {
                self.snap(v, line);
            }
            let curve = dip_scan(&self.exp, variable, &values).map_err(self.fail(line))?;
            self.dip = Some(curve);
        }
        Ok(self.dip.as_ref().expect("set above"))
    }

    fn overlap(&mut self) -> Result<&OverlapReport, BenchError> {
        if self.overlap.is_none() {
            let setting = self.fixed_setting();
            let fail = self.fail(self.path_line());
            let pipeline = Pipeline::new(&self.exp, &[setting]).map_err(&fail)?;
            let terms = pipeline.terms(setting).map_err(&fail)?;
            self.overlap = Some(overlap_report(&terms, &self.exp.window).map_err(&fail)?);
        }
        Ok(self.overlap.as_ref().expect("set above"))
    }

    fn schmidt(&mut self) -> Result<&SchmidtSummary, BenchError> {
        if self.schmidt.is_none() {
            let fail = self.fail(self.p.kernel.line);
            let a = self.exp.model.build(&self.exp.grid).map_err(&fail)?;
            self.schmidt = Some(schmidt_decompose(&a, DEFAULT_THRESHOLD).map_err(&fail)?.summary());
        }
        Ok(self.schmidt.as_ref().expect("set above"))
    }

    fn regions(&mut self) -> Result<&Figure1Regions, BenchError> {
        if self.regions.is_none() {
            let setting = self.fixed_setting();
            let g = self.exp.grid;
            let t_plus = self.exp.window.t_plus.unwrap_or((g.t_min(), g.t_max()));
            let r = figure1_regions(setting.net_delay(), self.exp.model.t0(), t_plus).map_err(self.fail(self.path_line()))?;
            self.regions = Some(r);
        }
        Ok(self.regions.as_ref().expect("set above"))
    }
}

/// Execute a parsed program. Outputs are rendered in file order; nothing is written.
pub fn run(p: &BenchProgram) -> Result<RunResult, BenchError> {
    let gs = p.grid.value;
    let grid = TimeGrid::new(gs.n, gs.t_min, gs.t_max).map_err(|source| BenchError::Run { line: p.grid.line, source })?;
    let exp = Experiment { model: p.model(), grid, window: p.window() };
    let mut r = Runner { p, exp, snaps: Vec::new(), dip: None, overlap: None, schmidt: None, regions: None };

    let mut artifacts = Vec::new();
    for o in &p.outputs {
        let kind = p.output_kind(&o.value);
        let contents = match (kind, o.value.format) {
            (OutputKind::Dip, Format::Csv) => output::dip_csv(r.dip()?),
            (OutputKind::Dip, Format::Json) => output::dip_json(r.dip()?),
            (OutputKind::Overlap, _) => output::overlap_json(r.overlap()?),
            (OutputKind::Schmidt, _) => output::schmidt_json(r.schmidt()?),
            (OutputKind::Regions, Format::Csv) => output::regions_csv(r.regions()?),
            (OutputKind::Regions, Format::Json) => output::regions_json(r.regions()?),
        };
        artifacts.push(Artifact { path: o.value.path.clone(), format: o.value.format, kind, contents });
    }

    // Several outputs may snap the same delay; keep each (line, value) once.
    let mut snapped_delays: Vec<SnapRecord> = Vec::new();
    for s in r.snaps {
        if !snapped_delays.iter().any(|x| x.line == s.line && x.requested == s.requested) {
            snapped_delays.push(s);
        }
    }
    let versions = BTreeMap::from([
        ("biphoton".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("schema".to_string(), output::SCHEMA_VERSION.to_string()),
    ]);
    let manifest = RunManifest {
        schema_version: output::SCHEMA_VERSION.to_string(),
        snapped_delays,
        grid: GridRecord { n: grid.n(), t_min: grid.t_min(), t_max: grid.t_max(), dt: grid.dt() },
        versions,
    };
    Ok(RunResult { artifacts, manifest })
}
