//! Bench files: a line-oriented description of a source, an optical path, and
//! the requested outputs.
//!
//! ```text
//! # HOM dip
//! pump sigma=0.1 omega=0
//! kernel rect t0=1
//! grid n=256 tmin=-4 tmax=5
//! delay signal 0.5
//! beamsplitter
//! window 4
//! scan tau1 -0.5 1.5 201
//! output csv dip.csv
//! ```
//!
//! The full grammar is in `docs/GRAMMAR.md`.

mod parse;
mod run;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::correlations::CoincidenceWindow;
use crate::error::Error;
use crate::optics::ElementSpec;
use crate::source::{BiphotonModel, KernelShape, KernelSpec, PumpSpec};

pub use parse::parse;
pub use run::{run, Artifact, RunManifest, RunResult, SnapRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },

    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },

    #[error("line {line}: {source}")]
    Run { line: usize, source: Error },
}

impl BenchError {
    pub fn line(&self) -> usize {
        match self {
            BenchError::Syntax { line, .. } | BenchError::Semantic { line, .. } | BenchError::Run { line, .. } => *line,
        }
    }

    pub fn is_physics(&self) -> bool {
        matches!(self, BenchError::Run { source, .. } if source.is_physics())
    }
}

/// A directive value with the line it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located<T> {
    pub value: T,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Tau1,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub variable: ScanKind,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Dip,
    Overlap,
    Schmidt,
    Regions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub format: Format,
    pub path: String,
    /// Explicit kind; when absent, `dip` for programs with a scan and `overlap` otherwise.
    pub kind: Option<OutputKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchProgram {
    pub pump: Located<PumpSpec>,
    pub kernel: Located<KernelSpec>,
    pub kernel2: Option<Located<KernelSpec>>,
    pub grid: Located<GridSpec>,
    pub elements: Vec<Located<ElementSpec>>,
    pub window: Option<Located<CoincidenceWindow>>,
    pub scan: Option<Located<ScanSpec>>,
    pub outputs: Vec<Located<OutputSpec>>,
}

impl BenchProgram {
    pub fn model(&self) -> BiphotonModel {
        match &self.kernel2 {
            Some(k2) => BiphotonModel::kernel_integral(self.pump.value, self.kernel.value, k2.value),
            None => BiphotonModel::factored(self.pump.value, self.kernel.value),
        }
    }

    pub fn window(&self) -> CoincidenceWindow {
        self.window.map(|w| w.value).unwrap_or_default()
    }

    pub fn has_splitter(&self) -> bool {
        self.elements.iter().any(|e| matches!(e.value, ElementSpec::BeamSplitter))
    }

    /// Sum of the fixed signal delays before the splitter.
    pub fn tau1(&self) -> f64 {
        self.elements
            .iter()
            .filter_map(|e| match e.value {
                ElementSpec::DelaySignal { tau1 } => Some(tau1),
                _ => None,
            })
            .sum()
    }

    /// Sum of the fixed compensations, if any.
    pub fn delta(&self) -> Option<f64> {
        let d: Vec<f64> = self
            .elements
            .iter()
            .filter_map(|e| match e.value {
                ElementSpec::Compensate { delta } => Some(delta),
                _ => None,
            })
            .collect();
        (!d.is_empty()).then(|| d.iter().sum())
    }

    pub fn output_kind(&self, o: &OutputSpec) -> OutputKind {
        o.kind.unwrap_or(if self.scan.is_some() { OutputKind::Dip } else { OutputKind::Overlap })
    }
}

fn write_kernel(f: &mut fmt::Formatter<'_>, directive: &str, k: &KernelSpec) -> fmt::Result {
    match k.shape {
        KernelShape::Rect => writeln!(f, "{directive} rect t0={}", k.t0),
        KernelShape::Triangle => writeln!(f, "{directive} triangle t0={}", k.t0),
        KernelShape::GaussianWindowed { width } => writeln!(f, "{directive} gauss t0={} width={width}", k.t0),
    }
}

/// Canonical text form; parsing it gives back the same program.
impl fmt::Display for BenchProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.pump.value;
        writeln!(f, "pump sigma={} omega={} amp={}", p.sigma_p, p.omega_p, p.amp)?;
        write_kernel(f, "kernel", &self.kernel.value)?;
        if let Some(k2) = &self.kernel2 {
            write_kernel(f, "kernel2", &k2.value)?;
        }
        let g = &self.grid.value;
        writeln!(f, "grid n={} tmin={} tmax={}", g.n, g.t_min, g.t_max)?;
        for e in &self.elements {
            match e.value {
                ElementSpec::DelaySignal { tau1 } => writeln!(f, "delay signal {tau1}")?,
                ElementSpec::BeamSplitter => writeln!(f, "beamsplitter")?,
                ElementSpec::Compensate { delta } => writeln!(f, "compensate signal {delta}")?,
            }
        }
        if let Some(w) = &self.window {
            write!(f, "window {}", w.value.half_width)?;
            if let Some((lo, hi)) = w.value.t_plus {
                write!(f, " tplus_min={lo} tplus_max={hi}")?;
            }
            writeln!(f)?;
        }
        if let Some(s) = &self.scan {
            let var = match s.value.variable {
                ScanKind::Tau1 => "tau1",
                ScanKind::Delta => "delta",
            };
            writeln!(f, "scan {var} {} {} {}", s.value.lo, s.value.hi, s.value.steps)?;
        }
        for o in &self.outputs {
            let fmt_name = match o.value.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            write!(f, "output {fmt_name} {}", o.value.path)?;
            if let Some(kind) = o.value.kind {
                write!(f, " {}", kind_name(kind))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub(crate) fn kind_name(kind: OutputKind) -> &'static str {
    match kind {
        OutputKind::Dip => "dip",
        OutputKind::Overlap => "overlap",
        OutputKind::Schmidt => "schmidt",
        OutputKind::Regions => "regions",
    }
}
