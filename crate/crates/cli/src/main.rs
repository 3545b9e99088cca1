use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use biphoton::bench::{self, BenchError};
use biphoton::correlations::{dip_scan, linspace, CoincidenceWindow, Experiment, Pipeline, ScanVariable, Setting};
use biphoton::entanglement::{schmidt_decompose, DEFAULT_THRESHOLD};
use biphoton::grid::{Field1D, JointAmplitude, SnappedDelay, TimeGrid};
use biphoton::output;
use biphoton::overlap::{figure1_regions, overlap_report};
use biphoton::source::{BiphotonModel, KernelShape, KernelSpec, PumpSpec};
use biphoton::Error;

/// Default grid spacing when --t-max is not given.
const DEFAULT_DT: f64 = 1.0 / 64.0;

#[derive(Parser)]
#[command(name = "biphoton", version, about = "Two-photon interference simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalized coincidence rate versus signal delay.
    DipScan(DipScanArgs),
    /// Overlap of the two post-splitter amplitudes at one delay.
    Overlap(OverlapArgs),
    /// Schmidt spectrum of the source amplitude.
    Schmidt(SchmidtArgs),
    /// Support rectangles of the two terms in the (t', t-) plane.
    Regions(RegionsArgs),
    /// Check or run a bench file.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    Check { file: PathBuf },
    Run {
        file: PathBuf,
        /// Directory for outputs; defaults to the bench file's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Rect,
    Triangle,
    Gauss,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct PhysicsArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    sigma_p: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    omega_p: f64,
    #[arg(long, default_value_t = 512)]
    grid_n: usize,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    t_min: f64,
    /// Defaults to t-min + (grid-n - 1)/64.
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    /// Coincidence window half width.
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    window: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Rect)]
    kernel: KernelArg,
    /// Width of the gauss kernel; defaults to t0/4.
    #[arg(long, allow_negative_numbers = true)]
    gauss_width: Option<f64>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DipScanArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    tau_min: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    tau_max: f64,
    #[arg(long, default_value_t = 201)]
    steps: usize,
    /// Fixed compensation applied after the splitter.
    #[arg(long, allow_negative_numbers = true)]
    compensate: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OverlapArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    #[arg(long, allow_negative_numbers = true)]
    tau1: f64,
    #[arg(long, allow_negative_numbers = true)]
    compensate: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SchmidtArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD, allow_negative_numbers = true)]
    threshold: f64,
    /// Use a product of two Gaussians instead of the source model.
    #[arg(long)]
    separable: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RegionsArgs {
    #[arg(long, allow_negative_numbers = true)]
    tau1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    tplus_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    tplus_max: f64,
    #[command(flatten)]
    out: OutArgs,
}

enum Failure {
    Validation(String),
    Physics(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Physics(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Physics(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let hint = match &e {
            Error::SupportClipped { .. } | Error::GridTooSmall(_) => {
                " (widen the grid with --t-min/--t-max or --grid-n, or reduce the delays)"
            }
            _ => "",
        };
        let msg = format!("{e}{hint}");
        if e.is_physics() {
            Failure::Physics(msg)
        } else {
            Failure::Validation(msg)
        }
    }
}

type CmdResult = Result<(), Failure>;

impl PhysicsArgs {
    fn grid(&self) -> Result<TimeGrid, Failure> {
        let t_max = self.t_max.unwrap_or(self.t_min + (self.grid_n.max(1) - 1) as f64 * DEFAULT_DT);
        Ok(TimeGrid::new(self.grid_n, self.t_min, t_max)?)
    }

    fn model(&self) -> Result<BiphotonModel, Failure> {
        let shape = match self.kernel {
            KernelArg::Rect => KernelShape::Rect,
            KernelArg::Triangle => KernelShape::Triangle,
            KernelArg::Gauss => KernelShape::GaussianWindowed { width: self.gauss_width.unwrap_or(self.t0 / 4.0) },
        };
        let model = BiphotonModel::factored(PumpSpec::new(self.sigma_p, self.omega_p, 1.0)?, KernelSpec::new(shape, self.t0)?);
        Ok(model)
    }

    fn experiment(&self) -> Result<Experiment, Failure> {
        Ok(Experiment { model: self.model()?, grid: self.grid()?, window: CoincidenceWindow::new(self.window)? })
    }
}

fn emit(out: &OutArgs, text: &str) -> CmdResult {
    match &out.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn json_only(out: &OutArgs, what: &str) -> CmdResult {
    if out.format == Some(FormatArg::Csv) {
        return Err(Failure::Validation(format!("{what} output is JSON only")));
    }
    Ok(())
}

fn warn_snapped(what: &str, snaps: &[SnappedDelay]) {
    let moved: Vec<&SnappedDelay> = snaps.iter().filter(|s| s.was_moved()).collect();
    match moved.as_slice() {
        [] => {}
        [s] => eprintln!("warning: {what} {} snapped to grid value {}", s.requested, s.snapped),
        many => {
            let worst = many.iter().map(|s| (s.snapped - s.requested).abs()).fold(0.0, f64::max);
            eprintln!(
                "warning: {} of {} {what} values snapped to the grid (largest shift {worst}); the output lists snapped values",
                many.len(),
                snaps.len()
            );
        }
    }
}

fn cmd_dip_scan(a: &DipScanArgs) -> CmdResult {
    if a.steps < 2 {
        return Err(Failure::Validation("steps must be ≥ 2".into()));
    }
    if !(a.tau_min < a.tau_max) {
        return Err(Failure::Validation("--tau-min must be smaller than --tau-max".into()));
    }
    let exp = a.physics.experiment()?;
    let curve = dip_scan(&exp, ScanVariable::Tau1 { delta: a.compensate }, &linspace(a.tau_min, a.tau_max, a.steps))?;
    warn_snapped("delay", &curve.snapped);
    let text = match a.out.format.unwrap_or(FormatArg::Csv) {
        FormatArg::Csv => output::dip_csv(&curve),
        FormatArg::Json => output::dip_json(&curve),
    };
    emit(&a.out, &text)
}

fn cmd_overlap(a: &OverlapArgs) -> CmdResult {
    json_only(&a.out, "overlap")?;
    let exp = a.physics.experiment()?;
    let tau1 = exp.grid.snap(a.tau1);
    let delta = a.compensate.map(|d| exp.grid.snap(d));
    let snaps: Vec<SnappedDelay> = std::iter::once(tau1).chain(delta).collect();
    warn_snapped("delay", &snaps);
    let setting = Setting { tau1: tau1.snapped, delta: delta.map(|d| d.snapped) };
    let pipeline = Pipeline::new(&exp, &[setting])?;
    let report = overlap_report(&pipeline.terms(setting)?, &exp.window)?;
    emit(&a.out, &output::overlap_json(&report))
}

fn separable(grid: TimeGrid, t0: f64) -> Result<JointAmplitude, Failure> {
    let f = Field1D::from_fn(grid, |t| Complex64::new((-(t * t) / (2.0 * t0 * t0)).exp(), 0.0));
    let g = Field1D::from_fn(grid, |t| Complex64::new((-(t - 0.5 * t0).powi(2) / (t0 * t0)).exp(), 0.0));
    Ok(JointAmplitude::product(&f, &g)?.normalized()?)
}

fn cmd_schmidt(a: &SchmidtArgs) -> CmdResult {
    json_only(&a.out, "schmidt")?;
    if !(a.threshold >= 0.0) {
        return Err(Failure::Validation("--threshold must be ≥ 0".into()));
    }
    let grid = a.physics.grid()?;
    let amp = if a.separable {
        separable(grid, a.physics.t0)?
    } else {
        a.physics.model()?.build(&grid)?
    };
    let spectrum = schmidt_decompose(&amp, a.threshold)?;
    emit(&a.out, &output::schmidt_json(&spectrum.summary()))
}

fn cmd_regions(a: &RegionsArgs) -> CmdResult {
    let r = figure1_regions(a.tau1, a.t0, (a.tplus_min, a.tplus_max))?;
    let text = match a.out.format.unwrap_or(FormatArg::Csv) {
        FormatArg::Csv => output::regions_csv(&r),
        FormatArg::Json => output::regions_json(&r),
    };
    emit(&a.out, &text)
}

fn bench_failure(file: &Path, e: BenchError) -> Failure {
    let msg = format!("{}: {e}", file.display());
    if e.is_physics() {
        Failure::Physics(msg)
    } else {
        Failure::Validation(msg)
    }
}

fn load_bench(file: &Path) -> Result<bench::BenchProgram, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::Io(format!("cannot read {}: {e}", file.display())))?;
    bench::parse(&text).map_err(|e| bench_failure(file, e))
}

fn cmd_bench(c: &BenchCommand) -> CmdResult {
    match c {
        BenchCommand::Check { file } => {
            load_bench(file)?;
            println!("OK");
            Ok(())
        }
        BenchCommand::Run { file, out_dir } => {
            let program = load_bench(file)?;
            let result = bench::run(&program).map_err(|e| bench_failure(file, e))?;
            let moved = result.manifest.moved().count();
            if moved > 0 {
                eprintln!(
                    "warning: {moved} of {} delays snapped to the grid; see the run manifest",
                    result.manifest.snapped_delays.len()
                );
            }
            let dir = out_dir.clone().unwrap_or_else(|| file.parent().map(Path::to_path_buf).unwrap_or_default());
            let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "bench".into());
            let written = result
                .write_to(&dir, &format!("{stem}.manifest.json"))
                .map_err(|e| Failure::Io(format!("cannot write outputs to {}: {e}", dir.display())))?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::DipScan(a) => cmd_dip_scan(a),
        Command::Overlap(a) => cmd_overlap(a),
        Command::Schmidt(a) => cmd_schmidt(a),
        Command::Regions(a) => cmd_regions(a),
        Command::Bench(c) => cmd_bench(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
