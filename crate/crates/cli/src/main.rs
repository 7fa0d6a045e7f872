mod cmd;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use zharm_core::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "zharm", version, about = "Discrete harmonic analysis for the Laplacian on ℤ")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Half-width of output windows around the input support
    #[arg(long, global = true, default_value_t = 4096)]
    pub halfwidth: usize,
    /// FFT grid size K (power of two)
    #[arg(long, global = true, default_value_t = 1 << 14)]
    pub grid: usize,
    /// Coarsest Littlewood–Paley index
    #[arg(long, global = true, default_value_t = zharm_core::DEFAULT_JMIN, allow_hyphen_values = true)]
    pub jmin: i32,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = zharm_core::family::DEFAULT_SEED)]
    pub seed: u64,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CoreError> {
        if !self.grid.is_power_of_two() || self.grid < 16 {
            return Err(CoreError::InvalidParameter(format!("--grid must be a power of two ≥ 16, got {}", self.grid)));
        }
        if self.halfwidth > self.grid / 2 - 1 {
            return Err(CoreError::InvalidParameter(format!(
                "--halfwidth {} exceeds K/2 - 1 = {}",
                self.halfwidth,
                self.grid / 2 - 1
            )));
        }
        if self.jmin > 0 {
            return Err(CoreError::InvalidParameter("--jmin must be ≤ 0".into()));
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Heat kernel h_t(n) for |n| ≤ nmax by the Bessel and/or quadrature route
    Kernel(KernelArgs),
    /// Apply a symbol F(√Δ) to a sequence
    Apply(ApplyArgs),
    /// Besov, Triebel–Lizorkin, Hardy or ℓ² norm of a sequence
    Norm(NormArgs),
    /// Empirical constant of a heat-kernel decay estimate
    Sweep(SweepArgs),
    /// Calderón reproducing formula, discrete and continuous
    Calderon(CalderonArgs),
    /// Molecular decomposition of a sequence
    Decompose(DecomposeArgs),
    /// Check the molecules of a decomposition against their bounds
    Verify(VerifyArgs),
    /// Riesz transform DΔ^{-1/2} or D*Δ^{-1/2}
    Riesz(RieszArgs),
    /// Apply a multiplier or evaluate its Sobolev condition
    Multiplier(MultiplierArgs),
    /// Largest norm ratio of an operator over the seeded test family
    Probe(ProbeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelRoute {
    Bessel,
    Quadrature,
    Both,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 50)]
    pub nmax: usize,
    #[arg(long, value_enum, default_value_t = KernelRoute::Both)]
    pub route: KernelRoute,
    /// CSV of the values
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ApplyArgs {
    /// Registry name (heat:t, power:k, band:R, psi:j, imagpower:s[:J], riesz[:variant], one) or custom:<file.csv>
    #[arg(long)]
    pub symbol: String,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Declared value of F(0)
    #[arg(long, allow_hyphen_values = true)]
    pub f0: Option<f64>,
    /// Sequence JSON of the result
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormForm {
    /// Sums over dyadic j
    Discrete,
    /// Integrals over t in dt/t
    Continuous,
}

#[derive(Args, Debug)]
pub struct NormArgs {
    /// besov, tl, hardy, h1, l2, or a full spec like besov:0:2:2
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// A number or inf
    #[arg(long, default_value = "2")]
    pub q: String,
    /// Power N of the Hardy area function
    #[arg(long = "n-power", default_value_t = 1)]
    pub n_power: u32,
    #[arg(long, value_enum, default_value_t = NormForm::Discrete)]
    pub form: NormForm,
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKindArg {
    #[value(name = "lem1-ht")]
    Lem1Ht,
    #[value(name = "lem2-htk")]
    Lem2Htk,
    #[value(name = "lem-htk-diff")]
    LemHtkDiff,
    #[value(name = "lem-htk-higher")]
    LemHtkHigher,
    #[value(name = "lem1-htk")]
    Lem1Htk,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKindArg,
    /// Decay order N
    #[arg(long = "N", default_value_t = 1)]
    pub n_order: u32,
    /// Time-derivative order ℓ
    #[arg(long, default_value_t = 1)]
    pub ell: u32,
    /// Difference order k
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Argument of complex time
    #[arg(long = "arg", default_value_t = 0.0, allow_hyphen_values = true)]
    pub arg_z: f64,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub tsteps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub nmin: Option<i64>,
    #[arg(long)]
    pub nmax: Option<i64>,
    /// CSV of every grid point
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalderonArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Gauss points per octave of the continuous formula
    #[arg(long = "points-per-octave", default_value_t = zharm_core::quad::DEFAULT_POINTS_PER_OCTAVE)]
    pub points_per_octave: usize,
    /// Sequence JSON of the discrete reconstruction
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Power M of Δ in a = Δ^M b
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    /// Decay order N recorded on the molecules
    #[arg(long, default_value_t = 3.0)]
    pub decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long = "points-per-octave", default_value_t = zharm_core::molec::DECOMPOSE_POINTS_PER_OCTAVE)]
    pub points_per_octave: usize,
    #[arg(long, default_value_t = zharm_core::molec::DEFAULT_DROP)]
    pub drop: f64,
    /// Coefficient JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Besov,
    Hardy,
    Diff,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Coefficient JSON written by decompose
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FlavorArg::Besov)]
    pub flavor: FlavorArg,
    /// CSV with one row per molecule
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RieszRoute {
    Symbol,
    Subordination,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Forward,
    Backward,
}

#[derive(Args, Debug)]
pub struct RieszArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Forward)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = RieszRoute::Symbol)]
    pub route: RieszRoute,
    /// Relative cross-route tolerance
    #[arg(long, default_value_t = zharm_core::multop::CROSS_ROUTE_TOL)]
    pub tol: f64,
    /// JSON with the result(s)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MultiplierArgs {
    #[arg(long)]
    pub symbol: String,
    /// Evaluate sup_t ‖η δ_t F‖_{W^s_r} over t ≥ 1/2
    #[arg(long = "check-condition")]
    pub check_condition: bool,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// A number in (4, ∞) or inf
    #[arg(long, default_value = "inf")]
    pub r: String,
    /// Weighted kernel bound at this band scale R; the symbol must live in [R/2, R]
    #[arg(long = "kernel-check")]
    pub kernel_check: Option<f64>,
    /// Extra smoothness ε of the kernel check
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub f0: Option<f64>,
    /// JSON report
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeOp {
    Identity,
    Riesz,
    Multiplier,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    pub op: ProbeOp,
    /// Symbol for --op multiplier
    #[arg(long)]
    pub symbol: Option<String>,
    #[arg(long, value_enum, default_value_t = VariantArg::Forward)]
    pub variant: VariantArg,
    #[arg(long, default_value = "tl:0:1:2")]
    pub space: String,
    /// default (20 signals), double (40) or a multiple of 20
    #[arg(long, default_value = "default")]
    pub family: String,
    /// JSON with every ratio
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of a subcommand: its summary and whether a cross-check failed.
pub struct Outcome {
    pub summary: serde_json::Value,
    pub consistent: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Consistency { .. } | CoreError::Quadrature { .. } | CoreError::Truncation { .. }) => 3,
        _ => 2,
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("ZHARM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let name = match &cli.command {
        Command::Kernel(_) => "kernel",
        Command::Apply(_) => "apply",
        Command::Norm(_) => "norm",
        Command::Sweep(_) => "sweep",
        Command::Calderon(_) => "calderon",
        Command::Decompose(_) => "decompose",
        Command::Verify(_) => "verify",
        Command::Riesz(_) => "riesz",
        Command::Multiplier(_) => "multiplier",
        Command::Probe(_) => "probe",
    };
    let cfg = &cli.config;
    let result = cfg.validate().map_err(anyhow::Error::from).and_then(|_| match &cli.command {
        Command::Kernel(a) => cmd::kernel(cfg, a),
        Command::Apply(a) => cmd::apply(cfg, a),
        Command::Norm(a) => cmd::norm(cfg, a),
        Command::Sweep(a) => cmd::sweep(a),
        Command::Calderon(a) => cmd::calderon(cfg, a),
        Command::Decompose(a) => cmd::decompose(cfg, a),
        Command::Verify(a) => cmd::verify(a),
        Command::Riesz(a) => cmd::riesz(a),
        Command::Multiplier(a) => cmd::multiplier(cfg, a),
        Command::Probe(a) => cmd::probe(cfg, a),
    });
    match result {
        Ok(mut o) => {
            if let Some(m) = o.summary.as_object_mut() {
                m.insert("command".into(), json!(name));
                m.insert("status".into(), json!(if o.consistent { "ok" } else { "inconsistent" }));
            }
            io::print_line(&o.summary);
            if o.consistent {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            io::print_line(&json!({
                "command": name,
                "status": "error",
                "error": format!("{e:#}"),
            }));
            eprintln!("zharm {name}: {e:#}");
            ExitCode::from(code)
        }
    }
}
