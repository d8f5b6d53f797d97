use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcl_core::harness::acceptance::{run_acceptance, CriterionResult};
use mcl_core::harness::{
    builtin_experiments, emit_report, run_experiment, ExperimentConfig, ExperimentKind, HarnessError, OutputFormats, Status,
    VerificationReport,
};
use mcl_core::quadrature::QuadratureSpec;

#[derive(Parser)]
#[command(name = "mcl", version, about = "Verification harness for hyperbolic BVPs, flows on U(n) and odd Chern-Weil forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config
    Verify(VerifyArgs),
    /// List built-in items
    List {
        #[arg(value_enum)]
        what: ListTarget,
        /// Also write each built-in config to `<dir>/<id>.json`
        #[arg(long, value_name = "DIR")]
        write_configs: Option<PathBuf>,
    },
    /// Run the full acceptance suite
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ListTarget {
    Experiments,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Duality,
    Flow,
    Bvp,
    Forms,
    Reduction,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Duality => ExperimentKind::Duality,
            KindArg::Flow => ExperimentKind::Flow,
            KindArg::Bvp => ExperimentKind::Bvp,
            KindArg::Forms => ExperimentKind::Forms,
            KindArg::Reduction => ExperimentKind::Reduction,
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    kind: KindArg,
    /// JSON config with fields {kind, params, tolerances, quadrature, seed}
    #[arg(long)]
    config: PathBuf,
    /// Directory for report files; without it the report goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gauss-Legendre order per axis, overriding the config's quadrature
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    plots: bool,
}

fn configure_threads() -> Result<(), HarnessError> {
    let Ok(raw) = std::env::var("MCL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| HarnessError::Config(format!("MCL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot size the worker pool: {e}")))
}

fn print_summary(report: &VerificationReport) {
    for row in &report.rows {
        println!(
            "{:4}  {:<48} computed {:<24e} reference {:<24e} tol {:e} [{:?}]",
            if row.pass { "ok" } else { "FAIL" },
            row.name,
            row.computed,
            row.reference,
            row.tolerance,
            row.provenance
        );
    }
    println!("{}: {}", report.experiment_id, serde_json::to_value(report.status).unwrap_or_default());
}

fn verify(args: VerifyArgs) -> Result<Status, HarnessError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    let kind = ExperimentKind::from(args.kind);
    if config.kind != kind {
        return Err(HarnessError::Config(format!("config {} has kind {}, not {kind}", args.config.display(), config.kind)));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(order) = args.quad_order {
        config.quadrature = QuadratureSpec::GaussLegendre { order };
    }
    let report = run_experiment(&config)?;
    let mut formats = OutputFormats { json: args.json, csv: args.csv, plots: args.plots };
    if !(formats.json || formats.csv || formats.plots) {
        formats.json = true;
    }
    match &args.out {
        Some(dir) => {
            print_summary(&report);
            for path in emit_report(&report, &formats, dir)? {
                println!("wrote {}", path.display());
            }
        }
        None if args.json => println!("{}", report.to_json_pretty()),
        None => print_summary(&report),
    }
    Ok(report.status)
}

fn print_criterion(r: &CriterionResult) {
    println!("{} {:<4} {:<8.2}s {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.runtime_s, r.detail);
}

fn run(cli: Cli) -> Result<Status, HarnessError> {
    configure_threads()?;
    match cli.command {
        Command::Verify(args) => verify(args),
        Command::List { what: ListTarget::Experiments, write_configs } => {
            if let Some(dir) = &write_configs {
                std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
            }
            for config in builtin_experiments() {
                println!("{:<26} {:<10} {}", config.experiment_id(), config.kind.to_string(), config.params);
                if let Some(dir) = &write_configs {
                    let path = dir.join(format!("{}.json", config.experiment_id()));
                    let text = serde_json::to_string_pretty(&config).expect("configs serialize");
                    std::fs::write(&path, text + "\n").map_err(|source| HarnessError::Io { path, source })?;
                }
            }
            Ok(Status::Pass)
        }
        Command::Selftest => {
            let results = run_acceptance(print_criterion);
            let failed = results.iter().filter(|r| !r.pass).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            Ok(if failed == 0 { Status::Pass } else { Status::Fail })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
