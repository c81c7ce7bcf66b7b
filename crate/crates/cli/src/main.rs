mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mase::experiment::{compare, mask_table, run_repeated, sweep_k, Method};
use mase::linalg::Backend;
use mase::measurement::{generate_measurements, GenerationConfig, MeasurementSet, MeasurementType};
use mase::network::{parse_case, BusBranchNetwork, CaseFormat};
use mase::partition::{load_partition_file, partition_network, Partition, PartitionFile};
use mase::solver::SolverConfig;

use output::{OutputFormat, Sink};

#[derive(Parser)]
#[command(
    name = "mase",
    version,
    about = "Multi-area WLS state estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve repeatedly and report per-run and steady-state timings.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "multiarea")]
        method: Method,
        /// Number of areas when no partition file is given.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Multi-area runs over a list of area counts.
    SweepK {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,6,8")]
        k: Vec<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Remove whole flow-measurement families and re-solve.
    Mask {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "multiarea")]
        method: Method,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "Pf,Pt,Qf,Qt")]
        families: Vec<MeasurementType>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a synthetic measurement file for a case.
    GenMeasurements {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Measurement file format; defaults from the --out extension.
        #[arg(long)]
        output_format: Option<OutputFormat>,
    },
    /// Partition a case into k connected areas and write the assignment.
    Partition {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both methods on the same inputs and diff the estimates.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long)]
    case: PathBuf,
    /// Case format (matpower or json); inferred from the extension by default.
    #[arg(long)]
    format: Option<CaseFormat>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    sigma_vm: f64,
    #[arg(long, default_value_t = 0.02)]
    sigma_power: f64,
    /// Multiplies the noise draws; 0 gives noiseless measurements.
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
}

#[derive(Args)]
struct InputArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Measurement file (json or csv). Generated from --seed when absent.
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Partition file written by `mase partition`; overrides --k.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 11)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    inner_steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    deterministic: bool,
    #[arg(long, default_value = "auto")]
    backend: Backend,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    output_format: OutputFormat,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_outer_iterations: self.max_iters,
            inner_gn_steps: self.inner_steps,
            convergence_tol: self.tol,
            deterministic: self.deterministic,
            backend: self.backend,
            record_iterates: false,
        }
    }
}

impl NoiseArgs {
    fn config(&self) -> GenerationConfig {
        GenerationConfig {
            sigma_vm: self.sigma_vm,
            sigma_power: self.sigma_power,
            noise_scale: self.noise_scale,
            ..GenerationConfig::default().with_seed(self.seed)
        }
    }
}

type CliResult<T> = Result<T, String>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

impl CaseArgs {
    fn load(&self) -> CliResult<BusBranchNetwork> {
        let format = self
            .format
            .unwrap_or_else(|| CaseFormat::from_path(&self.case));
        parse_case(&read(&self.case)?, format).map_err(|e| format!("{}: {e}", self.case.display()))
    }
}

impl InputArgs {
    fn load(&self) -> CliResult<(BusBranchNetwork, MeasurementSet)> {
        let net = self.case.load()?;
        let ms = match &self.measurements {
            Some(path) => {
                let text = read(path)?;
                let parsed = if is_csv(path) {
                    MeasurementSet::from_csv(&net, &text)
                } else {
                    MeasurementSet::from_json(&net, &text)
                };
                parsed.map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => generate_measurements(&net, &self.noise.config()),
        };
        Ok((net, ms))
    }

    fn partition(&self, net: &BusBranchNetwork, k: usize) -> CliResult<Partition> {
        match &self.partition {
            Some(path) => {
                let file: PartitionFile = serde_json::from_str(&read(path)?)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                load_partition_file(net, &file).map_err(|e| format!("{}: {e}", path.display()))
            }
            None => partition_network(net, k, self.noise.seed).map_err(|e| e.to_string()),
        }
    }
}

fn execute(command: Command) -> CliResult<bool> {
    match command {
        Command::Run {
            input,
            solver,
            method,
            k,
            out,
        } => {
            let (net, ms) = input.load()?;
            let part = match method {
                Method::Multiarea => Some(input.partition(&net, k)?),
                Method::Centralized => None,
            };
            let (_, summary) = run_repeated(
                &net,
                &ms,
                method,
                part.as_ref(),
                &solver.config(),
                solver.repeats,
            )
            .map_err(|e| e.to_string())?;
            Sink::new(out.out, out.output_format).run(&summary)?;
            Ok(summary.converged)
        }
        Command::SweepK {
            input,
            solver,
            k,
            out,
        } => {
            let (net, ms) = input.load()?;
            let rows = sweep_k(
                &net,
                &ms,
                &k,
                input.noise.seed,
                &solver.config(),
                solver.repeats,
            );
            for row in rows.iter().filter(|r| r.status != "ok") {
                eprintln!("warning: k={}: {}", row.k, row.status);
            }
            Sink::new(out.out, out.output_format).table(&rows)?;
            // Infeasible k are skipped rather than run.
            Ok(rows
                .iter()
                .filter(|r| !r.status.starts_with("infeasible"))
                .all(|r| r.converged))
        }
        Command::Mask {
            input,
            solver,
            method,
            k,
            families,
            out,
        } => {
            let (net, ms) = input.load()?;
            let part = match method {
                Method::Multiarea => Some(input.partition(&net, k)?),
                Method::Centralized => None,
            };
            let rows = mask_table(
                &net,
                &ms,
                &families,
                method,
                part.as_ref(),
                &solver.config(),
                solver.repeats,
            );
            Sink::new(out.out, out.output_format).table(&rows)?;
            Ok(rows.iter().all(|r| r.converged))
        }
        Command::GenMeasurements {
            case,
            noise,
            out,
            output_format,
        } => {
            let net = case.load()?;
            let ms = generate_measurements(&net, &noise.config());
            let csv = match output_format {
                Some(f) => f == OutputFormat::Csv,
                None => out.as_deref().is_some_and(is_csv),
            };
            let text = if csv { ms.to_csv() } else { ms.to_json() };
            output::write_text(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Partition { case, k, seed, out } => {
            let net = case.load()?;
            let part = partition_network(&net, k, seed).map_err(|e| e.to_string())?;
            eprintln!(
                "k={} sizes={:?} cut_branches={} boundary_buses={}",
                part.k,
                part.area_sizes(),
                part.cut_branches.len(),
                part.boundary_buses.len()
            );
            let text = serde_json::to_string_pretty(&part.to_file()).map_err(|e| e.to_string())?;
            output::write_text(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Compare {
            input,
            solver,
            k,
            out,
        } => {
            let (net, ms) = input.load()?;
            let part = input.partition(&net, k)?;
            let cmp = compare(&net, &ms, &part, &solver.config(), solver.repeats)
                .map_err(|e| e.to_string())?;
            Sink::new(out.out, out.output_format).comparison(&cmp)?;
            Ok(cmp.centralized.converged && cmp.multiarea.converged)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("not every run converged");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
