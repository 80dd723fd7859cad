use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edge_ieq::experiments::{self, ExperimentError, ExperimentPlan, MethodChoice, PlanOutcome};
use edge_ieq::methods::{self, RunReport};
use edge_ieq::mlp::Topology;
use edge_ieq::sensors;

#[derive(Parser)]
#[command(name = "edge-ieq", version, about = "Edge estimation of indoor environment quality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and label an experiment dataset.
    Dataset {
        #[arg(long, default_value_t = 1)]
        experiment: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
    },
    /// Run one or both estimation methods.
    Run(RunArgs),
    /// Time sequential against parallel distributed training.
    Speedup(RunArgs),
    /// Centralized illuminance-scale estimation.
    Illuminance(RunArgs),
    /// Write plot data for a saved report.
    Plotdata {
        /// A report.json written by `run`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Centralized,
    Distributed,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1)]
    experiment: u32,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Repeatable, e.g. 3-6-6-1.
    #[arg(long)]
    topology: Vec<Topology>,
    /// Repeatable.
    #[arg(long)]
    epochs: Vec<usize>,
    /// Repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    nodes: usize,
    #[arg(long, default_value_t = sensors::EXPERIMENT_T_AC)]
    t_ac: f64,
    #[arg(long, default_value_t = 0.85)]
    ta_gate: f64,
    #[arg(long, default_value_t = 0.9)]
    fscore_gate: f64,
    #[arg(long, default_value_t = 0.0)]
    latency_ms: f64,
    /// Also time sequential vs parallel training (distributed runs).
    #[arg(long)]
    speedup: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn plan(&self, default_method: MethodChoice) -> Result<ExperimentPlan, ExperimentError> {
        if !(self.latency_ms >= 0.0 && self.latency_ms.is_finite()) {
            return Err(ExperimentError::Usage("--latency-ms must be a non-negative number".into()));
        }
        let method = match self.method {
            None => default_method,
            Some(MethodArg::Centralized) => MethodChoice::Centralized,
            Some(MethodArg::Distributed) => MethodChoice::Distributed,
            Some(MethodArg::Both) => MethodChoice::Both,
        };
        let mut plan = ExperimentPlan::new(self.experiment, method, self.seed.clone());
        plan.topologies = self.topology.clone();
        plan.epochs = self.epochs.clone();
        plan.out_dir = self.out.clone();
        plan.nodes = self.nodes;
        plan.t_ac = self.t_ac;
        plan.ta_gate = self.ta_gate;
        plan.fscore_gate = self.fscore_gate;
        plan.latency = Duration::from_secs_f64(self.latency_ms / 1000.0);
        plan.speedup = self.speedup;
        Ok(plan)
    }
}

fn print_outcome(outcome: &PlanOutcome) -> ExitCode {
    print!("{}", outcome.human_table());
    for row in &outcome.rows {
        if let Some(r) = &row.report {
            if let (Some(t), Some(sp), Some(ef)) = (&r.timing, r.speedup, r.efficiency) {
                println!(
                    "{} {} seed {}: T_s {:.2} s, T_p {:.2} s, speedup {:.2}, efficiency {:.2}",
                    row.method.name(),
                    row.topology,
                    row.seed,
                    t.t_s,
                    t.t_p,
                    sp,
                    ef
                );
            }
        }
    }
    ExitCode::from(outcome.exit_code() as u8)
}

fn speedup(args: &RunArgs) -> Result<ExitCode, ExperimentError> {
    let plan = args.plan(MethodChoice::Distributed)?;
    plan.validate()?;
    if plan.method != MethodChoice::Distributed {
        return Err(ExperimentError::Usage("speedup needs the distributed method".into()));
    }
    let profiles = sensors::builtin_experiment(plan.exp_id)?;
    println!("{:<14} {:>6} {:>6} {:>10} {:>10} {:>8} {:>10}", "topology", "epochs", "seed", "T_s", "T_p", "speedup", "efficiency");
    for cfg in plan.configs() {
        let (t, _, _) = methods::measure_speedup(&cfg, &profiles).map_err(|source| ExperimentError::Run {
            run: format!("speedup {} seed {}", cfg.topology, cfg.seed),
            source,
        })?;
        let sp = edge_ieq::metrics::speedup(&t).expect("validated timing");
        let ef = edge_ieq::metrics::efficiency(&t).expect("validated timing");
        println!(
            "{:<14} {:>6} {:>6} {:>10.3} {:>10.3} {:>8.2} {:>10.2}",
            cfg.topology, cfg.epochs, cfg.seed, t.t_s, t.t_p, sp, ef
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> Result<ExitCode, ExperimentError> {
    match cli.command {
        Command::Dataset { experiment, seed, out } => {
            let d = experiments::build_dataset(experiment, seed, Some(&out))?;
            let valid = d.examples.iter().filter(|e| e.label == 1).count();
            println!(
                "experiment {experiment}: {} examples ({valid} in range) written to {}",
                d.examples.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => Ok(print_outcome(&experiments::run_plan(&args.plan(MethodChoice::Centralized)?)?)),
        Command::Illuminance(args) => {
            Ok(print_outcome(&experiments::illuminance_run(&args.plan(MethodChoice::Centralized)?)?))
        }
        Command::Speedup(args) => speedup(&args),
        Command::Plotdata { report, out } => {
            let text = std::fs::read_to_string(&report)?;
            let r = RunReport::from_json(&text)
                .map_err(|e| ExperimentError::Usage(format!("{}: {e}", report.display())))?;
            for p in experiments::emit_plot_data(&r, &out)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e @ ExperimentError::Usage(_)) => {
            eprintln!("edge-ieq: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("edge-ieq: {e}");
            ExitCode::FAILURE
        }
    }
}
