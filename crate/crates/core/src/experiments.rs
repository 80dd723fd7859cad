//! Experiment harness: dataset construction, run plans, result tables and
//! plot data.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::labeling::{self, LabeledExample, LabelingRule};
use crate::methods::{self, Architecture, MethodConfig, MethodError, Quantity, RunReport};
use crate::mlp::Topology;
use crate::sensors::{self, ProfileSpec, SensorError, SensorReading};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{run}: {source}")]
    Run { run: String, source: MethodError },
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Label(#[from] labeling::LabelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Centralized,
    Distributed,
    Both,
}

impl MethodChoice {
    fn architectures(self) -> Vec<Architecture> {
        match self {
            MethodChoice::Centralized => vec![Architecture::Centralized],
            MethodChoice::Distributed => vec![Architecture::Distributed],
            MethodChoice::Both => vec![Architecture::Centralized, Architecture::Distributed],
        }
    }
}

pub fn default_topology(arch: Architecture) -> Topology {
    match arch {
        Architecture::Centralized => "3-6-6-1".parse().expect("valid"),
        Architecture::Distributed => "3-10-10-10-1".parse().expect("valid"),
    }
}

pub fn default_epochs(arch: Architecture) -> usize {
    match arch {
        Architecture::Centralized => 500,
        Architecture::Distributed => 4000,
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub exp_id: u32,
    pub method: MethodChoice,
    /// Empty means the method's default topology.
    pub topologies: Vec<Topology>,
    /// Empty means the method's default epoch count.
    pub epochs: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub nodes: usize,
    pub t_ac: f64,
    pub ta_gate: f64,
    pub fscore_gate: f64,
    pub latency: Duration,
    /// Also measure sequential vs parallel training time (distributed).
    pub speedup: bool,
}

impl ExperimentPlan {
    pub fn new(exp_id: u32, method: MethodChoice, seeds: Vec<u64>) -> Self {
        ExperimentPlan {
            exp_id,
            method,
            topologies: Vec::new(),
            epochs: Vec::new(),
            seeds,
            out_dir: None,
            nodes: 3,
            t_ac: sensors::EXPERIMENT_T_AC,
            ta_gate: 0.85,
            fscore_gate: 0.9,
            latency: Duration::ZERO,
            speedup: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.exp_id, 1 | 2) {
            return Err(ExperimentError::Usage(format!("unknown experiment {}; use 1 or 2", self.exp_id)));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::Usage("at least one --seed is required".into()));
        }
        if self.exp_id == 2 && self.method != MethodChoice::Distributed {
            return Err(ExperimentError::Usage(
                "experiment 2 runs only with the distributed method".into(),
            ));
        }
        if self.epochs.contains(&0) {
            return Err(ExperimentError::Usage("epochs must be positive".into()));
        }
        Ok(())
    }

    /// One method configuration per (architecture, topology, epochs, seed).
    pub fn configs(&self) -> Vec<MethodConfig> {
        let mut out = Vec::new();
        for arch in self.method.architectures() {
            let topologies =
                if self.topologies.is_empty() { vec![default_topology(arch)] } else { self.topologies.clone() };
            let epochs = if self.epochs.is_empty() { vec![default_epochs(arch)] } else { self.epochs.clone() };
            for topo in &topologies {
                for &ep in &epochs {
                    for &seed in &self.seeds {
                        let mut cfg = match arch {
                            Architecture::Centralized => MethodConfig::centralized(topo.clone(), ep, seed),
                            Architecture::Distributed => {
                                MethodConfig::distributed(topo.clone(), ep, self.nodes, seed)
                            }
                        };
                        cfg.t_ac = self.t_ac;
                        cfg.ta_gate = self.ta_gate;
                        cfg.fscore_gate = self.fscore_gate;
                        cfg.latency = self.latency;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

pub struct BuiltDataset {
    pub readings: Vec<Vec<SensorReading>>,
    pub examples: Vec<LabeledExample>,
}

/// Generates the node series of an experiment, fuses them into per-instant
/// triples and labels them. With `out`, writes `node<id>.csv` per node plus
/// `labeled.csv`.
pub fn build_dataset(exp_id: u32, seed: u64, out: Option<&Path>) -> Result<BuiltDataset> {
    let profiles = sensors::builtin_experiment(exp_id)?;
    let readings = profiles
        .iter()
        .map(|p| {
            sensors::generate_profile_subsampled(
                p,
                sensors::EXPERIMENT_T_AC,
                sensors::EXPERIMENT_DURATION,
                sensors::READINGS_PER_PERIOD,
                seed,
            )
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let triples: Vec<[f64; 3]> = (0..readings[0].len())
        .map(|i| [readings[0][i].temperature, readings[1][i].temperature, readings[2][i].temperature])
        .collect();
    let examples = labeling::label_triples(&triples, &LabelingRule::temperature())?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for (p, series) in profiles.iter().zip(&readings) {
            sensors::write_series_csv(dir.join(format!("node{}.csv", p.node_id)), series)?;
        }
        labeling::write_examples_csv(dir.join("labeled.csv"), &examples)?;
    }
    Ok(BuiltDataset { readings, examples })
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanRow {
    pub method: Architecture,
    pub topology: String,
    pub epochs: usize,
    pub seed: u64,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

impl PlanRow {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.success)
    }

    fn name(&self) -> String {
        format!("{}-{}-e{}-s{}", self.method.name(), self.topology, self.epochs, self.seed)
    }
}

pub struct PlanOutcome {
    pub rows: Vec<PlanRow>,
}

impl PlanOutcome {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(PlanRow::passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    /// Fixed-width table, one row per run.
    pub fn human_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:<14} {:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {:>5} {:>8} {:>8}  status",
            "method", "topology", "epochs", "seed", "TA", "P", "R", "F", "Acc", "RMSE", "MAE"
        );
        for row in &self.rows {
            match &row.report {
                Some(r) => {
                    let e = &r.evaluation;
                    let _ = writeln!(
                        s,
                        "{:<12} {:<14} {:>6} {:>6} {:>5.2} {:>5.2} {:>5.2} {:>5.2} {:>5.2} {:>8.4} {:>8.4}  {}",
                        row.method.name(),
                        row.topology,
                        row.epochs,
                        row.seed,
                        r.ta,
                        e.precision,
                        e.recall,
                        e.f_score,
                        e.accuracy,
                        e.rmse,
                        e.mae,
                        if r.success { "ok" } else { "gate unmet" }
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "{:<12} {:<14} {:>6} {:>6}  failed: {}",
                        row.method.name(),
                        row.topology,
                        row.epochs,
                        row.seed,
                        row.error.as_deref().unwrap_or("unknown")
                    );
                }
            }
        }
        s
    }

    /// Comma-separated table with no timing columns, so that identical
    /// plans give identical bytes.
    pub fn machine_table(&self) -> String {
        let mut s = String::from(
            "method,topology,epochs,seed,success,rounds,ta,tp,fp,fn,tn,precision,recall,f_score,accuracy,rmse,mae\n",
        );
        for row in &self.rows {
            match &row.report {
                Some(r) => {
                    let e = &r.evaluation;
                    let c = &e.confusion;
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{:?},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
                        row.method.name(),
                        row.topology,
                        row.epochs,
                        row.seed,
                        r.success,
                        r.rounds,
                        r.ta,
                        c.tp,
                        c.fp,
                        c.fn_,
                        c.tn,
                        e.precision,
                        e.recall,
                        e.f_score,
                        e.accuracy,
                        e.rmse,
                        e.mae
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},false,,,,,,,,,,,,",
                        row.method.name(),
                        row.topology,
                        row.epochs,
                        row.seed
                    );
                }
            }
        }
        s
    }

    /// Wall-clock and busy-time columns, which vary between repetitions.
    pub fn timing_table(&self) -> String {
        let mut s = String::from("run,node,role,busy_s,retrain_busy_s,t_s,t_p,speedup,efficiency\n");
        for row in &self.rows {
            let Some(r) = &row.report else { continue };
            let (t_s, t_p) = r.timing.as_ref().map(|t| (t.t_s.to_string(), t.t_p.to_string())).unwrap_or_default();
            let sp = r.speedup.map(|v| v.to_string()).unwrap_or_default();
            let ef = r.efficiency.map(|v| v.to_string()).unwrap_or_default();
            for b in &r.busy {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    row.name(),
                    b.node,
                    b.role,
                    b.seconds,
                    b.retrain_seconds,
                    t_s,
                    t_p,
                    sp,
                    ef
                );
            }
        }
        s
    }
}

/// Report JSON without the timing and busy-time fields.
pub fn deterministic_json(report: &RunReport) -> String {
    let mut v = serde_json::to_value(report).expect("report is serializable");
    if let Some(map) = v.as_object_mut() {
        for key in ["phases", "timing", "speedup", "efficiency", "busy"] {
            map.remove(key);
        }
    }
    serde_json::to_string_pretty(&v).expect("value is serializable")
}

fn run_one(cfg: &MethodConfig, profiles: &[ProfileSpec], speedup: bool) -> std::result::Result<RunReport, MethodError> {
    match cfg.architecture {
        Architecture::Centralized => methods::run_centralized(cfg, profiles),
        Architecture::Distributed => {
            let mut report = methods::run_distributed(cfg, profiles)?;
            if speedup {
                let (timing, _, _) = methods::measure_speedup(cfg, profiles)?;
                methods::attach_timing(&mut report, timing)?;
            }
            Ok(report)
        }
    }
}

fn run_configs(plan: &ExperimentPlan, configs: Vec<MethodConfig>, profiles: &[ProfileSpec]) -> Result<PlanOutcome> {
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let mut row = PlanRow {
            method: cfg.architecture,
            topology: cfg.topology.to_string(),
            epochs: cfg.epochs,
            seed: cfg.seed,
            report: None,
            error: None,
        };
        match run_one(&cfg, profiles, plan.speedup) {
            Ok(r) => row.report = Some(r),
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    let outcome = PlanOutcome { rows };
    if let Some(dir) = &plan.out_dir {
        write_outcome(&outcome, dir)?;
    }
    Ok(outcome)
}

/// Writes `results.txt`, `results.csv`, `timing.csv` and one directory per
/// successful run with its report and plot data.
pub fn write_outcome(outcome: &PlanOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.txt"), outcome.human_table())?;
    fs::write(dir.join("results.csv"), outcome.machine_table())?;
    fs::write(dir.join("timing.csv"), outcome.timing_table())?;
    for row in &outcome.rows {
        if let Some(r) = &row.report {
            let run_dir = dir.join(row.name());
            fs::create_dir_all(&run_dir)?;
            fs::write(run_dir.join("report.json"), deterministic_json(r))?;
            fs::write(run_dir.join("report.txt"), r.to_text())?;
            emit_plot_data(r, &run_dir)?;
        }
    }
    Ok(())
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    let profiles = sensors::builtin_experiment(plan.exp_id)?;
    run_configs(plan, plan.configs(), &profiles)
}

/// Centralized illuminance-scale estimation. Only the two small topologies
/// are supported; epochs default to 1000.
pub fn illuminance_run(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    if plan.method != MethodChoice::Centralized {
        return Err(ExperimentError::Usage("illuminance runs use the centralized method".into()));
    }
    let allowed = ["3-2-2-1", "3-6-6-1"];
    if let Some(t) = plan.topologies.iter().find(|t| !allowed.contains(&t.to_string().as_str())) {
        return Err(ExperimentError::Usage(format!(
            "illuminance topology {t} unsupported; use 3-2-2-1 or 3-6-6-1"
        )));
    }
    let mut plan = plan.clone();
    if plan.topologies.is_empty() {
        plan.topologies = allowed.iter().map(|t| t.parse().expect("valid")).collect();
    }
    if plan.epochs.is_empty() {
        plan.epochs = vec![1000];
    }
    let configs = plan
        .configs()
        .into_iter()
        .map(|mut c| {
            c.quantity = Quantity::Illuminance;
            c
        })
        .collect();
    let profiles = sensors::builtin_experiment(plan.exp_id)?;
    run_configs(&plan, configs, &profiles)
}

/// Writes `forecast.csv` (index, inputs, estimate), `scatter.csv`
/// (expected, estimate) and `loss.csv` (epoch, loss) into `dir`.
pub fn emit_plot_data(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let inputs = report.global_forecast.first().map(|p| p.inputs.len()).unwrap_or(3);
    let mut forecast = String::from("index");
    for k in 1..=inputs {
        let _ = write!(forecast, ",x{k}");
    }
    forecast.push_str(",y_hat\n");
    let mut scatter = String::from("y,y_hat\n");
    for p in &report.global_forecast {
        let _ = write!(forecast, "{}", p.index);
        for x in &p.inputs {
            let _ = write!(forecast, ",{x:?}");
        }
        let _ = writeln!(forecast, ",{:?}", p.estimate);
        let _ = writeln!(scatter, "{:?},{:?}", p.expected, p.estimate);
    }
    let files = [
        (dir.join("forecast.csv"), forecast),
        (dir.join("scatter.csv"), scatter),
        (dir.join("loss.csv"), crate::mlp::loss_trace_csv(&report.loss_trace)),
    ];
    let mut out = Vec::new();
    for (path, text) in files {
        fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}
