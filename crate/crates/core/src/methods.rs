//! The centralized and distributed estimation methods.
//!
//! Centralized: every node publishes its sensor frames on the broker, one
//! central context fuses them, labels, trains and tests behind the TA and
//! F-score gates, then keeps retraining on small batches of fresh data.
//!
//! Distributed: every rank owns a shard of the acquisitions and trains
//! locally. Training runs in synchronization rounds; after each round the
//! slaves send their weights to rank 0, which averages them and sends the
//! average back as the next starting point. The master then tests the
//! averaged model on the pooled test sets and emits the global forecast.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cputime::BusyClock;
use crate::frame::{self, FrameError, FrameTimestamp, FrameType, Measurement, SensorFrame, SensorId};
use crate::labeling::{self, IlluminanceRule, LabelError, LabeledExample, LabelingRule};
use crate::metrics::{self, Evaluation, MetricError, TimingPair};
use crate::mlp::{self, AdamState, Dataset, MlpError, MlpNetwork, Normalizer, Topology, TrainingConfig};
use crate::sensors::{self, CurrentSenseConfig, ProfileSpec, SensorError, SensorReading};
use crate::store::{Store, StoreError};
use crate::transport::{
    self, Broker, Communicator, PayloadKind, RankEndpoint, Topic, TransportError,
};

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "{phase} gate not reached after {rounds} rounds (TA {ta:.3}, F-score {f_score:.3})"
    )]
    GateNotReached { phase: &'static str, rounds: usize, ta: f64, f_score: f64 },
    #[error("rank {rank}: {source}")]
    Rank { rank: usize, source: Box<MethodError> },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

type Result<T> = std::result::Result<T, MethodError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Centralized,
    Distributed,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Centralized => "centralized",
            Architecture::Distributed => "distributed",
        }
    }
}

/// What the network estimates from the three node readings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Temperature,
    Illuminance,
}

impl Quantity {
    pub fn channel(self) -> SensorId {
        match self {
            Quantity::Temperature => SensorId::Temperature,
            Quantity::Illuminance => SensorId::Illuminance,
        }
    }

    /// Tolerance for both training accuracy and estimate labels.
    pub fn tolerance(self) -> f64 {
        match self {
            Quantity::Temperature => labeling::TEMPERATURE_TOLERANCE,
            Quantity::Illuminance => labeling::ILLUMINANCE_TOLERANCE,
        }
    }

    /// Labels fused rows of node values; `index` is kept from the row.
    pub fn label(self, rows: &[(usize, Vec<f64>)]) -> Result<Vec<LabeledExample>> {
        let mut out = Vec::with_capacity(rows.len());
        match self {
            Quantity::Temperature => {
                let rule = LabelingRule::temperature();
                for (index, x) in rows {
                    if x.len() != 3 {
                        return Err(MethodError::Config(format!(
                            "temperature labeling needs 3 nodes, got {}",
                            x.len()
                        )));
                    }
                    if x.iter().any(|&v| labeling::is_temperature_outlier(v)) {
                        continue;
                    }
                    let (expected, label) = labeling::expected_output(x[0], x[1], x[2], &rule)?;
                    out.push(LabeledExample { index: *index, inputs: x.clone(), expected, label });
                }
            }
            Quantity::Illuminance => {
                let rule = IlluminanceRule::default();
                for (index, x) in rows {
                    if x.len() != 3 {
                        return Err(MethodError::Config(format!(
                            "illuminance labeling needs 3 nodes, got {}",
                            x.len()
                        )));
                    }
                    let codes = [x[0] as u16, x[1] as u16, x[2] as u16];
                    let (expected, label) = rule.expected(codes)?;
                    out.push(LabeledExample { index: *index, inputs: x.clone(), expected, label });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub architecture: Architecture,
    pub quantity: Quantity,
    /// Compute ranks of the distributed method; ignored when centralized.
    pub nodes: usize,
    pub t_ac: f64,
    /// Length of the phase-1 acquisition, seconds.
    pub duration: f64,
    /// Readings taken per node inside each acquisition period.
    pub per_period: usize,
    pub topology: Topology,
    pub epochs: usize,
    /// Epochs between weight averages in distributed training.
    pub sync_epochs: usize,
    /// Epochs of each warm-started retraining on a small batch.
    pub retrain_epochs: usize,
    pub ta_gate: f64,
    pub fscore_gate: f64,
    /// Acquisition periods between retraining cycles.
    pub retrain_period: usize,
    /// New examples per retraining cycle, over all nodes.
    pub retrain_batch: usize,
    pub retrain_cycles: usize,
    pub max_rounds: usize,
    pub train_fraction: f64,
    pub learning_rate: f64,
    /// Step size of the retraining cycles; small batches need smaller
    /// steps to refine rather than overwrite the model.
    pub retrain_learning_rate: f64,
    pub batch_size: Option<usize>,
    pub ema_momentum: Option<f64>,
    pub seed: u64,
    pub latency: Duration,
}

impl MethodConfig {
    pub fn centralized(topology: Topology, epochs: usize, seed: u64) -> Self {
        MethodConfig {
            architecture: Architecture::Centralized,
            quantity: Quantity::Temperature,
            nodes: 3,
            t_ac: sensors::EXPERIMENT_T_AC,
            duration: sensors::EXPERIMENT_DURATION,
            per_period: sensors::READINGS_PER_PERIOD,
            topology,
            epochs,
            sync_epochs: 100,
            retrain_epochs: 20,
            ta_gate: 0.85,
            fscore_gate: 0.9,
            retrain_period: 10,
            retrain_batch: 30,
            retrain_cycles: 3,
            max_rounds: 5,
            train_fraction: 0.7,
            learning_rate: 0.01,
            retrain_learning_rate: 0.001,
            batch_size: Some(32),
            ema_momentum: Some(0.99),
            seed,
            latency: Duration::ZERO,
        }
    }

    pub fn distributed(topology: Topology, epochs: usize, nodes: usize, seed: u64) -> Self {
        MethodConfig {
            architecture: Architecture::Distributed,
            nodes,
            retrain_batch: 10 * nodes,
            ..MethodConfig::centralized(topology, epochs, seed)
        }
    }

    pub fn validate(&self, profiles: &[ProfileSpec]) -> Result<()> {
        let bad = |m: String| Err(MethodError::Config(m));
        if profiles.len() != self.topology.inputs() {
            return bad(format!(
                "{} node profiles for a {} topology",
                profiles.len(),
                self.topology
            ));
        }
        for (name, g) in [("ta_gate", self.ta_gate), ("fscore_gate", self.fscore_gate)] {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("{name} {g} must be positive"));
            }
        }
        if self.architecture == Architecture::Distributed && self.nodes == 0 {
            return bad("distributed run needs at least one rank".into());
        }
        if self.epochs == 0 || self.sync_epochs == 0 || self.retrain_epochs == 0 {
            return bad("epoch counts must be positive".into());
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if self.retrain_period == 0 || self.retrain_batch == 0 {
            return bad("retrain period and batch must be positive".into());
        }
        if !(self.t_ac > 0.0) || !(self.duration >= self.t_ac) || self.per_period == 0 {
            return bad("acquisition timing must be positive".into());
        }
        Ok(())
    }

    fn training(&self, epochs: usize, seed: u64) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate,
            epochs,
            tol: self.quantity.tolerance(),
            seed,
            batch_size: self.batch_size,
            ema_momentum: self.ema_momentum,
            ..TrainingConfig::default()
        }
    }

    fn retraining(&self, seed: u64) -> TrainingConfig {
        TrainingConfig { learning_rate: self.retrain_learning_rate, ..self.training(self.retrain_epochs, seed) }
    }

    fn ranks(&self) -> usize {
        match self.architecture {
            Architecture::Centralized => 1,
            Architecture::Distributed => self.nodes,
        }
    }

    /// Readings per acquisition period in the live stream used for
    /// retraining, so a cycle of `retrain_period` periods yields
    /// `retrain_batch` examples.
    fn live_per_period(&self) -> usize {
        self.retrain_batch.div_ceil(self.retrain_period).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: u8,
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeBusy {
    pub node: usize,
    pub role: String,
    /// CPU seconds spent computing up to the final test.
    pub seconds: f64,
    /// CPU seconds spent in the retraining cycles.
    pub retrain_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub index: usize,
    pub inputs: Vec<f64>,
    pub expected: f64,
    pub estimate: f64,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Simulated start of the cycle's acquisition window, seconds.
    pub t_start: f64,
    pub examples: usize,
    pub f_score: f64,
    pub accuracy: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub architecture: Architecture,
    pub quantity: Quantity,
    pub topology: String,
    pub epochs: usize,
    pub seed: u64,
    pub nodes: usize,
    pub success: bool,
    /// Training/testing rounds used; 1 when both gates passed first time.
    pub rounds: usize,
    pub examples: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub ta: f64,
    pub evaluation: Evaluation,
    #[serde(default)]
    pub phases: Vec<PhaseTiming>,
    #[serde(default)]
    pub timing: Option<TimingPair>,
    #[serde(default)]
    pub speedup: Option<f64>,
    #[serde(default)]
    pub efficiency: Option<f64>,
    #[serde(default)]
    pub busy: Vec<NodeBusy>,
    pub global_forecast: Vec<ForecastPoint>,
    pub local_forecasts: Vec<Vec<ForecastPoint>>,
    /// Loss per epoch of the central (or master) model's main training.
    pub loss_trace: Vec<f64>,
    pub iterations: Vec<IterationReport>,
    pub model: MlpNetwork,
    pub normalizer: Normalizer,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Table-style summary: one header block, then per-node busy time and
    /// the retraining iterations.
    pub fn to_text(&self) -> String {
        let e = &self.evaluation;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:<14} {:>6} {:>5} {:>5} {:>5} {:>5} {:>8} {:>8} {:>8}",
            "method", "topology", "epochs", "TA", "P", "R", "F", "Acc", "RMSE", "MAE"
        );
        let _ = writeln!(
            s,
            "{:<12} {:<14} {:>6} {:>5.2} {:>5.2} {:>5.2} {:>5.2} {:>8.2} {:>8.4} {:>8.4}",
            self.architecture.name(),
            self.topology,
            self.epochs,
            self.ta,
            e.precision,
            e.recall,
            e.f_score,
            e.accuracy,
            e.rmse,
            e.mae
        );
        let c = &e.confusion;
        let _ = writeln!(
            s,
            "quantity {:?}  seed {}  rounds {}  success {}  confusion tp={} fp={} fn={} tn={}",
            self.quantity, self.seed, self.rounds, self.success, c.tp, c.fp, c.fn_, c.tn
        );
        let _ = writeln!(
            s,
            "examples {} (train {}, test {})",
            self.examples, self.train_examples, self.test_examples
        );
        if let (Some(t), Some(sp), Some(ef)) = (&self.timing, self.speedup, self.efficiency) {
            let _ = writeln!(
                s,
                "T_s {:.2} s  T_p {:.2} s  processors {}  speedup {:.2}  efficiency {:.2}",
                t.t_s, t.t_p, t.processors, sp, ef
            );
        }
        s.push_str("phases:\n");
        for p in &self.phases {
            let _ = writeln!(s, "  {} {:<24} {:>9.3} s", p.phase, p.name, p.seconds);
        }
        s.push_str("busy time:\n");
        for b in &self.busy {
            let _ = writeln!(
                s,
                "  node {} {:<8} {:>9.3} s  (+{:.3} s retraining)",
                b.node, b.role, b.seconds, b.retrain_seconds
            );
        }
        if !self.iterations.is_empty() {
            s.push_str("retraining iterations:\n");
            for it in &self.iterations {
                let _ = writeln!(
                    s,
                    "  {:>3} t={:>7.1} s  n={:<3} F {:.3}  Acc {:.3}  RMSE {:.4}",
                    it.iteration, it.t_start, it.examples, it.f_score, it.accuracy, it.rmse
                );
            }
        }
        s
    }
}

/// Per-node busy seconds of a finished run.
pub fn busy_time_report(run: &RunReport) -> Vec<(usize, f64)> {
    run.busy.iter().map(|b| (b.node, b.seconds)).collect()
}

/// Well-mixed seed derivation (splitmix64 finalizer).
pub(crate) fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED69));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const LIVE_STREAM: u64 = 0x6C69_7665;

fn base_timestamp() -> FrameTimestamp {
    FrameTimestamp::new(2023, 6, 15, 8, 0, 0, 0).expect("valid base timestamp")
}

fn timestamp_at(t: f64) -> FrameTimestamp {
    base_timestamp().add_millis((t * 1000.0).round() as u64)
}

/// One sensor frame carrying every channel of a reading.
pub fn reading_frame(r: &SensorReading) -> Result<SensorFrame> {
    let amps = r.current_amps(&CurrentSenseConfig::default());
    let ms = vec![
        Measurement::new(SensorId::Temperature, r.temperature as f32),
        Measurement::new(SensorId::RelativeHumidity, r.rh as f32),
        Measurement::new(SensorId::Illuminance, r.illuminance_digital as f32),
        Measurement::new(SensorId::Co2, r.co2 as f32),
        Measurement::new(SensorId::Current, amps as f32),
        Measurement::new(SensorId::Voc, r.voc as f32),
    ];
    Ok(SensorFrame::sensor_data(r.node_id, timestamp_at(r.t), ms)?)
}

fn end_of_stream(node_id: u32) -> Result<SensorFrame> {
    Ok(SensorFrame::new(FrameType::ControlData, node_id, base_timestamp(), vec![])?)
}

fn store_frame(store: &Store, f: &SensorFrame) -> Result<()> {
    for m in &f.measurements {
        store.append(f.timestamp, f.header.node_id, m.sensor, m.value as f64)?;
    }
    Ok(())
}

/// Raw acquisitions of all sensing nodes: the phase-1 pass and the later
/// live pass that feeds retraining.
pub struct Acquisition {
    pub main: Vec<Vec<SensorReading>>,
    pub live: Vec<Vec<SensorReading>>,
}

pub fn acquire(cfg: &MethodConfig, profiles: &[ProfileSpec]) -> Result<Acquisition> {
    let main = profiles
        .iter()
        .map(|p| {
            sensors::generate_profile_subsampled(p, cfg.t_ac, cfg.duration, cfg.per_period, cfg.seed)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let live = profiles
        .iter()
        .map(|p| {
            sensors::generate_profile_subsampled(
                p,
                cfg.t_ac,
                cfg.duration,
                cfg.live_per_period(),
                cfg.seed ^ LIVE_STREAM,
            )
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Acquisition { main, live })
}

/// Round-trips readings through the frame codec and joins the sensing
/// nodes' values by timestamp. Rows missing a node are dropped.
fn fuse_frames(frames: &[SensorFrame], node_ids: &[u32], channel: SensorId) -> Vec<(FrameTimestamp, Vec<f64>)> {
    let mut rows: BTreeMap<FrameTimestamp, Vec<Option<f64>>> = BTreeMap::new();
    for f in frames {
        let Some(pos) = node_ids.iter().position(|&n| n == f.header.node_id) else {
            continue;
        };
        if let Some(v) = f.measurement(channel) {
            rows.entry(f.timestamp).or_insert_with(|| vec![None; node_ids.len()])[pos] = Some(v as f64);
        }
    }
    rows.into_iter()
        .filter_map(|(t, vals)| vals.into_iter().collect::<Option<Vec<f64>>>().map(|v| (t, v)))
        .collect()
}

fn eval(
    net: &MlpNetwork,
    norm: &Normalizer,
    test: &[LabeledExample],
    tol: f64,
) -> Result<(Evaluation, Vec<ForecastPoint>)> {
    if test.is_empty() {
        return Err(MethodError::Protocol("empty test set".into()));
    }
    let data = Dataset::from_examples(test).normalized(norm);
    let y_hat = net.predict_all(&data.inputs)?;
    let est = y_hat
        .iter()
        .zip(&data.targets)
        .map(|(p, y)| labeling::label_estimate(*y, *p, tol))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ev = Evaluation::compute(&data.labels, &est, &data.targets, &y_hat)?;
    let mut points: Vec<ForecastPoint> = test
        .iter()
        .zip(&y_hat)
        .map(|(e, p)| ForecastPoint {
            index: e.index,
            inputs: e.inputs.clone(),
            expected: e.expected,
            estimate: *p,
            label: e.label,
        })
        .collect();
    points.sort_by_key(|p| p.index);
    Ok((ev, points))
}

fn train_set(examples: &[LabeledExample], norm: &Normalizer) -> Dataset {
    Dataset::from_examples(examples).normalized(norm)
}

fn initial_network(cfg: &MethodConfig, train: &Dataset) -> MlpNetwork {
    let mut net = MlpNetwork::glorot(&cfg.topology, mix(cfg.seed, 1, 0));
    // start the linear output at the target mean
    let mean = train.targets.iter().sum::<f64>() / train.len().max(1) as f64;
    net.set_output_bias(mean);
    net
}

// ---------------------------------------------------------------------------
// centralized

enum NodeRequest {
    More(usize),
    Stop,
}

fn parse_request(payload: &[u8]) -> Option<NodeRequest> {
    let text = std::str::from_utf8(payload).ok()?;
    let mut parts = text.split_whitespace();
    match parts.next()? {
        "more" => parts.next()?.parse().ok().map(NodeRequest::More),
        "stop" => Some(NodeRequest::Stop),
        _ => None,
    }
}

fn data_topic(node_id: u32) -> Topic {
    Topic::new(format!("ieq/node/{node_id}")).expect("non-empty")
}

fn control_topic() -> Topic {
    Topic::new("ieq/control").expect("non-empty")
}

struct NodeOutcome {
    busy: Duration,
}

/// A sensing node of the centralized method: stores its readings, publishes
/// the phase-1 frames, then serves live readings on request.
fn central_node(
    broker: &Broker,
    control: transport::Subscription,
    main: &[SensorReading],
    live: &[SensorReading],
) -> Result<NodeOutcome> {
    let mut clock = BusyClock::default();
    let node_id = main.first().map(|r| r.node_id).unwrap_or(0);
    let store = Store::in_memory();
    let (frames, live_frames) = clock.measure(|| -> Result<_> {
        let mut frames = Vec::with_capacity(main.len());
        for r in main {
            let f = reading_frame(r)?;
            store_frame(&store, &f)?;
            frames.push(frame::encode_frame(&f)?);
        }
        let live = live.iter().map(|r| Ok(frame::encode_frame(&reading_frame(r)?)?)).collect::<Result<Vec<_>>>()?;
        Ok((frames, live))
    })?;
    let mut publisher = broker.publisher()?;
    let topic = data_topic(node_id);
    let end = frame::encode_frame(&end_of_stream(node_id)?)?;
    for f in &frames {
        publisher.publish(&topic, f)?;
    }
    publisher.publish(&topic, &end)?;
    let mut next = 0;
    loop {
        let env = match control.recv() {
            Ok(env) => env,
            Err(TransportError::BrokerStopped) => break,
            Err(e) => return Err(e.into()),
        };
        match parse_request(&env.payload) {
            Some(NodeRequest::More(n)) => {
                let upto = (next + n).min(live_frames.len());
                for f in &live_frames[next..upto] {
                    publisher.publish(&topic, f)?;
                }
                next = upto;
                publisher.publish(&topic, &end)?;
            }
            Some(NodeRequest::Stop) => break,
            None => return Err(MethodError::Protocol("bad control request".into())),
        }
    }
    Ok(NodeOutcome { busy: clock.total() })
}

/// Receives frames from every node until each has sent its end marker.
fn collect_round(
    subs: &[transport::Subscription],
    store: &Store,
    clock: &mut BusyClock,
) -> Result<Vec<SensorFrame>> {
    let mut frames = Vec::new();
    for sub in subs {
        loop {
            let env = sub.recv()?;
            let f = clock.measure(|| frame::decode_frame(&env.payload))?;
            if f.header.frame_type == FrameType::ControlData {
                break;
            }
            clock.measure(|| store_frame(store, &f))?;
            frames.push(f);
        }
    }
    Ok(frames)
}

fn rows_from(fused: Vec<(FrameTimestamp, Vec<f64>)>, first_index: usize) -> Vec<(usize, Vec<f64>)> {
    fused.into_iter().enumerate().map(|(i, (_, v))| (first_index + i, v)).collect()
}

pub fn run_centralized(cfg: &MethodConfig, profiles: &[ProfileSpec]) -> Result<RunReport> {
    if cfg.architecture != Architecture::Centralized {
        return Err(MethodError::Config("run_centralized needs a centralized config".into()));
    }
    cfg.validate(profiles)?;
    let mut phases = Vec::new();
    let t0 = Instant::now();
    let acq = acquire(cfg, profiles)?;
    let node_ids: Vec<u32> = profiles.iter().map(|p| p.node_id).collect();
    phases.push(PhaseTiming { phase: 1, name: "acquisition".into(), seconds: t0.elapsed().as_secs_f64() });

    let broker = Broker::new(cfg.latency);
    let subs = node_ids
        .iter()
        .map(|&n| broker.subscribe(&data_topic(n)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let controls = node_ids
        .iter()
        .map(|_| broker.subscribe(&control_topic()))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    thread::scope(|scope| {
        let handles: Vec<_> = controls
            .into_iter()
            .enumerate()
            .map(|(k, control)| {
                let broker = broker.clone();
                let main = &acq.main[k];
                let live = &acq.live[k];
                scope.spawn(move || central_node(&broker, control, main, live))
            })
            .collect();
        let result = central_context(cfg, &broker, &subs, &node_ids, phases);
        // release nodes whatever happened
        if let Ok(mut p) = broker.publisher() {
            let _ = p.publish(&control_topic(), b"stop");
        }
        let mut node_busy = Vec::new();
        for (k, h) in handles.into_iter().enumerate() {
            match h.join().expect("node thread panicked") {
                Ok(o) => node_busy.push(o.busy),
                Err(e) => {
                    return Err(MethodError::Rank { rank: k + 1, source: Box::new(e) });
                }
            }
        }
        broker.stop();
        let mut report = result?;
        for (k, b) in node_busy.into_iter().enumerate() {
            report.busy.push(NodeBusy {
                node: node_ids[k] as usize,
                role: "sensor".into(),
                seconds: b.as_secs_f64(),
                retrain_seconds: 0.0,
            });
        }
        Ok(report)
    })
}

fn central_context(
    cfg: &MethodConfig,
    broker: &Broker,
    subs: &[transport::Subscription],
    node_ids: &[u32],
    mut phases: Vec<PhaseTiming>,
) -> Result<RunReport> {
    let mut clock = BusyClock::default();
    let global = Store::in_memory();
    let channel = cfg.quantity.channel();
    let tol = cfg.quantity.tolerance();
    let mut control = broker.publisher()?;

    // phase 2: transfer, fusion, labeling, split
    let t = Instant::now();
    let frames = collect_round(subs, &global, &mut clock)?;
    let (mut train, test, examples) = clock.measure(|| -> Result<_> {
        let rows = rows_from(fuse_frames(&frames, node_ids, channel), 0);
        let examples = cfg.quantity.label(&rows)?;
        let (train, test) = labeling::split_dataset(&examples, cfg.train_fraction, cfg.seed)?;
        Ok((train, test, examples.len()))
    })?;
    let mut next_index = frames.len() / node_ids.len().max(1);
    phases.push(PhaseTiming { phase: 2, name: "transfer and labeling".into(), seconds: t.elapsed().as_secs_f64() });

    let norm = Normalizer::fit(&Dataset::from_examples(&train).inputs)?;
    let mut net = initial_network(cfg, &train_set(&train, &norm));
    let mut state = AdamState::new(&net);

    let mut fetch_live = |count: usize, clock: &mut BusyClock, next_index: &mut usize| -> Result<Vec<LabeledExample>> {
        // every node sends `count` readings, one fused example each
        control.publish(&control_topic(), format!("more {count}").as_bytes())?;
        let frames = collect_round(subs, &global, clock)?;
        let rows = rows_from(fuse_frames(&frames, node_ids, channel), *next_index);
        *next_index += rows.len();
        clock.measure(|| cfg.quantity.label(&rows))
    };

    // phases 3-4: train behind the TA gate, test behind the F-score gate
    let t3 = Instant::now();
    let mut test_seconds = 0.0;
    let mut loss_trace = Vec::new();
    let mut rounds = 0;
    let (ta, evaluation, forecast) = loop {
        rounds += 1;
        let data = train_set(&train, &norm);
        let tcfg = cfg.training(cfg.epochs, mix(cfg.seed, 2, rounds as u64));
        let trace = clock.measure(|| mlp::train_with_state(&mut net, &mut state, &data, &tcfg))?;
        if loss_trace.is_empty() {
            loss_trace = trace;
        }
        let ta = clock.measure(|| mlp::training_accuracy(&net, &data, tol))?;
        let mut f_score = 0.0;
        if ta >= cfg.ta_gate {
            let tt = Instant::now();
            let (ev, points) = clock.measure(|| eval(&net, &norm, &test, tol))?;
            test_seconds += tt.elapsed().as_secs_f64();
            if ev.f_score >= cfg.fscore_gate {
                break (ta, ev, points);
            }
            f_score = ev.f_score;
        }
        if rounds >= cfg.max_rounds {
            let phase = if ta < cfg.ta_gate { "training" } else { "testing" };
            return Err(MethodError::GateNotReached { phase, rounds, ta, f_score });
        }
        // gate failed: ask the nodes for more data and continue from here
        let extra = fetch_live(cfg.retrain_batch, &mut clock, &mut next_index)?;
        train.extend(extra);
    };
    phases.push(PhaseTiming {
        phase: 3,
        name: "training".into(),
        seconds: t3.elapsed().as_secs_f64() - test_seconds,
    });
    phases.push(PhaseTiming { phase: 4, name: "testing".into(), seconds: test_seconds });
    let busy_main = clock.total();

    // phase 5: periodic retraining on fresh batches only
    let t5 = Instant::now();
    let mut iterations = Vec::new();
    for c in 0..cfg.retrain_cycles {
        let batch = fetch_live(cfg.retrain_batch, &mut clock, &mut next_index)?;
        if batch.is_empty() {
            break;
        }
        let data = train_set(&batch, &norm);
        let tcfg = cfg.retraining(mix(cfg.seed, 3, c as u64));
        clock.measure(|| mlp::train_with_state(&mut net, &mut state, &data, &tcfg))?;
        let (ev, _) = clock.measure(|| eval(&net, &norm, &test, tol))?;
        iterations.push(IterationReport {
            iteration: c + 1,
            t_start: (c * cfg.retrain_period) as f64 * cfg.t_ac,
            examples: batch.len(),
            f_score: ev.f_score,
            accuracy: ev.accuracy,
            rmse: ev.rmse,
        });
    }
    phases.push(PhaseTiming { phase: 5, name: "forecast and retraining".into(), seconds: t5.elapsed().as_secs_f64() });

    Ok(RunReport {
        architecture: Architecture::Centralized,
        quantity: cfg.quantity,
        topology: cfg.topology.to_string(),
        epochs: cfg.epochs,
        seed: cfg.seed,
        nodes: node_ids.len(),
        success: ta >= cfg.ta_gate && evaluation.f_score >= cfg.fscore_gate,
        rounds,
        examples,
        train_examples: train.len(),
        test_examples: test.len(),
        ta,
        evaluation,
        phases,
        timing: None,
        speedup: None,
        efficiency: None,
        busy: vec![NodeBusy {
            node: 0,
            role: "central".into(),
            seconds: busy_main.as_secs_f64(),
            retrain_seconds: (clock.total() - busy_main).as_secs_f64(),
        }],
        global_forecast: forecast,
        local_forecasts: Vec::new(),
        loss_trace,
        iterations,
        model: net,
        normalizer: norm,
    })
}

// ---------------------------------------------------------------------------
// distributed

/// Control message: a command line, `key=value` lines, then optionally a
/// `weights` line followed by a weight file.
struct Control {
    command: String,
    fields: Vec<(String, String)>,
    weights: Option<MlpNetwork>,
}

impl Control {
    fn new(command: impl Into<String>) -> Self {
        Control { command: command.into(), fields: Vec::new(), weights: None }
    }

    fn field(mut self, k: &str, v: impl ToString) -> Self {
        self.fields.push((k.to_string(), v.to_string()));
        self
    }

    fn with_weights(mut self, net: &MlpNetwork) -> Self {
        self.weights = Some(net.clone());
        self
    }

    fn encode(&self) -> Vec<u8> {
        let mut s = format!("{}\n", self.command);
        for (k, v) in &self.fields {
            let _ = writeln!(s, "{k}={v}");
        }
        if let Some(w) = &self.weights {
            s.push_str("weights\n");
            s.push_str(&w.to_weights_text());
        }
        transport::tag_payload(PayloadKind::Control, s.as_bytes())
    }

    fn decode(payload: &[u8]) -> Result<Self> {
        let (kind, body) = transport::untag_payload(payload)?;
        if kind != PayloadKind::Control {
            return Err(MethodError::Protocol(format!("expected control, got {kind:?}")));
        }
        let text = std::str::from_utf8(body).map_err(|_| MethodError::Protocol("control is not UTF-8".into()))?;
        let (head, weights) = match text.split_once("\nweights\n") {
            Some((h, w)) => (h, Some(MlpNetwork::from_weights_text(w)?)),
            None => (text.trim_end_matches('\n'), None),
        };
        let mut lines = head.lines();
        let command = lines.next().unwrap_or_default().to_string();
        let fields = lines
            .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        Ok(Control { command, fields, weights })
    }

    fn get(&self, k: &str) -> Option<&str> {
        self.fields.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str())
    }

    fn floats(&self, k: &str) -> Result<Vec<f64>> {
        self.get(k)
            .ok_or_else(|| MethodError::Protocol(format!("missing {k}")))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| MethodError::Protocol(format!("bad float in {k}"))))
            .collect()
    }

    fn take_weights(&mut self) -> Result<MlpNetwork> {
        self.weights
            .take()
            .ok_or_else(|| MethodError::Protocol(format!("{} carries no weights", self.command)))
    }
}

fn weights_payload(net: &MlpNetwork) -> Vec<u8> {
    transport::tag_payload(PayloadKind::Weights, net.to_weights_text().as_bytes())
}

fn decode_weights(payload: &[u8]) -> Result<MlpNetwork> {
    match transport::untag_payload(payload)? {
        (PayloadKind::Weights, body) => Ok(MlpNetwork::from_weights_text(
            std::str::from_utf8(body).map_err(|_| MethodError::Protocol("weights not UTF-8".into()))?,
        )?),
        (k, _) => Err(MethodError::Protocol(format!("expected weights, got {k:?}"))),
    }
}

fn decode_test_set(payload: &[u8]) -> Result<Vec<LabeledExample>> {
    match transport::untag_payload(payload)? {
        (PayloadKind::TestSet, body) => {
            let text = std::str::from_utf8(body).map_err(|_| MethodError::Protocol("test set not UTF-8".into()))?;
            // the CSV carries no acquisition index; it rides in a leading comment
            let (idx, csv) = text.split_once('\n').unwrap_or(("", ""));
            let indices: Vec<usize> = idx
                .trim_start_matches("# index ")
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| MethodError::Protocol("bad test index".into())))
                .collect::<Result<_>>()?;
            let mut ex = labeling::examples_from_csv(csv)?;
            if ex.len() != indices.len() {
                return Err(MethodError::Protocol("test set index count mismatch".into()));
            }
            for (e, i) in ex.iter_mut().zip(indices) {
                e.index = i;
            }
            Ok(ex)
        }
        (k, _) => Err(MethodError::Protocol(format!("expected test set, got {k:?}"))),
    }
}

fn test_set_payload(ex: &[LabeledExample]) -> Vec<u8> {
    let idx: Vec<String> = ex.iter().map(|e| e.index.to_string()).collect();
    let body = format!("# index {}\n{}", idx.join(" "), labeling::examples_to_csv(ex));
    transport::tag_payload(PayloadKind::TestSet, body.as_bytes())
}

/// Sample indices owned by each rank: a seeded shuffle cut into `ranks`
/// contiguous chunks, larger chunks first.
fn shard_indices(n: usize, ranks: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, 4, 0)));
    let mut out = Vec::with_capacity(ranks);
    let mut start = 0;
    for r in 0..ranks {
        let len = n / ranks + usize::from(r < n % ranks);
        let mut chunk = order[start..start + len].to_vec();
        chunk.sort_unstable();
        out.push(chunk);
        start += len;
    }
    out
}

/// Frames of the given acquisition indices, decoded, stored and labeled.
fn local_examples(
    cfg: &MethodConfig,
    series: &[Vec<SensorReading>],
    indices: &[usize],
    store: &Store,
    index_offset: usize,
) -> Result<Vec<LabeledExample>> {
    let node_ids: Vec<u32> = series.iter().map(|s| s[0].node_id).collect();
    let mut frames = Vec::with_capacity(indices.len() * series.len());
    for &i in indices {
        for s in series {
            let bytes = frame::encode_frame(&reading_frame(&s[i])?)?;
            let f = frame::decode_frame(&bytes)?;
            store_frame(store, &f)?;
            frames.push((i, f));
        }
    }
    let mut rows = Vec::with_capacity(indices.len());
    for chunk in frames.chunks(series.len()) {
        let i = chunk[0].0;
        let fs: Vec<SensorFrame> = chunk.iter().map(|(_, f)| f.clone()).collect();
        if let Some((_, v)) = fuse_frames(&fs, &node_ids, cfg.quantity.channel()).pop() {
            rows.push((index_offset + i, v));
        }
    }
    cfg.quantity.label(&rows)
}

struct RankResult {
    labeled: usize,
    train: usize,
    busy: Duration,
    retrain_busy: Duration,
    local_forecast: Vec<ForecastPoint>,
    master: Option<MasterResult>,
}

struct MasterResult {
    rounds: usize,
    ta: f64,
    evaluation: Evaluation,
    global_forecast: Vec<ForecastPoint>,
    loss_trace: Vec<f64>,
    iterations: Vec<IterationReport>,
    model: MlpNetwork,
    normalizer: Normalizer,
    test_examples: usize,
    training_seconds: f64,
    test_seconds: f64,
}

struct RankData {
    train: Vec<LabeledExample>,
    test: Vec<LabeledExample>,
    live: Vec<LabeledExample>,
}

fn rank_data(cfg: &MethodConfig, acq: &Acquisition, rank: usize, clock: &mut BusyClock) -> Result<(RankData, Store)> {
    let ranks = cfg.nodes;
    let store = Store::in_memory();
    let n_main = acq.main[0].len();
    let main_idx = &shard_indices(n_main, ranks, cfg.seed)[rank];
    // live readings are dealt round-robin so each cycle gives every rank its share
    let live_idx: Vec<usize> = (rank..acq.live[0].len()).step_by(ranks).collect();
    clock.measure(|| {
        let examples = local_examples(cfg, &acq.main, main_idx, &store, 0)?;
        let (train, test) = labeling::split_dataset(&examples, cfg.train_fraction, mix(cfg.seed, 5, rank as u64))?;
        let live = local_examples(cfg, &acq.live, &live_idx, &store, n_main)?;
        Ok((RankData { train, test, live }, store))
    })
}

fn rank_main(cfg: &MethodConfig, acq: &Acquisition, mut ep: RankEndpoint) -> Result<RankResult> {
    let rank = ep.rank();
    let ranks = ep.size();
    let tol = cfg.quantity.tolerance();
    let mut clock = BusyClock::default();
    let (mut data, _store) = rank_data(cfg, acq, rank, &mut clock)?;
    let labeled = data.train.len() + data.test.len();

    // common starting point and input scaling come from the master
    let (norm, mut net) = if rank == 0 {
        let (norm, net) = clock.measure(|| -> Result<_> {
            let norm = Normalizer::fit(&Dataset::from_examples(&data.train).inputs)?;
            let net = initial_network(cfg, &train_set(&data.train, &norm));
            Ok((norm, net))
        })?;
        let msg = Control::new("init")
            .field("normalizer_min", join_floats(&norm.min))
            .field("normalizer_max", join_floats(&norm.max))
            .with_weights(&net)
            .encode();
        for dest in 1..ranks {
            ep.mp_send(dest, &msg)?;
        }
        (norm, net)
    } else {
        let mut c = Control::decode(&ep.mp_recv(Some(0))?.payload)?;
        if c.command != "init" {
            return Err(MethodError::Protocol(format!("expected init, got {}", c.command)));
        }
        let norm = Normalizer { min: c.floats("normalizer_min")?, max: c.floats("normalizer_max")? };
        (norm, c.take_weights()?)
    };
    let mut state = AdamState::new(&net);
    let mut live_next = 0;
    let per_rank_batch = cfg.retrain_batch.div_ceil(ranks).max(1);
    let t_train = Instant::now();

    // phases 2-4: local training in rounds, averaged on the master
    let planned = cfg.epochs.div_ceil(cfg.sync_epochs);
    let mut slave_weights: Vec<MlpNetwork> = Vec::new();
    let mut loss_trace = Vec::new();
    let mut local_net;
    let mut round = 0usize;
    let mut extensions = 0usize;
    loop {
        let epochs = if round < planned {
            cfg.sync_epochs.min(cfg.epochs - round * cfg.sync_epochs)
        } else {
            cfg.sync_epochs
        };
        let train = train_set(&data.train, &norm);
        let tcfg = cfg.training(epochs, mix(cfg.seed, 6, (round * ranks + rank) as u64));
        let trace = clock.measure(|| mlp::train_with_state(&mut net, &mut state, &train, &tcfg))?;
        if rank == 0 && round < planned {
            loss_trace.extend(trace);
        }
        local_net = net.clone();
        round += 1;
        if rank == 0 {
            let mut received = Vec::with_capacity(ranks - 1);
            for _ in 1..ranks {
                let env = ep.mp_recv(None)?;
                received.push((env.source, clock.measure(|| decode_weights(&env.payload))?));
            }
            received.sort_by_key(|(src, _)| *src);
            slave_weights = received.into_iter().map(|(_, w)| w).collect();
            let (avg, ta) = clock.measure(|| -> Result<_> {
                let mut all = vec![net.clone()];
                all.extend(slave_weights.iter().cloned());
                let avg = mlp::average_weights(&all)?;
                let ta = mlp::training_accuracy(&avg, &train, tol)?;
                Ok((avg, ta))
            })?;
            net = avg;
            let more = round >= planned && ta < cfg.ta_gate && extensions + 1 < cfg.max_rounds;
            let next = if round < planned || more { "continue" } else { "done" };
            if round >= planned && more {
                extensions += 1;
            }
            let msg = Control::new("round")
                .field("round", round)
                .field("next", next)
                .field("ta", ta)
                .with_weights(&net)
                .encode();
            for dest in 1..ranks {
                ep.mp_send(dest, &msg)?;
            }
            if next == "done" {
                if ta < cfg.ta_gate {
                    stop_slaves(&mut ep);
                    return Err(MethodError::GateNotReached { phase: "training", rounds: extensions + 1, ta, f_score: 0.0 });
                }
                break;
            }
        } else {
            let payload = weights_payload(&net);
            ep.mp_send(0, &payload)?;
            let mut c = Control::decode(&ep.mp_recv(Some(0))?.payload)?;
            match c.command.as_str() {
                "round" => {}
                "stop" => return Err(MethodError::Protocol("master stopped the run".into())),
                other => return Err(MethodError::Protocol(format!("expected round, got {other}"))),
            }
            net = c.take_weights()?;
            if c.get("next") == Some("done") {
                break;
            }
        }
        if round >= planned {
            // the gate failed: read more data before the extra round
            let upto = (live_next + per_rank_batch).min(data.live.len());
            data.train.extend(data.live[live_next..upto].iter().cloned());
            live_next = upto;
        }
    }
    let training_seconds = t_train.elapsed().as_secs_f64();

    // phase 3: local forecast with the locally learned weights
    let (_, local_forecast) = clock.measure(|| eval(&local_net, &norm, &data.test, tol))?;

    if rank != 0 {
        ep.mp_send(0, &test_set_payload(&data.test))?;
        let busy = clock.total();
        // idle until the master decides
        let mut c = Control::decode(&ep.mp_recv(Some(0))?.payload)?;
        match c.command.as_str() {
            "final" => net = c.take_weights()?,
            "stop" => {
                return Ok(RankResult { labeled, train: data.train.len(), busy, retrain_busy: Duration::ZERO, local_forecast, master: None });
            }
            other => return Err(MethodError::Protocol(format!("expected final, got {other}"))),
        }
        // phase 7: retraining cycles on fresh local batches
        let mut retrain = BusyClock::default();
        loop {
            let c = Control::decode(&ep.mp_recv(Some(0))?.payload)?;
            match c.command.as_str() {
                "cycle" => {
                    let cycle: u64 = c.get("cycle").and_then(|v| v.parse().ok()).unwrap_or(0);
                    let upto = (live_next + per_rank_batch).min(data.live.len());
                    let batch = &data.live[live_next..upto];
                    live_next = upto;
                    if !batch.is_empty() {
                        let d = train_set(batch, &norm);
                        let tcfg = cfg.retraining(mix(cfg.seed, 7, cycle * ranks as u64 + rank as u64));
                        retrain.measure(|| mlp::train_with_state(&mut net, &mut state, &d, &tcfg))?;
                    }
                    let msg = Control::new("cycle").field("examples", batch.len()).with_weights(&net).encode();
                    ep.mp_send(0, &msg)?;
                    let mut back = Control::decode(&ep.mp_recv(Some(0))?.payload)?;
                    net = back.take_weights()?;
                }
                "stop" => break,
                other => return Err(MethodError::Protocol(format!("unexpected {other}"))),
            }
        }
        return Ok(RankResult { labeled, train: data.train.len(), busy, retrain_busy: retrain.total(), local_forecast, master: None });
    }

    // master: phase 4 collects the test sets, phase 5 tests the average
    let mut tests: Vec<(usize, Vec<LabeledExample>)> = vec![(0, data.test.clone())];
    for _ in 1..ranks {
        let env = ep.mp_recv(None)?;
        let ex = clock.measure(|| decode_test_set(&env.payload))?;
        tests.push((env.source, ex));
    }
    tests.sort_by_key(|(src, _)| *src);
    let pooled: Vec<LabeledExample> = tests.into_iter().flat_map(|(_, t)| t).collect();
    let t_test = Instant::now();
    let mut attempts = 1;
    let (evaluation, global_forecast) = loop {
        let (ev, points) = clock.measure(|| eval(&net, &norm, &pooled, tol))?;
        if ev.f_score >= cfg.fscore_gate {
            break (ev, points);
        }
        if extensions + attempts >= cfg.max_rounds {
            stop_slaves(&mut ep);
            let ta = mlp::training_accuracy(&net, &train_set(&data.train, &norm), tol)?;
            return Err(MethodError::GateNotReached {
                phase: "testing",
                rounds: extensions + attempts,
                ta,
                f_score: ev.f_score,
            });
        }
        // phase 6: retrain the master from the average, re-average
        attempts += 1;
        let upto = (live_next + per_rank_batch).min(data.live.len());
        data.train.extend(data.live[live_next..upto].iter().cloned());
        live_next = upto;
        let train = train_set(&data.train, &norm);
        let tcfg = cfg.training(cfg.sync_epochs, mix(cfg.seed, 8, attempts as u64));
        net = clock.measure(|| -> Result<_> {
            mlp::train_with_state(&mut net, &mut state, &train, &tcfg)?;
            let mut all = vec![net.clone()];
            all.extend(slave_weights.iter().cloned());
            Ok(mlp::average_weights(&all)?)
        })?;
    };
    let ta = clock.measure(|| mlp::training_accuracy(&net, &train_set(&data.train, &norm), tol))?;
    let test_seconds = t_test.elapsed().as_secs_f64();
    let final_msg = Control::new("final").with_weights(&net).encode();
    for dest in 1..ranks {
        ep.mp_send(dest, &final_msg)?;
    }
    let busy = clock.total();

    // phase 7: every cycle each rank retrains on its new batch, the master
    // re-averages and scores the result on the pooled test set
    let mut retrain = BusyClock::default();
    let mut iterations = Vec::new();
    for c in 0..cfg.retrain_cycles {
        let cycle = Control::new("cycle").field("cycle", c).encode();
        for dest in 1..ranks {
            ep.mp_send(dest, &cycle)?;
        }
        let upto = (live_next + per_rank_batch).min(data.live.len());
        let batch = data.live[live_next..upto].to_vec();
        let t_start = batch.first().map(|e| live_time(cfg, acq, e.index)).unwrap_or(0.0);
        live_next = upto;
        if !batch.is_empty() {
            let d = train_set(&batch, &norm);
            let tcfg = cfg.retraining(mix(cfg.seed, 7, (c * ranks) as u64));
            retrain.measure(|| mlp::train_with_state(&mut net, &mut state, &d, &tcfg))?;
        }
        let mut all = vec![net.clone()];
        let mut examples = batch.len();
        let mut received = Vec::new();
        for _ in 1..ranks {
            let env = ep.mp_recv(None)?;
            let mut m = Control::decode(&env.payload)?;
            examples += m.get("examples").and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
            received.push((env.source, m.take_weights()?));
        }
        received.sort_by_key(|(s, _)| *s);
        all.extend(received.into_iter().map(|(_, w)| w));
        let ev = retrain.measure(|| -> Result<_> {
            net = mlp::average_weights(&all)?;
            Ok(eval(&net, &norm, &pooled, tol)?.0)
        })?;
        let back = Control::new("average").with_weights(&net).encode();
        for dest in 1..ranks {
            ep.mp_send(dest, &back)?;
        }
        iterations.push(IterationReport {
            iteration: c + 1,
            t_start,
            examples,
            f_score: ev.f_score,
            accuracy: ev.accuracy,
            rmse: ev.rmse,
        });
    }
    stop_slaves(&mut ep);
    Ok(RankResult {
        labeled,
        train: data.train.len(),
        busy,
        retrain_busy: retrain.total(),
        local_forecast,
        master: Some(MasterResult {
            rounds: extensions + attempts,
            ta,
            evaluation,
            global_forecast,
            loss_trace,
            iterations,
            model: net,
            normalizer: norm,
            test_examples: pooled.len(),
            training_seconds,
            test_seconds,
        }),
    })
}

fn live_time(cfg: &MethodConfig, acq: &Acquisition, index: usize) -> f64 {
    let i = index.saturating_sub(acq.main[0].len());
    let dt = cfg.t_ac / cfg.live_per_period() as f64;
    i as f64 * dt
}

fn stop_slaves(ep: &mut RankEndpoint) {
    let msg = Control::new("stop").encode();
    for dest in 1..ep.size() {
        let _ = ep.mp_send(dest, &msg);
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn run_distributed(cfg: &MethodConfig, profiles: &[ProfileSpec]) -> Result<RunReport> {
    if cfg.architecture != Architecture::Distributed {
        return Err(MethodError::Config("run_distributed needs a distributed config".into()));
    }
    cfg.validate(profiles)?;
    let t0 = Instant::now();
    let acq = acquire(cfg, profiles)?;
    let acquisition_seconds = t0.elapsed().as_secs_f64();
    let (endpoints, shutdown) = Communicator::create(cfg.ranks(), cfg.latency);

    let results: Vec<Result<RankResult>> = thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|ep| {
                let acq = &acq;
                let shutdown = shutdown.clone();
                scope.spawn(move || {
                    let rank = ep.rank();
                    let r = rank_main(cfg, acq, ep);
                    if r.is_err() {
                        // unblock everyone else
                        shutdown.shutdown();
                    }
                    r.map_err(|e| MethodError::Rank { rank, source: Box::new(e) })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    });

    // report the root cause: a gate failure or the first rank that failed
    // for a reason other than being shut down
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        let pick = errors
            .iter()
            .position(|e| !matches!(e, MethodError::Rank { source, .. } if matches!(**source, MethodError::Transport(TransportError::Shutdown))))
            .unwrap_or(0);
        return Err(errors.swap_remove(pick));
    }
    let mut busy = Vec::new();
    let mut local_forecasts = Vec::new();
    let mut master = None;
    let examples = ok.iter().map(|r| r.labeled).sum();
    let train_examples = ok.iter().map(|r| r.train).sum();
    for (rank, r) in ok.into_iter().enumerate() {
        busy.push(NodeBusy {
            node: rank,
            role: if rank == 0 { "master".into() } else { "slave".into() },
            seconds: r.busy.as_secs_f64(),
            retrain_seconds: r.retrain_busy.as_secs_f64(),
        });
        local_forecasts.push(r.local_forecast);
        if let Some(m) = r.master {
            master = Some(m);
        }
    }
    let m = master.ok_or_else(|| MethodError::Protocol("master produced no result".into()))?;
    let phases = vec![
        PhaseTiming { phase: 1, name: "acquisition".into(), seconds: acquisition_seconds },
        PhaseTiming { phase: 2, name: "parallel training".into(), seconds: m.training_seconds },
        PhaseTiming { phase: 5, name: "testing".into(), seconds: m.test_seconds },
    ];
    Ok(RunReport {
        architecture: Architecture::Distributed,
        quantity: cfg.quantity,
        topology: cfg.topology.to_string(),
        epochs: cfg.epochs,
        seed: cfg.seed,
        nodes: cfg.nodes,
        success: m.ta >= cfg.ta_gate && m.evaluation.f_score >= cfg.fscore_gate,
        rounds: m.rounds,
        examples,
        train_examples,
        test_examples: m.test_examples,
        ta: m.ta,
        evaluation: m.evaluation,
        phases,
        timing: None,
        speedup: None,
        efficiency: None,
        busy,
        global_forecast: m.global_forecast,
        local_forecasts,
        loss_trace: m.loss_trace,
        iterations: m.iterations,
        model: m.model,
        normalizer: m.normalizer,
    })
}

/// Times the distributed training workload (phases 2-4) twice: all node
/// models trained one after another on one context, then one context per
/// node in parallel. Both produce the same averaged weights.
pub fn measure_speedup(cfg: &MethodConfig, profiles: &[ProfileSpec]) -> Result<(TimingPair, MlpNetwork, MlpNetwork)> {
    if cfg.architecture != Architecture::Distributed {
        return Err(MethodError::Config("speedup needs a distributed config".into()));
    }
    cfg.validate(profiles)?;
    let acq = acquire(cfg, profiles)?;
    let ranks = cfg.nodes;
    let mut scratch = BusyClock::default();
    let shards: Vec<Dataset> = {
        let datas = (0..ranks)
            .map(|r| rank_data(cfg, &acq, r, &mut scratch).map(|(d, _)| d))
            .collect::<Result<Vec<_>>>()?;
        let norm = Normalizer::fit(&Dataset::from_examples(&datas[0].train).inputs)?;
        datas.iter().map(|d| train_set(&d.train, &norm)).collect()
    };
    let init = initial_network(cfg, &shards[0]);
    let rounds = cfg.epochs.div_ceil(cfg.sync_epochs);
    let round_cfg = |round: usize, rank: usize| {
        let epochs = cfg.sync_epochs.min(cfg.epochs - round * cfg.sync_epochs);
        cfg.training(epochs, mix(cfg.seed, 6, (round * ranks + rank) as u64))
    };

    let t = Instant::now();
    let mut avg = init.clone();
    let mut nets = vec![init.clone(); ranks];
    let mut states: Vec<AdamState> = nets.iter().map(AdamState::new).collect();
    for round in 0..rounds {
        for r in 0..ranks {
            nets[r] = avg.clone();
            mlp::train_with_state(&mut nets[r], &mut states[r], &shards[r], &round_cfg(round, r))?;
        }
        avg = mlp::average_weights(&nets)?;
    }
    let t_s = t.elapsed().as_secs_f64();
    let sequential = avg;

    let (endpoints, _shutdown) = Communicator::create(ranks, cfg.latency);
    let t = Instant::now();
    let parallel: Vec<Result<MlpNetwork>> = thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|mut ep| {
                let shards = &shards;
                let init = init.clone();
                let round_cfg = &round_cfg;
                scope.spawn(move || -> Result<MlpNetwork> {
                    let rank = ep.rank();
                    let mut net = init;
                    let mut state = AdamState::new(&net);
                    for round in 0..rounds {
                        mlp::train_with_state(&mut net, &mut state, &shards[rank], &round_cfg(round, rank))?;
                        if rank == 0 {
                            let mut all = vec![net.clone()];
                            let mut got = Vec::new();
                            for _ in 1..ep.size() {
                                let env = ep.mp_recv(None)?;
                                got.push((env.source, decode_weights(&env.payload)?));
                            }
                            got.sort_by_key(|(s, _)| *s);
                            all.extend(got.into_iter().map(|(_, w)| w));
                            net = mlp::average_weights(&all)?;
                            let msg = weights_payload(&net);
                            for d in 1..ep.size() {
                                ep.mp_send(d, &msg)?;
                            }
                        } else {
                            ep.mp_send(0, &weights_payload(&net))?;
                            net = decode_weights(&ep.mp_recv(Some(0))?.payload)?;
                        }
                    }
                    Ok(net)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    });
    let t_p = t.elapsed().as_secs_f64();
    let parallel = parallel.into_iter().next().expect("at least one rank")?;
    Ok((TimingPair::new(t_s, t_p, ranks)?, sequential, parallel))
}

/// Fills the report's timing columns from a speedup measurement.
pub fn attach_timing(report: &mut RunReport, timing: TimingPair) -> Result<()> {
    report.speedup = Some(metrics::speedup(&timing)?);
    report.efficiency = Some(metrics::efficiency(&timing)?);
    report.timing = Some(timing);
    Ok(())
}
