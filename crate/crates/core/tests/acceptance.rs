//! Acceptance checks 1-11, run one after another so that timing and busy
//! time measurements do not compete with each other. Prints one status
//! line per criterion and exits nonzero on any unexpected failure.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edge_ieq::experiments::{self, ExperimentPlan, MethodChoice};
use edge_ieq::frame::{self, FrameTimestamp, FrameType, Measurement, SensorFrame, SensorId};
use edge_ieq::labeling::{self, LabelingRule};
use edge_ieq::methods::{self, MethodConfig, RunReport};
use edge_ieq::metrics::{self, TimingPair};
use edge_ieq::mlp::{Dataset, MlpNetwork, Topology};
use edge_ieq::sensors::{self, CurrentSenseConfig};
use edge_ieq::transport::{Broker, Communicator, Topic};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Pass,
    Fail,
    /// Fails as stated; the stated target contradicts its own inputs.
    KnownFail,
    Skip,
}

struct Line {
    id: &'static str,
    status: Status,
    detail: String,
}

fn line(id: &'static str, ok: bool, detail: impl Into<String>) -> Line {
    Line { id, status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// 1 ---------------------------------------------------------------------

fn random_frame(rng: &mut ChaCha8Rng) -> SensorFrame {
    let frame_type = if rng.random_bool(0.8) { FrameType::SensorData } else { FrameType::ControlData };
    let min = usize::from(frame_type == FrameType::SensorData);
    let k = rng.random_range(min..=24);
    let ms = (0..k)
        .map(|_| {
            let value = loop {
                let v = f32::from_bits(rng.random());
                if v.is_finite() {
                    break v;
                }
            };
            Measurement::new(SensorId::from_code(rng.random()), value)
        })
        .collect();
    let ts = FrameTimestamp::new(
        rng.random_range(1970..=2100),
        rng.random_range(1..=12),
        rng.random_range(1..=28),
        rng.random_range(0..24),
        rng.random_range(0..60),
        rng.random_range(0..60),
        rng.random_range(0..1000),
    )
    .unwrap();
    SensorFrame::new(frame_type, rng.random_range(0..=frame::MAX_NODE_ID), ts, ms).unwrap()
}

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    frame::from_hex(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn criterion_1() -> Vec<Line> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..1000 {
        let f = random_frame(&mut rng);
        let bytes = frame::encode_frame(&f).unwrap();
        let back = frame::decode_frame(&bytes).unwrap();
        if back != f || frame::encode_frame(&back).unwrap() != bytes || bytes.len() != 13 + 5 * f.measurements.len() {
            bad += 1;
        }
    }
    let ts = |y, mo, d, h, mi, s, ms| FrameTimestamp::new(y, mo, d, h, mi, s, ms).unwrap();
    let single = frame::decode_frame(&fixture("temperature_single.hex")).unwrap();
    let multi = frame::decode_frame(&fixture("multi_sensor.hex")).unwrap();
    let control = frame::decode_frame(&fixture("control_empty.hex")).unwrap();
    let fixtures_ok = single.header.frame_type == FrameType::SensorData
        && single.header.node_id == 1
        && single.timestamp == ts(2023, 6, 15, 12, 30, 45, 500)
        && single.measurements == vec![Measurement::new(SensorId::Temperature, 27.5)]
        && multi.header.node_id == 0xABCD
        && multi.timestamp == ts(2024, 2, 29, 23, 59, 59, 999)
        && multi.measurements
            == vec![
                Measurement::new(SensorId::Temperature, 27.25),
                Measurement::new(SensorId::RelativeHumidity, 45.5),
                Measurement::new(SensorId::Illuminance, 512.0),
                Measurement::new(SensorId::Co2, 612.0),
                Measurement::new(SensorId::Current, f32::from_bits(0x3F19_999A)),
            ]
        && control.header.frame_type == FrameType::ControlData
        && control.header.node_id == 0xFF_FFFF
        && control.timestamp == ts(1970, 1, 1, 0, 0, 0, 0)
        && control.measurements.is_empty();
    let secs = t.elapsed().as_secs_f64();
    vec![line(
        "1",
        bad == 0 && fixtures_ok && secs < 1.0,
        format!("{} of 1000 random frames round-trip bit-exactly, fixtures ok: {fixtures_ok}, {secs:.3} s", 1000 - bad),
    )]
}

// 2 ---------------------------------------------------------------------

fn criterion_2() -> Vec<Line> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = CurrentSenseConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let s_t: u32 = rng.random_range(0..65536);
        let s_rh: u32 = rng.random_range(0..65536);
        let x: u32 = rng.random_range(0..1024);
        let t_oracle = -45.7 + 175.7 * (s_t as f64 / 65536.0);
        let rh_oracle = (103.7 - 3.2 * (s_t as f64 / 65536.0)) * (s_rh as f64 / 65536.0);
        let v_oracle = 0.0016 * x as f64 + 0.4;
        let v = sensors::adc_to_voltage(x).unwrap();
        let i_oracle = v_oracle * 5000.0 / (0.05 * 100_000.0);
        worst = worst
            .max(rel(sensors::convert_temperature(s_t).unwrap(), t_oracle))
            .max(rel(sensors::convert_rh(s_t, s_rh).unwrap(), rh_oracle))
            .max(rel(v, v_oracle))
            .max(rel(sensors::voltage_to_current(v, &cfg).unwrap(), i_oracle));
    }
    let anchors = rel(sensors::convert_temperature(0).unwrap(), -45.7) < 1e-15
        && rel(sensors::adc_to_voltage(0).unwrap(), 0.4) < 1e-15
        && rel(sensors::voltage_to_current(0.4, &cfg).unwrap(), 0.4) < 1e-12;
    vec![line(
        "2",
        worst < 1e-12 && anchors,
        format!("max relative error {worst:.2e} over 10^4 inputs, anchors ok: {anchors}"),
    )]
}

// 3 ---------------------------------------------------------------------

fn criterion_3() -> Vec<Line> {
    let f1 = metrics::f_score_pr(0.93, 0.99);
    let f2 = metrics::f_score_pr(0.94, 0.89);
    let t = TimingPair::new(736.46, 249.89, 3).unwrap();
    let sp = metrics::speedup(&t).unwrap();
    let ef = metrics::efficiency(&t).unwrap();
    let harmonic = 2.0 * 0.94 * 0.89 / (0.94 + 0.89);
    let mut out = vec![
        line("3a", (f1 - 0.96).abs() <= 0.005, format!("f_score(0.93, 0.99) = {f1:.4}")),
        line(
            "3c",
            (sp - 2.95).abs() <= 0.01 && (ef - 0.98).abs() <= 0.01,
            format!("speedup {sp:.4}, efficiency {ef:.4}"),
        ),
    ];
    let b = if (f2 - 0.92).abs() <= 0.005 {
        line("3b", true, format!("f_score(0.94, 0.89) = {f2:.4}"))
    } else {
        Line {
            id: "3b",
            // still check that the function computes the harmonic mean
            status: if (f2 - harmonic).abs() < 1e-12 { Status::KnownFail } else { Status::Fail },
            detail: format!(
                "f_score(0.94, 0.89) = {f2:.4}, target 0.92 +/- 0.005 is not the harmonic mean of these inputs"
            ),
        }
    };
    out.insert(1, b);
    out
}

// 4 ---------------------------------------------------------------------

fn central_difference_error(net: &MlpNetwork, data: &Dataset) -> f64 {
    const H: f64 = 1e-5;
    let analytic = net.gradient(data).unwrap();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for j in 0..analytic.len() {
        for k in 0..analytic[j].data.len() {
            let w = probe.layers()[j].data[k];
            probe.layers_mut()[j].data[k] = w + H;
            let up = probe.loss(data).unwrap();
            probe.layers_mut()[j].data[k] = w - H;
            let down = probe.loss(data).unwrap();
            probe.layers_mut()[j].data[k] = w;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic[j].data[k];
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
    }
    worst
}

fn criterion_4() -> Vec<Line> {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for topo in ["3-2-2-1", "3-10-10-10-1"] {
        let topology: Topology = topo.parse().unwrap();
        for seed in 1..=3u64 {
            let net = MlpNetwork::glorot(&topology, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let targets = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let data = Dataset { inputs, targets, labels: vec![1; 8] };
            worst = worst.max(central_difference_error(&net, &data));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    vec![line("4", worst < 1e-4 && secs < 10.0, format!("max relative error {worst:.2e}, {secs:.2} s"))]
}

// 5, 6 --------------------------------------------------------------------

fn gates(r: &RunReport, ta: f64) -> bool {
    r.ta >= ta && r.evaluation.f_score >= 0.9
}

fn summary(runs: &[(u64, Result<RunReport, methods::MethodError>)]) -> String {
    runs.iter()
        .map(|(seed, r)| match r {
            Ok(r) => format!("s{seed}: TA {:.3} F {:.3}", r.ta, r.evaluation.f_score),
            Err(e) => format!("s{seed}: {e}"),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn criterion_5() -> Vec<Line> {
    let t = Instant::now();
    let profiles = sensors::builtin_experiment(1).unwrap();
    let runs: Vec<_> = (1..=5u64)
        .map(|seed| {
            let cfg = MethodConfig::centralized("3-6-6-1".parse().unwrap(), 500, seed);
            (seed, methods::run_centralized(&cfg, &profiles))
        })
        .collect();
    let size_ok = runs.iter().all(|(_, r)| r.as_ref().map_or(true, |r| r.examples == 6460 && r.test_examples == 1938));
    let passed = runs.iter().filter(|(_, r)| r.as_ref().is_ok_and(|r| gates(r, 0.85))).count();
    let secs = t.elapsed().as_secs_f64();
    vec![line(
        "5",
        passed >= 4 && size_ok && secs < 300.0,
        format!("{passed}/5 seeds pass, {secs:.1} s [{}]", summary(&runs)),
    )]
}

fn criterion_6(distributed: &mut Vec<RunReport>) -> Vec<Line> {
    let t = Instant::now();
    let profiles = sensors::builtin_experiment(1).unwrap();
    let runs: Vec<_> = (1..=5u64)
        .map(|seed| {
            let cfg = MethodConfig::distributed("3-10-10-10-1".parse().unwrap(), 4000, 3, seed);
            (seed, methods::run_distributed(&cfg, &profiles))
        })
        .collect();
    let passed = runs.iter().filter(|(_, r)| r.as_ref().is_ok_and(|r| gates(r, 0.95))).count();
    let secs = t.elapsed().as_secs_f64();
    let mut out = vec![line(
        "6",
        passed >= 4 && secs < 900.0,
        format!("{passed}/5 seeds reach TA >= 0.95 and F >= 0.90, {secs:.1} s [{}]", summary(&runs)),
    )];
    distributed.extend(runs.into_iter().filter_map(|(_, r)| r.ok()));

    let cores = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if cores >= 4 {
        let cfg = MethodConfig::distributed("3-10-10-10-1".parse().unwrap(), 4000, 3, 1);
        let (timing, seq, par) = methods::measure_speedup(&cfg, &profiles).unwrap();
        let sp = metrics::speedup(&timing).unwrap();
        let ef = metrics::efficiency(&timing).unwrap();
        out.push(line(
            "6s",
            sp >= 2.0 && ef >= 0.66 && seq == par,
            format!("T_s {:.2} s, T_p {:.2} s, speedup {sp:.2}, efficiency {ef:.2} on {cores} cores", timing.t_s, timing.t_p),
        ));
    } else {
        out.push(Line {
            id: "6s",
            status: Status::Skip,
            detail: format!("speedup bound applies to hosts with >= 4 cores; this host has {cores}"),
        });
    }
    out
}

// 7 -----------------------------------------------------------------------

fn criterion_7(distributed: &mut Vec<RunReport>) -> Vec<Line> {
    let profiles = sensors::builtin_experiment(2).unwrap();
    let mut cfg = MethodConfig::distributed("3-10-10-10-1".parse().unwrap(), 4000, 3, 1);
    cfg.retrain_cycles = 5;
    match methods::run_distributed(&cfg, &profiles) {
        Ok(r) => {
            let mut best = 0;
            let mut run = 0;
            for it in &r.iterations {
                run = if it.f_score >= 0.9 { run + 1 } else { 0 };
                best = best.max(run);
            }
            let fs: Vec<String> = r.iterations.iter().map(|i| format!("{:.3}", i.f_score)).collect();
            let l = line(
                "7",
                best >= 3,
                format!("{best} consecutive iterations with F >= 0.90 (F per iteration: {})", fs.join(", ")),
            );
            distributed.push(r);
            vec![l]
        }
        Err(e) => vec![line("7", false, format!("run failed: {e}"))],
    }
}

// 8 -----------------------------------------------------------------------

fn criterion_8() -> Vec<Line> {
    let mut plan = ExperimentPlan::new(1, MethodChoice::Centralized, vec![1]);
    plan.topologies = vec!["3-2-2-1".parse().unwrap()];
    plan.epochs = vec![1000];
    match experiments::illuminance_run(&plan) {
        Ok(o) => {
            let r = o.rows[0].report.as_ref();
            let f = r.map(|r| r.evaluation.f_score).unwrap_or(0.0);
            vec![line("8", f >= 0.9, format!("illuminance 3-2-2-1, 1000 epochs: F {f:.3}"))]
        }
        Err(e) => vec![line("8", false, format!("run failed: {e}"))],
    }
}

// 9 -----------------------------------------------------------------------

fn criterion_9() -> Vec<Line> {
    let grid: Vec<f64> = (0..50).map(|i| 15.0 + i as f64 * 0.5).collect();
    let rule = LabelingRule::temperature();
    let mut mismatches = 0;
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                let mean = (a + b + c) / 3.0;
                let oracle = if mean < 26.0 {
                    (26.0, 0)
                } else if mean > 31.0 {
                    (31.0, 0)
                } else {
                    (mean, 1)
                };
                let got = labeling::expected_output(a, b, c, &rule).unwrap();
                if got.0.to_bits() != oracle.0.to_bits() || got.1 != oracle.1 {
                    mismatches += 1;
                }
            }
        }
    }
    let boundary = labeling::label_estimate(28.0, 28.01, 0.01).unwrap() == 1
        && labeling::label_estimate(0.5, 0.75, 0.25).unwrap() == 1
        && labeling::label_estimate(28.0, 28.0101, 0.01).unwrap() == 0;
    vec![line(
        "9",
        mismatches == 0 && boundary,
        format!("{mismatches} mismatches on the 50^3 grid, boundary at tol labeled 1: {boundary}"),
    )]
}

// 10 ----------------------------------------------------------------------

fn slaves_below_master(r: &RunReport) -> bool {
    let master = r.busy.iter().find(|b| b.role == "master").map(|b| b.seconds).unwrap_or(0.0);
    r.busy.iter().filter(|b| b.role == "slave").all(|b| b.seconds < master)
}

fn criterion_10(distributed: &mut Vec<RunReport>) -> Vec<Line> {
    let profiles = sensors::builtin_experiment(1).unwrap();
    let mut per_epochs = Vec::new();
    for epochs in [200, 400, 800] {
        let mut cfg = MethodConfig::distributed("3-10-10-10-1".parse().unwrap(), epochs, 3, 1);
        // fixed workload: no gate-driven extra rounds
        cfg.ta_gate = 1e-9;
        cfg.fscore_gate = 1e-9;
        let r = methods::run_distributed(&cfg, &profiles).unwrap();
        per_epochs.push(r.busy.iter().map(|b| b.seconds).collect::<Vec<f64>>());
        distributed.push(r);
    }
    let monotone = (0..3).all(|node| per_epochs.windows(2).all(|w| w[0][node] < w[1][node]));
    let below = distributed.iter().filter(|r| slaves_below_master(r)).count();
    let worst_margin = distributed
        .iter()
        .map(|r| {
            let m = r.busy[0].seconds;
            r.busy[1..].iter().map(|b| (m - b.seconds) / m).fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    let fmt = |v: &Vec<f64>| v.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join("/");
    vec![
        line(
            "10a",
            below == distributed.len(),
            format!(
                "slaves below master in {below}/{} distributed runs, smallest margin {:.2}%",
                distributed.len(),
                worst_margin * 100.0
            ),
        ),
        line(
            "10b",
            monotone,
            format!(
                "busy s per node at 200/400/800 epochs: {} | {} | {}",
                fmt(&per_epochs[0]),
                fmt(&per_epochs[1]),
                fmt(&per_epochs[2])
            ),
        ),
    ]
}

// 11 ----------------------------------------------------------------------

fn payload(sender: usize, seq: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(((sender as u64) << 32) | seq);
    let len = rng.random_range(0..64);
    let mut out = Vec::with_capacity(len + 12);
    out.extend_from_slice(&(sender as u32).to_be_bytes());
    out.extend_from_slice(&seq.to_be_bytes());
    out.extend((0..len).map(|_| rng.random::<u8>()));
    out
}

fn check_stream(received: &[Vec<u8>], senders: usize, per: u64) -> (bool, bool, bool) {
    let mut next: HashMap<usize, u64> = HashMap::new();
    let mut fifo = true;
    let mut intact = true;
    for p in received {
        let sender = u32::from_be_bytes(p[0..4].try_into().unwrap()) as usize;
        let seq = u64::from_be_bytes(p[4..12].try_into().unwrap());
        let expect = next.entry(sender).or_insert(0);
        if seq != *expect {
            fifo = false;
        }
        *expect = seq + 1;
        if *p != payload(sender, seq) {
            intact = false;
        }
    }
    let once = received.len() as u64 == senders as u64 * per
        && (0..senders).all(|s| next.get(&s) == Some(&per));
    (fifo, once, intact)
}

fn criterion_11() -> Vec<Line> {
    const SENDERS: usize = 4;
    const PER: u64 = 2500;
    let t = Instant::now();

    let broker = Broker::new(Duration::ZERO);
    let topic = Topic::new("stress").unwrap();
    let sub = broker.subscribe(&topic).unwrap();
    let received: Vec<Vec<u8>> = thread::scope(|scope| {
        for s in 0..SENDERS {
            let mut publisher = broker.publisher().unwrap();
            let topic = topic.clone();
            scope.spawn(move || {
                for seq in 0..PER {
                    publisher.publish(&topic, &payload(s, seq)).unwrap();
                }
            });
        }
        (0..SENDERS as u64 * PER).map(|_| sub.recv().unwrap().payload).collect()
    });
    let extra = sub.recv_timeout(Duration::from_millis(50)).is_ok();
    let (f1, o1, i1) = check_stream(&received, SENDERS, PER);

    let (mut endpoints, _shutdown) = Communicator::create(SENDERS + 1, Duration::ZERO);
    let mut root = endpoints.remove(0);
    let received: Vec<Vec<u8>> = thread::scope(|scope| {
        for mut ep in endpoints {
            scope.spawn(move || {
                let s = ep.rank() - 1;
                for seq in 0..PER {
                    ep.mp_send(0, &payload(s, seq)).unwrap();
                }
            });
        }
        (0..SENDERS as u64 * PER).map(|_| root.mp_recv(None).unwrap().payload).collect()
    });
    let (f2, o2, i2) = check_stream(&received, SENDERS, PER);
    let secs = t.elapsed().as_secs_f64();
    let ok = f1 && o1 && i1 && !extra && f2 && o2 && i2 && secs < 30.0;
    vec![line(
        "11",
        ok,
        format!(
            "broker fifo {f1} once {} intact {i1}; message passing fifo {f2} once {o2} intact {i2}; {secs:.2} s",
            o1 && !extra
        ),
    )]
}

// -------------------------------------------------------------------------

fn guarded(id: &'static str, f: impl FnOnce() -> Vec<Line>) -> Vec<Line> {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(lines) => lines,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            vec![line(id, false, format!("panicked: {msg}"))]
        }
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut distributed = Vec::new();
    let mut all = Vec::new();
    let mut report = |lines: Vec<Line>| {
        for l in lines {
            let tag = match l.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::KnownFail => "FAIL (target inconsistent)",
                Status::Skip => "SKIP",
            };
            println!("criterion {:<4} {tag}: {}", l.id, l.detail);
            all.push(l.status);
        }
    };
    report(guarded("1", criterion_1));
    report(guarded("2", criterion_2));
    report(guarded("3", criterion_3));
    report(guarded("4", criterion_4));
    report(guarded("5", criterion_5));
    report(guarded("6", || criterion_6(&mut distributed)));
    report(guarded("7", || criterion_7(&mut distributed)));
    report(guarded("8", criterion_8));
    report(guarded("9", criterion_9));
    report(guarded("10", || criterion_10(&mut distributed)));
    report(guarded("11", criterion_11));
    let count = |s| all.iter().filter(|&&x| x == s).count();
    println!(
        "acceptance: {} passed, {} failed, {} failed with inconsistent target, {} skipped",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::KnownFail),
        count(Status::Skip)
    );
    if count(Status::Fail) == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
