//! Sensor transfer functions and synthetic stimulus profiles.
//!
//! The conversions mirror the acquisition boards: a 16-bit air-quality
//! sensor for temperature and humidity, and a 10-bit ADC feeding the light
//! and current channels. Profiles describe what a node was exposed to
//! (heater spikes, HVAC drops, square and sawtooth cycles) and are sampled
//! into [`SensorReading`] series with seeded noise.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub const RAW16_MAX: u32 = u16::MAX as u32;
pub const ADC_MAX: u16 = 1023;
const TWO_16: f64 = 65536.0;

/// Temperature change of one raw LSB, in degrees Celsius.
pub const TEMPERATURE_LSB: f64 = 175.7 / TWO_16;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("raw word {0} exceeds 16 bits")]
    RawOutOfRange(u32),
    #[error("ADC value {0} exceeds 10 bits")]
    AdcOutOfRange(u32),
    #[error("voltage {0} V is negative or not finite")]
    BadVoltage(f64),
    #[error("resistor {name} = {value} ohm must be strictly positive")]
    BadResistor { name: &'static str, value: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("unknown experiment {0}; expected 1 or 2")]
    UnknownExperiment(u32),
    #[error("profile config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] IoError),
}

/// `io::Error` wrapper so that [`SensorError`] stays comparable in tests.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct IoError(#[from] pub io::Error);

impl PartialEq for IoError {
    fn eq(&self, other: &Self) -> bool {
        self.0.kind() == other.0.kind()
    }
}

impl Clone for IoError {
    fn clone(&self) -> Self {
        IoError(io::Error::new(self.0.kind(), self.0.to_string()))
    }
}

impl From<io::Error> for SensorError {
    fn from(e: io::Error) -> Self {
        SensorError::Io(IoError(e))
    }
}

fn check_raw16(v: u32) -> Result<f64, SensorError> {
    if v > RAW16_MAX {
        return Err(SensorError::RawOutOfRange(v));
    }
    Ok(v as f64)
}

fn check_adc(x: u32) -> Result<f64, SensorError> {
    if x > ADC_MAX as u32 {
        return Err(SensorError::AdcOutOfRange(x));
    }
    Ok(x as f64)
}

/// Raw temperature word to degrees Celsius.
pub fn convert_temperature(s_t: u32) -> Result<f64, SensorError> {
    Ok(-45.7 + 175.7 * check_raw16(s_t)? / TWO_16)
}

/// Raw temperature and humidity words to relative humidity in percent.
pub fn convert_rh(s_t: u32, s_rh: u32) -> Result<f64, SensorError> {
    let st = check_raw16(s_t)?;
    let srh = check_raw16(s_rh)?;
    Ok((103.7 - 3.2 * st / TWO_16) * srh / TWO_16)
}

/// Real-valued raw word that [`convert_temperature`] maps to `celsius`.
pub fn invert_temperature(celsius: f64) -> f64 {
    (celsius + 45.7) * TWO_16 / 175.7
}

/// Nearest representable raw word for `celsius`, saturating at the ends.
pub fn temperature_to_raw(celsius: f64) -> u32 {
    invert_temperature(celsius).round().clamp(0.0, RAW16_MAX as f64) as u32
}

/// Raw humidity word that yields `rh` percent for the given temperature word.
pub fn rh_to_raw(rh: f64, s_t: u32) -> u32 {
    let gain = 103.7 - 3.2 * s_t.min(RAW16_MAX) as f64 / TWO_16;
    (rh * TWO_16 / gain).round().clamp(0.0, RAW16_MAX as f64) as u32
}

/// 10-bit ADC code of the current monitor to its differential voltage.
pub fn adc_to_voltage(x: u32) -> Result<f64, SensorError> {
    Ok(1.6e-3 * check_adc(x)? + 0.4)
}

/// Nearest ADC code for `volts`, saturating at the ADC range.
pub fn voltage_to_adc(volts: f64) -> u16 {
    ((volts - 0.4) / 1.6e-3).round().clamp(0.0, ADC_MAX as f64) as u16
}

/// Resistors of the shunt current monitor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentSenseConfig {
    /// Internal resistor, ohms.
    pub r1: f64,
    /// Load resistor before the output buffer, ohms.
    pub r_l: f64,
    /// Shunt resistor, ohms.
    pub r_s: f64,
}

impl Default for CurrentSenseConfig {
    fn default() -> Self {
        CurrentSenseConfig {
            r1: 5000.0,
            r_l: 100_000.0,
            r_s: 0.05,
        }
    }
}

impl CurrentSenseConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        for (name, value) in [("r1", self.r1), ("r_l", self.r_l), ("r_s", self.r_s)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SensorError::BadResistor { name, value });
            }
        }
        Ok(())
    }

    /// Volts per ampere of the monitor chain.
    pub fn transimpedance(&self) -> f64 {
        self.r_s * self.r_l / self.r1
    }
}

/// Monitor output voltage to load current in amperes.
pub fn voltage_to_current(v_an: f64, cfg: &CurrentSenseConfig) -> Result<f64, SensorError> {
    cfg.validate()?;
    if !(v_an >= 0.0 && v_an.is_finite()) {
        return Err(SensorError::BadVoltage(v_an));
    }
    Ok(v_an * cfg.r1 / (cfg.r_s * cfg.r_l))
}

/// Five-level illuminance scale (1 = very dark/night .. 5 = very high/midday).
pub fn illuminance_scale(d: u32) -> Result<u8, SensorError> {
    check_adc(d)?;
    Ok(match d {
        0..=203 => 1,
        204..=408 => 2,
        409..=613 => 3,
        614..=818 => 4,
        _ => 5,
    })
}

pub fn illuminance_label(scale: u8) -> &'static str {
    match scale {
        1 => "very dark (night)",
        2 => "dark (sunrise)",
        3 => "normal (morning)",
        4 => "high (afternoon)",
        5 => "very high (midday)",
        _ => "unknown",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Constant `offset + amplitude` above the baseline.
    Hold,
    /// Repeated triangular pulses rising to `amplitude` at mid-period.
    SpikeTrain,
    /// 50% duty cycle: `amplitude` for the first half of each period.
    Square,
    /// Linear rise to `amplitude` over each period, instant fall.
    Sawtooth,
    /// First-order approach to `amplitude`, time constant `period`.
    Step,
}

impl Shape {
    fn is_periodic(self) -> bool {
        matches!(self, Shape::SpikeTrain | Shape::Square | Shape::Sawtooth)
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Hold => "hold",
            Shape::SpikeTrain => "spike",
            Shape::Square => "square",
            Shape::Sawtooth => "sawtooth",
            Shape::Step => "step",
        }
    }

    pub fn parse(s: &str) -> Option<Shape> {
        Some(match s {
            "hold" => Shape::Hold,
            "spike" | "spike-train" => Shape::SpikeTrain,
            "square" => Shape::Square,
            "sawtooth" => Shape::Sawtooth,
            "step" => Shape::Step,
            _ => return None,
        })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One stimulus interval `[start, end)`, in seconds from run start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub shape: Shape,
    pub amplitude: f64,
    pub period: f64,
    /// Level shift applied for the whole segment before the shape.
    pub offset: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64, shape: Shape, amplitude: f64, period: f64) -> Self {
        Segment {
            start,
            end,
            shape,
            amplitude,
            period,
            offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    /// Deviation from the baseline at time `t` inside the segment.
    fn deviation(&self, t: f64) -> f64 {
        let tau = t - self.start;
        let phase = if self.period > 0.0 {
            (tau % self.period) / self.period
        } else {
            0.0
        };
        let shaped = match self.shape {
            Shape::Hold => self.amplitude,
            Shape::SpikeTrain => self.amplitude * (1.0 - (2.0 * phase - 1.0).abs()),
            Shape::Square => {
                if phase < 0.5 {
                    self.amplitude
                } else {
                    0.0
                }
            }
            Shape::Sawtooth => self.amplitude * phase,
            Shape::Step => {
                if self.period > 0.0 {
                    self.amplitude * (1.0 - (-tau / self.period).exp())
                } else {
                    self.amplitude
                }
            }
        };
        self.offset + shaped
    }
}

/// Baseline plus piecewise stimulus segments plus Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub baseline: f64,
    pub segments: Vec<Segment>,
    pub noise_std: f64,
}

impl Waveform {
    pub fn constant(baseline: f64, noise_std: f64) -> Self {
        Waveform {
            baseline,
            segments: Vec::new(),
            noise_std,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: String| Err(SensorError::InvalidProfile(m));
        if !self.baseline.is_finite() {
            return bad("baseline is not finite".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be >= 0", self.noise_std));
        }
        let mut prev_end = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.start >= 0.0 && s.end > s.start && s.end.is_finite()) {
                return bad(format!("segment {i}: times [{}, {}) invalid", s.start, s.end));
            }
            if s.start < prev_end {
                return bad(format!("segment {i} overlaps or precedes the previous one"));
            }
            if !(s.amplitude.is_finite() && s.offset.is_finite()) {
                return bad(format!("segment {i}: amplitude/offset not finite"));
            }
            if !(s.period >= 0.0 && s.period.is_finite()) {
                return bad(format!("segment {i}: period {} must be >= 0", s.period));
            }
            if s.shape.is_periodic() && s.period <= 0.0 {
                return bad(format!("segment {i}: {} needs a positive period", s.shape));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    /// Noise-free value at `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let dev = self
            .segments
            .iter()
            .find(|s| s.contains(t))
            .map_or(0.0, |s| s.deviation(t));
        self.baseline + dev
    }
}

/// Stimulus description of one node. Temperature is the primary channel;
/// the light channel defaults to a steady afternoon level.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSpec {
    pub node_id: u32,
    /// Degrees Celsius.
    pub baseline: f64,
    pub segments: Vec<Segment>,
    /// Degrees Celsius.
    pub noise_std: f64,
    /// Illuminance in ADC codes.
    pub illuminance: Option<Waveform>,
}

pub const DEFAULT_NOISE_STD: f64 = 0.05;
const DEFAULT_ILLUMINANCE: f64 = 716.0;

impl ProfileSpec {
    pub fn hold(node_id: u32, celsius: f64) -> Self {
        ProfileSpec {
            node_id,
            baseline: celsius,
            segments: Vec::new(),
            noise_std: DEFAULT_NOISE_STD,
            illuminance: None,
        }
    }

    pub fn temperature(&self) -> Waveform {
        Waveform {
            baseline: self.baseline,
            segments: self.segments.clone(),
            noise_std: self.noise_std,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        self.temperature().validate()?;
        if let Some(w) = &self.illuminance {
            w.validate()?;
        }
        Ok(())
    }
}

/// Measurements of one node at one acquisition instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorReading {
    pub node_id: u32,
    /// Seconds since run start.
    pub t: f64,
    pub temperature: f64,
    pub rh: f64,
    pub co2: f64,
    pub voc: f64,
    pub illuminance_digital: u16,
    pub current_digital: u16,
}

impl SensorReading {
    pub fn current_amps(&self, cfg: &CurrentSenseConfig) -> f64 {
        let v = adc_to_voltage(self.current_digital as u32).expect("10-bit by construction");
        voltage_to_current(v, cfg).expect("validated config")
    }

    pub fn illuminance_scale(&self) -> u8 {
        illuminance_scale(self.illuminance_digital as u32).expect("10-bit by construction")
    }
}

/// Bounded random walk used for the gas channels.
struct Walk {
    value: f64,
    lo: f64,
    hi: f64,
    step: f64,
}

impl Walk {
    fn next(&mut self, rng: &mut ChaCha8Rng, std: &Normal<f64>) -> f64 {
        self.value = (self.value + self.step * std.sample(rng)).clamp(self.lo, self.hi);
        self.value
    }
}

fn node_rng(seed: u64, node_id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (node_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Samples `spec` at the given instants. Noise streams are seeded per node so
/// the same `(spec, times, seed)` always yields the same series.
pub fn sample_profile(
    spec: &ProfileSpec,
    times: impl IntoIterator<Item = f64>,
    seed: u64,
) -> Result<Vec<SensorReading>, SensorError> {
    spec.validate()?;
    let temp = spec.temperature();
    let light = spec
        .illuminance
        .clone()
        .unwrap_or_else(|| Waveform::constant(DEFAULT_ILLUMINANCE, 0.0));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = node_rng(seed, spec.node_id);
    let cur_cfg = CurrentSenseConfig::default();
    let mut co2 = Walk {
        value: 600.0,
        lo: 400.0,
        hi: 2000.0,
        step: 5.0,
    };
    let mut voc = Walk {
        value: 100.0,
        lo: 0.0,
        hi: 1000.0,
        step: 3.0,
    };
    let mut out = Vec::new();
    for t in times {
        let celsius = temp.value_at(t) + temp.noise_std * unit.sample(&mut rng);
        let s_t = temperature_to_raw(celsius);
        let temperature = convert_temperature(s_t)?;
        let rh_target = 45.0 + 0.5 * unit.sample(&mut rng);
        let rh = convert_rh(s_t, rh_to_raw(rh_target, s_t))?;
        let lux = light.value_at(t) + light.noise_std * unit.sample(&mut rng);
        let illuminance_digital = lux.round().clamp(0.0, ADC_MAX as f64) as u16;
        let amps = 0.6 + 0.01 * unit.sample(&mut rng) + 0.02 * rng.random::<f64>();
        let current_digital = voltage_to_adc(amps * cur_cfg.transimpedance());
        out.push(SensorReading {
            node_id: spec.node_id,
            t,
            temperature,
            rh,
            co2: co2.next(&mut rng, &unit),
            voc: voc.next(&mut rng, &unit),
            illuminance_digital,
            current_digital,
        });
    }
    Ok(out)
}

/// One reading every `t_ac` seconds: `floor(duration / t_ac)` samples.
pub fn generate_profile(
    spec: &ProfileSpec,
    t_ac: f64,
    duration: f64,
    seed: u64,
) -> Result<Vec<SensorReading>, SensorError> {
    generate_profile_subsampled(spec, t_ac, duration, 1, seed)
}

/// Like [`generate_profile`] but takes `per_period` evenly spaced readings
/// inside every acquisition period.
pub fn generate_profile_subsampled(
    spec: &ProfileSpec,
    t_ac: f64,
    duration: f64,
    per_period: usize,
    seed: u64,
) -> Result<Vec<SensorReading>, SensorError> {
    if !(t_ac > 0.0 && t_ac.is_finite()) {
        return Err(SensorError::InvalidProfile(format!("t_ac {t_ac} must be > 0")));
    }
    if !(duration >= t_ac) {
        return Err(SensorError::InvalidProfile(format!(
            "duration {duration} shorter than t_ac {t_ac}"
        )));
    }
    if per_period == 0 {
        return Err(SensorError::InvalidProfile("per_period must be >= 1".into()));
    }
    let periods = (duration / t_ac + 1e-9).floor() as usize;
    let n = periods * per_period;
    let dt = t_ac / per_period as f64;
    sample_profile(spec, (0..n).map(|i| i as f64 * dt), seed)
}

pub const EXPERIMENT_DURATION: f64 = 3400.0;
pub const EXPERIMENT_T_AC: f64 = 10.0;
/// Readings per node and acquisition period in the experiment datasets.
pub const READINGS_PER_PERIOD: usize = 19;
pub const NORMAL_BASELINE: f64 = 27.5;

fn seg(start: f64, end: f64, shape: Shape, amplitude: f64, period: f64) -> Segment {
    Segment::new(start, end, shape, amplitude, period)
}

/// The three node profiles (X1, X2, X3) of a built-in experiment.
///
/// Experiment 1: heater spikes and an ice dip on X1 over a normal baseline,
/// HVAC cold drops on X2, a stable outdoor reading on X3.
///
/// Experiment 2: a rippled heat plateau followed by cold and hot spike
/// trains on X1, three 500 s square steps between 18 and 42 °C on X2, and a
/// warm outdoor X3 with two sawtooth bursts and a spike burst. Hot and cold
/// excursions are staggered across nodes so that the room mean stays
/// mostly inside the comfort band.
pub fn builtin_experiment(exp_id: u32) -> Result<[ProfileSpec; 3], SensorError> {
    use Shape::*;
    let b = NORMAL_BASELINE;
    let light = builtin_illuminance(exp_id)?;
    let [l1, l2, l3] = light.map(Some);
    match exp_id {
        1 => {
            let w = 40.0;
            let x1 = vec![
                seg(780.0, 820.0, SpikeTrain, 25.0, w),
                seg(900.0, 940.0, SpikeTrain, 30.0, w),
                seg(1020.0, 1060.0, SpikeTrain, 22.5, w),
                seg(1140.0, 1180.0, SpikeTrain, 27.5, w),
                seg(1900.0, 2100.0, SpikeTrain, 18.0 - b, 200.0),
                seg(2200.0, 2240.0, SpikeTrain, 25.0, w),
                seg(2350.0, 2390.0, SpikeTrain, 30.0, w),
                seg(2500.0, 2540.0, SpikeTrain, 22.5, w),
                seg(2650.0, 2690.0, SpikeTrain, 27.5, w),
            ];
            let hvac = -3.5;
            let x2 = vec![
                seg(0.0, 600.0, Step, hvac, 60.0),
                seg(780.0, 1200.0, Step, hvac, 60.0),
                seg(1900.0, 3000.0, Step, hvac, 60.0),
                seg(3000.0, 3400.0, Square, hvac, 240.0),
            ];
            let x3 = vec![seg(0.0, EXPERIMENT_DURATION, Hold, 1.5, 0.0)];
            Ok([
                ProfileSpec { segments: x1, illuminance: l1, ..ProfileSpec::hold(1, b) },
                ProfileSpec { segments: x2, illuminance: l2, ..ProfileSpec::hold(2, b) },
                ProfileSpec { segments: x3, illuminance: l3, ..ProfileSpec::hold(3, b) },
            ])
        }
        2 => {
            let x1 = vec![
                seg(840.0, 1800.0, Sawtooth, 5.0, 60.0).with_offset(8.0),
                seg(1800.0, 2300.0, SpikeTrain, 18.0 - b, 100.0),
                seg(2300.0, 2800.0, SpikeTrain, 22.0, 100.0),
            ];
            let cold = 18.0;
            let x2 = vec![
                seg(300.0, 800.0, Hold, 42.0 - cold, 0.0),
                seg(1800.0, 2300.0, Hold, 42.0 - cold, 0.0),
                seg(2800.0, 3300.0, Hold, 42.0 - cold, 0.0),
            ];
            let outdoor = 35.0;
            let x3 = vec![
                seg(300.0, 800.0, Sawtooth, 6.0, 100.0).with_offset(cold - outdoor),
                seg(1800.0, 2300.0, Hold, 0.0, 0.0).with_offset(22.0 - outdoor),
                seg(2300.0, 2800.0, SpikeTrain, cold - outdoor, 100.0),
                seg(2800.0, 3300.0, Sawtooth, 6.0, 100.0).with_offset(cold - outdoor),
            ];
            Ok([
                ProfileSpec { segments: x1, illuminance: l1, ..ProfileSpec::hold(1, b) },
                ProfileSpec { segments: x2, illuminance: l2, ..ProfileSpec::hold(2, cold) },
                ProfileSpec { segments: x3, illuminance: l3, ..ProfileSpec::hold(3, outdoor) },
            ])
        }
        other => Err(SensorError::UnknownExperiment(other)),
    }
}

/// Light profiles (ADC codes) for the built-in experiments: a shared
/// night-to-midday progression with per-node offsets, two extreme outlier
/// spikes on X1 at the start, a cloud spike train on X1 mid-run and a
/// stretch where X2 is forced dark.
pub fn builtin_illuminance(exp_id: u32) -> Result<[Waveform; 3], SensorError> {
    if !(1..=2).contains(&exp_id) {
        return Err(SensorError::UnknownExperiment(exp_id));
    }
    use Shape::*;
    // plateau centres of scales 1..=5
    let levels = [102.0, 306.0, 511.0, 716.0, 921.0];
    let bounds = [0.0, 600.0, 1200.0, 1800.0, 2600.0, EXPERIMENT_DURATION];
    let day = |shift: f64| -> Vec<Segment> {
        (1..5)
            .map(|i| seg(bounds[i], bounds[i + 1], Hold, levels[i] - levels[0] + shift, 0.0))
            .collect()
    };
    let mut x1 = vec![
        seg(100.0, 140.0, Hold, 1000.0 - levels[0], 0.0),
        seg(200.0, 240.0, Hold, 1000.0 - levels[0], 0.0),
    ];
    x1.extend(day(-15.0));
    // clouds: afternoon dips towards morning
    let clouds = 2000.0..2300.0;
    if let Some(pos) = x1.iter().position(|s| s.start == 1800.0) {
        let aft = x1[pos];
        x1.splice(
            pos..=pos,
            [
                seg(aft.start, clouds.start, Hold, aft.amplitude, 0.0),
                seg(clouds.start, clouds.end, SpikeTrain, -180.0, 60.0)
                    .with_offset(aft.amplitude),
                seg(clouds.end, aft.end, Hold, aft.amplitude, 0.0),
            ],
        );
    }
    let mut x2 = day(10.0);
    if let Some(pos) = x2.iter().position(|s| s.start == 2600.0) {
        let mid = x2[pos];
        x2.splice(
            pos..=pos,
            [
                seg(mid.start, 2800.0, Hold, 0.0, 0.0),
                seg(2800.0, mid.end, Hold, mid.amplitude, 0.0),
            ],
        );
    }
    let x3 = day(25.0);
    let wave = |segments| Waveform {
        baseline: levels[0],
        segments,
        noise_std: 6.0,
    };
    Ok([wave(x1), wave(x2), wave(x3)])
}

/// Writes readings as `t,node,channel,value` records.
pub fn write_series_csv(path: impl AsRef<Path>, readings: &[SensorReading]) -> io::Result<()> {
    let mut s = String::from("t,node,channel,value\n");
    for r in readings {
        let channels: [(&str, f64); 6] = [
            ("temperature", r.temperature),
            ("rh", r.rh),
            ("co2", r.co2),
            ("voc", r.voc),
            ("illuminance", r.illuminance_digital as f64),
            ("current", r.current_digital as f64),
        ];
        for (name, v) in channels {
            s.push_str(&format!("{},{},{},{}\n", r.t, r.node_id, name, v));
        }
    }
    fs::write(path, s)
}

/// Parses node profiles from a sectioned key-value text:
///
/// ```text
/// [node 1]
/// baseline = 27.5
/// noise_std = 0.05
/// segment = spike 780 820 25 40        # shape start end amplitude period [offset]
/// illuminance_baseline = 102
/// illuminance_noise = 6
/// illuminance_segment = hold 600 1200 204 0
/// ```
pub fn parse_profile_config(text: &str) -> Result<Vec<ProfileSpec>, SensorError> {
    let mut specs: Vec<ProfileSpec> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| SensorError::Config { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let id = header
                .trim()
                .strip_prefix("node")
                .and_then(|n| n.trim().parse::<u32>().ok())
                .ok_or_else(|| err(format!("bad section header [{header}]")))?;
            specs.push(ProfileSpec::hold(id, NORMAL_BASELINE));
            continue;
        }
        let spec = specs
            .last_mut()
            .ok_or_else(|| err("key outside of a [node N] section".into()))?;
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(format!("{key}: {v:?} is not a number")))
        };
        match key {
            "baseline" => spec.baseline = num(value)?,
            "noise_std" => spec.noise_std = num(value)?,
            "segment" => spec.segments.push(parse_segment(value).map_err(err)?),
            "illuminance_baseline" => light(spec).baseline = num(value)?,
            "illuminance_noise" => light(spec).noise_std = num(value)?,
            "illuminance_segment" => {
                let s = parse_segment(value).map_err(err)?;
                light(spec).segments.push(s)
            }
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

fn light(spec: &mut ProfileSpec) -> &mut Waveform {
    spec.illuminance
        .get_or_insert_with(|| Waveform::constant(DEFAULT_ILLUMINANCE, 0.0))
}

fn parse_segment(v: &str) -> Result<Segment, String> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if !(5..=6).contains(&parts.len()) {
        return Err(format!(
            "segment needs `shape start end amplitude period [offset]`, got {v:?}"
        ));
    }
    let shape = Shape::parse(parts[0]).ok_or_else(|| format!("unknown shape {:?}", parts[0]))?;
    let mut nums = [0.0f64; 5];
    for (slot, p) in nums.iter_mut().zip(&parts[1..]) {
        *slot = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(Segment::new(nums[0], nums[1], shape, nums[2], nums[3]).with_offset(nums[4]))
}

pub fn load_profile_config(path: impl AsRef<Path>) -> Result<Vec<ProfileSpec>, SensorError> {
    parse_profile_config(&fs::read_to_string(path)?)
}

/// Inverse of [`parse_profile_config`].
pub fn format_profile_config(specs: &[ProfileSpec]) -> String {
    let seg_line = |s: &Segment| {
        format!(
            "{} {} {} {} {} {}",
            s.shape, s.start, s.end, s.amplitude, s.period, s.offset
        )
    };
    let mut out = String::new();
    for spec in specs {
        out.push_str(&format!("[node {}]\n", spec.node_id));
        out.push_str(&format!("baseline = {}\n", spec.baseline));
        out.push_str(&format!("noise_std = {}\n", spec.noise_std));
        for s in &spec.segments {
            out.push_str(&format!("segment = {}\n", seg_line(s)));
        }
        if let Some(w) = &spec.illuminance {
            out.push_str(&format!("illuminance_baseline = {}\n", w.baseline));
            out.push_str(&format!("illuminance_noise = {}\n", w.noise_std));
            for s in &w.segments {
                out.push_str(&format!("illuminance_segment = {}\n", seg_line(s)));
            }
        }
        out.push('\n');
    }
    out
}
