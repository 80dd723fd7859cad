//! Sensor data frame codec.
//!
//! Layout (byte offsets from 0, `k` = number of measurements):
//!
//! ```text
//! 0        frame type (0 = sensor data, 1 = control data)
//! 1..=3    node id, 24-bit big-endian
//! 4        number of sensors k
//! 5..=10   timestamp, 48 bits MSB-first:
//!          year(12) month(4) day(5) hour(5) minute(6) second(6) ms(10)
//! 11+5i    sensor id of measurement i
//! 12+5i..  measure i, IEEE 754 single precision, big-endian (4 bytes)
//! N-2      '\n'
//! N-1      '\r'
//! ```
//!
//! `N = 13 + 5k`.

use std::fmt;

use thiserror::Error;

pub const HEADER_LEN: usize = 5;
pub const TIMESTAMP_LEN: usize = 6;
pub const MEASUREMENT_LEN: usize = 5;
pub const TAIL: [u8; 2] = *b"\n\r";
/// Bytes of a frame that carries no measurements.
pub const ENVELOPE_LEN: usize = HEADER_LEN + TIMESTAMP_LEN + TAIL.len();
pub const MAX_NODE_ID: u32 = (1 << 24) - 1;

/// Errors raised while encoding or decoding frames.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("node id {0} does not fit in 24 bits")]
    NodeIdOutOfRange(u32),
    #[error("{frame_type:?} frame cannot carry {count} measurements")]
    SensorCountOutOfRange { frame_type: FrameType, count: usize },
    #[error("header declares {declared} sensors but frame holds {actual} measurements")]
    SensorCountMismatch { declared: u8, actual: usize },
    #[error("timestamp field {field} = {value} outside {min}..={max}")]
    TimestampField {
        field: &'static str,
        value: u32,
        min: u32,
        max: u32,
    },
    #[error("unknown frame type {0}")]
    UnknownFrameType(u8),
    #[error("frame of {0} bytes is shorter than the {ENVELOPE_LEN}-byte envelope")]
    TooShort(usize),
    #[error("frame is {actual} bytes but {declared} sensors require {expected}")]
    LengthMismatch {
        declared: u8,
        expected: usize,
        actual: usize,
    },
    #[error("frame tail is {0:02X?}, expected 0A 0D")]
    BadTail([u8; 2]),
    #[error("timestamp must be exactly {TIMESTAMP_LEN} bytes, got {0}")]
    TimestampLength(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    SensorData = 0,
    ControlData = 1,
}

impl TryFrom<u8> for FrameType {
    type Error = FrameError;

    fn try_from(v: u8) -> Result<Self, FrameError> {
        match v {
            0 => Ok(FrameType::SensorData),
            1 => Ok(FrameType::ControlData),
            other => Err(FrameError::UnknownFrameType(other)),
        }
    }
}

/// Sensor identifiers. Ids that the frame table leaves unassigned are kept
/// as `Other` so that frames carrying them still round-trip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorId {
    Temperature,
    RelativeHumidity,
    Illuminance,
    Co2,
    Current,
    Voc,
    Other(u8),
}

impl SensorId {
    pub const fn code(self) -> u8 {
        match self {
            SensorId::Temperature => 0,
            SensorId::RelativeHumidity => 1,
            SensorId::Illuminance => 2,
            SensorId::Co2 => 3,
            SensorId::Current => 6,
            SensorId::Voc => 10,
            SensorId::Other(c) => c,
        }
    }

    pub const fn from_code(code: u8) -> Self {
        match code {
            0 => SensorId::Temperature,
            1 => SensorId::RelativeHumidity,
            2 => SensorId::Illuminance,
            3 => SensorId::Co2,
            6 => SensorId::Current,
            10 => SensorId::Voc,
            c => SensorId::Other(c),
        }
    }

    pub fn name(self) -> String {
        match self {
            SensorId::Temperature => "temperature".into(),
            SensorId::RelativeHumidity => "rh".into(),
            SensorId::Illuminance => "illuminance".into(),
            SensorId::Co2 => "co2".into(),
            SensorId::Current => "current".into(),
            SensorId::Voc => "voc".into(),
            SensorId::Other(c) => format!("sensor{c}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "temperature" => SensorId::Temperature,
            "rh" => SensorId::RelativeHumidity,
            "illuminance" => SensorId::Illuminance,
            "co2" => SensorId::Co2,
            "current" => SensorId::Current,
            "voc" => SensorId::Voc,
            other => SensorId::from_code(other.strip_prefix("sensor")?.parse().ok()?),
        })
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub frame_type: FrameType,
    pub node_id: u32,
    pub sensor_count: u8,
}

/// Calendar timestamp with millisecond resolution. Only per-field ranges
/// are enforced; impossible dates such as February 30 are accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameTimestamp {
    pub year: u16,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
    pub millisecond: u16,
}

// (name, bit width, min, max), MSB first.
const TS_FIELDS: [(&str, u32, u32, u32); 7] = [
    ("year", 12, 1970, 2100),
    ("month", 4, 1, 12),
    ("day", 5, 1, 31),
    ("hour", 5, 0, 23),
    ("minute", 6, 0, 59),
    ("second", 6, 0, 59),
    ("millisecond", 10, 0, 999),
];

impl FrameTimestamp {
    pub fn new(
        year: u16,
        month: u8,
        day: u8,
        hour: u8,
        minute: u8,
        second: u8,
        millisecond: u16,
    ) -> Result<Self, FrameError> {
        let ts = FrameTimestamp {
            year,
            month,
            day,
            hour,
            minute,
            second,
            millisecond,
        };
        ts.validate()?;
        Ok(ts)
    }

    fn fields(&self) -> [u32; 7] {
        [
            self.year as u32,
            self.month as u32,
            self.day as u32,
            self.hour as u32,
            self.minute as u32,
            self.second as u32,
            self.millisecond as u32,
        ]
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        for (&(field, _, min, max), value) in TS_FIELDS.iter().zip(self.fields()) {
            if value < min || value > max {
                return Err(FrameError::TimestampField {
                    field,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Timestamp `offset_ms` milliseconds after `self`, on a simplified
    /// calendar of 28-day months. Used to stamp simulated acquisitions;
    /// every produced value stays inside the per-field ranges.
    pub fn add_millis(&self, offset_ms: u64) -> FrameTimestamp {
        let ms_total = self.millisecond as u64 + offset_ms;
        let s_total = self.second as u64 + ms_total / 1000;
        let m_total = self.minute as u64 + s_total / 60;
        let h_total = self.hour as u64 + m_total / 60;
        let d_total = (self.day.min(28) - 1) as u64 + h_total / 24;
        let mo_total = (self.month - 1) as u64 + d_total / 28;
        let year = (self.year as u64 + mo_total / 12).min(2100) as u16;
        FrameTimestamp {
            year,
            month: (mo_total % 12) as u8 + 1,
            day: (d_total % 28) as u8 + 1,
            hour: (h_total % 24) as u8,
            minute: (m_total % 60) as u8,
            second: (s_total % 60) as u8,
            millisecond: (ms_total % 1000) as u16,
        }
    }

    /// `YYYY-MM-DDTHH:MM:SS.mmm`
    pub fn to_iso8601(&self) -> String {
        format!(
            "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}",
            self.year, self.month, self.day, self.hour, self.minute, self.second, self.millisecond
        )
    }

    pub fn parse_iso8601(s: &str) -> Option<FrameTimestamp> {
        let b = s.as_bytes();
        if b.len() != 23
            || b[4] != b'-'
            || b[7] != b'-'
            || b[10] != b'T'
            || b[13] != b':'
            || b[16] != b':'
            || b[19] != b'.'
        {
            return None;
        }
        let num = |r: std::ops::Range<usize>| s.get(r)?.parse::<u16>().ok();
        FrameTimestamp::new(
            num(0..4)?,
            num(5..7)? as u8,
            num(8..10)? as u8,
            num(11..13)? as u8,
            num(14..16)? as u8,
            num(17..19)? as u8,
            num(20..23)?,
        )
        .ok()
    }
}

impl fmt::Display for FrameTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}

pub fn pack_timestamp(ts: &FrameTimestamp) -> Result<[u8; TIMESTAMP_LEN], FrameError> {
    ts.validate()?;
    let mut word: u64 = 0;
    for (&(_, bits, _, _), value) in TS_FIELDS.iter().zip(ts.fields()) {
        word = (word << bits) | value as u64;
    }
    let be = word.to_be_bytes();
    let mut out = [0u8; TIMESTAMP_LEN];
    out.copy_from_slice(&be[8 - TIMESTAMP_LEN..]);
    Ok(out)
}

pub fn unpack_timestamp(bytes: &[u8]) -> Result<FrameTimestamp, FrameError> {
    if bytes.len() != TIMESTAMP_LEN {
        return Err(FrameError::TimestampLength(bytes.len()));
    }
    let mut be = [0u8; 8];
    be[8 - TIMESTAMP_LEN..].copy_from_slice(bytes);
    let mut word = u64::from_be_bytes(be);
    let mut vals = [0u32; 7];
    for (i, &(_, bits, _, _)) in TS_FIELDS.iter().enumerate().rev() {
        vals[i] = (word & ((1u64 << bits) - 1)) as u32;
        word >>= bits;
    }
    let ts = FrameTimestamp {
        year: vals[0] as u16,
        month: vals[1] as u8,
        day: vals[2] as u8,
        hour: vals[3] as u8,
        minute: vals[4] as u8,
        second: vals[5] as u8,
        millisecond: vals[6] as u16,
    };
    ts.validate()?;
    Ok(ts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub sensor: SensorId,
    pub value: f32,
}

impl Measurement {
    pub fn new(sensor: SensorId, value: f32) -> Self {
        Measurement { sensor, value }
    }
}

/// Measurements of one acquisition period from one node.
///
/// Sensor data frames carry 1..=255 measurements. Control frames share the
/// envelope; their entries are opaque and they may carry none.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame {
    pub header: FrameHeader,
    pub timestamp: FrameTimestamp,
    pub measurements: Vec<Measurement>,
}

impl SensorFrame {
    /// Builds a frame whose header count matches `measurements`.
    pub fn new(
        frame_type: FrameType,
        node_id: u32,
        timestamp: FrameTimestamp,
        measurements: Vec<Measurement>,
    ) -> Result<Self, FrameError> {
        let count = measurements.len();
        check_count(frame_type, count)?;
        let frame = SensorFrame {
            header: FrameHeader {
                frame_type,
                node_id,
                sensor_count: count as u8,
            },
            timestamp,
            measurements,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn sensor_data(
        node_id: u32,
        timestamp: FrameTimestamp,
        measurements: Vec<Measurement>,
    ) -> Result<Self, FrameError> {
        Self::new(FrameType::SensorData, node_id, timestamp, measurements)
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.header.node_id > MAX_NODE_ID {
            return Err(FrameError::NodeIdOutOfRange(self.header.node_id));
        }
        check_count(self.header.frame_type, self.measurements.len())?;
        if self.header.sensor_count as usize != self.measurements.len() {
            return Err(FrameError::SensorCountMismatch {
                declared: self.header.sensor_count,
                actual: self.measurements.len(),
            });
        }
        self.timestamp.validate()
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.measurements.len())
    }

    pub fn measurement(&self, sensor: SensorId) -> Option<f32> {
        self.measurements
            .iter()
            .find(|m| m.sensor == sensor)
            .map(|m| m.value)
    }
}

fn check_count(frame_type: FrameType, count: usize) -> Result<(), FrameError> {
    let min = match frame_type {
        FrameType::SensorData => 1,
        FrameType::ControlData => 0,
    };
    if count < min || count > u8::MAX as usize {
        return Err(FrameError::SensorCountOutOfRange { frame_type, count });
    }
    Ok(())
}

pub const fn encoded_len(sensor_count: usize) -> usize {
    ENVELOPE_LEN + MEASUREMENT_LEN * sensor_count
}

pub fn encode_frame(frame: &SensorFrame) -> Result<Vec<u8>, FrameError> {
    frame.validate()?;
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.push(frame.header.frame_type as u8);
    out.extend_from_slice(&frame.header.node_id.to_be_bytes()[1..]);
    out.push(frame.header.sensor_count);
    out.extend_from_slice(&pack_timestamp(&frame.timestamp)?);
    for m in &frame.measurements {
        out.push(m.sensor.code());
        out.extend_from_slice(&m.value.to_bits().to_be_bytes());
    }
    out.extend_from_slice(&TAIL);
    debug_assert_eq!(out.len(), frame.encoded_len());
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<SensorFrame, FrameError> {
    if bytes.len() < ENVELOPE_LEN {
        return Err(FrameError::TooShort(bytes.len()));
    }
    let frame_type = FrameType::try_from(bytes[0])?;
    let node_id = u32::from_be_bytes([0, bytes[1], bytes[2], bytes[3]]);
    let declared = bytes[4];
    let expected = encoded_len(declared as usize);
    if bytes.len() != expected {
        return Err(FrameError::LengthMismatch {
            declared,
            expected,
            actual: bytes.len(),
        });
    }
    check_count(frame_type, declared as usize)?;
    let tail = [bytes[expected - 2], bytes[expected - 1]];
    if tail != TAIL {
        return Err(FrameError::BadTail(tail));
    }
    let timestamp = unpack_timestamp(&bytes[HEADER_LEN..HEADER_LEN + TIMESTAMP_LEN])?;
    let body = &bytes[HEADER_LEN + TIMESTAMP_LEN..expected - 2];
    let measurements = body
        .chunks_exact(MEASUREMENT_LEN)
        .map(|c| Measurement {
            sensor: SensorId::from_code(c[0]),
            value: f32::from_bits(u32::from_be_bytes([c[1], c[2], c[3], c[4]])),
        })
        .collect();
    Ok(SensorFrame {
        header: FrameHeader {
            frame_type,
            node_id,
            sensor_count: declared,
        },
        timestamp,
        measurements,
    })
}

/// Space-separated uppercase hex, as used by the conformance fixtures.
pub fn to_hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02X}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses hex with arbitrary whitespace; `#` starts a comment line.
pub fn from_hex(text: &str) -> Option<Vec<u8>> {
    let digits: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    if !digits.len().is_multiple_of(2) {
        return None;
    }
    (0..digits.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts() -> FrameTimestamp {
        FrameTimestamp::new(2023, 6, 15, 12, 30, 45, 500).unwrap()
    }

    fn one_temp(value: f32) -> SensorFrame {
        SensorFrame::sensor_data(7, ts(), vec![Measurement::new(SensorId::Temperature, value)])
            .unwrap()
    }

    // Independent oracle: sign/exponent/mantissa from first principles.
    fn ieee754_oracle(v: f64) -> [u8; 4] {
        assert!(v.is_finite() && v != 0.0);
        let sign = if v < 0.0 { 1u32 } else { 0 };
        let mut m = v.abs();
        let mut e: i32 = 0;
        while m >= 2.0 {
            m /= 2.0;
            e += 1;
        }
        while m < 1.0 {
            m *= 2.0;
            e -= 1;
        }
        let frac = ((m - 1.0) * (1u32 << 23) as f64).round() as u32;
        let word = (sign << 31) | (((e + 127) as u32) << 23) | frac;
        word.to_be_bytes()
    }

    #[test]
    fn single_temperature_frame_is_18_bytes() {
        let bytes = encode_frame(&one_temp(27.5)).unwrap();
        assert_eq!(bytes.len(), 18);
        assert_eq!(&bytes[16..], &[0x0A, 0x0D]);
    }

    #[test]
    fn measure_bytes() {
        let bytes = encode_frame(&one_temp(1.0)).unwrap();
        assert_eq!(&bytes[12..16], &[0x3F, 0x80, 0x00, 0x00]);
        let bytes = encode_frame(&one_temp(27.5)).unwrap();
        assert_eq!(ieee754_oracle(27.5), [0x41, 0xDC, 0x00, 0x00]);
        assert_eq!(&bytes[12..16], &ieee754_oracle(27.5));
        assert_eq!(ieee754_oracle(-45.7), (-45.7f32).to_bits().to_be_bytes());
    }

    #[test]
    fn field_offsets() {
        let bytes = encode_frame(&one_temp(1.0)).unwrap();
        assert_eq!(bytes[0], 0);
        assert_eq!(&bytes[1..4], &[0, 0, 7]);
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[11], 0);
    }

    fn pack_oracle(f: [u64; 7]) -> [u8; 6] {
        let word = f[0] * (1 << 36)
            + f[1] * (1 << 32)
            + f[2] * (1 << 27)
            + f[3] * (1 << 22)
            + f[4] * (1 << 16)
            + f[5] * (1 << 10)
            + f[6];
        let mut out = [0u8; 6];
        for (i, b) in out.iter_mut().enumerate() {
            *b = ((word / 256u64.pow(5 - i as u32)) % 256) as u8;
        }
        out
    }

    #[test]
    fn pack_timestamp_matches_oracle() {
        let packed = pack_timestamp(&ts()).unwrap();
        assert_eq!(packed, pack_oracle([2023, 6, 15, 12, 30, 45, 500]));
        assert_eq!(packed, [0x7E, 0x76, 0x7B, 0x1E, 0xB5, 0xF4]);
    }

    #[test]
    fn pack_timestamp_extremes() {
        let min = FrameTimestamp::new(1970, 1, 1, 0, 0, 0, 0).unwrap();
        let packed = pack_timestamp(&min).unwrap();
        assert_eq!(packed, pack_oracle([1970, 1, 1, 0, 0, 0, 0]));
        assert_eq!(((packed[0] as u16) << 4) | (packed[1] >> 4) as u16, 1970);
        let max = FrameTimestamp::new(2100, 12, 31, 23, 59, 59, 999).unwrap();
        let packed = pack_timestamp(&max).unwrap();
        assert_eq!(packed, pack_oracle([2100, 12, 31, 23, 59, 59, 999]));
        assert_eq!(unpack_timestamp(&packed).unwrap(), max);
    }

    #[test]
    fn timestamp_range_errors() {
        assert!(matches!(
            FrameTimestamp::new(2023, 13, 1, 0, 0, 0, 0),
            Err(FrameError::TimestampField { field: "month", .. })
        ));
        assert!(matches!(
            unpack_timestamp(&[0; 6]),
            Err(FrameError::TimestampField { field: "year", value: 0, .. })
        ));
        assert!(matches!(
            unpack_timestamp(&[0; 5]),
            Err(FrameError::TimestampLength(5))
        ));
        // Feb 30 only violates the calendar, not a field range
        assert!(FrameTimestamp::new(2024, 2, 30, 0, 0, 0, 0).is_ok());
    }

    #[test]
    fn unpack_round_trip() {
        assert_eq!(unpack_timestamp(&pack_timestamp(&ts()).unwrap()).unwrap(), ts());
    }

    #[test]
    fn decode_errors_are_distinct() {
        let good = encode_frame(&one_temp(20.0)).unwrap();
        assert_eq!(decode_frame(&good).unwrap(), one_temp(20.0));

        let truncated = &good[..good.len() - 2];
        assert!(matches!(
            decode_frame(truncated),
            Err(FrameError::LengthMismatch { declared: 1, .. })
        ));
        assert!(matches!(decode_frame(&good[..5]), Err(FrameError::TooShort(5))));

        let mut bad_type = good.clone();
        bad_type[0] = 9;
        assert_eq!(decode_frame(&bad_type), Err(FrameError::UnknownFrameType(9)));

        let mut bad_tail = good.clone();
        bad_tail[17] = b'\n';
        assert!(matches!(decode_frame(&bad_tail), Err(FrameError::BadTail(_))));

        let mut bad_ts = good.clone();
        bad_ts[5] = 0;
        assert!(matches!(
            decode_frame(&bad_ts),
            Err(FrameError::TimestampField { field: "year", .. })
        ));

        let mut zero_sensors = good[..13].to_vec();
        zero_sensors[4] = 0;
        zero_sensors[11] = b'\n';
        zero_sensors[12] = b'\r';
        assert!(matches!(
            decode_frame(&zero_sensors),
            Err(FrameError::SensorCountOutOfRange { .. })
        ));
    }

    #[test]
    fn encode_rejects_bad_fields() {
        let mut f = one_temp(1.0);
        f.header.node_id = 1 << 24;
        assert_eq!(encode_frame(&f), Err(FrameError::NodeIdOutOfRange(1 << 24)));
        let mut f = one_temp(1.0);
        f.header.sensor_count = 2;
        assert!(matches!(
            encode_frame(&f),
            Err(FrameError::SensorCountMismatch { declared: 2, actual: 1 })
        ));
        assert!(SensorFrame::sensor_data(1, ts(), vec![]).is_err());
        let many = vec![Measurement::new(SensorId::Voc, 0.0); 256];
        assert!(SensorFrame::sensor_data(1, ts(), many).is_err());
    }

    #[test]
    fn control_frames_may_be_empty() {
        let f = SensorFrame::new(FrameType::ControlData, MAX_NODE_ID, ts(), vec![]).unwrap();
        let bytes = encode_frame(&f).unwrap();
        assert_eq!(bytes.len(), ENVELOPE_LEN);
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn reserved_sensor_ids_round_trip() {
        let f = SensorFrame::sensor_data(
            3,
            ts(),
            vec![Measurement::new(SensorId::Other(4), 2.5)],
        )
        .unwrap();
        assert_eq!(decode_frame(&encode_frame(&f).unwrap()).unwrap(), f);
        assert_eq!(SensorId::parse("sensor4"), Some(SensorId::Other(4)));
        assert_eq!(SensorId::parse("sensor6"), Some(SensorId::Current));
    }

    #[test]
    fn iso8601_round_trip() {
        let s = ts().to_iso8601();
        assert_eq!(s, "2023-06-15T12:30:45.500");
        assert_eq!(FrameTimestamp::parse_iso8601(&s), Some(ts()));
        assert_eq!(FrameTimestamp::parse_iso8601("2023-06-15 12:30:45.500"), None);
    }

    #[test]
    fn add_millis_carries() {
        let t = FrameTimestamp::new(2023, 12, 28, 23, 59, 59, 999).unwrap();
        let n = t.add_millis(1);
        assert_eq!(n, FrameTimestamp::new(2024, 1, 1, 0, 0, 0, 0).unwrap());
        assert!(t.add_millis(10_000) > t);
    }

    #[test]
    fn hex_helpers() {
        let bytes = vec![0x00, 0xAB, 0x0D];
        assert_eq!(to_hex(&bytes), "00 AB 0D");
        assert_eq!(from_hex("# c\n00 ab\n0D\n"), Some(bytes));
        assert_eq!(from_hex("0"), None);
    }
}
