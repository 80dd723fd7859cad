//! Embedded measurement log ordered by timestamp, with optional
//! append-only persistence.
//!
//! Persisted lines read `record_id,YYYY-MM-DDTHH:MM:SS.mmm,node_id,channel,value`,
//! where `channel` is the sensor name (`temperature`, `rh`, `sensor12`, ...)
//! and `value` is printed in shortest round-trip form.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use thiserror::Error;

use crate::frame::{FrameTimestamp, SensorId};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record id {0} already stored")]
    DuplicateId(u64),
    #[error("query range is reversed: {t0} > {t1}")]
    ReversedRange { t0: FrameTimestamp, t1: FrameTimestamp },
    #[error("{path}:{line}: {msg}")]
    Corrupt { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub record_id: u64,
    pub timestamp: FrameTimestamp,
    pub node_id: u32,
    pub channel: SensorId,
    pub value: f64,
}

impl MeasurementRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{:?}",
            self.record_id,
            self.timestamp.to_iso8601(),
            self.node_id,
            self.channel.name(),
            self.value
        )
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 5 {
            return Err(format!("expected 5 fields, got {}", f.len()));
        }
        Ok(MeasurementRecord {
            record_id: f[0].parse().map_err(|_| format!("bad record id {:?}", f[0]))?,
            timestamp: FrameTimestamp::parse_iso8601(f[1])
                .ok_or_else(|| format!("bad timestamp {:?}", f[1]))?,
            node_id: f[2].parse().map_err(|_| format!("bad node id {:?}", f[2]))?,
            channel: SensorId::parse(f[3]).ok_or_else(|| format!("bad channel {:?}", f[3]))?,
            value: f[4].parse().map_err(|_| format!("bad value {:?}", f[4]))?,
        })
    }
}

type Key = (FrameTimestamp, u64);

#[derive(Default)]
struct Index {
    records: BTreeMap<Key, MeasurementRecord>,
    ids: HashSet<u64>,
    next_id: u64,
}

/// One writer lock serializes inserts; readers share the index.
pub struct Store {
    index: RwLock<Index>,
    log: Option<Mutex<BufWriter<File>>>,
}

impl Default for Store {
    fn default() -> Self {
        Store::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Store { index: RwLock::new(Index::default()), log: None }
    }

    /// Opens (or creates) a persisted store, replaying existing lines.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut index = Index::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |msg: String| StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg,
                };
                let rec = MeasurementRecord::from_line(&line).map_err(corrupt)?;
                if !index.ids.insert(rec.record_id) {
                    return Err(corrupt(format!("duplicate record id {}", rec.record_id)));
                }
                index.next_id = index.next_id.max(rec.record_id + 1);
                index.records.insert((rec.timestamp, rec.record_id), rec);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Store {
            index: RwLock::new(index),
            log: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn insert(&self, rec: MeasurementRecord) -> Result<u64, StoreError> {
        let mut index = self.index.write().expect("store lock poisoned");
        if index.ids.contains(&rec.record_id) {
            return Err(StoreError::DuplicateId(rec.record_id));
        }
        if let Some(log) = &self.log {
            let mut w = log.lock().expect("store log poisoned");
            writeln!(w, "{}", rec.to_line())?;
            w.flush()?;
        }
        index.ids.insert(rec.record_id);
        index.next_id = index.next_id.max(rec.record_id + 1);
        index.records.insert((rec.timestamp, rec.record_id), rec);
        Ok(rec.record_id)
    }

    /// Inserts with the next free record id.
    pub fn append(
        &self,
        timestamp: FrameTimestamp,
        node_id: u32,
        channel: SensorId,
        value: f64,
    ) -> Result<u64, StoreError> {
        loop {
            let record_id = self.index.read().expect("store lock poisoned").next_id;
            match self.insert(MeasurementRecord { record_id, timestamp, node_id, channel, value }) {
                // another writer took the id first
                Err(StoreError::DuplicateId(_)) => continue,
                other => return other,
            }
        }
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("store lock poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records with `t0 <= timestamp <= t1`, time-ordered.
    pub fn query_range(
        &self,
        t0: FrameTimestamp,
        t1: FrameTimestamp,
        node: Option<u32>,
        channel: Option<SensorId>,
    ) -> Result<Vec<MeasurementRecord>, StoreError> {
        if t0 > t1 {
            return Err(StoreError::ReversedRange { t0, t1 });
        }
        let index = self.index.read().expect("store lock poisoned");
        Ok(index
            .records
            .range((t0, 0)..=(t1, u64::MAX))
            .map(|(_, r)| *r)
            .filter(|r| matches(r, node, channel))
            .collect())
    }

    /// The `n` most recent matching records, newest last.
    pub fn latest(&self, n: usize, node: Option<u32>, channel: Option<SensorId>) -> Vec<MeasurementRecord> {
        let index = self.index.read().expect("store lock poisoned");
        let mut out: Vec<MeasurementRecord> = index
            .records
            .values()
            .rev()
            .filter(|r| matches(r, node, channel))
            .take(n)
            .copied()
            .collect();
        out.reverse();
        out
    }

    pub fn all(&self) -> Vec<MeasurementRecord> {
        self.index.read().expect("store lock poisoned").records.values().copied().collect()
    }
}

fn matches(r: &MeasurementRecord, node: Option<u32>, channel: Option<SensorId>) -> bool {
    node.is_none_or(|n| r.node_id == n) && channel.is_none_or(|c| r.channel == c)
}
