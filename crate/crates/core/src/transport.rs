//! In-process transports: a topic broker for the centralized data path and
//! a rank communicator with blocking send/receive for the distributed one.
//!
//! Both deliver every message exactly once, byte-identical, and in order per
//! sender. Neither keeps retained messages. An optional fixed latency is
//! applied by the sending side before a message is handed over.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("broker stopped")]
    BrokerStopped,
    #[error("communicator shut down")]
    Shutdown,
    #[error("rank {rank} outside communicator of size {size}")]
    UnknownRank { rank: usize, size: usize },
    #[error("topic name is empty")]
    EmptyTopic,
    #[error("timed out")]
    Timeout,
    #[error("payload is empty, expected a kind tag")]
    MissingKind,
    #[error("unknown payload kind 0x{0:02X}")]
    UnknownKind(u8),
}

/// Topic names compare by exact bytes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Topic(Vec<u8>);

impl Topic {
    pub fn new(name: impl Into<Vec<u8>>) -> Result<Self, TransportError> {
        let name = name.into();
        if name.is_empty() {
            return Err(TransportError::EmptyTopic);
        }
        Ok(Topic(name))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Topic({:?})", String::from_utf8_lossy(&self.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    /// Publisher id on the broker, rank on the communicator.
    pub source: usize,
    /// Starts at 1 for every (source, topic) or (source, dest) pair.
    pub sequence: u64,
    pub payload: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub sequence: u64,
    pub deliveries: usize,
}

struct BrokerState {
    running: bool,
    subscribers: HashMap<Topic, Vec<Sender<Envelope>>>,
    next_publisher: usize,
}

struct BrokerShared {
    state: Mutex<BrokerState>,
    latency: Duration,
}

/// Cheap to clone; all clones address the same broker.
#[derive(Clone)]
pub struct Broker {
    shared: Arc<BrokerShared>,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new(Duration::ZERO)
    }
}

impl Broker {
    pub fn new(latency: Duration) -> Self {
        Broker {
            shared: Arc::new(BrokerShared {
                state: Mutex::new(BrokerState {
                    running: true,
                    subscribers: HashMap::new(),
                    next_publisher: 0,
                }),
                latency,
            }),
        }
    }

    fn state(&self) -> std::sync::MutexGuard<'_, BrokerState> {
        self.shared.state.lock().expect("broker lock poisoned")
    }

    pub fn subscribe(&self, topic: &Topic) -> Result<Subscription, TransportError> {
        let mut st = self.state();
        if !st.running {
            return Err(TransportError::BrokerStopped);
        }
        let (tx, rx) = mpsc::channel();
        st.subscribers.entry(topic.clone()).or_default().push(tx);
        Ok(Subscription { rx })
    }

    pub fn publisher(&self) -> Result<Publisher, TransportError> {
        let mut st = self.state();
        if !st.running {
            return Err(TransportError::BrokerStopped);
        }
        let id = st.next_publisher;
        st.next_publisher += 1;
        Ok(Publisher { broker: self.clone(), id, sequences: HashMap::new() })
    }

    /// Drops every subscription; blocked receivers observe `BrokerStopped`.
    pub fn stop(&self) {
        let mut st = self.state();
        st.running = false;
        st.subscribers.clear();
    }

    pub fn is_running(&self) -> bool {
        self.state().running
    }
}

pub struct Publisher {
    broker: Broker,
    id: usize,
    sequences: HashMap<Topic, u64>,
}

impl Publisher {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn publish(&mut self, topic: &Topic, payload: &[u8]) -> Result<Receipt, TransportError> {
        if !self.broker.shared.latency.is_zero() {
            thread::sleep(self.broker.shared.latency);
        }
        let mut st = self.broker.state();
        if !st.running {
            return Err(TransportError::BrokerStopped);
        }
        let seq = self.sequences.entry(topic.clone()).or_insert(0);
        *seq += 1;
        let mut deliveries = 0;
        if let Some(subs) = st.subscribers.get_mut(topic) {
            // subscribers that went away are pruned
            subs.retain(|tx| {
                let env = Envelope { source: self.id, sequence: *seq, payload: payload.to_vec() };
                let ok = tx.send(env).is_ok();
                deliveries += ok as usize;
                ok
            });
        }
        Ok(Receipt { sequence: *seq, deliveries })
    }
}

pub struct Subscription {
    rx: Receiver<Envelope>,
}

impl Subscription {
    pub fn recv(&self) -> Result<Envelope, TransportError> {
        self.rx.recv().map_err(|_| TransportError::BrokerStopped)
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<Envelope, TransportError> {
        self.rx.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => TransportError::Timeout,
            RecvTimeoutError::Disconnected => TransportError::BrokerStopped,
        })
    }

    /// `Ok(None)` when nothing is queued right now.
    pub fn try_recv(&self) -> Result<Option<Envelope>, TransportError> {
        match self.rx.try_recv() {
            Ok(e) => Ok(Some(e)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => Err(TransportError::BrokerStopped),
        }
    }
}

enum Packet {
    Data(Envelope),
    Shutdown,
}

/// Creates the endpoints of a fixed-size rank communicator.
pub struct Communicator;

impl Communicator {
    /// Rank `i` of the result is endpoint `i`; rank 0 is the master.
    pub fn create(size: usize, latency: Duration) -> (Vec<RankEndpoint>, ShutdownHandle) {
        let (txs, rxs): (Vec<_>, Vec<_>) = (0..size).map(|_| mpsc::channel::<Packet>()).unzip();
        let flag = Arc::new(AtomicBool::new(false));
        let endpoints = rxs
            .into_iter()
            .enumerate()
            .map(|(rank, rx)| RankEndpoint {
                rank,
                peers: txs.clone(),
                rx,
                pending: VecDeque::new(),
                sequences: vec![0; size],
                shutdown: flag.clone(),
                latency,
                closed: false,
            })
            .collect();
        (endpoints, ShutdownHandle { peers: txs, flag })
    }
}

#[derive(Clone)]
pub struct ShutdownHandle {
    peers: Vec<Sender<Packet>>,
    flag: Arc<AtomicBool>,
}

impl ShutdownHandle {
    /// Wakes every blocked receiver with the shutdown signal.
    pub fn shutdown(&self) {
        if !self.flag.swap(true, Ordering::SeqCst) {
            for p in &self.peers {
                let _ = p.send(Packet::Shutdown);
            }
        }
    }
}

pub struct RankEndpoint {
    rank: usize,
    peers: Vec<Sender<Packet>>,
    rx: Receiver<Packet>,
    pending: VecDeque<Envelope>,
    sequences: Vec<u64>,
    shutdown: Arc<AtomicBool>,
    latency: Duration,
    closed: bool,
}

impl RankEndpoint {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.peers.len()
    }

    pub fn mp_send(&mut self, dest: usize, payload: &[u8]) -> Result<(), TransportError> {
        if dest >= self.peers.len() {
            return Err(TransportError::UnknownRank { rank: dest, size: self.peers.len() });
        }
        if self.shutdown.load(Ordering::SeqCst) {
            return Err(TransportError::Shutdown);
        }
        if !self.latency.is_zero() {
            thread::sleep(self.latency);
        }
        self.sequences[dest] += 1;
        let env = Envelope { source: self.rank, sequence: self.sequences[dest], payload: payload.to_vec() };
        self.peers[dest].send(Packet::Data(env)).map_err(|_| TransportError::Shutdown)
    }

    /// Blocks for the next message from `source`, or from anyone when `None`.
    /// Messages from other sources stay queued in arrival order.
    pub fn mp_recv(&mut self, source: Option<usize>) -> Result<Envelope, TransportError> {
        if let Some(s) = source {
            if s >= self.peers.len() {
                return Err(TransportError::UnknownRank { rank: s, size: self.peers.len() });
            }
        }
        let wanted = |e: &Envelope| source.is_none_or(|s| e.source == s);
        if let Some(pos) = self.pending.iter().position(wanted) {
            return Ok(self.pending.remove(pos).expect("position is valid"));
        }
        if self.closed {
            return Err(TransportError::Shutdown);
        }
        loop {
            match self.rx.recv() {
                Ok(Packet::Data(e)) if wanted(&e) => return Ok(e),
                Ok(Packet::Data(e)) => self.pending.push_back(e),
                Ok(Packet::Shutdown) | Err(_) => {
                    self.closed = true;
                    return Err(TransportError::Shutdown);
                }
            }
        }
    }
}

/// Leading byte of payloads on the communicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Weights = 0x01,
    TestSet = 0x02,
    Control = 0x03,
}

impl TryFrom<u8> for PayloadKind {
    type Error = TransportError;

    fn try_from(b: u8) -> Result<Self, Self::Error> {
        match b {
            0x01 => Ok(PayloadKind::Weights),
            0x02 => Ok(PayloadKind::TestSet),
            0x03 => Ok(PayloadKind::Control),
            other => Err(TransportError::UnknownKind(other)),
        }
    }
}

pub fn tag_payload(kind: PayloadKind, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 1);
    out.push(kind as u8);
    out.extend_from_slice(body);
    out
}

pub fn untag_payload(bytes: &[u8]) -> Result<(PayloadKind, &[u8]), TransportError> {
    let (&first, body) = bytes.split_first().ok_or(TransportError::MissingKind)?;
    Ok((PayloadKind::try_from(first)?, body))
}
