//! Simulated message-passing ranks.
//!
//! Each rank runs on its own thread and owns a [`Comm`] endpoint. Ranks
//! share no numeric state; everything crosses over typed channels. Every
//! collective is a fixed schedule: contributions travel to rank 0, which
//! combines them in ascending rank order, and the all-variants then
//! broadcast the result back. Message and byte counts are recorded per
//! endpoint under the current scope label.

mod exact;
mod halo;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exact::ExactSum;
pub use halo::{halo_exchange, HaloPlan, Neighbor};

/// Which collectives may be replaced by rooted variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Collectives {
    /// Every reduction and gather delivers to all ranks.
    #[default]
    AllCollectives,
    /// Reductions and gathers consumed only by rank 0 use reduce/gather.
    RootedWhereLegal,
}

impl FromStr for Collectives {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-collectives" => Ok(Collectives::AllCollectives),
            "rooted-where-legal" => Ok(Collectives::RootedWhereLegal),
            _ => Err(Error::Config(format!("unknown collective variant '{s}'"))),
        }
    }
}

impl fmt::Display for Collectives {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Collectives::AllCollectives => "all-collectives",
            Collectives::RootedWhereLegal => "rooted-where-legal",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Allreduce,
    Reduce,
    Gather,
    Allgather,
    Halo,
    Abort,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Allreduce => "allreduce",
            Kind::Reduce => "reduce",
            Kind::Gather => "gather",
            Kind::Allgather => "allgather",
            Kind::Halo => "halo",
            Kind::Abort => "abort",
        }
    }
}

#[derive(Debug)]
enum Payload {
    Scalar(f64),
    Vector(Vec<f64>),
    Exact(Box<ExactSum>),
    None,
}

impl Payload {
    fn bytes(&self) -> u64 {
        match self {
            Payload::Scalar(_) => 8,
            Payload::Vector(v) => 8 * v.len() as u64,
            Payload::Exact(_) => ExactSum::wire_bytes() as u64,
            Payload::None => 0,
        }
    }
}

#[derive(Debug)]
struct Message {
    src: usize,
    kind: Kind,
    payload: Payload,
}

/// Per-collective traffic counters. `calls` is recorded by rank 0 only, so
/// merged statistics count each collective invocation once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    pub calls: u64,
    pub messages: u64,
    pub bytes: u64,
}

impl std::ops::AddAssign for CommStats {
    fn add_assign(&mut self, rhs: CommStats) {
        self.calls += rhs.calls;
        self.messages += rhs.messages;
        self.bytes += rhs.bytes;
    }
}

/// Statistics keyed by `"<scope>.<collective>"`.
pub type CommLog = BTreeMap<String, CommStats>;

pub fn merge_logs<'a, I: IntoIterator<Item = &'a CommLog>>(logs: I) -> CommLog {
    let mut out = CommLog::new();
    for log in logs {
        for (k, v) in log {
            *out.entry(k.clone()).or_default() += *v;
        }
    }
    out
}

/// A group of `size` simulated ranks.
#[derive(Clone, Debug)]
pub struct RankGroup {
    size: usize,
    timeout: Duration,
}

impl RankGroup {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("a rank group needs at least one rank".into()));
        }
        Ok(RankGroup { size, timeout: Duration::from_secs(300) })
    }

    /// How long a blocked receive waits before reporting a protocol error.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Creates one connected endpoint per rank.
    pub fn endpoints(&self) -> Vec<Comm> {
        let (senders, inboxes): (Vec<Sender<Message>>, Vec<Receiver<Message>>) =
            (0..self.size).map(|_| channel()).unzip();
        inboxes
            .into_iter()
            .enumerate()
            .map(|(rank, inbox)| Comm {
                rank,
                size: self.size,
                senders: senders.clone(),
                inbox,
                pending: (0..self.size).map(|_| VecDeque::new()).collect(),
                scope: "default".to_string(),
                log: CommLog::new(),
                timeout: self.timeout,
            })
            .collect()
    }

    /// Runs `f` on every rank concurrently and returns results in rank order.
    pub fn run<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut Comm) -> R + Sync,
    {
        let endpoints = self.endpoints();
        std::thread::scope(|s| {
            let handles: Vec<_> = endpoints
                .into_iter()
                .map(|mut comm| {
                    let f = &f;
                    s.spawn(move || f(&mut comm))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
                .collect()
        })
    }
}

/// One rank's endpoint.
pub struct Comm {
    rank: usize,
    size: usize,
    senders: Vec<Sender<Message>>,
    inbox: Receiver<Message>,
    pending: Vec<VecDeque<Message>>,
    scope: String,
    log: CommLog,
    timeout: Duration,
}

impl fmt::Debug for Comm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Comm").field("rank", &self.rank).field("size", &self.size).finish()
    }
}

impl Comm {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_root(&self) -> bool {
        self.rank == 0
    }

    /// Label under which subsequent traffic is counted.
    pub fn set_scope(&mut self, scope: &str) {
        self.scope.clear();
        self.scope.push_str(scope);
    }

    pub fn log(&self) -> &CommLog {
        &self.log
    }

    pub fn take_log(&mut self) -> CommLog {
        std::mem::take(&mut self.log)
    }

    fn stats(&mut self, kind: Kind) -> &mut CommStats {
        let key = format!("{}.{}", self.scope, kind.name());
        self.log.entry(key).or_default()
    }

    fn count_call(&mut self, kind: Kind) {
        if self.rank == 0 {
            self.stats(kind).calls += 1;
        }
    }

    fn protocol(&self, msg: String) -> Error {
        Error::Protocol { rank: self.rank, msg }
    }

    fn send(&mut self, dst: usize, kind: Kind, payload: Payload) -> Result<()> {
        let stats = self.stats(kind);
        stats.messages += 1;
        stats.bytes += payload.bytes();
        let msg = Message { src: self.rank, kind, payload };
        self.senders[dst]
            .send(msg)
            .map_err(|_| self.protocol(format!("rank {dst} has left the group")))
    }

    /// Tells every other rank to give up; used once a mismatch is detected.
    fn abort(&self) {
        for (dst, tx) in self.senders.iter().enumerate() {
            if dst != self.rank {
                let _ = tx.send(Message { src: self.rank, kind: Kind::Abort, payload: Payload::None });
            }
        }
    }

    fn recv(&mut self, src: usize, kind: Kind) -> Result<Payload> {
        let msg = loop {
            if let Some(m) = self.pending[src].pop_front() {
                break m;
            }
            match self.inbox.recv_timeout(self.timeout) {
                Ok(m) if m.kind == Kind::Abort => {
                    return Err(self.protocol(format!("aborted by rank {}", m.src)));
                }
                Ok(m) => self.pending[m.src].push_back(m),
                Err(RecvTimeoutError::Timeout) => {
                    self.abort();
                    return Err(self.protocol(format!(
                        "timed out waiting for {} from rank {src}",
                        kind.name()
                    )));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.protocol("group disconnected".into()));
                }
            }
        };
        if msg.kind != kind {
            self.abort();
            return Err(self.protocol(format!(
                "expected {} from rank {src}, got {}",
                kind.name(),
                msg.kind.name()
            )));
        }
        Ok(msg.payload)
    }

    fn mismatch(&self, what: &str) -> Error {
        self.abort();
        self.protocol(format!("unexpected payload in {what}"))
    }

    /// Gathers contributions to rank 0 and folds them in rank order.
    fn fold_to_root<T>(
        &mut self,
        kind: Kind,
        value: T,
        wrap: impl Fn(T) -> Payload,
        unwrap: impl Fn(Payload) -> Option<T>,
        mut combine: impl FnMut(&mut T, T),
    ) -> Result<Option<T>> {
        if self.rank != 0 {
            self.send(0, kind, wrap(value))?;
            return Ok(None);
        }
        let mut acc = value;
        for src in 1..self.size {
            let p = self.recv(src, kind)?;
            let v = unwrap(p).ok_or_else(|| self.mismatch(kind.name()))?;
            combine(&mut acc, v);
        }
        Ok(Some(acc))
    }

    fn broadcast<T: Clone>(
        &mut self,
        kind: Kind,
        value: Option<T>,
        wrap: impl Fn(T) -> Payload,
        unwrap: impl Fn(Payload) -> Option<T>,
    ) -> Result<T> {
        if self.rank == 0 {
            let v = value.expect("root holds the value");
            for dst in 1..self.size {
                self.send(dst, kind, wrap(v.clone()))?;
            }
            Ok(v)
        } else {
            let p = self.recv(0, kind)?;
            unwrap(p).ok_or_else(|| self.mismatch(kind.name()))
        }
    }

    /// Sum over ranks, delivered to every rank.
    pub fn allreduce_sum(&mut self, value: f64) -> Result<f64> {
        self.count_call(Kind::Allreduce);
        let total = self.fold_to_root(Kind::Allreduce, value, Payload::Scalar, scalar, |a, v| *a += v)?;
        self.broadcast(Kind::Allreduce, total, Payload::Scalar, scalar)
    }

    /// Sum over ranks, delivered to rank 0 only.
    pub fn reduce_sum(&mut self, value: f64) -> Result<Option<f64>> {
        self.count_call(Kind::Reduce);
        self.fold_to_root(Kind::Reduce, value, Payload::Scalar, scalar, |a, v| *a += v)
    }

    /// Exact sum of every rank's accumulator, delivered to every rank.
    pub fn allreduce_exact(&mut self, value: ExactSum) -> Result<ExactSum> {
        self.count_call(Kind::Allreduce);
        let total = self.fold_to_root(Kind::Allreduce, value, wrap_exact, exact, |a, v| a.merge(&v))?;
        self.broadcast(Kind::Allreduce, total, wrap_exact, exact)
    }

    /// Exact sum of every rank's accumulator, delivered to rank 0 only.
    pub fn reduce_exact(&mut self, value: ExactSum) -> Result<Option<ExactSum>> {
        self.count_call(Kind::Reduce);
        self.fold_to_root(Kind::Reduce, value, wrap_exact, exact, |a, v| a.merge(&v))
    }

    /// Concatenation of all chunks in rank order, at rank 0 only.
    pub fn gather(&mut self, chunk: &[f64]) -> Result<Option<Vec<f64>>> {
        self.count_call(Kind::Gather);
        self.fold_to_root(Kind::Gather, chunk.to_vec(), Payload::Vector, vector, |a, v| a.extend(v))
    }

    /// Concatenation of all chunks in rank order, at every rank.
    pub fn allgather(&mut self, chunk: &[f64]) -> Result<Vec<f64>> {
        self.count_call(Kind::Allgather);
        let all = self.fold_to_root(Kind::Allgather, chunk.to_vec(), Payload::Vector, vector, |a, v| {
            a.extend(v)
        })?;
        self.broadcast(Kind::Allgather, all, Payload::Vector, vector)
    }

    /// Makes every rank blocked in a receive fail promptly. Used when a rank
    /// hits a local error and is about to leave the group.
    pub fn abort_group(&self) {
        self.abort();
    }

    pub(crate) fn send_halo(&mut self, dst: usize, values: Vec<f64>) -> Result<()> {
        self.send(dst, Kind::Halo, Payload::Vector(values))
    }

    pub(crate) fn recv_halo(&mut self, src: usize) -> Result<Vec<f64>> {
        let p = self.recv(src, Kind::Halo)?;
        vector(p).ok_or_else(|| self.mismatch("halo"))
    }

    pub(crate) fn count_halo_call(&mut self) {
        self.count_call(Kind::Halo);
    }

    pub(crate) fn fail(&self, msg: String) -> Error {
        self.abort();
        self.protocol(msg)
    }
}

fn scalar(p: Payload) -> Option<f64> {
    match p {
        Payload::Scalar(v) => Some(v),
        _ => None,
    }
}

fn vector(p: Payload) -> Option<Vec<f64>> {
    match p {
        Payload::Vector(v) => Some(v),
        _ => None,
    }
}

fn exact(p: Payload) -> Option<ExactSum> {
    match p {
        Payload::Exact(v) => Some(*v),
        _ => None,
    }
}

fn wrap_exact(v: ExactSum) -> Payload {
    Payload::Exact(Box::new(v))
}
