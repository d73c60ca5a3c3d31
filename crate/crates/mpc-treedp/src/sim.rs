//! Round-synchronous simulator of the MPC model.
//!
//! A cluster holds `m` machine states. Each call to [`Cluster::round`] runs
//! one local step on every machine and then a barrier, where the outgoing
//! messages are checked against the per-machine budget `s` and delivered.
//! A machine step only ever sees its own state and its own inbox.
//!
//! Everything is measured in 64-bit words.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Word = u64;
pub type MachineId = usize;

/// Ceiling of log2(n), with `ceil_log2(0) == ceil_log2(1) == 0`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// log2(n) as a float, clamped below at 1 so budgets never collapse to zero.
pub fn log2_at_least_one(n: usize) -> f64 {
    (n.max(2) as f64).log2()
}

/// Default round ceiling `64 * ceil(log2 n) + 64`.
pub fn default_round_ceiling(n: usize) -> usize {
    64 * ceil_log2(n) as usize + 64
}

/// Word budget `ceil(c * (n/m) * log2(n)^2)` used by the polylog-space algorithms.
pub fn polylog_budget(n: usize, m: usize, c: f64) -> usize {
    let l = log2_at_least_one(n);
    (c * (n as f64 / m as f64) * l * l).ceil() as usize
}

/// Word budget `ceil(c * (n^{4/3}/m) * log2(n)^2)` used by the linear solver.
pub fn linear_budget(n: usize, m: usize, c: f64) -> usize {
    let l = log2_at_least_one(n);
    (c * ((n as f64).powf(4.0 / 3.0) / m as f64) * l * l).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapKind {
    Resident,
    Sent,
    Received,
}

impl std::fmt::Display for CapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CapKind::Resident => "resident",
            CapKind::Sent => "sent",
            CapKind::Received => "received",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("machine {machine} exceeded its {kind} budget in round {round}: {used} > {cap} words")]
    CapExceeded {
        machine: MachineId,
        round: usize,
        kind: CapKind,
        used: usize,
        cap: usize,
    },
    #[error("no termination after {rounds} rounds")]
    NonTermination { rounds: usize },
    #[error("duplicate message sequence {sequence} from machine {sender}")]
    DuplicateSequence { sender: MachineId, sequence: u64 },
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} shards, got {got}")]
    ShardCount { expected: usize, got: usize },
    #[error("message addressed to unknown machine {machine}")]
    UnknownMachine { machine: MachineId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Machine count `m`.
    pub machines: usize,
    /// Words per machine `s`; caps resident state, sends and receives.
    pub words_per_machine: usize,
    pub enforce_caps: bool,
    pub seed: u64,
    /// Number of rounds after which a run is declared non-terminating.
    pub round_ceiling: usize,
}

impl ClusterConfig {
    /// Checked constructor: requires `2 <= m <= s`. Caps are enforced and the
    /// round ceiling defaults to `default_round_ceiling(s)`.
    pub fn new(machines: usize, words_per_machine: usize, seed: u64) -> Result<Self, SimError> {
        if machines < 2 {
            return Err(SimError::InvalidConfig(format!(
                "need at least 2 machines, got {machines}"
            )));
        }
        if machines > words_per_machine {
            return Err(SimError::InvalidConfig(format!(
                "machine count {machines} exceeds words per machine {words_per_machine}"
            )));
        }
        Ok(ClusterConfig {
            machines,
            words_per_machine,
            enforce_caps: true,
            seed,
            round_ceiling: default_round_ceiling(words_per_machine),
        })
    }

    /// Config for an input of `n` items with the polylog budget. The budget is
    /// raised to `m` if the constant makes it smaller, so the config stays valid.
    pub fn polylog(n: usize, machines: usize, c: f64, seed: u64) -> Result<Self, SimError> {
        let s = polylog_budget(n, machines, c).max(machines);
        Ok(ClusterConfig::new(machines, s, seed)?.with_round_ceiling(default_round_ceiling(n)))
    }

    /// Config with the `n^{4/3}` budget of the linear solver.
    pub fn linear(n: usize, machines: usize, c: f64, seed: u64) -> Result<Self, SimError> {
        let s = linear_budget(n, machines, c).max(machines);
        Ok(ClusterConfig::new(machines, s, seed)?.with_round_ceiling(default_round_ceiling(n)))
    }

    pub fn with_round_ceiling(mut self, ceiling: usize) -> Self {
        self.round_ceiling = ceiling;
        self
    }

    pub fn with_caps(mut self, enforce: bool) -> Self {
        self.enforce_caps = enforce;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub sender: MachineId,
    pub receiver: MachineId,
    /// Per-sender counter, unique within one round.
    pub sequence: u64,
    pub payload: Vec<Word>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMetrics {
    #[serde(rename = "round")]
    pub round_index: usize,
    #[serde(rename = "max_resident")]
    pub max_resident_words: usize,
    #[serde(rename = "max_sent")]
    pub max_sent_words: usize,
    #[serde(rename = "max_received")]
    pub max_received_words: usize,
    #[serde(rename = "total_moved")]
    pub total_words_moved: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub rounds: usize,
    pub per_round: Vec<RoundMetrics>,
}

impl Metrics {
    pub fn push(&mut self, r: RoundMetrics) {
        self.rounds += 1;
        self.per_round.push(r);
    }

    /// Concatenate the rounds of a later phase, renumbering them.
    pub fn extend(&mut self, other: &Metrics) {
        for r in &other.per_round {
            let mut r = r.clone();
            r.round_index = self.rounds;
            self.push(r);
        }
    }

    pub fn max_resident(&self) -> usize {
        self.per_round.iter().map(|r| r.max_resident_words).max().unwrap_or(0)
    }

    pub fn max_sent(&self) -> usize {
        self.per_round.iter().map(|r| r.max_sent_words).max().unwrap_or(0)
    }

    pub fn max_received(&self) -> usize {
        self.per_round.iter().map(|r| r.max_received_words).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

/// Anything a machine keeps between rounds must report its size in words.
pub trait Resident {
    fn resident_words(&self) -> usize;
}

impl Resident for Vec<Word> {
    fn resident_words(&self) -> usize {
        self.len()
    }
}

impl Resident for () {
    fn resident_words(&self) -> usize {
        0
    }
}

/// What a step is allowed to know about where it runs.
#[derive(Clone, Copy, Debug)]
pub struct StepCtx {
    pub machine: MachineId,
    pub machines: usize,
    pub round: usize,
    pub seed: u64,
    pub words_per_machine: usize,
}

/// Outgoing messages of one machine in one round.
pub struct Outbox {
    machine: MachineId,
    machines: usize,
    next_seq: u64,
    messages: Vec<Message>,
}

impl Outbox {
    fn new(machine: MachineId, machines: usize) -> Self {
        Outbox {
            machine,
            machines,
            next_seq: 0,
            messages: Vec::new(),
        }
    }

    pub fn send(&mut self, to: MachineId, payload: Vec<Word>) {
        let sequence = self.next_seq;
        self.next_seq += 1;
        self.messages.push(Message {
            sender: self.machine,
            receiver: to,
            sequence,
            payload,
        });
    }

    /// Send a copy to every machine, including this one. Charged as `m` messages.
    pub fn broadcast(&mut self, payload: &[Word]) {
        for to in 0..self.machines {
            self.send(to, payload.to_vec());
        }
    }

    pub fn words(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len()).sum()
    }
}

/// Per-destination batching of length-prefixed frames, so a machine sends at
/// most one message per destination in a round.
#[derive(Debug)]
pub struct Mailer {
    per_dest: Vec<Vec<Word>>,
}

impl Mailer {
    pub fn new(machines: usize) -> Self {
        Mailer { per_dest: vec![Vec::new(); machines] }
    }

    pub fn push(&mut self, to: MachineId, frame: &[Word]) {
        let buf = &mut self.per_dest[to];
        buf.push(frame.len() as Word);
        buf.extend_from_slice(frame);
    }

    pub fn push_all(&mut self, frame: &[Word]) {
        for to in 0..self.per_dest.len() {
            self.push(to, frame);
        }
    }

    pub fn flush(self, out: &mut Outbox) {
        for (to, buf) in self.per_dest.into_iter().enumerate() {
            if !buf.is_empty() {
                out.send(to, buf);
            }
        }
    }
}

/// Split a payload built by [`Mailer`] back into frames.
pub fn frames(payload: &[Word]) -> Frames<'_> {
    Frames { rest: payload }
}

/// Iterate over every frame of every message in an inbox.
pub fn inbox_frames(inbox: &[Message]) -> impl Iterator<Item = &[Word]> {
    inbox.iter().flat_map(|m| frames(&m.payload))
}

pub struct Frames<'a> {
    rest: &'a [Word],
}

impl<'a> Iterator for Frames<'a> {
    type Item = &'a [Word];

    fn next(&mut self) -> Option<&'a [Word]> {
        let (&len, tail) = self.rest.split_first()?;
        let len = (len as usize).min(tail.len());
        let (frame, rest) = tail.split_at(len);
        self.rest = rest;
        Some(frame)
    }
}

/// Deliver messages at a barrier. Inboxes come back sorted by
/// `(sender, sequence)`. With `cap` set, send and receive volumes are checked.
pub fn exchange(
    machines: usize,
    pending: Vec<Message>,
    cap: Option<usize>,
    round: usize,
) -> Result<(Vec<Vec<Message>>, RoundMetrics), SimError> {
    let mut sent = vec![0usize; machines];
    let mut received = vec![0usize; machines];
    let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); machines];
    for msg in pending {
        if msg.sender >= machines {
            return Err(SimError::UnknownMachine { machine: msg.sender });
        }
        if msg.receiver >= machines {
            return Err(SimError::UnknownMachine {
                machine: msg.receiver,
            });
        }
        sent[msg.sender] += msg.payload.len();
        received[msg.receiver] += msg.payload.len();
        inboxes[msg.receiver].push(msg);
    }
    for inbox in &mut inboxes {
        inbox.sort_by_key(|m| (m.sender, m.sequence));
        for pair in inbox.windows(2) {
            if pair[0].sender == pair[1].sender && pair[0].sequence == pair[1].sequence {
                return Err(SimError::DuplicateSequence {
                    sender: pair[0].sender,
                    sequence: pair[0].sequence,
                });
            }
        }
    }
    if let Some(cap) = cap {
        for (machine, &used) in sent.iter().enumerate() {
            if used > cap {
                return Err(SimError::CapExceeded {
                    machine,
                    round,
                    kind: CapKind::Sent,
                    used,
                    cap,
                });
            }
        }
        for (machine, &used) in received.iter().enumerate() {
            if used > cap {
                return Err(SimError::CapExceeded {
                    machine,
                    round,
                    kind: CapKind::Received,
                    used,
                    cap,
                });
            }
        }
    }
    let metrics = RoundMetrics {
        round_index: round,
        max_resident_words: 0,
        max_sent_words: sent.iter().copied().max().unwrap_or(0),
        max_received_words: received.iter().copied().max().unwrap_or(0),
        total_words_moved: received.iter().sum(),
    };
    Ok((inboxes, metrics))
}

/// A cluster of machines with typed per-machine state.
pub struct Cluster<S> {
    config: ClusterConfig,
    states: Vec<S>,
    inboxes: Vec<Vec<Message>>,
    metrics: Metrics,
}

impl<S: Resident> Cluster<S> {
    pub fn new(config: ClusterConfig, states: Vec<S>) -> Result<Self, SimError> {
        if states.len() != config.machines {
            return Err(SimError::ShardCount {
                expected: config.machines,
                got: states.len(),
            });
        }
        if config.enforce_caps {
            for (machine, st) in states.iter().enumerate() {
                let used = st.resident_words();
                if used > config.words_per_machine {
                    return Err(SimError::CapExceeded {
                        machine,
                        round: 0,
                        kind: CapKind::Resident,
                        used,
                        cap: config.words_per_machine,
                    });
                }
            }
        }
        let m = config.machines;
        Ok(Cluster {
            config,
            states,
            inboxes: vec![Vec::new(); m],
            metrics: Metrics::default(),
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn machines(&self) -> usize {
        self.config.machines
    }

    pub fn rounds(&self) -> usize {
        self.metrics.rounds
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// Read-only view of machine states, for harness-side inspection only.
    pub fn states(&self) -> &[S] {
        &self.states
    }

    /// True if any message is waiting to be consumed by the next round.
    pub fn has_pending(&self) -> bool {
        self.inboxes.iter().any(|i| !i.is_empty())
    }

    /// One round: a local step on every machine, then the barrier.
    pub fn round<F>(&mut self, step: F) -> Result<(), SimError>
    where
        F: Fn(&StepCtx, &mut S, &[Message], &mut Outbox),
    {
        let round = self.metrics.rounds;
        if round >= self.config.round_ceiling {
            return Err(SimError::NonTermination { rounds: round });
        }
        let m = self.config.machines;
        let cap = self.config.words_per_machine;
        let inboxes = std::mem::replace(&mut self.inboxes, vec![Vec::new(); m]);
        let mut pending = Vec::new();
        let mut max_resident = 0usize;
        for (machine, (state, inbox)) in self.states.iter_mut().zip(inboxes).enumerate() {
            let ctx = StepCtx {
                machine,
                machines: m,
                round,
                seed: self.config.seed,
                words_per_machine: cap,
            };
            let mut out = Outbox::new(machine, m);
            step(&ctx, state, &inbox, &mut out);
            let inbox_words: usize = inbox.iter().map(|msg| msg.payload.len()).sum();
            let resident = state.resident_words() + inbox_words;
            if self.config.enforce_caps && resident > cap {
                return Err(SimError::CapExceeded {
                    machine,
                    round,
                    kind: CapKind::Resident,
                    used: resident,
                    cap,
                });
            }
            max_resident = max_resident.max(resident);
            pending.extend(out.messages);
        }
        let caps = self.config.enforce_caps.then_some(cap);
        let (inboxes, mut rm) = exchange(m, pending, caps, round)?;
        rm.max_resident_words = max_resident;
        self.inboxes = inboxes;
        self.metrics.push(rm);
        Ok(())
    }

    pub fn into_parts(self) -> (Vec<S>, Metrics) {
        (self.states, self.metrics)
    }

    /// As [`Cluster::into_parts`], keeping the messages still in flight.
    pub fn into_pending(self) -> (Vec<S>, Vec<Vec<Message>>, Metrics) {
        (self.states, self.inboxes, self.metrics)
    }

    /// A cluster whose first round consumes `inboxes`, so a pipeline stage can
    /// continue from the messages sent in the previous stage's last round.
    pub fn resume(config: ClusterConfig, states: Vec<S>, inboxes: Vec<Vec<Message>>) -> Result<Self, SimError> {
        let mut c = Cluster::new(config, states)?;
        if inboxes.len() != c.config.machines {
            return Err(SimError::ShardCount { expected: c.config.machines, got: inboxes.len() });
        }
        c.inboxes = inboxes;
        Ok(c)
    }
}

/// Whether a machine wants another round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Continue,
    Done,
}

/// A word-level program for [`run_simulation`].
pub trait Program {
    fn step(&self, ctx: &StepCtx, state: &mut Vec<Word>, inbox: &[Message], out: &mut Outbox) -> Status;
}

impl<F> Program for F
where
    F: Fn(&StepCtx, &mut Vec<Word>, &[Message], &mut Outbox) -> Status,
{
    fn step(&self, ctx: &StepCtx, state: &mut Vec<Word>, inbox: &[Message], out: &mut Outbox) -> Status {
        self(ctx, state, inbox, out)
    }
}

/// Run `program` until every machine reports `Done` and no message is in flight.
pub fn run_simulation<P: Program>(
    program: &P,
    config: ClusterConfig,
    shards: Vec<Vec<Word>>,
) -> Result<(Vec<Vec<Word>>, Metrics), SimError> {
    let mut cluster = Cluster::new(config, shards.into_iter().map(|s| (s, false)).collect())?;
    loop {
        cluster.round(|ctx, (state, done), inbox, out| {
            *done = program.step(ctx, state, inbox, out) == Status::Done;
        })?;
        let all_done = cluster.states.iter().all(|(_, d)| *d);
        if all_done && !cluster.has_pending() {
            break;
        }
    }
    let (states, metrics) = cluster.into_parts();
    Ok((states.into_iter().map(|(s, _)| s).collect(), metrics))
}

impl Resident for (Vec<Word>, bool) {
    fn resident_words(&self) -> usize {
        self.0.len()
    }
}
