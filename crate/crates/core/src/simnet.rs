//! Deterministic discrete-event harness for the three-layer stack.
//!
//! A [`SimWorld`] hosts one protocol stack per correct process and a queue of
//! link messages. Byzantine processes own no stack: they exist only as
//! identities the adversary may speak for. Links are reliable and
//! authenticated; the adversary chooses interleaving either implicitly (act,
//! then let the harness drain all consequent correct traffic) or through the
//! randomized fair scheduler used for honest statistics.
//!
//! Everything is deterministic given the seed: per-process sampling runs on
//! independent sub-streams, and the trace of processed link messages is
//! bit-stable, so a run can be replayed and compared record by record.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Message, ProcessId, ProtocolParams, SystemConfig};
use crate::contagion::{
    contagion_deliverable, contagion_init, contagion_mark_delivered, contagion_on_pcb_deliver,
    contagion_on_ready, contagion_on_subscribe, ContagionMsg, ContagionState,
};
use crate::exec;
use crate::murmur::{
    murmur_broadcast, murmur_init, murmur_on_gossip, murmur_on_subscribe, MurmurMsg, MurmurState,
};
use crate::sampling::{derive_seed, substream, SampleError, StreamDomain};
use crate::sieve::{
    sieve_init, sieve_on_echo, sieve_on_pb_deliver, sieve_on_subscribe, sieve_try_deliver,
    SieveMsg, SieveState,
};
use crate::sig::{self, signed, SignedPayload};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("step budget of {budget} link messages exceeded")]
    BudgetExceeded { budget: usize },
    #[error("execution failed: {0}")]
    ApiMisuse(&'static str),
    #[error("malformed trace line: {0}")]
    Trace(String),
}

/// Which layers each correct process runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StackMode {
    /// Gossip only; gossip delivery is final.
    Murmur,
    /// Gossip plus echo sampling; echo-threshold delivery is final.
    MurmurSieve,
    /// All three layers; ready/delivery sampling decides final delivery.
    Full,
    /// Ready/delivery layer alone, with pcb deliveries injected directly.
    /// Used by the attack drivers that assume the echo layer as a premise.
    ContagionOnly,
}

impl StackMode {
    fn has_murmur(self) -> bool {
        matches!(self, StackMode::Murmur | StackMode::MurmurSieve | StackMode::Full)
    }

    fn has_sieve(self) -> bool {
        matches!(self, StackMode::MurmurSieve | StackMode::Full)
    }

    fn has_contagion(self) -> bool {
        matches!(self, StackMode::Full | StackMode::ContagionOnly)
    }
}

/// Message dequeue order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheduling {
    /// First in, first out: the adversary's act-then-drain order.
    AdversaryFifo,
    /// Uniformly random dequeue, for honest-run statistics.
    RandomInterleave,
}

/// A link-layer record of any of the three protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    GossipSubscribe,
    Gossip(SignedPayload),
    EchoSubscribe,
    Echo(SignedPayload),
    ReadySubscribe,
    Ready(SignedPayload),
}

impl Wire {
    fn kind(&self) -> &'static str {
        match self {
            Wire::GossipSubscribe => "gossip_subscribe",
            Wire::Gossip(_) => "gossip",
            Wire::EchoSubscribe => "echo_subscribe",
            Wire::Echo(_) => "echo",
            Wire::ReadySubscribe => "ready_subscribe",
            Wire::Ready(_) => "ready",
        }
    }

    fn message(&self) -> Message {
        match self {
            Wire::Gossip(p) | Wire::Echo(p) | Wire::Ready(p) => p.message,
            _ => 0,
        }
    }
}

impl From<MurmurMsg> for Wire {
    fn from(m: MurmurMsg) -> Self {
        match m {
            MurmurMsg::GossipSubscribe => Wire::GossipSubscribe,
            MurmurMsg::Gossip(p) => Wire::Gossip(p),
        }
    }
}

impl From<SieveMsg> for Wire {
    fn from(m: SieveMsg) -> Self {
        match m {
            SieveMsg::EchoSubscribe => Wire::EchoSubscribe,
            SieveMsg::Echo(p) => Wire::Echo(p),
            // The inner broadcast record only exists when Sieve runs on its
            // own; inside the stack the gossip layer carries the payload.
            SieveMsg::Send(p) => Wire::Gossip(p),
        }
    }
}

impl From<ContagionMsg> for Wire {
    fn from(m: ContagionMsg) -> Self {
        match m {
            ContagionMsg::ReadySubscribe => Wire::ReadySubscribe,
            ContagionMsg::Ready(p) => Wire::Ready(p),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Envelope {
    src: ProcessId,
    dst: ProcessId,
    wire: Wire,
}

/// One processed link message, as exported to JSON-lines traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub src: ProcessId,
    pub dst: ProcessId,
    pub record_kind: String,
    pub message: Message,
}

#[derive(Debug)]
struct Stack {
    murmur: Option<MurmurState>,
    sieve: Option<SieveState>,
    contagion: Option<ContagionState>,
}

/// Truth values of the five broadcast properties for one finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub no_duplication: bool,
    pub integrity: bool,
    pub validity: bool,
    pub consistency: bool,
    pub totality: bool,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.no_duplication && self.integrity && self.validity && self.consistency && self.totality
    }
}

/// What the adversary is allowed to see: the system membership and which
/// process delivered which message so far. Sample contents stay hidden.
pub struct AdversaryView<'a> {
    pub config: &'a SystemConfig,
    pub deliveries: &'a [Vec<Message>],
    pub round: usize,
}

/// One adversary action between drains.
#[derive(Debug, Clone)]
pub enum AdvOp {
    /// Honest broadcast from the designated sender (must be correct).
    Broadcast { message: Message },
    /// Force a correct process to pcb-deliver a payload, as the premise of
    /// the ready-layer analyses.
    PcbDeliver {
        process: ProcessId,
        payload: SignedPayload,
    },
    /// Send a wire record from a Byzantine identity.
    Inject {
        from: ProcessId,
        to: ProcessId,
        wire: Wire,
    },
    End,
}

pub trait Adversary {
    /// Returns the operations to apply before the next drain. Must
    /// eventually return a batch containing [`AdvOp::End`].
    fn step(&mut self, view: &AdversaryView) -> Vec<AdvOp>;
}

pub struct SimWorld {
    config: SystemConfig,
    params: ProtocolParams,
    mode: StackMode,
    scheduling: Scheduling,
    sender: ProcessId,
    stacks: Vec<Option<Stack>>,
    queue: VecDeque<Envelope>,
    schedule_rng: ChaCha12Rng,
    steps: usize,
    budget: usize,
    trace: Vec<TraceRecord>,
    deliveries: Vec<Vec<SignedPayload>>,
    broadcast: Option<Message>,
}

/// Builds a world with every correct stack initialized and its subscriptions
/// enqueued (not yet drained). `sender` is the broadcast source all stacks
/// accept; it may be Byzantine for attack runs.
pub fn world_new(
    config: SystemConfig,
    params: ProtocolParams,
    mode: StackMode,
    scheduling: Scheduling,
    sender: ProcessId,
    seed: u64,
) -> Result<SimWorld, SimError> {
    params.validate()?;
    let n = config.n();
    let mut world = SimWorld {
        schedule_rng: substream(seed, StreamDomain::Schedule, 0),
        budget: (10 * n * config.num_correct()).max(200),
        stacks: Vec::with_capacity(n),
        queue: VecDeque::new(),
        steps: 0,
        trace: Vec::new(),
        deliveries: vec![Vec::new(); n],
        broadcast: None,
        sender,
        config,
        params,
        mode,
        scheduling,
    };
    for pid in 0..n {
        if world.config.is_byzantine(pid) {
            world.stacks.push(None);
            continue;
        }
        let mut rng = substream(seed, StreamDomain::ProtocolInit, pid as u64);
        let mut stack = Stack {
            murmur: None,
            sieve: None,
            contagion: None,
        };
        if mode.has_murmur() {
            let (state, fx) = murmur_init(pid, sender, n, params.g, &mut rng)?;
            stack.murmur = Some(state);
            world.enqueue(pid, fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
        }
        if mode.has_sieve() {
            let (state, fx) = sieve_init(sender, n, params.e, &mut rng)?;
            stack.sieve = Some(state);
            world.enqueue(pid, fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
        }
        if mode.has_contagion() {
            let (state, fx) = contagion_init(sender, n, params.r, params.d, &mut rng)?;
            stack.contagion = Some(state);
            world.enqueue(pid, fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
        }
        world.stacks.push(Some(stack));
    }
    Ok(world)
}

impl SimWorld {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn sender(&self) -> ProcessId {
        self.sender
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Final-layer deliveries of each process, in delivery order.
    pub fn deliveries(&self, pid: ProcessId) -> &[SignedPayload] {
        &self.deliveries[pid]
    }

    /// Read-only view of a correct process' ready/delivery state, for attack
    /// measurements.
    pub fn contagion_state(&self, pid: ProcessId) -> Option<&ContagionState> {
        self.stacks[pid].as_ref()?.contagion.as_ref()
    }

    fn enqueue(&mut self, src: ProcessId, outgoing: impl IntoIterator<Item = (ProcessId, Wire)>) {
        for (dst, wire) in outgoing {
            self.queue.push_back(Envelope { src, dst, wire });
        }
    }

    /// Starts the honest broadcast through the gossip layer.
    pub fn honest_broadcast(&mut self, message: Message) -> Result<(), SimError> {
        if !self.mode.has_murmur() {
            return Err(SimError::ApiMisuse("no gossip layer to broadcast through"));
        }
        if self.config.is_byzantine(self.sender) {
            return Err(SimError::ApiMisuse("honest broadcast from a Byzantine sender"));
        }
        if self.broadcast.is_some() {
            return Err(SimError::ApiMisuse("sender already broadcast"));
        }
        self.broadcast = Some(message);
        let payload = signed(self.sender, message);
        let pid = self.sender;
        let (outgoing, finals) = {
            let stack = self.stacks[pid].as_mut().expect("sender is correct");
            let murmur = stack.murmur.as_mut().expect("murmur mode");
            let fx = murmur_broadcast(murmur, payload);
            let mut outgoing: Vec<(ProcessId, Wire)> =
                fx.outgoing.into_iter().map(|(to, m)| (to, m.into())).collect();
            let mut finals = Vec::new();
            if let Some(p) = fx.delivered {
                ascend_from_murmur(stack, &self.params, self.mode, p, &mut outgoing, &mut finals);
            }
            (outgoing, finals)
        };
        self.enqueue(pid, outgoing);
        for p in finals {
            self.deliveries[pid].push(p);
        }
        Ok(())
    }

    /// Injects a pcb delivery into a correct process' ready layer.
    pub fn pcb_deliver(&mut self, process: ProcessId, payload: SignedPayload) -> Result<(), SimError> {
        let stack = self.stacks[process]
            .as_mut()
            .ok_or(SimError::ApiMisuse("pcb delivery to a Byzantine process"))?;
        let contagion = stack
            .contagion
            .as_mut()
            .ok_or(SimError::ApiMisuse("no ready layer in this mode"))?;
        let fx = contagion_on_pcb_deliver(contagion, payload);
        let mut outgoing: Vec<(ProcessId, Wire)> =
            fx.outgoing.into_iter().map(|(to, m)| (to, m.into())).collect();
        let mut finals = Vec::new();
        settle_contagion(stack, &self.params, &mut outgoing, &mut finals);
        self.enqueue(process, outgoing);
        for p in finals {
            self.deliveries[process].push(p);
        }
        Ok(())
    }

    /// Sends a wire record from a Byzantine identity.
    pub fn inject(&mut self, from: ProcessId, to: ProcessId, wire: Wire) -> Result<(), SimError> {
        if !self.config.is_byzantine(from) {
            return Err(SimError::ApiMisuse("injection from a correct process"));
        }
        self.queue.push_back(Envelope { src: from, dst: to, wire });
        Ok(())
    }

    /// Processes queued link messages until the queue is empty.
    pub fn drain(&mut self) -> Result<(), SimError> {
        while !self.queue.is_empty() {
            let env = match self.scheduling {
                Scheduling::AdversaryFifo => self.queue.pop_front().expect("non-empty"),
                Scheduling::RandomInterleave => {
                    let idx = self.schedule_rng.random_range(0..self.queue.len());
                    self.queue.swap_remove_back(idx).expect("index in range")
                }
            };
            self.steps += 1;
            if self.steps > self.budget {
                return Err(SimError::BudgetExceeded { budget: self.budget });
            }
            self.trace.push(TraceRecord {
                step: self.steps,
                src: env.src,
                dst: env.dst,
                record_kind: env.wire.kind().to_string(),
                message: env.wire.message(),
            });
            let Some(stack) = self.stacks[env.dst].as_mut() else {
                continue; // Byzantine destination: the adversary reads it, the harness drops it
            };
            let mut outgoing = Vec::new();
            let mut finals = Vec::new();
            on_wire(
                stack,
                &self.params,
                self.mode,
                env.src,
                env.wire,
                &mut outgoing,
                &mut finals,
            );
            self.enqueue(env.dst, outgoing);
            for p in finals {
                self.deliveries[env.dst].push(p);
            }
        }
        Ok(())
    }

    /// Whether the murmur gossip sets connect all correct processes. Only
    /// meaningful after subscriptions have been drained.
    pub fn gossip_graph_connected(&self) -> bool {
        let correct: Vec<ProcessId> = self.config.correct().collect();
        if correct.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.config.n()];
        let mut frontier = vec![correct[0]];
        seen[correct[0]] = true;
        while let Some(pid) = frontier.pop() {
            let Some(stack) = self.stacks[pid].as_ref() else {
                continue;
            };
            let Some(murmur) = stack.murmur.as_ref() else {
                return true; // no gossip layer: vacuously connected
            };
            for &peer in murmur.gossip_set() {
                if !seen[peer] && !self.config.is_byzantine(peer) {
                    seen[peer] = true;
                    frontier.push(peer);
                }
            }
        }
        correct.iter().all(|&pid| seen[pid])
    }

    /// Evaluates the five broadcast properties on the current state.
    pub fn check_properties(&self) -> PropertyReport {
        let correct: Vec<ProcessId> = self.config.correct().collect();
        let no_duplication = correct.iter().all(|&pid| self.deliveries[pid].len() <= 1);
        // With ideal signatures, integrity reduces to: every delivered
        // payload carries a valid tag from the accepted sender, and a correct
        // sender's payload is the one it actually broadcast.
        let integrity = correct.iter().all(|&pid| {
            self.deliveries[pid].iter().all(|p| {
                p.sender == self.sender
                    && sig::verify(p)
                    && (self.config.is_byzantine(self.sender)
                        || self.broadcast == Some(p.message))
            })
        });
        let validity = match self.broadcast {
            Some(m) if !self.config.is_byzantine(self.sender) => self.deliveries[self.sender]
                .iter()
                .any(|p| p.message == m),
            _ => true,
        };
        let delivered_any: Vec<bool> = correct
            .iter()
            .map(|&pid| !self.deliveries[pid].is_empty())
            .collect();
        let totality = delivered_any.iter().all(|&d| d) || delivered_any.iter().all(|&d| !d);
        let mut messages = correct
            .iter()
            .flat_map(|&pid| self.deliveries[pid].iter().map(|p| p.message));
        let consistency = match messages.next() {
            None => true,
            Some(first) => messages.all(|m| m == first),
        };
        PropertyReport {
            no_duplication,
            integrity,
            validity,
            consistency,
            totality,
        }
    }
}

/// Applies one wire record to a stack, collecting outgoing records and
/// final-layer deliveries.
fn on_wire(
    stack: &mut Stack,
    params: &ProtocolParams,
    mode: StackMode,
    src: ProcessId,
    wire: Wire,
    outgoing: &mut Vec<(ProcessId, Wire)>,
    finals: &mut Vec<SignedPayload>,
) {
    match wire {
        Wire::GossipSubscribe => {
            if let Some(murmur) = stack.murmur.as_mut() {
                let fx = murmur_on_subscribe(murmur, src);
                outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
            }
        }
        Wire::Gossip(p) => {
            if let Some(murmur) = stack.murmur.as_mut() {
                let fx = murmur_on_gossip(murmur, p);
                outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
                if let Some(delivered) = fx.delivered {
                    ascend_from_murmur(stack, params, mode, delivered, outgoing, finals);
                }
            }
        }
        Wire::EchoSubscribe => {
            if let Some(sieve) = stack.sieve.as_mut() {
                let fx = sieve_on_subscribe(sieve, src);
                outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
            }
        }
        Wire::Echo(p) => {
            if let Some(sieve) = stack.sieve.as_mut() {
                sieve_on_echo(sieve, src, p);
                settle_sieve(stack, params, mode, outgoing, finals);
            }
        }
        Wire::ReadySubscribe => {
            if let Some(contagion) = stack.contagion.as_mut() {
                let fx = contagion_on_subscribe(contagion, src);
                outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
            }
        }
        Wire::Ready(p) => {
            if let Some(contagion) = stack.contagion.as_mut() {
                let fx = contagion_on_ready(contagion, src, p, params.r_hat);
                outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
                settle_contagion(stack, params, outgoing, finals);
            }
        }
    }
}

/// Routes a gossip-layer delivery to the layer above (or records it as final).
fn ascend_from_murmur(
    stack: &mut Stack,
    params: &ProtocolParams,
    mode: StackMode,
    payload: SignedPayload,
    outgoing: &mut Vec<(ProcessId, Wire)>,
    finals: &mut Vec<SignedPayload>,
) {
    if !mode.has_sieve() {
        finals.push(payload);
        return;
    }
    let sieve = stack.sieve.as_mut().expect("sieve mode");
    let fx = sieve_on_pb_deliver(sieve, payload);
    outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
    settle_sieve(stack, params, mode, outgoing, finals);
}

/// Fires the echo-threshold delivery check and routes any delivery upward.
fn settle_sieve(
    stack: &mut Stack,
    params: &ProtocolParams,
    mode: StackMode,
    outgoing: &mut Vec<(ProcessId, Wire)>,
    finals: &mut Vec<SignedPayload>,
) {
    let sieve = stack.sieve.as_mut().expect("sieve mode");
    let Some(payload) = sieve_try_deliver(sieve, params.e_hat) else {
        return;
    };
    if !mode.has_contagion() {
        finals.push(payload);
        return;
    }
    let contagion = stack.contagion.as_mut().expect("contagion mode");
    let fx = contagion_on_pcb_deliver(contagion, payload);
    outgoing.extend(fx.outgoing.into_iter().map(|(to, m)| (to, m.into())));
    settle_contagion(stack, params, outgoing, finals);
}

/// Applies the honest delivery rule to the ready layer: deliver the lowest
/// deliverable message, once.
fn settle_contagion(
    stack: &mut Stack,
    params: &ProtocolParams,
    _outgoing: &mut [(ProcessId, Wire)],
    finals: &mut Vec<SignedPayload>,
) {
    let contagion = stack.contagion.as_mut().expect("contagion mode");
    let deliverable = contagion_deliverable(contagion, params.d_hat);
    if let Some(&m) = deliverable.first() {
        finals.push(contagion_mark_delivered(contagion, m));
    }
}

/// Alternates adversary steps with full drains until the adversary ends.
pub fn run_to_quiescence(
    world: &mut SimWorld,
    adversary: &mut dyn Adversary,
) -> Result<PropertyReport, SimError> {
    world.drain()?;
    let mut round = 0usize;
    loop {
        let messages: Vec<Vec<Message>> = world
            .deliveries
            .iter()
            .map(|ps| ps.iter().map(|p| p.message).collect())
            .collect();
        let ops = adversary.step(&AdversaryView {
            config: &world.config,
            deliveries: &messages,
            round,
        });
        let mut ended = false;
        for op in ops {
            match op {
                AdvOp::Broadcast { message } => world.honest_broadcast(message)?,
                AdvOp::PcbDeliver { process, payload } => world.pcb_deliver(process, payload)?,
                AdvOp::Inject { from, to, wire } => world.inject(from, to, wire)?,
                AdvOp::End => ended = true,
            }
        }
        world.drain()?;
        if ended {
            return Ok(world.check_properties());
        }
        round += 1;
        if round > world.budget {
            return Err(SimError::ApiMisuse("adversary never ended the execution"));
        }
    }
}

/// Serializes a trace as JSON lines.
pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for record in trace {
        out.push_str(&serde_json::to_string(record).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

/// Parses a JSON-lines trace.
pub fn trace_from_jsonl(text: &str) -> Result<Vec<TraceRecord>, SimError> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| serde_json::from_str(line).map_err(|e| SimError::Trace(e.to_string())))
        .collect()
}

/// Violation counts over a batch of honest runs.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TrialStats {
    pub trials: usize,
    pub no_duplication_violations: usize,
    pub integrity_violations: usize,
    pub validity_violations: usize,
    pub consistency_violations: usize,
    pub totality_violations: usize,
    /// Runs whose realized gossip graph did not connect the correct set.
    pub disconnected_gossip: usize,
    /// Validity or totality violations among runs with a connected graph.
    pub connected_delivery_violations: usize,
}

impl TrialStats {
    fn absorb(&mut self, report: &PropertyReport, connected: bool) {
        self.trials += 1;
        self.no_duplication_violations += usize::from(!report.no_duplication);
        self.integrity_violations += usize::from(!report.integrity);
        self.validity_violations += usize::from(!report.validity);
        self.consistency_violations += usize::from(!report.consistency);
        self.totality_violations += usize::from(!report.totality);
        self.disconnected_gossip += usize::from(!connected);
        if connected && (!report.validity || !report.totality) {
            self.connected_delivery_violations += 1;
        }
    }
}

struct EndImmediately;

impl Adversary for EndImmediately {
    fn step(&mut self, _view: &AdversaryView) -> Vec<AdvOp> {
        vec![AdvOp::End]
    }
}

/// Runs `trials` independent honest broadcasts (correct sender, silent
/// Byzantine processes, fair random scheduling) and tallies violations.
pub fn run_honest_trials(
    config: &SystemConfig,
    params: &ProtocolParams,
    mode: StackMode,
    trials: usize,
    master_seed: u64,
) -> Result<TrialStats, SimError> {
    let results: Vec<Result<(PropertyReport, bool), String>> = exec::map_indexed(trials, |i| {
        let run = || {
            let mut world = world_new(
                config.clone(),
                *params,
                mode,
                Scheduling::RandomInterleave,
                config.zeta(0),
                derive_seed(master_seed, i as u64),
            )?;
            world.honest_broadcast(1)?;
            let report = run_to_quiescence(&mut world, &mut EndImmediately)?;
            Ok::<_, SimError>((report, world.gossip_graph_connected()))
        };
        run().map_err(|e| e.to_string())
    });
    let mut stats = TrialStats::default();
    for r in results {
        let (report, connected) = r.map_err(SimError::Trace)?;
        stats.absorb(&report, connected);
    }
    Ok(stats)
}
