//! Concrete adversary strategies and attack drivers.
//!
//! Three attacks are implemented, one per layer analysis: a two-phase
//! echo-splitting attacker played over a simplified per-message arena, a
//! ready-layer consistency attacker that floods a second message, and a
//! round-by-round totality attacker that tries to leave the correct set split
//! over the delivery threshold. Each driver is deterministic given its seed,
//! so attack success frequencies can be replayed exactly.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Message, ProcessId, ProtocolParams, SystemConfig};
use crate::exec;
use crate::sampling::{derive_seed, sample_with_replacement, substream, StreamDomain};
use crate::sig::signed;
use crate::simnet::{
    world_new, AdvOp, Adversary, AdversaryView, Scheduling, SimError, SimWorld, StackMode, Wire,
};

/// The baseline adversary: Byzantine processes stay silent.
pub struct Passive;

impl Adversary for Passive {
    fn step(&mut self, _view: &AdversaryView) -> Vec<AdvOp> {
        vec![AdvOp::End]
    }
}

pub fn passive_adversary() -> Passive {
    Passive
}

/// A two-phase echo-splitting plan. `first[i]` is the message the (i+1)-th
/// correct process is made to receive; once a first delivery happens after
/// `n` such receipts, `second[n][i]` takes over for the remaining processes.
///
/// The general family indexes plans by the full per-process Byzantine sample
/// census, which is infeasible to materialize; plans here are census-blind,
/// which includes the natural split attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoPhaseTable {
    pub first: Vec<Message>,
    pub second: Vec<Vec<Message>>,
}

impl TwoPhaseTable {
    /// The natural split plan: push message 1 until it is delivered
    /// somewhere, then push message 2 everywhere else.
    pub fn default_split(c: usize) -> Self {
        let alt = if c >= 2 { 2 } else { 1 };
        TwoPhaseTable {
            first: vec![1; c],
            second: (0..=c).map(|n| vec![alt; c - n]).collect(),
        }
    }

    /// Checks the plan covers every reachable game position for `c` correct
    /// processes, with every message in the per-message arena range `1..=c`.
    pub fn validate(&self, c: usize) -> Result<(), SimError> {
        if self.first.len() != c {
            return Err(SimError::ApiMisuse("first-phase plan has the wrong length"));
        }
        if self.second.len() != c + 1 || self.second.iter().enumerate().any(|(n, row)| row.len() != c - n)
        {
            return Err(SimError::ApiMisuse("second-phase plan is not triangular"));
        }
        let in_range = |m: &Message| (1..=c as Message).contains(m);
        if !self.first.iter().all(in_range) || !self.second.iter().flatten().all(in_range) {
            return Err(SimError::ApiMisuse("plan message outside the arena range"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Trace(e.to_string()))
    }
}

/// Result of one play of the echo-splitting game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CobOutcome {
    /// Whether two different messages ended up delivered by correct processes.
    pub consistency_violated: bool,
    /// How many correct processes received the eventually-first-delivered
    /// message during the first phase (0 when nothing was delivered).
    pub n_h: usize,
    /// Number of first-phase receipts before the first delivery (the full
    /// correct count when nothing was delivered).
    pub first_phase_len: usize,
    /// Distinct messages delivered across all correct processes.
    pub delivered_messages: usize,
}

/// Per-process arena state: one echo sample per candidate message, all
/// sharing the same Byzantine slots, plus the per-slot replies.
struct CobProcess {
    /// samples[m-1][slot] = holder of that slot in the sample for message m.
    samples: Vec<Vec<ProcessId>>,
    /// replies[m-1][slot] = message echoed by the slot holder, if any.
    replies: Vec<Vec<Option<Message>>>,
    delivered: Vec<bool>,
}

impl CobProcess {
    fn new(config: &SystemConfig, e: usize, seed: u64, pid: ProcessId) -> Result<Self, SimError> {
        let c = config.num_correct();
        let correct: Vec<ProcessId> = config.correct().collect();
        let mut rng = substream(seed, StreamDomain::ProtocolInit, pid as u64);
        let reference = sample_with_replacement(config.n(), e, &mut rng)?;
        let mut samples = Vec::with_capacity(c);
        samples.push(reference.clone());
        for _ in 1..c {
            let twin = reference
                .iter()
                .map(|&holder| {
                    if config.is_byzantine(holder) {
                        holder
                    } else {
                        correct[rng.random_range(0..c)]
                    }
                })
                .collect();
            samples.push(twin);
        }
        Ok(CobProcess {
            samples,
            replies: vec![vec![None; e]; c],
            delivered: vec![false; c],
        })
    }

    /// Records an echo of `message` in context `context` from `holder`,
    /// filling only this holder's still-empty slots.
    fn record_echo(&mut self, context: Message, holder: ProcessId, message: Message) {
        let ctx = context as usize - 1;
        for (slot, &h) in self.samples[ctx].iter().enumerate() {
            if h == holder && self.replies[ctx][slot].is_none() {
                self.replies[ctx][slot] = Some(message);
            }
        }
    }

    /// Marks every message whose own-context support reached `e_hat` as
    /// delivered; returns newly delivered messages in ascending order.
    fn poll(&mut self, e_hat: usize) -> Vec<Message> {
        let mut fresh = Vec::new();
        for m in 1..=self.samples.len() as Message {
            let ctx = m as usize - 1;
            if self.delivered[ctx] {
                continue;
            }
            let support = self.replies[ctx]
                .iter()
                .filter(|r| **r == Some(m))
                .count();
            if support >= e_hat {
                self.delivered[ctx] = true;
                fresh.push(m);
            }
        }
        fresh
    }
}

/// Plays the two-phase echo-splitting game on the simplified per-message
/// arena: every correct process keeps one echo sample per message, all
/// sharing the same Byzantine slots, and Byzantine processes pre-fill every
/// context with its own message. The plan then feeds messages to correct
/// processes one at a time; each receipt is echoed across all contexts.
pub fn run_simplified_sieve_game(
    config: &SystemConfig,
    params: &ProtocolParams,
    table: &TwoPhaseTable,
    seed: u64,
) -> Result<CobOutcome, SimError> {
    params.validate().map_err(SimError::Config)?;
    let c = config.num_correct();
    table.validate(c)?;
    let correct: Vec<ProcessId> = config.correct().collect();
    let mut arena: Vec<CobProcess> = correct
        .iter()
        .map(|&pid| CobProcess::new(config, params.e, seed, pid))
        .collect::<Result<_, _>>()?;

    // Echo phase: every Byzantine process backs every message in its own
    // context, at every correct process.
    for proc in arena.iter_mut() {
        for m in 1..=c as Message {
            let ctx = m as usize - 1;
            for slot in 0..params.e {
                if config.is_byzantine(proc.samples[ctx][slot]) {
                    proc.replies[ctx][slot] = Some(m);
                }
            }
        }
    }

    let mut delivered: BTreeSet<Message> = BTreeSet::new();
    let poll_all = |arena: &mut Vec<CobProcess>, delivered: &mut BTreeSet<Message>| {
        for proc in arena.iter_mut() {
            delivered.extend(proc.poll(params.e_hat));
        }
    };
    poll_all(&mut arena, &mut delivered);

    // First phase: feed the plan until something is delivered anywhere.
    let mut eta = 0;
    let mut first_receipts = vec![0usize; c + 1];
    if delivered.is_empty() {
        for i in 0..c {
            let m = table.first[i];
            first_receipts[m as usize] += 1;
            let echoer = correct[i];
            for proc in arena.iter_mut() {
                for context in 1..=c as Message {
                    proc.record_echo(context, echoer, m);
                }
            }
            eta = i + 1;
            poll_all(&mut arena, &mut delivered);
            if !delivered.is_empty() {
                break;
            }
        }
    }
    let first_message = delivered.iter().next().copied();
    let n_h = first_message.map_or(0, |h| first_receipts[h as usize]);

    // Second phase: the remaining correct processes receive the follow-up row.
    if !delivered.is_empty() {
        for (i, &m) in table.second[eta].iter().enumerate() {
            let echoer = correct[eta + i];
            for proc in arena.iter_mut() {
                for context in 1..=c as Message {
                    proc.record_echo(context, echoer, m);
                }
            }
            poll_all(&mut arena, &mut delivered);
        }
    }

    Ok(CobOutcome {
        consistency_violated: delivered.len() >= 2,
        n_h,
        first_phase_len: eta,
        delivered_messages: delivered.len(),
    })
}

/// Counts game wins over independently seeded plays.
pub fn sieve_attack_trials(
    config: &SystemConfig,
    params: &ProtocolParams,
    table: &TwoPhaseTable,
    trials: usize,
    master_seed: u64,
) -> Result<usize, SimError> {
    let results: Vec<Result<bool, String>> = exec::map_indexed(trials, |i| {
        run_simplified_sieve_game(config, params, table, derive_seed(master_seed, i as u64))
            .map(|o| o.consistency_violated)
            .map_err(|e| e.to_string())
    });
    let mut wins = 0;
    for r in results {
        wins += usize::from(r.map_err(SimError::Trace)?);
    }
    Ok(wins)
}

/// Result of one ready-layer consistency attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConsistencyAttackOutcome {
    /// Whether some correct process gathered a delivery-threshold quorum for
    /// the alternative message.
    pub alt_deliverable: bool,
    /// Correct processes that turned ready for the alternative message.
    pub alt_ready: usize,
}

/// Plays the ready-layer consistency attack: every correct process receives
/// the honest message through the echo layer, while every Byzantine process
/// backs an alternative message toward everyone, feeding the ready loop. The
/// attack wins if the alternative reaches some delivery threshold.
pub fn contagion_consistency_attack(
    config: &SystemConfig,
    params: &ProtocolParams,
    m_star: Message,
    m_alt: Message,
    seed: u64,
) -> Result<ConsistencyAttackOutcome, SimError> {
    if m_star == m_alt {
        return Err(SimError::ApiMisuse("attack needs two distinct messages"));
    }
    let Some(&sender) = config.byzantine().iter().next() else {
        // Without Byzantine processes there is no second signed message.
        return Ok(ConsistencyAttackOutcome {
            alt_deliverable: false,
            alt_ready: 0,
        });
    };
    let mut world = world_new(
        config.clone(),
        *params,
        StackMode::ContagionOnly,
        Scheduling::AdversaryFifo,
        sender,
        seed,
    )?;
    world.drain()?;
    let correct: Vec<ProcessId> = config.correct().collect();
    for &pid in &correct {
        world.pcb_deliver(pid, signed(sender, m_star))?;
    }
    world.drain()?;
    for &b in config.byzantine() {
        for &pid in &correct {
            world.inject(b, pid, Wire::Ready(signed(sender, m_alt)))?;
        }
    }
    world.drain()?;
    let mut alt_ready = 0;
    let mut alt_deliverable = false;
    for &pid in &correct {
        let state = world.contagion_state(pid).expect("contagion stack");
        alt_ready += usize::from(state.is_ready_for(m_alt));
        let support = state.delivery_support_where(m_alt, |_| true);
        alt_deliverable |= support >= params.d_hat;
    }
    Ok(ConsistencyAttackOutcome {
        alt_deliverable,
        alt_ready,
    })
}

pub fn contagion_consistency_trials(
    config: &SystemConfig,
    params: &ProtocolParams,
    trials: usize,
    master_seed: u64,
) -> Result<usize, SimError> {
    let results: Vec<Result<bool, String>> = exec::map_indexed(trials, |i| {
        contagion_consistency_attack(config, params, 1, 2, derive_seed(master_seed, i as u64))
            .map(|o| o.alt_deliverable)
            .map_err(|e| e.to_string())
    });
    let mut wins = 0;
    for r in results {
        wins += usize::from(r.map_err(SimError::Trace)?);
    }
    Ok(wins)
}

/// Result of one round-by-round totality attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TotalityAttackOutcome {
    /// Whether some round left one process pushable over the delivery
    /// threshold while another could not reach it without Byzantine help.
    pub totality_violated: bool,
    /// The first round (number of seeded processes) showing that split.
    pub split_round: Option<usize>,
}

/// Plays the round-by-round totality attack: correct processes receive the
/// honest message through the echo layer one per round, the ready feedback
/// loop runs to quiescence, and after each round the adversary checks for a
/// split: some process reaches the delivery threshold once every Byzantine
/// slot backs the message, while some process stays below it on correct
/// support alone.
pub fn contagion_totality_attack(
    config: &SystemConfig,
    params: &ProtocolParams,
    seed: u64,
) -> Result<TotalityAttackOutcome, SimError> {
    let m_star: Message = 1;
    let sender = config
        .byzantine()
        .iter()
        .next()
        .copied()
        .unwrap_or_else(|| config.zeta(0));
    let correct: Vec<ProcessId> = config.correct().collect();
    if correct.len() < 2 {
        // One correct process delivers or starves alone; either way the
        // correct set agrees with itself.
        return Ok(TotalityAttackOutcome {
            totality_violated: false,
            split_round: None,
        });
    }
    let mut world = world_new(
        config.clone(),
        *params,
        StackMode::ContagionOnly,
        Scheduling::AdversaryFifo,
        sender,
        seed,
    )?;
    world.drain()?;
    let is_correct = |pid: ProcessId| !config.is_byzantine(pid);
    let split_at = |world: &SimWorld| -> bool {
        let mut boostable = false;
        let mut starvable = false;
        for &pid in &correct {
            let state = world.contagion_state(pid).expect("contagion stack");
            let correct_support = state.delivery_support_where(m_star, is_correct);
            let byz_slots = state.delivery_slots_where(|p| config.is_byzantine(p));
            boostable |= correct_support + byz_slots >= params.d_hat;
            starvable |= correct_support < params.d_hat;
        }
        boostable && starvable
    };
    if split_at(&world) {
        return Ok(TotalityAttackOutcome {
            totality_violated: true,
            split_round: Some(0),
        });
    }
    for round in 1..=correct.len() {
        let pid = correct[round - 1];
        world.pcb_deliver(pid, signed(sender, m_star))?;
        world.drain()?;
        if split_at(&world) {
            return Ok(TotalityAttackOutcome {
                totality_violated: true,
                split_round: Some(round),
            });
        }
    }
    Ok(TotalityAttackOutcome {
        totality_violated: false,
        split_round: None,
    })
}

pub fn contagion_totality_trials(
    config: &SystemConfig,
    params: &ProtocolParams,
    trials: usize,
    master_seed: u64,
) -> Result<usize, SimError> {
    let results: Vec<Result<bool, String>> = exec::map_indexed(trials, |i| {
        contagion_totality_attack(config, params, derive_seed(master_seed, i as u64))
            .map(|o| o.totality_violated)
            .map_err(|e| e.to_string())
    });
    let mut wins = 0;
    for r in results {
        wins += usize::from(r.map_err(SimError::Trace)?);
    }
    Ok(wins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::run_to_quiescence;

    #[test]
    fn passive_run_with_silent_byzantine_preserves_agreement() {
        let config = SystemConfig::new(20, 0.2).unwrap();
        let params = ProtocolParams::new(8, 10, 6, 10, 4, 10, 7).unwrap();
        let sender = config.zeta(0);
        let mut world = world_new(
            config,
            params,
            StackMode::Full,
            Scheduling::AdversaryFifo,
            sender,
            31,
        )
        .unwrap();
        world.honest_broadcast(1).unwrap();
        let report = run_to_quiescence(&mut world, &mut passive_adversary()).unwrap();
        assert!(report.no_duplication && report.integrity && report.consistency);
    }

    #[test]
    fn default_split_table_is_total() {
        for c in [1, 2, 5, 9] {
            TwoPhaseTable::default_split(c).validate(c).unwrap();
        }
        let table = TwoPhaseTable::default_split(4);
        let parsed = TwoPhaseTable::from_json(&table.to_json()).unwrap();
        assert_eq!(parsed, table);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let mut table = TwoPhaseTable::default_split(3);
        table.first.pop();
        assert!(table.validate(3).is_err());
        let mut table = TwoPhaseTable::default_split(3);
        table.second[1][0] = 9;
        assert!(table.validate(3).is_err());
    }

    #[test]
    fn single_correct_process_never_splits() {
        let config = SystemConfig::with_byzantine(3, [1, 2].into_iter().collect()).unwrap();
        let params = ProtocolParams::new(2, 2, 1, 2, 0, 2, 1).unwrap();
        let table = TwoPhaseTable::default_split(1);
        for seed in 0..50 {
            let outcome = run_simplified_sieve_game(&config, &params, &table, seed).unwrap();
            assert!(!outcome.consistency_violated);
        }
    }

    #[test]
    fn poisoned_samples_deliver_everything() {
        // Every sample slot is Byzantine with probability 3/4; with E = Ê = 1
        // a poisoned process delivers all messages after the echo phase.
        let config = SystemConfig::with_byzantine(4, [0, 1, 3].into_iter().collect()).unwrap();
        let params = ProtocolParams::new(1, 1, 1, 1, 0, 1, 1).unwrap();
        let table = TwoPhaseTable::default_split(1);
        let mut poisoned_seen = false;
        for seed in 0..40 {
            let outcome = run_simplified_sieve_game(&config, &params, &table, seed).unwrap();
            if outcome.first_phase_len == 0 {
                poisoned_seen = true;
                assert_eq!(outcome.delivered_messages, 1);
            }
        }
        assert!(poisoned_seen, "some seed should poison the lone sample");
    }

    #[test]
    fn split_game_wins_sometimes_on_weak_parameters() {
        let config = SystemConfig::new(4, 0.25).unwrap();
        let params = ProtocolParams::new(2, 2, 2, 2, 0, 2, 1).unwrap();
        let table = TwoPhaseTable::default_split(config.num_correct());
        let wins = sieve_attack_trials(&config, &params, &table, 400, 77).unwrap();
        assert!(wins > 0, "weak echo parameters should be breakable");
        assert!(wins < 400, "the attack should not always win");
    }

    #[test]
    fn consistency_attack_needs_byzantine_help() {
        let config = SystemConfig::new(10, 0.0).unwrap();
        let params = ProtocolParams::new(4, 5, 3, 5, 2, 5, 3).unwrap();
        let outcome = contagion_consistency_attack(&config, &params, 1, 2, 5).unwrap();
        assert!(!outcome.alt_deliverable);
        assert_eq!(outcome.alt_ready, 0);
    }

    #[test]
    fn consistency_attack_wins_against_weak_thresholds() {
        let config = SystemConfig::new(12, 0.5).unwrap();
        let params = ProtocolParams::new(4, 6, 4, 6, 2, 6, 3).unwrap();
        let mut wins = 0;
        for seed in 0..30 {
            let outcome = contagion_consistency_attack(&config, &params, 1, 2, seed).unwrap();
            wins += usize::from(outcome.alt_deliverable);
        }
        assert!(wins > 0, "half-Byzantine system with low thresholds should fall");
    }

    #[test]
    fn totality_attack_cannot_split_a_single_process() {
        let config = SystemConfig::with_byzantine(2, [1].into_iter().collect()).unwrap();
        let params = ProtocolParams::new(2, 2, 1, 2, 1, 2, 2).unwrap();
        for seed in 0..20 {
            let outcome = contagion_totality_attack(&config, &params, seed).unwrap();
            assert!(!outcome.totality_violated);
            assert_eq!(outcome.split_round, None);
        }
    }

    #[test]
    fn totality_attack_finds_splits_with_strong_byzantine_presence() {
        let config = SystemConfig::new(12, 0.4).unwrap();
        let params = ProtocolParams::new(4, 6, 4, 6, 2, 6, 3).unwrap();
        let mut wins = 0;
        for seed in 0..30 {
            let outcome = contagion_totality_attack(&config, &params, seed).unwrap();
            wins += usize::from(outcome.totality_violated);
        }
        assert!(wins > 0);
    }
}
