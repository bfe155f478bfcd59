//! Contagion: probabilistic reliable broadcast on top of sieve.
//!
//! Processes spread `Ready` messages epidemically. Each process draws two
//! samples with replacement: a ready sample of `r` slots and a delivery
//! sample of `d` slots, subscribing to every distinct member of either.
//! A process becomes *ready* for a message when the underlying consistent
//! broadcast delivers it, or when `r_hat` ready-sample slots are ready for it
//! (the contagion). It *delivers* a message supported by `d_hat` delivery-
//! sample slots. The ready threshold sits strictly below the delivery
//! threshold (as ratios), so by the time anyone delivers, the ready epidemic
//! is overwhelmingly likely to reach everyone — that asymmetry is what turns
//! consistency into totality.

use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

use crate::config::{Message, ProcessId};
use crate::sampling::{sample_with_replacement, SampleError};
use crate::sig::{self, SignedPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContagionMsg {
    ReadySubscribe,
    Ready(SignedPayload),
}

#[derive(Debug, Clone)]
pub struct ContagionState {
    /// The broadcast sender whose messages this instance accepts.
    sender: ProcessId,
    /// Messages we are ready for. Grows only.
    ready: BTreeSet<Message>,
    /// Verified payloads seen, for re-sending on ready transitions.
    seen: BTreeMap<Message, SignedPayload>,
    ready_sample: Vec<ProcessId>,
    delivery_sample: Vec<ProcessId>,
    /// Per ready-sample slot: messages its holder is ready for.
    replies_ready: Vec<BTreeSet<Message>>,
    /// Per delivery-sample slot: messages its holder is ready for.
    replies_delivery: Vec<BTreeSet<Message>>,
    subscribers: BTreeSet<ProcessId>,
    delivered: bool,
}

#[derive(Debug, Default)]
pub struct ContagionEffects {
    pub outgoing: Vec<(ProcessId, ContagionMsg)>,
}

impl ContagionState {
    pub fn ready_sample(&self) -> &[ProcessId] {
        &self.ready_sample
    }

    pub fn delivery_sample(&self) -> &[ProcessId] {
        &self.delivery_sample
    }

    pub fn is_ready_for(&self, m: Message) -> bool {
        self.ready.contains(&m)
    }

    pub fn has_delivered(&self) -> bool {
        self.delivered
    }

    /// Number of delivery-sample slots whose holder is ready for `m`,
    /// counting only holders that satisfy `include`. Attack measurements use
    /// this to split correct support from Byzantine support.
    pub fn delivery_support_where(&self, m: Message, include: impl Fn(ProcessId) -> bool) -> usize {
        self.delivery_sample
            .iter()
            .zip(&self.replies_delivery)
            .filter(|(holder, msgs)| include(**holder) && msgs.contains(&m))
            .count()
    }

    /// Delivery-sample slots held by processes satisfying `include`,
    /// regardless of any Ready received (the slots an adversary could fill).
    pub fn delivery_slots_where(&self, include: impl Fn(ProcessId) -> bool) -> usize {
        self.delivery_sample.iter().filter(|h| include(**h)).count()
    }
}

/// Draws the ready and delivery samples and subscribes to each distinct
/// member of their union.
pub fn contagion_init(
    sender: ProcessId,
    n: usize,
    r: usize,
    d: usize,
    rng: &mut impl Rng,
) -> Result<(ContagionState, ContagionEffects), SampleError> {
    let ready_sample = sample_with_replacement(n, r, rng)?;
    let delivery_sample = sample_with_replacement(n, d, rng)?;
    let distinct: BTreeSet<ProcessId> = ready_sample
        .iter()
        .chain(delivery_sample.iter())
        .copied()
        .collect();
    let outgoing = distinct
        .into_iter()
        .map(|peer| (peer, ContagionMsg::ReadySubscribe))
        .collect();
    let state = ContagionState {
        sender,
        ready: BTreeSet::new(),
        seen: BTreeMap::new(),
        replies_ready: vec![BTreeSet::new(); r],
        replies_delivery: vec![BTreeSet::new(); d],
        ready_sample,
        delivery_sample,
        subscribers: BTreeSet::new(),
        delivered: false,
    };
    Ok((state, ContagionEffects { outgoing }))
}

/// Handles a subscription: the peer is caught up with every message we are
/// already ready for.
pub fn contagion_on_subscribe(state: &mut ContagionState, from: ProcessId) -> ContagionEffects {
    state.subscribers.insert(from);
    let outgoing = state
        .ready
        .iter()
        .map(|m| (from, ContagionMsg::Ready(state.seen[m])))
        .collect();
    ContagionEffects { outgoing }
}

/// Handles a delivery from the underlying consistent broadcast: become ready
/// for the payload and tell all subscribers.
pub fn contagion_on_pcb_deliver(
    state: &mut ContagionState,
    payload: SignedPayload,
) -> ContagionEffects {
    if payload.sender != state.sender || !sig::verify(&payload) {
        return ContagionEffects::default();
    }
    become_ready(state, payload)
}

/// Handles a `Ready`: tally it into every sample slot held by `from`, then
/// fire any ready transitions it caused (at least `r_hat` ready-sample slots
/// supporting a message we are not yet ready for).
pub fn contagion_on_ready(
    state: &mut ContagionState,
    from: ProcessId,
    payload: SignedPayload,
    r_hat: usize,
) -> ContagionEffects {
    if payload.sender != state.sender || !sig::verify(&payload) {
        return ContagionEffects::default();
    }
    let m = payload.message;
    state.seen.entry(m).or_insert(payload);
    for (slot, holder) in state.ready_sample.iter().enumerate() {
        if *holder == from {
            state.replies_ready[slot].insert(m);
        }
    }
    for (slot, holder) in state.delivery_sample.iter().enumerate() {
        if *holder == from {
            state.replies_delivery[slot].insert(m);
        }
    }
    if !state.is_ready_for(m) && ready_support(state, m) >= r_hat {
        become_ready(state, payload)
    } else {
        ContagionEffects::default()
    }
}

/// Messages whose delivery-sample support reaches `d_hat`, in ascending
/// order. Empty once the process has delivered. The honest scheduler picks
/// the lowest; an adversary may pick any (the spec of the network decides).
pub fn contagion_deliverable(state: &ContagionState, d_hat: usize) -> Vec<Message> {
    if state.delivered {
        return Vec::new();
    }
    let mut support: BTreeMap<Message, usize> = BTreeMap::new();
    for msgs in &state.replies_delivery {
        for &m in msgs {
            *support.entry(m).or_default() += 1;
        }
    }
    support
        .into_iter()
        .filter(|&(_, s)| s >= d_hat)
        .map(|(m, _)| m)
        .collect()
}

/// Marks `m` delivered and returns its payload. Panics if `m` was never seen;
/// callers pick `m` from [`contagion_deliverable`].
pub fn contagion_mark_delivered(state: &mut ContagionState, m: Message) -> SignedPayload {
    debug_assert!(!state.delivered);
    state.delivered = true;
    state.seen[&m]
}

fn ready_support(state: &ContagionState, m: Message) -> usize {
    state
        .replies_ready
        .iter()
        .filter(|msgs| msgs.contains(&m))
        .count()
}

fn become_ready(state: &mut ContagionState, payload: SignedPayload) -> ContagionEffects {
    let m = payload.message;
    if !state.ready.insert(m) {
        return ContagionEffects::default();
    }
    state.seen.entry(m).or_insert(payload);
    let outgoing = state
        .subscribers
        .iter()
        .map(|&peer| (peer, ContagionMsg::Ready(payload)))
        .collect();
    ContagionEffects { outgoing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{substream, StreamDomain};
    use crate::sig::signed;

    fn init(r: usize, d: usize) -> (ContagionState, ContagionEffects) {
        let mut rng = substream(3, StreamDomain::ProtocolInit, 2);
        contagion_init(0, 12, r, d, &mut rng).unwrap()
    }

    #[test]
    fn init_subscribes_to_union_of_samples() {
        let (state, effects) = init(6, 4);
        let distinct: BTreeSet<_> = state
            .ready_sample()
            .iter()
            .chain(state.delivery_sample())
            .copied()
            .collect();
        assert_eq!(effects.outgoing.len(), distinct.len());
    }

    #[test]
    fn pcb_delivery_makes_ready_and_fans_out() {
        let (mut state, _) = init(4, 4);
        contagion_on_subscribe(&mut state, 5);
        let payload = signed(0, 3);
        let effects = contagion_on_pcb_deliver(&mut state, payload);
        assert!(state.is_ready_for(3));
        assert_eq!(effects.outgoing, vec![(5, ContagionMsg::Ready(payload))]);

        // Ready set grows only; a repeat changes nothing.
        let again = contagion_on_pcb_deliver(&mut state, payload);
        assert!(again.outgoing.is_empty());
    }

    #[test]
    fn late_subscriber_receives_all_stored_ready_messages() {
        let (mut state, _) = init(4, 4);
        contagion_on_pcb_deliver(&mut state, signed(0, 2));
        // Force readiness for a second message through the sample.
        state.ready_sample = vec![1, 1, 2, 3];
        state.replies_ready = vec![BTreeSet::new(); 4];
        contagion_on_ready(&mut state, 1, signed(0, 7), 2);
        assert!(state.is_ready_for(7));

        let effects = contagion_on_subscribe(&mut state, 9);
        let msgs: Vec<_> = effects.outgoing.iter().map(|(p, m)| (*p, *m)).collect();
        assert_eq!(
            msgs,
            vec![
                (9, ContagionMsg::Ready(signed(0, 2))),
                (9, ContagionMsg::Ready(signed(0, 7))),
            ]
        );
    }

    #[test]
    fn ready_transition_fires_once_at_threshold() {
        let (mut state, _) = init(4, 4);
        state.ready_sample = vec![1, 1, 2, 3];
        state.replies_ready = vec![BTreeSet::new(); 4];
        contagion_on_subscribe(&mut state, 8);

        let payload = signed(0, 5);
        // One Ready from process 1 fills two slots: short of r_hat = 3.
        let fx = contagion_on_ready(&mut state, 1, payload, 3);
        assert!(fx.outgoing.is_empty() && !state.is_ready_for(5));
        // Process 2 brings support to 3: transition, single fan-out.
        let fx = contagion_on_ready(&mut state, 2, payload, 3);
        assert_eq!(fx.outgoing, vec![(8, ContagionMsg::Ready(payload))]);
        // Process 3 adds support but no second fan-out.
        let fx = contagion_on_ready(&mut state, 3, payload, 3);
        assert!(fx.outgoing.is_empty());
    }

    #[test]
    fn delivery_threshold_and_tie_break_order() {
        let (mut state, _) = init(4, 4);
        state.delivery_sample = vec![1, 2, 3, 1];
        state.replies_delivery = vec![BTreeSet::new(); 4];

        for (from, m) in [(1, 6), (2, 6), (1, 4), (2, 4), (3, 4)] {
            contagion_on_ready(&mut state, from, signed(0, m), 99);
        }
        // Support: message 6 has slots {0, 1, 3}; message 4 has all four.
        assert_eq!(contagion_deliverable(&state, 3), vec![4, 6]);
        let payload = contagion_mark_delivered(&mut state, 4);
        assert_eq!(payload.message, 4);
        assert!(contagion_deliverable(&state, 3).is_empty());
    }

    #[test]
    fn invalid_ready_is_dropped() {
        let (mut state, _) = init(4, 4);
        let mut forged = signed(0, 3);
        forged.tag = crate::sig::sign(1, 3);
        let fx = contagion_on_ready(&mut state, 1, forged, 1);
        assert!(fx.outgoing.is_empty());
        let fx = contagion_on_ready(&mut state, 1, signed(4, 3), 1);
        assert!(fx.outgoing.is_empty());
    }
}
