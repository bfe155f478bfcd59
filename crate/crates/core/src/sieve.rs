//! Sieve: probabilistic consistent broadcast on top of murmur.
//!
//! Each process draws an echo sample of `e` slots with replacement and
//! subscribes to every distinct member. When the underlying broadcast
//! delivers a payload, the process stores it as its echo and sends it to its
//! subscribers. A payload is delivered once at least `e_hat` sample slots
//! have echoed that same payload back. Two conflicting deliveries would need
//! two mostly-disjoint groups of echoers, each heavily represented in
//! somebody's sample — the consistency bound in [`crate::bounds`] makes that
//! quantitative.

use rand::Rng;
use std::collections::BTreeSet;

use crate::config::{Message, ProcessId};
use crate::sampling::{sample_with_replacement, SampleError};
use crate::sig::{self, SignedPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SieveMsg {
    EchoSubscribe,
    Echo(SignedPayload),
    /// Inner record handed to the underlying probabilistic broadcast.
    Send(SignedPayload),
}

#[derive(Debug, Clone)]
pub struct SieveState {
    /// The broadcast sender whose messages this instance accepts.
    sender: ProcessId,
    /// What we echoed (set on the first underlying delivery).
    echo: Option<SignedPayload>,
    /// Echo sample: `e` slots drawn with replacement. A process holding
    /// several slots fills all of them with its single echo.
    echo_sample: Vec<ProcessId>,
    /// First echo received from the holder of each sample slot.
    replies: Vec<Option<Message>>,
    /// Everyone who subscribed to our echoes.
    subscribers: BTreeSet<ProcessId>,
    delivered: bool,
}

#[derive(Debug, Default)]
pub struct SieveEffects {
    pub outgoing: Vec<(ProcessId, SieveMsg)>,
}

impl SieveState {
    pub fn echo_sample(&self) -> &[ProcessId] {
        &self.echo_sample
    }

    pub fn echo(&self) -> Option<&SignedPayload> {
        self.echo.as_ref()
    }

    pub fn delivered(&self) -> bool {
        self.delivered
    }
}

/// Draws the echo sample and subscribes to each distinct member.
pub fn sieve_init(
    sender: ProcessId,
    n: usize,
    e: usize,
    rng: &mut impl Rng,
) -> Result<(SieveState, SieveEffects), SampleError> {
    let echo_sample = sample_with_replacement(n, e, rng)?;
    let distinct: BTreeSet<ProcessId> = echo_sample.iter().copied().collect();
    let outgoing = distinct
        .into_iter()
        .map(|peer| (peer, SieveMsg::EchoSubscribe))
        .collect();
    let state = SieveState {
        sender,
        echo: None,
        replies: vec![None; e],
        echo_sample,
        subscribers: BTreeSet::new(),
        delivered: false,
    };
    Ok((state, SieveEffects { outgoing }))
}

/// Handles a subscription: remember the peer and catch it up if we already
/// have an echo.
pub fn sieve_on_subscribe(state: &mut SieveState, from: ProcessId) -> SieveEffects {
    state.subscribers.insert(from);
    let outgoing = match state.echo {
        Some(payload) => vec![(from, SieveMsg::Echo(payload))],
        None => Vec::new(),
    };
    SieveEffects { outgoing }
}

/// Handles a delivery from the underlying broadcast: adopt the payload as our
/// echo (first one wins) and send it to all current subscribers.
pub fn sieve_on_pb_deliver(state: &mut SieveState, payload: SignedPayload) -> SieveEffects {
    if payload.sender != state.sender || !sig::verify(&payload) || state.echo.is_some() {
        return SieveEffects::default();
    }
    state.echo = Some(payload);
    let outgoing = state
        .subscribers
        .iter()
        .map(|&peer| (peer, SieveMsg::Echo(payload)))
        .collect();
    SieveEffects { outgoing }
}

/// Handles an echo: it fills every still-empty sample slot held by `from`.
pub fn sieve_on_echo(state: &mut SieveState, from: ProcessId, payload: SignedPayload) {
    if payload.sender != state.sender || !sig::verify(&payload) {
        return;
    }
    for (slot, holder) in state.echo_sample.iter().enumerate() {
        if *holder == from && state.replies[slot].is_none() {
            state.replies[slot] = Some(payload.message);
        }
    }
}

/// Delivers our echoed payload once at least `e_hat` sample slots agree with
/// it. Returns the payload on the transition and `None` before the threshold
/// or after delivery already happened.
pub fn sieve_try_deliver(state: &mut SieveState, e_hat: usize) -> Option<SignedPayload> {
    if state.delivered {
        return None;
    }
    let payload = state.echo?;
    let matching = state
        .replies
        .iter()
        .filter(|r| **r == Some(payload.message))
        .count();
    if matching >= e_hat {
        state.delivered = true;
        Some(payload)
    } else {
        None
    }
}
