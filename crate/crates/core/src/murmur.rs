//! Murmur: probabilistic broadcast by gossip.
//!
//! Every process joins the gossip network by subscribing to a Poisson-sized
//! random set of peers. Gossip flows both ways along a subscription, so the
//! effective gossip graph is the union of each process's sample with the
//! reverse edges — an Erdos-Renyi graph whose connectivity gives totality.
//! The sender signs its message; everyone forwards the first valid copy to
//! its whole gossip set and ignores the rest.
//!
//! The state machine here is pure: handlers take a state and an input and
//! return the messages to send plus an optional delivery. The simulated
//! network in [`crate::simnet`] (or a test) owns scheduling.

use std::collections::BTreeSet;

use rand::Rng;

use crate::config::ProcessId;
use crate::sampling::{sample_poisson_distinct, SampleError};
use crate::sig::{self, SignedPayload};

/// Wire records exchanged by murmur.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MurmurMsg {
    GossipSubscribe,
    Gossip(SignedPayload),
}

#[derive(Debug, Clone)]
pub struct MurmurState {
    me: ProcessId,
    /// The broadcast sender whose messages this instance accepts.
    sender: ProcessId,
    /// Gossip set: the initial sample plus everyone who subscribed to us.
    gossip: BTreeSet<ProcessId>,
    delivered: Option<SignedPayload>,
}

/// Messages to send, plus the payload delivered by this transition (if any).
#[derive(Debug, Default)]
pub struct MurmurEffects {
    pub outgoing: Vec<(ProcessId, MurmurMsg)>,
    pub delivered: Option<SignedPayload>,
}

impl MurmurState {
    pub fn gossip_set(&self) -> &BTreeSet<ProcessId> {
        &self.gossip
    }

    pub fn delivered(&self) -> Option<&SignedPayload> {
        self.delivered.as_ref()
    }
}

/// Draws the initial gossip sample (expected size `g`) and subscribes to it.
pub fn murmur_init(
    me: ProcessId,
    sender: ProcessId,
    n: usize,
    g: usize,
    rng: &mut impl Rng,
) -> Result<(MurmurState, MurmurEffects), SampleError> {
    let gossip = sample_poisson_distinct(n, g as f64, rng)?;
    let outgoing = gossip
        .iter()
        .map(|&peer| (peer, MurmurMsg::GossipSubscribe))
        .collect();
    let state = MurmurState {
        me,
        sender,
        gossip,
        delivered: None,
    };
    Ok((
        state,
        MurmurEffects {
            outgoing,
            delivered: None,
        },
    ))
}

/// Handles a subscription: the peer joins our gossip set and, if we already
/// delivered, is caught up immediately.
pub fn murmur_on_subscribe(state: &mut MurmurState, from: ProcessId) -> MurmurEffects {
    state.gossip.insert(from);
    let outgoing = match state.delivered {
        Some(payload) => vec![(from, MurmurMsg::Gossip(payload))],
        None => Vec::new(),
    };
    MurmurEffects {
        outgoing,
        delivered: None,
    }
}

/// Broadcasts `payload` from the sender itself: deliver locally, then gossip.
/// A second broadcast is a no-op (the first delivery wins).
pub fn murmur_broadcast(state: &mut MurmurState, payload: SignedPayload) -> MurmurEffects {
    debug_assert_eq!(state.me, state.sender);
    debug_assert_eq!(payload.sender, state.sender);
    if state.delivered.is_some() {
        return MurmurEffects::default();
    }
    state.delivered = Some(payload);
    MurmurEffects {
        outgoing: gossip_to_all(state, payload),
        delivered: Some(payload),
    }
}

/// Handles a gossiped payload: the first valid one is delivered and forwarded
/// to the whole gossip set; everything else is dropped.
pub fn murmur_on_gossip(state: &mut MurmurState, payload: SignedPayload) -> MurmurEffects {
    if payload.sender != state.sender || !sig::verify(&payload) {
        return MurmurEffects::default();
    }
    if state.delivered.is_some() {
        return MurmurEffects::default();
    }
    state.delivered = Some(payload);
    MurmurEffects {
        outgoing: gossip_to_all(state, payload),
        delivered: Some(payload),
    }
}

fn gossip_to_all(state: &MurmurState, payload: SignedPayload) -> Vec<(ProcessId, MurmurMsg)> {
    state
        .gossip
        .iter()
        .map(|&peer| (peer, MurmurMsg::Gossip(payload)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{substream, StreamDomain};
    use crate::sig::signed;

    fn init(me: ProcessId, sender: ProcessId) -> (MurmurState, MurmurEffects) {
        let mut rng = substream(11, StreamDomain::ProtocolInit, me as u64);
        murmur_init(me, sender, 20, 6, &mut rng).unwrap()
    }

    #[test]
    fn init_subscribes_to_every_member() {
        let (state, effects) = init(0, 0);
        assert_eq!(effects.outgoing.len(), state.gossip_set().len());
        for (peer, msg) in &effects.outgoing {
            assert!(state.gossip_set().contains(peer));
            assert_eq!(*msg, MurmurMsg::GossipSubscribe);
        }
    }

    #[test]
    fn first_gossip_delivers_and_forwards() {
        let (mut state, _) = init(1, 0);
        let payload = signed(0, 1);
        let effects = murmur_on_gossip(&mut state, payload);
        assert_eq!(effects.delivered, Some(payload));
        assert_eq!(effects.outgoing.len(), state.gossip_set().len());

        // A second (even conflicting) gossip is ignored.
        let other = signed(0, 2);
        let effects = murmur_on_gossip(&mut state, other);
        assert!(effects.delivered.is_none() && effects.outgoing.is_empty());
        assert_eq!(state.delivered(), Some(&payload));
    }

    #[test]
    fn gossip_from_wrong_sender_is_dropped() {
        let (mut state, _) = init(1, 0);
        let forged = signed(2, 1);
        let effects = murmur_on_gossip(&mut state, forged);
        assert!(effects.delivered.is_none());
        assert!(state.delivered().is_none());
    }

    #[test]
    fn late_subscriber_is_caught_up() {
        let (mut state, _) = init(1, 0);
        let payload = signed(0, 1);
        murmur_on_gossip(&mut state, payload);
        let effects = murmur_on_subscribe(&mut state, 7);
        assert_eq!(effects.outgoing, vec![(7, MurmurMsg::Gossip(payload))]);
        assert!(state.gossip_set().contains(&7));
    }

    #[test]
    fn double_broadcast_is_noop() {
        let (mut state, _) = init(0, 0);
        let payload = signed(0, 1);
        let first = murmur_broadcast(&mut state, payload);
        assert_eq!(first.delivered, Some(payload));
        let second = murmur_broadcast(&mut state, signed(0, 2));
        assert!(second.delivered.is_none() && second.outgoing.is_empty());
    }
}
