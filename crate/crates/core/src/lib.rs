//! Probabilistic Byzantine reliable broadcast, simulated and bounded.
//!
//! This crate implements a three-layer broadcast stack as deterministic state
//! machines, a simulated adversarial network to run them in, and a numerical
//! pipeline that evaluates the security of every layer:
//!
//! * [`murmur`] — gossip-based probabilistic broadcast. Every process relays
//!   the sender's signed message to a small random gossip sample.
//! * [`sieve`] — consistent broadcast on top of murmur. Processes echo what
//!   they received and deliver only when enough of a random echo sample
//!   agrees, which makes conflicting deliveries unlikely.
//! * [`contagion`] — reliable broadcast on top of sieve. Ready messages
//!   spread epidemically through random ready samples; delivery requires a
//!   second threshold on an independent delivery sample, which adds totality.
//!
//! Every protocol decision is driven by random samples instead of quorums, so
//! each security property holds except with a probability ε that shrinks with
//! the sample sizes. The [`bounds`] module computes those ε values in natural
//! log space (they get as small as 1e-20 and far below), [`epidemics`] solves
//! the threshold-contagion Markov chain the contagion bounds are built on,
//! [`adversaries`] implements the worst-case attackers the bounds are checked
//! against, and [`optimizer`] searches parameter space for a given message
//! budget.
//!
//! Everything is deterministic: simulations, attacks and Monte Carlo runs are
//! reproducible from a single `u64` seed (see [`sampling`]). Batch work runs
//! on rayon when the `parallel` feature (default) is enabled; the sequential
//! fallbacks in [`exec`] are always compiled and produce identical output.

pub mod adversaries;
pub mod bounds;
pub mod config;
pub mod contagion;
pub mod epidemics;
pub mod exec;
pub mod murmur;
pub mod numerics;
pub mod optimizer;
pub mod sampling;
pub mod sieve;
pub mod sig;
pub mod simnet;

pub use config::{ConfigError, Message, ProcessId, ProtocolParams, SystemConfig};
pub use sig::{sign, signed, verify, SignedPayload};
