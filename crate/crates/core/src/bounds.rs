//! Security bounds for the three broadcast layers.
//!
//! Every function returns natural-log probabilities so the pipeline resolves
//! failure rates far below 1e-300 without underflow. Differences of
//! probabilities close to one are always taken through `expm1`/`log1p`
//! pairings on whichever side of the complement is small, so results keep
//! relative precision down to the 1e-20 scale the parameter search targets.
//!
//! Layer composition:
//!
//! * Murmur's totality bound feeds Sieve's total-validity bound (a gossip
//!   partition can strand a correct process before the echo phase starts).
//! * Sieve's consistency bound is conditioned on gossip totality holding; the
//!   value handed to Contagion is the union of the two, capped at one.
//! * Contagion's validity, consistency and totality combine Sieve's bounds
//!   with the ready-sample contagion analysis; the overall figure is the
//!   union bound over the three properties.

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ProtocolParams, SystemConfig};
use crate::epidemics::{gamma_distribution, occupation_measure, GameError, GameParams};
use crate::numerics::{
    chernoff_union_bound, ln_choose, log1m_exp, log_add_exp, log_binom_pmf, log_binom_tail,
    log_sum_exp, NumericsError,
};

#[derive(Debug, Error)]
pub enum BoundError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("gossip diameter undefined: (2 - 2f) * g must exceed 1, got f = {f}, g = {g}")]
    LatencyDomain { f: f64, g: usize },
    #[error("search constraint infeasible: {0}")]
    Infeasible(&'static str),
}

/// ln(e^a - e^b) for a >= b, keeping the relative precision of the gap.
fn ln_diff(a: f64, b: f64) -> f64 {
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + log1m_exp(b - a)
}

/// Probability that two correct processes pick each other into their gossip
/// samples through at least one of the two directed draws.
pub fn murmur_edge_probability(n: usize, g: usize) -> f64 {
    if g >= n {
        return 1.0;
    }
    let miss = 1.0 - g as f64 / n as f64;
    1.0 - miss * miss
}

/// ln of the probability that the gossip subgraph over the `c` correct
/// processes is disconnected, by the standard cut-counting union bound on an
/// Erdős–Rényi graph with the edge probability above.
pub fn murmur_totality_bound(c: usize, n: usize, g: usize) -> f64 {
    let ln_miss_edge = if g >= n {
        f64::NEG_INFINITY
    } else {
        2.0 * (1.0 - g as f64 / n as f64).ln()
    };
    let terms: Vec<f64> = (1..=c / 2)
        .map(|k| ln_choose(c as u64, k as u64) + (k * (c - k)) as f64 * ln_miss_edge)
        .collect();
    log_sum_exp(&terms).min(0.0)
}

/// Asymptotic diameter of the correct gossip subgraph, in hops.
pub fn murmur_latency(c: usize, f: f64, g: usize) -> Result<f64, BoundError> {
    if c <= 1 {
        return Ok(0.0);
    }
    let denom = (2.0 - 2.0 * f).ln() + (g as f64).ln();
    if denom <= 0.0 {
        return Err(BoundError::LatencyDomain { f, g });
    }
    Ok((c as f64).ln() / denom)
}

/// ln of the probability that a sample of `size` slots at Byzantine rate `f`
/// contains so many Byzantine slots that `hat` correct responses can never be
/// collected (more than `size - hat` Byzantine slots).
fn ln_overwhelmed(size: usize, hat: usize, f: f64) -> Result<f64, BoundError> {
    if hat == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_binom_tail(size as u64, f, (size - hat + 1) as u64)?)
}

/// ln of Sieve's total-validity failure bound: either gossip totality fails,
/// or some correct process' echo sample is too Byzantine to ever reach the
/// echo threshold.
pub fn sieve_total_validity_bound(
    c: usize,
    f: f64,
    e: usize,
    e_hat: usize,
    ln_eps_pb_t: f64,
) -> Result<f64, BoundError> {
    let ln_eps_o = ln_overwhelmed(e, e_hat, f)?;
    let ln_union = log1m_exp(c as f64 * log1m_exp(ln_eps_o));
    Ok(log_add_exp(ln_eps_pb_t, log1m_exp(ln_eps_pb_t) + ln_union).min(0.0))
}

/// Chernoff bound on the probability that any of a group of echo-threshold
/// events fires: sample has `e` slots of which `f_byz` are Byzantine, the
/// threshold is `e_hat`, and each correct slot hits with probability `h`.
/// A sample with `f_byz >= e_hat` is poisoned and the bound degrades to one.
fn ln_threshold_union(e: usize, e_hat: usize, f_byz: usize, h: f64) -> f64 {
    if f_byz >= e_hat {
        return 0.0;
    }
    chernoff_union_bound((e - f_byz) as u64, (e_hat - f_byz) as u64, h)
        .expect("threshold count is positive")
}

/// Per-Byzantine-count threshold tables at one echo-hit probability.
///
/// For each Byzantine count `fb` the binomial has `e - fb` trials;
/// `ln_tail[fb][k]` is ln P[X >= k] (index `e - fb + 1` is the empty tail)
/// and `ln_cdf[fb][k]` is ln P[X <= k]. Keeping both orientations lets every
/// consumer difference the side that is far from one.
struct ThresholdRows {
    ln_tail: Vec<Vec<f64>>,
    ln_cdf: Vec<Vec<f64>>,
}

/// ln of k! for k in 0..=cap, for the closed-form binomial terms below.
fn ln_factorials(cap: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(cap + 1);
    let mut acc = 0.0;
    table.push(acc);
    for k in 1..=cap {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Smallest Byzantine count whose prior upper tail is negligible (below
/// e^-420); rows past it are replaced by the pessimistic constant one.
fn byzantine_row_cap(ln_pf: &[f64]) -> usize {
    let mut suffix = f64::NEG_INFINITY;
    let mut cap = ln_pf.len();
    for fb in (0..ln_pf.len()).rev() {
        suffix = log_add_exp(suffix, ln_pf[fb]);
        if suffix < -420.0 {
            cap = fb;
        } else {
            break;
        }
    }
    cap.max(1)
}

fn threshold_rows(e: usize, p: f64, cap: usize, ln_fact: &[f64]) -> ThresholdRows {
    let ln_p = p.ln();
    let ln_1mp = (-p).ln_1p();
    let rows = crate::exec::map_indexed(cap, |fb| {
        let n = e - fb;
        let pmf: Vec<f64> = (0..=n)
            .map(|k| {
                if p == 0.0 {
                    return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
                }
                if p == 1.0 {
                    return if k == n { 0.0 } else { f64::NEG_INFINITY };
                }
                ln_fact[n] - ln_fact[k] - ln_fact[n - k]
                    + k as f64 * ln_p
                    + (n - k) as f64 * ln_1mp
            })
            .collect();
        let mut tail = vec![f64::NEG_INFINITY; n + 2];
        for k in (1..=n).rev() {
            tail[k] = log_add_exp(pmf[k], tail[k + 1]).min(0.0);
        }
        tail[0] = 0.0;
        let mut cdf = vec![f64::NEG_INFINITY; n + 1];
        let mut acc = f64::NEG_INFINITY;
        for k in 0..=n {
            acc = log_add_exp(acc, pmf[k]);
            cdf[k] = acc.min(0.0);
        }
        cdf[n] = 0.0;
        (tail, cdf)
    });
    let mut ln_tail = Vec::with_capacity(cap);
    let mut ln_cdf = Vec::with_capacity(cap);
    for (tail, cdf) in rows {
        ln_tail.push(tail);
        ln_cdf.push(cdf);
    }
    ThresholdRows { ln_tail, ln_cdf }
}

/// Sieve consistency bound, evaluated for several echo thresholds in one
/// pass. Returns ln of the bound for each entry of `e_hats`.
///
/// The pipeline follows the two-phase adversary analysis: the probability
/// that the first message delivered anywhere has collected at most `L`
/// underlying pb.Deliveries is bounded by an envelope over the per-`L` union
/// bounds, and each envelope mass is paired with a Bayes-weighted Chernoff
/// bound on a second message reaching the echo threshold afterwards.
pub fn sieve_consistency_profile(
    c: usize,
    f: f64,
    e: usize,
    e_hats: &[usize],
) -> Result<Vec<f64>, BoundError> {
    let ln_pf: Vec<f64> = (0..=e)
        .map(|fb| log_binom_pmf(e as u64, f, fb as u64))
        .collect::<Result<_, _>>()?;

    struct EnvelopeState {
        ln_g_env: f64,
        ln_terms: f64,
    }
    let mut states: Vec<EnvelopeState> = e_hats
        .iter()
        .map(|_| EnvelopeState {
            ln_g_env: 0.0,
            ln_terms: f64::NEG_INFINITY,
        })
        .collect();

    let ln_fact = ln_factorials(e);
    let row_cap = byzantine_row_cap(&ln_pf);
    let mut rows_prev = threshold_rows(e, 0.0, row_cap, &ln_fact);
    for l in 1..=c {
        let rows_cur = threshold_rows(e, l as f64 / c as f64, row_cap, &ln_fact);
        for (state, &e_hat) in states.iter_mut().zip(e_hats) {
            // First phase: probability that some process delivers some
            // message with at most l supporting pb.Deliveries.
            let groups = (c / l) as f64;
            let rem = c % l;
            let psi_terms: Vec<f64> = (0..=e)
                .filter(|&fb| ln_pf[fb] > f64::NEG_INFINITY)
                .map(|fb| {
                    let mut ln_keep =
                        groups * log1m_exp(ln_threshold_union(e, e_hat, fb, l as f64 / c as f64));
                    if rem > 0 {
                        ln_keep +=
                            log1m_exp(ln_threshold_union(e, e_hat, fb, rem as f64 / c as f64));
                    }
                    ln_pf[fb] + log1m_exp(ln_keep)
                })
                .collect();
            let ln_psi = log_sum_exp(&psi_terms).min(0.0);
            let ln_g = c as f64 * log1m_exp(ln_psi);
            let ln_mass = ln_diff(state.ln_g_env, ln_g);
            if ln_g < state.ln_g_env {
                state.ln_g_env = ln_g;
            }
            if ln_mass == f64::NEG_INFINITY {
                continue;
            }

            // Second phase: Bayes-condition the Byzantine count of the first
            // deliverer (gap of the delivery tails at l-1 and l) and of every
            // other process (complement of the tail at l-1), then mix the
            // Chernoff bound for delivering a second message.
            let mut num_plus = Vec::with_capacity(e + 1);
            let mut num_minus = Vec::with_capacity(e + 1);
            let mut phi_plus_terms = Vec::with_capacity(e + 1);
            let mut phi_minus_terms = Vec::with_capacity(e + 1);
            let h_second = (c - l) as f64 / c as f64;
            for fb in 0..=e {
                if ln_pf[fb] == f64::NEG_INFINITY {
                    continue;
                }
                if fb >= e_hat.min(row_cap) && fb < e_hat {
                    // Negligible prior mass: fold it in as a certain event
                    // with a certain second delivery, which can only push the
                    // mixtures up.
                    num_plus.push(ln_pf[fb]);
                    num_minus.push(ln_pf[fb]);
                    phi_plus_terms.push(ln_pf[fb]);
                    phi_minus_terms.push(ln_pf[fb]);
                    continue;
                }
                let (ln_gap, ln_not_prev) = if fb >= e_hat {
                    (f64::NEG_INFINITY, f64::NEG_INFINITY)
                } else {
                    let k = e_hat - fb;
                    let t_cur = rows_cur.ln_tail[fb][k];
                    let t_prev = rows_prev.ln_tail[fb][k];
                    let gap = if t_cur <= -std::f64::consts::LN_2 {
                        ln_diff(t_cur, t_prev)
                    } else {
                        ln_diff(rows_prev.ln_cdf[fb][k - 1], rows_cur.ln_cdf[fb][k - 1])
                    };
                    (gap, rows_prev.ln_cdf[fb][k - 1])
                };
                let ln_phi = ln_threshold_union(e, e_hat, fb, h_second);
                num_plus.push(ln_pf[fb] + ln_gap);
                num_minus.push(ln_pf[fb] + ln_not_prev);
                phi_plus_terms.push(ln_pf[fb] + ln_gap + ln_phi);
                phi_minus_terms.push(ln_pf[fb] + ln_not_prev + ln_phi);
            }
            let den_plus = log_sum_exp(&num_plus);
            let den_minus = log_sum_exp(&num_minus);
            // A zero-probability conditioning event yields the conservative
            // fallback of one.
            let ln_phi_plus = if den_plus == f64::NEG_INFINITY {
                0.0
            } else {
                (log_sum_exp(&phi_plus_terms) - den_plus).min(0.0)
            };
            let ln_phi_minus = if den_minus == f64::NEG_INFINITY {
                0.0
            } else {
                (log_sum_exp(&phi_minus_terms) - den_minus).min(0.0)
            };
            let ln_phi_tilde = log1m_exp(
                log1m_exp(ln_phi_plus) + (c - 1) as f64 * log1m_exp(ln_phi_minus),
            );
            state.ln_terms = log_add_exp(state.ln_terms, ln_mass + ln_phi_tilde);
        }
        rows_prev = rows_cur;
    }

    states
        .iter()
        .zip(e_hats)
        .map(|(state, &e_hat)| {
            let ln_poisoned_one = log_binom_tail(e as u64, f, e_hat as u64)?;
            let ln_eps_p = log1m_exp(c as f64 * log1m_exp(ln_poisoned_one));
            Ok(log_add_exp(ln_eps_p, state.ln_terms).min(0.0))
        })
        .collect()
}

/// Sieve consistency bound for a single echo threshold, conditioned on
/// gossip totality holding.
pub fn sieve_consistency_bound(c: usize, f: f64, e: usize, e_hat: usize) -> Result<f64, BoundError> {
    Ok(sieve_consistency_profile(c, f, e, &[e_hat])?[0])
}

/// ln of Contagion's validity failure bound: either the echo layer loses the
/// sender's message, or the sender's own delivery sample is too Byzantine to
/// ever reach the delivery threshold.
pub fn contagion_validity_bound(
    d: usize,
    d_hat: usize,
    f: f64,
    ln_eps_pcb_v: f64,
) -> Result<f64, BoundError> {
    let ln_eps_o = ln_overwhelmed(d, d_hat, f)?;
    Ok(log_add_exp(ln_eps_pcb_v, log1m_exp(ln_eps_pcb_v) + ln_eps_o).min(0.0))
}

/// Distribution of how many processes end up ready for a message no correct
/// process echoes, when every Byzantine process pushes it: a one-round
/// contagion over all `n` processes seeded with the `n - c` Byzantine ones.
/// Returns the ln-pmf over total ready counts plus the truncated mass.
pub fn ready_spread_distribution(
    n: usize,
    c: usize,
    r: usize,
    r_hat: usize,
) -> Result<(Vec<f64>, f64), BoundError> {
    if c == n {
        let mut pmf = vec![f64::NEG_INFINITY; n + 1];
        pmf[0] = 0.0;
        return Ok((pmf, 0.0));
    }
    let gd = gamma_distribution(&GameParams {
        n,
        r,
        l: 1.0,
        k: 1,
        s: n - c,
        r_hat,
    })?;
    Ok((gd.rounds[0].clone(), gd.truncated_mass))
}

/// ln of the probability that any correct process can deliver the pushed
/// message, mixing the per-process delivery-threshold tail over the ready
/// spread. Truncated game mass is added as if it always compromised the
/// system.
pub fn contagion_mu(
    spread: &(Vec<f64>, f64),
    n: usize,
    c: usize,
    d: usize,
    d_hat: usize,
) -> Result<f64, BoundError> {
    let (ln_pmf, truncated) = spread;
    let mut terms = Vec::with_capacity(ln_pmf.len());
    for (count, &lp) in ln_pmf.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let ln_mu_one = log_binom_tail(d as u64, count as f64 / n as f64, d_hat as u64)?;
        terms.push(lp + log1m_exp(c as f64 * log1m_exp(ln_mu_one)));
    }
    let ln_mu = log_sum_exp(&terms);
    Ok(log_add_exp(ln_mu, truncated.ln()).min(0.0))
}

/// ln of Contagion's consistency failure bound.
pub fn contagion_consistency_bound(ln_eps_pcb_c: f64, ln_mu: f64) -> f64 {
    log_add_exp(ln_eps_pcb_c, log1m_exp(ln_eps_pcb_c) + ln_mu).min(0.0)
}

/// Summed per-round distributions of correct ready counts under the
/// round-by-round totality attack: one more correct process receives the
/// message each round, against the `c`-node game with link probability
/// `c / n`. Returns ln of the summed (unnormalized) masses over `0..=c`,
/// including the round-zero point mass at zero, plus the truncated mass.
pub fn blackjack_distribution(
    c: usize,
    n: usize,
    r: usize,
    r_hat: usize,
) -> Result<(Vec<f64>, f64), BoundError> {
    if c == 1 {
        return Ok((vec![0.0, 0.0], 0.0));
    }
    let (q, truncated) = occupation_measure(&GameParams {
        n: c,
        r,
        l: c as f64 / n as f64,
        k: c,
        s: 1,
        r_hat,
    })?;
    let ln_q = q
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    Ok((ln_q, truncated))
}

/// ln of the probability that, with `ready` correct processes ready for the
/// message, delivery splits the correct set: not everyone delivers (even
/// with every Byzantine process helping) yet someone does (even with no
/// Byzantine help).
fn ln_split_probability(
    n: usize,
    c: usize,
    d: usize,
    d_hat: usize,
    ready: usize,
) -> Result<f64, BoundError> {
    let ln_deliver_lo = log_binom_tail(d as u64, ready as f64 / n as f64, d_hat as u64)?;
    let ln_deliver_hi = log_binom_tail(
        d as u64,
        (ready + n - c) as f64 / n as f64,
        d_hat as u64,
    )?;
    let ln_all = c as f64 * ln_deliver_lo;
    let ln_none = c as f64 * log1m_exp(ln_deliver_hi);
    // 1 - all - none, differencing against whichever term is large.
    let ln_split = if ln_all > -std::f64::consts::LN_2 {
        ln_diff(log1m_exp(ln_all), ln_none)
    } else {
        ln_diff(log1m_exp(ln_none), ln_all)
    };
    Ok(ln_split)
}

/// ln of the probability that some round of the totality attack leaves the
/// system in a split-capable ready configuration, mixed over the blackjack
/// round distributions.
pub fn contagion_split_mass(
    n: usize,
    c: usize,
    d: usize,
    d_hat: usize,
    blackjack: &(Vec<f64>, f64),
) -> Result<f64, BoundError> {
    let (ln_q, truncated) = blackjack;
    let mut terms = Vec::with_capacity(ln_q.len() + 1);
    for (ready, &lq) in ln_q.iter().enumerate() {
        if lq == f64::NEG_INFINITY {
            continue;
        }
        terms.push(lq + ln_split_probability(n, c, d, d_hat, ready)?);
    }
    // Each unit of truncated mass is missing from at most c + 1 round terms.
    terms.push((truncated * (c + 1) as f64).ln());
    Ok(log_sum_exp(&terms))
}

/// ln of Contagion's totality failure bound: echo-layer consistency failing,
/// the pushed-message event, or some blackjack round leaving the system in a
/// split-capable ready configuration.
pub fn contagion_totality_bound(
    n: usize,
    c: usize,
    d: usize,
    d_hat: usize,
    blackjack: &(Vec<f64>, f64),
    ln_eps_pcb_c: f64,
    ln_mu: f64,
) -> Result<f64, BoundError> {
    let ln_eps_b = contagion_split_mass(n, c, d, d_hat, blackjack)?;
    Ok(log_sum_exp(&[ln_eps_pcb_c, ln_mu, ln_eps_b]).min(0.0))
}

/// Security bounds of the full stack for one system and parameter set.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub n: usize,
    pub c: usize,
    pub f: f64,
    pub params: ProtocolParams,
    pub ln_eps_pb_totality: f64,
    pub ln_eps_sieve_validity: f64,
    /// Sieve consistency conditioned on gossip totality holding.
    pub ln_eps_sieve_consistency: f64,
    pub ln_eps_validity: f64,
    pub ln_eps_consistency: f64,
    pub ln_eps_totality: f64,
    /// Union bound over validity, consistency and totality.
    pub ln_eps_combined: f64,
    /// Expected gossip diameter plus the echo and ready phases, in message
    /// delays; absent when the gossip graph is too sparse for the estimate.
    pub latency: Option<f64>,
}

fn json_log10(ln: f64) -> Value {
    let v = ln / std::f64::consts::LN_10;
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

impl BoundReport {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "c": self.c,
            "f": self.f,
            "params": self.params,
            "eps": {
                "eps_pb_totality": json_log10(self.ln_eps_pb_totality),
                "eps_sieve_validity": json_log10(self.ln_eps_sieve_validity),
                "eps_sieve_consistency": json_log10(self.ln_eps_sieve_consistency),
                "eps_contagion_validity": json_log10(self.ln_eps_validity),
                "eps_contagion_consistency": json_log10(self.ln_eps_consistency),
                "eps_contagion_totality": json_log10(self.ln_eps_totality),
                "eps_combined": json_log10(self.ln_eps_combined),
            },
            "latency": self.latency,
        })
    }
}

/// The expensive, partially parameter-dependent inputs of a [`BoundReport`].
/// The parameter search computes these once per relevant sub-tuple and
/// assembles candidate reports cheaply through [`finish_report`].
#[derive(Debug, Clone)]
pub struct LayerPieces {
    /// Gossip disconnection bound; depends on `g` only.
    pub ln_pb_t: f64,
    /// Echo-layer consistency; depends on `(e, e_hat)`.
    pub ln_sieve_c: f64,
    /// Pushed-message delivery bound; depends on `(r, r_hat, d, d_hat)`.
    pub ln_mu: f64,
    /// Totality split mass; depends on `(r, r_hat, d, d_hat)`.
    pub ln_eps_b: f64,
}

/// Assembles the full report from precomputed layer figures.
pub fn finish_report(
    config: &SystemConfig,
    params: &ProtocolParams,
    pieces: &LayerPieces,
) -> Result<BoundReport, BoundError> {
    let n = config.n();
    let c = config.num_correct();
    let f = config.realized_f();

    let ln_sieve_v = sieve_total_validity_bound(c, f, params.e, params.e_hat, pieces.ln_pb_t)?;
    // The echo-layer consistency figure handed to the ready layer also
    // covers gossip totality failing underneath it.
    let ln_pcb_c = log_add_exp(pieces.ln_sieve_c, pieces.ln_pb_t).min(0.0);

    let ln_v = contagion_validity_bound(params.d, params.d_hat, f, ln_sieve_v)?;
    let ln_c = contagion_consistency_bound(ln_pcb_c, pieces.ln_mu);
    let ln_t = log_sum_exp(&[ln_pcb_c, pieces.ln_mu, pieces.ln_eps_b]).min(0.0);

    let ln_combined = log_sum_exp(&[ln_v, ln_c, ln_t]).min(0.0);
    let latency = murmur_latency(c, f, params.g).ok().map(|hops| hops + 2.0);

    Ok(BoundReport {
        n,
        c,
        f,
        params: *params,
        ln_eps_pb_totality: pieces.ln_pb_t,
        ln_eps_sieve_validity: ln_sieve_v,
        ln_eps_sieve_consistency: pieces.ln_sieve_c,
        ln_eps_validity: ln_v,
        ln_eps_consistency: ln_c,
        ln_eps_totality: ln_t,
        ln_eps_combined: ln_combined,
        latency,
    })
}

/// Evaluates every bound of the composed stack.
pub fn combined_security(
    config: &SystemConfig,
    params: &ProtocolParams,
) -> Result<BoundReport, BoundError> {
    params.validate()?;
    let n = config.n();
    let c = config.num_correct();
    let f = config.realized_f();

    let ln_pb_t = murmur_totality_bound(c, n, params.g);
    let ln_sieve_c = sieve_consistency_bound(c, f, params.e, params.e_hat)?;
    let spread = ready_spread_distribution(n, c, params.r, params.r_hat)?;
    let ln_mu = contagion_mu(&spread, n, c, params.d, params.d_hat)?;
    let blackjack = blackjack_distribution(c, n, params.r, params.r_hat)?;
    let ln_eps_b = contagion_split_mass(n, c, params.d, params.d_hat, &blackjack)?;

    finish_report(
        config,
        params,
        &LayerPieces {
            ln_pb_t,
            ln_sieve_c,
            ln_mu,
            ln_eps_b,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn edge_probability_matches_two_draw_complement() {
        assert_relative_eq!(murmur_edge_probability(10, 5), 0.75);
        assert_relative_eq!(murmur_edge_probability(4, 4), 1.0);
    }

    #[test]
    fn totality_bound_matches_direct_sum_small() {
        let p = murmur_edge_probability(5, 2);
        let direct: f64 = (1..=2)
            .map(|k| {
                let choose = match k {
                    1 => 4.0,
                    2 => 6.0,
                    _ => unreachable!(),
                };
                choose * (1.0 - p).powi((k * (4 - k)) as i32)
            })
            .sum();
        assert_relative_eq!(
            murmur_totality_bound(4, 5, 2).exp(),
            direct.min(1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn totality_bound_decays_with_sample_size() {
        let loose = murmur_totality_bound(100, 110, 4);
        let tight = murmur_totality_bound(100, 110, 16);
        assert!(tight < loose);
        assert!(tight < -20.0);
    }

    #[test]
    fn latency_shrinks_with_denser_gossip() {
        let sparse = murmur_latency(1000, 0.1, 4).unwrap();
        let dense = murmur_latency(1000, 0.1, 30).unwrap();
        assert!(dense < sparse);
        // (2 - 2f) * g <= 1 leaves the divergence rate non-positive.
        assert!(murmur_latency(1000, 0.5, 1).is_err());
    }

    #[test]
    fn sieve_validity_matches_hand_formula() {
        let c = 10;
        let f = 0.2;
        let (e, e_hat) = (4, 3);
        // eps_o = P[Bin(4, .2) >= 2], then one minus the no-process union.
        let eps_o = {
            let q: f64 = 0.8;
            let p: f64 = 0.2;
            1.0 - q.powi(4) - 4.0 * p * q.powi(3)
        };
        let expect = 1.0 - (1.0 - eps_o).powi(c);
        let got = sieve_total_validity_bound(c as usize, f, e, e_hat, f64::NEG_INFINITY)
            .unwrap()
            .exp();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn sieve_validity_saturates_with_failing_gossip() {
        let got = sieve_total_validity_bound(10, 0.2, 4, 3, 0.0).unwrap();
        assert_relative_eq!(got.exp(), 1.0);
    }

    #[test]
    fn sieve_consistency_profile_matches_single_calls() {
        let profile = sieve_consistency_profile(30, 0.15, 8, &[5, 6, 7]).unwrap();
        for (i, &e_hat) in [5usize, 6, 7].iter().enumerate() {
            let single = sieve_consistency_bound(30, 0.15, 8, e_hat).unwrap();
            assert_relative_eq!(profile[i], single, max_relative = 1e-12);
        }
    }

    #[test]
    fn sieve_consistency_is_a_probability_and_nontrivial() {
        // The threshold must clear half the sample by a wide margin before
        // the two-delivery event becomes improbable under the union-bound
        // Chernoff form; 112 of 128 leaves room for only one echo quorum.
        let ln = sieve_consistency_bound(50, 0.1, 128, 112).unwrap();
        assert!(ln <= 0.0);
        assert!(ln < -4.0, "bound should be well below one, got ln = {ln}");
        // A threshold below half the sample admits two quorums outright.
        let loose = sieve_consistency_bound(50, 0.1, 128, 40).unwrap();
        assert!(loose > ln);
    }

    #[test]
    fn contagion_validity_matches_hand_formula() {
        let f = 0.25;
        // eps_o = P[Bin(2, .25) = 2] = 1/16 with d = 2, d_hat = 1.
        let got = contagion_validity_bound(2, 1, f, f64::NEG_INFINITY)
            .unwrap()
            .exp();
        assert_relative_eq!(got, 1.0 / 16.0, max_relative = 1e-12);
    }

    #[test]
    fn ready_spread_without_byzantine_is_empty() {
        let (pmf, trunc) = ready_spread_distribution(8, 8, 3, 2).unwrap();
        assert_eq!(pmf[0], 0.0);
        assert!(pmf[1..].iter().all(|&lp| lp == f64::NEG_INFINITY));
        assert_eq!(trunc, 0.0);
        let ln_mu = contagion_mu(&(pmf, trunc), 8, 8, 4, 2).unwrap();
        assert_eq!(ln_mu, f64::NEG_INFINITY);
    }

    #[test]
    fn zero_ready_threshold_forces_mu_to_one() {
        let spread = ready_spread_distribution(10, 8, 4, 0).unwrap();
        let ln_mu = contagion_mu(&spread, 10, 8, 4, 2).unwrap();
        assert_relative_eq!(ln_mu.exp(), 1.0);
    }

    #[test]
    fn single_correct_process_blackjack_is_exact() {
        // c = 1: one round, the lone process becomes ready deterministically.
        let (ln_q, trunc) = blackjack_distribution(1, 2, 2, 1).unwrap();
        assert_eq!(ln_q, vec![0.0, 0.0]);
        assert_eq!(trunc, 0.0);
        // alpha(0) = tail(2, 1/2, 1) - tail(2, 0, 1) = 3/4
        // alpha(1) = tail(2, 1, 1) - tail(2, 1/2, 1) = 1/4
        let ln_t = contagion_totality_bound(
            2,
            1,
            2,
            1,
            &(ln_q, trunc),
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        )
        .unwrap();
        assert_relative_eq!(ln_t.exp(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn split_probability_vanishes_at_the_extremes() {
        // Nobody ready, no Byzantine helpers: nobody can deliver.
        let none = ln_split_probability(10, 10, 4, 2, 0).unwrap();
        assert_eq!(none, f64::NEG_INFINITY);
        // Everyone ready with d_hat = 0 would be a guaranteed delivery; use a
        // saturated spread instead.
        let all = ln_split_probability(10, 10, 4, 1, 10).unwrap();
        assert!(all < -30.0);
    }

    #[test]
    fn combined_report_is_finite_and_ordered() {
        let config = SystemConfig::new(60, 0.1).unwrap();
        let params = ProtocolParams::new(8, 10, 7, 10, 4, 10, 7).unwrap();
        let report = combined_security(&config, &params).unwrap();
        assert!(report.ln_eps_combined <= 0.0);
        assert!(report.ln_eps_combined >= report.ln_eps_totality);
        assert!(report.ln_eps_combined >= report.ln_eps_consistency);
        assert!(report.ln_eps_combined >= report.ln_eps_validity);
        assert!(report.latency.is_some());
        let v = report.to_json();
        assert!(v["eps"]["eps_combined"].is_number() || v["eps"]["eps_combined"].is_null());
        assert_eq!(v["n"], 60);
    }
}
