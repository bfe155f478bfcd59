//! Exact distribution of the threshold-contagion game.
//!
//! The final infection count has the same law under every infection policy:
//! conditioned on the pair (infected count, frontier count), the number of
//! nodes the frontier infects next is a binomial whose parameters depend on
//! nothing else. That makes the within-round dynamics a Markov chain on
//! states `(n_bar, u_bar)` — `n_bar` nodes infected, `u_bar` of them newly so
//! — absorbing at `u_bar = 0`.
//!
//! For a healthy node, each of its `r` predecessor slots pointed at one of
//! the `n_bar - u_bar` previously infected nodes with probability
//! `l * (n_bar - u_bar) / n`; the node being healthy means fewer than `r_hat`
//! of them did. Conditioned on that count, every remaining slot points at a
//! frontier node with probability `l * u_bar / n / (1 - l * (n_bar - u_bar) / n)`,
//! and the node joins the next frontier when the combined count reaches
//! `r_hat`. Slot counts against nested target sets merge (the stale count and
//! the conditional fresh count add up to a plain `Bin(r, l * n_bar / n)`), so
//! the infection probability reduces to a ratio of two binomial cdfs:
//! `1 - pi = P[Bin(r, l * n_bar / n) < r_hat] / P[Bin(r, l * (n_bar - u_bar) / n) < r_hat]`.
//! Healthy nodes decide independently, so the next frontier size is
//! `Bin(n - n_bar, pi)`.
//!
//! Within a round every non-absorbing transition strictly increases `n_bar`,
//! so a single forward pass in `n_bar` order yields the exact absorption
//! distribution. Mass is carried in linear `f64` with an absolute floor of
//! 1e-45 — ten orders below the smallest probabilities the bounds resolve —
//! and everything dropped is tracked in [`GammaDistribution::truncated_mass`]
//! so consumers can account for it pessimistically. The transition
//! ingredients themselves are computed in log space and stay exact down to
//! 1e-300. Two layers keep the `k = n` game used by the totality bound cheap:
//! absorption rows are memoized per round-entry state, and the cdf ratio is
//! served from a table indexed by infected count, since both factors only
//! depend on the state through `l * t / n` for an integer `t`.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{GameError, GameParams};
use crate::numerics::{ln_choose, log1m_exp, log_binom_cdf};

/// Mass below this is dropped and accounted in `truncated_mass`.
const MASS_FLOOR: f64 = 1e-45;

/// Per-round distributions of the infected count, in natural-log space.
#[derive(Debug, Clone)]
pub struct GammaDistribution {
    pub params: GameParams,
    /// `rounds[i][c]` = ln P[count = c at the end of round i+1].
    pub rounds: Vec<Vec<f64>>,
    /// Total probability mass dropped by the 1e-45 floor, summed over all
    /// rounds. Bounds consuming the distribution add this on top.
    pub truncated_mass: f64,
}

impl GammaDistribution {
    /// ln-pmf at the end of `round` (1-based).
    pub fn round_ln_pmf(&self, round: usize) -> &[f64] {
        &self.rounds[round - 1]
    }

    /// JSON export; log-probabilities of empty cells (`-inf`) become `null`.
    pub fn to_json(&self) -> Value {
        let rounds: Vec<Value> = self
            .rounds
            .iter()
            .map(|pmf| {
                Value::Array(
                    pmf.iter()
                        .map(|&lp| if lp.is_finite() { json!(lp) } else { Value::Null })
                        .collect(),
                )
            })
            .collect();
        json!({
            "params": self.params,
            "rounds": rounds,
            "truncated_mass": self.truncated_mass,
        })
    }
}

/// ln P[Bin(r, l * t / n) < r_hat]: the chance a node stays healthy when `t`
/// nodes are infected. Requires `1 <= r_hat <= r`.
fn ln_stay_healthy(p: &GameParams, t: usize) -> f64 {
    let slot = (p.l * t as f64 / p.n as f64).clamp(0.0, 1.0);
    log_binom_cdf(p.r as u64, slot, (p.r_hat - 1) as u64).expect("domain checked")
}

/// `(ln pi, ln (1 - pi))` from the two stay-healthy cdfs. `prev` is finite
/// whenever a healthy node can exist at all.
fn pi_from_cdfs(merged: f64, prev: f64) -> (f64, f64) {
    let ln_1m_pi = (merged - prev).min(0.0);
    (log1m_exp(ln_1m_pi), ln_1m_pi)
}

/// Infection probability for one healthy node given the state, as
/// `(ln pi, ln (1 - pi))`.
fn infection_probability(n_bar: usize, u_bar: usize, p: &GameParams) -> (f64, f64) {
    if p.r_hat == 0 {
        return (0.0, f64::NEG_INFINITY);
    }
    if p.r_hat > p.r {
        return (f64::NEG_INFINITY, 0.0);
    }
    pi_from_cdfs(ln_stay_healthy(p, n_bar), ln_stay_healthy(p, n_bar - u_bar))
}

/// Stay-healthy cdf per infected count; empty in the degenerate games where
/// the threshold decides by itself.
fn stay_healthy_table(p: &GameParams) -> Vec<f64> {
    if p.r_hat == 0 || p.r_hat > p.r {
        return Vec::new();
    }
    (0..=p.n).map(|t| ln_stay_healthy(p, t)).collect()
}

/// Table-backed [`infection_probability`]; bitwise identical values.
fn infection_probability_cached(
    n_bar: usize,
    u_bar: usize,
    p: &GameParams,
    table: &[f64],
) -> (f64, f64) {
    if p.r_hat == 0 {
        return (0.0, f64::NEG_INFINITY);
    }
    if p.r_hat > p.r {
        return (f64::NEG_INFINITY, 0.0);
    }
    pi_from_cdfs(table[n_bar], table[n_bar - u_bar])
}

/// ln P[Bin(m, pi) = j] from the log-space pair, safe at the endpoints.
fn ln_frontier_term(m: usize, j: usize, ln_pi: f64, ln_1m_pi: f64) -> f64 {
    let mut ln = ln_choose(m as u64, j as u64);
    if j > 0 {
        ln += j as f64 * ln_pi;
    }
    if j < m {
        ln += (m - j) as f64 * ln_1m_pi;
    }
    ln
}

/// One exact contagion step from `(n_bar, u_bar)`: the pmf over successor
/// states, as `((n', u'), ln p)` pairs in ascending order. `u_bar = 0` is
/// absorbing.
pub fn markov_contagion_transition(
    n_bar: usize,
    u_bar: usize,
    params: &GameParams,
) -> Result<Vec<((usize, usize), f64)>, GameError> {
    params.validate()?;
    if n_bar > params.n || u_bar > n_bar {
        return Err(GameError::BadState { n_bar, u_bar });
    }
    if u_bar == 0 {
        return Ok(vec![((n_bar, 0), 0.0)]);
    }
    let (ln_pi, ln_1m_pi) = infection_probability(n_bar, u_bar, params);
    let m = params.n - n_bar;
    let row = (0..=m)
        .map(|j| {
            let ln = ln_frontier_term(m, j, ln_pi, ln_1m_pi);
            ((n_bar + j, if j == 0 { 0 } else { j }), ln)
        })
        .filter(|&(_, ln)| ln > f64::NEG_INFINITY)
        .collect();
    Ok(row)
}

/// The player's move at the start of a round: mass at an absorbed count
/// `c <= n - s` moves to `(c + s, s)`; counts with fewer than `s` healthy
/// nodes left skip the infection and stay absorbed.
pub fn round_start_transition(
    ln_pmf: &[f64],
    params: &GameParams,
) -> Result<Vec<((usize, usize), f64)>, GameError> {
    params.validate()?;
    if ln_pmf.len() != params.n + 1 {
        return Err(GameError::PmfLength {
            got: ln_pmf.len(),
            want: params.n + 1,
        });
    }
    Ok(ln_pmf
        .iter()
        .enumerate()
        .filter(|(_, lp)| lp.is_finite())
        .map(|(c, &lp)| {
            if c <= params.n - params.s {
                ((c + params.s, params.s), lp)
            } else {
                ((c, 0), lp)
            }
        })
        .collect())
}

struct CascadeRow {
    /// `(count, mass)` pairs of the absorption distribution.
    absorbed: Vec<(usize, f64)>,
    truncated: f64,
}

/// Exact absorption distribution of the within-round chain started at
/// `(n0, u0)`, by forward propagation in `n_bar` order.
fn cascade_from(
    n0: usize,
    u0: usize,
    p: &GameParams,
    table: &[f64],
) -> Result<CascadeRow, GameError> {
    let n = p.n;
    let mut absorbed = vec![0.0f64; n + 1];
    let mut truncated = 0.0f64;
    let mut live: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    live.insert((n0, u0), 1.0);
    // Each state is processed at most once; the bound is defensive.
    let mut pops = 0usize;
    let pop_limit = (n + 2) * (n + 2);
    while let Some(((n_bar, u_bar), mass)) = live.pop_first() {
        pops += 1;
        if pops > pop_limit {
            return Err(GameError::NonConvergence);
        }
        if mass < MASS_FLOOR {
            truncated += mass;
            continue;
        }
        let (ln_pi, ln_1m_pi) = infection_probability_cached(n_bar, u_bar, p, table);
        let m = n - n_bar;
        if m == 0 {
            absorbed[n_bar] += mass;
            continue;
        }
        if ln_pi == f64::NEG_INFINITY {
            absorbed[n_bar] += mass;
            continue;
        }
        // Walk the frontier pmf outward from its mode, stepping by the
        // term-to-term ratio; terms only shrink in both directions, and once
        // one falls under the floor the rest are bounded by it.
        let pi = ln_pi.exp();
        let anchor = (((m as f64 + 1.0) * pi).floor() as usize).min(m);
        let anchor_w = mass * ln_frontier_term(m, anchor, ln_pi, ln_1m_pi).exp();
        let down_ratio = (ln_1m_pi - ln_pi).exp();
        let mut w = anchor_w;
        let mut j = anchor;
        loop {
            if w < MASS_FLOOR {
                truncated += w * (j + 1) as f64;
                break;
            }
            if j == 0 {
                absorbed[n_bar] += w;
                break;
            }
            *live.entry((n_bar + j, j)).or_default() += w;
            w *= j as f64 / (m - j + 1) as f64 * down_ratio;
            j -= 1;
        }
        let up_ratio = (ln_pi - ln_1m_pi).exp();
        let mut w = anchor_w;
        for j in (anchor + 1)..=m {
            w *= (m - j + 1) as f64 / j as f64 * up_ratio;
            if w < MASS_FLOOR {
                truncated += w * (m - j + 1) as f64;
                break;
            }
            *live.entry((n_bar + j, j)).or_default() += w;
        }
    }
    let absorbed = absorbed
        .into_iter()
        .enumerate()
        .filter(|&(_, p)| p > 0.0)
        .collect();
    Ok(CascadeRow {
        absorbed,
        truncated,
    })
}

/// Exact per-round distribution of the game's infected count.
pub fn gamma_distribution(params: &GameParams) -> Result<GammaDistribution, GameError> {
    params.validate()?;
    let n = params.n;
    let table = stay_healthy_table(params);
    let mut memo: Vec<Option<CascadeRow>> = (0..=n).map(|_| None).collect();
    let mut absorbed = vec![0.0f64; n + 1];
    absorbed[0] = 1.0;
    let mut truncated = 0.0f64;
    let mut rounds = Vec::with_capacity(params.k);
    for _ in 0..params.k {
        let mut next = vec![0.0f64; n + 1];
        for (c, &mass) in absorbed.iter().enumerate() {
            if mass <= 0.0 {
                continue;
            }
            if c > n - params.s {
                next[c] += mass;
                continue;
            }
            if memo[c].is_none() {
                memo[c] = Some(cascade_from(c + params.s, params.s, params, &table)?);
            }
            let row = memo[c].as_ref().unwrap();
            for &(t, p) in &row.absorbed {
                next[t] += mass * p;
            }
            truncated += mass * row.truncated;
        }
        absorbed = next;
        rounds.push(
            absorbed
                .iter()
                .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                .collect(),
        );
    }
    Ok(GammaDistribution {
        params: *params,
        rounds,
        truncated_mass: truncated,
    })
}

/// Summed per-round occupation of each count for the `s = 1`, `k = n` game,
/// in linear space, plus the truncated mass.
///
/// With one seed per round the count strictly increases until it parks at
/// `n`, so it ends a round at each count below `n` at most once and
/// `sum_rounds P[count = c]` is just the probability of ever passing through
/// `c`; the count `n` collects one unit per remaining round, `k + 1 - t` for
/// a hit at round `t`. Both reduce to a single lexicographic sweep over the
/// chain's states where each state is expanded once — arrival mass at a
/// count re-enters as the next round's seed the moment it is known, since
/// `(c + 1, 1)` sorts after every `(c, u)`. This computes exactly the
/// per-round sum of [`gamma_distribution`], without replaying the cascade
/// from every count once per round.
pub fn occupation_measure(params: &GameParams) -> Result<(Vec<f64>, f64), GameError> {
    params.validate()?;
    if params.s != 1 || params.k != params.n {
        return Err(GameError::OccupationShape);
    }
    let n = params.n;
    let table = stay_healthy_table(params);
    let mut q = vec![0.0f64; n + 1];
    q[0] = 1.0;
    let mut hit_n = 0.0f64; // mass that reached n, and ...
    let mut hit_n_t = 0.0f64; // ... its accumulated hit rounds
    let mut truncated = 0.0f64;
    // State mass paired with its accumulated round index.
    let mut live: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    live.insert((1, 1), (1.0, 1.0));
    let mut arrive = |count: usize,
                      mass: f64,
                      tmass: f64,
                      q: &mut Vec<f64>,
                      live: &mut BTreeMap<(usize, usize), (f64, f64)>| {
        if count == n {
            hit_n += mass;
            hit_n_t += tmass;
            return;
        }
        q[count] += mass;
        let next = live.entry((count + 1, 1)).or_default();
        next.0 += mass;
        next.1 += tmass + mass;
    };
    let mut pops = 0usize;
    let pop_limit = (n + 2) * (n + 2);
    while let Some(((n_bar, u_bar), (mass, tmass))) = live.pop_first() {
        pops += 1;
        if pops > pop_limit {
            return Err(GameError::NonConvergence);
        }
        if mass < MASS_FLOOR {
            truncated += mass;
            continue;
        }
        let (ln_pi, ln_1m_pi) = infection_probability_cached(n_bar, u_bar, params, &table);
        let m = n - n_bar;
        if m == 0 || ln_pi == f64::NEG_INFINITY {
            arrive(n_bar, mass, tmass, &mut q, &mut live);
            continue;
        }
        let tratio = tmass / mass;
        let pi = ln_pi.exp();
        let anchor = (((m as f64 + 1.0) * pi).floor() as usize).min(m);
        let anchor_w = mass * ln_frontier_term(m, anchor, ln_pi, ln_1m_pi).exp();
        let down_ratio = (ln_1m_pi - ln_pi).exp();
        let mut w = anchor_w;
        let mut j = anchor;
        loop {
            if w < MASS_FLOOR {
                truncated += w * (j + 1) as f64;
                break;
            }
            if j == 0 {
                arrive(n_bar, w, w * tratio, &mut q, &mut live);
                break;
            }
            let e = live.entry((n_bar + j, j)).or_default();
            e.0 += w;
            e.1 += w * tratio;
            w *= j as f64 / (m - j + 1) as f64 * down_ratio;
            j -= 1;
        }
        let up_ratio = (ln_pi - ln_1m_pi).exp();
        let mut w = anchor_w;
        for j in (anchor + 1)..=m {
            w *= (m - j + 1) as f64 / j as f64 * up_ratio;
            if w < MASS_FLOOR {
                truncated += w * (m - j + 1) as f64;
                break;
            }
            let e = live.entry((n_bar + j, j)).or_default();
            e.0 += w;
            e.1 += w * tratio;
        }
    }
    q[n] = (params.k + 1) as f64 * hit_n - hit_n_t;
    Ok((q, truncated))
}
