//! Threshold contagion on random multigraphs.
//!
//! The contagion layer's security reduces to a round-based infection game: a
//! player repeatedly infects `s` healthy nodes of a random multigraph, and
//! after each infection an epidemic spreads — a healthy node becomes infected
//! once at least `r_hat` of its predecessor slots (counted with multiplicity)
//! point at infected nodes. The distribution of the final infection count is
//! what the consistency and totality bounds consume.
//!
//! This module holds the playable game: random graphs, the epidemic fixed
//! point, and seeded Monte Carlo plays under pluggable infection policies.
//! The final count distribution does not depend on the policy — the exact
//! Markov chain exploiting that lives in [`markov`].

mod markov;

pub use markov::{
    gamma_distribution, markov_contagion_transition, occupation_measure, round_start_transition,
    GammaDistribution,
};

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::sampling::{derive_seed, substream, StreamDomain};

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("link probability {0} outside [0, 1]")]
    LinkProbability(f64),
    #[error("seed count s = {s} must satisfy 1 <= s < n = {n}")]
    SeedCount { s: usize, n: usize },
    #[error("threshold r_hat = {r_hat} exceeds slot count r = {r}")]
    Threshold { r_hat: usize, r: usize },
    #[error("game needs at least one round")]
    NoRounds,
    #[error("policy must pick exactly {expected} healthy nodes, got {got}")]
    PolicyCount { expected: usize, got: usize },
    #[error("policy picked node {0}, which is not healthy")]
    PolicyInfected(usize),
    #[error("predecessor {pred} out of range for {n} nodes")]
    PredecessorRange { pred: usize, n: usize },
    #[error("round failed to converge")]
    NonConvergence,
    #[error("occupation measure requires s = 1 and k = n")]
    OccupationShape,
    #[error("chain state ({n_bar}, {u_bar}) is out of range")]
    BadState { n_bar: usize, u_bar: usize },
    #[error("pmf has {got} cells, expected {want}")]
    PmfLength { got: usize, want: usize },
}

/// Parameters of a threshold-contagion game.
///
/// `n` nodes each own `r` predecessor slots; a slot is live with probability
/// `l` and then points at a uniform node (self-loops and repeats allowed).
/// The player plays `k` rounds, infecting `s` distinct healthy nodes per
/// round (skipping the round's infection if fewer than `s` are healthy), and
/// the epidemic threshold is `r_hat` infected predecessor slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub n: usize,
    pub r: usize,
    pub l: f64,
    pub k: usize,
    pub s: usize,
    pub r_hat: usize,
}

impl GameParams {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.n == 0 {
            return Err(GameError::EmptyGraph);
        }
        if !(0.0..=1.0).contains(&self.l) {
            return Err(GameError::LinkProbability(self.l));
        }
        if self.s == 0 || self.s >= self.n {
            return Err(GameError::SeedCount {
                s: self.s,
                n: self.n,
            });
        }
        if self.r_hat > self.r {
            return Err(GameError::Threshold {
                r_hat: self.r_hat,
                r: self.r,
            });
        }
        if self.k == 0 {
            return Err(GameError::NoRounds);
        }
        Ok(())
    }
}

/// A directed multigraph given by per-node predecessor slots. `None` is a
/// dead slot (its link did not materialize).
#[derive(Debug, Clone, PartialEq)]
pub struct Multigraph {
    n: usize,
    predecessors: Vec<Vec<Option<usize>>>,
}

impl Multigraph {
    pub fn from_predecessors(predecessors: Vec<Vec<Option<usize>>>) -> Result<Self, GameError> {
        let n = predecessors.len();
        if n == 0 {
            return Err(GameError::EmptyGraph);
        }
        for slots in &predecessors {
            for &slot in slots {
                if let Some(pred) = slot {
                    if pred >= n {
                        return Err(GameError::PredecessorRange { pred, n });
                    }
                }
            }
        }
        Ok(Self { n, predecessors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn predecessors(&self, node: usize) -> &[Option<usize>] {
        &self.predecessors[node]
    }
}

/// Draws a multigraph on `n` nodes with `r` slots each: every slot is live
/// with probability `l` and then uniform over all nodes.
pub fn random_multigraph(
    n: usize,
    r: usize,
    l: f64,
    rng: &mut impl Rng,
) -> Result<Multigraph, GameError> {
    if n == 0 {
        return Err(GameError::EmptyGraph);
    }
    if !(0.0..=1.0).contains(&l) {
        return Err(GameError::LinkProbability(l));
    }
    let predecessors = (0..n)
        .map(|_| {
            (0..r)
                .map(|_| {
                    if rng.random_bool(l) {
                        Some(rng.random_range(0..n))
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    Ok(Multigraph { n, predecessors })
}

/// One synchronous contagion step: returns the healthy nodes that now have at
/// least `r_hat` infected predecessor slots (with multiplicity).
pub fn epidemic_step(
    graph: &Multigraph,
    infected: &BTreeSet<usize>,
    r_hat: usize,
) -> BTreeSet<usize> {
    (0..graph.n)
        .filter(|node| !infected.contains(node))
        .filter(|&node| {
            let hits = graph.predecessors[node]
                .iter()
                .flatten()
                .filter(|pred| infected.contains(pred))
                .count();
            hits >= r_hat
        })
        .collect()
}

/// Runs the contagion to its fixed point and returns all infected nodes.
pub fn epidemic_run(
    graph: &Multigraph,
    initially_infected: &BTreeSet<usize>,
    r_hat: usize,
) -> BTreeSet<usize> {
    let mut infected = initially_infected.clone();
    loop {
        let fresh = epidemic_step(graph, &infected, r_hat);
        if fresh.is_empty() {
            return infected;
        }
        infected.extend(fresh);
    }
}

/// What a policy gets to see: the infection history, never the topology.
#[derive(Debug)]
pub struct PolicyView<'a> {
    pub round: usize,
    pub n: usize,
    pub s: usize,
    pub infected: &'a BTreeSet<usize>,
}

/// Plays one game on a freshly drawn graph. Returns the infected count after
/// each round: index 0 is the initial state (always 0), index `i` the count
/// at the end of round `i`.
pub fn play_threshold_contagion(
    params: &GameParams,
    mut policy: impl FnMut(&PolicyView<'_>) -> Vec<usize>,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, GameError> {
    params.validate()?;
    let graph = random_multigraph(params.n, params.r, params.l, rng)?;
    let mut infected: BTreeSet<usize> = BTreeSet::new();
    let mut counts = vec![0usize];
    for round in 1..=params.k {
        if params.n - infected.len() >= params.s {
            let view = PolicyView {
                round,
                n: params.n,
                s: params.s,
                infected: &infected,
            };
            let picks = policy(&view);
            if picks.len() != params.s {
                return Err(GameError::PolicyCount {
                    expected: params.s,
                    got: picks.len(),
                });
            }
            let mut fresh = BTreeSet::new();
            for pick in picks {
                if pick >= params.n || infected.contains(&pick) || !fresh.insert(pick) {
                    return Err(GameError::PolicyInfected(pick));
                }
            }
            infected.extend(fresh);
            infected = epidemic_run(&graph, &infected, params.r_hat);
        }
        counts.push(infected.len());
    }
    Ok(counts)
}

/// Infects the lowest-id healthy nodes each round.
pub fn lowest_id_policy(view: &PolicyView<'_>) -> Vec<usize> {
    (0..view.n)
        .filter(|node| !view.infected.contains(node))
        .take(view.s)
        .collect()
}

/// Infects the highest-id healthy nodes each round.
pub fn highest_id_policy(view: &PolicyView<'_>) -> Vec<usize> {
    (0..view.n)
        .rev()
        .filter(|node| !view.infected.contains(node))
        .take(view.s)
        .collect()
}

/// Empirical per-round distributions of the infected count over `trials`
/// seeded plays: `result[round][count]` for rounds `1..=k`.
pub fn gamma_monte_carlo<P>(
    params: &GameParams,
    trials: usize,
    master_seed: u64,
    policy: P,
) -> Result<Vec<Vec<f64>>, GameError>
where
    P: Fn(&PolicyView<'_>) -> Vec<usize> + Sync,
{
    params.validate()?;
    let runs = exec::map_indexed(trials, |trial| {
        let mut rng = substream(derive_seed(master_seed, trial as u64), StreamDomain::Game, 0);
        play_threshold_contagion(params, &policy, &mut rng)
    });
    let mut pmfs = vec![vec![0.0; params.n + 1]; params.k];
    for run in runs {
        let counts = run?;
        for round in 1..=params.k {
            pmfs[round - 1][counts[round]] += 1.0;
        }
    }
    for pmf in &mut pmfs {
        for p in pmf.iter_mut() {
            *p /= trials as f64;
        }
    }
    Ok(pmfs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{substream, StreamDomain};

    fn rng(seed: u64) -> impl Rng {
        substream(seed, StreamDomain::Game, 7)
    }

    #[test]
    fn degenerate_link_probabilities() {
        let g = random_multigraph(4, 2, 0.0, &mut rng(1)).unwrap();
        assert!((0..4).all(|v| g.predecessors(v).iter().all(Option::is_none)));

        let g = random_multigraph(1, 3, 1.0, &mut rng(2)).unwrap();
        assert_eq!(g.predecessors(0), &[Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn zero_threshold_infects_everyone_immediately() {
        let g = random_multigraph(5, 2, 0.5, &mut rng(3)).unwrap();
        let everyone: BTreeSet<_> = (0..5).collect();
        assert_eq!(epidemic_run(&g, &BTreeSet::new(), 0), everyone);
    }

    #[test]
    fn three_cycle_cascades_from_one_seed() {
        let g = Multigraph::from_predecessors(vec![
            vec![Some(2)],
            vec![Some(0)],
            vec![Some(1)],
        ])
        .unwrap();
        let seeds = [0].into_iter().collect();
        let everyone: BTreeSet<_> = (0..3).collect();
        assert_eq!(epidemic_run(&g, &seeds, 1), everyone);
    }

    #[test]
    fn step_is_synchronous() {
        // 0 -> 1 -> 2 chain: one step from {0} infects only 1.
        let g = Multigraph::from_predecessors(vec![vec![None], vec![Some(0)], vec![Some(1)]])
            .unwrap();
        let seeds: BTreeSet<_> = [0].into_iter().collect();
        let fresh = epidemic_step(&g, &seeds, 1);
        assert_eq!(fresh, [1].into_iter().collect());
    }

    #[test]
    fn dead_graph_accumulates_seeds_only() {
        // l = 0 and k * s divides evenly into n: final count is k * s.
        let params = GameParams {
            n: 6,
            r: 2,
            l: 0.0,
            k: 3,
            s: 2,
            r_hat: 1,
        };
        let counts =
            play_threshold_contagion(&params, lowest_id_policy, &mut rng(4)).unwrap();
        assert_eq!(counts, vec![0, 2, 4, 6]);
    }

    #[test]
    fn infection_skipped_when_too_few_healthy() {
        let params = GameParams {
            n: 5,
            r: 1,
            l: 0.0,
            k: 4,
            s: 2,
            r_hat: 1,
        };
        let counts =
            play_threshold_contagion(&params, lowest_id_policy, &mut rng(5)).unwrap();
        // Rounds 1 and 2 infect two each; rounds 3 and 4 skip (one healthy left).
        assert_eq!(counts, vec![0, 2, 4, 4, 4]);
    }

    #[test]
    fn bad_policies_error() {
        let params = GameParams {
            n: 4,
            r: 1,
            l: 0.5,
            k: 1,
            s: 2,
            r_hat: 1,
        };
        let dup = |_: &PolicyView<'_>| vec![1, 1];
        assert_eq!(
            play_threshold_contagion(&params, dup, &mut rng(6)),
            Err(GameError::PolicyInfected(1))
        );
        let short = |_: &PolicyView<'_>| vec![1];
        assert_eq!(
            play_threshold_contagion(&params, short, &mut rng(7)),
            Err(GameError::PolicyCount {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn params_validation() {
        let bad = GameParams {
            n: 4,
            r: 2,
            l: 0.5,
            k: 1,
            s: 4,
            r_hat: 1,
        };
        assert_eq!(bad.validate(), Err(GameError::SeedCount { s: 4, n: 4 }));
        let bad = GameParams {
            n: 4,
            r: 2,
            l: 1.5,
            k: 1,
            s: 1,
            r_hat: 1,
        };
        assert_eq!(bad.validate(), Err(GameError::LinkProbability(1.5)));
        let bad = GameParams {
            n: 4,
            r: 2,
            l: 0.5,
            k: 1,
            s: 1,
            r_hat: 3,
        };
        assert_eq!(bad.validate(), Err(GameError::Threshold { r_hat: 3, r: 2 }));
    }
}
