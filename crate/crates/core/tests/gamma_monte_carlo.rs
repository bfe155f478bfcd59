//! Monte Carlo cross-checks of the threshold-contagion chain at sizes where
//! exhaustive enumeration is out of reach, plus the strategy-independence
//! property the chain's state space relies on.

use pbcast::epidemics::{
    gamma_distribution, gamma_monte_carlo, highest_id_policy, lowest_id_policy,
    markov_contagion_transition, GameParams,
};
use pbcast::sampling::{derive_seed, substream, StreamDomain};
use rand::Rng;

fn total_variation(ln_pmf: &[f64], empirical: &[f64]) -> f64 {
    assert_eq!(ln_pmf.len(), empirical.len());
    0.5 * ln_pmf
        .iter()
        .zip(empirical)
        .map(|(&ln, &q)| (ln.exp() - q).abs())
        .sum::<f64>()
}

#[test]
fn chain_matches_simulation_at_thirty_nodes() {
    let params = GameParams { n: 30, r: 4, l: 0.8, k: 3, s: 2, r_hat: 2 };
    let exact = gamma_distribution(&params).unwrap();
    let empirical = gamma_monte_carlo(&params, 100_000, 0xA11CE, lowest_id_policy).unwrap();
    for round in 1..=params.k {
        let tv = total_variation(exact.round_ln_pmf(round), &empirical[round - 1]);
        assert!(tv <= 0.02, "round {round}: TV = {tv}");
    }
}

#[test]
fn final_counts_do_not_depend_on_the_policy() {
    let params = GameParams { n: 30, r: 4, l: 0.8, k: 3, s: 2, r_hat: 2 };
    let low = gamma_monte_carlo(&params, 100_000, 0xB0B, lowest_id_policy).unwrap();
    let high = gamma_monte_carlo(&params, 100_000, 0xCA7, highest_id_policy).unwrap();
    for round in 1..=params.k {
        let tv = 0.5
            * low[round - 1]
                .iter()
                .zip(&high[round - 1])
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        assert!(tv <= 0.02, "round {round}: TV = {tv}");
    }
}

/// One conditioned trial of the within-round step from state `(n_bar, u_bar)`:
/// every healthy node redraws its slots until fewer than `r_hat` of them hit
/// the stale part of the infection, then catches the infection if stale and
/// fresh hits together reach `r_hat`. Returns the fresh-infection count.
fn conditioned_step_trial(
    params: &GameParams,
    n_bar: usize,
    u_bar: usize,
    rng: &mut impl Rng,
) -> usize {
    let stale = n_bar - u_bar;
    // Nodes 0..stale are stale infected, stale..n_bar fresh infected.
    let mut fresh_infections = 0;
    for _ in n_bar..params.n {
        let (mut stale_hits, mut fresh_hits);
        loop {
            stale_hits = 0;
            fresh_hits = 0;
            for _ in 0..params.r {
                if !rng.random_bool(params.l) {
                    continue;
                }
                let target = rng.random_range(0..params.n);
                if target < stale {
                    stale_hits += 1;
                } else if target < n_bar {
                    fresh_hits += 1;
                }
            }
            if stale_hits < params.r_hat {
                break;
            }
        }
        if stale_hits + fresh_hits >= params.r_hat {
            fresh_infections += 1;
        }
    }
    fresh_infections
}

fn transition_against_simulation(
    params: &GameParams,
    n_bar: usize,
    u_bar: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
) {
    let row = markov_contagion_transition(n_bar, u_bar, params).unwrap();
    let mut empirical = vec![0.0; params.n - n_bar + 1];
    let mut rng = substream(derive_seed(seed, 0), StreamDomain::Game, 1);
    for _ in 0..trials {
        empirical[conditioned_step_trial(params, n_bar, u_bar, &mut rng)] += 1.0;
    }
    for cell in &mut empirical {
        *cell /= trials as f64;
    }
    let tv = 0.5
        * (0..=params.n - n_bar)
            .map(|j| {
                let state = (n_bar + j, if j == 0 { 0 } else { j });
                let exact = row
                    .iter()
                    .find(|(s, _)| *s == state)
                    .map(|&(_, ln)| ln.exp())
                    .unwrap_or(0.0);
                (exact - empirical[j]).abs()
            })
            .sum::<f64>();
    assert!(tv <= tolerance, "state ({n_bar}, {u_bar}): TV = {tv}");
}

#[test]
fn transition_row_matches_conditioned_simulation() {
    let params = GameParams { n: 6, r: 2, l: 1.0, k: 1, s: 2, r_hat: 1 };
    transition_against_simulation(&params, 2, 2, 1_000_000, 0xF00D, 0.01);
}

#[test]
fn transition_row_matches_conditioned_simulation_with_stale_mass() {
    // A state where the Bayes correction for stale predecessors matters.
    let params = GameParams { n: 8, r: 3, l: 0.7, k: 1, s: 2, r_hat: 2 };
    transition_against_simulation(&params, 4, 2, 300_000, 0x5EED, 0.02);
}
