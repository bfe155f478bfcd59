//! The threshold-contagion chain against brute force.
//!
//! At desk scale the game can be solved by enumerating every possible
//! multigraph, playing the rounds on each one, and weighting the outcomes by
//! the graph's probability. That enumeration never touches the Markov chain,
//! so agreement here checks the whole transition derivation at once.

use std::collections::BTreeSet;

use pbcast::epidemics::{
    epidemic_run, gamma_distribution, occupation_measure, GameError, GameParams, Multigraph,
};

/// Plays `k` rounds on a fixed graph with the lowest-id policy and returns
/// the infected count at the end of each round.
fn play_on_graph(graph: &Multigraph, k: usize, s: usize, r_hat: usize) -> Vec<usize> {
    let n = graph.n();
    let mut infected: BTreeSet<usize> = BTreeSet::new();
    let mut counts = Vec::with_capacity(k);
    for _ in 0..k {
        if n - infected.len() >= s {
            let picks: Vec<usize> = (0..n).filter(|v| !infected.contains(v)).take(s).collect();
            infected.extend(picks);
            infected = epidemic_run(graph, &infected, r_hat);
        }
        counts.push(infected.len());
    }
    counts
}

/// Final-count pmfs per round, by enumerating all (n + 1)^(n * r) graphs.
/// Each slot is dead with probability 1 - l or points at one of n nodes with
/// probability l / n each, so a graph's weight depends only on its dead-slot
/// count. Outcomes are grouped by that count and weighted per l afterwards.
fn enumerate_gamma(params: &GameParams) -> Vec<Vec<f64>> {
    let GameParams { n, r, l, k, s, r_hat } = *params;
    let slots = n * r;
    let choices = n + 1; // 0 = dead, 1..=n = target + 1
    // multiplicity[dead][round][count]
    let mut multiplicity = vec![vec![vec![0u64; n + 1]; k]; slots + 1];
    let mut code = vec![0usize; slots];
    loop {
        let predecessors: Vec<Vec<Option<usize>>> = (0..n)
            .map(|v| {
                (0..r)
                    .map(|slot| match code[v * r + slot] {
                        0 => None,
                        target => Some(target - 1),
                    })
                    .collect()
            })
            .collect();
        let dead = code.iter().filter(|&&c| c == 0).count();
        let graph = Multigraph::from_predecessors(predecessors).unwrap();
        let counts = play_on_graph(&graph, k, s, r_hat);
        for (round, &count) in counts.iter().enumerate() {
            multiplicity[dead][round][count] += 1;
        }
        // Next code in base (n + 1); done after wrapping the last digit.
        let mut digit = 0;
        loop {
            if digit == slots {
                let per_dead: Vec<f64> = (0..=slots)
                    .map(|d| (1.0 - l).powi(d as i32) * (l / n as f64).powi((slots - d) as i32))
                    .collect();
                let mut pmfs = vec![vec![0.0; n + 1]; k];
                for (dead, rounds) in multiplicity.iter().enumerate() {
                    for (round, cells) in rounds.iter().enumerate() {
                        for (count, &m) in cells.iter().enumerate() {
                            pmfs[round][count] += m as f64 * per_dead[dead];
                        }
                    }
                }
                return pmfs;
            }
            code[digit] += 1;
            if code[digit] < choices {
                break;
            }
            code[digit] = 0;
            digit += 1;
        }
    }
}

fn total_variation(ln_pmf: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(ln_pmf.len(), reference.len());
    0.5 * ln_pmf
        .iter()
        .zip(reference)
        .map(|(&ln, &q)| (ln.exp() - q).abs())
        .sum::<f64>()
}

#[test]
fn chain_matches_exhaustive_enumeration_at_desk_scale() {
    let mut cases = 0;
    for n in 2..=4usize {
        for r in 0..=2usize {
            for k in 1..=2usize {
                for s in 1..n {
                    for r_hat in 0..=r {
                        for &l in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                            let params = GameParams { n, r, l, k, s, r_hat };
                            params.validate().unwrap();
                            let exact = gamma_distribution(&params).unwrap();
                            let brute = enumerate_gamma(&params);
                            for round in 1..=k {
                                let tv =
                                    total_variation(exact.round_ln_pmf(round), &brute[round - 1]);
                                assert!(
                                    tv <= 1e-9,
                                    "n={n} r={r} l={l} k={k} s={s} r_hat={r_hat} \
                                     round={round}: TV = {tv:e}"
                                );
                            }
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    assert_eq!(cases, 360);
}

#[test]
fn degenerate_graphs_are_handled_exactly() {
    // A dead graph accumulates exactly s seeds per round.
    let params = GameParams { n: 4, r: 2, l: 0.0, k: 2, s: 1, r_hat: 1 };
    let exact = gamma_distribution(&params).unwrap();
    assert_eq!(exact.round_ln_pmf(1)[1], 0.0);
    assert_eq!(exact.round_ln_pmf(2)[2], 0.0);

    // Zero threshold saturates in round one regardless of the graph.
    let params = GameParams { n: 4, r: 2, l: 0.37, k: 1, s: 1, r_hat: 0 };
    let exact = gamma_distribution(&params).unwrap();
    assert_eq!(exact.round_ln_pmf(1)[4], 0.0);
}

#[test]
fn occupation_measure_matches_the_round_by_round_sum() {
    // The single-seed game with one round per node visits each count below n
    // at most once, so summing the per-round pmfs and sweeping the occupation
    // measure must produce the same numbers.
    for (n, r, l, r_hat) in [
        (40usize, 8usize, 0.9, 2usize),
        (25, 4, 0.5, 1),
        (30, 6, 1.0, 3),
        (12, 3, 0.0, 1),
        (18, 5, 0.7, 0),
    ] {
        let params = GameParams { n, r, l, k: n, s: 1, r_hat };
        let gd = gamma_distribution(&params).unwrap();
        let mut sum = vec![0.0f64; n + 1];
        sum[0] = 1.0;
        for round in &gd.rounds {
            for (count, &lp) in round.iter().enumerate() {
                if lp.is_finite() {
                    sum[count] += lp.exp();
                }
            }
        }
        let (q, truncated) = occupation_measure(&params).unwrap();
        assert!(truncated < 1e-30);
        for count in 0..=n {
            assert!(
                (q[count] - sum[count]).abs() <= 1e-9 * sum[count].max(1.0),
                "n={n} r={r} l={l} r_hat={r_hat} count={count}: {} vs {}",
                q[count],
                sum[count],
            );
        }
    }
}

#[test]
fn occupation_measure_rejects_other_game_shapes() {
    let multi_seed = GameParams { n: 5, r: 2, l: 0.5, k: 5, s: 2, r_hat: 1 };
    assert_eq!(occupation_measure(&multi_seed), Err(GameError::OccupationShape));
    let short = GameParams { n: 5, r: 2, l: 0.5, k: 3, s: 1, r_hat: 1 };
    assert_eq!(occupation_measure(&short), Err(GameError::OccupationShape));
}
