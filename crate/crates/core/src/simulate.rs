//! Seeded Monte Carlo sampling of the filtering measurement.
//!
//! Every trial draws an input `i` with probability `ηᵢ`, then an outcome `k` with
//! probability `⟨ψᵢ|Πₖ|ψᵢ⟩`, both by inverse CDF on a uniform `[0, 1)` variate.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. Trials are split into `chunks` contiguous
//! blocks; block `c` receives `trials / chunks` trials plus one if
//! `c < trials % chunks`, and draws from stream `c` of the seeded generator
//! (`set_stream(c)`). Blocks are counted independently and their counts summed,
//! so results depend on `(seed, trials, chunks)` only, not on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::FilteringProblem;
use crate::povm::Povm;
use crate::{Error, Result};

/// Outcome distributions whose total leaves `[1 − tol, 1 + tol]` abort the run.
pub const SUM_TOLERANCE: f64 = 1e-8;
/// Negative probabilities down to `−NEGATIVE_CLIP` are treated as rounding noise.
pub const NEGATIVE_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub seed: u64,
    pub chunks: u64,
    /// `counts[i][k]`: input `i`, outcome `k` ordered as [`crate::povm::OUTCOMES`].
    pub counts: Vec<[u64; 3]>,
    pub empirical_q: f64,
    pub empirical_error_rate: f64,
    pub expected_q: f64,
    /// Binomial standard error of `empirical_q` around `expected_q`.
    pub standard_error: f64,
    /// Conclusive outcomes that named the wrong set.
    pub conclusive_errors: u64,
}

/// Cumulative outcome distributions per input.
fn outcome_tables(problem: &FilteringProblem, povm: &Povm) -> Result<Vec<[f64; 3]>> {
    problem
        .states()
        .iter()
        .enumerate()
        .map(|(input, state)| {
            let raw = povm.probabilities(state.amplitudes());
            if raw.iter().any(|&p| p < -NEGATIVE_CLIP || !p.is_finite()) {
                return Err(Error::CorruptPovm {
                    input,
                    sum: raw.iter().sum(),
                });
            }
            let clipped = raw.map(|p| p.max(0.0));
            let sum: f64 = clipped.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::CorruptPovm { input, sum });
            }
            let mut acc = 0.0;
            Ok(clipped.map(|p| {
                acc += p / sum;
                acc
            }))
        })
        .collect()
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect()
}

/// First index whose cumulative weight exceeds `u`; the last index absorbs rounding.
fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn run_chunk(
    priors_cdf: &[f64],
    outcome_cdf: &[[f64; 3]],
    trials: u64,
    seed: u64,
    stream: u64,
) -> Vec<[u64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut counts = vec![[0u64; 3]; priors_cdf.len()];
    for _ in 0..trials {
        let input = pick(priors_cdf, rng.random::<f64>());
        let outcome = pick(&outcome_cdf[input], rng.random::<f64>());
        counts[input][outcome] += 1;
    }
    counts
}

pub fn run_simulation(
    problem: &FilteringProblem,
    povm: &Povm,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    run_simulation_chunked(problem, povm, trials, seed, 1)
}

pub fn run_simulation_chunked(
    problem: &FilteringProblem,
    povm: &Povm,
    trials: u64,
    seed: u64,
    chunks: u64,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if chunks == 0 {
        return Err(Error::InvalidArgument("chunks must be at least 1".into()));
    }
    let outcome_cdf = outcome_tables(problem, povm)?;
    let priors_cdf = cumulative(problem.priors());

    let base = trials / chunks;
    let extra = trials % chunks;
    let partial: Vec<Vec<[u64; 3]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = base + u64::from(c < extra);
            run_chunk(&priors_cdf, &outcome_cdf, n, seed, c)
        })
        .collect();
    let mut counts = vec![[0u64; 3]; problem.len()];
    for chunk in &partial {
        for (total, part) in counts.iter_mut().zip(chunk) {
            for k in 0..3 {
                total[k] += part[k];
            }
        }
    }

    let failures: u64 = counts.iter().map(|c| c[2]).sum();
    let conclusive_errors = counts[0][1] + counts[1..].iter().map(|c| c[0]).sum::<u64>();
    let expected_q: f64 = problem
        .states()
        .iter()
        .zip(problem.priors())
        .map(|(s, eta)| eta * povm.probabilities(s.amplitudes())[2])
        .sum();
    let n = trials as f64;
    Ok(SimulationReport {
        trials,
        seed,
        chunks,
        counts,
        empirical_q: failures as f64 / n,
        empirical_error_rate: conclusive_errors as f64 / n,
        expected_q,
        standard_error: (expected_q * (1.0 - expected_q) / n).max(0.0).sqrt(),
        conclusive_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::solve;
    use crate::ensemble::PureState;
    use crate::povm::build_povm;

    fn three_state() -> (FilteringProblem, Povm) {
        let p = FilteringProblem::new(
            vec![
                PureState::from_real(&[1.0, 0.0, 1.0]).unwrap(),
                PureState::basis(3, 0),
                PureState::basis(3, 1),
            ],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        let povm = build_povm(&p, &solve(&p).unwrap()).unwrap();
        (p, povm)
    }

    #[test]
    fn orthogonal_never_fails() {
        let p = FilteringProblem::new(
            vec![PureState::basis(2, 0), PureState::basis(2, 1)],
            vec![0.4, 0.6],
        )
        .unwrap();
        let povm = build_povm(&p, &solve(&p).unwrap()).unwrap();
        let r = run_simulation(&p, &povm, 10_000, 1).unwrap();
        assert_eq!(r.empirical_q, 0.0);
        assert_eq!(r.conclusive_errors, 0);
    }

    #[test]
    fn zero_trials_rejected() {
        let (p, povm) = three_state();
        assert!(run_simulation(&p, &povm, 0, 1).is_err());
        assert!(run_simulation_chunked(&p, &povm, 10, 1, 0).is_err());
    }

    #[test]
    fn counts_add_up_and_repeat() {
        let (p, povm) = three_state();
        let a = run_simulation_chunked(&p, &povm, 12_345, 7, 4).unwrap();
        let b = run_simulation_chunked(&p, &povm, 12_345, 7, 4).unwrap();
        assert_eq!(a, b);
        let total: u64 = a.counts.iter().flatten().sum();
        assert_eq!(total, 12_345);
        let c = run_simulation_chunked(&p, &povm, 12_345, 8, 4).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn matches_analytic_failure_rate() {
        let (p, povm) = three_state();
        let r = run_simulation_chunked(&p, &povm, 1_000_000, 2024, 8).unwrap();
        let q = 2.0 * (1.0f64 / 18.0).sqrt();
        assert!((r.expected_q - q).abs() < 1e-12);
        assert!((r.empirical_q - q).abs() < 5.0 * r.standard_error, "{r:?}");
        assert_eq!(r.conclusive_errors, 0);
        assert_eq!(r.empirical_error_rate, 0.0);
    }

    #[test]
    fn corrupt_povm_aborts() {
        let (p, mut povm) = three_state();
        povm.pi0 += crate::linalg::identity(3).scale(0.01);
        assert!(matches!(
            run_simulation(&p, &povm, 10, 1),
            Err(Error::CorruptPovm { .. })
        ));
    }

    #[test]
    fn inverse_cdf_skips_empty_bins() {
        let cdf = [0.0, 0.0, 1.0];
        assert_eq!(pick(&cdf, 0.0), 2);
        assert_eq!(pick(&[0.25, 0.25, 1.0], 0.25), 2);
        assert_eq!(
            pick(&[0.3, 0.7, 0.9999999999999999], 0.99999999999999995),
            2
        );
    }
}
