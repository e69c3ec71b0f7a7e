//! Closed-form optimal failure probability for unambiguous filtering.
//!
//! With `S = Σⱼ η′ⱼ |⟨ψ₁|ψⱼ⟩|²` and `p = ⟨ψ₁∥|ψ₁∥⟩`, the failure probability of the
//! filtered state is confined to `p ≤ q₁ ≤ 1`. The unconstrained optimum
//! `q₁ = √(η_β S / η_α)` is feasible exactly when `η_l ≤ η₁ ≤ η_u` with
//! `η_l = S / (1 + S)` and `η_u = S / (S + p²)`; outside that window one of the two
//! projective measurements is optimal.

use serde::Serialize;

use crate::ensemble::{decompose, FilteringProblem};
use crate::{Error, Result};

/// Slack allowed on `qⱼ ≤ 1` before the solution is declared inconsistent.
const Q_BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Genuine three-outcome POVM.
    Povm,
    /// Von Neumann measurement along `|ψ₁⟩`; a click there means failure.
    AlphaProjection,
    /// Von Neumann measurement along `|ψ₁∥⟩`; a click there means failure.
    BetaProjection,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Povm => "povm",
            Regime::AlphaProjection => "alpha_projection",
            Regime::BetaProjection => "beta_projection",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three candidate failure probabilities, evaluated regardless of which one is feasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchValues {
    pub q_povm: f64,
    pub q_alpha_strategy: f64,
    pub q_beta_strategy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteringSolution {
    pub s_value: f64,
    pub parallel_norm_sq: f64,
    pub regime: Regime,
    /// Failure probability of `|ψ₁⟩`.
    pub q_alpha: f64,
    /// Prior-averaged failure probability of the β set.
    pub q_beta: f64,
    /// `qⱼ` for `j = 2..N`.
    pub q_individual: Vec<f64>,
    pub eta_lower: f64,
    pub eta_upper: f64,
    pub q_opt: f64,
    pub q_povm: f64,
    pub q_alpha_strategy: f64,
    pub q_beta_strategy: f64,
}

impl FilteringSolution {
    /// `[q₁, q₂, …, q_N]`
    pub fn q_all(&self) -> Vec<f64> {
        std::iter::once(self.q_alpha)
            .chain(self.q_individual.iter().copied())
            .collect()
    }

    pub fn branch_values(&self) -> BranchValues {
        BranchValues {
            q_povm: self.q_povm,
            q_alpha_strategy: self.q_alpha_strategy,
            q_beta_strategy: self.q_beta_strategy,
        }
    }
}

/// `S = Σⱼ η′ⱼ |⟨ψ₁|ψⱼ⟩|²`, the overlap of `|ψ₁⟩` with the β-set density matrix.
pub fn s_value(problem: &FilteringProblem) -> Result<f64> {
    let rel = problem.beta_priors_renormalized()?;
    Ok(rel
        .iter()
        .zip(&problem.overlaps()[1..])
        .map(|(w, o)| w * o.norm_sqr())
        .sum())
}

fn check_priors(problem: &FilteringProblem) -> Result<()> {
    let eta = problem.eta_alpha();
    if eta <= 0.0 || problem.eta_beta() <= 0.0 {
        return Err(Error::DegeneratePrior(eta));
    }
    Ok(())
}

/// Geometry shared by every closed-form quantity.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    eta_alpha: f64,
    eta_beta: f64,
    s: f64,
    p: f64,
}

impl Geometry {
    fn of(problem: &FilteringProblem) -> Result<Self> {
        check_priors(problem)?;
        let mut s = s_value(problem)?;
        let p = decompose(problem).parallel_norm_sq;
        // S ≤ ‖ψ₁∥‖², so a snapped-away parallel component leaves only rounding in S.
        if p == 0.0 && s <= crate::ensemble::PARALLEL_ZERO {
            s = 0.0;
        }
        if p == 0.0 && s > 0.0 {
            return Err(Error::Inconsistent(format!(
                "S = {s:e} > 0 with a vanishing parallel component"
            )));
        }
        Ok(Self {
            eta_alpha: problem.eta_alpha(),
            eta_beta: problem.eta_beta(),
            s,
            p,
        })
    }

    fn branches(&self) -> BranchValues {
        let Self {
            eta_alpha,
            eta_beta,
            s,
            p,
        } = *self;
        BranchValues {
            q_povm: 2.0 * (eta_alpha * eta_beta * s).sqrt(),
            q_alpha_strategy: eta_alpha + eta_beta * s,
            // p = 0 forces S = 0: the states are perfectly distinguishable.
            q_beta_strategy: if p == 0.0 {
                0.0
            } else {
                eta_alpha * p + eta_beta * s / p
            },
        }
    }

    /// Both sides of the POVM window; `(0, 1)` when every overlap vanishes.
    fn thresholds(&self) -> (f64, f64) {
        if self.s == 0.0 && self.p == 0.0 {
            return (0.0, 1.0);
        }
        (self.s / (1.0 + self.s), self.s / (self.s + self.p * self.p))
    }
}

pub fn branch_values(problem: &FilteringProblem) -> Result<BranchValues> {
    Ok(Geometry::of(problem)?.branches())
}

pub fn solve(problem: &FilteringProblem) -> Result<FilteringSolution> {
    let geo = Geometry::of(problem)?;
    let branches = geo.branches();
    let (eta_lower, eta_upper) = geo.thresholds();
    let eta1 = geo.eta_alpha;
    let orthogonal = geo.s == 0.0 && geo.p == 0.0;

    // Ties go to the projective strategy; all branch values coincide there.
    let regime = if orthogonal {
        Regime::Povm
    } else if eta1 <= eta_lower {
        Regime::AlphaProjection
    } else if eta1 >= eta_upper {
        Regime::BetaProjection
    } else {
        Regime::Povm
    };

    let q_alpha = match regime {
        _ if orthogonal => 0.0,
        Regime::AlphaProjection => 1.0,
        Regime::BetaProjection => geo.p,
        Regime::Povm => (geo.eta_beta * geo.s / eta1).sqrt().clamp(geo.p, 1.0),
    };
    let q_beta = if q_alpha > 0.0 { geo.s / q_alpha } else { 0.0 };
    let q_individual = problem.overlaps()[1..]
        .iter()
        .map(|o| {
            if q_alpha > 0.0 {
                o.norm_sqr() / q_alpha
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>();
    if let Some((j, q)) = q_individual
        .iter()
        .enumerate()
        .find(|(_, &q)| q > 1.0 + Q_BOUND_SLACK)
    {
        return Err(Error::Inconsistent(format!(
            "failure probability of state {} is {q} > 1",
            j + 2
        )));
    }

    let q_opt = match regime {
        Regime::Povm => branches.q_povm,
        Regime::AlphaProjection => branches.q_alpha_strategy,
        Regime::BetaProjection => branches.q_beta_strategy,
    };

    Ok(FilteringSolution {
        s_value: geo.s,
        parallel_norm_sq: geo.p,
        regime,
        q_alpha,
        q_beta,
        q_individual,
        eta_lower,
        eta_upper,
        q_opt,
        q_povm: branches.q_povm,
        q_alpha_strategy: branches.q_alpha_strategy,
        q_beta_strategy: branches.q_beta_strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::PureState;
    use crate::linalg::{CMatrix, CVector};
    use crate::verify::random::{haar_state, haar_unitary, random_problem};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_state(priors: [f64; 3]) -> FilteringProblem {
        FilteringProblem::new(
            vec![
                PureState::from_real(&[1.0, 0.0, 1.0]).unwrap(),
                PureState::basis(3, 0),
                PureState::basis(3, 1),
            ],
            priors.to_vec(),
        )
        .unwrap()
    }

    fn equal() -> FilteringProblem {
        three_state([1.0 / 3.0; 3])
    }

    // Frozen from direct evaluation; cross-checked against the golden-section
    // oracle in `verify` tests.
    const Q_POVM_THREE_STATE: f64 = 0.471_404_520_791_031_7;

    #[test]
    fn s_value_examples() {
        let orth = FilteringProblem::new(
            vec![PureState::basis(2, 0), PureState::basis(2, 1)],
            vec![0.3, 0.7],
        )
        .unwrap();
        assert_eq!(s_value(&orth).unwrap(), 0.0);

        let psi = PureState::from_real(&[0.6, 0.8]).unwrap();
        let same = FilteringProblem::new(vec![psi.clone(), psi], vec![0.5, 0.5]).unwrap();
        assert!((s_value(&same).unwrap() - 1.0).abs() < 1e-15);

        assert!((s_value(&equal()).unwrap() - 0.25).abs() < 1e-15);

        let all_alpha = three_state([1.0, 0.0, 0.0]);
        assert_eq!(s_value(&all_alpha), Err(Error::ZeroBetaPrior));
    }

    #[test]
    fn three_state_povm_regime() {
        let sol = solve(&equal()).unwrap();
        assert_eq!(sol.regime, Regime::Povm);
        assert!((sol.eta_lower - 0.2).abs() < 1e-15);
        assert!((sol.eta_upper - 0.5).abs() < 1e-15);
        assert!((sol.q_alpha - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((sol.q_beta - 0.125f64.sqrt()).abs() < 1e-15);
        assert!((sol.q_opt - Q_POVM_THREE_STATE).abs() < 1e-15);
        assert!((sol.q_opt - 2.0 * (1.0f64 / 18.0).sqrt()).abs() < 1e-15);
        assert!((sol.q_alpha * sol.q_beta - sol.s_value).abs() < 1e-15);
        assert!((sol.q_individual[0] - 0.5 / 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(sol.q_individual[1], 0.0);
    }

    #[test]
    fn three_state_projective_regimes() {
        let low = solve(&three_state([0.1, 0.45, 0.45])).unwrap();
        assert_eq!(low.regime, Regime::AlphaProjection);
        assert_eq!(low.q_alpha, 1.0);
        assert!((low.q_opt - 0.325).abs() < 1e-15);

        let high = solve(&three_state([0.7, 0.15, 0.15])).unwrap();
        assert_eq!(high.regime, Regime::BetaProjection);
        assert!((high.q_alpha - 0.5).abs() < 1e-15);
        assert!((high.q_opt - 0.5).abs() < 1e-15);
        assert!((high.q_individual[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn branch_values_examples() {
        let b = branch_values(&equal()).unwrap();
        assert!((b.q_povm - Q_POVM_THREE_STATE).abs() < 1e-15);
        assert!((b.q_alpha_strategy - 0.5).abs() < 1e-15);
        assert!((b.q_beta_strategy - 0.5).abs() < 1e-15);
        assert!(b.q_povm < b.q_alpha_strategy.min(b.q_beta_strategy));

        let psi = PureState::from_real(&[0.6, 0.8]).unwrap();
        let same = FilteringProblem::new(vec![psi.clone(), psi], vec![0.5, 0.5]).unwrap();
        let b = branch_values(&same).unwrap();
        for v in [b.q_povm, b.q_alpha_strategy, b.q_beta_strategy] {
            assert!((v - 1.0).abs() < 1e-12);
        }

        let orth = FilteringProblem::new(
            vec![PureState::basis(2, 0), PureState::basis(2, 1)],
            vec![0.3, 0.7],
        )
        .unwrap();
        let b = branch_values(&orth).unwrap();
        assert_eq!(
            (b.q_povm, b.q_alpha_strategy, b.q_beta_strategy),
            (0.0, 0.3, 0.0)
        );
    }

    #[test]
    fn orthogonal_filtering_is_perfect() {
        for eta in [0.01, 0.5, 0.99] {
            let p = FilteringProblem::new(
                vec![
                    PureState::basis(3, 2),
                    PureState::basis(3, 0),
                    PureState::basis(3, 1),
                ],
                vec![eta, (1.0 - eta) / 2.0, (1.0 - eta) / 2.0],
            )
            .unwrap();
            let sol = solve(&p).unwrap();
            assert_eq!(sol.q_opt, 0.0);
            assert_eq!(sol.regime, Regime::Povm);
            assert!(sol.q_individual.iter().all(|&q| q == 0.0));
        }
    }

    #[test]
    fn degenerate_priors_are_rejected() {
        assert!(matches!(
            solve(&three_state([0.0, 0.5, 0.5])),
            Err(Error::DegeneratePrior(_))
        ));
        assert!(matches!(
            solve(&three_state([1.0, 0.0, 0.0])),
            Err(Error::DegeneratePrior(_))
        ));
    }

    #[test]
    fn zero_prior_overlap_still_constrains_q1() {
        // ψ₂ has no prior but overlaps ψ₁, so S = 0 while ψ₁∥ ≠ 0.
        let p = FilteringProblem::new(
            vec![
                PureState::from_real(&[1.0, 1.0, 0.0]).unwrap(),
                PureState::basis(3, 0),
                PureState::basis(3, 2),
            ],
            vec![0.5, 0.0, 0.5],
        )
        .unwrap();
        let sol = solve(&p).unwrap();
        assert_eq!(sol.s_value, 0.0);
        assert!((sol.parallel_norm_sq - 0.5).abs() < 1e-14);
        assert_eq!(sol.regime, Regime::BetaProjection);
        assert!((sol.q_opt - 0.25).abs() < 1e-14);
        assert!((sol.q_individual[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parallel_state_closes_the_window() {
        let p = FilteringProblem::new(
            vec![
                PureState::from_real(&[1.0, 2.0, 0.0]).unwrap(),
                PureState::basis(3, 0),
                PureState::basis(3, 1),
            ],
            vec![0.4, 0.3, 0.3],
        )
        .unwrap();
        let sol = solve(&p).unwrap();
        assert!((sol.eta_lower - sol.eta_upper).abs() < 1e-12);
        assert_ne!(sol.regime, Regime::Povm);
        assert!((sol.q_alpha_strategy - sol.q_beta_strategy).abs() < 1e-12);
    }

    fn random(seed: u64) -> FilteringProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_problem(&mut rng, 2..=5, 2..=6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unitarity_relations_hold(seed in any::<u64>()) {
            let p = random(seed);
            let sol = solve(&p).unwrap();
            for (q, o) in sol.q_individual.iter().zip(&p.overlaps()[1..]) {
                prop_assert!((sol.q_alpha * q - o.norm_sqr()).abs() < 1e-10);
                prop_assert!(*q <= 1.0 + 1e-10);
            }
            prop_assert!(0.0 <= sol.eta_lower && sol.eta_lower <= sol.eta_upper && sol.eta_upper <= 1.0);
            let best = if sol.regime == Regime::Povm {
                sol.q_povm.min(sol.q_alpha_strategy).min(sol.q_beta_strategy)
            } else {
                sol.q_alpha_strategy.min(sol.q_beta_strategy)
            };
            prop_assert!((sol.q_opt - best).abs() < 1e-12);
            if sol.regime == Regime::Povm {
                prop_assert!((sol.q_alpha * sol.q_beta - sol.s_value).abs() < 1e-10);
            }
        }

        #[test]
        fn branches_meet_at_thresholds(seed in any::<u64>()) {
            let p = random(seed);
            let sol = solve(&p).unwrap();
            let at_lower = branch_values(&p.with_eta_alpha(sol.eta_lower).unwrap()).unwrap();
            prop_assert!((at_lower.q_povm - at_lower.q_alpha_strategy).abs() < 1e-12);
            if sol.eta_upper < 1.0 {
                let at_upper = branch_values(&p.with_eta_alpha(sol.eta_upper).unwrap()).unwrap();
                prop_assert!((at_upper.q_povm - at_upper.q_beta_strategy).abs() < 1e-12);
            }
        }

        #[test]
        fn povm_beats_projections_inside_window(seed in any::<u64>(), t in 0.01f64..0.99) {
            let p = random(seed);
            let sol = solve(&p).unwrap();
            let eta = sol.eta_lower + t * (sol.eta_upper - sol.eta_lower);
            prop_assume!(sol.eta_upper - sol.eta_lower > 1e-3);
            let b = branch_values(&p.with_eta_alpha(eta).unwrap()).unwrap();
            prop_assert!(b.q_povm < b.q_alpha_strategy.min(b.q_beta_strategy));
        }

        #[test]
        fn invariant_under_beta_permutation(seed in any::<u64>()) {
            let p = random(seed);
            let q = solve(&p).unwrap().q_opt;
            let mut states = p.states().to_vec();
            let mut priors = p.priors().to_vec();
            states[1..].reverse();
            priors[1..].reverse();
            let permuted = FilteringProblem::new(states, priors).unwrap();
            prop_assert!((solve(&permuted).unwrap().q_opt - q).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_common_unitary(seed in any::<u64>()) {
            let p = random(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let u: CMatrix = haar_unitary(&mut rng, p.dim());
            let rotated = p.states().iter()
                .map(|s| PureState::normalized(&u * s.amplitudes()).unwrap())
                .collect();
            let r = FilteringProblem::new(rotated, p.priors().to_vec()).unwrap();
            prop_assert!((solve(&r).unwrap().q_opt - solve(&p).unwrap().q_opt).abs() < 1e-10);
        }

        #[test]
        fn parallel_psi1_gives_single_threshold(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let beta: Vec<PureState> = (0..3).map(|_| haar_state(&mut rng, 3)).collect();
            let mix: CVector = beta[0].amplitudes().scale(0.3) + beta[1].amplitudes().scale(0.7);
            let mut states = vec![PureState::normalized(mix).unwrap()];
            states.extend(beta.into_iter().take(2));
            let p = FilteringProblem::new(states, vec![0.3, 0.3, 0.4]).unwrap();
            let sol = solve(&p).unwrap();
            prop_assert!((sol.parallel_norm_sq - 1.0).abs() < 1e-12);
            prop_assert!((sol.eta_lower - sol.eta_upper).abs() < 1e-12);
        }
    }
}
