//! Detection operators of the optimal filtering measurement.
//!
//! All three operators act nontrivially only on `H₁ = span{|ψ₁⟩, |ψ₁∥⟩}`:
//!
//! ```text
//! Π₁ = c₁ |e₁⟩⟨e₁|            e₁ ∈ H₁, e₁ ⊥ ψ₁∥
//! Π₂ = c₂ |e₂⟩⟨e₂| + (I − P₁)  e₂ ∈ H₁, e₂ ⊥ ψ₁
//! Π₀ = I − Π₁ − Π₂
//! ```

use serde::Serialize;

use crate::analytic::FilteringSolution;
use crate::ensemble::{decompose, FilteringProblem, PureState};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::Result;

pub const PSD_TOLERANCE: f64 = 1e-10;
pub const COMPLETENESS_TOLERANCE: f64 = 1e-12;
pub const UNAMBIGUITY_TOLERANCE: f64 = 1e-10;
pub const PROBABILITY_TOLERANCE: f64 = 1e-10;

/// Below this `⟨ψ₁∥|ψ₁∥⟩`, `|ψ₁⟩` is treated as orthogonal to the β span.
const PARALLEL_NEGLIGIBLE: f64 = 1e-24;
/// Below this `1 − ⟨ψ₁∥|ψ₁∥⟩`, `|ψ₁⟩` is treated as lying inside the β span.
const PERPENDICULAR_NEGLIGIBLE: f64 = 1e-12;

/// Outcome labels, in the order used by [`Povm::elements`].
pub const OUTCOMES: [&str; 3] = ["alpha", "beta", "failure"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `H₁` is two-dimensional.
    General,
    /// `|ψ₁⟩ ⊥ H_β`: `H₁` collapses to `span{|ψ₁⟩}`.
    Orthogonal,
    /// `|ψ₁⟩ ∈ H_β`: the two von Neumann decompositions coincide.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct Povm {
    pub pi1: CMatrix,
    pub pi2: CMatrix,
    pub pi0: CMatrix,
    pub c1: f64,
    pub c2: f64,
    pub e1: Option<CVector>,
    pub e2: Option<CVector>,
    pub construction: Construction,
}

impl Povm {
    /// `[Π₁, Π₂, Π₀]`
    pub fn elements(&self) -> [&CMatrix; 3] {
        [&self.pi1, &self.pi2, &self.pi0]
    }

    pub fn dim(&self) -> usize {
        self.pi0.nrows()
    }

    /// Born probabilities `⟨φ|Πₖ|φ⟩` in outcome order.
    pub fn probabilities(&self, state: &CVector) -> [f64; 3] {
        self.elements().map(|pi| linalg::expectation(pi, state))
    }
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).unscale(2.0)
}

fn unit(v: CVector) -> CVector {
    let n = v.norm();
    linalg::fix_phase(&v.unscale(n))
}

pub fn build_povm(problem: &FilteringProblem, solution: &FilteringSolution) -> Result<Povm> {
    let dec = decompose(problem);
    let d = problem.dim();
    let id = linalg::identity(d);
    let psi1 = problem.states()[0].amplitudes();
    let p = dec.parallel_norm_sq;
    let q_alpha = solution.q_alpha;

    if p <= PARALLEL_NEGLIGIBLE {
        let c1 = ((1.0 - q_alpha) / (1.0 - p)).clamp(0.0, 1.0);
        let pi1 = dec.p_alpha.scale(c1);
        let pi2 = hermitize(&id - &dec.p_alpha);
        let pi0 = hermitize(&id - &pi1 - &pi2);
        return Ok(Povm {
            pi1,
            pi2,
            pi0,
            c1,
            c2: 1.0,
            e1: Some(linalg::fix_phase(psi1)),
            e2: None,
            construction: Construction::Orthogonal,
        });
    }

    if 1.0 - p <= PERPENDICULAR_NEGLIGIBLE {
        let pi0 = dec.p_alpha.clone();
        let pi2 = hermitize(&id - &pi0);
        return Ok(Povm {
            pi1: CMatrix::zeros(d, d),
            pi2,
            pi0,
            c1: 0.0,
            c2: 1.0,
            e1: None,
            e2: None,
            construction: Construction::Degenerate,
        });
    }

    let parallel = &dec.psi1_parallel;
    let e1 = unit(psi1 - parallel);
    let e2 = unit(parallel - psi1 * C64::new(p, 0.0));
    let c1 = ((1.0 - q_alpha) / (1.0 - p)).clamp(0.0, 1.0);
    // (‖ψ₁∥‖²/S)·q_β with q_α q_β = S, written without dividing by S.
    let c2 = ((1.0 - p / q_alpha) / (1.0 - p)).clamp(0.0, 1.0);

    let p1 = linalg::outer(&e1, &e1) + linalg::projector(parallel);
    let pi1 = hermitize(linalg::outer(&e1, &e1).scale(c1));
    let pi2 = hermitize(linalg::outer(&e2, &e2).scale(c2) + (&id - p1));
    let pi0 = hermitize(&id - &pi1 - &pi2);
    Ok(Povm {
        pi1,
        pi2,
        pi0,
        c1,
        c2,
        e1: Some(e1),
        e2: Some(e2),
        construction: Construction::General,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PovmReport {
    pub completeness_residual: f64,
    pub hermiticity_residual: f64,
    /// Smallest eigenvalue of `Π₁`, `Π₂`, `Π₀`.
    pub min_eigenvalues: [f64; 3],
    /// `maxⱼ ‖Π₁ψⱼ‖` over the β set.
    pub alpha_leakage: f64,
    /// `‖Π₂ψ₁‖`
    pub beta_leakage: f64,
    /// `⟨ψᵢ|Πₖ|ψᵢ⟩` per input, outcomes ordered as [`OUTCOMES`].
    pub outcome_probabilities: Vec<[f64; 3]>,
    pub q_alpha_residual: f64,
    pub q_beta_residual: f64,
    pub q_individual_residual: f64,
    pub violations: Vec<String>,
    pub passed: bool,
}

pub fn validate_povm(
    povm: &Povm,
    problem: &FilteringProblem,
    solution: &FilteringSolution,
) -> PovmReport {
    let d = problem.dim();
    let mut violations = Vec::new();
    let mut require = |ok: bool, what: String| {
        if !ok {
            violations.push(what);
        }
    };

    let completeness_residual =
        linalg::max_abs(&(&povm.pi0 + &povm.pi1 + &povm.pi2 - linalg::identity(d)));
    require(
        completeness_residual <= COMPLETENESS_TOLERANCE,
        format!("completeness residual {completeness_residual:e}"),
    );

    let hermiticity_residual = povm
        .elements()
        .iter()
        .map(|m| linalg::hermiticity_residual(m))
        .fold(0.0, f64::max);
    require(
        hermiticity_residual <= COMPLETENESS_TOLERANCE,
        format!("hermiticity residual {hermiticity_residual:e}"),
    );

    let min_eigenvalues = povm.elements().map(linalg::min_eigenvalue);
    for (name, &ev) in OUTCOMES.iter().zip(&min_eigenvalues) {
        require(
            ev >= -PSD_TOLERANCE,
            format!("{name} operator has eigenvalue {ev:e}"),
        );
    }

    let states: Vec<&CVector> = problem.states().iter().map(PureState::amplitudes).collect();
    let alpha_leakage = states[1..]
        .iter()
        .map(|s| (&povm.pi1 * *s).norm())
        .fold(0.0, f64::max);
    let beta_leakage = (&povm.pi2 * states[0]).norm();
    require(
        alpha_leakage <= UNAMBIGUITY_TOLERANCE,
        format!("alpha outcome leaks onto beta states ({alpha_leakage:e})"),
    );
    require(
        beta_leakage <= UNAMBIGUITY_TOLERANCE,
        format!("beta outcome leaks onto psi1 ({beta_leakage:e})"),
    );

    let outcome_probabilities: Vec<[f64; 3]> =
        states.iter().map(|s| povm.probabilities(s)).collect();
    let q_alpha_residual = (outcome_probabilities[0][2] - solution.q_alpha).abs();
    require(
        q_alpha_residual <= PROBABILITY_TOLERANCE,
        format!("failure probability of psi1 off by {q_alpha_residual:e}"),
    );
    let q_individual_residual = outcome_probabilities[1..]
        .iter()
        .zip(&solution.q_individual)
        .map(|(probs, q)| (probs[2] - q).abs())
        .fold(0.0, f64::max);
    require(
        q_individual_residual <= PROBABILITY_TOLERANCE,
        format!("beta failure probabilities off by {q_individual_residual:e}"),
    );
    let eta_beta = problem.eta_beta();
    let q_beta_measured: f64 = outcome_probabilities[1..]
        .iter()
        .zip(&problem.priors()[1..])
        .map(|(probs, eta)| eta / eta_beta * probs[2])
        .sum();
    let q_beta_residual = (q_beta_measured - solution.q_beta).abs();
    require(
        q_beta_residual <= PROBABILITY_TOLERANCE,
        format!("averaged beta failure probability off by {q_beta_residual:e}"),
    );

    let passed = violations.is_empty();
    PovmReport {
        completeness_residual,
        hermiticity_residual,
        min_eigenvalues,
        alpha_leakage,
        beta_leakage,
        outcome_probabilities,
        q_alpha_residual,
        q_beta_residual,
        q_individual_residual,
        violations,
        passed,
    }
}
