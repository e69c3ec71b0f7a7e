//! Independent checks of the closed-form solution.
//!
//! The oracle here recomputes overlaps and the parallel component on its own
//! (through the β-set Gram matrix rather than an SVD basis) and minimizes the
//! one-parameter failure objective by golden-section search.

pub mod random;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{s_value, solve, FilteringSolution, Regime};
use crate::ensemble::FilteringProblem;
use crate::linalg::{self, CMatrix, C64};
use crate::neumark::{build_dilation, failure_phases, output_gram, verify_dilation};
use crate::povm::{build_povm, validate_povm};
use crate::Result;

/// Lower bracket used when `|ψ₁⟩` has no component in the β span.
const LOWER_BRACKET_FLOOR: f64 = 1e-15;
const GOLDEN_TOLERANCE: f64 = 1e-12;
pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const BOUND_TOLERANCE: f64 = 1e-10;
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    pub q1_star: f64,
    pub q_star: f64,
}

/// Minimizes `η₁q₁ + Σⱼ ηⱼ|⟨ψ₁|ψⱼ⟩|²/q₁` over `q₁ ∈ [max(‖ψ₁∥‖², ε), 1]`.
pub fn numeric_oracle(problem: &FilteringProblem) -> Result<OracleResult> {
    let eta = problem.priors();
    if eta[0] <= 0.0 || eta[0] >= 1.0 {
        return Err(crate::Error::DegeneratePrior(eta[0]));
    }
    let states: Vec<_> = problem.states().iter().map(|s| s.amplitudes()).collect();
    let overlap_sq: Vec<f64> = states[1..]
        .iter()
        .map(|s| {
            states[0]
                .iter()
                .zip(s.iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
                .norm_sqr()
        })
        .collect();
    let weighted: f64 = eta[1..].iter().zip(&overlap_sq).map(|(e, o)| e * o).sum();
    let parallel = parallel_norm_sq_via_gram(problem);

    if weighted == 0.0 {
        return Ok(OracleResult {
            q1_star: parallel,
            q_star: eta[0] * parallel,
        });
    }
    let objective = |q1: f64| eta[0] * q1 + weighted / q1;
    let lo = parallel.clamp(LOWER_BRACKET_FLOOR, 1.0);
    let q1_star = golden_section(objective, lo, 1.0, GOLDEN_TOLERANCE);
    Ok(OracleResult {
        q1_star,
        q_star: objective(q1_star),
    })
}

/// `⟨ψ₁|P_β|ψ₁⟩ = b† G_β⁺ b` with `bⱼ = ⟨ψⱼ|ψ₁⟩` and `G_β` the β-set Gram matrix.
fn parallel_norm_sq_via_gram(problem: &FilteringProblem) -> f64 {
    let beta = &problem.states()[1..];
    let g = crate::ensemble::gram(beta);
    let b = DVector::from_iterator(
        beta.len(),
        beta.iter().map(|s| s.overlap(&problem.states()[0])),
    );
    let (values, vectors) = linalg::hermitian_eigen(&g);
    let top = values.last().copied().unwrap_or(0.0);
    let mut total = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 1e-12 * top {
            total += vectors.column(k).dotc(&b).norm_sqr() / lambda;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    // Endpoints are candidates too: the optimum is often clipped to one of them.
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(mid)
}

/// The α and β sets as density matrices.
#[derive(Debug, Clone)]
pub struct MixedStateView {
    pub rho_alpha: CMatrix,
    pub rho_beta: CMatrix,
    /// `F(ρ_α, ρ_β) = √⟨ψ₁|ρ_β|ψ₁⟩`
    pub fidelity: f64,
    /// `Tr(ρ_α ρ_β)`
    pub trace_overlap: f64,
}

pub fn mixed_state_view(problem: &FilteringProblem) -> Result<MixedStateView> {
    let rel = problem.beta_priors_renormalized()?;
    let psi1 = problem.states()[0].amplitudes();
    let rho_alpha = linalg::outer(psi1, psi1);
    let d = problem.dim();
    let rho_beta = problem.states()[1..]
        .iter()
        .zip(&rel)
        .fold(CMatrix::zeros(d, d), |acc, (s, w)| {
            acc + linalg::outer(s.amplitudes(), s.amplitudes()).scale(*w)
        });
    let trace_overlap = (&rho_alpha * &rho_beta).trace().re;
    let fidelity = linalg::expectation(&rho_beta, psi1).max(0.0).sqrt();
    Ok(MixedStateView {
        rho_alpha,
        rho_beta,
        fidelity,
        trace_overlap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RudolphReport {
    /// `2√(η_α η_β) F(ρ_α, ρ_β)`
    pub bound: f64,
    pub q_opt: f64,
    pub regime: Regime,
    pub gap: f64,
    pub passed: bool,
}

/// Compares `q_opt` with the fidelity lower bound: equal inside the POVM window,
/// never below it elsewhere.
pub fn check_rudolph_bound(
    problem: &FilteringProblem,
    solution: &FilteringSolution,
) -> Result<RudolphReport> {
    let view = mixed_state_view(problem)?;
    let bound = 2.0 * (problem.eta_alpha() * problem.eta_beta()).sqrt() * view.fidelity;
    let gap = solution.q_opt - bound;
    let passed = match solution.regime {
        Regime::Povm => gap.abs() <= BOUND_TOLERANCE,
        _ => gap >= -BOUND_TOLERANCE,
    };
    Ok(RudolphReport {
        bound,
        q_opt: solution.q_opt,
        regime: solution.regime,
        gap,
        passed,
    })
}

#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub matrix: CMatrix,
    pub min_eigenvalue: f64,
    pub beta_block_min_eigenvalue: f64,
    /// `maxⱼ |M₁ⱼ|`; zero when the q values obey `q₁qⱼ = |⟨ψ₁|ψⱼ⟩|²` with matching phases.
    pub block_residual: f64,
    pub psd: bool,
}

/// Builds `M_lk = ⟨ψ_l|ψ_k⟩ − √(q_l q_k) e^{i(χ_k − χ_l)}` and checks its positivity.
pub fn positivity_matrix(
    problem: &FilteringProblem,
    q_values: &[f64],
    phases: &[f64],
) -> PositivityReport {
    let n = problem.len();
    let matrix = output_gram(problem, q_values, phases);
    let min_eigenvalue = linalg::min_eigenvalue(&matrix);
    let beta_block_min_eigenvalue =
        linalg::min_eigenvalue(&matrix.view((1, 1), (n - 1, n - 1)).into_owned());
    let block_residual = (1..n).map(|j| matrix[(0, j)].norm()).fold(0.0, f64::max);
    PositivityReport {
        psd: min_eigenvalue >= -PSD_TOLERANCE,
        matrix,
        min_eigenvalue,
        beta_block_min_eigenvalue,
        block_residual,
    }
}

/// `[q₁, |O₁₂|²/q₁, …]`, the failure probabilities fixed by a choice of `q₁`.
pub fn constrained_q_values(problem: &FilteringProblem, q1: f64) -> Vec<f64> {
    std::iter::once(q1)
        .chain(problem.overlaps()[1..].iter().map(|o| o.norm_sqr() / q1))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured residual or quantity the check is about.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: value.abs() <= tolerance,
            value,
            tolerance,
        }
    }

    fn flag(name: &str, passed: bool, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub solution: FilteringSolution,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Runs every check on a single problem: oracle agreement, fidelity identity and
/// bound, positivity, POVM validity and Neumark consistency.
pub fn run_checks(problem: &FilteringProblem) -> Result<CheckReport> {
    let solution = solve(problem)?;
    let mut checks = Vec::new();

    let oracle = numeric_oracle(problem)?;
    checks.push(Check::at_most(
        "oracle_agreement",
        oracle.q_star - solution.q_opt,
        ORACLE_TOLERANCE,
    ));

    let view = mixed_state_view(problem)?;
    let s = s_value(problem)?;
    checks.push(Check::at_most(
        "trace_overlap_equals_s",
        view.trace_overlap - s,
        1e-12,
    ));
    checks.push(Check::at_most(
        "fidelity_squared_equals_s",
        view.fidelity * view.fidelity - s,
        1e-12,
    ));

    let rudolph = check_rudolph_bound(problem, &solution)?;
    checks.push(Check::flag(
        "fidelity_bound",
        rudolph.passed,
        rudolph.gap,
        BOUND_TOLERANCE,
    ));

    let positivity = positivity_matrix(problem, &solution.q_all(), &failure_phases(problem));
    checks.push(Check::flag(
        "positivity_matrix_psd",
        positivity.psd,
        positivity.min_eigenvalue,
        PSD_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "positivity_block_structure",
        positivity.block_residual,
        1e-10,
    ));

    let povm = build_povm(problem, &solution)?;
    let povm_report = validate_povm(&povm, problem, &solution);
    checks.push(Check::at_most(
        "povm_completeness",
        povm_report.completeness_residual,
        crate::povm::COMPLETENESS_TOLERANCE,
    ));
    let min_ev = povm_report
        .min_eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::flag(
        "povm_positive",
        min_ev >= -crate::povm::PSD_TOLERANCE,
        min_ev,
        crate::povm::PSD_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "povm_unambiguous",
        povm_report.alpha_leakage.max(povm_report.beta_leakage),
        crate::povm::UNAMBIGUITY_TOLERANCE,
    ));
    checks.push(Check::flag(
        "povm_reproduces_failure_probabilities",
        povm_report.passed,
        povm_report
            .q_alpha_residual
            .max(povm_report.q_beta_residual)
            .max(povm_report.q_individual_residual),
        crate::povm::PROBABILITY_TOLERANCE,
    ));

    let dilation = build_dilation(problem, &solution)?;
    let dilation_report = verify_dilation(&dilation, problem, &povm);
    checks.push(Check::at_most(
        "dilation_unitary",
        dilation_report.unitarity_residual,
        crate::neumark::UNITARITY_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "dilation_matches_povm",
        dilation_report.povm_mismatch,
        crate::neumark::STRUCTURE_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "failure_vector_overlaps",
        dilation_report.failure_overlap_residual,
        crate::neumark::STRUCTURE_TOLERANCE,
    ));
    checks.push(Check::flag(
        "dilation_structure",
        dilation_report.passed,
        dilation_report.structure_residual,
        crate::neumark::STRUCTURE_TOLERANCE,
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(CheckReport {
        solution,
        checks,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub index: u64,
    pub dim: usize,
    pub states: usize,
    pub q_opt: f64,
    pub failed_checks: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub problems: u64,
    pub seed: u64,
    pub max_oracle_gap: f64,
    pub failures: Vec<SweepEntry>,
    pub passed: bool,
}

/// The `index`-th problem of a randomized sweep: `d ∈ 2..=5`, `N ∈ 2..=6`, drawn
/// from stream `index` of a ChaCha8 generator seeded with `seed`.
pub fn sweep_problem(seed: u64, index: u64) -> FilteringProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    random::random_problem(&mut rng, 2..=5, 2..=6)
}

/// Runs [`run_checks`] on `count` random problems in parallel.
pub fn random_sweep(count: u64, seed: u64) -> Result<SweepReport> {
    let results: Vec<(SweepEntry, f64)> = (0..count)
        .into_par_iter()
        .map(|index| {
            let problem = sweep_problem(seed, index);
            let report = run_checks(&problem)?;
            let gap = report
                .checks
                .iter()
                .find(|c| c.name == "oracle_agreement")
                .map_or(f64::NAN, |c| c.value.abs());
            Ok((
                SweepEntry {
                    index,
                    dim: problem.dim(),
                    states: problem.len(),
                    q_opt: report.solution.q_opt,
                    failed_checks: report
                        .checks
                        .iter()
                        .filter(|c| !c.passed)
                        .map(|c| c.name.clone())
                        .collect(),
                },
                gap,
            ))
        })
        .collect::<Result<_>>()?;
    let max_oracle_gap = results.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    let failures: Vec<SweepEntry> = results
        .into_iter()
        .map(|(e, _)| e)
        .filter(|e| !e.failed_checks.is_empty())
        .collect();
    Ok(SweepReport {
        problems: count,
        seed,
        max_oracle_gap,
        passed: failures.is_empty(),
        failures,
    })
}
