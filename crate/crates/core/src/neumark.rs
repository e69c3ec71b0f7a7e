//! Neumark realization of the filtering measurement.
//!
//! A unitary `U` on `system ⊗ ancilla` (ancilla dimension 3) maps each input
//! `|ψᵢ⟩|φ₀⟩` to
//!
//! ```text
//! |ψ′₁⟩|m₁⟩ + |ψ″₁⟩|m₃⟩          (i = 1)
//! |ψ′ⱼ⟩|m₂⟩ + |ψ″ⱼ⟩|m₃⟩          (j ≥ 2)
//! ```
//!
//! with collinear failure vectors `|ψ″ᵢ⟩ = √qᵢ e^{iχᵢ}|ψ₀⟩`. Measuring the ancilla in
//! the `m` basis then reproduces the optimal POVM.
//!
//! Vectors on the joint space use system-major indexing: `index = s·3 + a`.

use serde::Serialize;

use crate::analytic::FilteringSolution;
use crate::ensemble::{gram, FilteringProblem};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::povm::Povm;
use crate::{Error, Result};

pub const ANCILLA_DIM: usize = 3;
/// Ancilla basis index of the initial state `|φ₀⟩`.
pub const INITIAL_ANCILLA: usize = 0;
/// Ancilla outcome indices for α success, β success and failure.
pub const M_ALPHA: usize = 0;
pub const M_BETA: usize = 1;
pub const M_FAILURE: usize = 2;

pub const UNITARITY_TOLERANCE: f64 = 1e-12;
pub const STRUCTURE_TOLERANCE: f64 = 1e-10;

/// Eigenvalues of the positivity matrix below this are rejected outright.
const NEGATIVE_EIGENVALUE_LIMIT: f64 = -1e-9;
/// Eigenvalues of the β block at or below this (relative to max(1, λ_max)) are dropped.
const FACTOR_RANK_TOLERANCE: f64 = 1e-13;
/// Relative eigenvalue cutoff on the input Gram matrix.
const INPUT_RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NeumarkDilation {
    pub u: CMatrix,
    pub system_dim: usize,
    /// System dimension after padding, `d` or `d + 1`.
    pub padded_dim: usize,
    pub ancilla_dim: usize,
    /// Failure direction `|ψ₀⟩` in the padded system space.
    pub psi0: CVector,
    /// Initial ancilla state `|φ₀⟩`.
    pub phi0: CVector,
    /// Phases `χᵢ` of the failure vectors, radians.
    pub chi: Vec<f64>,
    /// Unnormalized success vectors `|ψ′ᵢ⟩`.
    pub psi_prime: Vec<CVector>,
    /// Unnormalized failure vectors `|ψ″ᵢ⟩`.
    pub psi_dprime: Vec<CVector>,
    pub m_basis: [CVector; 3],
    /// `M_lk = ⟨ψ′_l|ψ′_k⟩`.
    pub positivity: CMatrix,
}

impl NeumarkDilation {
    pub fn padded(&self) -> bool {
        self.padded_dim > self.system_dim
    }

    /// `|ψᵢ⟩|φ₀⟩` on the joint space.
    pub fn input_vector(&self, state: &CVector) -> CVector {
        linalg::kron_vec(&pad(state, self.padded_dim), &self.phi0)
    }

    /// The target output `U|ψᵢ⟩|φ₀⟩` for input `i`.
    pub fn target_output(&self, i: usize) -> CVector {
        let success = if i == 0 { M_ALPHA } else { M_BETA };
        linalg::kron_vec(&self.psi_prime[i], &self.m_basis[success])
            + linalg::kron_vec(&self.psi_dprime[i], &self.m_basis[M_FAILURE])
    }

    /// Splits a joint vector into its three ancilla sectors (system vectors).
    pub fn sectors(&self, joint: &CVector) -> [CVector; 3] {
        std::array::from_fn(|a| {
            CVector::from_fn(self.padded_dim, |s, _| joint[s * self.ancilla_dim + a])
        })
    }
}

fn pad(v: &CVector, dim: usize) -> CVector {
    CVector::from_fn(dim, |i, _| if i < v.len() { v[i] } else { linalg::ZERO })
}

fn basis_vector(dim: usize, k: usize) -> CVector {
    CVector::from_fn(dim, |i, _| if i == k { linalg::ONE } else { linalg::ZERO })
}

/// `χ₁ = 0`, `χⱼ = arg⟨ψ₁|ψⱼ⟩` (0 when the overlap vanishes).
pub fn failure_phases(problem: &FilteringProblem) -> Vec<f64> {
    problem
        .overlaps()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            if i == 0 || o.norm() == 0.0 {
                0.0
            } else {
                o.arg()
            }
        })
        .collect()
}

/// `M_lk = ⟨ψ_l|ψ_k⟩ − √(q_l q_k) e^{i(χ_k − χ_l)}`, the Gram matrix the success
/// vectors must have. The diagonal is `1 − q_l` exactly, since the states are normalized.
pub fn output_gram(problem: &FilteringProblem, q: &[f64], chi: &[f64]) -> CMatrix {
    let g = gram(problem.states());
    let n = problem.len();
    CMatrix::from_fn(n, n, |l, k| {
        if l == k {
            C64::new(1.0 - q[l], 0.0)
        } else {
            g[(l, k)] - C64::from_polar((q[l] * q[k]).sqrt(), chi[k] - chi[l])
        }
    })
}

pub fn build_dilation(
    problem: &FilteringProblem,
    solution: &FilteringSolution,
) -> Result<NeumarkDilation> {
    let n = problem.len();
    let d = problem.dim();
    let q = solution.q_all();
    let chi = failure_phases(problem);
    let m = output_gram(problem, &q, &chi);

    let alpha_block = m[(0, 0)].re;
    if alpha_block < NEGATIVE_EIGENVALUE_LIMIT {
        return Err(Error::NotPositive(alpha_block));
    }
    let beta_block = m.view((1, 1), (n - 1, n - 1)).into_owned();
    let (values, vectors) = linalg::hermitian_eigen(&beta_block);
    let lowest = values.first().copied().unwrap_or(0.0);
    if lowest < NEGATIVE_EIGENVALUE_LIMIT {
        return Err(Error::NotPositive(lowest));
    }
    let cutoff = FACTOR_RANK_TOLERANCE * values.last().copied().unwrap_or(0.0).max(1.0);
    let kept: Vec<usize> = (0..values.len()).filter(|&k| values[k] > cutoff).collect();

    // ψ′₁ occupies coordinate 0; the β factors occupy coordinates 1..=rank.
    let padded_dim = if 1 + kept.len() > d { d + 1 } else { d };
    let mut psi_prime = Vec::with_capacity(n);
    let mut first = CVector::zeros(padded_dim);
    first[0] = C64::new(alpha_block.max(0.0).sqrt(), 0.0);
    psi_prime.push(first);
    for j in 0..n - 1 {
        let mut v = CVector::zeros(padded_dim);
        for (slot, &k) in kept.iter().enumerate() {
            v[1 + slot] = vectors[(j, k)].conj() * values[k].sqrt();
        }
        psi_prime.push(v);
    }

    let psi0 = basis_vector(padded_dim, 0);
    let psi_dprime: Vec<CVector> = q
        .iter()
        .zip(&chi)
        .map(|(&qi, &c)| &psi0 * C64::from_polar(qi.max(0.0).sqrt(), c))
        .collect();

    let m_basis = std::array::from_fn(|k| basis_vector(ANCILLA_DIM, k));
    let phi0 = basis_vector(ANCILLA_DIM, INITIAL_ANCILLA);

    let mut dilation = NeumarkDilation {
        u: CMatrix::zeros(0, 0),
        system_dim: d,
        padded_dim,
        ancilla_dim: ANCILLA_DIM,
        psi0,
        phi0,
        chi,
        psi_prime,
        psi_dprime,
        m_basis,
        positivity: m,
    };
    dilation.u = complete_unitary(&dilation, problem)?;
    Ok(dilation)
}

/// Maps an orthonormal basis of the input span onto the matching combination of
/// target outputs, then extends both bases over the full space in canonical order.
fn complete_unitary(dilation: &NeumarkDilation, problem: &FilteringProblem) -> Result<CMatrix> {
    let dim = dilation.padded_dim * dilation.ancilla_dim;
    let inputs: Vec<CVector> = problem
        .states()
        .iter()
        .map(|s| dilation.input_vector(s.amplitudes()))
        .collect();
    let outputs: Vec<CVector> = (0..problem.len())
        .map(|i| dilation.target_output(i))
        .collect();
    let x = CMatrix::from_columns(&inputs);
    let y = CMatrix::from_columns(&outputs);

    let (values, vectors) = linalg::hermitian_eigen(&(x.adjoint() * &x));
    let top = values.last().copied().unwrap_or(0.0);
    let mut a_seed = Vec::new();
    let mut b_seed = Vec::new();
    for (k, &lambda) in values.iter().enumerate().rev() {
        if lambda <= INPUT_RANK_TOLERANCE * top {
            continue;
        }
        let v = vectors.column(k).into_owned();
        let scale = C64::new(1.0 / lambda.sqrt(), 0.0);
        a_seed.push(&x * &v * scale);
        b_seed.push(&y * &v * scale);
    }
    let a_basis = linalg::complete_basis(&a_seed, dim);
    let b_basis = linalg::complete_basis(&b_seed, dim);
    if a_basis.len() != dim || b_basis.len() != dim {
        return Err(Error::Inconsistent(
            "could not complete the dilation to a unitary".into(),
        ));
    }
    let mut u = CMatrix::zeros(dim, dim);
    for (a, b) in a_basis.iter().zip(&b_basis) {
        u += linalg::outer(b, a);
    }
    Ok(u)
}

#[derive(Debug, Clone, Serialize)]
pub struct DilationReport {
    pub unitarity_residual: f64,
    /// `maxᵢ ‖U|ψᵢ⟩|φ₀⟩ − target‖`
    pub structure_residual: f64,
    /// Ancilla outcome probabilities per input, ordered `[m₁, m₂, m₃]`.
    pub outcome_probabilities: Vec<[f64; 3]>,
    /// Largest gap between dilation statistics and `⟨ψᵢ|Πₖ|ψᵢ⟩`.
    pub povm_mismatch: f64,
    /// `maxⱼ |⟨ψ″₁|ψ″ⱼ⟩ − ⟨ψ₁|ψⱼ⟩|`
    pub failure_overlap_residual: f64,
    /// Second singular value of the matrix of failure vectors.
    pub failure_collinearity: f64,
    /// `maxᵢ |‖ψ′ᵢ‖² + ‖ψ″ᵢ‖² − 1|`
    pub norm_residual: f64,
    /// `maxⱼ |⟨ψ′₁|ψ′ⱼ⟩|`
    pub orthogonality_residual: f64,
    pub gram_residual: f64,
    pub violations: Vec<String>,
    pub passed: bool,
}

pub fn verify_dilation(
    dilation: &NeumarkDilation,
    problem: &FilteringProblem,
    povm: &Povm,
) -> DilationReport {
    let dim = dilation.u.nrows();
    let mut violations = Vec::new();
    let mut require = |ok: bool, what: String| {
        if !ok {
            violations.push(what);
        }
    };

    let unitarity_residual =
        linalg::max_abs(&(dilation.u.adjoint() * &dilation.u - linalg::identity(dim)));
    require(
        unitarity_residual <= UNITARITY_TOLERANCE,
        format!("U is not unitary ({unitarity_residual:e})"),
    );

    let mut structure_residual = 0.0f64;
    let mut povm_mismatch = 0.0f64;
    let mut outcome_probabilities = Vec::with_capacity(problem.len());
    let mut inputs = Vec::with_capacity(problem.len());
    let mut outputs = Vec::with_capacity(problem.len());
    for (i, state) in problem.states().iter().enumerate() {
        let input = dilation.input_vector(state.amplitudes());
        let out = &dilation.u * &input;
        structure_residual = structure_residual.max((&out - dilation.target_output(i)).norm());
        let probs = dilation.sectors(&out).map(|v| linalg::norm_sq(&v));
        let expected = povm.probabilities(state.amplitudes());
        for k in 0..3 {
            povm_mismatch = povm_mismatch.max((probs[k] - expected[k]).abs());
        }
        outcome_probabilities.push(probs);
        inputs.push(input);
        outputs.push(out);
    }
    require(
        structure_residual <= STRUCTURE_TOLERANCE,
        format!("outputs deviate from the target decomposition ({structure_residual:e})"),
    );
    require(
        povm_mismatch <= STRUCTURE_TOLERANCE,
        format!("ancilla statistics differ from the POVM ({povm_mismatch:e})"),
    );

    let failure_overlap_residual = dilation.psi_dprime[1..]
        .iter()
        .zip(&problem.overlaps()[1..])
        .map(|(f, o)| (linalg::inner(&dilation.psi_dprime[0], f) - o).norm())
        .fold(0.0, f64::max);
    require(
        failure_overlap_residual <= STRUCTURE_TOLERANCE,
        format!("failure-vector overlaps deviate ({failure_overlap_residual:e})"),
    );

    let failures = CMatrix::from_columns(&dilation.psi_dprime);
    let mut singular: Vec<f64> = failures.singular_values().iter().copied().collect();
    singular.sort_by(|a, b| b.total_cmp(a));
    let failure_collinearity = singular.get(1).copied().unwrap_or(0.0);
    require(
        failure_collinearity <= STRUCTURE_TOLERANCE,
        format!("failure vectors are not collinear ({failure_collinearity:e})"),
    );

    let norm_residual = dilation
        .psi_prime
        .iter()
        .zip(&dilation.psi_dprime)
        .map(|(a, b)| (linalg::norm_sq(a) + linalg::norm_sq(b) - 1.0).abs())
        .fold(0.0, f64::max);
    require(
        norm_residual <= STRUCTURE_TOLERANCE,
        format!("success and failure weights do not add to one ({norm_residual:e})"),
    );

    let orthogonality_residual = dilation.psi_prime[1..]
        .iter()
        .map(|v| linalg::inner(&dilation.psi_prime[0], v).norm())
        .fold(0.0, f64::max);
    require(
        orthogonality_residual <= STRUCTURE_TOLERANCE,
        format!("alpha success vector overlaps beta success vectors ({orthogonality_residual:e})"),
    );

    let gx = CMatrix::from_columns(&inputs);
    let gy = CMatrix::from_columns(&outputs);
    let gram_residual = linalg::max_abs(&(gx.adjoint() * &gx - gy.adjoint() * &gy));
    require(
        gram_residual <= STRUCTURE_TOLERANCE,
        format!("input and output Gram matrices differ ({gram_residual:e})"),
    );

    let passed = violations.is_empty();
    DilationReport {
        unitarity_residual,
        structure_residual,
        outcome_probabilities,
        povm_mismatch,
        failure_overlap_residual,
        failure_collinearity,
        norm_residual,
        orthogonality_residual,
        gram_residual,
        violations,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::solve;
    use crate::ensemble::PureState;
    use crate::povm::build_povm;
    use crate::verify::random::random_problem;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_state() -> FilteringProblem {
        FilteringProblem::new(
            vec![
                PureState::from_real(&[1.0, 0.0, 1.0]).unwrap(),
                PureState::basis(3, 0),
                PureState::basis(3, 1),
            ],
            vec![1.0 / 3.0; 3],
        )
        .unwrap()
    }

    fn full(problem: &FilteringProblem) -> (NeumarkDilation, Povm, DilationReport) {
        let sol = solve(problem).unwrap();
        let povm = build_povm(problem, &sol).unwrap();
        let dil = build_dilation(problem, &sol).unwrap();
        let report = verify_dilation(&dil, problem, &povm);
        (dil, povm, report)
    }

    #[test]
    fn orthogonal_pair_needs_no_failure() {
        let p = FilteringProblem::new(
            vec![PureState::basis(2, 0), PureState::basis(2, 1)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let (dil, _, report) = full(&p);
        assert!(report.passed, "{:?}", report.violations);
        assert!(dil.psi_dprime.iter().all(|v| v.norm() == 0.0));
        assert!((report.outcome_probabilities[0][M_ALPHA] - 1.0).abs() < 1e-12);
        assert!((report.outcome_probabilities[1][M_BETA] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_state_dilation() {
        let p = three_state();
        let (dil, _, report) = full(&p);
        assert!(report.passed, "{:?}", report.violations);
        assert!(report.unitarity_residual < 1e-12);
        let q1 = 0.5f64.sqrt();
        assert!((linalg::norm_sq(&dil.psi_dprime[0]) - q1).abs() < 1e-12);
        assert!((linalg::norm_sq(&dil.psi_dprime[1]) - 0.5 / q1).abs() < 1e-12);
        assert!(linalg::norm_sq(&dil.psi_dprime[2]).abs() < 1e-12);
        let first = report.outcome_probabilities[0];
        assert!((first[M_ALPHA] - (1.0 - q1)).abs() < 1e-12);
        assert!(first[M_BETA].abs() < 1e-12);
        assert!((first[M_FAILURE] - q1).abs() < 1e-12);
        for probs in &report.outcome_probabilities[1..] {
            assert!(probs[M_ALPHA].abs() < 1e-12);
        }
    }

    #[test]
    fn phase_follows_overlap() {
        let theta = 0.7;
        let s = 0.6;
        let psi2 = CVector::from_vec(vec![
            C64::from_polar(s, theta),
            C64::new((1.0 - s * s).sqrt(), 0.0),
        ]);
        let p = FilteringProblem::new(
            vec![PureState::basis(2, 0), PureState::new(psi2).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap();
        let (dil, _, report) = full(&p);
        assert!((dil.chi[1] - theta).abs() < 1e-14);
        assert!(report.failure_overlap_residual < 1e-12);
        assert!(report.passed, "{:?}", report.violations);
    }

    #[test]
    fn swapped_columns_break_structure_only() {
        let p = three_state();
        let (mut dil, povm, _) = full(&p);
        dil.u.swap_columns(0, 1);
        let report = verify_dilation(&dil, &p, &povm);
        assert!(report.unitarity_residual < 1e-12);
        assert!(report.structure_residual > 1e-3);
        assert!(!report.passed);
    }

    #[test]
    fn full_beta_span_fits_without_padding() {
        // Three β states spanning C³ put ψ₁ inside H_β, so q₁ = 1 and M^β loses a rank.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = crate::verify::random::problem_with_shape(&mut rng, 3, 4);
        let (dil, _, report) = full(&p);
        assert!(report.passed, "{:?}", report.violations);
        assert_eq!(dil.padded_dim, 3);
        assert!(!dil.padded());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn random_dilations_are_consistent(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 2..=5, 2..=6);
            let (dil, _, report) = full(&p);
            prop_assert!(report.passed, "{:?}", report.violations);
            prop_assert_eq!(dil.u.nrows(), dil.padded_dim * ANCILLA_DIM);
        }
    }
}
