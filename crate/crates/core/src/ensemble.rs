//! States, problem instances and the subspace geometry they induce.
//!
//! The first state of a [`FilteringProblem`] is the filtered state `|ψ₁⟩` (the α set);
//! the remaining states form the β set.

use serde_json::Value;

use crate::linalg::{self, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Inputs whose norm is within this distance of 1 are renormalized silently.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Priors summing to within this distance of 1 are rescaled silently.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-6;
/// Relative singular-value cutoff used when building span projectors.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// `⟨ψ₁∥|ψ₁∥⟩` at or below this is rounding noise and snaps to 0.
pub const PARALLEL_ZERO: f64 = 1e-24;
/// `⟨ψ₁∥|ψ₁∥⟩` within this of 1 snaps to 1 (`|ψ₁⟩` lies in the β span).
pub const PARALLEL_ONE: f64 = 1e-12;

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Accepts `amplitudes` whose norm is within [`NORM_TOLERANCE`] of 1 and
    /// renormalizes them.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        Self::checked(amplitudes, 0)
    }

    fn checked(amplitudes: CVector, index: usize) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Malformed(format!("state {index} is empty")));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { index, norm });
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotNormalized { index: 0, norm });
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Real amplitudes, normalized.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(CVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    /// Canonical basis vector `k` of `C^dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        Self {
            amplitudes: CVector::from_fn(
                dim,
                |i, _| if i == k { linalg::ONE } else { linalg::ZERO },
            ),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn overlap(&self, other: &PureState) -> C64 {
        linalg::inner(&self.amplitudes, &other.amplitudes)
    }
}

/// A validated filtering instance: states of a common dimension and their priors.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteringProblem {
    states: Vec<PureState>,
    priors: Vec<f64>,
    overlaps: Vec<C64>,
}

impl FilteringProblem {
    pub fn new(states: Vec<PureState>, priors: Vec<f64>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::TooFewStates(states.len()));
        }
        let dim = states[0].dim();
        for (index, s) in states.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        if priors.len() != states.len() {
            return Err(Error::PriorCount {
                expected: states.len(),
                found: priors.len(),
            });
        }
        for (index, &value) in priors.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidPrior { index, value });
            }
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::PriorSum(sum));
        }
        let priors = priors.into_iter().map(|p| p / sum).collect();
        let overlaps = states.iter().map(|s| states[0].overlap(s)).collect();
        Ok(Self {
            states,
            priors,
            overlaps,
        })
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Number of states `N`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// System dimension `d`.
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `⟨ψ₁|ψᵢ⟩` for every `i` (the first entry is 1).
    pub fn overlaps(&self) -> &[C64] {
        &self.overlaps
    }

    /// `η₁`, the prior of the α set.
    pub fn eta_alpha(&self) -> f64 {
        self.priors[0]
    }

    /// Total prior of the β set.
    pub fn eta_beta(&self) -> f64 {
        self.priors[1..].iter().sum()
    }

    /// β-set priors renormalized to sum to one, `η′ⱼ = ηⱼ / η_β`.
    pub fn beta_priors_renormalized(&self) -> Result<Vec<f64>> {
        let eta_beta = self.eta_beta();
        if eta_beta <= 0.0 {
            return Err(Error::ZeroBetaPrior);
        }
        Ok(self.priors[1..].iter().map(|p| p / eta_beta).collect())
    }

    /// Same states, different priors.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        Self::new(self.states.clone(), priors)
    }

    /// Same geometry with `η₁` replaced and the β priors rescaled to keep their
    /// relative weights.
    pub fn with_eta_alpha(&self, eta_alpha: f64) -> Result<Self> {
        let rel = self.beta_priors_renormalized()?;
        let mut priors = Vec::with_capacity(self.len());
        priors.push(eta_alpha);
        priors.extend(rel.iter().map(|r| r * (1.0 - eta_alpha)));
        self.with_priors(priors)
    }

    /// Moves every β state along the great circle through `|ψ₁⟩` and its own
    /// component orthogonal to `|ψ₁⟩`, so that every `⟨ψ₁|ψⱼ⟩` is multiplied by
    /// `scale ∈ [0, 1]` while the phase of the overlap is kept.
    pub fn scale_overlaps(&self, scale: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&scale) {
            return Err(Error::InvalidArgument(format!(
                "overlap scale {scale} outside [0, 1]"
            )));
        }
        let psi1 = self.states[0].amplitudes();
        let mut states = vec![self.states[0].clone()];
        for (j, state) in self.states.iter().enumerate().skip(1) {
            let o = self.overlaps[j];
            let residual = state.amplitudes() - psi1 * o;
            let perp = if residual.norm() > 1e-12 {
                residual.unscale(residual.norm())
            } else {
                // ψⱼ ∝ ψ₁: any direction orthogonal to ψ₁ spans the geodesic.
                let basis = linalg::complete_basis(std::slice::from_ref(psi1), self.dim());
                match basis.get(1) {
                    Some(v) => v.clone(),
                    None if scale == 1.0 => {
                        states.push(state.clone());
                        continue;
                    }
                    None => {
                        return Err(Error::InvalidArgument(
                            "overlap scaling needs dimension ≥ 2".into(),
                        ))
                    }
                }
            };
            let scaled = o * scale;
            let along = (1.0 - scaled.norm_sqr()).max(0.0).sqrt();
            states.push(PureState::normalized(
                psi1 * scaled + perp * C64::new(along, 0.0),
            )?);
        }
        Self::new(states, self.priors.clone())
    }
}

/// Projectors for the α span, the β span, and the component of `|ψ₁⟩` inside the β span.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    /// `|ψ₁⟩⟨ψ₁|`
    pub p_alpha: CMatrix,
    /// Projector onto `span{|ψ₂⟩, …, |ψ_N⟩}`.
    pub p_beta: CMatrix,
    /// `P_β|ψ₁⟩`
    pub psi1_parallel: CVector,
    /// `⟨ψ₁∥|ψ₁∥⟩`
    pub parallel_norm_sq: f64,
    /// Orthonormal basis of the β span, as columns.
    pub beta_basis: CMatrix,
}

impl SubspaceDecomposition {
    /// Projector along `|ψ₁∥⟩`; `None` when `|ψ₁⟩` is orthogonal to the β span.
    pub fn p_beta_parallel(&self) -> Option<CMatrix> {
        (self.parallel_norm_sq > 0.0).then(|| linalg::projector(&self.psi1_parallel))
    }

    /// `P_β − P_β^∥`
    pub fn p_beta_perp(&self) -> CMatrix {
        match self.p_beta_parallel() {
            Some(par) => &self.p_beta - par,
            None => self.p_beta.clone(),
        }
    }

    pub fn beta_rank(&self) -> usize {
        self.beta_basis.ncols()
    }
}

/// `G_ij = ⟨ψᵢ|ψⱼ⟩`
pub fn gram(states: &[PureState]) -> CMatrix {
    let n = states.len();
    CMatrix::from_fn(n, n, |i, j| states[i].overlap(&states[j]))
}

pub fn decompose(problem: &FilteringProblem) -> SubspaceDecomposition {
    let d = problem.dim();
    let psi1 = problem.states[0].amplitudes();
    let beta_cols: Vec<CVector> = problem.states[1..]
        .iter()
        .map(|s| s.amplitudes().clone())
        .collect();
    let beta_basis = linalg::column_space(&CMatrix::from_columns(&beta_cols), RANK_TOLERANCE);
    let p_beta = if beta_basis.ncols() == 0 {
        CMatrix::zeros(d, d)
    } else {
        &beta_basis * beta_basis.adjoint()
    };
    let coords = beta_basis.adjoint() * psi1;
    let mut psi1_parallel = &beta_basis * &coords;
    let mut parallel_norm_sq = linalg::norm_sq(&coords).min(1.0);
    if parallel_norm_sq <= PARALLEL_ZERO {
        parallel_norm_sq = 0.0;
        psi1_parallel.fill(linalg::ZERO);
    } else if 1.0 - parallel_norm_sq <= PARALLEL_ONE {
        parallel_norm_sq = 1.0;
    }
    SubspaceDecomposition {
        p_alpha: linalg::outer(psi1, psi1),
        p_beta,
        psi1_parallel,
        parallel_norm_sq,
        beta_basis,
    }
}

/// Parses the JSON problem format:
///
/// ```json
/// { "states": [[[re, im], [re], re, ...], ...], "priors": [η₁, ...] }
/// ```
///
/// Each amplitude is `[re, im]`, `[re]` or a bare number.
pub fn parse_problem(text: &str) -> Result<FilteringProblem> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("invalid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::Malformed("top level must be an object".into()))?;
    let states = obj
        .get("states")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Malformed("missing array \"states\"".into()))?;
    let priors = obj
        .get("priors")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Malformed("missing array \"priors\"".into()))?;

    let mut parsed = Vec::with_capacity(states.len());
    let mut dim = None;
    for (index, state) in states.iter().enumerate() {
        let entries = state
            .as_array()
            .ok_or_else(|| Error::Malformed(format!("state {index} must be an array")))?;
        let amps = entries
            .iter()
            .map(|e| {
                parse_amplitude(e)
                    .ok_or_else(|| Error::Malformed(format!("bad amplitude in state {index}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let expected = *dim.get_or_insert(amps.len());
        if amps.len() != expected {
            return Err(Error::DimensionMismatch {
                index,
                expected,
                found: amps.len(),
            });
        }
        parsed.push(PureState::checked(CVector::from_vec(amps), index)?);
    }
    if parsed.len() < 2 {
        return Err(Error::TooFewStates(parsed.len()));
    }
    let priors = priors
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.as_f64()
                .ok_or_else(|| Error::Malformed(format!("prior {i} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    FilteringProblem::new(parsed, priors)
}

fn parse_amplitude(v: &Value) -> Option<C64> {
    match v {
        Value::Number(n) => Some(C64::new(n.as_f64()?, 0.0)),
        Value::Array(parts) => match parts.as_slice() {
            [re] => Some(C64::new(re.as_f64()?, 0.0)),
            [re, im] => Some(C64::new(re.as_f64()?, im.as_f64()?)),
            _ => None,
        },
        _ => None,
    }
}

/// JSON text in the problem format for `problem`.
pub fn problem_to_json(problem: &FilteringProblem) -> String {
    let states: Vec<Vec<[f64; 2]>> = problem
        .states
        .iter()
        .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
        .collect();
    serde_json::json!({ "states": states, "priors": problem.priors }).to_string()
}
