//! Random problem instances: Haar-random states and flat-Dirichlet priors.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::ensemble::{FilteringProblem, PureState};
use crate::linalg::{self, CMatrix, CVector, C64};

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    CVector::from_fn(dim, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Haar-distributed pure state: a normalized standard complex Gaussian vector.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> PureState {
    loop {
        let v = gaussian_vector(rng, dim);
        if v.norm() > 1e-8 {
            return PureState::normalized(v).expect("nonzero vector");
        }
    }
}

/// Haar-distributed unitary via Gram–Schmidt on complex Gaussian columns.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let cols: Vec<CVector> = (0..dim).map(|_| gaussian_vector(rng, dim)).collect();
    let basis = linalg::complete_basis(&cols, dim);
    CMatrix::from_columns(&basis)
}

/// Flat Dirichlet sample of length `n`.
pub fn dirichlet_priors<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = Exp1.sample(rng);
            x.max(1e-12)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// A problem with dimension and state count drawn uniformly from the given ranges.
pub fn random_problem<R: Rng + ?Sized>(
    rng: &mut R,
    dims: RangeInclusive<usize>,
    counts: RangeInclusive<usize>,
) -> FilteringProblem {
    let d = rng.random_range(dims);
    let n = rng.random_range(counts);
    problem_with_shape(rng, d, n)
}

pub fn problem_with_shape<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> FilteringProblem {
    let states = (0..n).map(|_| haar_state(rng, d)).collect();
    FilteringProblem::new(states, dirichlet_priors(rng, n)).expect("valid random problem")
}
