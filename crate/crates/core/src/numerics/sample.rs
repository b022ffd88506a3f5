//! Seeded random matrices and states.
//!
//! Everything here is a pure function of the RNG state, so a fixed seed gives
//! bit-identical output on the same build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::{inner, kron, partial_trace, ComplexMatrix, Party, C64, ZERO};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian, `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(n, n, rng).hermitize()
}

/// Haar-distributed unitary: Gram–Schmidt on a Ginibre matrix. Modified
/// Gram–Schmidt leaves a positive real diagonal in `R`, which is the phase
/// fixing that makes the distribution Haar.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, n, rng);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| g.column(j)).collect();
    for j in 0..n {
        // two passes keep orthogonality at machine precision
        for _ in 0..2 {
            for k in 0..j {
                let proj = inner(&cols[k], &cols[j]);
                let (done, rest) = cols.split_at_mut(j);
                for (x, y) in rest[0].iter_mut().zip(&done[k]) {
                    *x -= proj * y;
                }
            }
        }
        let norm = super::matrix::norm(&cols[j]);
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        u.set_column(j, c);
    }
    u
}

pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
    super::matrix::normalize(&v).expect("gaussian vector is nonzero with probability one")
}

/// Induced-measure density matrix: trace out an `n`-dimensional ancilla of a
/// random pure state on `n × n`.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let psi = random_pure_state(n * n, rng);
    partial_trace(&ComplexMatrix::projector(&psi), n, n, Party::A)
        .expect("square by construction")
        .hermitize()
}

/// `n` rank-one orthogonal projectors from the columns of a Haar unitary.
pub fn random_projective_povm<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<ComplexMatrix> {
    let u = haar_unitary(n, rng);
    (0..n).map(|j| ComplexMatrix::projector(&u.column(j))).collect()
}

/// Random measurement with `outcomes` elements on `C^dim`.
///
/// With at least as many outcomes as dimensions this is a rank-one POVM
/// obtained from `dim` rows of a Haar unitary of size `outcomes` (projective
/// when the counts agree). With fewer outcomes, the Haar basis projectors are
/// grouped at random into `outcomes` nonempty blocks.
pub fn random_measurement<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Vec<ComplexMatrix> {
    if outcomes >= dim {
        let u = haar_unitary(outcomes, rng);
        (0..outcomes)
            .map(|a| {
                let v: Vec<C64> = (0..dim).map(|i| u[(i, a)]).collect();
                ComplexMatrix::projector(&v)
            })
            .collect()
    } else {
        let basis = random_projective_povm(dim, rng);
        let mut labels: Vec<usize> = (0..dim).map(|i| if i < outcomes { i } else { rng.random_range(0..outcomes) }).collect();
        // shuffle which basis vectors carry the guaranteed labels
        for i in (1..dim).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        let mut out = vec![ComplexMatrix::zeros(dim, dim); outcomes];
        for (proj, &a) in basis.iter().zip(&labels) {
            out[a] += proj;
        }
        out
    }
}

/// Requested object kinds for [`sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    HaarUnitary,
    PureState,
    DensityMatrix,
    PovmProjective,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sampled {
    Unitary(ComplexMatrix),
    PureState(Vec<C64>),
    DensityMatrix(ComplexMatrix),
    Povm(Vec<ComplexMatrix>),
}

pub fn sample(kind: SampleKind, dim: usize, seed: u64) -> Sampled {
    let mut rng = rng_from_seed(seed);
    match kind {
        SampleKind::HaarUnitary => Sampled::Unitary(haar_unitary(dim, &mut rng)),
        SampleKind::PureState => Sampled::PureState(random_pure_state(dim, &mut rng)),
        SampleKind::DensityMatrix => Sampled::DensityMatrix(random_density_matrix(dim, &mut rng)),
        SampleKind::PovmProjective => Sampled::Povm(random_projective_povm(dim, &mut rng)),
    }
}

/// Product of the two local density matrices, used by tests and simulation.
pub fn product_state(rho_a: &ComplexMatrix, rho_b: &ComplexMatrix) -> ComplexMatrix {
    kron(rho_a, rho_b)
}

pub fn maximally_entangled(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d * d];
    let amp = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        v[k * d + k] = C64::new(amp, 0.0);
    }
    v
}
