//! Random instances shared by the integration tests.
#![allow(dead_code)]

use qme::{ComplexMatrix, Complex64, Statistics, TransitionNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(r: &mut impl Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian(r: &mut impl Rng, dim: usize) -> ComplexMatrix {
    let m = random_complex(r, dim);
    (&m + m.adjoint()).scale(0.5)
}

pub fn random_unitary(r: &mut impl Rng, dim: usize) -> ComplexMatrix {
    random_complex(r, dim).qr().q()
}

pub fn diag(values: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(values.len(), values.len(), |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Conjugates `diag(eigenvalues)` by `u`, then symmetrizes away roundoff.
pub fn with_spectrum(u: &ComplexMatrix, eigenvalues: &[f64]) -> ComplexMatrix {
    let m = u * diag(eigenvalues) * u.adjoint();
    (&m + m.adjoint()).scale(0.5)
}

pub fn random_eigenvalues(r: &mut impl Rng, dim: usize, stats: Statistics) -> Vec<f64> {
    let top = match stats {
        Statistics::Fermion => 1.0,
        Statistics::Boson => 3.0,
    };
    (0..dim).map(|_| r.gen_range(0.0..top)).collect()
}

/// State with eigenvalues in `[0, 1]` (fermions) or `[0, 3]` (bosons).
pub fn random_state(r: &mut impl Rng, dim: usize, stats: Statistics) -> ComplexMatrix {
    let eig = random_eigenvalues(r, dim, stats);
    with_spectrum(&random_unitary(r, dim), &eig)
}

/// Rates on `basis` (computational basis when `None`); each ordered pair
/// present with probability 0.6.
pub fn random_network(r: &mut impl Rng, dim: usize, basis: Option<ComplexMatrix>) -> TransitionNetwork {
    let mut net = match basis {
        Some(b) => TransitionNetwork::with_basis(b).unwrap(),
        None => TransitionNetwork::new(dim),
    };
    for to in 0..dim {
        for from in 0..dim {
            if to != from && r.gen_bool(0.6) {
                net.add_rate(to, from, r.gen_range(0.0..1.0)).unwrap();
            }
        }
    }
    net
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
