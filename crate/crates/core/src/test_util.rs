//! Random instance generators shared by unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{Statistics, TransitionNetwork};
use crate::operators::{diagonal_matrix, hermitize, ComplexMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(r: &mut impl Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian(r: &mut impl Rng, dim: usize) -> ComplexMatrix {
    hermitize(&random_complex(r, dim))
}

pub fn random_unitary(r: &mut impl Rng, dim: usize) -> ComplexMatrix {
    random_complex(r, dim).qr().q()
}

/// Random state with eigenvalues in `[0, 1]` (fermions) or `[0, 3]` (bosons).
pub fn random_state(r: &mut impl Rng, dim: usize, stats: Statistics) -> ComplexMatrix {
    let top = match stats {
        Statistics::Fermion => 1.0,
        Statistics::Boson => 3.0,
    };
    let eig: Vec<f64> = (0..dim).map(|_| r.gen_range(0.0..top)).collect();
    let u = random_unitary(r, dim);
    hermitize(&(&u * diagonal_matrix(&eig) * u.adjoint()))
}

/// Random directed network on a random orthonormal basis.
pub fn random_network(r: &mut impl Rng, dim: usize) -> TransitionNetwork {
    let mut net = TransitionNetwork::with_basis(random_unitary(r, dim)).unwrap();
    for to in 0..dim {
        for from in 0..dim {
            if to != from && r.gen_bool(0.6) {
                net.add_rate(to, from, r.gen_range(0.0..1.0)).unwrap();
            }
        }
    }
    net
}
