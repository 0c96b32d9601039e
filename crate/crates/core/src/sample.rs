//! Seeded random sampling of operators, POVMs and strategies for fuzzing and
//! property checks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{CMatrix, HermMatrix, State};
use crate::strategy::{MeasurementFamily, Povm, Strategy};

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// GUE-like Hermitian matrix.
pub fn random_herm<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermMatrix {
    HermMatrix::symmetrize(gaussian_matrix(rng, dim, dim, 1.0))
}

/// Wishart-like PSD matrix `G* G / dim`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermMatrix {
    let g = gaussian_matrix(rng, dim, dim, 1.0);
    HermMatrix::symmetrize(g.adjoint() * g / Complex64::new(dim as f64, 0.0))
}

/// Mixed state of full rank (almost surely).
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> State {
    let g = gaussian_matrix(rng, dim, dim, 1.0);
    State::from_unnormalized(HermMatrix::symmetrize(g.adjoint() * g)).expect("nonzero Wishart sample")
}

/// Random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> State {
    let v = gaussian_matrix(rng, dim, 1, 1.0);
    State::pure(&v.column(0).into_owned()).expect("nonzero Gaussian vector")
}

/// POVM `S^{-1/2} P_a S^{-1/2}` with `S = Σ P_a` built from Wishart samples.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize) -> Povm {
    let parts: Vec<HermMatrix> = (0..k).map(|_| random_psd(rng, dim)).collect();
    crate::strategy::normalize_to_povm(&parts, 1e-12).expect("well-conditioned Wishart sum")
}

pub fn random_family<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize, k: usize) -> MeasurementFamily {
    MeasurementFamily::new((0..n).map(|_| random_povm(rng, dim, k)).collect()).expect("consistent shapes")
}

/// Strategy on one shared space, with generically non-commuting players.
pub fn random_strategy<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize, k: usize) -> Strategy {
    let alice = random_family(rng, dim, n, k);
    let bob = random_family(rng, dim, n, k);
    let phi = random_state(rng, dim);
    Strategy::new(alice, bob, phi).expect("consistent shapes")
}
