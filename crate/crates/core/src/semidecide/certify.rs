//! Norm lower bounds for `𝔊(A, B)`: float power iteration and an exact
//! rational recheck of the Rayleigh quotient.

use std::collections::HashMap;

use num::{BigInt, BigRational, One, Signed, Zero};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rational::{inner, upper_sqrt, RationalMatrix};
use crate::error::Result;
use crate::game::Game;
use crate::operator::{sqrt_psd, CVector, HermMatrix};
use crate::sample::gaussian_matrix;
use crate::strategy::{game_operator, MeasurementFamily};
use crate::textfmt::GaussRational;

pub const RESIDUAL_TARGET: f64 = 0.125;
pub const MIN_POWER_ITERS: usize = 64;
pub const MAX_POWER_ITERS: usize = 5000;
/// Denominator used to rationalize vectors and square-root surrogates.
pub const VECTOR_DENOM_LOG2: u32 = 20;

#[derive(Clone, Debug)]
pub struct NormCertificate {
    /// Rayleigh quotient `v*𝔊v` of the unit vector `v`.
    pub bound: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub vector: CVector,
}

/// Power iteration on `𝔊(A, B) ⪰ 0` from a fixed pseudo-random start, run
/// for at least [`MIN_POWER_ITERS`] steps and until `‖𝔊v − λv‖ ≤ 1/8`.
pub fn certify_norm(g: &Game, a: &MeasurementFamily, b: &MeasurementFamily) -> Result<NormCertificate> {
    let op = game_operator(g, a, b)?;
    let m = op.as_matrix();
    let d = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: CVector = gaussian_matrix(&mut rng, d, 1, 1.0).column(0).into_owned();
    v.unscale_mut(v.norm());
    let mut out = NormCertificate {
        bound: 0.0,
        residual: f64::INFINITY,
        converged: false,
        iterations: 0,
        vector: v.clone(),
    };
    for it in 1..=MAX_POWER_ITERS {
        let w = m * &v;
        let lambda = v.dotc(&w).re;
        let residual = (&w - &v * Complex64::new(lambda, 0.0)).norm();
        out = NormCertificate {
            bound: lambda.max(0.0),
            residual,
            converged: residual <= RESIDUAL_TARGET,
            iterations: it,
            vector: v.clone(),
        };
        let wn = w.norm();
        if wn == 0.0 || (it >= MIN_POWER_ITERS && out.converged) {
            break;
        }
        v = w.unscale(wn);
    }
    Ok(out)
}

/// Rational stand-in `R ⪰ 0` for `A^{1/2}` with `e ≥ ‖R − A^{1/2}‖`.
#[derive(Clone, Debug)]
struct RootSurrogate {
    root: RationalMatrix,
    err: BigRational,
}

fn root_surrogate(a: &RationalMatrix) -> RootSurrogate {
    let d = a.dim();
    let den = BigInt::one() << VECTOR_DENOM_LOG2;
    let float_root = sqrt_psd(&HermMatrix::symmetrize(a.to_cmatrix()))
        .map(|r| r.into_inner())
        .unwrap_or_else(|_| a.to_cmatrix());
    let mut root = RationalMatrix::round_hermitian(&float_root, &den);
    let mut shift = BigRational::new(BigInt::one(), den.clone());
    while !root.is_psd() {
        root = root.add(&RationalMatrix::scalar(d, shift.clone()));
        shift *= BigRational::from_integer(2.into());
    }
    // For PSD X, Y: ‖X^{1/2} − Y^{1/2}‖ ≤ ‖X − Y‖^{1/2} ≤ ‖X − Y‖_F^{1/2}.
    let f = root.mul(&root).sub(a).frobenius_sq();
    let err = upper_sqrt(&upper_sqrt(&f));
    RootSurrogate { root, err }
}

/// Exact lower bound on `v*(A•B)v`'s `v* A^{1/2} B A^{1/2} v` half: with
/// `w = Rv`, `w*Bw − e(2 + e)‖v‖²`, clamped at 0. Uses `‖B‖, ‖A^{1/2}‖ ≤ 1`.
fn half_term(s: &RootSurrogate, b: &RationalMatrix, v: &[GaussRational], vv: &BigRational) -> BigRational {
    let w = s.root.mul_vec(v);
    let main = inner(&w, &b.mul_vec(&w)).re;
    if s.err.is_zero() {
        return main.max(BigRational::zero());
    }
    let two = BigRational::from_integer(2.into());
    let slack = &s.err * (two + &s.err) * vv;
    let lb = main - slack;
    if lb.is_negative() {
        BigRational::zero()
    } else {
        lb
    }
}

/// Exact rational lower bound on the Rayleigh quotient `v*𝔊(A, B)v / v*v`.
/// Exactly commuting effect pairs contribute `v*ABv`; the others go through
/// rational square-root surrogates with certified error.
pub fn exact_rayleigh_bound(
    g: &Game,
    alice: &[Vec<RationalMatrix>],
    bob: &[Vec<RationalMatrix>],
    v: &[GaussRational],
) -> BigRational {
    let vv = inner(v, v).re;
    if vv.is_zero() {
        return BigRational::zero();
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut roots: HashMap<(bool, usize, usize), RootSurrogate> = HashMap::new();
    let mut total = BigRational::zero();
    for x in 0..g.n() {
        for y in 0..g.n() {
            let w = g.pi(x, y);
            if w.is_zero() {
                continue;
            }
            for a in 0..g.k() {
                for b in 0..g.k() {
                    if !g.wins(x, y, a, b) {
                        continue;
                    }
                    let (ea, eb) = (&alice[x][a], &bob[y][b]);
                    let ab = ea.mul(eb);
                    let term = if ab == eb.mul(ea) {
                        inner(v, &ab.mul_vec(v)).re
                    } else {
                        let ra = roots.entry((true, x, a)).or_insert_with(|| root_surrogate(ea)).clone();
                        let rb = roots.entry((false, y, b)).or_insert_with(|| root_surrogate(eb)).clone();
                        (half_term(&ra, eb, v, &vv) + half_term(&rb, ea, v, &vv)) * &half
                    };
                    total += w * term;
                }
            }
        }
    }
    total / vv
}

/// A float vector rounded componentwise to denominator `2^20`.
pub fn rationalize_vector(v: &CVector) -> Vec<GaussRational> {
    let den = BigInt::one() << VECTOR_DENOM_LOG2;
    v.iter()
        .map(|z| {
            num_complex::Complex::new(
                super::rational::rational_near(z.re, &den),
                super::rational::rational_near(z.im, &den),
            )
        })
        .collect()
}
