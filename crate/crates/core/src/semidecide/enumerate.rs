//! Deterministic enumeration of rational measurement pairs.
//!
//! Index `i` is decoded through `i + 1 = 2^t (2m + 1)`; `t` is split by the
//! inverse Cantor pairing into `(x, y)`, giving dimension `d = x + 1` and
//! denominator `q = 2^y`, and `m` is the payload. Every triple `(d, q, m)`
//! has exactly one index.

use num::{BigInt, BigRational, One};
use num_complex::Complex;

use super::rational::{g_real, is_exact_povm, RationalMatrix};
use crate::error::Result;
use crate::game::Game;
use crate::operator::HermMatrix;
use crate::strategy::{phi_k_eval, round_to_povm, MeasurementFamily, Povm};

/// Near-POVMs farther than this from the POVM set go through float rounding.
pub const ROUNDING_THRESHOLD: f64 = 0.05;
/// Every enumerated entry component lies in `[-1, 1]`.
pub const ENTRY_BOUND: i64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationCursor {
    pub index: u64,
    pub dim: usize,
    /// Denominator bound `q`.
    pub denom: u64,
    pub entry_bound: i64,
    pub payload: u64,
}

fn cantor_unpair(t: u64) -> (u64, u64) {
    let mut w = (((8 * t + 1) as f64).sqrt() as u64).saturating_sub(1) / 2;
    while (w + 1) * (w + 2) / 2 <= t {
        w += 1;
    }
    while w * (w + 1) / 2 > t {
        w -= 1;
    }
    let y = t - w * (w + 1) / 2;
    (w - y, y)
}

fn cantor_pair(x: u64, y: u64) -> u64 {
    (x + y) * (x + y + 1) / 2 + y
}

impl EnumerationCursor {
    pub fn decode(index: u64) -> Self {
        let n = index as u128 + 1;
        let t = n.trailing_zeros() as u64;
        let m = ((n >> t) - 1) / 2;
        let (x, y) = cantor_unpair(t);
        EnumerationCursor {
            index,
            dim: x as usize + 1,
            denom: 1u64 << y,
            entry_bound: ENTRY_BOUND,
            payload: m as u64,
        }
    }

    /// Inverse of [`decode`](Self::decode), when the index fits in `u64`.
    pub fn encode(dim: usize, denom_log2: u32, payload: u64) -> Option<u64> {
        let t = cantor_pair(dim.checked_sub(1)? as u64, denom_log2 as u64);
        if t > 63 {
            return None;
        }
        let odd = (payload as u128) * 2 + 1;
        let n = odd.checked_shl(t as u32)?;
        let i = n.checked_sub(1)?;
        u64::try_from(i).ok()
    }

    /// Number of real coefficients per candidate: `2·n·k·d²`.
    pub fn coefficient_count(&self, n: usize, k: usize) -> usize {
        2 * n * k * self.dim * self.dim
    }

    /// Payload digits in base `2q + 1`, mapped `0, 1, 2, 3, 4, … ↦ 0, 1, −1, 2, −2, …`
    /// and divided by `q`.
    pub fn coefficients(&self, count: usize) -> Vec<BigRational> {
        let base = 2 * self.denom + 1;
        let mut m = self.payload;
        let qd = BigInt::from(self.denom);
        (0..count)
            .map(|_| {
                let e = (m % base) as i64;
                m /= base;
                let mag = (e + 1) / 2;
                let p = if e % 2 == 1 { mag } else { -mag };
                BigRational::new(BigInt::from(p), qd.clone())
            })
            .collect()
    }
}

/// One enumerated pair of measurement families with exact POVM effects.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub cursor: EnumerationCursor,
    /// `alice[x][a]`.
    pub alice: Vec<Vec<RationalMatrix>>,
    pub bob: Vec<Vec<RationalMatrix>>,
}

impl Candidate {
    pub fn dim(&self) -> usize {
        self.cursor.dim
    }

    pub fn families(&self) -> Result<(MeasurementFamily, MeasurementFamily)> {
        Ok((to_family(&self.alice)?, to_family(&self.bob)?))
    }
}

pub fn to_family(effects: &[Vec<RationalMatrix>]) -> Result<MeasurementFamily> {
    let povms = effects
        .iter()
        .map(|p| {
            Povm::new(
                p.iter()
                    .map(|e| HermMatrix::new(e.to_cmatrix()))
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementFamily::new(povms)
}

/// Fills a Hermitian matrix from `d²` coefficients: the real diagonal, then
/// real and imaginary parts of the strict lower triangle, row by row.
fn hermitian_from(coeffs: &[BigRational], d: usize) -> RationalMatrix {
    let mut m = RationalMatrix::zeros(d);
    let mut it = coeffs.iter().cloned();
    for i in 0..d {
        m.set(i, i, g_real(it.next().expect("d² coefficients")));
    }
    for i in 0..d {
        for j in 0..i {
            let z = Complex::new(it.next().expect("d² coefficients"), it.next().expect("d² coefficients"));
            m.set(j, i, z.conj());
            m.set(i, j, z);
        }
    }
    m
}

/// Turns a rational near-POVM into an exact POVM: far inputs are rounded in
/// floating point and re-rationalized at denominator `2q`; the last effect is
/// then set to `I − Σ others`, and the family is mixed toward `I/k` with
/// weight `t ∈ {0, 2^-10, …, 1/2, 1}` until every effect is exactly PSD.
pub fn exact_povm(raw: Vec<RationalMatrix>, denom: u64) -> Vec<RationalMatrix> {
    if is_exact_povm(&raw) {
        return raw;
    }
    let k = raw.len();
    let d = raw[0].dim();
    let floats: Vec<HermMatrix> = raw.iter().map(|m| HermMatrix::symmetrize(m.to_cmatrix())).collect();
    let far = phi_k_eval(&floats).map_or(true, |phi| phi > ROUNDING_THRESHOLD);
    let mut effs = match far.then(|| round_to_povm(&floats)) {
        Some(Ok(r)) => {
            let den = BigInt::from(2 * denom);
            r.povm
                .effects()
                .iter()
                .map(|e| RationalMatrix::round_hermitian(e.as_matrix(), &den))
                .collect()
        }
        _ => raw,
    };
    let partial = effs[..k - 1].iter().fold(RationalMatrix::zeros(d), |s, e| s.add(e));
    effs[k - 1] = RationalMatrix::identity(d).sub(&partial);
    if effs.iter().all(RationalMatrix::is_psd) {
        return effs;
    }
    let flat = RationalMatrix::scalar(d, BigRational::new(BigInt::one(), BigInt::from(k)));
    let mut t = BigRational::new(BigInt::one(), BigInt::from(1024));
    while t < BigRational::one() {
        let keep = BigRational::one() - &t;
        let mixed: Vec<RationalMatrix> = effs.iter().map(|e| e.scale(&keep).add(&flat.scale(&t))).collect();
        if mixed.iter().all(RationalMatrix::is_psd) {
            return mixed;
        }
        t *= BigRational::from_integer(2.into());
    }
    vec![flat; k]
}

/// Decodes one index into a candidate for the shape of `g`.
pub fn candidate_at(g: &Game, index: u64) -> Candidate {
    let cursor = EnumerationCursor::decode(index);
    let (n, k, d) = (g.n(), g.k(), cursor.dim);
    let coeffs = cursor.coefficients(cursor.coefficient_count(n, k));
    let mut chunks = coeffs.chunks(d * d);
    let mut player = || -> Vec<Vec<RationalMatrix>> {
        (0..n)
            .map(|_| {
                let raw: Vec<RationalMatrix> = (0..k)
                    .map(|_| hermitian_from(chunks.next().expect("2nk blocks"), d))
                    .collect();
                exact_povm(raw, cursor.denom)
            })
            .collect()
    };
    let alice = player();
    let bob = player();
    Candidate { cursor, alice, bob }
}

/// Candidates for indices `start .. start + batch`.
pub fn enumerate_rational_pairs(g: &Game, start: u64, batch: usize) -> Vec<Candidate> {
    (0..batch as u64)
        .filter_map(|o| start.checked_add(o))
        .map(|i| candidate_at(g, i))
        .collect()
}
