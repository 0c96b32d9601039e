//! Exact linear algebra over the Gaussian rationals.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use num_complex::{Complex, Complex64};

use crate::operator::CMatrix;
use crate::textfmt::{format_gauss, GaussRational};

pub(crate) fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn g_zero() -> GaussRational {
    Complex::new(BigRational::zero(), BigRational::zero())
}

pub(crate) fn g_real(r: BigRational) -> GaussRational {
    Complex::new(r, BigRational::zero())
}

/// Nearest `k / denom` to `x`, ties away from zero.
pub fn rational_near(x: f64, denom: &BigInt) -> BigRational {
    let scaled = x * denom.to_f64().unwrap_or(f64::MAX);
    let k = BigInt::from(scaled.round() as i128);
    BigRational::new(k, denom.clone())
}

/// A rational `s ≥ √x` for `x ≥ 0`, within a relative `2^-40` or so.
pub fn upper_sqrt(x: &BigRational) -> BigRational {
    if !x.is_positive() {
        return BigRational::zero();
    }
    let approx = x.to_f64().unwrap_or(f64::MAX).sqrt();
    let mut s = BigRational::from_float(approx).unwrap_or_else(BigRational::one);
    let bump = q(1, 1 << 40);
    let floor = BigRational::new(BigInt::one(), BigInt::one() << 200);
    while &(&s * &s) < x {
        s = &s * (BigRational::one() + &bump) + &floor;
    }
    s
}

/// Square matrix of Gaussian rationals, row-major. `BigRational` keeps every
/// component in lowest terms with a positive denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    dim: usize,
    entries: Vec<GaussRational>,
}

impl RationalMatrix {
    pub fn zeros(dim: usize) -> Self {
        RationalMatrix {
            dim,
            entries: vec![g_zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, BigRational::one())
    }

    pub fn scalar(dim: usize, s: BigRational) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = g_real(s.clone());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> GaussRational) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        RationalMatrix { dim, entries }
    }

    /// Rows of literals, as read from a matrix block.
    pub fn from_rows(rows: Vec<Vec<GaussRational>>) -> Self {
        let dim = rows.len();
        RationalMatrix {
            dim,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    /// Rounds a Hermitian float matrix to denominator `denom`, reading the
    /// lower triangle and the real diagonal so the result is exactly Hermitian.
    pub fn round_hermitian(m: &CMatrix, denom: &BigInt) -> Self {
        let d = m.nrows();
        let mut out = Self::zeros(d);
        for i in 0..d {
            out.set(i, i, g_real(rational_near(m[(i, i)].re, denom)));
            for j in 0..i {
                let z = Complex::new(rational_near(m[(i, j)].re, denom), rational_near(m[(i, j)].im, denom));
                out.set(j, i, z.conj());
                out.set(i, j, z);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &GaussRational {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: GaussRational) {
        self.entries[i * self.dim + j] = z;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[GaussRational]> {
        self.entries.chunks(self.dim)
    }

    pub fn add(&self, o: &Self) -> Self {
        RationalMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        RationalMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        RationalMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * g_real(s.clone())).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = self.dim;
        Self::from_fn(d, |i, j| {
            let mut s = g_zero();
            for l in 0..d {
                let (a, b) = (self.get(i, l), o.get(l, j));
                if !a.is_zero() && !b.is_zero() {
                    s += a * b;
                }
            }
            s
        })
    }

    pub fn mul_vec(&self, v: &[GaussRational]) -> Vec<GaussRational> {
        self.rows()
            .map(|row| {
                row.iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(g_zero(), |s, (a, b)| s + a * b)
            })
            .collect()
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|i| (0..=i).all(|j| *self.get(i, j) == self.get(j, i).conj()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|z| z.is_zero())
    }

    /// `Σ |m_ij|²`.
    pub fn frobenius_sq(&self) -> BigRational {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
        CMatrix::from_fn(self.dim, self.dim, |i, j| {
            let z = self.get(i, j);
            Complex64::new(f(&z.re), f(&z.im))
        })
    }

    /// Exact positive semidefiniteness of a Hermitian matrix by symmetric
    /// Gaussian elimination: a negative pivot, or a zero pivot with a nonzero
    /// row, rules it out.
    pub fn is_psd(&self) -> bool {
        if !self.is_hermitian() {
            return false;
        }
        let d = self.dim;
        let mut a = self.entries.clone();
        for i in 0..d {
            let p = a[i * d + i].re.clone();
            if p.is_negative() {
                return false;
            }
            if p.is_zero() {
                if (i + 1..d).any(|j| !a[i * d + j].is_zero()) {
                    return false;
                }
                continue;
            }
            let inv = g_real(BigRational::one() / p);
            for j in i + 1..d {
                if a[j * d + i].is_zero() {
                    continue;
                }
                let factor = &a[j * d + i] * &inv;
                for l in i + 1..d {
                    if a[i * d + l].is_zero() {
                        continue;
                    }
                    let delta = &factor * &a[i * d + l];
                    a[j * d + l] = &a[j * d + l] - delta;
                }
            }
        }
        true
    }

    pub fn write(&self, out: &mut String) {
        out.push_str(&format!("dim {}\n", self.dim));
        for row in self.rows() {
            let toks: Vec<String> = row.iter().map(format_gauss).collect();
            out.push_str(&toks.join(" "));
            out.push('\n');
        }
    }
}

/// `Σ conj(u_i) v_i`.
pub fn inner(u: &[GaussRational], v: &[GaussRational]) -> GaussRational {
    u.iter().zip(v).fold(g_zero(), |s, (a, b)| s + a.conj() * b)
}

/// Exact POVM check: every effect Hermitian and PSD, and the effects sum to `I`.
pub fn is_exact_povm(effects: &[RationalMatrix]) -> bool {
    let Some(first) = effects.first() else {
        return false;
    };
    let d = first.dim();
    if effects.iter().any(|e| e.dim() != d) {
        return false;
    }
    let total = effects.iter().skip(1).fold(first.clone(), |s, e| s.add(e));
    total == RationalMatrix::identity(d) && effects.iter().all(RationalMatrix::is_psd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[i64]], den: i64) -> RationalMatrix {
        RationalMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| g_real(q(x, den))).collect())
                .collect(),
        )
    }

    #[test]
    fn psd_decisions() {
        assert!(real(&[&[2, 1], &[1, 2]], 1).is_psd());
        assert!(real(&[&[1, 1], &[1, 1]], 1).is_psd());
        assert!(!real(&[&[1, 2], &[2, 1]], 1).is_psd());
        assert!(real(&[&[0, 0], &[0, 3]], 1).is_psd());
        assert!(!real(&[&[0, 1], &[1, 3]], 1).is_psd());
        assert!(!real(&[&[-1, 0], &[0, 3]], 1).is_psd());
        let mut c = RationalMatrix::identity(2);
        c.set(0, 1, Complex::new(BigRational::zero(), BigRational::one()));
        c.set(1, 0, Complex::new(BigRational::zero(), -BigRational::one()));
        assert!(c.is_psd());
        c.set(0, 0, g_real(q(1, 2)));
        assert!(!c.is_psd());
    }

    #[test]
    fn psd_agrees_with_eigenvalues() {
        use crate::operator::{eig_herm, HermMatrix};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        for _ in 0..200 {
            let d = rng.random_range(1..4);
            let mut m = RationalMatrix::zeros(d);
            for i in 0..d {
                m.set(i, i, g_real(q(rng.random_range(-2..6), 2)));
                for j in 0..i {
                    let z = Complex::new(q(rng.random_range(-3..4), 3), q(rng.random_range(-3..4), 3));
                    m.set(j, i, z.conj());
                    m.set(i, j, z);
                }
            }
            let lmin = eig_herm(&HermMatrix::new(m.to_cmatrix()).unwrap())
                .unwrap()
                .min_eigenvalue();
            if lmin.abs() > 1e-9 {
                assert_eq!(m.is_psd(), lmin > 0.0, "{m:?} {lmin}");
            }
        }
    }

    #[test]
    fn upper_sqrt_is_tight_upper_bound() {
        for (n, d) in [(2, 1), (1, 3), (0, 1), (49, 16), (1, 1 << 40)] {
            let x = q(n, d);
            let s = upper_sqrt(&x);
            assert!(&s * &s >= x);
            let sf = s.to_f64().unwrap();
            assert!(sf - (n as f64 / d as f64).sqrt() <= 1e-9 * sf.max(1e-12) + 1e-12);
        }
    }

    #[test]
    fn rounding_is_hermitian() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.3, 0.0),
                Complex64::new(0.1, -0.27),
                Complex64::new(0.1, 0.27),
                Complex64::new(-0.6, 0.0),
            ],
        );
        let r = RationalMatrix::round_hermitian(&m, &BigInt::from(8));
        assert!(r.is_hermitian());
        assert_eq!(*r.get(1, 0), Complex::new(q(1, 8), q(2, 8)));
    }

    #[test]
    fn products_and_povms() {
        let a = real(&[&[1, 0], &[0, 0]], 1);
        let b = real(&[&[0, 0], &[0, 1]], 1);
        assert!(a.mul(&b).is_zero());
        assert!(is_exact_povm(&[a.clone(), b.clone()]));
        assert!(!is_exact_povm(&[a.clone(), a.clone()]));
        let v = vec![g_real(q(1, 2)), g_real(q(3, 2))];
        assert_eq!(inner(&v, &b.mul_vec(&v)), g_real(q(9, 4)));
    }
}
