//! Line-oriented text helpers shared by the game, strategy and witness files.
//!
//! Matrix block format:
//!
//! ```text
//! dim 2
//! 1/2 1/4-1/4i
//! 1/4+1/4i 0.5
//! ```
//!
//! Each entry is `re`, `imi`, `re+imi` or `re-imi`; components are decimals
//! (optionally with an exponent) or rationals `p/q`.

use std::fmt::Write as _;
use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::operator::CMatrix;

pub type GaussRational = Complex<BigRational>;

/// A parsed real component, kept in its literal form so floats round-trip
/// bit-exactly and rationals stay exact.
#[derive(Clone, Debug, PartialEq)]
pub enum RealLiteral {
    Decimal(String),
    Ratio(BigInt, BigInt),
}

impl RealLiteral {
    pub fn to_f64(&self) -> f64 {
        match self {
            RealLiteral::Decimal(s) => s.parse().expect("validated decimal"),
            RealLiteral::Ratio(p, q) => ratio_to_f64(&BigRational::new(p.clone(), q.clone())),
        }
    }

    pub fn to_rational(&self) -> BigRational {
        match self {
            RealLiteral::Decimal(s) => decimal_to_rational(s).expect("validated decimal"),
            RealLiteral::Ratio(p, q) => BigRational::new(p.clone(), q.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLiteral {
    pub re: RealLiteral,
    pub im: RealLiteral,
}

impl ComplexLiteral {
    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn to_gauss(&self) -> GaussRational {
        Complex::new(self.re.to_rational(), self.im.to_rational())
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // extreme magnitudes: fall back to a scaled quotient
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn decimal_to_rational(s: &str) -> Option<BigRational> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num = BigInt::from_str(&digits).ok()?;
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num::pow(ten, (-scale) as usize))
    };
    Some(r)
}

/// Parses a real literal: decimal or `p/q`.
pub fn parse_real(s: &str) -> Option<RealLiteral> {
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.strip_prefix('+').unwrap_or(p)).ok()?;
        let q = BigInt::from_str(q).ok()?;
        if q.is_zero() || q.is_negative() {
            return None;
        }
        return Some(RealLiteral::Ratio(p, q));
    }
    decimal_to_rational(s)?;
    Some(RealLiteral::Decimal(s.to_string()))
}

/// Parses a rational `p/q` or an integer. Decimals are accepted and converted exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    parse_real(s).map(|r| r.to_rational())
}

fn zero_literal() -> RealLiteral {
    RealLiteral::Ratio(BigInt::zero(), BigInt::one())
}

/// Parses one complex entry.
pub fn parse_complex(s: &str) -> Option<ComplexLiteral> {
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not the leading one and not part of an exponent
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            if (bytes[idx] == b'+' || bytes[idx] == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
                split = Some(idx);
                break;
            }
        }
        return match split {
            Some(idx) => {
                let re = parse_real(&body[..idx])?;
                let im_txt = &body[idx..];
                let im = match im_txt {
                    "+" => RealLiteral::Ratio(BigInt::one(), BigInt::one()),
                    "-" => RealLiteral::Ratio(-BigInt::one(), BigInt::one()),
                    _ => parse_real(im_txt)?,
                };
                Some(ComplexLiteral { re, im })
            }
            None => {
                let im = match body {
                    "" | "+" => RealLiteral::Ratio(BigInt::one(), BigInt::one()),
                    "-" => RealLiteral::Ratio(-BigInt::one(), BigInt::one()),
                    _ => parse_real(body)?,
                };
                Some(ComplexLiteral { re: zero_literal(), im })
            }
        };
    }
    Some(ComplexLiteral {
        re: parse_real(s)?,
        im: zero_literal(),
    })
}

/// A real rounded to 12 significant digits, printed without trailing zeros.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float");
    format_f64(rounded)
}

pub fn format_f64(x: f64) -> String {
    // Display is the shortest representation that round-trips, without exponent.
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub fn format_c64(z: Complex64) -> String {
    if z.im == 0.0 {
        format_f64(z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", format_f64(z.re), format_f64(-z.im))
    } else {
        format!("{}+{}i", format_f64(z.re), format_f64(z.im))
    }
}

pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Rationals always carry the explicit denominator, as in `3/4` or `1/1`.
pub fn format_rational_pq(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn format_gauss(z: &GaussRational) -> String {
    if z.im.is_zero() {
        format_rational(&z.re)
    } else if z.im.is_negative() {
        format!("{}-{}i", format_rational(&z.re), format_rational(&-z.im.clone()))
    } else {
        format!("{}+{}i", format_rational(&z.re), format_rational(&z.im))
    }
}

/// A `#`-comment-stripped, non-empty input line with its 1-based number.
#[derive(Clone, Debug)]
pub struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<&'a str>,
}

pub fn content_lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            (!tokens.is_empty()).then_some(Line { number: i + 1, tokens })
        })
        .collect()
}

pub fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, msg: msg.into() }
}

pub fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| syntax(line, format!("expected a nonnegative integer, got `{tok}`")))
}

/// Reads a matrix block starting at `lines[*pos]` (the `dim d` line) and
/// advances `pos` past it.
pub fn read_matrix_block(lines: &[Line<'_>], pos: &mut usize) -> Result<Vec<Vec<ComplexLiteral>>> {
    let header = lines
        .get(*pos)
        .ok_or_else(|| syntax(lines.last().map_or(0, |l| l.number), "expected `dim <d>`"))?;
    if header.tokens.len() != 2 || header.tokens[0] != "dim" {
        return Err(syntax(header.number, "expected `dim <d>`"));
    }
    let d = parse_usize(header.number, header.tokens[1])?;
    if d == 0 {
        return Err(syntax(header.number, "dimension must be positive"));
    }
    *pos += 1;
    let mut rows = Vec::with_capacity(d);
    for _ in 0..d {
        let line = lines
            .get(*pos)
            .ok_or_else(|| syntax(header.number, "matrix block ended early"))?;
        if line.tokens.len() != d {
            return Err(syntax(
                line.number,
                format!("expected {d} entries, found {}", line.tokens.len()),
            ));
        }
        let row = line
            .tokens
            .iter()
            .map(|t| parse_complex(t).ok_or_else(|| syntax(line.number, format!("bad entry `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        *pos += 1;
    }
    Ok(rows)
}

pub fn literal_rows_to_cmatrix(rows: &[Vec<ComplexLiteral>]) -> CMatrix {
    let d = rows.len();
    CMatrix::from_fn(d, d, |i, j| rows[i][j].to_c64())
}

pub fn write_cmatrix(out: &mut String, m: &CMatrix) {
    let _ = writeln!(out, "dim {}", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_c64(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let lines = content_lines(text);
    let mut pos = 0;
    let rows = read_matrix_block(&lines, &mut pos)?;
    if let Some(extra) = lines.get(pos) {
        return Err(syntax(extra.number, "trailing content after matrix"));
    }
    Ok(literal_rows_to_cmatrix(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_entries() {
        let z = parse_complex("1/2+3/4i").unwrap();
        assert_eq!(z.to_c64(), Complex64::new(0.5, 0.75));
        let z = parse_complex("-0.25-1e-3i").unwrap();
        assert_eq!(z.to_c64(), Complex64::new(-0.25, -1e-3));
        let z = parse_complex("2e-3").unwrap();
        assert_eq!(z.to_c64(), Complex64::new(2e-3, 0.0));
        let z = parse_complex("1e-3+1e+2i").unwrap();
        assert_eq!(z.to_c64(), Complex64::new(1e-3, 100.0));
        let z = parse_complex("-i").unwrap();
        assert_eq!(z.to_c64(), Complex64::new(0.0, -1.0));
        let z = parse_complex("3/7i").unwrap();
        assert_eq!(z.to_gauss().im, BigRational::new(3.into(), 7.into()));
        assert!(parse_complex("abc").is_none());
        assert!(parse_complex("1/0").is_none());
        assert!(parse_complex("1+").is_none());
    }

    #[test]
    fn decimals_are_exact_rationals() {
        let r = parse_rational("0.125").unwrap();
        assert_eq!(r, BigRational::new(1.into(), 8.into()));
        let r = parse_rational("-1.5e2").unwrap();
        assert_eq!(r, BigRational::from_integer((-150).into()));
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-17, 123456.789, std::f64::consts::PI] {
            let z = Complex64::new(x, -x / 7.0);
            let back = parse_complex(&format_c64(z)).unwrap().to_c64();
            assert_eq!(back, z);
        }
    }

    #[test]
    fn matrix_block() {
        let m = parse_matrix("# comment\ndim 2\n1 1/2-1/2i\n1/2+1/2i 0\n").unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(0.5, -0.5));
        let mut out = String::new();
        write_cmatrix(&mut out, &m);
        assert_eq!(parse_matrix(&out).unwrap(), m);
        assert!(matches!(parse_matrix("dim 2\n1 0\n"), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_matrix("dim 2\n1 0 0\n0 1\n"),
            Err(Error::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(0.8535533905932737), "0.853553390593");
        assert_eq!(format_sig(0.75), "0.75");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(1234567.891234567), "1234567.89123");
    }
}
