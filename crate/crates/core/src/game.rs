//! Nonlocal games `(π, D)` with `n` questions and `k` answers per player.
//!
//! The question distribution is stored exactly over question *pairs*; the
//! predicate is stored as bytes so that corrupted tables can still be built
//! and reported by [`Game::validate`]. The in-memory API is 0-based, the file
//! format is 1-based.
//!
//! File grammar (`#` starts a comment):
//!
//! ```text
//! game chsh
//! n 2
//! k 2
//! pi 1 1 1/4
//! D 1 1 1 1 1
//! end
//! ```

use std::fmt::{self, Write as _};

use num::{BigRational, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::textfmt::{content_lines, format_rational_pq, parse_rational, parse_usize, syntax};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Game {
    name: String,
    n: usize,
    k: usize,
    pi: Vec<BigRational>,
    predicate: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyDimensions {
        n: usize,
        k: usize,
    },
    NegativeMass {
        x: usize,
        y: usize,
    },
    Mass(BigRational),
    NonBinary {
        x: usize,
        y: usize,
        a: usize,
        b: usize,
        value: u8,
    },
    TableSize {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDimensions { n, k } => write!(f, "dimensions n={n} k={k} must be positive"),
            Violation::NegativeMass { x, y } => write!(f, "negative mass at pi({}, {})", x + 1, y + 1),
            Violation::Mass(m) => write!(f, "mass {}", crate::textfmt::format_rational(m)),
            Violation::NonBinary { x, y, a, b, value } => write!(
                f,
                "non-binary predicate D({}, {}, {}, {}) = {value}",
                x + 1,
                y + 1,
                a + 1,
                b + 1
            ),
            Violation::TableSize { expected, found } => {
                write!(f, "table has {found} entries, expected {expected}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "invalid: {}", parts.join("; "))
    }
}

impl Game {
    /// Builds and validates a game. `pi` is row-major over `(x, y)`, the
    /// predicate row-major over `(x, y, a, b)`.
    pub fn new(name: impl Into<String>, n: usize, k: usize, pi: Vec<BigRational>, predicate: Vec<u8>) -> Result<Self> {
        let g = Game::from_raw(name, n, k, pi, predicate);
        let report = g.validate();
        if report.is_valid() {
            Ok(g)
        } else {
            Err(Error::InvalidGame(report.to_string()))
        }
    }

    /// Builds a game without checking any invariant.
    pub fn from_raw(name: impl Into<String>, n: usize, k: usize, pi: Vec<BigRational>, predicate: Vec<u8>) -> Self {
        Game {
            name: name.into(),
            n,
            k,
            pi,
            predicate,
        }
    }

    /// Uniform question distribution with a predicate built from `win`.
    pub fn uniform(
        name: impl Into<String>,
        n: usize,
        k: usize,
        win: impl Fn(usize, usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let mass = BigRational::new(1.into(), ((n * n) as i64).into());
        let mut predicate = Vec::with_capacity(n * n * k * k);
        for x in 0..n {
            for y in 0..n {
                for a in 0..k {
                    for b in 0..k {
                        predicate.push(u8::from(win(x, y, a, b)));
                    }
                }
            }
        }
        Game::new(name, n, k, vec![mass; n * n], predicate)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pi(&self, x: usize, y: usize) -> &BigRational {
        &self.pi[x * self.n + y]
    }

    pub fn pi_f64(&self, x: usize, y: usize) -> f64 {
        crate::textfmt::ratio_to_f64(self.pi(x, y))
    }

    fn pred_index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.n + y) * self.k + a) * self.k + b
    }

    pub fn predicate(&self, x: usize, y: usize, a: usize, b: usize) -> u8 {
        self.predicate[self.pred_index(x, y, a, b)]
    }

    pub fn wins(&self, x: usize, y: usize, a: usize, b: usize) -> bool {
        self.predicate(x, y, a, b) == 1
    }

    pub fn set_pi(&mut self, x: usize, y: usize, p: BigRational) {
        let n = self.n;
        self.pi[x * n + y] = p;
    }

    pub fn set_predicate(&mut self, x: usize, y: usize, a: usize, b: usize, value: u8) {
        let idx = self.pred_index(x, y, a, b);
        self.predicate[idx] = value;
    }

    pub fn predicate_table(&self) -> &[u8] {
        &self.predicate
    }

    /// Checks the mass-one and binary-predicate invariants, listing every violation.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.n == 0 || self.k == 0 {
            violations.push(Violation::EmptyDimensions { n: self.n, k: self.k });
        }
        let (np, nd) = (self.n * self.n, self.n * self.n * self.k * self.k);
        if self.pi.len() != np {
            violations.push(Violation::TableSize {
                expected: np,
                found: self.pi.len(),
            });
        }
        if self.predicate.len() != nd {
            violations.push(Violation::TableSize {
                expected: nd,
                found: self.predicate.len(),
            });
        }
        if !violations.is_empty() {
            return ValidationReport { violations };
        }
        for x in 0..self.n {
            for y in 0..self.n {
                if self.pi(x, y).is_negative() {
                    violations.push(Violation::NegativeMass { x, y });
                }
            }
        }
        let mass: BigRational = self.pi.iter().cloned().sum();
        if !mass.is_one() {
            violations.push(Violation::Mass(mass));
        }
        for x in 0..self.n {
            for y in 0..self.n {
                for a in 0..self.k {
                    for b in 0..self.k {
                        let value = self.predicate(x, y, a, b);
                        if value > 1 {
                            violations.push(Violation::NonBinary { x, y, a, b, value });
                        }
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "game {}", self.name);
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "k {}", self.k);
        for x in 0..self.n {
            for y in 0..self.n {
                let p = self.pi(x, y);
                if !p.is_zero() {
                    let _ = writeln!(out, "pi {} {} {}", x + 1, y + 1, format_rational_pq(p));
                }
            }
        }
        for x in 0..self.n {
            for y in 0..self.n {
                for a in 0..self.k {
                    for b in 0..self.k {
                        let v = self.predicate(x, y, a, b);
                        if v != 0 {
                            let _ = writeln!(out, "D {} {} {} {} {v}", x + 1, y + 1, a + 1, b + 1);
                        }
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines = content_lines(text);
        let mut iter = lines.iter().peekable();
        let mut expect_kw = |kw: &str| -> Result<(usize, Vec<String>)> {
            let line = iter
                .next()
                .ok_or_else(|| syntax(0, format!("unexpected end of input, expected `{kw}`")))?;
            if line.tokens[0] != kw {
                return Err(syntax(
                    line.number,
                    format!("expected `{kw}`, found `{}`", line.tokens[0]),
                ));
            }
            Ok((line.number, line.tokens[1..].iter().map(|s| s.to_string()).collect()))
        };
        let (ln, rest) = expect_kw("game")?;
        if rest.len() != 1 {
            return Err(syntax(ln, "expected `game <name>`"));
        }
        let name = rest[0].clone();
        let (ln, rest) = expect_kw("n")?;
        if rest.len() != 1 {
            return Err(syntax(ln, "expected `n <int>`"));
        }
        let n = parse_usize(ln, &rest[0])?;
        let (ln, rest) = expect_kw("k")?;
        if rest.len() != 1 {
            return Err(syntax(ln, "expected `k <int>`"));
        }
        let k = parse_usize(ln, &rest[0])?;
        if n == 0 || k == 0 {
            return Err(syntax(ln, "n and k must be positive"));
        }
        let mut pi = vec![BigRational::zero(); n * n];
        let mut predicate = vec![0u8; n * n * k * k];
        let index = |line: usize, tok: &str, bound: usize, what: &str| -> Result<usize> {
            let v = parse_usize(line, tok)?;
            if v == 0 || v > bound {
                return Err(syntax(line, format!("{what} index {v} out of range 1..={bound}")));
            }
            Ok(v - 1)
        };
        let mut ended = false;
        for line in iter {
            if ended {
                return Err(syntax(line.number, "content after `end`"));
            }
            let t = &line.tokens;
            match t[0] {
                "pi" => {
                    if t.len() != 4 {
                        return Err(syntax(line.number, "expected `pi <x> <y> <p/q>`"));
                    }
                    let x = index(line.number, t[1], n, "question")?;
                    let y = index(line.number, t[2], n, "question")?;
                    let p = parse_rational(t[3])
                        .ok_or_else(|| syntax(line.number, format!("bad probability `{}`", t[3])))?;
                    pi[x * n + y] = p;
                }
                "D" => {
                    if t.len() != 6 {
                        return Err(syntax(line.number, "expected `D <x> <y> <a> <b> <0|1>`"));
                    }
                    let x = index(line.number, t[1], n, "question")?;
                    let y = index(line.number, t[2], n, "question")?;
                    let a = index(line.number, t[3], k, "answer")?;
                    let b = index(line.number, t[4], k, "answer")?;
                    let v = match t[5] {
                        "0" => 0,
                        "1" => 1,
                        other => return Err(syntax(line.number, format!("predicate value `{other}` is not 0 or 1"))),
                    };
                    predicate[((x * n + y) * k + a) * k + b] = v;
                }
                "end" => {
                    if t.len() != 1 {
                        return Err(syntax(line.number, "unexpected tokens after `end`"));
                    }
                    ended = true;
                }
                other => return Err(syntax(line.number, format!("unknown keyword `{other}`"))),
            }
        }
        if !ended {
            return Err(syntax(lines.last().map_or(0, |l| l.number), "missing `end`"));
        }
        Game::new(name, n, k, pi, predicate)
    }
}

/// CHSH: with 0-based answers and questions, win iff `a ⊕ b = x·y`.
pub fn make_chsh() -> Game {
    Game::uniform("chsh", 2, 2, |x, y, a, b| (a ^ b) == (x & y)).expect("chsh is well formed")
}

/// Game whose predicate is constant `value` (every strategy wins, or none does).
pub fn constant_game(name: &str, n: usize, k: usize, value: bool) -> Game {
    Game::uniform(name, n, k, |_, _, _, _| value).expect("constant game is well formed")
}

/// Uniform question distribution; each predicate slot is 1 with probability
/// `win_density`, drawn from a ChaCha stream keyed by `seed`.
pub fn random_game(seed: u64, n: usize, k: usize, win_density: f64) -> Result<Game> {
    if !(0.0..=1.0).contains(&win_density) {
        return Err(Error::Config(format!("win density {win_density} outside [0, 1]")));
    }
    if n == 0 || k == 0 {
        return Err(Error::Config("n and k must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots: Vec<bool> = (0..n * n * k * k).map(|_| rng.random::<f64>() < win_density).collect();
    Game::uniform(format!("random-{seed}"), n, k, |x, y, a, b| {
        slots[((x * n + y) * k + a) * k + b]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    #[test]
    fn chsh_shape() {
        let g = make_chsh();
        assert_eq!((g.n(), g.k()), (2, 2));
        assert_eq!(g.predicate(0, 0, 0, 0), 1);
        assert_eq!(g.predicate(1, 1, 0, 0), 0);
        assert_eq!(g.predicate(1, 1, 0, 1), 1);
        let total: u32 = g.predicate_table().iter().map(|&v| v as u32).sum();
        // exactly half of the 16 slots win
        assert_eq!(g.predicate_table().len(), 16);
        assert_eq!(total, 8);
        assert_eq!(*g.pi(1, 1), q(1, 4));
        assert!(g.validate().is_valid());
    }

    #[test]
    fn validate_catches_mass_and_predicate() {
        let g = make_chsh();
        let mut doubled = g.clone();
        for x in 0..2 {
            for y in 0..2 {
                doubled.set_pi(x, y, q(1, 2));
            }
        }
        let r = doubled.validate();
        assert_eq!(r.violations, vec![Violation::Mass(q(2, 1))]);
        assert_eq!(r.to_string(), "invalid: mass 2");

        let mut bad = g.clone();
        bad.set_predicate(0, 1, 1, 0, 3);
        let r = bad.validate();
        assert_eq!(
            r.violations,
            vec![Violation::NonBinary {
                x: 0,
                y: 1,
                a: 1,
                b: 0,
                value: 3
            }]
        );
        assert!(r.to_string().contains("non-binary predicate D(1, 2, 2, 1) = 3"));
    }

    #[test]
    fn round_trip_chsh() {
        let g = make_chsh();
        assert_eq!(Game::parse(&g.serialize()).unwrap(), g);
    }

    #[test]
    fn empty_predicate_section() {
        let g = Game::parse("game z\nn 1\nk 2\npi 1 1 1\nend\n").unwrap();
        assert!(g.predicate_table().iter().all(|&v| v == 0));
    }

    #[test]
    fn parse_errors() {
        let err = Game::parse("game z\nn 2\nk 2\npi 3 1 1\nend\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 4, .. }), "{err:?}");
        let err = Game::parse("game z\nn 1\nk 1\npi 1 1 1/2\nend\n").unwrap_err();
        assert!(matches!(err, Error::InvalidGame(_)), "{err:?}");
        let err = Game::parse("game z\nn 1\nk 1\npi 1 1 1\nD 1 1 1 1 2\nend\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 5, .. }), "{err:?}");
        let err = Game::parse("game z\nn 1\nk 1\npi 1 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }), "{err:?}");
        let err = Game::parse("game z\nn 1\nk 1\npi 1 1 1\nend\npi 1 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 6, .. }), "{err:?}");
    }

    #[test]
    fn comments_are_ignored() {
        let g = Game::parse("# header\ngame c # name\nn 1\nk 1\n\npi 1 1 1/1\nD 1 1 1 1 1 # win\nend\n").unwrap();
        assert!(g.wins(0, 0, 0, 0));
    }

    #[test]
    fn random_game_extremes_and_determinism() {
        let all = random_game(3, 2, 3, 1.0).unwrap();
        assert!(all.predicate_table().iter().all(|&v| v == 1));
        let none = random_game(3, 2, 3, 0.0).unwrap();
        assert!(none.predicate_table().iter().all(|&v| v == 0));
        assert_eq!(random_game(11, 3, 2, 0.4).unwrap(), random_game(11, 3, 2, 0.4).unwrap());
        assert!(random_game(0, 2, 2, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(seed in any::<u64>(), n in 1usize..4, k in 1usize..4, dens in 0.0f64..=1.0) {
            let g = random_game(seed, n, k, dens).unwrap();
            prop_assert_eq!(Game::parse(&g.serialize()).unwrap(), g);
        }

        #[test]
        fn single_corruption_is_caught(seed in any::<u64>(), slot in any::<prop::sample::Index>(), val in 2u8..=255, which in any::<bool>()) {
            let g = random_game(seed, 2, 2, 0.5).unwrap();
            prop_assert!(g.validate().is_valid());
            let mut bad = g.clone();
            if which {
                let i = slot.index(16);
                let (x, y, a, b) = (i / 8, (i / 4) % 2, (i / 2) % 2, i % 2);
                bad.set_predicate(x, y, a, b, val);
            } else {
                let i = slot.index(4);
                let cur = bad.pi(i / 2, i % 2).clone();
                bad.set_pi(i / 2, i % 2, cur + q(val as i64, 1000));
            }
            prop_assert!(!bad.validate().is_valid());
        }
    }
}
