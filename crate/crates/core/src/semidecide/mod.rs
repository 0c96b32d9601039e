//! One-sided search for certified high-value almost-commuting strategies.
//!
//! Candidates come from a fixed enumeration of rational measurement pairs.
//! A candidate is accepted once its operator defect is below `δ` and an
//! exactly recomputed Rayleigh quotient of its game operator exceeds `1/2`.
//! The search never rejects: exhausting the budget is reported as a timeout.

mod certify;
mod enumerate;
mod rational;

use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed};
use rayon::prelude::*;

pub use certify::{
    certify_norm, exact_rayleigh_bound, rationalize_vector, NormCertificate, MAX_POWER_ITERS, MIN_POWER_ITERS,
    RESIDUAL_TARGET,
};
pub use enumerate::{
    candidate_at, enumerate_rational_pairs, exact_povm, to_family, Candidate, EnumerationCursor, ENTRY_BOUND,
    ROUNDING_THRESHOLD,
};
pub use rational::{inner, is_exact_povm, rational_near, upper_sqrt, RationalMatrix};

use crate::error::{Error, Result};
use crate::game::{constant_game, make_chsh, Game};
use crate::operator::commutator_raw;
use crate::strategy::skew_norm;
use crate::textfmt::{
    content_lines, format_f64, format_gauss, format_rational_pq, parse_complex, parse_rational, parse_usize,
    read_matrix_block, syntax, GaussRational, Line,
};

/// Guard band subtracted from `δ` before the floating-point defect test.
pub const DEFECT_GUARD: f64 = 1e-9;
/// Candidates examined together; the lowest accepting index in a batch wins.
pub const BATCH: usize = 64;

type Compiler = dyn Fn(&str) -> Result<Game> + Send + Sync;
type DeltaFn = dyn Fn(usize) -> BigRational + Send + Sync;

/// A map from bit strings to games together with a tolerance schedule.
#[derive(Clone)]
pub struct LanguageFamily {
    name: String,
    compiler: Arc<Compiler>,
    delta_fn: Arc<DeltaFn>,
}

impl fmt::Debug for LanguageFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LanguageFamily")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl LanguageFamily {
    pub fn new(
        name: impl Into<String>,
        compiler: impl Fn(&str) -> Result<Game> + Send + Sync + 'static,
        delta_fn: impl Fn(usize) -> BigRational + Send + Sync + 'static,
    ) -> Self {
        LanguageFamily {
            name: name.into(),
            compiler: Arc::new(compiler),
            delta_fn: Arc::new(delta_fn),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The game for `z`, which must be a string over `{0, 1}`.
    pub fn compile(&self, z: &str) -> Result<Game> {
        check_bits(z)?;
        (self.compiler)(z)
    }

    /// `δ(|z|)`, checked to lie in `[0, 1]`.
    pub fn delta(&self, len: usize) -> Result<BigRational> {
        let d = (self.delta_fn)(len);
        if d.is_negative() || d > BigRational::one() {
            return Err(Error::Config(format!(
                "family `{}` gives delta {} outside [0, 1]",
                self.name,
                format_rational_pq(&d)
            )));
        }
        Ok(d)
    }
}

fn check_bits(z: &str) -> Result<()> {
    if z.chars().all(|c| c == '0' || c == '1') {
        Ok(())
    } else {
        Err(Error::Config(format!("`{z}` is not a bit string")))
    }
}

fn tenth() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(10))
}

/// Parity of `z` is its first bit (the empty string has parity 0). Parity 0
/// compiles to a two-question game that is always won, parity 1 to one that
/// is never won. `δ ≡ 1/10`.
pub fn toy_language_family() -> LanguageFamily {
    LanguageFamily::new(
        "toy",
        |z: &str| {
            let win = !z.starts_with('1');
            Ok(constant_game(if win { "toy-win" } else { "toy-lose" }, 2, 2, win))
        },
        |_| tenth(),
    )
}

/// Every `z` compiles to the same game with the constant tolerance `delta`.
pub fn constant_family(name: impl Into<String>, game: Game, delta: BigRational) -> LanguageFamily {
    LanguageFamily::new(name, move |_: &str| Ok(game.clone()), move |_| delta.clone())
}

/// CHSH for every `z`, `δ ≡ 1/10`.
pub fn chsh_family() -> LanguageFamily {
    constant_family("chsh", make_chsh(), tenth())
}

pub fn family_by_name(name: &str) -> Result<LanguageFamily> {
    match name {
        "toy" => Ok(toy_language_family()),
        "chsh" => Ok(chsh_family()),
        other => Err(Error::Config(format!(
            "unknown family `{other}` (expected toy or chsh)"
        ))),
    }
}

/// A certified accepting candidate; self-contained for [`verify_witness`].
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub family: String,
    pub z: String,
    pub index: u64,
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub delta: BigRational,
    pub alice: Vec<Vec<RationalMatrix>>,
    pub bob: Vec<Vec<RationalMatrix>>,
    pub vector: Vec<GaussRational>,
    /// Exact Rayleigh lower bound on `‖𝔊(A, B)‖`.
    pub bound: BigRational,
    pub defect_op_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Accept(Box<Witness>),
    /// The budget ran out after `examined` indices.
    Timeout {
        examined: u64,
    },
}

impl Outcome {
    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Outcome::Accept(w) => Some(w),
            Outcome::Timeout { .. } => None,
        }
    }
}

fn exactly_commuting(alice: &[Vec<RationalMatrix>], bob: &[Vec<RationalMatrix>]) -> bool {
    alice
        .iter()
        .flatten()
        .all(|a| bob.iter().flatten().all(|b| a.mul(b) == b.mul(a)))
}

/// Largest summed operator defect over question pairs, in floating point.
fn op_defect_max(alice: &[Vec<RationalMatrix>], bob: &[Vec<RationalMatrix>]) -> f64 {
    let fa: Vec<Vec<_>> = alice
        .iter()
        .map(|p| p.iter().map(RationalMatrix::to_cmatrix).collect())
        .collect();
    let fb: Vec<Vec<_>> = bob
        .iter()
        .map(|p| p.iter().map(RationalMatrix::to_cmatrix).collect())
        .collect();
    let mut worst = 0.0f64;
    for pa in &fa {
        for pb in &fb {
            let s: f64 = pa
                .iter()
                .flat_map(|a| pb.iter().map(move |b| skew_norm(&commutator_raw(a, b))))
                .sum();
            worst = worst.max(s);
        }
    }
    worst
}

/// `Some(defect)` when the pair is admissible at tolerance `δ`: exactly
/// commuting pairs have defect 0; others need `defect + guard < δ`.
fn admissible_defect(alice: &[Vec<RationalMatrix>], bob: &[Vec<RationalMatrix>], delta: &BigRational) -> Option<f64> {
    if exactly_commuting(alice, bob) {
        return delta.is_positive().then_some(0.0);
    }
    let d = op_defect_max(alice, bob);
    (d + DEFECT_GUARD < crate::textfmt::ratio_to_f64(delta)).then_some(d)
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

struct Accepted {
    vector: Vec<GaussRational>,
    bound: BigRational,
    defect: f64,
}

fn examine(g: &Game, delta: &BigRational, c: &Candidate) -> Result<Option<Accepted>> {
    let Some(defect) = admissible_defect(&c.alice, &c.bob, delta) else {
        return Ok(None);
    };
    let (fa, fb) = c.families()?;
    let cert = certify_norm(g, &fa, &fb)?;
    if cert.bound <= 0.5 {
        return Ok(None);
    }
    let vector = rationalize_vector(&cert.vector);
    let bound = exact_rayleigh_bound(g, &c.alice, &c.bob, &vector);
    Ok((bound > half()).then_some(Accepted { vector, bound, defect }))
}

fn build_witness(fam: &LanguageFamily, z: &str, g: &Game, delta: &BigRational, c: Candidate, acc: Accepted) -> Witness {
    Witness {
        family: fam.name().to_string(),
        z: z.to_string(),
        index: c.cursor.index,
        dim: c.cursor.dim,
        n: g.n(),
        k: g.k(),
        delta: delta.clone(),
        alice: c.alice,
        bob: c.bob,
        vector: acc.vector,
        bound: acc.bound,
        defect_op_max: acc.defect,
    }
}

/// Examines indices `0 .. budget` in order and accepts the first certified
/// candidate. Batches are checked in parallel; the outcome does not depend
/// on scheduling.
pub fn semidecide(fam: &LanguageFamily, z: &str, budget: u64) -> Result<Outcome> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let g = fam.compile(z)?;
    let delta = fam.delta(z.len())?;
    let mut start = 0u64;
    while start < budget {
        let len = (budget - start).min(BATCH as u64) as usize;
        let found = (0..len as u64)
            .into_par_iter()
            .map(|o| {
                let c = candidate_at(&g, start + o);
                Ok(examine(&g, &delta, &c)?.map(|acc| (c, acc)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some((c, acc)) = found.into_iter().flatten().next() {
            return Ok(Outcome::Accept(Box::new(build_witness(fam, z, &g, &delta, c, acc))));
        }
        start += len as u64;
    }
    Ok(Outcome::Timeout { examined: budget })
}

/// Re-derives the witness at `index` from the enumeration alone, if that
/// candidate is accepted.
pub fn replay(fam: &LanguageFamily, z: &str, index: u64) -> Result<Option<Witness>> {
    let g = fam.compile(z)?;
    let delta = fam.delta(z.len())?;
    let c = candidate_at(&g, index);
    Ok(examine(&g, &delta, &c)?.map(|acc| build_witness(fam, z, &g, &delta, c, acc)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check {
            name,
            passed,
            detail: detail.into(),
        });
        passed
    }
}

fn shape_ok(w: &Witness, g: &Game) -> bool {
    let fam_ok = |f: &[Vec<RationalMatrix>]| {
        f.len() == g.n() && f.iter().all(|p| p.len() == g.k() && p.iter().all(|e| e.dim() == w.dim))
    };
    w.n == g.n() && w.k == g.k() && w.dim >= 1 && fam_ok(&w.alice) && fam_ok(&w.bob) && w.vector.len() == w.dim
}

/// Rechecks a witness against a freshly compiled game: POVMs exactly,
/// defect strictly below `δ(|z|)` with the guard band, and the Rayleigh
/// bound recomputed in rational arithmetic and compared with `1/2`.
pub fn verify_witness(w: &Witness, fam: &LanguageFamily, z: &str) -> VerifyReport {
    let mut r = VerifyReport { checks: Vec::new() };
    if !r.push(
        "family",
        w.family == fam.name() && w.z == z,
        format!("{} / `{}`", w.family, w.z),
    ) {
        return r;
    }
    let g = match fam.compile(z) {
        Ok(g) => g,
        Err(e) => {
            r.push("compile", false, e.to_string());
            return r;
        }
    };
    let delta = match fam.delta(z.len()) {
        Ok(d) => d,
        Err(e) => {
            r.push("delta", false, e.to_string());
            return r;
        }
    };
    if !r.push("delta", w.delta == delta, format_rational_pq(&delta)) {
        return r;
    }
    if !r.push(
        "shape",
        shape_ok(w, &g),
        format!("n = {} k = {} dim = {}", g.n(), g.k(), w.dim),
    ) {
        return r;
    }
    let povms = w.alice.iter().chain(&w.bob).all(|p| is_exact_povm(p));
    if !r.push("povm", povms, "exact completeness and positivity") {
        return r;
    }
    let defect = admissible_defect(&w.alice, &w.bob, &delta);
    let detail = defect.map_or_else(|| "not below delta".to_string(), format_f64);
    if !r.push("defect", defect.is_some(), detail) {
        return r;
    }
    let bound = exact_rayleigh_bound(&g, &w.alice, &w.bob, &w.vector);
    if !r.push("bound_recomputed", bound == w.bound, format_rational_pq(&bound)) {
        return r;
    }
    r.push("bound_above_half", bound > half(), format_rational_pq(&bound));
    r
}

impl Witness {
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let z = if self.z.is_empty() { "-" } else { &self.z };
        out.push_str("witness\n");
        out.push_str(&format!("family {}\nz {z}\nindex {}\n", self.family, self.index));
        out.push_str(&format!("dim {}\nn {}\nk {}\n", self.dim, self.n, self.k));
        out.push_str(&format!("delta {}\n", format_rational_pq(&self.delta)));
        out.push_str(&format!("bound {}\n", format_rational_pq(&self.bound)));
        out.push_str(&format!("defect_op_max {}\n", format_f64(self.defect_op_max)));
        for (tag, fam) in [("A", &self.alice), ("B", &self.bob)] {
            for (x, p) in fam.iter().enumerate() {
                for (a, e) in p.iter().enumerate() {
                    out.push_str(&format!("effect {tag} {x} {a}\n"));
                    e.write(&mut out);
                }
            }
        }
        out.push_str("vector\n");
        let toks: Vec<String> = self.vector.iter().map(format_gauss).collect();
        out.push_str(&toks.join(" "));
        out.push_str("\nend\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines = content_lines(text);
        let mut pos = 0usize;
        let last = lines.last().map_or(0, |l| l.number);
        let mut next = |want: &str, arity: usize| -> Result<Line<'_>> {
            let line = lines
                .get(pos)
                .ok_or_else(|| syntax(last, format!("expected `{want}`")))?;
            if line.tokens[0] != want || line.tokens.len() != arity + 1 {
                return Err(syntax(line.number, format!("expected `{want}` with {arity} field(s)")));
            }
            pos += 1;
            Ok(line.clone())
        };
        next("witness", 0)?;
        let family = next("family", 1)?.tokens[1].to_string();
        let zl = next("z", 1)?;
        let z = match zl.tokens[1] {
            "-" => String::new(),
            s => {
                check_bits(s).map_err(|_| syntax(zl.number, "z must be a bit string or `-`"))?;
                s.to_string()
            }
        };
        let il = next("index", 1)?;
        let index = il.tokens[1]
            .parse::<u64>()
            .map_err(|_| syntax(il.number, "bad index"))?;
        let dl = next("dim", 1)?;
        let dim = parse_usize(dl.number, dl.tokens[1])?;
        let nl = next("n", 1)?;
        let n = parse_usize(nl.number, nl.tokens[1])?;
        let kl = next("k", 1)?;
        let k = parse_usize(kl.number, kl.tokens[1])?;
        let rat = |l: &Line<'_>| parse_rational(l.tokens[1]).ok_or_else(|| syntax(l.number, "expected p/q"));
        let delta = rat(&next("delta", 1)?)?;
        let bound = rat(&next("bound", 1)?)?;
        let fl = next("defect_op_max", 1)?;
        let defect_op_max = fl.tokens[1]
            .parse::<f64>()
            .map_err(|_| syntax(fl.number, "bad defect"))?;

        let mut read_family = |tag: &str| -> Result<Vec<Vec<RationalMatrix>>> {
            let mut fam = Vec::with_capacity(n);
            for x in 0..n {
                let mut p = Vec::with_capacity(k);
                for a in 0..k {
                    let line = lines.get(pos).ok_or_else(|| syntax(last, "expected an effect"))?;
                    let expect = [tag.to_string(), x.to_string(), a.to_string()];
                    if line.tokens.len() != 4 || line.tokens[0] != "effect" || line.tokens[1..] != expect {
                        return Err(syntax(line.number, format!("expected `effect {tag} {x} {a}`")));
                    }
                    pos += 1;
                    let rows = read_matrix_block(&lines, &mut pos)?;
                    if rows.len() != dim {
                        return Err(syntax(line.number, format!("effect must be {dim}x{dim}")));
                    }
                    p.push(RationalMatrix::from_rows(
                        rows.iter().map(|r| r.iter().map(|c| c.to_gauss()).collect()).collect(),
                    ));
                }
                fam.push(p);
            }
            Ok(fam)
        };
        let alice = read_family("A")?;
        let bob = read_family("B")?;
        let vl = lines.get(pos).ok_or_else(|| syntax(last, "expected `vector`"))?;
        if vl.tokens != ["vector"] {
            return Err(syntax(vl.number, "expected `vector`"));
        }
        let row = lines
            .get(pos + 1)
            .ok_or_else(|| syntax(vl.number, "missing vector row"))?;
        if row.tokens.len() != dim {
            return Err(syntax(row.number, format!("vector needs {dim} entries")));
        }
        let vector = row
            .tokens
            .iter()
            .map(|t| {
                parse_complex(t)
                    .map(|c| c.to_gauss())
                    .ok_or_else(|| syntax(row.number, format!("bad entry `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match lines.get(pos + 2) {
            Some(l) if l.tokens == ["end"] && pos + 3 == lines.len() => {}
            Some(l) => return Err(syntax(l.number, "expected `end` as the last line")),
            None => return Err(syntax(row.number, "missing `end`")),
        }
        Ok(Witness {
            family,
            z,
            index,
            dim,
            n,
            k,
            delta,
            alice,
            bob,
            vector,
            bound,
            defect_op_max,
        })
    }
}
