//! POVMs, measurement families, strategies, and everything evaluated on them:
//! the symmetrized bullet product, correlation tables, game operators and
//! values, commutation defects, the `φ_k` near-POVM functional and rounding
//! of near-POVMs to exact ones.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::operator::{
    check_dims, commutator_raw, eig_herm, op_norm_herm, positive_part, psd_cone_distance, sqrt_from_decomp,
    state_expect, trace_product, CMatrix, CVector, HermMatrix, State, PSD_CLAMP,
};
use crate::textfmt::{content_lines, literal_rows_to_cmatrix, parse_usize, read_matrix_block, syntax, write_cmatrix};

/// Positivity and completeness tolerance for POVM effects.
pub const POVM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<HermMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<HermMatrix>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidPovm("no effects".into()));
        };
        let dim = first.dim();
        let mut total = CMatrix::zeros(dim, dim);
        for (a, e) in effects.iter().enumerate() {
            check_dims(dim, e.dim())?;
            let lmin = eig_herm(e)?.min_eigenvalue();
            if lmin < -POVM_TOL {
                return Err(Error::InvalidPovm(format!("effect {} has eigenvalue {lmin:e}", a + 1)));
            }
            total += e.as_matrix();
        }
        let dev = op_norm_herm(&HermMatrix::symmetrize(total - CMatrix::identity(dim, dim)))?;
        if dev > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {dev:e}"
            )));
        }
        Ok(Povm { effects })
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effect(&self, a: usize) -> &HermMatrix {
        &self.effects[a]
    }

    pub fn effects(&self) -> &[HermMatrix] {
        &self.effects
    }

    /// `I/k`.
    pub fn uniform(dim: usize, k: usize) -> Self {
        Povm {
            effects: vec![HermMatrix::identity(dim).scale(1.0 / k as f64); k],
        }
    }

    /// Projective measurement that always answers `answer`.
    pub fn deterministic(dim: usize, k: usize, answer: usize) -> Self {
        let effects = (0..k)
            .map(|a| {
                if a == answer {
                    HermMatrix::identity(dim)
                } else {
                    HermMatrix::zeros(dim)
                }
            })
            .collect();
        Povm { effects }
    }

    /// Two-outcome measurement of a ±1 observable: `(I ± O)/2`.
    pub fn from_observable(obs: &HermMatrix) -> Result<Self> {
        let id = HermMatrix::identity(obs.dim());
        Povm::new(vec![id.add(obs)?.scale(0.5), id.sub(obs)?.scale(0.5)])
    }
}

/// One POVM per question, all of the same length and dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    povms: Vec<Povm>,
}

impl MeasurementFamily {
    pub fn new(povms: Vec<Povm>) -> Result<Self> {
        let Some(first) = povms.first() else {
            return Err(Error::Shape("measurement family with no questions".into()));
        };
        let (dim, k) = (first.dim(), first.len());
        for p in &povms {
            check_dims(dim, p.dim())?;
            if p.len() != k {
                return Err(Error::Shape(format!("POVM lengths {} and {k} differ", p.len())));
            }
        }
        Ok(MeasurementFamily { povms })
    }

    pub fn n(&self) -> usize {
        self.povms.len()
    }

    pub fn k(&self) -> usize {
        self.povms[0].len()
    }

    pub fn dim(&self) -> usize {
        self.povms[0].dim()
    }

    pub fn povm(&self, x: usize) -> &Povm {
        &self.povms[x]
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn effect(&self, x: usize, a: usize) -> &HermMatrix {
        self.povms[x].effect(a)
    }

    /// Deterministic classical answers `answers[x]`, embedded as scalar effects.
    pub fn deterministic(dim: usize, k: usize, answers: &[usize]) -> Result<Self> {
        if answers.iter().any(|&a| a >= k) {
            return Err(Error::Shape("answer out of range".into()));
        }
        MeasurementFamily::new(answers.iter().map(|&a| Povm::deterministic(dim, k, a)).collect())
    }

    fn check_game(&self, g: &Game) -> Result<()> {
        if self.n() != g.n() || self.k() != g.k() {
            return Err(Error::Shape(format!(
                "measurements have (n, k) = ({}, {}), game has ({}, {})",
                self.n(),
                self.k(),
                g.n(),
                g.k()
            )));
        }
        Ok(())
    }

    /// Square roots of every effect, indexed `[x][a]`.
    fn roots(&self) -> Result<Vec<Vec<HermMatrix>>> {
        self.povms
            .iter()
            .map(|p| p.effects.iter().map(|e| sqrt_from_decomp(&eig_herm(e)?)).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    alice: MeasurementFamily,
    bob: MeasurementFamily,
    phi: State,
}

impl Strategy {
    pub fn new(alice: MeasurementFamily, bob: MeasurementFamily, phi: State) -> Result<Self> {
        check_dims(alice.dim(), bob.dim())?;
        check_dims(alice.dim(), phi.dim())?;
        if alice.n() != bob.n() || alice.k() != bob.k() {
            return Err(Error::Shape(format!(
                "alice has (n, k) = ({}, {}), bob has ({}, {})",
                alice.n(),
                alice.k(),
                bob.n(),
                bob.k()
            )));
        }
        Ok(Strategy { alice, bob, phi })
    }

    pub fn alice(&self) -> &MeasurementFamily {
        &self.alice
    }

    pub fn bob(&self) -> &MeasurementFamily {
        &self.bob
    }

    pub fn phi(&self) -> &State {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn n(&self) -> usize {
        self.alice.n()
    }

    pub fn k(&self) -> usize {
        self.alice.k()
    }

    pub fn with_state(&self, phi: State) -> Result<Self> {
        Strategy::new(self.alice.clone(), self.bob.clone(), phi)
    }
}

/// `A•B = ½(A^{1/2} B A^{1/2} + B^{1/2} A B^{1/2})` for PSD `a`, `b`.
pub fn bullet(a: &HermMatrix, b: &HermMatrix) -> Result<HermMatrix> {
    check_dims(a.dim(), b.dim())?;
    let ra = sqrt_from_decomp(&eig_herm(a)?)?;
    let rb = sqrt_from_decomp(&eig_herm(b)?)?;
    Ok(bullet_with_roots(a, &ra, b, &rb))
}

pub(crate) fn bullet_with_roots(a: &HermMatrix, ra: &HermMatrix, b: &HermMatrix, rb: &HermMatrix) -> HermMatrix {
    let (a, ra, b, rb) = (a.as_matrix(), ra.as_matrix(), b.as_matrix(), rb.as_matrix());
    let m = (ra * b * ra + rb * a * rb).scale(0.5);
    HermMatrix::symmetrize(m)
}

/// `p(a, b | x, y)`, stored row-major over `(x, y, a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    n: usize,
    k: usize,
    p: Vec<f64>,
}

impl CorrelationTable {
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[((x * self.n + y) * self.k + a) * self.k + b]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[f64] {
        &self.p
    }

    /// `Σ_{a,b} p(a, b | x, y)`.
    pub fn row_sum(&self, x: usize, y: usize) -> f64 {
        let base = (x * self.n + y) * self.k * self.k;
        self.p[base..base + self.k * self.k].iter().sum()
    }
}

fn raw_correlations(s: &Strategy) -> Result<Vec<f64>> {
    let (n, k) = (s.n(), s.k());
    let ra = s.alice.roots()?;
    let rb = s.bob.roots()?;
    let rho = s.phi.rho().as_matrix();
    let mut p = Vec::with_capacity(n * n * k * k);
    for x in 0..n {
        for y in 0..n {
            for a in 0..k {
                for b in 0..k {
                    let m = bullet_with_roots(s.alice.effect(x, a), &ra[x][a], s.bob.effect(y, b), &rb[y][b]);
                    p.push(trace_product(rho, m.as_matrix()).re);
                }
            }
        }
    }
    Ok(p)
}

/// `p_σ(a, b | x, y) = φ(A^x_a • B^y_b)`, with roundoff negatives clamped to zero.
pub fn correlation_table(s: &Strategy) -> Result<CorrelationTable> {
    let raw = raw_correlations(s)?;
    if let Some(&worst) = raw.iter().find(|&&v| v < -PSD_CLAMP) {
        return Err(Error::NotPsd { eigenvalue: worst });
    }
    Ok(CorrelationTable {
        n: s.n(),
        k: s.k(),
        p: raw.into_iter().map(|v| v.max(0.0)).collect(),
    })
}

/// `𝔊(A, B) = Σ_{x,y} π(x, y) Σ_{a,b} D(x, y, a, b) A^x_a • B^y_b`.
pub fn game_operator(g: &Game, a: &MeasurementFamily, b: &MeasurementFamily) -> Result<HermMatrix> {
    a.check_game(g)?;
    b.check_game(g)?;
    check_dims(a.dim(), b.dim())?;
    let ra = a.roots()?;
    let rb = b.roots()?;
    let dim = a.dim();
    let mut total = CMatrix::zeros(dim, dim);
    for x in 0..g.n() {
        for y in 0..g.n() {
            let w = g.pi_f64(x, y);
            if w == 0.0 {
                continue;
            }
            for i in 0..g.k() {
                for j in 0..g.k() {
                    if g.wins(x, y, i, j) {
                        let m = bullet_with_roots(a.effect(x, i), &ra[x][i], b.effect(y, j), &rb[y][j]);
                        total += m.as_matrix().scale(w);
                    }
                }
            }
        }
    }
    Ok(HermMatrix::symmetrize(total))
}

/// Tolerance for agreement of the two value formulas.
pub const VALUE_TOL: f64 = 1e-8;

/// `val(𝔊, σ) = φ(𝔊(A, B))`, cross-checked against `Σ π D p_σ`.
pub fn game_value(g: &Game, s: &Strategy) -> Result<f64> {
    let op = game_operator(g, &s.alice, &s.bob)?;
    let via_operator = state_expect(&s.phi, op.as_matrix())?.re;
    let p = raw_correlations(s)?;
    let (n, k) = (g.n(), g.k());
    let mut via_table = 0.0;
    for x in 0..n {
        for y in 0..n {
            let w = g.pi_f64(x, y);
            for a in 0..k {
                for b in 0..k {
                    if g.wins(x, y, a, b) {
                        via_table += w * p[((x * n + y) * k + a) * k + b];
                    }
                }
            }
        }
    }
    if (via_operator - via_table).abs() > VALUE_TOL {
        return Err(Error::Inconsistent(format!(
            "value via game operator {via_operator} differs from correlation sum {via_table}"
        )));
    }
    if !(-VALUE_TOL..=1.0 + VALUE_TOL).contains(&via_operator) {
        return Err(Error::Inconsistent(format!("value {via_operator} outside [0, 1]")));
    }
    Ok(via_operator.clamp(0.0, 1.0))
}

/// How commutator sizes over answer pairs are aggregated for one question pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DefectMode {
    /// `Σ_{a,b}`, the primary definition.
    #[default]
    Summed,
    /// `max_{a,b}`.
    PerPair,
}

/// Per question pair commutation defects, row-major over `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    pub n: usize,
    pub mode: DefectMode,
    pub op: Vec<f64>,
    pub st: Vec<f64>,
    pub op_max: f64,
    pub st_max: f64,
}

impl DefectReport {
    pub fn op(&self, x: usize, y: usize) -> f64 {
        self.op[x * self.n + y]
    }

    pub fn st(&self, x: usize, y: usize) -> f64 {
        self.st[x * self.n + y]
    }

    /// Strict `op_max < δ`.
    pub fn is_delta_op(&self, delta: f64) -> bool {
        self.op_max < delta
    }

    /// Strict `st_max < δ`.
    pub fn is_delta_st(&self, delta: f64) -> bool {
        self.st_max < delta
    }

    pub fn zero(n: usize) -> Self {
        DefectReport {
            n,
            mode: DefectMode::Summed,
            op: vec![0.0; n * n],
            st: vec![0.0; n * n],
            op_max: 0.0,
            st_max: 0.0,
        }
    }
}

/// Operator norm of a commutator of Hermitian matrices, via the Hermitian `iC`.
pub(crate) fn skew_norm(c: &CMatrix) -> f64 {
    let h = HermMatrix::symmetrize(c * Complex64::new(0.0, 1.0));
    op_norm_herm(&h).unwrap_or_else(|_| crate::operator::op_norm(c))
}

/// Op- and state-defects of the measurement pairs, summed over answers.
pub fn defects(s: &Strategy) -> DefectReport {
    defects_with_mode(s, DefectMode::Summed)
}

pub fn defects_with_mode(s: &Strategy, mode: DefectMode) -> DefectReport {
    let (n, k) = (s.n(), s.k());
    let rho = s.phi.rho().as_matrix();
    let mut op = Vec::with_capacity(n * n);
    let mut st = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            let (mut o, mut t) = (0.0f64, 0.0f64);
            for a in 0..k {
                for b in 0..k {
                    let c = commutator_raw(s.alice.effect(x, a).as_matrix(), s.bob.effect(y, b).as_matrix());
                    let on = skew_norm(&c);
                    let sn = trace_product(rho, &c).norm();
                    match mode {
                        DefectMode::Summed => {
                            o += on;
                            t += sn;
                        }
                        DefectMode::PerPair => {
                            o = o.max(on);
                            t = t.max(sn);
                        }
                    }
                }
            }
            op.push(o);
            st.push(t);
        }
    }
    let op_max = op.iter().cloned().fold(0.0, f64::max);
    let st_max = st.iter().cloned().fold(0.0, f64::max);
    DefectReport {
        n,
        mode,
        op,
        st,
        op_max,
        st_max,
    }
}

/// `max(max_i d(X_i, PSD), ‖Σ X_i − I‖)`: zero exactly on POVMs.
pub fn phi_k_eval(xs: &[HermMatrix]) -> Result<f64> {
    let Some(first) = xs.first() else {
        return Err(Error::Shape("empty sequence".into()));
    };
    let dim = first.dim();
    let mut worst: f64 = 0.0;
    let mut total = CMatrix::zeros(dim, dim);
    for x in xs {
        check_dims(dim, x.dim())?;
        worst = worst.max(psd_cone_distance(x)?);
        total += x.as_matrix();
    }
    let completeness = op_norm_herm(&HermMatrix::symmetrize(total - CMatrix::identity(dim, dim)))?;
    Ok(worst.max(completeness))
}

/// `S^{-1/2}(P_i + (ε/k) I) S^{-1/2}` with `S = Σ P_i + ε I`; complete by construction.
pub fn normalize_to_povm(parts: &[HermMatrix], ridge: f64) -> Result<Povm> {
    let Some(first) = parts.first() else {
        return Err(Error::Shape("empty sequence".into()));
    };
    let dim = first.dim();
    let k = parts.len() as f64;
    let mut s = CMatrix::identity(dim, dim).scale(ridge);
    for p in parts {
        check_dims(dim, p.dim())?;
        s += p.as_matrix();
    }
    let es = eig_herm(&HermMatrix::symmetrize(s))?;
    if es.min_eigenvalue() <= 0.0 {
        return Err(Error::NotPsd {
            eigenvalue: es.min_eigenvalue(),
        });
    }
    let t = es.apply(|l| 1.0 / l.sqrt());
    let t = t.as_matrix();
    let shift = CMatrix::identity(dim, dim).scale(ridge / k);
    let effects = parts
        .iter()
        .map(|p| HermMatrix::symmetrize(t * (p.as_matrix() + &shift) * t))
        .collect();
    Povm::new(effects)
}

/// Output of [`round_to_povm`].
#[derive(Clone, Debug)]
pub struct RoundedPovm {
    pub povm: Povm,
    /// `max_i ‖B_i − X_i‖`.
    pub distance: f64,
    /// `φ_k` of the input.
    pub phi_k: f64,
}

/// Smallest eigenvalue the normalizer `S` is allowed to have.
const ROUNDING_FLOOR: f64 = 1e-3;

/// Rounds a near-POVM to an exact POVM: positive parts, then conjugation by
/// `S^{-1/2}` with `S = Σ P_i + ε I`. The ridge `ε` is `1e-12` unless
/// `Σ P_i` is nearly singular, in which case it is raised until
/// `λ_min(S) ≥ 1e-3`.
pub fn round_to_povm(xs: &[HermMatrix]) -> Result<RoundedPovm> {
    let phi_k = phi_k_eval(xs)?;
    let parts = xs.iter().map(positive_part).collect::<Result<Vec<_>>>()?;
    let dim = parts[0].dim();
    let mut sum = CMatrix::zeros(dim, dim);
    for p in &parts {
        sum += p.as_matrix();
    }
    let lmin = eig_herm(&HermMatrix::symmetrize(sum))?.min_eigenvalue();
    let ridge = 1e-12 + (ROUNDING_FLOOR - lmin).max(0.0);
    let povm = normalize_to_povm(&parts, ridge)?;
    let distance = povm
        .effects
        .iter()
        .zip(xs)
        .map(|(b, x)| op_norm_herm(&b.sub(x).expect("same dims")))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(RoundedPovm { povm, distance, phi_k })
}

/// Embeds local families as `A ⊗ I` and `I ⊗ B` on `d_A·d_B`; the result commutes exactly.
pub fn tensor_commuting_strategy(
    alice_local: &MeasurementFamily,
    bob_local: &MeasurementFamily,
    state: State,
) -> Result<Strategy> {
    let (da, db) = (alice_local.dim(), bob_local.dim());
    check_dims(da * db, state.dim())?;
    let ia = HermMatrix::identity(da);
    let ib = HermMatrix::identity(db);
    let lift = |fam: &MeasurementFamily, left: bool| -> Result<MeasurementFamily> {
        let povms = fam
            .povms()
            .iter()
            .map(|p| Povm {
                effects: p
                    .effects()
                    .iter()
                    .map(|e| if left { e.kron(&ib) } else { ia.kron(e) })
                    .collect(),
            })
            .collect();
        MeasurementFamily::new(povms)
    };
    Strategy::new(lift(alice_local, true)?, lift(bob_local, false)?, state)
}

/// `(|00⟩ + |11⟩ + …)/√d` on `d·d`.
pub fn maximally_entangled(d: usize) -> State {
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = Complex64::new(1.0, 0.0);
    }
    State::pure(&v).expect("nonzero vector")
}

/// Real-plane qubit observable `cos θ Z + sin θ X`.
pub fn qubit_observable(theta: f64) -> HermMatrix {
    let (c, s) = (theta.cos(), theta.sin());
    HermMatrix::from_real_rows(2, &[c, s, s, -c]).expect("2x2")
}

/// The optimal CHSH strategy: Alice measures at angles `0, π/2`, Bob at
/// `π/4, −π/4`, on a maximally entangled pair of qubits.
pub fn tsirelson_strategy() -> Strategy {
    use std::f64::consts::FRAC_PI_4;
    let fam = |angles: [f64; 2]| {
        MeasurementFamily::new(
            angles
                .iter()
                .map(|&t| Povm::from_observable(&qubit_observable(t)).expect("±1 observable"))
                .collect(),
        )
        .expect("two questions")
    };
    tensor_commuting_strategy(
        &fam([0.0, 2.0 * FRAC_PI_4]),
        &fam([FRAC_PI_4, -FRAC_PI_4]),
        maximally_entangled(2),
    )
    .expect("dimensions agree")
}

/// A strategy file read without enforcing POVM invariants, e.g. as input to rounding.
#[derive(Clone, Debug)]
pub struct StrategyDraft {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    /// `[x][a]`
    pub alice: Vec<Vec<HermMatrix>>,
    pub bob: Vec<Vec<HermMatrix>>,
    pub rho: CMatrix,
}

impl StrategyDraft {
    pub fn parse(text: &str) -> Result<Self> {
        let lines = content_lines(text);
        let header = lines.first().ok_or_else(|| syntax(0, "empty strategy file"))?;
        let t = &header.tokens;
        if t.len() != 7 || t[0] != "strategy" || t[1] != "dim" || t[3] != "n" || t[5] != "k" {
            return Err(syntax(header.number, "expected `strategy dim <d> n <n> k <k>`"));
        }
        let dim = parse_usize(header.number, t[2])?;
        let n = parse_usize(header.number, t[4])?;
        let k = parse_usize(header.number, t[6])?;
        if dim == 0 || n == 0 || k == 0 {
            return Err(syntax(header.number, "dim, n and k must be positive"));
        }
        let mut alice: Vec<Vec<Option<HermMatrix>>> = vec![vec![None; k]; n];
        let mut bob: Vec<Vec<Option<HermMatrix>>> = vec![vec![None; k]; n];
        let mut rho = None;
        let mut pos = 1;
        while pos < lines.len() {
            let line = &lines[pos];
            pos += 1;
            let block_line = line.number;
            let target = match line.tokens[0] {
                tag @ ("A" | "B") => {
                    if line.tokens.len() != 3 {
                        return Err(syntax(block_line, "expected `A <x> <a>` or `B <y> <b>`"));
                    }
                    let q = parse_usize(block_line, line.tokens[1])?;
                    let a = parse_usize(block_line, line.tokens[2])?;
                    if q == 0 || q > n || a == 0 || a > k {
                        return Err(syntax(block_line, "index out of range"));
                    }
                    Some((tag == "A", q - 1, a - 1))
                }
                "rho" => {
                    if line.tokens.len() != 1 {
                        return Err(syntax(block_line, "expected `rho`"));
                    }
                    None
                }
                other => return Err(syntax(block_line, format!("unknown block `{other}`"))),
            };
            let rows = read_matrix_block(&lines, &mut pos)?;
            if rows.len() != dim {
                return Err(syntax(
                    block_line,
                    format!("block has dim {}, header says {dim}", rows.len()),
                ));
            }
            let m = literal_rows_to_cmatrix(&rows);
            match target {
                None => {
                    if rho.is_some() {
                        return Err(syntax(block_line, "duplicate `rho` block"));
                    }
                    rho = Some(m);
                }
                Some((is_alice, q, a)) => {
                    let slot = if is_alice { &mut alice[q][a] } else { &mut bob[q][a] };
                    if slot.is_some() {
                        return Err(syntax(block_line, "duplicate block"));
                    }
                    *slot = Some(HermMatrix::new(m)?);
                }
            }
        }
        let last = lines.last().map_or(0, |l| l.number);
        let finish = |table: Vec<Vec<Option<HermMatrix>>>, who: &str| -> Result<Vec<Vec<HermMatrix>>> {
            table
                .into_iter()
                .enumerate()
                .map(|(x, row)| {
                    row.into_iter()
                        .enumerate()
                        .map(|(a, m)| {
                            m.ok_or_else(|| syntax(last, format!("missing block `{who} {} {}`", x + 1, a + 1)))
                        })
                        .collect()
                })
                .collect()
        };
        Ok(StrategyDraft {
            dim,
            n,
            k,
            alice: finish(alice, "A")?,
            bob: finish(bob, "B")?,
            rho: rho.ok_or_else(|| syntax(last, "missing `rho` block"))?,
        })
    }

    pub fn into_strategy(self) -> Result<Strategy> {
        let fam = |t: Vec<Vec<HermMatrix>>| -> Result<MeasurementFamily> {
            MeasurementFamily::new(t.into_iter().map(Povm::new).collect::<Result<Vec<_>>>()?)
        };
        Strategy::new(fam(self.alice)?, fam(self.bob)?, State::new(self.rho)?)
    }
}

pub fn parse_strategy(text: &str) -> Result<Strategy> {
    StrategyDraft::parse(text)?.into_strategy()
}

pub fn serialize_strategy(s: &Strategy) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "strategy dim {} n {} k {}", s.dim(), s.n(), s.k());
    for (tag, fam) in [("A", &s.alice), ("B", &s.bob)] {
        for x in 0..fam.n() {
            for a in 0..fam.k() {
                let _ = writeln!(out, "{tag} {} {}", x + 1, a + 1);
                write_cmatrix(&mut out, fam.effect(x, a).as_matrix());
            }
        }
    }
    out.push_str("rho\n");
    write_cmatrix(&mut out, s.phi.rho().as_matrix());
    out
}
