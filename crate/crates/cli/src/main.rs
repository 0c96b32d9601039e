//! `acg`: evaluate, optimize and certify nonlocal-game strategies.
//!
//! Exit codes: 0 on success, 2 on invalid input or a failed verification,
//! 3 when `semidecide` runs out of budget.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acg_core::game::{make_chsh, Game};
use acg_core::operator::HermMatrix;
use acg_core::optimize::{
    classical_optimum, optimal_state, optimize_delta, seesaw_commuting, Dims, Mode, OptimizerConfig,
};
use acg_core::semidecide::{family_by_name, semidecide, verify_witness, Outcome, Witness};
use acg_core::strategy::{
    defects, game_value, parse_strategy, phi_k_eval, round_to_povm, serialize_strategy, tsirelson_strategy, Strategy,
};
use acg_core::textfmt::{
    content_lines, format_rational_pq, format_sig, literal_rows_to_cmatrix, parse_rational, read_matrix_block,
    write_cmatrix,
};
use acg_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num::{BigRational, One, Signed, ToPrimitive};

#[derive(Parser, Debug)]
#[command(name = "acg", version, about = "Values and certificates for nonlocal games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value, defects and best-state value of a strategy.
    Value {
        /// Game file, or `builtin:chsh`.
        #[arg(long)]
        game: String,
        /// Strategy file, or `builtin:tsirelson`.
        #[arg(long)]
        strategy: String,
        #[command(flatten)]
        common: Common,
    },
    /// Exact classical value by enumerating deterministic strategies.
    Classical {
        /// Game file, or `builtin:chsh`.
        #[arg(long)]
        game: String,
        #[command(flatten)]
        common: Common,
    },
    /// Search for high-value strategies.
    Optimize(OptimizeArgs),
    /// Round a near-POVM (a file of matrix blocks) to a POVM.
    Round {
        /// File with k consecutive `dim d` matrix blocks.
        #[arg(long)]
        input: PathBuf,
        /// Also write the rounded effects as matrix blocks.
        #[arg(long, value_name = "PATH")]
        povm_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate rational strategies until one is certified above 1/2.
    Semidecide {
        /// Language family: `toy` or `chsh`.
        #[arg(long)]
        family: String,
        /// Input bit string.
        #[arg(long, default_value = "")]
        z: String,
        /// Number of enumeration indices to examine.
        #[arg(long)]
        budget: u64,
        /// Write the witness file here on acceptance.
        #[arg(long, value_name = "PATH")]
        witness_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recheck a witness file exactly.
    Verify {
        #[arg(long)]
        witness: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    /// See-saw for `dA,dB`, penalized search for a single `d`.
    Auto,
    Seesaw,
    Penalty,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Game file, or `builtin:chsh`.
    #[arg(long)]
    game: String,
    /// `d` for one shared space, `dA,dB` for tensor strategies.
    #[arg(long, default_value = "2")]
    dims: String,
    /// Defect tolerance as `p/q` or a decimal in [0, 1].
    #[arg(long, default_value = "0")]
    delta: String,
    /// `op`, `st` or `unconstrained`.
    #[arg(long, default_value = "op")]
    mode: String,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    /// Also write the best strategy file here.
    #[arg(long, value_name = "PATH")]
    strategy_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

enum Status {
    Ok,
    Rejected,
    Timeout,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn load_game(source: &str) -> Result<Game> {
    match source {
        "builtin:chsh" => Ok(make_chsh()),
        s if s.starts_with("builtin:") => Err(Error::Config(format!("unknown built-in game `{s}`"))),
        path => Game::parse(&read(Path::new(path))?),
    }
}

fn load_strategy(source: &str) -> Result<Strategy> {
    match source {
        "builtin:tsirelson" => Ok(tsirelson_strategy()),
        s if s.starts_with("builtin:") => Err(Error::Config(format!("unknown built-in strategy `{s}`"))),
        path => parse_strategy(&read(Path::new(path))?),
    }
}

fn parse_delta(s: &str) -> Result<BigRational> {
    let d = parse_rational(s).ok_or_else(|| Error::Config(format!("bad delta `{s}`")))?;
    if d.is_negative() || d > BigRational::one() {
        return Err(Error::Config(format!("delta {s} outside [0, 1]")));
    }
    Ok(d)
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn cmd_value(game: &str, strategy: &str) -> Result<(String, Status)> {
    let g = load_game(game)?;
    let s = load_strategy(strategy)?;
    let value = game_value(&g, &s)?;
    let d = defects(&s);
    let (_, best) = optimal_state(&g, s.alice(), s.bob())?;
    let mut out = String::new();
    kv(&mut out, "game", g.name());
    kv(&mut out, "dim", s.dim());
    kv(&mut out, "value", format_sig(value));
    kv(&mut out, "best_state_value", format_sig(best));
    kv(&mut out, "defect_op_max", format_sig(d.op_max));
    kv(&mut out, "defect_st_max", format_sig(d.st_max));
    Ok((out, Status::Ok))
}

fn cmd_classical(game: &str) -> Result<(String, Status)> {
    let g = load_game(game)?;
    let c = classical_optimum(&g)?;
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let mut out = String::new();
    kv(&mut out, "game", g.name());
    kv(&mut out, "value", format_rational_pq(&c.value));
    kv(&mut out, "value_f64", format_sig(c.value.to_f64().unwrap_or(f64::NAN)));
    kv(&mut out, "alice", join(&c.alice));
    kv(&mut out, "bob", join(&c.bob));
    Ok((out, Status::Ok))
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<(String, Status)> {
    let g = load_game(&a.game)?;
    let dims: Dims = a.dims.parse()?;
    let mode: Mode = a.mode.parse()?;
    let mut cfg = OptimizerConfig {
        seed: a.seed,
        restarts: a.restarts,
        dims,
        delta: parse_delta(&a.delta)?,
        mode,
        ..OptimizerConfig::default()
    };
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    cfg.validate()?;
    let seesaw = match a.method {
        Method::Auto => matches!(dims, Dims::Pair(..)),
        Method::Seesaw => true,
        Method::Penalty => false,
    };
    let report = if seesaw {
        seesaw_commuting(&g, &cfg)?
    } else {
        optimize_delta(&g, &cfg)?
    };
    let mut out = String::new();
    kv(&mut out, "game", g.name());
    kv(&mut out, "method", if seesaw { "seesaw" } else { "penalty" });
    let (da, db) = dims.pair();
    kv(
        &mut out,
        "dims",
        if seesaw { format!("{da},{db}") } else { da.to_string() },
    );
    kv(&mut out, "seed", cfg.seed);
    out.push_str(&report.to_report(&cfg.delta, mode));
    if let Some(p) = &a.strategy_out {
        write(p, &serialize_strategy(&report.strategy))?;
    }
    Ok((out, Status::Ok))
}

fn cmd_round(input: &Path, povm_out: Option<&Path>) -> Result<(String, Status)> {
    let text = read(input)?;
    let lines = content_lines(&text);
    let mut pos = 0;
    let mut xs = Vec::new();
    while pos < lines.len() {
        let rows = read_matrix_block(&lines, &mut pos)?;
        xs.push(HermMatrix::new(literal_rows_to_cmatrix(&rows))?);
    }
    if xs.is_empty() {
        return Err(Error::Config(format!("{} holds no matrices", input.display())));
    }
    let phi = phi_k_eval(&xs)?;
    let r = round_to_povm(&xs)?;
    let mut out = String::new();
    kv(&mut out, "k", xs.len());
    kv(&mut out, "dim", xs[0].dim());
    kv(&mut out, "phi_k", format_sig(phi));
    kv(&mut out, "distance", format_sig(r.distance));
    kv(&mut out, "rounded_phi_k", format_sig(r.phi_k));
    if let Some(p) = povm_out {
        let mut m = String::new();
        for e in r.povm.effects() {
            write_cmatrix(&mut m, e.as_matrix());
        }
        write(p, &m)?;
    }
    Ok((out, Status::Ok))
}

fn cmd_semidecide(family: &str, z: &str, budget: u64, witness_out: Option<&Path>) -> Result<(String, Status)> {
    let fam = family_by_name(family)?;
    let outcome = semidecide(&fam, z, budget)?;
    let mut out = String::new();
    kv(&mut out, "family", fam.name());
    kv(&mut out, "z", if z.is_empty() { "-" } else { z });
    kv(&mut out, "delta", format_rational_pq(&fam.delta(z.len())?));
    kv(&mut out, "budget", budget);
    match outcome {
        Outcome::Accept(w) => {
            kv(&mut out, "outcome", "accept");
            kv(&mut out, "index", w.index);
            kv(&mut out, "dim", w.dim);
            kv(&mut out, "bound", format_rational_pq(&w.bound));
            kv(&mut out, "bound_f64", format_sig(w.bound.to_f64().unwrap_or(f64::NAN)));
            kv(&mut out, "defect_op_max", format_sig(w.defect_op_max));
            if let Some(p) = witness_out {
                write(p, &w.serialize())?;
            }
            Ok((out, Status::Ok))
        }
        Outcome::Timeout { examined } => {
            kv(&mut out, "outcome", "timeout");
            kv(&mut out, "examined", examined);
            Ok((out, Status::Timeout))
        }
    }
}

fn cmd_verify(path: &Path) -> Result<(String, Status)> {
    let w = Witness::parse(&read(path)?)?;
    let fam = family_by_name(&w.family)?;
    let report = verify_witness(&w, &fam, &w.z);
    let mut out = String::new();
    kv(&mut out, "family", &w.family);
    kv(&mut out, "index", w.index);
    for c in &report.checks {
        kv(
            &mut out,
            &format!("check.{}", c.name),
            format!("{} {}", if c.passed { "pass" } else { "fail" }, c.detail),
        );
    }
    kv(&mut out, "verified", report.passed());
    let status = if report.passed() { Status::Ok } else { Status::Rejected };
    Ok((out, status))
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("ACG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("ACG_THREADS must be a nonnegative integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Status> {
    configure_threads()?;
    let (report, status, output) = match &cli.command {
        Command::Value { game, strategy, common } => {
            let (r, s) = cmd_value(game, strategy)?;
            (r, s, &common.output)
        }
        Command::Classical { game, common } => {
            let (r, s) = cmd_classical(game)?;
            (r, s, &common.output)
        }
        Command::Optimize(a) => {
            let (r, s) = cmd_optimize(a)?;
            (r, s, &a.common.output)
        }
        Command::Round {
            input,
            povm_out,
            common,
        } => {
            let (r, s) = cmd_round(input, povm_out.as_deref())?;
            (r, s, &common.output)
        }
        Command::Semidecide {
            family,
            z,
            budget,
            witness_out,
            common,
        } => {
            let (r, s) = cmd_semidecide(family, z, *budget, witness_out.as_deref())?;
            (r, s, &common.output)
        }
        Command::Verify { witness, common } => {
            let (r, s) = cmd_verify(witness)?;
            (r, s, &common.output)
        }
    };
    match output {
        Some(p) => write(p, &report)?,
        None => print!("{report}"),
    }
    Ok(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Rejected) => ExitCode::from(2),
        Ok(Status::Timeout) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
