//! The `polysem` command line.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 the input has the wrong
//! tag or structure for the request, 4 a verification failed.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use polysem::division::edge_transform_traced;
use polysem::gen::{random_mixture, MixtureShape};
use polysem::hardness::{coefficient_of_all_ones_capped, sparsify, valiant_circuit, IntMatrix};
use polysem::inference::{compile_for_queries, marginal, InferenceError, Query};
use polysem::oracle::{
    dist_from, dist_from_with, encode_poly, expand_capped, identical, IdentityMode, OracleError, Verify,
    DEFAULT_TERM_CAP, DEFAULT_TRIALS,
};
use polysem::structured::{check_decomposable, check_smooth};
use polysem::transform::{apply_edge, plan_route, Objective, Route, TransformError};
use polysem::{Circuit, Semantics};

use crate::pcirc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SEMANTICS: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Largest variable count `--verify` handles without `--force`.
pub const VERIFY_MAX_VARS: usize = 10;
/// Largest matrix order `permdemo` accepts without `--force`.
pub const PERMDEMO_MAX_ORDER: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "polysem", version, about = "Transform, query and audit circuits for binary distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MinSize,
    MinEdges,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite a circuit into another encoding of the same distribution.
    Transform {
        input: PathBuf,
        /// Target tag, e.g. `network` or `fourier_ind`.
        #[arg(long)]
        to: Semantics,
        /// Comma-separated edge numbers; planned automatically when absent.
        #[arg(long)]
        route: Option<Route>,
        #[arg(long, value_enum, default_value = "min-size")]
        objective: ObjectiveArg,
        /// Write the result here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Check that input and output encode the same distribution.
        #[arg(long)]
        verify: bool,
        /// Directory for every intermediate circuit, including division gadgets and the
        /// numerator/denominator split of starred edges.
        #[arg(long)]
        keep_intermediate: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TERM_CAP)]
        max_terms: usize,
        /// Verify even above the variable limit.
        #[arg(long)]
        force: bool,
    },
    /// Exact marginal probabilities, one line per query such as `"1 ? 0"`.
    Query {
        input: PathBuf,
        #[arg(required = true)]
        queries: Vec<String>,
        /// Transform once up front into the encoding that answers queries in one pass.
        #[arg(long)]
        compile: bool,
    },
    /// Report decomposability, smoothness, multilinearity and tag consistency.
    Check {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TERM_CAP)]
        max_terms: usize,
    },
    /// Reduce a 0/1 matrix to a sparse one and recover its permanent as a coefficient.
    Permdemo {
        /// Whitespace-separated 0/1 rows; `-` reads standard input.
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TERM_CAP)]
        max_terms: usize,
        /// Allow matrices above the order limit.
        #[arg(long)]
        force: bool,
    },
    /// Brute-force ground truth.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Print the expanded polynomial.
    Expand {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TERM_CAP)]
        max_terms: usize,
    },
    /// Decide whether two circuits compute the same polynomial.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Random evaluation modulo 2^61 - 1 instead of full expansion.
        #[arg(long)]
        probabilistic: bool,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the distribution a circuit encodes, one `subset probability` line per entry.
    Dist { input: PathBuf },
    /// Print a random mixture-of-products circuit.
    Sample {
        #[arg(long)]
        tag: Semantics,
        #[arg(long)]
        vars: usize,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A failed command: message for standard error and the exit code.
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

type Outcome = Result<i32, Failure>;

fn transform_failure(e: TransformError) -> Failure {
    fail(EXIT_SEMANTICS, e.to_string())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| fail(EXIT_PARSE, format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn read_circuit(path: &Path) -> Result<Circuit, Failure> {
    let text = read_text(path)?;
    pcirc::parse(&text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn yes_no(ok: bool) -> &'static str {
    if ok {
        "yes"
    } else {
        "no"
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Transform { input, to, route, objective, output, verify, keep_intermediate, max_terms, force } => {
            let objective = match objective {
                ObjectiveArg::MinSize => Objective::MinSize,
                ObjectiveArg::MinEdges => Objective::MinEdges,
            };
            let opts = TransformOptions { to, route, objective, verify, keep_intermediate, max_terms, force };
            cmd_transform(&input, output.as_deref(), &opts, out, err)
        }
        Command::Query { input, queries, compile } => cmd_query(&input, &queries, compile, out),
        Command::Check { input, max_terms } => cmd_check(&input, max_terms, out),
        Command::Permdemo { matrix, max_terms, force } => cmd_permdemo(&matrix, max_terms, force, out),
        Command::Oracle { command } => match command {
            OracleCommand::Expand { input, max_terms } => cmd_expand(&input, max_terms, out),
            OracleCommand::Compare { a, b, probabilistic, trials, seed } => {
                let mode =
                    if probabilistic { IdentityMode::Probabilistic { trials, seed } } else { IdentityMode::Exact };
                cmd_compare(&a, &b, mode, out)
            }
            OracleCommand::Dist { input } => cmd_dist(&input, out),
            OracleCommand::Sample { tag, vars, depth, seed } => cmd_sample(tag, vars, depth, seed, out),
        },
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

struct TransformOptions {
    to: Semantics,
    route: Option<Route>,
    objective: Objective,
    verify: bool,
    keep_intermediate: Option<PathBuf>,
    max_terms: usize,
    force: bool,
}

fn cmd_transform(
    input: &Path,
    output: Option<&Path>,
    opts: &TransformOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let c = read_circuit(input)?;
    let route = match &opts.route {
        Some(r) => {
            r.check(c.semantics(), opts.to).map_err(transform_failure)?;
            r.clone()
        }
        None if c.semantics() == opts.to => Route(Vec::new()),
        None => plan_route(c.semantics(), opts.to, opts.objective).map_err(transform_failure)?,
    };
    if let Some(dir) = &opts.keep_intermediate {
        fs::create_dir_all(dir).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", dir.display())))?;
    }
    let mut current = c.clone();
    for (step, &edge) in route.edges().iter().enumerate() {
        let name = format!("step{}_edge{}", step + 1, edge.number());
        current = match (&opts.keep_intermediate, edge.is_starred()) {
            (Some(dir), true) => {
                let trace = edge_transform_traced(&current, edge).map_err(transform_failure)?;
                write_file(&dir.join(format!("{name}_gadget.pcirc")), &pcirc::serialize(&trace.gadget))?;
                write_file(&dir.join(format!("{name}_numerator.pcirc")), &pcirc::serialize(&trace.numerator))?;
                write_file(&dir.join(format!("{name}_denominator.pcirc")), &pcirc::serialize(&trace.denominator))?;
                trace.output
            }
            _ => apply_edge(&current, edge).map_err(transform_failure)?,
        };
        if let Some(dir) = &opts.keep_intermediate {
            write_file(&dir.join(format!("{name}.pcirc")), &pcirc::serialize(&current))?;
        }
    }
    let route_text = if route.is_empty() { "(none)".to_string() } else { route.to_string() };
    let _ = writeln!(err, "route: {route_text}");
    let _ = writeln!(err, "size: {} -> {}", c.size(), current.size());
    let text = pcirc::serialize(&current);
    match output {
        Some(path) => write_file(path, &text)?,
        None => out.write_all(text.as_bytes()).map_err(|e| fail(EXIT_PARSE, e.to_string()))?,
    }
    if !opts.verify {
        return Ok(EXIT_OK);
    }
    if c.n() > VERIFY_MAX_VARS && !opts.force {
        let _ = writeln!(err, "verify: skipped, {} variables exceed {VERIFY_MAX_VARS} (use --force)", c.n());
        return Ok(EXIT_OK);
    }
    verify_transform(&c, &current, opts.max_terms, err)
}

/// Same distribution, with the output's form confirmed by exact expansion when it fits
/// under `max_terms` and by random evaluation otherwise.
fn verify_transform(input: &Circuit, output: &Circuit, max_terms: usize, err: &mut dyn Write) -> Outcome {
    let before = dist_from(input).map_err(|e| fail(EXIT_SEMANTICS, format!("input: {e}")))?;
    let probabilistic = Verify::Probabilistic { trials: DEFAULT_TRIALS, seed: 0 };
    let after = match dist_from_with(output, probabilistic) {
        Ok(t) => t,
        Err(e) => return Err(fail(EXIT_VERIFY, format!("verify: output {e}"))),
    };
    if after != before {
        return Err(fail(EXIT_VERIFY, "verify: output encodes a different distribution"));
    }
    let expected = encode_poly(output.semantics(), &before).map_err(|e| fail(EXIT_VERIFY, e.to_string()))?;
    match expand_capped(output, max_terms) {
        Ok(p) if p == expected => {
            let _ = writeln!(err, "verify: ok (exact)");
            Ok(EXIT_OK)
        }
        Ok(_) => Err(fail(EXIT_VERIFY, "verify: output polynomial differs from the expected encoding")),
        Err(OracleError::TermBlowup { cap }) => {
            let _ = writeln!(err, "verify: ok (probabilistic; exact expansion exceeds {cap} terms)");
            Ok(EXIT_OK)
        }
        Err(e) => Err(fail(EXIT_VERIFY, format!("verify: {e}"))),
    }
}

fn inference_failure(e: InferenceError) -> Failure {
    match e {
        InferenceError::QueryLength { .. } => fail(EXIT_PARSE, e.to_string()),
        _ => fail(EXIT_SEMANTICS, e.to_string()),
    }
}

fn cmd_query(input: &Path, queries: &[String], compile: bool, out: &mut dyn Write) -> Outcome {
    let mut c = read_circuit(input)?;
    let parsed: Vec<Query> = queries
        .iter()
        .map(|q| q.parse::<Query>().map_err(|e| fail(EXIT_PARSE, e.to_string())))
        .collect::<Result<_, _>>()?;
    if compile {
        c = compile_for_queries(&c).map_err(inference_failure)?;
    }
    for q in &parsed {
        let p = marginal(&c, q).map_err(inference_failure)?;
        let _ = writeln!(out, "{q}\t{p}");
    }
    Ok(EXIT_OK)
}

fn cmd_check(input: &Path, max_terms: usize, out: &mut dyn Write) -> Outcome {
    let c = read_circuit(input)?;
    let _ = writeln!(out, "semantics: {}", c.semantics());
    let _ = writeln!(out, "vars: {}", c.n());
    let _ = writeln!(out, "nodes: {}", c.node_count());
    let _ = writeln!(out, "size: {}", c.size());
    let describe = |r: Result<(), polysem::structured::Violation>| match r {
        Ok(()) => "yes".to_string(),
        Err(v) => format!("no ({v})"),
    };
    let _ = writeln!(out, "decomposable: {}", describe(check_decomposable(&c)));
    let _ = writeln!(out, "smooth: {}", describe(check_smooth(&c)));
    let multilinear = match expand_capped(&c, max_terms) {
        Ok(p) => yes_no(p.is_multilinear()).to_string(),
        Err(e) => format!("unknown ({e})"),
    };
    let _ = writeln!(out, "multilinear: {multilinear}");
    if !c.semantics().is_distribution() {
        let _ = writeln!(out, "tag-consistent: n/a");
        return Ok(EXIT_OK);
    }
    let verdict = match dist_from(&c) {
        Ok(_) => Ok(()),
        Err(OracleError::TermBlowup { .. }) => {
            match dist_from_with(&c, Verify::Probabilistic { trials: DEFAULT_TRIALS, seed: 0 }) {
                Ok(_) => Ok(()),
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    };
    match verdict {
        Ok(()) => {
            let _ = writeln!(out, "tag-consistent: yes");
            Ok(EXIT_OK)
        }
        Err(OracleError::NotADistribution(defect)) => {
            let _ = writeln!(out, "tag-consistent: no ({defect})");
            Ok(EXIT_SEMANTICS)
        }
        Err(OracleError::SemanticsMismatch { witness: Some(w), .. }) => {
            let _ = writeln!(out, "tag-consistent: no (not a {} polynomial; differs at {w})", c.semantics());
            Ok(EXIT_SEMANTICS)
        }
        Err(e) => {
            let _ = writeln!(out, "tag-consistent: no ({e})");
            Ok(EXIT_SEMANTICS)
        }
    }
}

fn cmd_permdemo(path: &Path, max_terms: usize, force: bool, out: &mut dyn Write) -> Outcome {
    let text = read_text(path)?;
    let m: IntMatrix = text.parse().map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    if m.order() > PERMDEMO_MAX_ORDER && !force {
        return Err(fail(EXIT_SEMANTICS, format!("order {} exceeds {PERMDEMO_MAX_ORDER} (use --force)", m.order())));
    }
    let (sparse, trace) = sparsify(&m);
    let c = valiant_circuit(&sparse).map_err(|e| fail(EXIT_VERIFY, e.to_string()))?;
    let expected = polysem::oracle::permanent(&m);
    let _ = write!(out, "matrix ({0}x{0}):\n{m}", m.order());
    let _ = write!(out, "sparsified ({0}x{0}):\n{sparse}", sparse.order());
    let _ = write!(out, "trace ({} steps):\n{trace}", trace.steps.len());
    let _ = writeln!(out, "permanent: {expected}");
    let _ = write!(out, "circuit:\n{}", pcirc::serialize(&c));
    let coefficient =
        coefficient_of_all_ones_capped(&c, sparse.order(), max_terms).map_err(|e| fail(EXIT_VERIFY, e.to_string()))?;
    let _ = writeln!(out, "coefficient of x1*...*x{}: {coefficient}", sparse.order());
    let ok = coefficient == polysem::Rational::from_bigint(expected.into());
    let _ = writeln!(out, "verified: {}", yes_no(ok));
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_expand(input: &Path, max_terms: usize, out: &mut dyn Write) -> Outcome {
    let c = read_circuit(input)?;
    let p = expand_capped(&c, max_terms).map_err(|e| fail(EXIT_SEMANTICS, e.to_string()))?;
    let _ = writeln!(out, "{p}");
    Ok(EXIT_OK)
}

fn cmd_compare(a: &Path, b: &Path, mode: IdentityMode, out: &mut dyn Write) -> Outcome {
    let (a, b) = (read_circuit(a)?, read_circuit(b)?);
    let report = identical(&a, &b, mode).map_err(|e| fail(EXIT_SEMANTICS, e.to_string()))?;
    if report.identical {
        let _ = writeln!(out, "identical");
        return Ok(EXIT_OK);
    }
    match report.witness {
        Some(w) => {
            let _ = writeln!(out, "different at {w}");
        }
        None => {
            let _ = writeln!(out, "different");
        }
    }
    Ok(EXIT_VERIFY)
}

fn cmd_dist(input: &Path, out: &mut dyn Write) -> Outcome {
    let c = read_circuit(input)?;
    let table = dist_from(&c).map_err(|e| fail(EXIT_SEMANTICS, e.to_string()))?;
    for (mask, p) in table.iter() {
        let _ = writeln!(out, "{}\t{p}", polysem::ScopeSet::from_mask(mask));
    }
    Ok(EXIT_OK)
}

fn cmd_sample(tag: Semantics, vars: usize, depth: u32, seed: u64, out: &mut dyn Write) -> Outcome {
    if !tag.is_distribution() {
        return Err(fail(EXIT_SEMANTICS, format!("{tag} is not a distribution encoding")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = random_mixture(&mut rng, tag, vars, MixtureShape::decomposable(depth));
    let _ = out.write_all(pcirc::serialize(&c).as_bytes());
    Ok(EXIT_OK)
}
