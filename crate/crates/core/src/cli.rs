//! Command-line front end. Exit codes: 0 ok, 2 config, 3 math precondition, 4 internal invariant.
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::badic::TruncatedBAdic;
use crate::chars::{build_dual_context, format_turns, torus_character, CharacterIndex, S};
use crate::error::{Error, Result};
use crate::exactq::scalar::{format_rational, parse_rational};
use crate::exactq::Matrix;
use crate::space::PointKA;
use crate::tile::{compare_resolutions, measure_evidence, point_cloud, write_csv};
use crate::zmodule::{Base, DigitSystem, IntLiteral, ModuleElement, Policy};

pub const DEGENERATE_WARNING: &str = "b=1: solenoid trivial, tile ops disabled";

#[derive(Parser, Debug)]
#[command(name = "tilekit", version, about = "Rational matrix digit systems, their tiles and characters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config with "matrix", optional "digits" and "options".
    pub config: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub depth: Option<i64>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Invariants a, b, det, invariant factors, residue systems and the standard verdict.
    Analyze(Common),
    /// A- and B-side residue systems.
    Residues(Common),
    /// Radix expansion x = d₀ + A d₁ + … of a vector in Zⁿ[A].
    Expand {
        #[command(flatten)]
        common: Common,
        /// Comma separated rationals.
        #[arg(long, allow_hyphen_values = true)]
        vector: String,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Point cloud A^{-k} φ(D_k) as CSV.
    Tile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        precision: Option<usize>,
    },
    /// Measure evidence and the tiling multiplicity at levels k and k+1.
    Tiling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// S_s(y) mod 1 in turns; s and y as "ν:i,j,…" digit-index strings.
    Chars {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "y_vector")]
        y: Option<String>,
        /// y = φ_B of a vector in Zⁿ[A] instead of digit data.
        #[arg(long, allow_hyphen_values = true)]
        y_vector: Option<String>,
        /// Real character r; needs --y-vector.
        #[arg(long, allow_hyphen_values = true, requires = "y_vector")]
        r: Option<String>,
    },
}

/// Digit literal: a plain vector (integers or rational strings) or explicit A-power terms.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum DigitLiteral {
    Terms(Vec<(i64, Vec<IntLiteral>)>),
    Vector(Vec<IntLiteral>),
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub k: Option<usize>,
    pub depth: Option<i64>,
    pub cap: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub max_steps: Option<usize>,
    pub precision: Option<usize>,
    /// Largest A-exponent tried when converting rational vectors.
    pub max_exp: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub matrix: Vec<Vec<String>>,
    #[serde(default)]
    pub digits: Option<Vec<DigitLiteral>>,
    #[serde(default)]
    pub options: Options,
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("config line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn base(&self) -> Result<Base> {
        let a = Matrix::parse(&self.matrix, "matrix")?;
        if a.rows() == 0 || !a.is_square() {
            return Err(Error::Config(format!("matrix must be square and nonempty, got {}x{}", a.rows(), a.cols())));
        }
        Base::with_cap(a, self.options.cap.unwrap_or(crate::zmodule::DEFAULT_CAP))
    }

    /// The configured digits, or the standard B-free residue system of A.
    pub fn system(&self, base: Arc<Base>) -> Result<DigitSystem> {
        let Some(lits) = &self.digits else {
            return DigitSystem::standard_residues(base);
        };
        let max_exp = self.options.max_exp.unwrap_or(16);
        let digits = lits
            .iter()
            .enumerate()
            .map(|(i, l)| digit_element(&base, l, max_exp, &format!("digits[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        DigitSystem::new(base, digits)
    }
}

fn int_of(l: &IntLiteral, at: &str) -> Result<BigInt> {
    l.to_big().ok_or_else(|| Error::parse(at, "expected an integer"))
}

fn digit_element(base: &Base, l: &DigitLiteral, max_exp: usize, at: &str) -> Result<ModuleElement> {
    match l {
        DigitLiteral::Terms(terms) => {
            let mut out = Vec::with_capacity(terms.len());
            for (j, (e, z)) in terms.iter().enumerate() {
                if z.len() != base.n {
                    return Err(Error::DimensionMismatch { expected: base.n, found: z.len() });
                }
                let z = z.iter().enumerate().map(|(i, x)| int_of(x, &format!("{at}[{j}][{i}]"))).collect::<Result<_>>()?;
                out.push((*e, z));
            }
            Ok(ModuleElement::from_terms(base.n, out))
        }
        DigitLiteral::Vector(v) => {
            let v = v
                .iter()
                .enumerate()
                .map(|(i, x)| match x {
                    IntLiteral::Small(s) => Ok(BigRational::from_integer(BigInt::from(*s))),
                    IntLiteral::Text(t) => parse_rational(t, &format!("{at}[{i}]")),
                })
                .collect::<Result<Vec<_>>>()?;
            vector_element(base, &v, max_exp)
        }
    }
}

fn vector_element(base: &Base, v: &[BigRational], max_exp: usize) -> Result<ModuleElement> {
    if v.len() != base.n {
        return Err(Error::DimensionMismatch { expected: base.n, found: v.len() });
    }
    if v.iter().all(|x| x.is_integer()) {
        return Ok(ModuleElement::from_vector(v.iter().map(|x| x.to_integer()).collect()));
    }
    base.to_module_element(v, max_exp)
}

/// "p/q, r, …" or "p/q r …".
pub fn parse_vector(s: &str, at: &str) -> Result<Vec<BigRational>> {
    let t = s.trim().trim_start_matches('[').trim_end_matches(']');
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(i, p)| parse_rational(p, &format!("{at}[{i}]")))
        .collect()
}

/// "ν:i,j,…" with digit indices listed from position ν upward.
pub fn parse_digit_string(s: &str, at: &str) -> Result<(i64, Vec<u32>)> {
    let (nu, rest) = s.split_once(':').ok_or_else(|| Error::parse(at, format!("expected \"ν:i,j,…\", got {s:?}")))?;
    let nu = nu.trim().parse().map_err(|_| Error::parse(at, format!("invalid valuation {nu:?}")))?;
    let digits = rest
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::parse(at, format!("invalid digit index {p:?}"))))
        .collect::<Result<_>>()?;
    Ok((nu, digits))
}

fn strings(v: &[BigRational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn ints(v: &[BigInt]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn residue_json(reps: &[Vec<BigInt>]) -> Value {
    json!(reps.iter().map(|r| ints(r)).collect::<Vec<_>>())
}

pub fn analyze(config: &SystemConfig, warnings: &mut Vec<String>) -> Result<Value> {
    let base = Arc::new(config.base()?);
    if base.is_degenerate() {
        warnings.push(DEGENERATE_WARNING.into());
    }
    let system = config.system(base.clone())?;
    Ok(json!({
        "n": base.n,
        "matrix": base.a,
        "a": base.counts.a.to_string(),
        "b": base.counts.b.to_string(),
        "det": format_rational(&base.det),
        "abs_det": format_rational(&num_traits::Signed::abs(&base.det)),
        "m": base.m.to_string(),
        "invariant_factors": base.factors.factors.iter().map(|p| p.to_strings()).collect::<Vec<_>>(),
        "primitive_factors": base.factors.primitive_factors.iter().map(|p| p.to_strings()).collect::<Vec<_>>(),
        "residues_a": residue_json(&base.residues_a.representatives),
        "residues_b": residue_json(&base.residues_b.representatives),
        "k_a": base.kernel_a.stabilization_depth,
        "k_b": base.kernel_b.stabilization_depth,
        "digits": system.digits(),
        "standard": system.is_standard(),
        "degenerate": base.is_degenerate(),
    }))
}

pub fn residues(config: &SystemConfig) -> Result<Value> {
    let base = config.base()?;
    Ok(json!({
        "a": { "count": base.counts.a.to_string(), "kernel_basis": base.kernel_a.lattice.int_basis().iter().map(|r| ints(r)).collect::<Vec<_>>(), "representatives": residue_json(&base.residues_a.representatives) },
        "b": { "count": base.counts.b.to_string(), "kernel_basis": base.kernel_b.lattice.int_basis().iter().map(|r| ints(r)).collect::<Vec<_>>(), "representatives": residue_json(&base.residues_b.representatives) },
    }))
}

pub fn expand(config: &SystemConfig, vector: &str, steps: Option<usize>) -> Result<Value> {
    let base = Arc::new(config.base()?);
    let system = config.system(base.clone())?;
    let v = parse_vector(vector, "vector")?;
    let x = vector_element(&base, &v, config.options.max_exp.unwrap_or(16))?;
    let steps = steps.or(config.options.max_steps).unwrap_or(64);
    let e = system.expand(&x, steps, Policy::FirstMatch)?;
    let recon = system.evaluate_digits(&e.digits).add(&e.remainder.shift(e.digits.len() as i64));
    if base.value(&recon) != base.value(&x) {
        return Err(Error::invariant("expansion does not reconstruct its input"));
    }
    Ok(json!({ "input": strings(&v), "expansion": e }))
}

pub fn tile<W: Write>(config: &SystemConfig, k: usize, depth: i64, cap: usize, precision: usize, out: W) -> Result<usize> {
    let base = Arc::new(config.base()?);
    base.require_solenoid()?;
    let system = config.system(base.clone())?;
    let cloud = point_cloud(&system, k, depth, cap)?;
    write_csv(&cloud.points, base.n, precision, out)?;
    Ok(cloud.points.len())
}

pub fn tiling(config: &SystemConfig, k: usize, samples: usize, seed: u64, cap: usize) -> Result<Value> {
    let base = Arc::new(config.base()?);
    base.require_solenoid()?;
    let system = config.system(base.clone())?;
    let measure = measure_evidence(&system, 3, cap)?;
    let cmp = compare_resolutions(&system, k, samples, seed)?;
    Ok(json!({ "measure": measure, "multiplicity": cmp }))
}

pub fn chars(config: &SystemConfig, s: &str, y: Option<&str>, y_vector: Option<&str>, r: Option<&str>, depth: i64) -> Result<String> {
    let base = config.base()?;
    let dual = build_dual_context(&base)?;
    let (nu, sd) = parse_digit_string(s, "s")?;
    let s = CharacterIndex::from_digits(&dual, nu, &sd)?;
    let phase = match (y, y_vector) {
        (Some(y), None) => {
            let (nu, yd) = parse_digit_string(y, "y")?;
            S(&dual, &s, &TruncatedBAdic::from_digits(&dual.primal, nu, &yd, true)?)?
        }
        (None, Some(v)) => {
            let v = parse_vector(v, "y-vector")?;
            let z = vector_element(&base, &v, config.options.max_exp.unwrap_or(16))?;
            let p = PointKA::phi(&dual.primal, &z, depth);
            let r = match r {
                Some(r) => parse_vector(r, "r")?,
                None => vec![BigRational::from_integer(BigInt::from(0)); base.n],
            };
            torus_character(&dual, &r, &s, &p)?
        }
        _ => return Err(Error::Config("exactly one of --y and --y-vector is required".into())),
    };
    Ok(format_turns(&phase))
}

fn set_threads() {
    if let Some(n) = std::env::var("TILEKIT_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Analyze(c) => {
            let cfg = SystemConfig::load(&c.config)?;
            let mut warnings = Vec::new();
            let report = analyze(&cfg, &mut warnings)?;
            for w in &warnings {
                writeln!(stderr, "warning: {w}")?;
            }
            emit(&c.out, &pretty(&report), stdout)
        }
        Command::Residues(c) => {
            let cfg = SystemConfig::load(&c.config)?;
            emit(&c.out, &pretty(&residues(&cfg)?), stdout)
        }
        Command::Expand { common: c, vector, steps } => {
            let cfg = SystemConfig::load(&c.config)?;
            emit(&c.out, &pretty(&expand(&cfg, &vector, steps)?), stdout)
        }
        Command::Tile { common: c, precision } => {
            let cfg = SystemConfig::load(&c.config)?;
            let o = &cfg.options;
            let k = c.k.or(o.k).unwrap_or(4);
            let depth = c.depth.or(o.depth).unwrap_or(16);
            let cap = c.cap.or(o.cap).unwrap_or(crate::tile::block::DEFAULT_CAP);
            let precision = precision.or(o.precision).unwrap_or(17);
            let mut buf = Vec::new();
            let rows = tile(&cfg, k, depth, cap, precision, &mut buf)?;
            writeln!(stderr, "{rows} points")?;
            match &c.out {
                Some(p) => fs::write(p, &buf).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
                None => Ok(stdout.write_all(&buf)?),
            }
        }
        Command::Tiling { common: c, samples } => {
            let cfg = SystemConfig::load(&c.config)?;
            let o = &cfg.options;
            let k = c.k.or(o.k).unwrap_or(12);
            let samples = samples.or(o.samples).unwrap_or(400);
            let seed = c.seed.or(o.seed).unwrap_or(0);
            let cap = c.cap.or(o.cap).unwrap_or(crate::tile::block::DEFAULT_CAP);
            emit(&c.out, &pretty(&tiling(&cfg, k, samples, seed, cap)?), stdout)
        }
        Command::Chars { common: c, s, y, y_vector, r } => {
            let cfg = SystemConfig::load(&c.config)?;
            let depth = c.depth.or(cfg.options.depth).unwrap_or(32);
            let turns = chars(&cfg, &s, y.as_deref(), y_vector.as_deref(), r.as_deref(), depth)?;
            emit(&c.out, &format!("{turns}\n"), stdout)
        }
    }
}

/// Parse `args`, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 2;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    set_threads();
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
