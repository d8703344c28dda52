//! Command-line driver: configuration, verification suites, JSON reports and
//! the single-shot compute subcommands.

pub mod checks;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::json;

use crate::cgx::{BracketSpec, FunctionAlgebra, PWFunction};
use crate::coiso::{CoisoError, CoisoSide, WindowedChecker};
use crate::kernel::{parse_q, q_to_string, Q};
use crate::liebialg::{cobracket, mix_tensor, standard_r, LieAlgebra};
use crate::que::{Gen, QFunctionAlgebra, QueError, Uq, DEFAULT_DEGREE_BOUND};

use checks::{Abort, CheckSpec, Engine, Tally, CHECKS, DETERMINISM};

pub const REPORT_SCHEMA: &str = "qtwist-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Classical,
    Quantum,
    Coiso,
    Determinism,
}

pub const ALL_SUITES: [Suite; 4] = [Suite::Classical, Suite::Quantum, Suite::Coiso, Suite::Determinism];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn ser_q<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q_to_string(x))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub algebra: String,
    pub m: usize,
    pub hbar_order: usize,
    /// PBW degree bound; `None` picks max(12, 4K + 2)
    pub degree_bound: Option<usize>,
    pub weight_bound: i64,
    #[serde(serialize_with = "ser_q")]
    pub form_scale: Q,
    pub seed: u64,
    pub suites: Vec<Suite>,
}

pub const DEFAULT_SEED: u64 = 20240917;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algebra: "sl2".into(),
            m: 2,
            hbar_order: 3,
            degree_bound: None,
            weight_bound: 2,
            form_scale: Q::from_integer(1.into()),
            seed: DEFAULT_SEED,
            suites: ALL_SUITES.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !["sl2", "sl3"].contains(&self.algebra.as_str()) {
            return Err(ConfigError(format!("unknown algebra {:?} (expected sl2 or sl3)", self.algebra)));
        }
        if !(1..=3).contains(&self.m) {
            return Err(ConfigError(format!("m = {} outside 1..=3", self.m)));
        }
        if !(2..=6).contains(&self.hbar_order) {
            return Err(ConfigError(format!("hbar order {} outside 2..=6", self.hbar_order)));
        }
        if self.degree_bound == Some(0) {
            return Err(ConfigError("degree bound must be positive".into()));
        }
        if !(1..=4).contains(&self.weight_bound) {
            return Err(ConfigError(format!("weight bound {} outside 1..=4", self.weight_bound)));
        }
        if self.form_scale.is_zero() {
            return Err(ConfigError("form scale must be nonzero".into()));
        }
        if self.suites.is_empty() {
            return Err(ConfigError("no suite selected".into()));
        }
        Ok(())
    }

    pub fn effective_degree_bound(&self) -> usize {
        self.degree_bound.unwrap_or(DEFAULT_DEGREE_BOUND.max(4 * self.hbar_order + 2))
    }

    fn selected(&self) -> Vec<&'static CheckSpec> {
        CHECKS.iter().filter(|c| self.suites.contains(&c.suite)).collect()
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CheckRecord {
    pub id: String,
    pub name: String,
    pub suite: Suite,
    pub anchor: String,
    pub status: Status,
    /// number of individual identities evaluated
    pub cases: usize,
    /// total count of nonzero residual coefficients
    pub residual: usize,
    pub witness: Option<String>,
    pub reason: Option<String>,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Default, PartialEq, Eq)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: RunConfig,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.summary.fail > 0)
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// record wall time per check (breaks byte-identity across runs)
    pub timings: bool,
}

fn record(
    id: &str,
    name: &str,
    suite: Suite,
    anchor: &str,
    out: Result<Tally, Abort>,
    wall: Option<u64>,
) -> CheckRecord {
    let (status, tally, reason) = match out {
        Ok(t) => {
            let st = t.status();
            let reason = t.inconclusive.clone();
            (st, t, reason)
        }
        Err(Abort::Resource(r)) => (Status::Inconclusive, Tally::default(), Some(r)),
        Err(Abort::Broken(r)) => {
            let t = Tally { witness: Some(r), ..Tally::default() };
            (Status::Fail, t, None)
        }
    };
    CheckRecord {
        id: id.into(),
        name: name.into(),
        suite,
        anchor: anchor.into(),
        status,
        cases: tally.cases,
        residual: tally.residual,
        witness: tally.witness,
        reason,
        detail: tally.detail.join("; "),
        wall_ms: wall,
    }
}

fn run_one(engine: &Engine, spec: &CheckSpec, timings: bool) -> CheckRecord {
    let start = Instant::now();
    let out = (spec.run)(engine);
    let wall = timings.then(|| start.elapsed().as_millis() as u64);
    record(spec.id, spec.name, spec.suite, spec.anchor, out, wall)
}

fn run_checks(cfg: &RunConfig, specs: &[&'static CheckSpec], timings: bool) -> Result<Vec<CheckRecord>, ConfigError> {
    let engine = Engine::new(cfg).map_err(ConfigError)?;
    Ok(specs.par_iter().map(|s| run_one(&engine, s, timings)).collect())
}

/// Run the selected suites. Checks go to the rayon pool; the report is sorted by id.
pub fn run_suite(cfg: &RunConfig, opts: RunOptions) -> Result<Report, ConfigError> {
    cfg.validate()?;
    let specs = cfg.selected();
    let mut records = run_checks(cfg, &specs, opts.timings)?;
    if cfg.suites.contains(&Suite::Determinism) {
        let start = Instant::now();
        // rerun on a single worker with a fresh engine and compare the records
        let sample: Vec<&'static CheckSpec> =
            if specs.is_empty() { CHECKS.iter().take(3).collect() } else { specs.clone() };
        let first: Vec<CheckRecord> = if specs.is_empty() {
            run_checks(cfg, &sample, false)?
        } else {
            records
                .iter()
                .cloned()
                .map(|mut r| {
                    r.wall_ms = None;
                    r
                })
                .collect()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| ConfigError(e.to_string()))?;
        let second = pool.install(|| run_checks(cfg, &sample, false))?;
        let mut t = Tally::default();
        for (a, b) in first.iter().zip(&second) {
            let (sa, sb) = (serde_json::to_string(a).expect("json"), serde_json::to_string(b).expect("json"));
            t.expect(|| format!("record {} differs between runs", a.id), sa == sb);
        }
        t.expect(|| "record count differs".into(), first.len() == second.len());
        t.note(format!("{} records rerun on one worker", sample.len()));
        let wall = opts.timings.then(|| start.elapsed().as_millis() as u64);
        let (id, name, anchor) = DETERMINISM;
        records.push(record(id, name, Suite::Determinism, anchor, Ok(t), wall));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let mut summary = Summary::default();
    for r in &records {
        match r.status {
            Status::Pass => summary.pass += 1,
            Status::Fail => summary.fail += 1,
            Status::Inconclusive => summary.inconclusive += 1,
        }
    }
    Ok(Report { schema: REPORT_SCHEMA, config: cfg.clone(), checks: records, summary })
}

// ---------------------------------------------------------------- CLI

#[derive(Parser, Debug)]
#[command(
    name = "qtwist",
    version,
    about = "Exact checks for twisted products of quasitriangular Lie bialgebras and their quantizations"
)]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Args, Debug)]
pub struct GlobalOpts {
    /// sl2 or sl3
    #[arg(long, env = "QTWIST_ALGEBRA", default_value = "sl2", global = true)]
    pub algebra: String,
    /// number of factors (1..=3)
    #[arg(long, env = "QTWIST_M", default_value_t = 2, global = true)]
    pub m: usize,
    /// truncation order K: work mod ħ^K (2..=6)
    #[arg(long = "hbar-order", env = "QTWIST_HBAR_ORDER", default_value_t = 3, global = true)]
    pub hbar_order: usize,
    /// PBW degree bound [default: max(12, 4K+2)]
    #[arg(long = "degree-bound", env = "QTWIST_DEGREE_BOUND", global = true)]
    pub degree_bound: Option<usize>,
    /// highest weights per factor range over coordinate sums up to this bound
    #[arg(long = "weight-bound", env = "QTWIST_WEIGHT_BOUND", default_value_t = 2, global = true)]
    pub weight_bound: i64,
    /// rescale the invariant form by this rational (classical suite)
    #[arg(long = "form-scale", env = "QTWIST_FORM_SCALE", default_value = "1", global = true)]
    pub form_scale: String,
    #[arg(long, env = "QTWIST_SEED", default_value_t = DEFAULT_SEED, global = true)]
    pub seed: u64,
    /// suites to run (comma separated) [default: all]
    #[arg(long, env = "QTWIST_SUITE", value_delimiter = ',', global = true)]
    pub suite: Vec<Suite>,
    /// write the JSON output here instead of stdout
    #[arg(long, env = "QTWIST_OUT", global = true)]
    pub out: Option<PathBuf>,
    /// include wall time per check in the report
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BracketKind {
    /// {,}_r^(m) from r^(m) on C[G^m]
    Twisted,
    /// {,}^(m) on C[N\G]^⊗m
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProductKind {
    /// the product of C_h[G^m] (factorwise)
    Plain,
    /// the twisted product on C_h[N\G]^⊗m
    Affine,
    /// μ(J(f⊗g)) on C_h[G]^⊗m
    Twisted,
    /// μ(J(f⊗g)J⁻¹)
    Conjugated,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the verification suites and emit a JSON report (default)
    Run,
    /// Poisson bracket of two classical functions
    Bracket {
        #[arg(value_enum)]
        kind: BracketKind,
        /// function term, e.g. phi:1:0@0 or c:1:0:1@1
        f: String,
        g: String,
    },
    /// Product of two quantized functions
    Qmultiply {
        f: String,
        g: String,
        #[arg(long, value_enum, default_value = "affine")]
        product: ProductKind,
    },
    /// δ(x) for the standard r-matrix
    Cobracket {
        #[arg(value_name = "ALGEBRA")]
        alg: String,
        /// basis label, e.g. e or f12
        x: String,
    },
    /// The mixed tensor Mix^m(r_st) on g^m
    Mix {
        #[arg(value_name = "ALGEBRA")]
        alg: String,
        #[arg(value_name = "M")]
        factors: usize,
    },
    /// Twi^m(R) for U_h(sl2)
    Twi {
        #[arg(value_name = "M")]
        factors: usize,
    },
    /// Windowed R-compatibility of U and strong coisotropy of U^⊗m in the twisted
    /// product, for U generated by e.g. H,E
    CoisoCheck { gens: String },
}

impl GlobalOpts {
    pub fn config(&self) -> Result<RunConfig, ConfigError> {
        let form_scale = parse_q(&self.form_scale)
            .ok_or_else(|| ConfigError(format!("cannot parse form scale {:?}", self.form_scale)))?;
        let cfg = RunConfig {
            algebra: self.algebra.clone(),
            m: self.m,
            hbar_order: self.hbar_order,
            degree_bound: self.degree_bound,
            weight_bound: self.weight_bound,
            form_scale,
            seed: self.seed,
            suites: if self.suite.is_empty() {
                ALL_SUITES.to_vec()
            } else {
                let mut s = self.suite.clone();
                s.sort();
                s.dedup();
                s
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A parsed function term: weight, ξ index, optional v index, factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub weight: Vec<i64>,
    pub xi: usize,
    /// `None` for Φ_ϖ(ε^a)
    pub v: Option<usize>,
    pub factor: usize,
    pub constant: bool,
}

/// `phi:W:A[@J]`, `c:W:A:B[@J]` or `1`, with W a comma-separated weight.
pub fn parse_term(s: &str) -> Result<Term, ConfigError> {
    let bad = || ConfigError(format!("cannot parse function term {s:?}"));
    if s == "1" {
        return Ok(Term { weight: Vec::new(), xi: 0, v: Some(0), factor: 0, constant: true });
    }
    let (body, factor) = match s.split_once('@') {
        Some((b, j)) => (b, j.parse().map_err(|_| bad())?),
        None => (s, 0),
    };
    let parts: Vec<&str> = body.split(':').collect();
    let weight = |w: &str| -> Result<Vec<i64>, ConfigError> {
        w.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
    };
    let idx = |x: &str| -> Result<usize, ConfigError> { x.parse().map_err(|_| bad()) };
    match parts.as_slice() {
        ["phi", w, a] => Ok(Term { weight: weight(w)?, xi: idx(a)?, v: None, factor, constant: false }),
        ["c", w, a, b] => Ok(Term { weight: weight(w)?, xi: idx(a)?, v: Some(idx(b)?), factor, constant: false }),
        _ => Err(bad()),
    }
}

fn classical_term(fa: &FunctionAlgebra, t: &Term, m: usize) -> Result<PWFunction, ConfigError> {
    if t.factor >= m {
        return Err(ConfigError(format!("factor {} outside 0..{m}", t.factor)));
    }
    if t.constant {
        return Ok(fa.one(m));
    }
    let f = match t.v {
        None => fa.phi(&t.weight, t.xi),
        Some(b) => fa.coefficient(&t.weight, t.xi, b),
    }
    .map_err(|e| ConfigError(e.to_string()))?;
    Ok(fa.embed(&f, t.factor, m))
}

fn quantum_term(qa: &QFunctionAlgebra, t: &Term, m: usize) -> Result<PWFunction, ConfigError> {
    if t.factor >= m {
        return Err(ConfigError(format!("factor {} outside 0..{m}", t.factor)));
    }
    if t.constant {
        return Ok(qa.one(m));
    }
    let [n] = t.weight.as_slice() else {
        return Err(ConfigError(format!("quantized functions take an sl2 weight, got {:?}", t.weight)));
    };
    let f = qa.coefficient(*n, t.xi, t.v.unwrap_or(0)).map_err(|e| ConfigError(e.to_string()))?;
    Ok(qa.embed(&f, t.factor, m))
}

pub fn parse_gens(s: &str) -> Result<Vec<Gen>, ConfigError> {
    s.split(',')
        .map(|x| match x.trim() {
            "E" | "e" => Ok(Gen::E),
            "F" | "f" => Ok(Gen::F),
            "H" | "h" => Ok(Gen::H),
            other => Err(ConfigError(format!("unknown generator {other:?} (expected H, E or F)"))),
        })
        .collect()
}

/// Output of a compute subcommand. Resource exhaustion is reported in the
/// value, not as an error.
pub fn compute(cmd: &Command, cfg: &RunConfig) -> Result<serde_json::Value, ConfigError> {
    let cerr = |e: &dyn fmt::Display| ConfigError(e.to_string());
    match cmd {
        Command::Run => Err(ConfigError("run is not a compute command".into())),
        Command::Bracket { kind, f, g } => {
            let alg = LieAlgebra::with_form_scale(&cfg.algebra, cfg.form_scale.clone()).map_err(|e| cerr(&e))?;
            let fa = FunctionAlgebra::classical(Arc::new(alg));
            let (x, y) = (classical_term(&fa, &parse_term(f)?, cfg.m)?, classical_term(&fa, &parse_term(g)?, cfg.m)?);
            let spec = match kind {
                BracketKind::Twisted => BracketSpec::Twisted { m: cfg.m },
                BracketKind::Mixed => BracketSpec::Mixed { m: cfg.m },
            };
            let b = fa.classical_bracket(&x, &y, &spec).map_err(|e| cerr(&e))?;
            Ok(
                json!({ "algebra": cfg.algebra, "m": cfg.m, "bracket": format!("{kind:?}").to_lowercase(), "result": b.to_json() }),
            )
        }
        Command::Qmultiply { f, g, product } => {
            if cfg.algebra != "sl2" {
                return Err(ConfigError("quantized functions are implemented for sl2 only".into()));
            }
            let qa = QFunctionAlgebra::new(cfg.hbar_order, cfg.effective_degree_bound()).map_err(|e| cerr(&e))?;
            let (x, y) = (quantum_term(&qa, &parse_term(f)?, cfg.m)?, quantum_term(&qa, &parse_term(g)?, cfg.m)?);
            let out = match product {
                ProductKind::Plain => qa.q_multiply(&x, &y),
                ProductKind::Affine => qa.quantum_affine_multiply(&x, &y),
                ProductKind::Twisted => qa.twisted_multiply(&x, &y),
                ProductKind::Conjugated => qa.h_multiply(&x, &y),
            };
            let name = format!("{product:?}").to_lowercase();
            Ok(match out {
                Ok(p) => json!({ "m": cfg.m, "hbar_order": cfg.hbar_order, "product": name, "result": p.to_json() }),
                Err(e @ QueError::DegreeBound { .. }) => {
                    json!({ "product": name, "status": "inconclusive", "reason": e.to_string() })
                }
                Err(e) => return Err(cerr(&e)),
            })
        }
        Command::Cobracket { alg, x } => {
            let g = LieAlgebra::with_form_scale(alg, cfg.form_scale.clone()).map_err(|e| cerr(&e))?;
            let i = g.index(x).map_err(|e| cerr(&e))?;
            let r = standard_r(&g).map_err(|e| cerr(&e))?.r;
            let d = cobracket(&g, &r, &g.basis_vec(i));
            Ok(json!({ "element": x, "display": d.display(&g), "tensor": d.to_json(&g) }))
        }
        Command::Mix { alg, factors } => {
            if *factors == 0 {
                return Err(ConfigError("m must be positive".into()));
            }
            let g = LieAlgebra::with_form_scale(alg, cfg.form_scale.clone()).map_err(|e| cerr(&e))?;
            let r = standard_r(&g).map_err(|e| cerr(&e))?.r;
            let gm = g.power(*factors);
            let t = mix_tensor(&g, &r, *factors);
            Ok(json!({ "m": factors, "display": t.display(&gm), "tensor": t.to_json(&gm) }))
        }
        Command::Twi { factors } => {
            if *factors == 0 {
                return Err(ConfigError("m must be positive".into()));
            }
            let u = Uq::new(cfg.hbar_order, cfg.effective_degree_bound());
            let out = u.r_matrix_sl2().and_then(|r| u.twi_m(&r, *factors));
            Ok(match out {
                Ok(t) => json!({ "m": factors, "hbar_order": cfg.hbar_order, "tensor": t.to_json() }),
                Err(e @ QueError::DegreeBound { .. }) => {
                    json!({ "m": factors, "status": "inconclusive", "reason": e.to_string() })
                }
                Err(e) => return Err(cerr(&e)),
            })
        }
        Command::CoisoCheck { gens } => {
            let gs = parse_gens(gens)?;
            let qa = QFunctionAlgebra::new(cfg.hbar_order, cfg.effective_degree_bound()).map_err(|e| cerr(&e))?;
            let uq = qa.uq.clone();
            let m = cfg.m;
            let inconclusive = |e: CoisoError| json!({ "status": "inconclusive", "reason": e.to_string() });
            // the hypothesis is about R and U itself; its consequence is about U^⊗m
            let base = WindowedChecker::sl2_power(uq.clone(), &gs, 1).map_err(|e| cerr(&e))?;
            let r = uq.r_matrix_sl2().map_err(|e| cerr(&e))?;
            let membership = match base.r_membership(&r) {
                Ok((v, w)) => json!({ "verdict": v, "window": w }),
                Err(e) => inconclusive(e),
            };
            let checker = WindowedChecker::sl2_power(uq.clone(), &gs, m).map_err(|e| cerr(&e))?;
            let j = qa.twi(m).map_err(|e| cerr(&e))?;
            let th = uq.twist_hopf(&j, m).map_err(|e| cerr(&e))?;
            let delta = |t: &crate::que::UqTensor| th.coproduct(t);
            let strong = match checker.strong_coiso(CoisoSide::Right, &delta, 1) {
                Ok(c) => serde_json::to_value(c).expect("json"),
                Err(e) => inconclusive(e),
            };
            Ok(
                json!({ "generators": gens, "m": m, "hbar_order": cfg.hbar_order, "r_membership": membership, "strongly_coisotropic": strong }),
            )
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), ConfigError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| ConfigError(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Entry point shared by the binary; returns the process exit code
/// (0 pass, 1 any failed check, 2 configuration or usage error).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match cli.opts.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let result = match cli.command.as_ref().unwrap_or(&Command::Run) {
        Command::Run => run_suite(&cfg, RunOptions { timings: cli.opts.timings }).and_then(|report| {
            for c in &report.checks {
                eprintln!("{} {:<32} {:?}", c.id, c.name, c.status);
            }
            emit(&report.to_json(), &cli.opts.out).map(|_| report.exit_code())
        }),
        cmd => compute(cmd, &cfg).and_then(|v| {
            let mut s = serde_json::to_string_pretty(&v).expect("json");
            s.push('\n');
            emit(&s, &cli.opts.out).map(|_| 0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}
