//! The verification checks behind `run_suite`. Each check returns a tally of
//! exact residuals; a resource bound hit on the way turns into an
//! inconclusive record rather than a failure.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cgx::{BracketSpec, CgError, FunctionAlgebra, PWFunction, Side};
use crate::coiso::{
    ideal_commutator, quantum_section_check, semi_invariants, Character, CharacterMonoid, CoisoError, CoisoSide,
    FunctionWindow, HopfSubalgebra, PivotOrder, Verdict, WindowedChecker,
};
use crate::kernel::{q, qf, series_inv, Ctx, Series, Q};
use crate::liebialg::{
    borel, cobracket, cybe_residual, diag_embed, mix_tensor, product_cobracket, r_membership_lie, standard_r,
    strongly_coisotropic_lie, twisted_r, verify_twisting_element, LieAlgebra, LieError, LieTensor, Subspace,
};
use crate::linalg::SparseVec;
use crate::que::{semiclassical_bracket, Gen, Mono, QFunction, QFunctionAlgebra, QueError, Uq, UqElement, UqTensor};

use super::{RunConfig, Status, Suite};

/// Why a check stopped before reaching a verdict.
#[derive(Debug)]
pub enum Abort {
    /// a window or dimension bound was exceeded
    Resource(String),
    /// an operation failed outright
    Broken(String),
}

impl From<QueError> for Abort {
    fn from(e: QueError) -> Self {
        match e {
            QueError::DegreeBound { .. } | QueError::Cg(CgError::DimensionBound { .. }) => {
                Abort::Resource(e.to_string())
            }
            _ => Abort::Broken(e.to_string()),
        }
    }
}

impl From<CgError> for Abort {
    fn from(e: CgError) -> Self {
        QueError::Cg(e).into()
    }
}

impl From<CoisoError> for Abort {
    fn from(e: CoisoError) -> Self {
        match e {
            CoisoError::Que(q) => q.into(),
            CoisoError::Window(_) => Abort::Resource(e.to_string()),
            _ => Abort::Broken(e.to_string()),
        }
    }
}

impl From<LieError> for Abort {
    fn from(e: LieError) -> Self {
        Abort::Broken(e.to_string())
    }
}

/// Running record of one check.
#[derive(Debug, Default)]
pub struct Tally {
    pub cases: usize,
    pub residual: usize,
    pub witness: Option<String>,
    pub inconclusive: Option<String>,
    pub detail: Vec<String>,
}

impl Tally {
    /// One case whose residual has `terms` nonzero coefficients.
    pub fn residual(&mut self, label: impl FnOnce() -> String, terms: usize) {
        self.cases += 1;
        if terms > 0 {
            self.residual += terms;
            if self.witness.is_none() {
                self.witness = Some(label());
            }
        }
    }

    pub fn expect(&mut self, label: impl FnOnce() -> String, ok: bool) {
        self.residual(label, usize::from(!ok));
    }

    /// A three-valued answer that should be `want`.
    pub fn verdict(&mut self, label: impl Fn() -> String, v: &Verdict, want: bool) {
        match v {
            Verdict::Inconclusive { reason } => {
                self.cases += 1;
                if self.inconclusive.is_none() {
                    self.inconclusive = Some(format!("{}: {reason}", label()));
                }
            }
            Verdict::True => self.expect(label, want),
            Verdict::False { witness } => self.expect(|| format!("{}: {witness}", label()), !want),
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.detail.push(s.into());
    }

    pub fn merge(&mut self, o: Tally) {
        self.cases += o.cases;
        self.residual += o.residual;
        if self.witness.is_none() {
            self.witness = o.witness;
        }
        if self.inconclusive.is_none() {
            self.inconclusive = o.inconclusive;
        }
        self.detail.extend(o.detail);
    }

    pub fn status(&self) -> Status {
        if self.residual > 0 {
            Status::Fail
        } else if self.inconclusive.is_some() {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

type Outcome = Result<Tally, Abort>;

/// Static description of one check.
pub struct CheckSpec {
    pub id: &'static str,
    pub name: &'static str,
    pub anchor: &'static str,
    pub suite: Suite,
    pub run: fn(&Engine) -> Outcome,
}

pub const CHECKS: &[CheckSpec] = &[
    CheckSpec {
        id: "C01",
        name: "cybe",
        anchor: "classical Yang-Baxter equation for r_st and the twisted product r^(m)",
        suite: Suite::Classical,
        run: c01_cybe,
    },
    CheckSpec {
        id: "C02",
        name: "cobracket-laws",
        anchor: "antisymmetry, cocycle and co-Jacobi identities of the cobracket of r_st",
        suite: Suite::Classical,
        run: c02_cobracket,
    },
    CheckSpec {
        id: "C03",
        name: "twisting-element",
        anchor: "Mix^m(r_st) is a twisting element of the direct product g^m",
        suite: Suite::Classical,
        run: c03_twisting,
    },
    CheckSpec {
        id: "C04",
        name: "affine-bracket-representation",
        anchor: "{Φ_ϖ(ξ), Φ_λ(μ)} = Φ_{ϖ+λ}(p_{ϖ,λ}(Λ_st·(ξ⊗μ))) on N\\G",
        suite: Suite::Classical,
        run: c04_phi_identity,
    },
    CheckSpec {
        id: "C05",
        name: "quotient-bracket-and-action",
        anchor: "{,}_r^(m) = {,}^(m) on semi-invariants; the diagonal G-action on (N\\G)^m is Poisson",
        suite: Suite::Classical,
        run: c05_quotient,
    },
    CheckSpec {
        id: "C06",
        name: "grading",
        anchor: "{C[G]^λ, C[G]^μ}^(m) ⊂ C[G]^{λ+μ}; S(λ) closes under the bracket",
        suite: Suite::Classical,
        run: c06_grading,
    },
    CheckSpec {
        id: "C07",
        name: "jacobi",
        anchor: "Jacobi identity of {,}^(m) on fundamental generators of C[N\\G]^⊗m",
        suite: Suite::Classical,
        run: c07_jacobi,
    },
    CheckSpec {
        id: "C08",
        name: "classical-coisotropy",
        anchor: "strong coisotropy of b, span(f) and b^m inside (g^m, r^(m))",
        suite: Suite::Classical,
        run: c08_coiso_lie,
    },
    CheckSpec {
        id: "C09",
        name: "quantum-axioms",
        anchor: "Drinfeld-Jimbo relations, Hopf axioms and quasitriangularity of R for U_h(sl2)",
        suite: Suite::Quantum,
        run: c09_quantum_axioms,
    },
    CheckSpec {
        id: "C10",
        name: "twists",
        anchor: "Twi^m(R) is a twist; ordered-product and inductive forms agree",
        suite: Suite::Quantum,
        run: c10_twists,
    },
    CheckSpec {
        id: "C11",
        name: "semiclassical-limits",
        anchor: "R, R^(m), C_h[G] and C_h[(N\\G)^2] quantize r_st, r^(m), {,}_r^(1) and {,}^(2)",
        suite: Suite::Quantum,
        run: c11_semiclassical,
    },
    CheckSpec {
        id: "C12",
        name: "local-factorization",
        anchor: "the twisted product on C_h[N\\G]^⊗m is associative and locally factored",
        suite: Suite::Quantum,
        run: c12_factorization,
    },
    CheckSpec {
        id: "C13",
        name: "hopf-coisotropy",
        anchor: "R-compatibility, strong coisotropy, characters, semi-invariants and quantum sections for U_h(b)",
        suite: Suite::Coiso,
        run: c13_coiso_pipeline,
    },
];

pub const DETERMINISM: (&str, &str, &str) =
    ("C14", "determinism", "identical configuration gives byte-identical check records");

/// Shared read-mostly state of one run.
pub struct Engine {
    pub cfg: RunConfig,
    /// the configured algebra with its form scale
    pub g: Arc<LieAlgebra>,
    /// classical function algebra on G
    pub fa: FunctionAlgebra,
    /// PBW degree bound used by the quantum checks
    pub degree_bound: usize,
}

impl Engine {
    pub fn new(cfg: &RunConfig) -> Result<Self, String> {
        let g = LieAlgebra::with_form_scale(&cfg.algebra, cfg.form_scale.clone()).map_err(|e| e.to_string())?;
        let g = Arc::new(g);
        let fa = FunctionAlgebra::classical(g.clone());
        Ok(Engine { cfg: cfg.clone(), g, fa, degree_bound: cfg.effective_degree_bound() })
    }

    fn is_sl2(&self) -> bool {
        self.cfg.algebra == "sl2"
    }

    fn quantum_guard(&self) -> Result<(), Abort> {
        if self.is_sl2() {
            Ok(())
        } else {
            Err(Abort::Resource(format!("the quantum engine implements U_h(sl2) only, not {}", self.cfg.algebra)))
        }
    }

    fn qa(&self) -> Result<QFunctionAlgebra, Abort> {
        self.quantum_guard()?;
        Ok(QFunctionAlgebra::new(self.cfg.hbar_order, self.degree_bound)?)
    }

    fn rank(&self) -> usize {
        self.fa.rank()
    }

    /// Dominant weights with coordinate sum in 1..=bound.
    fn nonzero_weights(&self, bound: i64) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = vec![Vec::new()];
        for _ in 0..self.rank() {
            out = out.into_iter().flat_map(|w| (0..=bound).map(move |k| [w.clone(), vec![k]].concat())).collect();
        }
        out.retain(|w| {
            let s: i64 = w.iter().sum();
            s >= 1 && s <= bound
        });
        out.sort_by_key(|w| (w.iter().sum::<i64>(), std::cmp::Reverse(w.clone())));
        out
    }

    fn fundamental_weights(&self) -> Vec<Vec<i64>> {
        (0..self.rank()).map(|i| (0..self.rank()).map(|j| i64::from(i == j)).collect()).collect()
    }

    fn dual_weight(&self, w: &[i64]) -> Vec<i64> {
        self.g.roots.as_ref().map(|rd| rd.dual_weight(w)).unwrap_or_else(|| w.to_vec())
    }

    fn dim_of(&self, w: &[i64]) -> Result<usize, Abort> {
        Ok(self.fa.rep(&self.dual_weight(w))?.dim)
    }

    /// Φ_{λ_1}(ε^{a_1})⊗⋯⊗Φ_{λ_m}(ε^{a_m}) for every basis choice; weight 0 is the constant.
    fn semi_invariant_basis(&self, weights: &[Vec<i64>]) -> Result<Vec<PWFunction>, Abort> {
        let mut out = vec![PWFunction::zero(0, 1)];
        for w in weights {
            let mut next = Vec::new();
            for f in &out {
                for a in 0..self.dim_of(w)? {
                    next.push(f.outer(&self.fa.phi(w, a)?));
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Every weight tuple with each factor in {0} ∪ `per_factor`.
    fn weight_tuples(&self, m: usize, per_factor: &[Vec<i64>]) -> Vec<Vec<Vec<i64>>> {
        let mut choices = vec![vec![0; self.rank()]];
        choices.extend(per_factor.iter().cloned());
        let mut out: Vec<Vec<Vec<i64>>> = vec![Vec::new()];
        for _ in 0..m {
            out = out
                .into_iter()
                .flat_map(|t| choices.iter().map(move |w| [t.clone(), vec![w.clone()]].concat()))
                .collect();
        }
        out
    }

    /// Φ_ϖ(ε^a) placed in factor j, for the fundamental weights ϖ.
    fn generators(&self, m: usize) -> Result<Vec<(String, PWFunction)>, Abort> {
        let mut out = Vec::new();
        for j in 0..m {
            for w in self.fundamental_weights() {
                for a in 0..self.dim_of(&w)? {
                    out.push((format!("Φ_{w:?}(ε^{a})@{j}"), self.fa.embed(&self.fa.phi(&w, a)?, j, m)));
                }
            }
        }
        Ok(out)
    }
}

fn fn_terms(f: &PWFunction) -> usize {
    f.blocks.values().map(|b| b.len()).sum()
}

fn uq_terms(t: &UqTensor) -> usize {
    t.terms.len()
}

fn classical(name: &str, s: &Q) -> Result<LieAlgebra, Abort> {
    Ok(LieAlgebra::with_form_scale(name, s.clone())?)
}

fn m_values(cfg: &RunConfig) -> Vec<usize> {
    let mut ms = vec![2, 3];
    if !ms.contains(&cfg.m) && cfg.m > 1 {
        ms.push(cfg.m);
    }
    ms
}

// ---------------------------------------------------------------- classical

fn c01_cybe(e: &Engine) -> Outcome {
    let mut t = Tally::default();
    for name in ["sl2", "sl3"] {
        let g = classical(name, &e.cfg.form_scale)?;
        let r = standard_r(&g)?.r;
        t.residual(|| format!("CYBE(r_st) on {name}"), cybe_residual(&g, &r).terms.len());
    }
    let r = standard_r(&e.g)?.r;
    for m in m_values(&e.cfg) {
        let gm = e.g.power(m);
        let rm = twisted_r(&e.g, &r, m);
        t.residual(|| format!("CYBE(r^({m})) on {}", gm.name), cybe_residual(&gm, &rm).terms.len());
        // r^(m) stays quasitriangular: symmetric part is (Ω, …, Ω)
        let sym = rm.symmetric_part();
        let diag_sym = crate::liebialg::diagonal_r(&e.g, &r.symmetric_part(), m);
        t.residual(|| format!("symmetric part of r^({m})"), sym.sub(&diag_sym).terms.len());
    }
    t.note(format!("sl2, sl3; r^(m) on {} for m in {:?}", e.cfg.algebra, m_values(&e.cfg)));
    Ok(t)
}

fn c02_cobracket(e: &Engine) -> Outcome {
    let mut t = Tally::default();
    for name in ["sl2", "sl3"] {
        let g = classical(name, &e.cfg.form_scale)?;
        let r = standard_r(&g)?.r;
        let n = g.dim();
        let delta: Vec<LieTensor> = (0..n).map(|i| cobracket(&g, &r, &g.basis_vec(i))).collect();
        for i in 0..n {
            let d = &delta[i];
            t.residual(|| format!("{name}: δ({}) antisymmetry", g.labels[i]), d.add(&d.swap()).terms.len());
            // co-Jacobi: cyclic sum of (δ⊗1)δ
            let mut dd = LieTensor::zero(3);
            for (k, c) in &d.terms {
                dd.add_scaled(&delta[k[0]].tensor(&LieTensor::basis(k[1])), c);
            }
            let mut cyc = LieTensor::zero(3);
            for p in [[0, 1, 2], [1, 2, 0], [2, 0, 1]] {
                cyc.add_scaled(&dd.permute(&p), &Q::one());
            }
            t.residual(|| format!("{name}: co-Jacobi at {}", g.labels[i]), cyc.terms.len());
            for j in 0..n {
                let xy = g.bracket(&g.basis_vec(i), &g.basis_vec(j));
                let lhs = cobracket(&g, &r, &xy);
                let rhs = crate::liebialg::ad_diag(&g, &g.basis_vec(i), &delta[j]).sub(&crate::liebialg::ad_diag(
                    &g,
                    &g.basis_vec(j),
                    &delta[i],
                ));
                t.residual(
                    || format!("{name}: cocycle at ({}, {})", g.labels[i], g.labels[j]),
                    lhs.sub(&rhs).terms.len(),
                );
            }
        }
    }
    t.note("all basis elements and pairs of sl2 and sl3");
    Ok(t)
}

fn c03_twisting(e: &Engine) -> Outcome {
    let mut t = Tally::default();
    let r = standard_r(&e.g)?.r;
    for m in m_values(&e.cfg) {
        let gm = e.g.power(m);
        let mix = mix_tensor(&e.g, &r, m);
        let delta = product_cobracket(&e.g, &gm, &r, m);
        let chk = verify_twisting_element(&gm, &mix, &delta);
        t.residual(|| format!("Mix^{m}(r_st) on {}", gm.name), chk.residual.terms.len());
        t.expect(|| format!("Mix^{m}(r_st) antisymmetric"), mix.add(&mix.swap()).is_zero());
    }
    t.note(format!("{} for m in {:?}", e.cfg.algebra, m_values(&e.cfg)));
    Ok(t)
}

/// Right side Φ_{ϖ+λ}(p_{ϖ,λ}(Λ·(ξ⊗μ))) computed from the representation matrices.
fn phi_rhs(e: &Engine, lambda: &LieTensor, w: &[i64], a: usize, l: &[i64], b: usize) -> Result<PWFunction, Abort> {
    let (wd, ld) = (e.dual_weight(w), e.dual_weight(l));
    let rw = e.fa.irrep(&wd)?;
    let rl = e.fa.irrep(&ld)?;
    let g = &e.g;
    // coordinates in V(λ*)*⊗V(ϖ*)*, index μ·dim + ξ (the order of the product's decomposition)
    let mut x: BTreeMap<usize, Q> = BTreeMap::new();
    for (k, c) in &lambda.terms {
        let ma = rw.matrix_of(&g.basis_vec(k[0]));
        let mb = rl.matrix_of(&g.basis_vec(k[1]));
        // dual action on both slots: the two signs cancel
        for (&(_, c1), v1) in ma.range((a, 0)..(a + 1, 0)) {
            for (&(_, c2), v2) in mb.range((b, 0)..(b + 1, 0)) {
                *x.entry(c2 * rw.dim + c1).or_insert_with(Q::zero) += c * v1 * v2;
            }
        }
    }
    let cg = e.fa.cg(&ld, &wd)?;
    let top = cg.cartan_component();
    let mut xi: BTreeMap<usize, Q> = BTreeMap::new();
    for (&(p, alpha), iv) in &top.inj {
        if let Some(xp) = x.get(&p) {
            *xi.entry(alpha).or_insert_with(Q::zero) += xp * iv.c0();
        }
    }
    let hw: BTreeMap<usize, Series> = [(0, Series::constant(1, Q::one()))].into_iter().collect();
    let v = e.fa.hw_projection(&ld, &wd, &hw)?;
    let mut out = PWFunction::zero(1, 1);
    for (alpha, c) in &xi {
        for (beta, s) in &v {
            out.add_entry(vec![top.weight.clone()], vec![*alpha, *beta], s.scale(c));
        }
    }
    Ok(out)
}

fn c04_phi_identity(e: &Engine) -> Outcome {
    let st = standard_r(&e.g)?;
    let weights = e.nonzero_weights(e.cfg.weight_bound);
    let mut cases = Vec::new();
    for w in &weights {
        for l in &weights {
            for a in 0..e.dim_of(w)? {
                for b in 0..e.dim_of(l)? {
                    cases.push((w.clone(), a, l.clone(), b));
                }
            }
        }
    }
    let spec = BracketSpec::Twisted { m: 1 };
    let results: Vec<Result<(String, usize, bool), Abort>> = cases
        .par_iter()
        .map(|(w, a, l, b)| {
            let f = e.fa.phi(w, *a)?;
            let h = e.fa.phi(l, *b)?;
            let lhs = e.fa.classical_bracket(&f, &h, &spec)?;
            let rhs = phi_rhs(e, &st.lambda, w, *a, l, *b)?;
            Ok((format!("ϖ={w:?} ξ={a} λ={l:?} μ={b}"), fn_terms(&lhs.sub(&rhs)), lhs.is_zero()))
        })
        .collect();
    let mut t = Tally::default();
    let mut nonzero = 0;
    for r in results {
        let (label, terms, zero) = r?;
        t.residual(|| label, terms);
        nonzero += usize::from(!zero);
    }
    // the identity must not hold vacuously
    t.expect(|| "every bracket in the window vanishes".into(), nonzero > 0);
    t.note(format!("{} weights {weights:?}, {nonzero} nonzero brackets", e.cfg.algebra));
    Ok(t)
}

/// Largest number of bracket pairs a window check evaluates.
pub const MAX_WINDOW_PAIRS: usize = 300_000;

/// Basis semi-invariants of (N\G)^m with each factor weight ≤ the bound, labelled.
fn window_functions(e: &Engine, m: usize) -> Result<Vec<(String, Vec<Vec<i64>>, PWFunction)>, Abort> {
    let mut per_factor = 1;
    for w in e.nonzero_weights(e.cfg.weight_bound) {
        per_factor += e.dim_of(&w)?;
    }
    let n = per_factor.pow(m as u32);
    if n * (n + 1) / 2 > MAX_WINDOW_PAIRS {
        return Err(Abort::Resource(format!(
            "window of {n} semi-invariants gives more than {MAX_WINDOW_PAIRS} pairs; lower --weight-bound or --m"
        )));
    }
    let mut out = Vec::new();
    for tuple in e.weight_tuples(m, &e.nonzero_weights(e.cfg.weight_bound)) {
        for (i, f) in e.semi_invariant_basis(&tuple)?.into_iter().enumerate() {
            out.push((format!("{tuple:?}#{i}"), tuple.clone(), f));
        }
    }
    Ok(out)
}

fn c05_quotient(e: &Engine) -> Outcome {
    let m = e.cfg.m;
    let mut t = Tally::default();
    // (a) the two bracket specs agree on the window
    let fs = window_functions(e, m)?;
    let pairs: Vec<(usize, usize)> = (0..fs.len()).flat_map(|i| (i..fs.len()).map(move |j| (i, j))).collect();
    let tw = BracketSpec::Twisted { m };
    let mx = BracketSpec::Mixed { m };
    let results: Vec<Result<usize, Abort>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let a = e.fa.classical_bracket(&fs[i].2, &fs[j].2, &tw)?;
            let b = e.fa.classical_bracket(&fs[i].2, &fs[j].2, &mx)?;
            Ok(fn_terms(&a.sub(&b)))
        })
        .collect();
    for ((i, j), r) in pairs.iter().zip(results) {
        t.residual(|| format!("{{{}, {}}}_r ≠ {{{}, {}}}", fs[*i].0, fs[*j].0, fs[*i].0, fs[*j].0), r?);
    }
    t.note(format!("(a) {} pairs of window semi-invariants, m = {m}", pairs.len()));

    // (b) ρ(δx)(f,g) = ρ(x){f,g} − {ρ(x)f,g} − {f,ρ(x)g}, ρ(x) = diagonal x^L
    let r = standard_r(&e.g)?.r;
    let gens = e.generators(m)?;
    let rho = |x: &SparseVec, f: &PWFunction| e.fa.invariant_action(&diag_embed(&e.g, x, m), f, Side::Left);
    let br = |f: &PWFunction, g: &PWFunction| e.fa.classical_bracket(f, g, &mx);
    let mut jobs = Vec::new();
    for i in 0..e.g.dim() {
        for a in 0..gens.len() {
            for b in 0..gens.len() {
                jobs.push((i, a, b));
            }
        }
    }
    let results: Vec<Result<(usize, bool), Abort>> = jobs
        .par_iter()
        .map(|&(i, a, b)| {
            let x = e.g.basis_vec(i);
            let (f, h) = (&gens[a].1, &gens[b].1);
            let mut lhs = PWFunction::zero(m, 1);
            for (k, c) in &cobracket(&e.g, &r, &x).terms {
                let p = rho(&e.g.basis_vec(k[0]), f)?;
                let q2 = rho(&e.g.basis_vec(k[1]), h)?;
                lhs = lhs.add(&e.fa.multiply(&p, &q2)?.scale_q(c));
            }
            let rhs = rho(&x, &br(f, h)?)?.sub(&br(&rho(&x, f)?, h)?).sub(&br(f, &rho(&x, h)?)?);
            Ok((fn_terms(&lhs.sub(&rhs)), lhs.is_zero()))
        })
        .collect();
    let mut nonzero = 0;
    for (&(i, a, b), r) in jobs.iter().zip(results) {
        let (terms, zero) = r?;
        nonzero += usize::from(!zero);
        t.residual(|| format!("Poisson action at x = {}, ({}, {})", e.g.labels[i], gens[a].0, gens[b].0), terms);
    }
    t.expect(|| "ρ(δx) vanishes on every generator pair".into(), nonzero > 0);
    t.note(format!("(b) {} (x, f, g) triples", jobs.len()));
    Ok(t)
}

fn c06_grading(e: &Engine) -> Outcome {
    let m = e.cfg.m;
    let mut t = Tally::default();
    let mx = BracketSpec::Mixed { m };
    let fs = window_functions(e, m)?;
    let pairs: Vec<(usize, usize)> = (0..fs.len()).flat_map(|i| (i..fs.len()).map(move |j| (i, j))).collect();
    let results: Vec<Result<Vec<Vec<Vec<i64>>>, Abort>> =
        pairs.par_iter().map(|&(i, j)| Ok(e.fa.classical_bracket(&fs[i].2, &fs[j].2, &mx)?.weights())).collect();
    let add = |a: &[Vec<i64>], b: &[Vec<i64>]| -> Vec<Vec<i64>> {
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
    };
    for (&(i, j), r) in pairs.iter().zip(results) {
        let target = add(&fs[i].1, &fs[j].1);
        let stray = r?.into_iter().filter(|w| w != &target).count();
        t.residual(|| format!("{{{}, {}}} leaves the block {target:?}", fs[i].0, fs[j].0), stray);
    }
    t.note(format!("grading on {} pairs", pairs.len()));

    // S(λ) = ⊕_n C[G]^{nλ}: brackets of the n = 1, 2 pieces stay in S(λ)
    let mut lambdas: Vec<Vec<Vec<i64>>> = Vec::new();
    for w in e.fundamental_weights() {
        lambdas.push(vec![w.clone(); m]);
        for j in 0..m {
            let mut l = vec![vec![0; e.rank()]; m];
            l[j] = w.clone();
            lambdas.push(l);
        }
    }
    for lam in &lambdas {
        let scaled = |n: i64| -> Vec<Vec<i64>> { lam.iter().map(|w| w.iter().map(|x| x * n).collect()).collect() };
        let pieces: Vec<Vec<PWFunction>> =
            (1..=2).map(|n| e.semi_invariant_basis(&scaled(n))).collect::<Result<_, _>>()?;
        let mut jobs = Vec::new();
        for n1 in 0..2 {
            for n2 in n1..2 {
                for a in 0..pieces[n1].len() {
                    for b in 0..pieces[n2].len() {
                        jobs.push((n1, a, n2, b));
                    }
                }
            }
        }
        let results: Vec<Result<usize, Abort>> = jobs
            .par_iter()
            .map(|&(n1, a, n2, b)| {
                let br = e.fa.classical_bracket(&pieces[n1][a], &pieces[n2][b], &mx)?;
                Ok(br.weights().iter().filter(|w| (1..=4).all(|n| **w != scaled(n))).count())
            })
            .collect();
        for (&(n1, a, n2, b), r) in jobs.iter().zip(results) {
            t.residual(|| format!("S({lam:?}): bracket of pieces {}#{a} and {}#{b} leaves S", n1 + 1, n2 + 1), r?);
        }
    }
    t.note(format!("S(λ) closure for λ in {lambdas:?}"));
    Ok(t)
}

fn c07_jacobi(e: &Engine) -> Outcome {
    let m = e.cfg.m;
    let mx = BracketSpec::Mixed { m };
    let gens = e.generators(m)?;
    let n = gens.len();
    let table: Vec<Result<PWFunction, Abort>> =
        (0..n * n).into_par_iter().map(|k| Ok(e.fa.classical_bracket(&gens[k / n].1, &gens[k % n].1, &mx)?)).collect();
    let table: Vec<PWFunction> = table.into_iter().collect::<Result<_, _>>()?;
    let triples: Vec<(usize, usize, usize)> =
        (0..n).flat_map(|a| (0..n).flat_map(move |b| (0..n).map(move |c| (a, b, c)))).collect();
    let results: Vec<Result<usize, Abort>> = triples
        .par_iter()
        .map(|&(a, b, c)| {
            let j =
                e.fa.classical_bracket(&table[a * n + b], &gens[c].1, &mx)?
                    .add(&e.fa.classical_bracket(&table[b * n + c], &gens[a].1, &mx)?)
                    .add(&e.fa.classical_bracket(&table[c * n + a], &gens[b].1, &mx)?);
            Ok(fn_terms(&j))
        })
        .collect();
    let mut t = Tally::default();
    for (&(a, b, c), r) in triples.iter().zip(results) {
        t.residual(|| format!("Jacobi on ({}, {}, {})", gens[a].0, gens[b].0, gens[c].0), r?);
    }
    t.note(format!("{} triples of {n} generators, m = {m}", triples.len()));
    Ok(t)
}

fn c08_coiso_lie(e: &Engine) -> Outcome {
    let g = &e.g;
    let r = standard_r(g)?.r;
    let rd = g.roots.as_ref().ok_or_else(|| Abort::Broken("algebra without root data".into()))?;
    let mut t = Tally::default();
    let b = borel(g);
    let res = strongly_coisotropic_lie(g, &b, &r)?;
    t.expect(|| "b is not strongly coisotropic".into(), res.strongly && res.coisotropic);
    t.expect(|| "r_st ∉ b⊗b + g⊗[b,b] + [b,b]⊗g".into(), r_membership_lie(g, &b, &r));
    let f = Subspace::new(g.dim(), vec![g.basis_vec(rd.simple_f(0))]);
    let fl = &g.labels[rd.simple_f(0)];
    let res = strongly_coisotropic_lie(g, &f, &r)?;
    t.expect(|| format!("span({fl}) is not coisotropic"), res.coisotropic);
    t.expect(|| format!("span({fl}) is strongly coisotropic"), !res.strongly);
    let mut ms = vec![2];
    if e.cfg.m > 2 {
        ms.push(e.cfg.m);
    }
    for m in ms {
        let gm = g.power(m);
        let rm = twisted_r(g, &r, m);
        let bm = b.power(m);
        let res = strongly_coisotropic_lie(&gm, &bm, &rm)?;
        t.expect(|| format!("b^{m} is not strongly coisotropic for r^({m})"), res.strongly);
        t.expect(|| format!("r^({m}) ∉ b^{m}⊗b^{m} + …"), r_membership_lie(&gm, &bm, &rm));
    }
    t.note(format!("{}: b, span({fl}), b^m", e.cfg.algebra));
    Ok(t)
}

// ---------------------------------------------------------------- quantum

fn monos_up_to(d: usize) -> Vec<Mono> {
    let mut out = Vec::new();
    for a in 0..=d {
        for b in 0..=d - a {
            for c in 0..=d - a - b {
                out.push((a, b, c));
            }
        }
    }
    out
}

/// (q^H − q^{−H})/(q − q^{−1}), q = e^{ħ/2}, expanded directly from the exponential series.
fn qint_h_oracle(k: usize) -> UqElement {
    let big = Ctx::new(k + 1);
    let fact = |n: usize| (1..=n).fold(Q::one(), |a, i| a * q(i as i64));
    let odd = |i: usize| q(2) * qf(1, 2).pow(i as i32) / fact(i);
    let mut den = big.zero();
    for i in (1..=k).step_by(2) {
        den += &big.monomial(i - 1, odd(i));
    }
    let den_inv = series_inv(&den).expect("unit");
    let mut out = UqElement::zero(k);
    for j in (1..=k).step_by(2) {
        let c = (&big.monomial(j - 1, odd(j)) * &den_inv).truncate(k);
        out = out.add(&UqElement::monomial(k, (0, j, 0), c));
    }
    out
}

fn c09_quantum_axioms(e: &Engine) -> Outcome {
    e.quantum_guard()?;
    let k = e.cfg.hbar_order;
    let u = Uq::new(k, e.degree_bound);
    let one = Series::constant(k, Q::one());
    let neg = Series::constant(k, -Q::one());
    let mono = |m: Mono| UqElement::monomial(k, m, one.clone());
    let mut t = Tally::default();

    // relations
    let ef = u.normalize(&[(one.clone(), vec![Gen::E, Gen::F]), (neg.clone(), vec![Gen::F, Gen::E])])?;
    t.expect(|| "[E,F] ≠ [H]_q".into(), ef == qint_h_oracle(k));
    let he = u.normalize(&[(one.clone(), vec![Gen::H, Gen::E]), (neg.clone(), vec![Gen::E, Gen::H])])?;
    t.expect(|| "[H,E] ≠ 2E".into(), he == mono((0, 0, 1)).scale(&Series::constant(k, q(2))));
    let hf = u.normalize(&[(one.clone(), vec![Gen::H, Gen::F]), (neg.clone(), vec![Gen::F, Gen::H])])?;
    t.expect(|| "[H,F] ≠ −2F".into(), hf == mono((1, 0, 0)).scale(&Series::constant(k, q(-2))));

    // Hopf axioms on PBW monomials of degree ≤ 4
    let monos = monos_up_to(4);
    let results: Vec<Result<[usize; 5], Abort>> = monos
        .par_iter()
        .map(|&m| {
            let x = mono(m);
            let xt = x.to_tensor();
            let d = u.coproduct(&x)?;
            let coass = u.coproduct_leg(&d, 0)?.sub(&u.coproduct_leg(&d, 1)?);
            let eps = UqTensor::one(1, k).scale(&u.counit(&x));
            let s0 = u.mul_legs(&u.antipode_leg(&d, 0)?, 0, 1)?.sub(&eps);
            let s1 = u.mul_legs(&u.antipode_leg(&d, 1)?, 0, 1)?.sub(&eps);
            Ok([
                uq_terms(&coass),
                uq_terms(&u.counit_leg(&d, 0).sub(&xt)),
                uq_terms(&u.counit_leg(&d, 1).sub(&xt)),
                uq_terms(&s0),
                uq_terms(&s1),
            ])
        })
        .collect();
    let names = ["coassociativity", "left counit", "right counit", "left antipode", "right antipode"];
    for (m, r) in monos.iter().zip(results) {
        for (name, terms) in names.iter().zip(r?) {
            t.residual(|| format!("{name} at F^{}H^{}E^{}", m.0, m.1, m.2), terms);
        }
    }
    let pairs: Vec<(Mono, Mono)> = monos
        .iter()
        .flat_map(|a| monos.iter().map(move |b| (*a, *b)))
        .filter(|(a, b)| crate::que::mono_degree(a) + crate::que::mono_degree(b) <= 4)
        .collect();
    let results: Vec<Result<usize, Abort>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let lhs = u.coproduct(&u.mul(&mono(a), &mono(b))?)?;
            let rhs = u.tmul(&u.coproduct(&mono(a))?, &u.coproduct(&mono(b))?)?;
            Ok(uq_terms(&lhs.sub(&rhs)))
        })
        .collect();
    for ((a, b), r) in pairs.iter().zip(results) {
        t.residual(|| format!("Δ(xy) ≠ Δ(x)Δ(y) at {a:?}·{b:?}"), r?);
    }

    // quasitriangularity
    let r = u.r_matrix_sl2()?;
    let rinv = u.tinv(&r)?;
    t.residual(|| "R·R⁻¹ ≠ 1".into(), uq_terms(&u.tmul(&r, &rinv)?.sub(&UqTensor::one(2, k))));
    let low = monos.clone();
    let results: Vec<Result<usize, Abort>> =
        low.par_iter().map(|&m| Ok(uq_terms(&u.almost_cocommutativity_residual(&r, &rinv, &mono(m))?))).collect();
    for (m, res) in low.iter().zip(results) {
        t.residual(|| format!("almost-cocommutativity at {m:?}"), res?);
    }
    let (h1, h2) = u.hexagon_residuals(&r)?;
    t.residual(|| "(Δ⊗1)R ≠ R₁₃R₂₃".into(), uq_terms(&h1));
    t.residual(|| "(1⊗Δ)R ≠ R₁₃R₁₂".into(), uq_terms(&h2));
    t.residual(|| "(ε⊗1)R ≠ 1".into(), uq_terms(&u.counit_leg(&r, 0).sub(&UqTensor::one(1, k))));
    t.residual(|| "(1⊗ε)R ≠ 1".into(), uq_terms(&u.counit_leg(&r, 1).sub(&UqTensor::one(1, k))));
    t.note(format!("mod ħ^{k}, PBW degree ≤ 4, degree bound {}", e.degree_bound));
    Ok(t)
}

fn c10_twists(e: &Engine) -> Outcome {
    e.quantum_guard()?;
    let k = e.cfg.hbar_order;
    let u = Uq::new(k, e.degree_bound);
    let r = u.r_matrix_sl2()?;
    let mut t = Tally::default();
    t.expect(|| "Twi^1(R) ≠ 1⊗1".into(), u.twi_m(&r, 1)? == UqTensor::one(2, k));
    t.expect(|| "Twi^2(R) ≠ R₂₃".into(), u.twi_m(&r, 2)? == r.embed(&[1, 2], 4));
    for m in [2, 3] {
        let j = u.twi_m(&r, m)?;
        let (a, b, c) = u.twist_residuals(&j, m)?;
        t.residual(|| format!("Twi^{m}: (Δ⊗1)(J)J₁₂ ≠ (1⊗Δ)(J)J₂₃"), uq_terms(&a));
        t.residual(|| format!("Twi^{m}: (ε⊗1)J ≠ 1"), uq_terms(&b));
        t.residual(|| format!("Twi^{m}: (1⊗ε)J ≠ 1"), uq_terms(&c));
        t.residual(
            || format!("Twi^{m}: ordered product ≠ inductive form"),
            uq_terms(&j.sub(&u.twi_m_inductive(&r, m)?)),
        );
    }
    t.note(format!("m in [2, 3], mod ħ^{k}"));
    Ok(t)
}

fn affine_generators(qa: &QFunctionAlgebra, m: usize) -> Result<Vec<(usize, QFunction)>, Abort> {
    let mut out = Vec::new();
    for j in 0..m {
        for i in 0..2 {
            out.push((j, qa.embed(&qa.coefficient(1, i, 0)?, j, m)));
        }
    }
    Ok(out)
}

fn c11_semiclassical(e: &Engine) -> Outcome {
    let qa = e.qa()?;
    let k = e.cfg.hbar_order;
    let u = &qa.uq;
    let g = LieAlgebra::named("sl2")?;
    let st = standard_r(&g)?;
    let fa = FunctionAlgebra::classical(Arc::new(g.clone()));
    let mut t = Tally::default();

    let r = u.r_matrix_sl2()?;
    t.expect(|| "R mod ħ ≠ 1⊗1".into(), r.truncate(1) == UqTensor::one(2, 1));
    t.expect(|| "ħ¹ part of R ≠ r_st".into(), r.to_lie(1, &g, 1).as_ref() == Some(&st.r));
    let r2 = u.r_matrix_m(&r, 2)?;
    t.expect(|| "R^(2) mod ħ ≠ 1".into(), r2.truncate(1) == UqTensor::one(4, 1));
    t.expect(|| "ħ¹ part of R^(2) ≠ r^(2)".into(), r2.to_lie(1, &g, 2) == Some(twisted_r(&g, &st.r, 2)));

    // C_h[G] on weight ≤ ϖ coefficients
    let mut one_factor = vec![("1".to_string(), qa.one(1))];
    for a in 0..2 {
        for b in 0..2 {
            one_factor.push((format!("c(1;{a},{b})"), qa.coefficient(1, a, b)?));
        }
    }
    let tw = BracketSpec::Twisted { m: 1 };
    for (lf, f) in &one_factor {
        for (lg, h) in &one_factor {
            let qb = semiclassical_bracket(f, h, |x, y| qa.q_multiply(x, y))?;
            let cb = fa.classical_bracket(&f.truncate(1), &h.truncate(1), &tw)?;
            t.residual(|| format!("C_h[G]: {{{lf}, {lg}}}"), fn_terms(&qb.sub(&cb)));
        }
    }
    // C_h[(N\G)^2] on the fundamental generators
    let gens = affine_generators(&qa, 2)?;
    let mx = BracketSpec::Mixed { m: 2 };
    let mut nonzero = 0;
    for (a, (_, f)) in gens.iter().enumerate() {
        for (b, (_, h)) in gens.iter().enumerate() {
            let qb = semiclassical_bracket(f, h, |x, y| qa.quantum_affine_multiply(x, y))?;
            let cb = fa.classical_bracket(&f.truncate(1), &h.truncate(1), &mx)?;
            nonzero += usize::from(!cb.is_zero());
            t.residual(|| format!("C_h[(N\\G)^2]: generators {a}, {b}"), fn_terms(&qb.sub(&cb)));
        }
    }
    t.expect(|| "every mixed bracket of generators vanishes".into(), nonzero > 0);
    t.note(format!("mod ħ^{k}; {} + {} bracket pairs", one_factor.len().pow(2), gens.len().pow(2)));
    Ok(t)
}

fn c12_factorization(e: &Engine) -> Outcome {
    let qa = e.qa()?;
    let m = e.cfg.m;
    let gens = affine_generators(&qa, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(e.cfg.seed);
    let mut triples = Vec::new();
    for _ in 0..20 {
        let mut pick = || {
            let a = rng.gen_range(0..gens.len());
            let b = rng.gen_range(0..gens.len());
            let c = rng.gen_range(-2i64..3);
            let deeper = rng.gen_bool(0.25).then(|| rng.gen_range(0..gens.len()));
            (a, b, c, deeper)
        };
        triples.push([pick(), pick(), pick()]);
    }
    let build = |(a, b, c, d): (usize, usize, i64, Option<usize>)| -> Result<QFunction, Abort> {
        let x = gens[a].1.add(&gens[b].1.scale_q(&q(c)));
        Ok(match d {
            Some(i) => qa.quantum_affine_multiply(&x, &gens[i].1)?,
            None => x,
        })
    };
    let results: Vec<Result<usize, Abort>> = triples
        .par_iter()
        .map(|tr| {
            let x = build(tr[0])?;
            let y = build(tr[1])?;
            let z = build(tr[2])?;
            let l = qa.quantum_affine_multiply(&qa.quantum_affine_multiply(&x, &y)?, &z)?;
            let r = qa.quantum_affine_multiply(&x, &qa.quantum_affine_multiply(&y, &z)?)?;
            Ok(fn_terms(&l.sub(&r)))
        })
        .collect();
    let mut t = Tally::default();
    for (i, r) in results.into_iter().enumerate() {
        t.residual(|| format!("associativity on random triple {i}"), r?);
    }
    // case split on single-factor inputs, including weight-2 elements
    let mut singles = gens.clone();
    for j in 0..m {
        singles.push((j, qa.embed(&qa.coefficient(2, 1, 0)?, j, m)));
    }
    for (i, f) in &singles {
        for (j, h) in &singles {
            let direct = qa.quantum_affine_multiply(f, h)?;
            t.residual(
                || format!("A_{i}·A_{j}: product ≠ factorized form"),
                fn_terms(&direct.sub(&qa.factorized_multiply(f, *i, h, *j)?)),
            );
            if i <= j {
                t.residual(
                    || format!("A_{i}·A_{j}: product ≠ plain product"),
                    fn_terms(&direct.sub(&qa.q_multiply(f, h)?)),
                );
            }
        }
    }
    t.note(format!("20 triples from seed {}, m = {m}, mod ħ^{}", e.cfg.seed, e.cfg.hbar_order));
    Ok(t)
}

fn highest_coefficients(qa: &QFunctionAlgebra, lambda: &[i64]) -> Result<Vec<QFunction>, Abort> {
    let mut out = vec![qa.one(0)];
    for &n in lambda {
        let mut next = Vec::new();
        for f in &out {
            for a in 0..=n as usize {
                next.push(f.outer(&qa.coefficient(n, a, 0)?));
            }
        }
        out = next;
    }
    Ok(out)
}

fn c13_coiso_pipeline(e: &Engine) -> Outcome {
    let qa = e.qa()?;
    let k = e.cfg.hbar_order;
    let uq = qa.uq.clone();
    let wb = e.cfg.weight_bound;
    let mut t = Tally::default();
    let r = uq.r_matrix_sl2()?;
    let plain = |x: &UqTensor| uq.coproduct_block(x, 1, 0);

    let b = WindowedChecker::sl2_power(uq.clone(), &[Gen::H, Gen::E], 1)?;
    let (v, w) = b.r_membership(&r)?;
    t.verdict(|| format!("R ∈ U⊗U + H⊗[U,U] (window {w})"), &v, true);
    let c = b.strong_coiso(CoisoSide::Right, &plain, 1)?;
    t.verdict(|| format!("Δ(U) ⊂ U⊗U + H⊗[U,U] (window {})", c.window), &c.verdict, true);
    let f = WindowedChecker::sl2_power(uq.clone(), &[Gen::F], 1)?;
    t.verdict(|| "R ∈ ⟨F⟩-membership".into(), &f.r_membership(&r)?.0, false);

    // characters
    // Δ(E) carries H^{K−1} from the expansion of K^{±1/2}
    let u = HopfSubalgebra::sl2(uq.clone(), &[Gen::H, Gen::E], (2 * wb as usize).max(4).max(k))?;
    let id = ideal_commutator(&u)?;
    let monoid = CharacterMonoid::new(&u, &id, &plain)?;
    let chars: Vec<Character> = (0..=2 * wb).map(|n| Character::highest_weight(&u, &[n])).collect::<Result<_, _>>()?;
    for z in &chars {
        z.validate(&u, &id)?;
    }
    t.expect(|| "ε is not ζ_0".into(), monoid.unit() == chars[0]);
    for a in 0..=wb as usize {
        for b2 in 0..=wb as usize {
            t.expect(
                || format!("ζ_{a}·ζ_{b2} ≠ ζ_{}", a + b2),
                monoid.product(&chars[a], &chars[b2])? == chars[a + b2],
            );
        }
    }
    let ur = HopfSubalgebra::new(
        uq.clone(),
        1,
        u.labels.iter().cloned().zip(u.gens.iter().cloned()).collect(),
        u.degree,
        PivotOrder::Reverse,
    )?;
    let idr = ideal_commutator(&ur)?;
    let mr = CharacterMonoid::new(&ur, &idr, &plain)?;
    let (c1, c2) = (Character::highest_weight(&ur, &[1])?, Character::highest_weight(&ur, &[1])?);
    t.expect(|| "character product depends on the complement".into(), mr.product(&c1, &c2)?.values == chars[2].values);

    // semi-invariants of the twisted square on the ϖ-window
    let u2 = HopfSubalgebra::power(uq.clone(), &[Gen::H, Gen::E], 2, 1, PivotOrder::Forward)?;
    let window = FunctionWindow::sl2(2, k, 1);
    let cases: Vec<(i64, i64)> = vec![(0, 0), (1, 0), (0, 1), (1, 1)];
    let results: Vec<Result<(bool, usize), Abort>> = cases
        .par_iter()
        .map(|&(a, b)| {
            let z = Character::highest_weight(&u2, &[a, b])?;
            let fs = semi_invariants(&qa, &u2, &z, &window)?;
            let same = window.same_span(&fs, &highest_coefficients(&qa, &[a, b])?);
            let mut off = 0;
            for f in &fs {
                for g in &fs {
                    off += fn_terms(&qa.h_multiply(f, g)?.sub(&qa.quantum_affine_multiply(f, g)?));
                }
            }
            Ok((same, off))
        })
        .collect();
    for (&(a, b), res) in cases.iter().zip(results) {
        let (same, off) = res?;
        t.expect(|| format!("semi-invariants of weight ({a},{b}) ≠ C_h[(N\\G)^2] block"), same);
        t.residual(|| format!("ℋ^(2) product ≠ twisted product on weight ({a},{b})"), off);
    }

    // the highest-weight section
    let us = HopfSubalgebra::sl2(uq.clone(), &[Gen::H, Gen::E], k.max(6))?;
    let ids = ideal_commutator(&us)?;
    let d = qa.coefficient(1, 0, 0)?;
    let s = quantum_section_check(&qa, &us, &ids, &d, 3)?;
    t.verdict(|| "highest-weight section is prequantum".into(), &s.prequantum, true);
    t.verdict(|| "ℋ^d_n = ℋ^{p(d)^n}".into(), &s.graded, true);
    let low = qa.coefficient(1, 1, 0)?;
    let s = quantum_section_check(&qa, &us, &ids, &low, 1)?;
    t.verdict(|| "a non-highest coefficient is prequantum".into(), &s.prequantum, false);
    t.note(format!("mod ħ^{k}; characters up to weight {}", 2 * wb));
    Ok(t)
}
