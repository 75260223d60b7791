//! Theorem checks: each statement is evaluated on a finite model at a
//! resolution schedule and reported with the node sets behind every
//! hypothesis and conclusion.
//!
//! Status rules:
//! - a conclusion that fails (and was not capped) makes the check
//!   `violated-at-resolution`, and a witness is always attached;
//! - otherwise any capped sub-verdict makes it `partial`;
//! - otherwise a failed hypothesis makes it `vacuous`;
//! - otherwise it is `confirmed`.

use crate::chains::{
    build_chain_digraph, decompose, omega_component, ChainDigraph, ComponentDecomposition,
};
use crate::config::{AnalysisConfig, RunConfig};
use crate::entropy::{ent_rb_test, restricted_spectral_entropy, spectral_chain_entropy};
use crate::error::{Error, Result};
use crate::model::{FiniteModel, ResolutionSchedule};
use crate::pointwise::{is_chain_continuous_capped, is_sensitive, is_shadowable_capped};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

pub const SCHEMA_VERSION: u32 = 1;

/// Canonical theorem ids, in report order.
pub const THEOREM_IDS: [&str; 8] = ["L1.1", "1.1", "1.2", "1.3", "1.4", "A1", "B1", "L2.1"];

/// Normalizes a user-supplied id (`lemma1.1`, `l2.1`, `a1`, `thm1.4`, ...).
pub fn parse_theorem_id(s: &str) -> Result<&'static str> {
    let t = s.trim().to_ascii_uppercase().replace(['-', '_', ' '], "");
    let t = t
        .strip_prefix("LEMMA")
        .map(|r| format!("L{r}"))
        .or_else(|| t.strip_prefix("THEOREM").map(str::to_string))
        .or_else(|| t.strip_prefix("THM").map(str::to_string))
        .unwrap_or(t);
    THEOREM_IDS
        .iter()
        .find(|&&id| id == t)
        .copied()
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown theorem id `{s}` (known: {})",
                THEOREM_IDS.join(", ")
            ))
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Confirmed,
    Vacuous,
    ViolatedAtResolution,
    Partial,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Confirmed => "confirmed",
            Status::Vacuous => "vacuous",
            Status::ViolatedAtResolution => "violated-at-resolution",
            Status::Partial => "partial",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, Status::Confirmed | Status::Vacuous)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    /// Some sub-verdict hit a cap, so `holds` is not conclusive.
    pub capped: bool,
    /// Nodes realizing the verdict (hypothesis nodes, passing nodes, ...).
    pub nodes: Vec<usize>,
    /// A scalar summary, e.g. an entropy value or a minimum slope.
    pub value: Option<f64>,
    pub detail: Option<String>,
}

impl Verdict {
    fn new(name: impl Into<String>, holds: bool, nodes: Vec<usize>) -> Self {
        Verdict {
            name: name.into(),
            holds,
            capped: false,
            nodes,
            value: None,
            detail: None,
        }
    }

    fn capped(mut self, capped: bool) -> Self {
        self.capped = capped;
        self
    }

    fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

/// A replayable counterexample: node, parameters, and an optional path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub node: usize,
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub reason: String,
    pub path: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub schema_version: u32,
    pub theorem: String,
    pub statement: String,
    pub system: String,
    pub schedule: ResolutionSchedule,
    pub hypotheses: Vec<Verdict>,
    pub conclusions: Vec<Verdict>,
    pub status: Status,
    pub failed_hypothesis: Option<String>,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

const MAX_WITNESSES: usize = 8;

struct Builder<'a> {
    ctx: &'a Context,
    check: TheoremCheck,
}

impl<'a> Builder<'a> {
    fn new(ctx: &'a Context, id: &str, statement: &str) -> Self {
        Builder {
            ctx,
            check: TheoremCheck {
                schema_version: SCHEMA_VERSION,
                theorem: id.into(),
                statement: statement.into(),
                system: ctx.system.clone(),
                schedule: ctx.schedule.clone(),
                hypotheses: Vec::new(),
                conclusions: Vec::new(),
                status: Status::Confirmed,
                failed_hypothesis: None,
                witnesses: Vec::new(),
                notes: Vec::new(),
            },
        }
    }

    fn hypothesis(&mut self, v: Verdict) {
        self.check.hypotheses.push(v);
    }

    fn conclusion(&mut self, v: Verdict) {
        self.check.conclusions.push(v);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.check.notes.push(s.into());
    }

    fn witness(
        &mut self,
        node: usize,
        params: &[(&str, f64)],
        reason: impl Into<String>,
        path: Option<Vec<usize>>,
    ) {
        if self.check.witnesses.len() >= MAX_WITNESSES {
            return;
        }
        self.check.witnesses.push(Witness {
            node,
            label: self.ctx.model.label(node).to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            reason: reason.into(),
            path,
        });
    }

    fn any_capped(&self) -> bool {
        self.check
            .hypotheses
            .iter()
            .chain(&self.check.conclusions)
            .any(|v| v.capped)
    }

    fn vacuous(mut self, failed: &str) -> TheoremCheck {
        self.check.status = if self.any_capped() {
            Status::Partial
        } else {
            Status::Vacuous
        };
        self.check.failed_hypothesis = Some(failed.into());
        self.check
    }

    fn finish(mut self) -> TheoremCheck {
        let violated = self.check.conclusions.iter().any(|v| !v.holds && !v.capped);
        self.check.status = if violated {
            assert!(
                !self.check.witnesses.is_empty(),
                "violation of {} reported without a witness",
                self.check.theorem
            );
            Status::ViolatedAtResolution
        } else if self.any_capped() {
            Status::Partial
        } else {
            Status::Confirmed
        };
        self.check
    }
}

type Cache<T> = OnceLock<Result<T>>;
/// `(radius, slope)` per scheduled ball, or `None` when capped.
type Slopes = Option<Vec<(f64, f64)>>;
type SlopeCache = Mutex<HashMap<(u64, usize), Arc<Result<Slopes>>>>;
/// Per node: `None` when capped, else the passing `(r, b)` if any.
type UpResult = Result<Option<Option<(f64, f64)>>>;

/// Shared, immutable inputs of all checks on one system, with lazily
/// computed pointwise verdict tables. `None` entries were capped.
pub struct Context {
    pub system: String,
    pub model: FiniteModel,
    pub schedule: ResolutionSchedule,
    pub analysis: AnalysisConfig,
    pub seed: u64,
    /// One chain digraph per scheduled δ, in schedule order.
    pub digraphs: Vec<ChainDigraph>,
    pub decomps: Vec<ComponentDecomposition>,
    sh: Vec<Cache<Vec<Option<bool>>>>,
    cc: Vec<Cache<Vec<Option<bool>>>>,
    sen: Vec<Cache<Vec<Option<bool>>>>,
    slopes: SlopeCache,
}

fn cached<T>(cell: &Cache<T>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(f).as_ref().map_err(Clone::clone)
}

fn capped<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Capacity { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

impl Context {
    pub fn new(
        system: impl Into<String>,
        model: FiniteModel,
        schedule: ResolutionSchedule,
        analysis: AnalysisConfig,
        seed: u64,
    ) -> Result<Self> {
        schedule.validate_for(&model)?;
        let digraphs: Vec<ChainDigraph> = schedule
            .deltas
            .iter()
            .map(|&d| build_chain_digraph(&model, d))
            .collect::<Result<_>>()?;
        let decomps = digraphs.iter().map(decompose).collect();
        let grid = schedule.epsilons.len() * schedule.deltas.len();
        Ok(Context {
            system: system.into(),
            sh: (0..grid).map(|_| OnceLock::new()).collect(),
            cc: (0..grid).map(|_| OnceLock::new()).collect(),
            sen: (0..analysis.sensitivity_r.len())
                .map(|_| OnceLock::new())
                .collect(),
            slopes: Mutex::new(HashMap::new()),
            model,
            schedule,
            analysis,
            seed,
            digraphs,
            decomps,
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let m = cfg.model.build()?;
        cfg.validate_for(&m)?;
        Context::new(
            cfg.system_name(&m),
            m,
            cfg.schedule.clone(),
            cfg.analysis.clone(),
            cfg.run.seed,
        )
    }

    pub fn finest_eps(&self) -> usize {
        self.schedule.epsilons.len() - 1
    }

    pub fn finest_delta(&self) -> usize {
        self.schedule.deltas.len() - 1
    }

    fn n_range(&self) -> (usize, usize) {
        (self.analysis.n_min, self.analysis.n_max)
    }

    /// Shadowable verdict of every node at `(epsilons[ei], deltas[dj])`.
    pub fn shadowable(&self, ei: usize, dj: usize) -> Result<&[Option<bool>]> {
        let (m, g, eps, cap) = (
            &self.model,
            &self.digraphs[dj],
            self.schedule.epsilons[ei],
            self.analysis.state_cap,
        );
        cached(&self.sh[ei * self.schedule.deltas.len() + dj], || {
            (0..m.len())
                .into_par_iter()
                .map(|x| capped(is_shadowable_capped(m, g, x, eps, cap).map(|v| v.holds)))
                .collect()
        })
        .map(Vec::as_slice)
    }

    /// Chain-continuity verdict of every node at `(epsilons[ei], deltas[dj])`.
    pub fn chain_continuous(&self, ei: usize, dj: usize) -> Result<&[Option<bool>]> {
        let (m, g, eps, cap) = (
            &self.model,
            &self.digraphs[dj],
            self.schedule.epsilons[ei],
            self.analysis.state_cap,
        );
        cached(&self.cc[ei * self.schedule.deltas.len() + dj], || {
            (0..m.len())
                .into_par_iter()
                .map(|x| capped(is_chain_continuous_capped(m, g, x, eps, cap).map(|v| v.holds)))
                .collect()
        })
        .map(Vec::as_slice)
    }

    /// Sensitivity verdict of every node at `analysis.sensitivity_r[ri]`.
    pub fn sensitive(&self, ri: usize) -> Result<&[Option<bool>]> {
        let (m, r, radii) = (
            &self.model,
            self.analysis.sensitivity_r[ri],
            &self.schedule.radii,
        );
        cached(&self.sen[ri], || {
            (0..m.len())
                .into_par_iter()
                .map(|x| capped(is_sensitive(m, x, r, radii).map(|v| v.sensitive)))
                .collect()
        })
        .map(Vec::as_slice)
    }

    /// Separated-count slopes at scale `s` over every scheduled ball around `x`.
    pub fn entropy_slopes(&self, s: f64, x: usize) -> Result<Slopes> {
        let key = (s.to_bits(), x);
        if let Some(hit) = self.slopes.lock().unwrap().get(&key) {
            return hit.as_ref().clone();
        }
        let res = capped(ent_rb_test(
            &self.model,
            x,
            s,
            0.0,
            &self.schedule.radii,
            self.n_range(),
            self.analysis.count_mode,
        ))
        .map(|v| {
            v.map(|v| {
                v.per_radius
                    .into_iter()
                    .map(|(rho, e)| (rho, e.value))
                    .collect()
            })
        });
        self.slopes
            .lock()
            .unwrap()
            .insert(key, Arc::new(res.clone()));
        res
    }

    /// Terminal flag of each node's omega component at the finest δ.
    fn terminal_omega(&self) -> Result<Vec<bool>> {
        let d = &self.decomps[self.finest_delta()];
        (0..self.model.len())
            .map(|x| omega_component(&self.model, d, x).map(|c| d.terminal[c]))
            .collect()
    }

    fn finest_params(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("epsilon", self.schedule.finest_epsilon()),
            ("delta", self.schedule.finest_delta()),
        ]
    }
}

fn nodes_with(v: &[Option<bool>], want: bool) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter_map(|(i, &b)| (b == Some(want)).then_some(i))
        .collect()
}

fn has_capped(v: &[Option<bool>]) -> bool {
    v.iter().any(Option::is_none)
}

fn all_true(v: &[Option<bool>]) -> bool {
    v.iter().all(|&b| b == Some(true))
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Every node reaches a terminal component, at every scheduled δ.
pub fn check_lemma_1_1(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(
        ctx,
        "L1.1",
        "every point chain-reaches a terminal chain component",
    );
    for (g, d) in ctx.digraphs.iter().zip(&ctx.decomps) {
        let terminal_nodes: Vec<usize> = d
            .components
            .iter()
            .zip(&d.terminal)
            .filter(|(_, &t)| t)
            .flat_map(|(c, _)| c.iter().copied())
            .collect();
        let mut rev = vec![Vec::new(); g.node_count()];
        for (a, c) in g.edges() {
            rev[c].push(a);
        }
        let mut seen = vec![false; g.node_count()];
        let mut stack = terminal_nodes.clone();
        for &v in &terminal_nodes {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            for &u in &rev[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        let failing: Vec<usize> = (0..g.node_count()).filter(|&v| !seen[v]).collect();
        for &x in failing.iter().take(MAX_WITNESSES) {
            b.witness(
                x,
                &[("delta", g.delta())],
                "no terminal component reachable",
                None,
            );
        }
        b.conclusion(
            Verdict::new(
                format!(
                    "every node reaches a terminal component at delta={}",
                    fmt_f(g.delta())
                ),
                failing.is_empty(),
                terminal_nodes,
            )
            .value(d.terminal.iter().filter(|&&t| t).count() as f64)
            .detail("nodes: terminal component nodes; value: number of terminal components"),
        );
    }
    Ok(b.finish())
}

/// Runs the entropy point test at `s = r/2` on `nodes`, returning the
/// conclusion verdict and pushing witnesses for failures.
fn entropy_conclusion(b: &mut Builder, name: String, nodes: &[usize], r: f64) -> Result<()> {
    let ctx = b.ctx;
    let s = r / 2.0;
    let theta = ctx.analysis.theta;
    let results: Vec<Result<Slopes>> = nodes
        .par_iter()
        .map(|&x| ctx.entropy_slopes(s, x))
        .collect();
    let mut passing = Vec::new();
    let mut any_capped = false;
    let mut failures = 0;
    let mut min_slope = f64::INFINITY;
    for (&x, res) in nodes.iter().zip(results) {
        let Some(per_radius) = res? else {
            any_capped = true;
            continue;
        };
        let worst = per_radius
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one radius");
        min_slope = min_slope.min(worst.1);
        if worst.1 >= theta {
            passing.push(x);
        } else {
            failures += 1;
            b.witness(
                x,
                &[("r", r), ("s", s), ("radius", worst.0), ("slope", worst.1)],
                format!("entropy slope below theta={theta} at scale s"),
                None,
            );
        }
    }
    let mut v = Verdict::new(name, failures == 0, passing).capped(any_capped);
    if min_slope.is_finite() {
        v = v.value(min_slope).detail(format!(
            "s={}; value: minimum slope over tested balls",
            fmt_f(s)
        ));
    }
    b.conclusion(v);
    Ok(())
}

fn ball_sensitive(ctx: &Context, sen: &[Option<bool>], x: usize) -> Option<bool> {
    let ball = ctx.model.ball(x, ctx.schedule.finest_radius());
    let mut out = Some(true);
    for y in ball {
        match sen[y] {
            Some(false) => return Some(false),
            None => out = None,
            Some(true) => {}
        }
    }
    out
}

/// Shadowable + terminal omega component + sensitive at r (clause 1), or
/// shadowable + sensitive ball (clause 2), imply entropy at s = r/2.
pub fn check_theorem_1_1(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(
        ctx,
        "1.1",
        "for shadowable x: terminal C(x) and x in Sen_r, or x in int Sen_r, imply x in Ent_s for s < r",
    );
    let (ei, dj) = (ctx.finest_eps(), ctx.finest_delta());
    let sh = ctx.shadowable(ei, dj)?;
    let ter = ctx.terminal_omega()?;
    let sh_nodes = nodes_with(sh, true);
    b.hypothesis(
        Verdict::new(
            "shadowable at finest (epsilon, delta)",
            !sh_nodes.is_empty(),
            sh_nodes.clone(),
        )
        .capped(has_capped(sh)),
    );
    let ter_nodes: Vec<usize> = (0..ctx.model.len()).filter(|&x| ter[x]).collect();
    b.hypothesis(Verdict::new(
        "omega component terminal",
        !ter_nodes.is_empty(),
        ter_nodes,
    ));
    let mut any_sensitive = false;
    let mut any_target = false;
    for (ri, &r) in ctx.analysis.sensitivity_r.iter().enumerate() {
        let sen = ctx.sensitive(ri)?;
        let sen_nodes = nodes_with(sen, true);
        any_sensitive |= !sen_nodes.is_empty();
        b.hypothesis(
            Verdict::new(
                format!("sensitive at r={}", fmt_f(r)),
                !sen_nodes.is_empty(),
                sen_nodes,
            )
            .capped(has_capped(sen)),
        );
        let h1: Vec<usize> = (0..ctx.model.len())
            .filter(|&x| sh[x] == Some(true) && ter[x] && sen[x] == Some(true))
            .collect();
        let h2: Vec<usize> = (0..ctx.model.len())
            .filter(|&x| sh[x] == Some(true) && ball_sensitive(ctx, sen, x) == Some(true))
            .collect();
        for (clause, h) in [("(1)", h1), ("(2)", h2)] {
            b.hypothesis(Verdict::new(
                format!("clause {clause} hypothesis nodes at r={}", fmt_f(r)),
                !h.is_empty(),
                h.clone(),
            ));
            if !h.is_empty() {
                any_target = true;
                entropy_conclusion(
                    &mut b,
                    format!("clause {clause}: Ent_(r/2) at r={}", fmt_f(r)),
                    &h,
                    r,
                )?;
            }
        }
    }
    if !any_target {
        let failed = if sh.iter().all(|&v| v == Some(false)) {
            "shadowable at finest (epsilon, delta)"
        } else if !any_sensitive {
            "sensitive at r"
        } else {
            "joint hypotheses (shadowable, terminal or interior, sensitive)"
        };
        return Ok(b.vacuous(failed));
    }
    Ok(b.finish())
}

/// With every node shadowable, nodes whose finest ball is sensitive at r
/// must be entropy points at s = r/2.
pub fn check_theorem_1_2(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(
        ctx,
        "1.2",
        "if X = closure Sh(f), then closure int Sen(f) is inside Ent(f)",
    );
    let sh = ctx.shadowable(ctx.finest_eps(), ctx.finest_delta())?;
    let dense = all_true(sh);
    b.hypothesis(
        Verdict::new(
            "all nodes shadowable at finest (epsilon, delta)",
            dense,
            nodes_with(sh, true),
        )
        .capped(has_capped(sh)),
    );
    if !dense {
        return Ok(b.vacuous("all nodes shadowable at finest (epsilon, delta)"));
    }
    let mut any = false;
    for (ri, &r) in ctx.analysis.sensitivity_r.iter().enumerate() {
        let sen = ctx.sensitive(ri)?;
        let interior: Vec<usize> = (0..ctx.model.len())
            .filter(|&x| ball_sensitive(ctx, sen, x) == Some(true))
            .collect();
        b.hypothesis(
            Verdict::new(
                format!("sensitive ball interior at r={}", fmt_f(r)),
                !interior.is_empty(),
                interior.clone(),
            )
            .capped(has_capped(sen)),
        );
        if !interior.is_empty() {
            any = true;
            entropy_conclusion(
                &mut b,
                format!("Ent_(r/2) on sensitive interior at r={}", fmt_f(r)),
                &interior,
                r,
            )?;
        }
    }
    if !any {
        return Ok(b.vacuous("sensitive interior nonempty"));
    }
    Ok(b.finish())
}

/// Under zero chain entropy, all-shadowable agrees with all-chain-continuous.
pub fn check_theorem_1_3(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(
        ctx,
        "1.3",
        "if h_top(f) = 0: X = closure Sh(f) iff f is almost chain continuous",
    );
    let dj = ctx.finest_delta();
    let est = spectral_chain_entropy(&ctx.digraphs[dj]);
    let h = est.bracket.map_or(est.value, |(_, hi)| hi);
    let zero = h <= ctx.analysis.theta;
    b.hypothesis(
        Verdict::new(
            "spectral chain entropy at finest delta <= theta",
            zero,
            Vec::new(),
        )
        .value(est.value)
        .detail(format!("theta={}", fmt_f(ctx.analysis.theta))),
    );
    if !zero {
        return Ok(b.vacuous("spectral chain entropy at finest delta <= theta"));
    }
    let ei = ctx.finest_eps();
    let sh = ctx.shadowable(ei, dj)?;
    let cc = ctx.chain_continuous(ei, dj)?;
    let capped_any = has_capped(sh) || has_capped(cc);
    let (a, bb) = (all_true(sh), all_true(cc));
    if a && !bb {
        if let Some(x) = cc.iter().position(|&v| v == Some(false)) {
            let path = is_chain_continuous_capped(
                &ctx.model,
                &ctx.digraphs[dj],
                x,
                ctx.schedule.epsilons[ei],
                ctx.analysis.state_cap,
            )?
            .counterexample;
            b.witness(
                x,
                &ctx.finest_params(),
                "all nodes shadowable but this node is not chain continuous",
                path,
            );
        }
    }
    if bb && !a {
        if let Some(x) = sh.iter().position(|&v| v == Some(false)) {
            b.witness(
                x,
                &ctx.finest_params(),
                "all nodes chain continuous but this node is not shadowable",
                None,
            );
        }
    }
    b.conclusion(
        Verdict::new(
            "(A) all shadowable => (B) all chain continuous",
            !a || bb,
            nodes_with(cc, true),
        )
        .capped(capped_any),
    );
    b.conclusion(
        Verdict::new(
            "(B) all chain continuous => (A) all shadowable",
            !bb || a,
            nodes_with(sh, true),
        )
        .capped(capped_any),
    );
    for (i, &eps) in ctx.schedule.epsilons.iter().enumerate() {
        for (j, &delta) in ctx.schedule.deltas.iter().enumerate() {
            let (sa, sb) = (
                all_true(ctx.shadowable(i, j)?),
                all_true(ctx.chain_continuous(i, j)?),
            );
            b.note(format!(
                "epsilon={} delta={}: all shadowable={sa}, all chain continuous={sb}",
                fmt_f(eps),
                fmt_f(delta)
            ));
        }
    }
    Ok(b.finish())
}

/// With every node shadowable: every node an upper entropy point iff every
/// terminal component carries positive entropy.
pub fn check_theorem_1_4(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(
        ctx,
        "1.4",
        "if X = Sh(f): X = Ent_up(f) iff h_top(f|C) > 0 for every terminal C",
    );
    let (ei, dj) = (ctx.finest_eps(), ctx.finest_delta());
    let sh = ctx.shadowable(ei, dj)?;
    let all_sh = all_true(sh);
    b.hypothesis(
        Verdict::new(
            "all nodes shadowable at finest (epsilon, delta)",
            all_sh,
            nodes_with(sh, true),
        )
        .capped(has_capped(sh)),
    );
    if !all_sh {
        return Ok(b.vacuous("all nodes shadowable at finest (epsilon, delta)"));
    }
    let a = &ctx.analysis;
    let up: Vec<UpResult> = (0..ctx.model.len())
        .into_par_iter()
        .map(|x| {
            for &r in &a.entropy_r {
                let Some(per_radius) = ctx.entropy_slopes(r, x)? else {
                    return Ok(None);
                };
                let worst = per_radius.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                if let Some(&b) = a.entropy_b.iter().find(|&&b| worst >= b) {
                    return Ok(Some(Some((r, b))));
                }
            }
            Ok(Some(None))
        })
        .collect();
    let up: Vec<Option<Option<(f64, f64)>>> = up.into_iter().collect::<Result<_>>()?;
    let up_capped = up.iter().any(Option::is_none);
    let up_nodes: Vec<usize> = (0..up.len())
        .filter(|&x| matches!(up[x], Some(Some(_))))
        .collect();
    let cond_a = up_nodes.len() == ctx.model.len();

    let d = &ctx.decomps[dj];
    let g = &ctx.digraphs[dj];
    let mut cond_b = true;
    let mut weakest: Option<(usize, f64)> = None;
    let mut ter_nodes = Vec::new();
    for (c, comp) in d.components.iter().enumerate() {
        if !d.terminal[c] {
            continue;
        }
        ter_nodes.extend_from_slice(comp);
        let h = restricted_spectral_entropy(g, comp).value;
        if weakest.is_none_or(|(_, w)| h < w) {
            weakest = Some((c, h));
        }
        cond_b &= h > a.theta;
    }
    ter_nodes.sort_unstable();
    b.hypothesis(
        Verdict::new(
            "(A) every node passes the upper entropy test",
            cond_a,
            up_nodes.clone(),
        )
        .capped(up_capped),
    );
    let mut vb = Verdict::new(
        "(B) every terminal component has entropy > theta",
        cond_b,
        ter_nodes,
    );
    if let Some((_, h)) = weakest {
        vb = vb
            .value(h)
            .detail("value: smallest restricted spectral entropy");
    }
    b.hypothesis(vb);

    if cond_a && !cond_b {
        let (c, h) = weakest.expect("a terminal component exists");
        b.witness(
            d.components[c][0],
            &[("entropy", h), ("theta", a.theta), ("delta", g.delta())],
            format!("terminal component {c} has entropy <= theta"),
            None,
        );
    }
    if cond_b && !cond_a && !up_capped {
        let x = (0..up.len())
            .find(|&x| matches!(up[x], Some(None)))
            .expect("failing node");
        b.witness(
            x,
            &[("delta", g.delta())],
            "node fails the upper entropy test on the (r, b) grid",
            None,
        );
    }
    b.conclusion(Verdict::new("(A) => (B)", !cond_a || cond_b, Vec::new()).capped(up_capped));
    b.conclusion(
        Verdict::new("(B) => (A)", !cond_b || cond_a, up_nodes).capped(up_capped && cond_b),
    );
    Ok(b.finish())
}

struct Restricted {
    keep: Vec<usize>,
    cc: Vec<Option<bool>>,
    epsilon: f64,
    delta: f64,
}

fn restricted_cc(ctx: &Context, nodes: &[usize]) -> Result<Restricted> {
    let (rm, keep) = ctx.model.restrict(nodes)?;
    let epsilon = ctx.schedule.finest_epsilon()
        + (rm.resolution_floor() - ctx.model.resolution_floor()).max(0.0);
    let delta = ctx.schedule.finest_delta().max(rm.chain_floor());
    let g = build_chain_digraph(&rm, delta)?;
    let cc = (0..rm.len())
        .into_par_iter()
        .map(|x| {
            capped(
                is_chain_continuous_capped(&rm, &g, x, epsilon, ctx.analysis.state_cap)
                    .map(|v| v.holds),
            )
        })
        .collect::<Result<_>>()?;
    Ok(Restricted {
        keep,
        cc,
        epsilon,
        delta,
    })
}

/// Chain continuity of x against the terminal-component conditions.
pub fn check_theorem_a1(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(
        ctx,
        "A1",
        "x in CC(f) iff C = C(x,f) is terminal and C inside CC(f) iff terminal and CC(f|C) = C iff terminal and CC(f|C) nonempty",
    );
    let (ei, dj) = (ctx.finest_eps(), ctx.finest_delta());
    let cc = ctx.chain_continuous(ei, dj)?;
    let d = &ctx.decomps[dj];
    let n = ctx.model.len();
    let omega: Vec<usize> = (0..n)
        .map(|x| omega_component(&ctx.model, d, x))
        .collect::<Result<_>>()?;
    let mut used: Vec<usize> = omega.iter().copied().filter(|&c| d.terminal[c]).collect();
    used.sort_unstable();
    used.dedup();
    let mut restricted: BTreeMap<usize, Restricted> = BTreeMap::new();
    for &c in &used {
        let r = restricted_cc(ctx, &d.components[c])?;
        if r.epsilon > ctx.schedule.finest_epsilon() || r.delta > ctx.schedule.finest_delta() {
            b.note(format!(
                "component {c}: restricted model checked at epsilon={} delta={}",
                fmt_f(r.epsilon),
                fmt_f(r.delta)
            ));
        }
        restricted.insert(c, r);
    }
    let mut capped_any = has_capped(cc);
    // per node: (A, B, C, D) as Option<bool>, None when capped
    let tri_all = |v: &mut dyn Iterator<Item = Option<bool>>| -> Option<bool> {
        let mut out = Some(true);
        for x in v {
            match x {
                Some(false) => return Some(false),
                None => out = None,
                _ => {}
            }
        }
        out
    };
    let mut rows = Vec::with_capacity(n);
    for x in 0..n {
        let c = omega[x];
        let (bv, cv, dv) = if !d.terminal[c] {
            (Some(false), Some(false), Some(false))
        } else {
            let r = &restricted[&c];
            let bv = tri_all(&mut d.components[c].iter().map(|&y| cc[y]));
            let cv = tri_all(&mut r.cc.iter().copied());
            let dv = if r.cc.contains(&Some(true)) {
                Some(true)
            } else if r.cc.contains(&None) {
                None
            } else {
                Some(false)
            };
            (bv, cv, dv)
        };
        capped_any |= bv.is_none() || cv.is_none() || dv.is_none();
        rows.push([cc[x], bv, cv, dv]);
    }
    b.hypothesis(
        Verdict::new(
            "(A) chain continuous at finest (epsilon, delta)",
            true,
            nodes_with(cc, true),
        )
        .capped(has_capped(cc)),
    );
    let names = ["(A)", "(B)", "(C)", "(D)"];
    for k in 1..4 {
        for (p, q) in [(0, k), (k, 0)] {
            let fails: Vec<usize> = (0..n)
                .filter(|&x| rows[x][p] == Some(true) && rows[x][q] == Some(false))
                .collect();
            let holders: Vec<usize> = (0..n).filter(|&x| rows[x][p] == Some(true)).collect();
            for &x in fails.iter().take(2) {
                b.witness(
                    x,
                    &ctx.finest_params(),
                    format!(
                        "{} holds but {} fails (omega component {}, terminal={})",
                        names[p], names[q], omega[x], d.terminal[omega[x]]
                    ),
                    None,
                );
            }
            b.conclusion(
                Verdict::new(
                    format!("{} => {}", names[p], names[q]),
                    fails.is_empty(),
                    holders,
                )
                .capped(capped_any),
            );
        }
    }
    let r_nodes: Vec<usize> = restricted
        .values()
        .flat_map(|r| {
            r.cc.iter()
                .enumerate()
                .filter(|(_, &v)| v == Some(true))
                .map(|(i, _)| r.keep[i])
        })
        .collect();
    b.note(format!(
        "{} nodes chain continuous inside their restricted terminal component",
        r_nodes.len()
    ));
    Ok(b.finish())
}

/// Shadowable chain-recurrent nodes stay shadowable in the model restricted
/// to the chain-recurrent set.
pub fn check_theorem_b1(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(ctx, "B1", "Sh(f) intersect CR(f) is inside Sh(f|CR(f))");
    let (ei, dj) = (ctx.finest_eps(), ctx.finest_delta());
    let sh = ctx.shadowable(ei, dj)?;
    let d = &ctx.decomps[dj];
    let targets: Vec<usize> = d
        .cr_nodes
        .iter()
        .copied()
        .filter(|&x| sh[x] == Some(true))
        .collect();
    b.hypothesis(
        Verdict::new("shadowable chain-recurrent nodes", true, targets.clone())
            .capped(has_capped(sh)),
    );
    if targets.is_empty() {
        b.conclusion(Verdict::new(
            "inclusion (no shadowable chain-recurrent nodes)",
            true,
            Vec::new(),
        ));
        return Ok(b.finish());
    }
    let (rm, keep) = ctx.model.restrict(&d.cr_nodes)?;
    let slack = (rm.resolution_floor() - ctx.model.resolution_floor()).max(0.0);
    let epsilon = ctx.schedule.finest_epsilon() + slack;
    let delta = ctx.schedule.finest_delta().max(rm.chain_floor());
    let g = build_chain_digraph(&rm, delta)?;
    let local: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let results: Vec<Result<Option<_>>> = targets
        .par_iter()
        .map(|x| {
            capped(is_shadowable_capped(
                &rm,
                &g,
                local[x],
                epsilon,
                ctx.analysis.state_cap,
            ))
        })
        .collect();
    let mut passing = Vec::new();
    let mut any_capped = false;
    let mut failures = 0;
    for (&x, res) in targets.iter().zip(results) {
        match res? {
            None => any_capped = true,
            Some(v) if v.holds => passing.push(x),
            Some(v) => {
                failures += 1;
                let path = v
                    .counterexample
                    .map(|p| p.into_iter().map(|i| keep[i]).collect());
                b.witness(
                    x,
                    &[("epsilon", epsilon), ("delta", delta), ("slack", slack)],
                    "shadowable in the full model but not in the chain-recurrent restriction",
                    path,
                );
            }
        }
    }
    b.conclusion(
        Verdict::new(
            "shadowable in the restriction to CR",
            failures == 0,
            passing,
        )
        .capped(any_capped)
        .value(slack)
        .detail(format!(
            "restricted check at epsilon={} delta={}; value: slack",
            fmt_f(epsilon),
            fmt_f(delta)
        )),
    );
    Ok(b.finish())
}

/// Shadowability propagates along chain reachability.
pub fn check_lemma_2_1(ctx: &Context) -> Result<TheoremCheck> {
    let mut b = Builder::new(ctx, "L2.1", "x in Sh(f) and x -> y imply y in Sh(f)");
    let (ei, dj) = (ctx.finest_eps(), ctx.finest_delta());
    let sh = ctx.shadowable(ei, dj)?;
    let g = &ctx.digraphs[dj];
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut sources = nodes_with(sh, true);
    sources.shuffle(&mut rng);
    sources.truncate(ctx.analysis.pair_samples);
    sources.sort_unstable();
    let mut pairs = Vec::new();
    for &x in &sources {
        let reach: Vec<usize> = g
            .reachable_from(&[x])
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| r.then_some(i))
            .collect();
        if !reach.is_empty() {
            pairs.push((x, reach[rng.random_range(0..reach.len())]));
        }
    }
    b.hypothesis(
        Verdict::new(
            "sampled pairs x -> y with x shadowable",
            !pairs.is_empty(),
            pairs.iter().map(|p| p.0).collect(),
        )
        .capped(has_capped(sh))
        .value(pairs.len() as f64),
    );
    if pairs.is_empty() {
        return Ok(b.vacuous("shadowable node with a chain successor"));
    }
    let coarser = if ei > 0 {
        Some(ctx.shadowable(ei - 1, dj)?)
    } else {
        None
    };
    let mut exact = 0;
    let mut slack = 0;
    let mut any_capped = false;
    let mut failures = 0;
    let mut targets = Vec::new();
    for &(x, y) in &pairs {
        match sh[y] {
            Some(true) => exact += 1,
            None => any_capped = true,
            Some(false) => match coarser.map(|c| c[y]) {
                Some(Some(true)) => slack += 1,
                Some(None) => any_capped = true,
                _ => {
                    failures += 1;
                    b.witness(
                        y,
                        &[
                            ("source", x as f64),
                            ("epsilon", ctx.schedule.finest_epsilon()),
                            ("delta", g.delta()),
                        ],
                        format!("reachable from shadowable node {x} but not shadowable"),
                        g.path(x, y),
                    );
                }
            },
        }
        targets.push(y);
    }
    b.conclusion(
        Verdict::new(
            "y shadowable (one epsilon step of slack allowed)",
            failures == 0,
            targets,
        )
        .capped(any_capped)
        .value(slack as f64)
        .detail(format!(
            "{exact} pairs exact, {slack} pairs needed the coarser epsilon"
        )),
    );
    Ok(b.finish())
}

pub fn run_check(ctx: &Context, id: &str) -> Result<TheoremCheck> {
    match parse_theorem_id(id)? {
        "L1.1" => check_lemma_1_1(ctx),
        "1.1" => check_theorem_1_1(ctx),
        "1.2" => check_theorem_1_2(ctx),
        "1.3" => check_theorem_1_3(ctx),
        "1.4" => check_theorem_1_4(ctx),
        "A1" => check_theorem_a1(ctx),
        "B1" => check_theorem_b1(ctx),
        _ => check_lemma_2_1(ctx),
    }
}

/// Runs the given checks (all when `ids` is empty) in canonical order.
pub fn run_checks(ctx: &Context, ids: &[String]) -> Result<Vec<TheoremCheck>> {
    let mut wanted: Vec<&'static str> = if ids.is_empty() {
        THEOREM_IDS.to_vec()
    } else {
        ids.iter()
            .map(|s| parse_theorem_id(s))
            .collect::<Result<_>>()?
    };
    wanted.sort_by_key(|id| THEOREM_IDS.iter().position(|t| t == id));
    wanted.dedup();
    wanted.into_iter().map(|id| run_check(ctx, id)).collect()
}
