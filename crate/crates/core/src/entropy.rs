//! Entropy estimates: separated orbit counts, chain counts, spectral chain
//! entropy, entropy-point tests, the chain-family certificate and two-set
//! cover entropy. Natural logarithms throughout.

use crate::chains::{decompose, ChainDigraph};
use crate::clique::{max_clique, Graph};
use crate::error::{Error, Result};
use crate::model::{FiniteModel, DIST_TOL};
use crate::pointwise::{chain_sensitive_star, is_shadowable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Positivity threshold for "entropy > 0" verdicts.
pub const DEFAULT_THETA: f64 = 0.02;
pub const DEFAULT_EXACT_CAP: usize = 24;
pub const DEFAULT_CHAIN_CAP: usize = 5_000;
pub const DEFAULT_SEGMENT_CAP: usize = 400_000;
const CLIQUE_BUDGET: u64 = 5_000_000;
const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethod {
    SeparatedSlope,
    Spectral,
    PathCount,
    Certificate,
    Cover,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Lower,
    Upper,
    Estimate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EntropyParams {
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub region: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: EntropyMethod,
    pub params: EntropyParams,
    pub bound: BoundKind,
    /// `(n, count)` samples behind a slope.
    pub counts: Vec<(usize, f64)>,
    /// First `n` from which the counts stay constant, when that happens
    /// before the end of the range.
    pub saturation: Option<usize>,
    pub pre_saturation_slope: Option<f64>,
    /// `[lower, upper]` when the spectral iteration did not converge.
    pub bracket: Option<(f64, f64)>,
    pub note: Option<String>,
}

impl EntropyEstimate {
    fn new(value: f64, method: EntropyMethod, params: EntropyParams, bound: BoundKind) -> Self {
        EntropyEstimate {
            value: value.max(0.0),
            method,
            params,
            bound,
            counts: Vec::new(),
            saturation: None,
            pre_saturation_slope: None,
            bracket: None,
            note: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    Exact,
    Greedy,
}

/// Least-squares slope of `y` against `x`.
pub fn lstsq_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// All orbit segments `(y_0, ..., y_{n-1})` with `y_0 ∈ k_set`, in
/// lexicographic order.
pub fn orbit_segments(
    m: &FiniteModel,
    k_set: &[usize],
    n: usize,
    cap: usize,
) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Parameter("segment length must be >= 1".into()));
    }
    let mut starts = k_set.to_vec();
    starts.sort_unstable();
    starts.dedup();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = starts.iter().rev().map(|&s| vec![s]).collect();
    while let Some(seg) = stack.pop() {
        if seg.len() == n {
            if out.len() == cap {
                return Err(Error::capacity("orbit segments", cap + 1, cap));
            }
            out.push(seg);
            continue;
        }
        let last = *seg.last().unwrap();
        for &w in m.successors(last).iter().rev() {
            let mut next = seg.clone();
            next.push(w);
            stack.push(next);
        }
    }
    Ok(out)
}

fn separated(m: &FiniteModel, a: &[usize], b: &[usize], r: f64) -> bool {
    a.iter().zip(b).any(|(&x, &y)| m.dist(x, y) > r + DIST_TOL)
}

const FAR_TABLE_MAX: usize = 4096;

/// Precomputed `d(a, b) > r` over the nodes occurring in a family of segments.
struct FarTable {
    local: Vec<usize>,
    k: usize,
    bits: Vec<u64>,
}

impl FarTable {
    fn new(m: &FiniteModel, items: &[Vec<usize>], r: f64) -> Self {
        let mut nodes: Vec<usize> = items.iter().flatten().copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        let k = nodes.len();
        if k > FAR_TABLE_MAX {
            return FarTable {
                local: Vec::new(),
                k: 0,
                bits: Vec::new(),
            };
        }
        let mut bits = vec![0u64; (k * k).div_ceil(64)];
        for (i, &a) in nodes.iter().enumerate() {
            for (j, &b) in nodes.iter().enumerate() {
                if m.dist(a, b) > r + DIST_TOL {
                    let t = i * k + j;
                    bits[t / 64] |= 1 << (t % 64);
                }
            }
        }
        let mut local = vec![usize::MAX; m.len()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        FarTable { local, k, bits }
    }

    fn separated(&self, m: &FiniteModel, a: &[usize], b: &[usize], r: f64) -> bool {
        if self.k == 0 {
            return separated(m, a, b, r);
        }
        a.iter().zip(b).any(|(x, y)| {
            let t = self.local[*x] * self.k + self.local[*y];
            self.bits[t / 64] >> (t % 64) & 1 == 1
        })
    }
}

fn max_separated(
    m: &FiniteModel,
    items: &[Vec<usize>],
    r: f64,
    mode: CountMode,
    exact_cap: usize,
) -> Result<usize> {
    match mode {
        CountMode::Greedy => {
            let far = FarTable::new(m, items, r);
            let mut chosen: Vec<&Vec<usize>> = Vec::new();
            for it in items {
                if chosen.iter().all(|c| far.separated(m, c, it, r)) {
                    chosen.push(it);
                }
            }
            Ok(chosen.len())
        }
        CountMode::Exact => {
            if items.len() > exact_cap {
                return Err(Error::capacity(
                    "exact separated-set items",
                    items.len(),
                    exact_cap,
                ));
            }
            let mut g = Graph::new(items.len());
            for a in 0..items.len() {
                for b in a + 1..items.len() {
                    if separated(m, &items[a], &items[b], r) {
                        g.add_edge(a, b);
                    }
                }
            }
            let res = max_clique(&g, CLIQUE_BUDGET);
            if !res.exact {
                return Err(Error::capacity(
                    "clique search steps",
                    CLIQUE_BUDGET as usize + 1,
                    CLIQUE_BUDGET as usize,
                ));
            }
            Ok(res.clique.len())
        }
    }
}

/// Largest `(n, r)`-separated family of orbit segments starting in `k_set`.
/// Exact mode caps the number of segments at `exact_cap`.
pub fn separated_count(
    m: &FiniteModel,
    k_set: &[usize],
    n: usize,
    r: f64,
    mode: CountMode,
    exact_cap: usize,
) -> Result<usize> {
    if k_set.is_empty() {
        return Ok(0);
    }
    let cap = match mode {
        CountMode::Exact => exact_cap,
        CountMode::Greedy => DEFAULT_SEGMENT_CAP,
    };
    let segs = orbit_segments(m, k_set, n, cap)?;
    max_separated(m, &segs, r, mode, exact_cap)
}

fn check_range(n_min: usize, n_max: usize) -> Result<()> {
    if n_min == 0 || n_max <= n_min {
        return Err(Error::Parameter(format!(
            "degenerate n range {n_min}..={n_max} (need 1 <= n_min < n_max)"
        )));
    }
    Ok(())
}

fn slope_with_saturation(counts: &[(usize, f64)]) -> (f64, Option<usize>, Option<f64>) {
    let pts: Vec<(f64, f64)> = counts.iter().map(|&(n, c)| (n as f64, c.ln())).collect();
    let slope = lstsq_slope(&pts);
    let last = counts.last().unwrap().1;
    let mut j = counts.len() - 1;
    while j > 0 && counts[j - 1].1 == last {
        j -= 1;
    }
    if j + 1 < counts.len() {
        (slope, Some(counts[j].0), Some(lstsq_slope(&pts[..=j])))
    } else {
        (slope, None, None)
    }
}

/// Least-squares slope of `ln separated_count` over `n_min..=n_max`.
pub fn entropy_slope(
    m: &FiniteModel,
    k_set: &[usize],
    r: f64,
    n_min: usize,
    n_max: usize,
    mode: CountMode,
) -> Result<EntropyEstimate> {
    check_range(n_min, n_max)?;
    if k_set.is_empty() {
        return Err(Error::Parameter("empty region".into()));
    }
    let counts: Result<Vec<(usize, f64)>> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| separated_count(m, k_set, n, r, mode, DEFAULT_EXACT_CAP).map(|c| (n, c as f64)))
        .collect();
    let counts = counts?;
    let (slope, saturation, pre) = slope_with_saturation(&counts);
    let mut est = EntropyEstimate::new(
        slope,
        EntropyMethod::SeparatedSlope,
        EntropyParams {
            r: Some(r),
            n_min: Some(n_min),
            n_max: Some(n_max),
            region: Some(format!("{} nodes", k_set.len())),
            ..Default::default()
        },
        BoundKind::Estimate,
    );
    est.counts = counts;
    est.saturation = saturation;
    est.pre_saturation_slope = pre;
    Ok(est)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainCountMode {
    Exact,
    AllChains,
}

/// Number of distinct paths with `n` nodes, by dynamic programming.
pub fn path_count(g: &ChainDigraph, n: usize) -> Result<u128> {
    if n == 0 {
        return Ok(0);
    }
    let mut v = vec![1u128; g.node_count()];
    for _ in 1..n {
        let mut next = vec![0u128; v.len()];
        for (a, b) in g.edges() {
            next[b] = next[b]
                .checked_add(v[a])
                .ok_or_else(|| Error::capacity("path count (u128)", usize::MAX, usize::MAX))?;
        }
        v = next;
    }
    v.into_iter().try_fold(0u128, |acc, c| {
        acc.checked_add(c)
            .ok_or_else(|| Error::capacity("path count (u128)", usize::MAX, usize::MAX))
    })
}

/// `ln P(n) - ln P(n-1)` for the path count `P`.
pub fn path_count_slope(g: &ChainDigraph, n: usize) -> Result<EntropyEstimate> {
    if n < 2 {
        return Err(Error::Parameter("path-count slope needs n >= 2".into()));
    }
    let (a, b) = (path_count(g, n - 1)?, path_count(g, n)?);
    let value = if a == 0 || b == 0 {
        0.0
    } else {
        (b as f64).ln() - (a as f64).ln()
    };
    let mut est = EntropyEstimate::new(
        value,
        EntropyMethod::PathCount,
        EntropyParams {
            delta: Some(g.delta()),
            n_min: Some(n - 1),
            n_max: Some(n),
            ..Default::default()
        },
        BoundKind::Estimate,
    );
    est.counts = vec![(n - 1, a as f64), (n, b as f64)];
    Ok(est)
}

fn all_paths(g: &ChainDigraph, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..g.node_count()).rev().map(|s| vec![s]).collect();
    while let Some(p) = stack.pop() {
        if p.len() == n {
            out.push(p);
            continue;
        }
        for &w in g.neighbors(*p.last().unwrap()).iter().rev() {
            let mut q = p.clone();
            q.push(w);
            stack.push(q);
        }
    }
    out
}

/// Largest family of pairwise `(n, r)`-separated δ-chains with `n` nodes.
/// `AllChains` mode requires `r` below the model's smallest positive distance
/// (or no model), where every pair of distinct chains is separated.
pub fn chain_separated_count(
    g: &ChainDigraph,
    m: Option<&FiniteModel>,
    n: usize,
    r: f64,
    mode: ChainCountMode,
    cap: usize,
) -> Result<u128> {
    match mode {
        ChainCountMode::AllChains => {
            if let Some(m) = m {
                let floor = separation_floor(m);
                if r + DIST_TOL >= floor {
                    return Err(Error::Parameter(format!(
                        "all-chains mode needs r < separation floor {floor}"
                    )));
                }
            }
            path_count(g, n)
        }
        ChainCountMode::Exact => {
            let m = m.ok_or_else(|| Error::Parameter("exact chain count needs a model".into()))?;
            let total = path_count(g, n)?;
            if total > cap as u128 {
                return Err(Error::capacity(
                    "chains",
                    total.min(usize::MAX as u128) as usize,
                    cap,
                ));
            }
            let chains = all_paths(g, n);
            Ok(max_separated(m, &chains, r, CountMode::Exact, cap)? as u128)
        }
    }
}

/// Smallest positive distance between model points.
pub fn separation_floor(m: &FiniteModel) -> f64 {
    (0..m.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..m.len())
                .map(|j| m.dist(i, j))
                .filter(|&d| d > 0.0)
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

struct Spectral {
    rho: f64,
    bracket: Option<(f64, f64)>,
}

/// Spectral radius of a strongly connected block via power iteration on
/// `A + I` (primitive, same Perron vector), stopped when the Collatz-Wielandt
/// bracket is tighter than the tolerance.
fn block_radius(adj: &[Vec<usize>]) -> Spectral {
    let k = adj.len();
    let mut x = vec![1.0 / k as f64; k];
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let mut y = x.clone();
        for (a, row) in adj.iter().enumerate() {
            for &b in row {
                y[a] += x[b];
            }
        }
        lo = f64::INFINITY;
        hi = 0.0f64;
        for i in 0..k {
            let ratio = y[i] / x[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        let norm: f64 = y.iter().sum();
        x = y.into_iter().map(|v| v / norm).collect();
        if hi - lo <= POWER_TOL * hi {
            return Spectral {
                rho: 0.5 * (lo + hi) - 1.0,
                bracket: None,
            };
        }
    }
    Spectral {
        rho: 0.5 * (lo + hi) - 1.0,
        bracket: Some((lo - 1.0, hi - 1.0)),
    }
}

/// Log spectral radius of the adjacency matrix (max over strongly connected
/// blocks); 0 when the digraph has no cycle.
pub fn spectral_chain_entropy(g: &ChainDigraph) -> EntropyEstimate {
    let d = decompose(g);
    let blocks: Vec<Spectral> = d
        .components
        .par_iter()
        .map(|comp| {
            let sub = g.induced(comp);
            let adj: Vec<Vec<usize>> = (0..sub.node_count())
                .map(|i| sub.neighbors(i).to_vec())
                .collect();
            block_radius(&adj)
        })
        .collect();
    let params = EntropyParams {
        delta: Some(g.delta()),
        region: Some(format!("{} nodes", g.node_count())),
        ..Default::default()
    };
    let best = blocks.iter().max_by(|a, b| a.rho.total_cmp(&b.rho));
    let Some(best) = best else {
        let mut e = EntropyEstimate::new(0.0, EntropyMethod::Spectral, params, BoundKind::Estimate);
        e.note = Some("no cycles".into());
        return e;
    };
    let ln = |v: f64| if v > 1.0 { v.ln() } else { 0.0 };
    let mut e = EntropyEstimate::new(
        ln(best.rho),
        EntropyMethod::Spectral,
        params,
        BoundKind::Estimate,
    );
    if let Some((lo, hi)) = blocks
        .iter()
        .filter_map(|b| b.bracket)
        .reduce(|a, b| (a.0.max(b.0), a.1.max(b.1)))
    {
        let lo = lo.max(
            blocks
                .iter()
                .filter(|b| b.bracket.is_none())
                .map(|b| b.rho)
                .fold(0.0, f64::max),
        );
        e.bracket = Some((ln(lo), ln(hi)));
        e.note = Some("power iteration hit its cap; bracket from row ratios".into());
    }
    e
}

/// Spectral entropy of the digraph induced on `nodes` (e.g. one component).
pub fn restricted_spectral_entropy(g: &ChainDigraph, nodes: &[usize]) -> EntropyEstimate {
    let mut e = spectral_chain_entropy(&g.induced(nodes));
    e.params.region = Some(format!("{} nodes", nodes.len()));
    e
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyPointVerdict {
    pub node: usize,
    pub r: f64,
    pub threshold: f64,
    pub member: bool,
    pub per_radius: Vec<(f64, EntropyEstimate)>,
}

/// Whether the separated-slope at scale `r` over every scheduled ball around
/// `x` is at least `threshold`.
pub fn ent_rb_test(
    m: &FiniteModel,
    x: usize,
    r: f64,
    threshold: f64,
    radii: &[f64],
    n_range: (usize, usize),
    mode: CountMode,
) -> Result<EntropyPointVerdict> {
    if r + DIST_TOL < m.resolution_floor() {
        return Err(Error::resolution("entropy r", r, m.resolution_floor()));
    }
    let mut per_radius = Vec::new();
    let mut member = true;
    for &rho in radii {
        let ball = m.ball(x, rho);
        let mut est = entropy_slope(m, &ball, r, n_range.0, n_range.1, mode)?;
        est.params.region = Some(format!("ball({x}, {rho})"));
        member &= est.value >= threshold;
        per_radius.push((rho, est));
        if !member {
            break;
        }
    }
    Ok(EntropyPointVerdict {
        node: x,
        r,
        threshold,
        member,
        per_radius,
    })
}

/// [`ent_rb_test`] at the positivity threshold `theta`.
pub fn entropy_point_test(
    m: &FiniteModel,
    x: usize,
    r: f64,
    theta: f64,
    radii: &[f64],
    n_range: (usize, usize),
    mode: CountMode,
) -> Result<EntropyPointVerdict> {
    ent_rb_test(m, x, r, theta, radii, n_range, mode)
}

/// Whether some `(r, b)` on the grid gives a positive [`ent_rb_test`].
pub fn ent_up_test(
    m: &FiniteModel,
    x: usize,
    rs: &[f64],
    bs: &[f64],
    radii: &[f64],
    n_range: (usize, usize),
    mode: CountMode,
) -> Result<Option<(f64, f64)>> {
    for &r in rs {
        for &b in bs {
            if ent_rb_test(m, x, r, b, radii, n_range, mode)?.member {
                return Ok(Some((r, b)));
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub estimate: EntropyEstimate,
    /// The `2^N` concatenated chains, indexed by the binary word `u`.
    pub chains: Vec<Vec<usize>>,
    pub alpha: (Vec<usize>, Vec<usize>),
    pub beta: (Vec<usize>, Vec<usize>),
    /// Steps of one block `γ_0` or `γ_1`.
    pub block_len: usize,
    pub blocks: usize,
    pub min_pair_separation: f64,
}

/// Builds `2^N` δ-chains from `x` out of two diverging chains and their
/// return chains, checks they are pairwise `(nN, s)`-separated and returns
/// the lower bound `ln 2 / n` together with the family.
///
/// With `epsilon = Some(ε)` the precondition `s + 2ε < r` is enforced, and if
/// `x` is shadowable at `(ε, δ)` the note records the implied bound for
/// separated orbits from `B_ε(x)` at scale `s`.
pub fn entropy_certificate(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    r: f64,
    s: f64,
    blocks: usize,
    epsilon: Option<f64>,
) -> Result<Certificate> {
    if !(s > 0.0 && s < r) {
        return Err(Error::Parameter(format!(
            "need 0 < s < r, got s = {s}, r = {r}"
        )));
    }
    if let Some(eps) = epsilon {
        if s + 2.0 * eps >= r {
            return Err(Error::Parameter(format!(
                "need s + 2 epsilon < r, got {s} + 2*{eps} >= {r}"
            )));
        }
    }
    if blocks == 0 || blocks > 16 {
        return Err(Error::Parameter(format!(
            "block count {blocks} outside 1..=16"
        )));
    }
    let w = chain_sensitive_star(m, g, x, r)?.ok_or_else(|| {
        Error::NoWitness(format!("node {x} has no chain pair separating beyond {r}"))
    })?;
    let (a0, a1) = (w.left, w.right);
    let back = |from: usize| {
        g.path(from, x)
            .ok_or_else(|| Error::NoWitness(format!("no chain from {from} back to {x}")))
    };
    let b0 = back(*a0.last().unwrap())?;
    let b1 = back(*a1.last().unwrap())?;
    let join = |parts: &[&Vec<usize>]| {
        let mut out = vec![x];
        for p in parts {
            out.extend_from_slice(&p[1..]);
        }
        out
    };
    let gamma = [join(&[&a0, &b0, &a1, &b1]), join(&[&a1, &b1, &a0, &b0])];
    let n = gamma[0].len() - 1;
    let chains: Vec<Vec<usize>> = (0..1usize << blocks)
        .map(|u| {
            let mut c = vec![x];
            for j in 0..blocks {
                c.extend_from_slice(&gamma[u >> (blocks - 1 - j) & 1][1..]);
            }
            c
        })
        .collect();
    let mut min_sep = f64::INFINITY;
    for a in 0..chains.len() {
        debug_assert!(chains[a].windows(2).all(|p| g.has_edge(p[0], p[1])));
        for b in a + 1..chains.len() {
            let sep = chains[a]
                .iter()
                .zip(&chains[b])
                .map(|(&p, &q)| m.dist(p, q))
                .fold(0.0, f64::max);
            assert!(
                sep > s,
                "certificate chains {a} and {b} are not (nN, s)-separated"
            );
            min_sep = min_sep.min(sep);
        }
    }
    let mut estimate = EntropyEstimate::new(
        std::f64::consts::LN_2 / n as f64,
        EntropyMethod::Certificate,
        EntropyParams {
            r: Some(s),
            delta: Some(g.delta()),
            n_min: Some(n),
            n_max: Some(n * blocks),
            region: Some(format!("node {x}")),
        },
        BoundKind::Lower,
    );
    if let Some(eps) = epsilon {
        if is_shadowable(m, g, x, eps)?.holds {
            estimate.note = Some(format!(
                "node {x} is shadowable at (epsilon {eps}, delta {}): separated orbits from B_eps(x) at scale {s} grow at rate >= ln2/{n}",
                g.delta()
            ));
        }
    }
    Ok(Certificate {
        estimate,
        chains,
        alpha: (a0, a1),
        beta: (b0, b1),
        block_len: n,
        blocks,
        min_pair_separation: min_sep,
    })
}

/// Pattern letter: which cover elements contain the point. `0` is
/// `X \ A`, `1` is `X \ B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Letter {
    Zero,
    One,
    Any,
}

fn letter(in_a: bool, in_b: bool) -> Letter {
    match (in_a, in_b) {
        (true, _) => Letter::One,
        (_, true) => Letter::Zero,
        _ => Letter::Any,
    }
}

fn covers(word: u32, p: &[Letter]) -> bool {
    let n = p.len();
    p.iter().enumerate().all(|(i, &l)| {
        let bit = word >> (n - 1 - i) & 1;
        match l {
            Letter::Any => true,
            Letter::Zero => bit == 0,
            Letter::One => bit == 1,
        }
    })
}

fn compatible(p: &[Letter], q: &[Letter]) -> bool {
    p.iter()
        .zip(q)
        .all(|(&a, &b)| a == Letter::Any || b == Letter::Any || a == b)
}

/// `q` is at least as permissive as `p` at every position.
fn weaker(q: &[Letter], p: &[Letter]) -> bool {
    q.iter().zip(p).all(|(&a, &b)| a == Letter::Any || a == b)
}

/// Distinct itinerary patterns of orbit segments of length `n`.
fn patterns(
    m: &FiniteModel,
    in_a: &[bool],
    in_b: &[bool],
    n: usize,
    cap: usize,
) -> Result<Vec<Vec<Letter>>> {
    let mut layer: BTreeSet<(usize, Vec<Letter>)> = (0..m.len())
        .map(|v| (v, vec![letter(in_a[v], in_b[v])]))
        .collect();
    for _ in 1..n {
        let mut next = BTreeSet::new();
        for (v, p) in &layer {
            for &w in m.successors(*v) {
                let mut q = p.clone();
                q.push(letter(in_a[w], in_b[w]));
                next.insert((w, q));
                if next.len() > cap {
                    return Err(Error::capacity("cover patterns", next.len(), cap));
                }
            }
        }
        layer = next;
    }
    let all: BTreeSet<Vec<Letter>> = layer.into_iter().map(|(_, p)| p).collect();
    // keep only the most restrictive patterns
    let all: Vec<Vec<Letter>> = all.into_iter().collect();
    let minimal = all
        .iter()
        .filter(|p| !all.iter().any(|q| q != *p && weaker(p, q)))
        .cloned()
        .collect();
    Ok(minimal)
}

struct CoverSearch<'a> {
    pats: &'a [Vec<Letter>],
    best: usize,
    steps: u64,
    budget: u64,
}

impl CoverSearch<'_> {
    fn lower_bound(&self, uncovered: &[usize]) -> usize {
        let mut picked: Vec<usize> = Vec::new();
        for &i in uncovered {
            if picked
                .iter()
                .all(|&j| !compatible(&self.pats[i], &self.pats[j]))
            {
                picked.push(i);
            }
        }
        picked.len()
    }

    fn run(&mut self, uncovered: Vec<usize>, used: usize) {
        self.steps += 1;
        if uncovered.is_empty() {
            self.best = self.best.min(used);
            return;
        }
        if self.steps > self.budget || used + self.lower_bound(&uncovered) >= self.best {
            return;
        }
        // branch on the most constrained pattern
        let &pick = uncovered
            .iter()
            .min_by_key(|&&i| self.pats[i].iter().filter(|&&l| l == Letter::Any).count())
            .unwrap();
        let p = &self.pats[pick];
        let n = p.len();
        let free: Vec<usize> = (0..n).filter(|&i| p[i] == Letter::Any).collect();
        let base: u32 = p
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == Letter::One)
            .fold(0, |acc, (i, _)| acc | 1 << (n - 1 - i));
        let mut options: Vec<(usize, Vec<usize>)> = (0..1u32 << free.len())
            .map(|bits| {
                let word = free
                    .iter()
                    .enumerate()
                    .fold(base, |acc, (k, &i)| acc | ((bits >> k & 1) << (n - 1 - i)));
                let rest: Vec<usize> = uncovered
                    .iter()
                    .copied()
                    .filter(|&i| !covers(word, &self.pats[i]))
                    .collect();
                (rest.len(), rest)
            })
            .collect();
        options.sort();
        options.dedup();
        for (_, rest) in options {
            self.run(rest, used + 1);
        }
    }
}

fn greedy_cover(pats: &[Vec<Letter>], n: usize) -> usize {
    let mut uncovered: Vec<usize> = (0..pats.len()).collect();
    let mut used = 0;
    while !uncovered.is_empty() {
        // candidate words: completions of uncovered patterns with `Any` as 0 or 1
        let mut best: Option<(usize, u32)> = None;
        let mut tried = BTreeSet::new();
        for &i in &uncovered {
            for fill in [0u32, u32::MAX] {
                let word = pats[i].iter().enumerate().fold(0u32, |acc, (k, &l)| {
                    let bit = match l {
                        Letter::Zero => 0,
                        Letter::One => 1,
                        Letter::Any => fill & 1,
                    };
                    acc | bit << (n - 1 - k)
                });
                if tried.insert(word) {
                    let c = uncovered
                        .iter()
                        .filter(|&&j| covers(word, &pats[j]))
                        .count();
                    if best.is_none_or(|b| c > b.0) {
                        best = Some((c, word));
                    }
                }
            }
        }
        let word = best.unwrap().1;
        uncovered.retain(|&j| !covers(word, &pats[j]));
        used += 1;
    }
    used
}

pub const COVER_EXACT_MAX_N: usize = 10;
pub const COVER_MAX_N: usize = 14;
const COVER_BUDGET: u64 = 2_000_000;

/// Cover entropy of `{X \ A, X \ B}`: slope of `ln N_n` over `n = 1..=n_max`,
/// where `N_n` is the fewest itinerary words covering all orbit segments.
/// Exact for `n <= 10`; beyond that (or when the search budget runs out) a
/// greedy cover gives an upper bound and the estimate is flagged.
pub fn cover_entropy_two_sets(
    m: &FiniteModel,
    a: &[usize],
    b: &[usize],
    n_max: usize,
) -> Result<EntropyEstimate> {
    if !(2..=COVER_MAX_N).contains(&n_max) {
        return Err(Error::Parameter(format!(
            "n_max {n_max} outside 2..={COVER_MAX_N}"
        )));
    }
    let mut in_a = vec![false; m.len()];
    let mut in_b = vec![false; m.len()];
    for &v in a {
        in_a[v] = true;
    }
    for &v in b {
        if in_a[v] {
            return Err(Error::Parameter(format!("sets A and B share node {v}")));
        }
        in_b[v] = true;
    }
    let mut exact = true;
    let counts: Result<Vec<(usize, f64)>> = (1..=n_max)
        .map(|n| {
            let pats = patterns(m, &in_a, &in_b, n, DEFAULT_SEGMENT_CAP)?;
            let upper = greedy_cover(&pats, n);
            let count = if n <= COVER_EXACT_MAX_N {
                let mut s = CoverSearch {
                    pats: &pats,
                    best: upper,
                    steps: 0,
                    budget: COVER_BUDGET,
                };
                s.run((0..pats.len()).collect(), 0);
                if s.steps > s.budget {
                    exact = false;
                }
                s.best
            } else {
                exact = false;
                upper
            };
            Ok((n, count as f64))
        })
        .collect();
    let counts = counts?;
    let pts: Vec<(f64, f64)> = counts.iter().map(|&(n, c)| (n as f64, c.ln())).collect();
    let mut e = EntropyEstimate::new(
        lstsq_slope(&pts),
        EntropyMethod::Cover,
        EntropyParams {
            n_min: Some(1),
            n_max: Some(n_max),
            region: Some(format!("|A| = {}, |B| = {}", a.len(), b.len())),
            ..Default::default()
        },
        if exact {
            BoundKind::Estimate
        } else {
            BoundKind::Upper
        },
    );
    e.counts = counts;
    if !exact {
        e.note = Some("some counts are greedy upper bounds".into());
    }
    Ok(e)
}

/// Table rows `(n, r, delta, region, count, slope)` for CSV export.
pub fn count_table(est: &EntropyEstimate) -> Vec<BTreeMap<&'static str, String>> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    est.counts
        .iter()
        .map(|&(n, c)| {
            BTreeMap::from([
                ("n", n.to_string()),
                ("r", opt(est.params.r)),
                ("delta", opt(est.params.delta)),
                ("region", est.params.region.clone().unwrap_or_default()),
                ("count", c.to_string()),
                ("slope", est.value.to_string()),
            ])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build_chain_digraph;
    use crate::model::{build_grid_model, build_subshift_model, GridSpec, MapSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn golden() -> ChainDigraph {
        ChainDigraph::from_edges(2, &[(0, 0), (0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn path_counts_follow_fibonacci() {
        let fib = |k: usize| (0..k).fold((0u128, 1u128), |(a, b), _| (b, a + b)).0;
        for n in 1..=30 {
            assert_eq!(path_count(&golden(), n).unwrap(), fib(n + 2));
        }
        assert_eq!(
            chain_separated_count(&golden(), None, 10, 0.0, ChainCountMode::AllChains, 0).unwrap(),
            144
        );
        let loop1 = ChainDigraph::from_edges(1, &[(0, 0)]).unwrap();
        assert_eq!(path_count(&loop1, 7).unwrap(), 1);
    }

    #[test]
    fn spectral_values() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let e = spectral_chain_entropy(&golden());
        assert!((e.value - phi.ln()).abs() < 1e-8);
        assert!(e.bracket.is_none());
        let slope = path_count_slope(&golden(), 20).unwrap().value;
        assert!((slope - e.value).abs() < 1e-3);
        let k4: Vec<(usize, usize)> = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).collect();
        let e = spectral_chain_entropy(&ChainDigraph::from_edges(4, &k4).unwrap());
        assert!((e.value - 4f64.ln()).abs() < 1e-8);
        let e = spectral_chain_entropy(&ChainDigraph::from_edges(1, &[(0, 0)]).unwrap());
        assert_eq!(e.value, 0.0);
        let dag = ChainDigraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(spectral_chain_entropy(&dag).value, 0.0);
    }

    #[test]
    fn two_point_counts() {
        let m = FiniteModel::from_map("pq", vec![vec![0.0, 1.0], vec![1.0, 0.0]], &[0, 1]).unwrap();
        for n in 1..5 {
            assert_eq!(
                separated_count(&m, &[0, 1], n, 0.5, CountMode::Exact, 24).unwrap(),
                2
            );
            assert_eq!(
                separated_count(&m, &[1], n, 0.5, CountMode::Greedy, 24).unwrap(),
                1
            );
        }
        let est = entropy_slope(&m, &[0, 1], 0.5, 1, 5, CountMode::Exact).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.saturation, Some(1));
    }

    #[test]
    fn full_shift_slope_is_ln2() {
        let m = build_subshift_model(&['0', '1'], &[], 3, 100_000).unwrap();
        // separation at 0.5 compares the central coordinate only
        let all: Vec<usize> = (0..m.len()).collect();
        let est = entropy_slope(&m, &all, 0.5, 1, 4, CountMode::Greedy).unwrap();
        for &(n, c) in &est.counts {
            assert_eq!(c, 2f64.powi(n as i32));
        }
        assert!((est.value - 2f64.ln()).abs() < 0.05);
    }

    #[test]
    fn greedy_never_beats_exact() {
        let m = build_grid_model(&GridSpec {
            map: MapSpec::Tent,
            mesh: 1.0 / 16.0,
            node_cap: 1000,
        })
        .unwrap();
        for n in 1..4 {
            for r in [0.1, 0.3] {
                let k = [0, 3, 7, 8, 12];
                let segs = orbit_segments(&m, &k, n, 1000).unwrap();
                if segs.len() <= 24 {
                    let e = separated_count(&m, &k, n, r, CountMode::Exact, 24).unwrap();
                    let g = separated_count(&m, &k, n, r, CountMode::Greedy, 24).unwrap();
                    assert!(g <= e);
                }
            }
        }
    }

    #[test]
    fn certificate_on_two_node_complete_digraph() {
        let m = FiniteModel::explicit(
            "k2",
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let g = build_chain_digraph(&m, 0.5).unwrap();
        assert_eq!(g.edge_count(), 4);
        let c = entropy_certificate(&m, &g, 0, 0.5, 0.25, 3, None).unwrap();
        assert_eq!(c.block_len, 4);
        assert_eq!(c.chains.len(), 8);
        assert!((c.estimate.value - 2f64.ln() / 4.0).abs() < 1e-15);
        assert_eq!(c.estimate.bound, BoundKind::Lower);
    }

    #[test]
    fn certificate_needs_sensitivity() {
        let m = build_grid_model(&GridSpec {
            map: MapSpec::Identity,
            mesh: 0.25,
            node_cap: 100,
        })
        .unwrap();
        let g = build_chain_digraph(&m, 0.125).unwrap();
        assert!(matches!(
            entropy_certificate(&m, &g, 0, 0.5, 0.25, 2, None),
            Err(Error::NoWitness(_))
        ));
    }

    #[test]
    fn cover_entropy_examples() {
        let m = build_subshift_model(&['0', '1'], &[], 2, 1000).unwrap();
        let a: Vec<usize> = (0..m.len())
            .filter(|&i| m.label(i).as_bytes()[2] == b'0')
            .collect();
        let b: Vec<usize> = (0..m.len())
            .filter(|&i| m.label(i).as_bytes()[2] == b'1')
            .collect();
        let e = cover_entropy_two_sets(&m, &a, &b, 6).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 0.1, "{e:?}");
        assert_eq!(e.bound, BoundKind::Estimate);

        let id =
            FiniteModel::from_map("pq", vec![vec![0.0, 1.0], vec![1.0, 0.0]], &[0, 1]).unwrap();
        let e = cover_entropy_two_sets(&id, &[0], &[1], 6).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(cover_entropy_two_sets(&id, &[0], &[0], 4).is_err());
    }

    #[test]
    fn exact_cover_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ls = [Letter::Zero, Letter::One, Letter::Any];
        for _ in 0..60 {
            let n = 1 + rng.random_range(0..4);
            let k = 1 + rng.random_range(0..6);
            let pats: Vec<Vec<Letter>> = (0..k)
                .map(|_| (0..n).map(|_| ls[rng.random_range(0..3)]).collect())
                .collect();
            let brute = (0u64..1 << (1 << n))
                .filter(|&mask| {
                    pats.iter()
                        .all(|p| (0..1u32 << n).any(|w| mask >> w & 1 == 1 && covers(w, p)))
                })
                .map(|m| m.count_ones() as usize)
                .min()
                .unwrap();
            let mut s = CoverSearch {
                pats: &pats,
                best: greedy_cover(&pats, n),
                steps: 0,
                budget: u64::MAX,
            };
            s.run((0..pats.len()).collect(), 0);
            assert_eq!(s.best, brute, "{pats:?}");
        }
    }
}
