//! Exact pointwise decisions on a finite model at fixed resolution.
//!
//! Orbits of a model are successor paths (see [`FiniteModel::successors`]);
//! for deterministic models this is the single orbit of a point.

use crate::chains::ChainDigraph;
use crate::error::{Error, Result};
use crate::model::{FiniteModel, ResolutionSchedule, DIST_TOL};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

/// Default bound on explored `(node, candidate set)` states per shadowing query.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;
/// Largest model on which pair searches run (visited set is `m^2` bits).
pub const PAIR_NODE_CAP: usize = 16_384;

/// Result of a tracking search (shadowing or chain continuity).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrackVerdict {
    pub holds: bool,
    /// Shortest chain from the start node along which no candidate survives.
    pub counterexample: Option<Vec<usize>>,
    pub states: usize,
}

/// Two equal-length paths; `left[i]` and `right[i]` are the positions at step `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairWitness {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl PairWitness {
    pub fn steps(&self) -> usize {
        self.left.len() - 1
    }
}

fn sorted_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

fn check_epsilon(m: &FiniteModel, g: &ChainDigraph, epsilon: f64) -> Result<()> {
    if epsilon + DIST_TOL < m.resolution_floor() {
        return Err(Error::resolution("epsilon", epsilon, m.resolution_floor()));
    }
    if g.node_count() != m.len() {
        return Err(Error::Parameter(format!(
            "digraph has {} nodes, model has {}",
            g.node_count(),
            m.len()
        )));
    }
    if g.delta() + DIST_TOL < m.chain_floor() {
        return Err(Error::resolution("delta", g.delta(), m.chain_floor()));
    }
    Ok(())
}

/// Breadth-first search over `(chain node, candidate set)` states. A state
/// is skipped when a visited state at the same node has a subset of its
/// candidates, since the successor-and-filter step is monotone in the set.
/// With `canonical` the candidates advance by `image` instead of by all
/// successors.
fn track(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    start: Vec<usize>,
    epsilon: f64,
    cap: usize,
    canonical: bool,
) -> Result<TrackVerdict> {
    let n = m.len();
    let mut arena: Vec<(usize, Vec<usize>, usize)> = vec![(x, start, usize::MAX)];
    let mut by_node: Vec<Vec<usize>> = vec![Vec::new(); n];
    by_node[x].push(0);
    let mut queue = VecDeque::from([0usize]);
    let mut next = Vec::new();
    while let Some(s) = queue.pop_front() {
        let v = arena[s].0;
        next.clear();
        for &y in &arena[s].1 {
            if canonical {
                next.push(m.image(y));
            } else {
                next.extend_from_slice(m.successors(y));
            }
        }
        next.sort_unstable();
        next.dedup();
        for &w in g.neighbors(v) {
            let y: Vec<usize> = next
                .iter()
                .copied()
                .filter(|&z| m.dist(z, w) <= epsilon + DIST_TOL)
                .collect();
            if y.is_empty() {
                let mut chain = vec![w];
                let mut cur = s;
                while cur != usize::MAX {
                    chain.push(arena[cur].0);
                    cur = arena[cur].2;
                }
                chain.reverse();
                return Ok(TrackVerdict {
                    holds: false,
                    counterexample: Some(chain),
                    states: arena.len(),
                });
            }
            if by_node[w].iter().any(|&t| sorted_subset(&arena[t].1, &y)) {
                continue;
            }
            if arena.len() >= cap {
                return Err(Error::capacity("shadowing states", arena.len() + 1, cap));
            }
            by_node[w].retain(|&t| !sorted_subset(&y, &arena[t].1));
            by_node[w].push(arena.len());
            queue.push_back(arena.len());
            arena.push((w, y, s));
        }
    }
    Ok(TrackVerdict {
        holds: true,
        counterexample: None,
        states: arena.len(),
    })
}

/// Whether every δ-chain of `g` from `x` is ε-shadowed by an orbit starting
/// in the closed ball `B_ε(x)`.
pub fn is_shadowable(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    epsilon: f64,
) -> Result<TrackVerdict> {
    is_shadowable_capped(m, g, x, epsilon, DEFAULT_STATE_CAP)
}

pub fn is_shadowable_capped(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    epsilon: f64,
    cap: usize,
) -> Result<TrackVerdict> {
    check_epsilon(m, g, epsilon)?;
    track(m, g, x, m.ball(x, epsilon), epsilon, cap, false)
}

/// Nodes of `m` that are shadowable at `(epsilon, g.delta())`, sorted.
pub fn sh_set(m: &FiniteModel, g: &ChainDigraph, epsilon: f64) -> Result<Vec<usize>> {
    check_epsilon(m, g, epsilon)?;
    let verdicts: Result<Vec<bool>> = (0..m.len())
        .into_par_iter()
        .map(|x| is_shadowable(m, g, x, epsilon).map(|v| v.holds))
        .collect();
    Ok(verdicts?
        .into_iter()
        .enumerate()
        .filter_map(|(i, b)| b.then_some(i))
        .collect())
}

/// Whether every δ-chain from `x` is ε-shadowed by the canonical orbit of
/// `x` (iteration of [`FiniteModel::image`]).
pub fn is_chain_continuous(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    epsilon: f64,
) -> Result<TrackVerdict> {
    is_chain_continuous_capped(m, g, x, epsilon, DEFAULT_STATE_CAP)
}

pub fn is_chain_continuous_capped(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    epsilon: f64,
    cap: usize,
) -> Result<TrackVerdict> {
    check_epsilon(m, g, epsilon)?;
    track(m, g, x, vec![x], epsilon, cap, true)
}

/// Breadth-first search over position pairs. Returns the shortest pair of
/// paths from a start pair to a pair satisfying `bad`.
fn pair_search<'a, A, B>(
    n: usize,
    starts: impl IntoIterator<Item = (usize, usize)>,
    step_a: A,
    step_b: B,
    symmetric: bool,
    bad: impl Fn(usize, usize) -> bool,
) -> Result<Option<PairWitness>>
where
    A: Fn(usize) -> &'a [usize],
    B: Fn(usize) -> &'a [usize],
{
    if n > PAIR_NODE_CAP {
        return Err(Error::capacity("pair search nodes", n, PAIR_NODE_CAP));
    }
    let key = |a: usize, b: usize| {
        if symmetric && b < a {
            b * n + a
        } else {
            a * n + b
        }
    };
    let mut seen = vec![0u64; (n * n).div_ceil(64)];
    let mut arena: Vec<(usize, usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut visit = |a: usize, b: usize, parent: usize, arena: &mut Vec<(usize, usize, usize)>| {
        let k = key(a, b);
        if seen[k / 64] >> (k % 64) & 1 == 1 {
            return None;
        }
        seen[k / 64] |= 1 << (k % 64);
        arena.push((a, b, parent));
        Some(arena.len() - 1)
    };
    let unwind = |arena: &[(usize, usize, usize)], mut s: usize| {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        while s != usize::MAX {
            left.push(arena[s].0);
            right.push(arena[s].1);
            s = arena[s].2;
        }
        left.reverse();
        right.reverse();
        PairWitness { left, right }
    };
    for (a, b) in starts {
        if let Some(s) = visit(a, b, usize::MAX, &mut arena) {
            if bad(a, b) {
                return Ok(Some(unwind(&arena, s)));
            }
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let (a, b, _) = arena[s];
        for &a2 in step_a(a) {
            for &b2 in step_b(b) {
                if let Some(t) = visit(a2, b2, s, &mut arena) {
                    if bad(a2, b2) {
                        return Ok(Some(unwind(&arena, t)));
                    }
                    queue.push_back(t);
                }
            }
        }
    }
    Ok(None)
}

/// Orbit pairs from `starts` that ever separate by more than `threshold`.
fn orbit_divergence(
    m: &FiniteModel,
    starts: impl IntoIterator<Item = (usize, usize)>,
    threshold: f64,
) -> Result<Option<PairWitness>> {
    pair_search(
        m.len(),
        starts,
        |a| m.successors(a),
        |b| m.successors(b),
        true,
        |a, b| m.dist(a, b) > threshold + DIST_TOL,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquicontinuityVerdict {
    pub equicontinuous: bool,
    /// Largest schedule radius whose ball stays ε-close forever.
    pub radius: Option<f64>,
    /// Diverging orbit pair from the ball at the smallest radius.
    pub counterexample: Option<PairWitness>,
}

/// Whether some radius `ρ` in `radii` keeps every orbit pair from `x` and
/// `y ∈ B_ρ(x)` within `epsilon` forever.
pub fn is_equicontinuous(
    m: &FiniteModel,
    x: usize,
    epsilon: f64,
    radii: &[f64],
) -> Result<EquicontinuityVerdict> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut last = None;
    for &rho in &sorted {
        let starts = m.ball(x, rho).into_iter().map(|y| (x, y));
        match orbit_divergence(m, starts, epsilon)? {
            None => {
                return Ok(EquicontinuityVerdict {
                    equicontinuous: true,
                    radius: Some(rho),
                    counterexample: None,
                })
            }
            Some(w) => last = Some(w),
        }
    }
    Ok(EquicontinuityVerdict {
        equicontinuous: false,
        radius: None,
        counterexample: last,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityWitness {
    pub radius: f64,
    pub y: usize,
    pub z: usize,
    pub step: usize,
    pub orbits: PairWitness,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityVerdict {
    pub sensitive: bool,
    /// Witness at the smallest radius (when sensitive).
    pub witness: Option<SensitivityWitness>,
    /// Largest radius at which no pair separates (when not sensitive).
    pub failing_radius: Option<f64>,
}

/// Whether, for every radius in `radii`, two orbits starting in the ball
/// around `x` separate by more than `r`.
pub fn is_sensitive(
    m: &FiniteModel,
    x: usize,
    r: f64,
    radii: &[f64],
) -> Result<SensitivityVerdict> {
    let floor = 2.0 * m.resolution_floor();
    if r <= floor {
        return Err(Error::resolution("sensitivity r (must exceed)", r, floor));
    }
    if let Some(&rho) = radii.iter().find(|&&rho| rho + DIST_TOL < m.mesh()) {
        return Err(Error::resolution("radius", rho, m.mesh()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut witness = None;
    for &rho in &sorted {
        let ball = m.ball(x, rho);
        let starts = ball
            .iter()
            .enumerate()
            .flat_map(|(k, &y)| ball[k..].iter().map(move |&z| (y, z)));
        match orbit_divergence(m, starts, r)? {
            None => {
                return Ok(SensitivityVerdict {
                    sensitive: false,
                    witness: None,
                    failing_radius: Some(rho),
                })
            }
            Some(w) => {
                witness = Some(SensitivityWitness {
                    radius: rho,
                    y: w.left[0],
                    z: w.right[0],
                    step: w.steps(),
                    orbits: w,
                })
            }
        }
    }
    Ok(SensitivityVerdict {
        sensitive: witness.is_some(),
        witness,
        failing_radius: None,
    })
}

/// Two δ-chains from `x` whose endpoints are more than `r` apart, if any.
pub fn chain_sensitive_star(
    m: &FiniteModel,
    g: &ChainDigraph,
    x: usize,
    r: f64,
) -> Result<Option<PairWitness>> {
    pair_search(
        m.len(),
        [(x, x)],
        |a| g.neighbors(a),
        |b| g.neighbors(b),
        true,
        |a, b| m.dist(a, b) > r + DIST_TOL,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolutionVerdict {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub value: bool,
    pub witness: Option<PairWitness>,
    pub counterexample: Option<Vec<usize>>,
}

/// Verdict grid for one node over a resolution schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointReport {
    pub node: usize,
    pub label: String,
    pub shadowable: Vec<ResolutionVerdict>,
    pub chain_continuous: Vec<ResolutionVerdict>,
    pub equicontinuous: Vec<ResolutionVerdict>,
    pub sensitive: Vec<ResolutionVerdict>,
    pub chain_sensitive: Vec<ResolutionVerdict>,
}

/// Runs every pointwise test at `x`. `digraphs` are the chain digraphs for
/// the schedule's deltas; `rs` are the separation constants tested for
/// sensitivity and chain sensitivity.
pub fn point_report(
    m: &FiniteModel,
    digraphs: &[ChainDigraph],
    schedule: &ResolutionSchedule,
    x: usize,
    rs: &[f64],
) -> Result<PointReport> {
    let blank = ResolutionVerdict {
        epsilon: None,
        delta: None,
        r: None,
        value: false,
        witness: None,
        counterexample: None,
    };
    let mut rep = PointReport {
        node: x,
        label: m.label(x).to_string(),
        shadowable: Vec::new(),
        chain_continuous: Vec::new(),
        equicontinuous: Vec::new(),
        sensitive: Vec::new(),
        chain_sensitive: Vec::new(),
    };
    for &eps in &schedule.epsilons {
        for g in digraphs {
            let sh = is_shadowable(m, g, x, eps)?;
            rep.shadowable.push(ResolutionVerdict {
                epsilon: Some(eps),
                delta: Some(g.delta()),
                value: sh.holds,
                counterexample: sh.counterexample,
                ..blank.clone()
            });
            let cc = is_chain_continuous(m, g, x, eps)?;
            rep.chain_continuous.push(ResolutionVerdict {
                epsilon: Some(eps),
                delta: Some(g.delta()),
                value: cc.holds,
                counterexample: cc.counterexample,
                ..blank.clone()
            });
        }
        let ec = is_equicontinuous(m, x, eps, &schedule.radii)?;
        rep.equicontinuous.push(ResolutionVerdict {
            epsilon: Some(eps),
            value: ec.equicontinuous,
            witness: ec.counterexample,
            ..blank.clone()
        });
    }
    for &r in rs {
        let sen = is_sensitive(m, x, r, &schedule.radii)?;
        rep.sensitive.push(ResolutionVerdict {
            r: Some(r),
            value: sen.sensitive,
            witness: sen.witness.map(|w| w.orbits),
            ..blank.clone()
        });
        for g in digraphs {
            let w = chain_sensitive_star(m, g, x, r)?;
            rep.chain_sensitive.push(ResolutionVerdict {
                r: Some(r),
                delta: Some(g.delta()),
                value: w.is_some(),
                witness: w,
                ..blank.clone()
            });
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build_chain_digraph;
    use crate::model::{build_grid_model, build_subshift_model, GridSpec, MapSpec};

    fn two_fixed() -> FiniteModel {
        FiniteModel::from_map("pq", vec![vec![0.0, 1.0], vec![1.0, 0.0]], &[0, 1]).unwrap()
    }

    fn grid(map: MapSpec, h: f64) -> FiniteModel {
        build_grid_model(&GridSpec {
            map,
            mesh: h,
            node_cap: 100_000,
        })
        .unwrap()
    }

    #[test]
    fn two_point_shadowing() {
        let m = two_fixed();
        let g = build_chain_digraph(&m, 0.2).unwrap();
        assert!(is_shadowable(&m, &g, 0, 0.4).unwrap().holds);
        let g = build_chain_digraph(&m, 1.0).unwrap();
        let v = is_shadowable(&m, &g, 0, 0.4).unwrap();
        assert!(!v.holds);
        assert_eq!(v.counterexample, Some(vec![0, 1]));
        assert!(sh_set(&m, &g, 0.4).unwrap().is_empty());
        let cc = is_chain_continuous(&m, &g, 0, 0.4).unwrap();
        assert_eq!(cc.counterexample, Some(vec![0, 1]));
        let w = chain_sensitive_star(&m, &g, 0, 0.5).unwrap().unwrap();
        assert_eq!(w.left, vec![0, 0]);
        assert_eq!(w.right, vec![0, 1]);
    }

    #[test]
    fn identity_is_tame() {
        let m = grid(MapSpec::Identity, 1.0 / 16.0);
        let g = build_chain_digraph(&m, 1.0 / 64.0).unwrap();
        assert_eq!(sh_set(&m, &g, 0.1).unwrap().len(), 16);
        for x in 0..16 {
            assert!(is_chain_continuous(&m, &g, x, 0.1).unwrap().holds);
            assert!(
                is_equicontinuous(&m, x, 0.1, &[0.1])
                    .unwrap()
                    .equicontinuous
            );
            assert!(!is_sensitive(&m, x, 0.3, &[0.25, 0.1]).unwrap().sensitive);
            assert!(chain_sensitive_star(&m, &g, x, 0.01).unwrap().is_none());
        }
    }

    #[test]
    fn rotation_is_equicontinuous_not_sensitive() {
        let m = grid(MapSpec::Rotation { alpha: 0.25 }, 1.0 / 32.0);
        for x in [0, 7, 31] {
            let ec = is_equicontinuous(&m, x, 0.1, &[0.1, 0.05]).unwrap();
            assert_eq!(ec.radius, Some(0.1));
            assert!(
                !is_sensitive(&m, x, 0.25, &[0.1, 1.0 / 64.0])
                    .unwrap()
                    .sensitive
            );
        }
    }

    #[test]
    fn doubling_expands() {
        let h = 1.0 / 64.0;
        let m = grid(MapSpec::Doubling, h);
        let g = build_chain_digraph(&m, 2.0 * h).unwrap();
        for x in [0, 5, 40] {
            assert!(!is_chain_continuous(&m, &g, x, 0.1).unwrap().holds);
            assert!(
                !is_equicontinuous(&m, x, 0.1, &[4.0 * h, 2.0 * h])
                    .unwrap()
                    .equicontinuous
            );
            let s = is_sensitive(&m, x, 0.25, &[0.25, h / 2.0]).unwrap();
            let w = s.witness.unwrap();
            assert_eq!(w.radius, h / 2.0);
            let (a, b) = (
                *w.orbits.left.last().unwrap(),
                *w.orbits.right.last().unwrap(),
            );
            assert!(m.dist(a, b) > 0.25);
        }
    }

    #[test]
    fn full_shift_shadows_and_is_chain_sensitive() {
        let m = build_subshift_model(&['0', '1'], &[], 3, 10_000).unwrap();
        let g = build_chain_digraph(&m, 0.125).unwrap();
        assert_eq!(sh_set(&m, &g, 0.5).unwrap().len(), m.len());
        for x in 0..m.len() {
            let w = chain_sensitive_star(&m, &g, x, 0.5).unwrap().unwrap();
            assert!(m.dist(*w.left.last().unwrap(), *w.right.last().unwrap()) > 0.5);
            for side in [&w.left, &w.right] {
                assert_eq!(side[0], x);
                assert!(side.windows(2).all(|p| g.has_edge(p[0], p[1])));
            }
        }
    }

    #[test]
    fn resolution_errors() {
        let m = grid(MapSpec::Doubling, 1.0 / 16.0);
        let g = build_chain_digraph(&m, 0.1).unwrap();
        assert!(matches!(
            is_shadowable(&m, &g, 0, 0.01),
            Err(Error::Resolution { .. })
        ));
        assert!(matches!(
            is_sensitive(&m, 0, 0.05, &[0.1]),
            Err(Error::Resolution { .. })
        ));
    }
}
