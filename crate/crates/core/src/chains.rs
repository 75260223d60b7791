//! δ-chain digraphs and their component structure.
//!
//! Paths in a [`ChainDigraph`] are exactly the model's δ-chains: `i -> j` is
//! an edge iff `d(f(x_i), x_j) <= δ`.

use crate::error::{Error, Result};
use crate::model::{FiniteModel, DIST_TOL};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainDigraph {
    delta: f64,
    adj: Vec<Vec<usize>>,
}

/// Builds the δ-chain digraph. Requires `delta >= m.chain_floor()` so that
/// every successor edge of the model is present.
pub fn build_chain_digraph(m: &FiniteModel, delta: f64) -> Result<ChainDigraph> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::Parameter(format!(
            "delta {delta} must be finite and >= 0"
        )));
    }
    if delta + DIST_TOL < m.chain_floor() {
        return Err(Error::resolution("delta", delta, m.chain_floor()));
    }
    let buckets = m.bucket_index(delta);
    let adj = (0..m.len())
        .into_par_iter()
        .map(|i| {
            let cand = match &buckets {
                Some(b) => m.image_candidates_bucketed(i, b),
                None => m.image_candidates(i, delta),
            };
            cand.into_iter()
                .filter(|&j| m.image_dist(i, j) <= delta + DIST_TOL)
                .collect::<Vec<usize>>()
        })
        .collect();
    Ok(ChainDigraph { delta, adj })
}

impl ChainDigraph {
    /// Digraph from an explicit edge list (symbolic transition graphs, tests).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Parameter(format!("edge ({a},{b}) outside 0..{n}")));
            }
            adj[a].push(b);
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Ok(ChainDigraph { delta: 0.0, adj })
    }

    /// The model's successor relation as a digraph (δ = chain floor).
    pub fn successor_graph(m: &FiniteModel) -> Self {
        ChainDigraph {
            delta: m.chain_floor(),
            adj: (0..m.len()).map(|i| m.successors(i).to_vec()).collect(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|r| r.len()).sum()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&j| (i, j)))
    }

    /// Digraph induced on `nodes` (new indices follow the order of `nodes`).
    pub fn induced(&self, nodes: &[usize]) -> ChainDigraph {
        let mut pos = vec![usize::MAX; self.adj.len()];
        for (k, &v) in nodes.iter().enumerate() {
            pos[v] = k;
        }
        let adj = nodes
            .iter()
            .map(|&v| {
                let mut r: Vec<usize> = self.adj[v]
                    .iter()
                    .filter_map(|&w| (pos[w] != usize::MAX).then_some(pos[w]))
                    .collect();
                r.sort_unstable();
                r
            })
            .collect();
        ChainDigraph {
            delta: self.delta,
            adj,
        }
    }

    /// Nodes reachable from `sources` by paths of length >= 1, as a mask.
    pub fn reachable_from(&self, sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in sources {
            for &w in &self.adj[s] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// `i ->_δ j`: a path of length >= 1 from `i` to `j`.
    pub fn reaches(&self, i: usize, j: usize) -> bool {
        self.path(i, j).is_some()
    }

    /// Shortest path of length >= 1 from `i` to `j`, endpoints included.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let n = self.adj.len();
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for &w in &self.adj[i] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = i;
                queue.push_back(w);
            }
        }
        while let Some(v) = queue.pop_front() {
            if v == j {
                let mut out = vec![j];
                let mut cur = j;
                loop {
                    let p = parent[cur];
                    out.push(p);
                    if p == i && out.len() >= 2 {
                        break;
                    }
                    cur = p;
                }
                out.reverse();
                return Some(out);
            }
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentDecomposition {
    /// SCC index of every node (all SCCs, cyclic or not).
    pub scc_id: Vec<usize>,
    pub scc_count: usize,
    /// Nodes lying on a cycle of length >= 1.
    pub cr_nodes: Vec<usize>,
    /// Chain components: cyclic SCCs, each sorted; ordered by smallest node.
    pub components: Vec<Vec<usize>>,
    /// Component index of each node, if it is chain recurrent.
    pub component_of: Vec<Option<usize>>,
    /// Edges of the condensation restricted to components: `(a, b)` when a
    /// path leaves component `a` and enters component `b`.
    pub condensation: Vec<(usize, usize)>,
    pub terminal: Vec<bool>,
}

/// Iterative Tarjan; returns SCC ids in reverse topological order of discovery.
fn tarjan(g: &ChainDigraph) -> (Vec<usize>, usize) {
    let n = g.node_count();
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut count = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            if *k < g.adj[v].len() {
                let w = g.adj[v][*k];
                *k += 1;
                if index[w] == UNSET {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    (comp, count)
}

pub fn decompose(g: &ChainDigraph) -> ComponentDecomposition {
    let n = g.node_count();
    let (scc_id, scc_count) = tarjan(g);
    let mut members = vec![Vec::new(); scc_count];
    for v in 0..n {
        members[scc_id[v]].push(v);
    }
    let cyclic: Vec<bool> = members
        .iter()
        .map(|m| m.len() > 1 || g.has_edge(m[0], m[0]))
        .collect();
    let mut sink = vec![true; scc_count];
    for (a, b) in g.edges() {
        if scc_id[a] != scc_id[b] {
            sink[scc_id[a]] = false;
        }
    }
    let mut order: Vec<usize> = (0..scc_count).filter(|&c| cyclic[c]).collect();
    order.sort_by_key(|&c| members[c][0]);
    let mut comp_index = vec![usize::MAX; scc_count];
    for (k, &c) in order.iter().enumerate() {
        comp_index[c] = k;
    }
    let components: Vec<Vec<usize>> = order.iter().map(|&c| members[c].clone()).collect();
    let terminal = order.iter().map(|&c| sink[c]).collect();
    let component_of: Vec<Option<usize>> = (0..n)
        .map(|v| {
            let k = comp_index[scc_id[v]];
            (k != usize::MAX).then_some(k)
        })
        .collect();
    let mut cr_nodes: Vec<usize> = (0..n).filter(|&v| component_of[v].is_some()).collect();
    cr_nodes.sort_unstable();

    // component-to-component reachability through transient nodes
    let mut condensation = Vec::new();
    for (a, comp) in components.iter().enumerate() {
        let reach = g.reachable_from(comp);
        let mut targets: Vec<usize> = (0..n)
            .filter(|&v| reach[v])
            .filter_map(|v| component_of[v])
            .filter(|&b| b != a)
            .collect();
        targets.sort_unstable();
        targets.dedup();
        condensation.extend(targets.into_iter().map(|b| (a, b)));
    }
    ComponentDecomposition {
        scc_id,
        scc_count,
        cr_nodes,
        components,
        component_of,
        condensation,
        terminal,
    }
}

impl ComponentDecomposition {
    pub fn terminal_components(&self) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&c| self.terminal[c])
            .collect()
    }

    pub fn is_terminal_node(&self, v: usize) -> bool {
        self.component_of[v].is_some_and(|c| self.terminal[c])
    }
}

/// Component containing the eventual cycle of the canonical orbit of `i`.
pub fn omega_component(m: &FiniteModel, d: &ComponentDecomposition, i: usize) -> Result<usize> {
    let mut seen = vec![false; m.len()];
    let mut v = i;
    while !seen[v] {
        seen[v] = true;
        v = m.image(v);
    }
    d.component_of[v].ok_or_else(|| {
        Error::Parameter(format!(
            "orbit cycle through {v} is not chain recurrent; decomposition built below the chain floor?"
        ))
    })
}

/// `max_{v reachable from C} d(v, C)`; zero exactly for terminal components.
pub fn chain_stability_margin(
    m: &FiniteModel,
    g: &ChainDigraph,
    d: &ComponentDecomposition,
    c: usize,
) -> f64 {
    let comp = &d.components[c];
    let reach = g.reachable_from(comp);
    (0..m.len())
        .filter(|&v| reach[v])
        .map(|v| m.dist_to_set(v, comp))
        .fold(0.0, f64::max)
}

/// Submodel on `nodes`; see [`FiniteModel::restrict`].
pub fn restrict_model(m: &FiniteModel, nodes: &[usize]) -> Result<(FiniteModel, Vec<usize>)> {
    m.restrict(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid_model, GridSpec, MapSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perm3() -> FiniteModel {
        let d = vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        FiniteModel::from_map("perm3", d, &[1, 2, 0]).unwrap()
    }

    pub(crate) fn north_south(h: f64) -> FiniteModel {
        build_grid_model(&GridSpec {
            map: MapSpec::NorthSouth {
                lambda: 3.0,
                phase: h / 2.0,
            },
            mesh: h,
            node_cap: 10_000,
        })
        .unwrap()
    }

    /// Transitive closure by repeated squaring of a boolean matrix.
    fn closure(g: &ChainDigraph) -> Vec<Vec<bool>> {
        let n = g.node_count();
        let mut r = vec![vec![false; n]; n];
        for (a, b) in g.edges() {
            r[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    let via = r[k].clone();
                    for (dst, &step) in r[i].iter_mut().zip(&via) {
                        *dst |= step;
                    }
                }
            }
        }
        r
    }

    #[test]
    fn permutation_cycle() {
        let m = perm3();
        let g = build_chain_digraph(&m, 0.0).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 0)]);
        assert!(g.reaches(0, 2));
        let d = decompose(&g);
        assert_eq!(d.components, vec![vec![0, 1, 2]]);
        assert_eq!(d.terminal, vec![true]);
        assert_eq!(omega_component(&m, &d, 1).unwrap(), 0);
        let full = build_chain_digraph(&m, 2.0).unwrap();
        assert_eq!(full.edge_count(), 9);
        let dd = decompose(&full);
        assert_eq!(chain_stability_margin(&m, &full, &dd, 0), 0.0);
    }

    #[test]
    fn isolated_fixed_points() {
        let m =
            FiniteModel::from_map("two", vec![vec![0.0, 1.0], vec![1.0, 0.0]], &[0, 1]).unwrap();
        let g = build_chain_digraph(&m, 0.5).unwrap();
        assert!(!g.reaches(0, 1));
        assert!(g.reaches(0, 0));
        let d = decompose(&g);
        assert_eq!(d.components.len(), 2);
        assert_eq!(omega_component(&m, &d, 1).unwrap(), 1);
    }

    #[test]
    fn doubling_out_degree() {
        let m = build_grid_model(&GridSpec {
            map: MapSpec::Doubling,
            mesh: 1.0 / 64.0,
            node_cap: 1000,
        })
        .unwrap();
        let g = build_chain_digraph(&m, 1.0 / 32.0).unwrap();
        assert!((0..m.len()).all(|i| g.neighbors(i).len() >= 2));
        assert!(build_chain_digraph(&m, 1e-4).is_err());
    }

    #[test]
    fn north_south_structure() {
        let h = 1.0 / 64.0;
        let m = north_south(h);
        let g = build_chain_digraph(&m, 1.125 * h).unwrap();
        let (src, snk) = (0, 32);
        assert!(g.reaches(src, snk));
        assert!(!g.reaches(snk, src));
        let d = decompose(&g);
        assert_eq!(d.components, vec![vec![src], vec![31, 32, 33]]);
        let fine = decompose(&build_chain_digraph(&m, h / 2.0).unwrap());
        assert_eq!(fine.components, vec![vec![src], vec![snk]]);
        assert_eq!(d.terminal, vec![false, true]);
        for i in 1..m.len() {
            assert_eq!(omega_component(&m, &d, i).unwrap(), 1, "node {i}");
        }
        assert!(chain_stability_margin(&m, &g, &d, 0) > 0.0);
        assert_eq!(chain_stability_margin(&m, &g, &d, 1), 0.0);

        let (fixed, keep) = restrict_model(&m, &[src, snk]).unwrap();
        assert_eq!(keep, vec![src, snk]);
        assert_eq!(fixed.image(0), 0);
        assert_eq!(fixed.image(1), 1);
        assert!(fixed.proj_error() < 1e-12);
    }

    #[test]
    fn decompose_matches_closure_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = 1 + rng.random_range(0..12);
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .filter(|_| rng.random_range(0..5) == 0)
                .collect();
            let g = ChainDigraph::from_edges(n, &edges).unwrap();
            let d = decompose(&g);
            let r = closure(&g);
            for i in 0..n {
                assert_eq!(d.component_of[i].is_some(), r[i][i]);
                assert_eq!(g.reaches(i, i), r[i][i]);
                for j in 0..n {
                    assert_eq!(g.reaches(i, j), r[i][j]);
                    if r[i][i] && r[j][j] {
                        assert_eq!(d.component_of[i] == d.component_of[j], r[i][j] && r[j][i]);
                    }
                }
            }
            for (c, comp) in d.components.iter().enumerate() {
                let closed = comp
                    .iter()
                    .all(|&v| (0..n).all(|w| !r[v][w] || comp.contains(&w)));
                assert_eq!(d.terminal[c], closed);
            }
        }
    }
}
