//! Exact maximum clique by branch and bound with greedy-coloring bounds.

#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            rows: vec![0; n * words],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.rows[a * self.words + b / 64] |= 1 << (b % 64);
            self.rows[b * self.words + a / 64] |= 1 << (a % 64);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.rows[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.words..(v + 1) * self.words]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn members(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(k, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            (w != 0).then(|| {
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                k * 64 + b
            })
        })
    })
}

/// Outcome of a clique search; `exact` is false when the step budget ran out,
/// in which case `clique` is the best found (a lower bound).
#[derive(Clone, Debug, PartialEq)]
pub struct CliqueResult {
    pub clique: Vec<usize>,
    pub exact: bool,
}

struct Search<'a> {
    g: &'a Graph,
    best: Vec<usize>,
    current: Vec<usize>,
    steps: u64,
    budget: u64,
}

impl Search<'_> {
    /// Greedy coloring of `p`; returns vertices with their color numbers in
    /// non-decreasing color order.
    fn color(&self, p: &[u64]) -> Vec<(usize, usize)> {
        let mut uncolored = p.to_vec();
        let mut out = Vec::new();
        let mut color = 0;
        while uncolored.iter().any(|&w| w != 0) {
            color += 1;
            let mut q = uncolored.clone();
            loop {
                let Some(v) = members(&q).next() else { break };
                uncolored[v / 64] &= !(1 << (v % 64));
                q[v / 64] &= !(1 << (v % 64));
                for (qw, rw) in q.iter_mut().zip(self.g.row(v)) {
                    *qw &= !rw;
                }
                out.push((v, color));
            }
        }
        out
    }

    fn expand(&mut self, mut p: Vec<u64>) {
        self.steps += 1;
        if self.steps > self.budget {
            return;
        }
        let order = self.color(&p);
        for &(v, c) in order.iter().rev() {
            if self.current.len() + c <= self.best.len() {
                return;
            }
            self.current.push(v);
            let next: Vec<u64> = p.iter().zip(self.g.row(v)).map(|(a, b)| a & b).collect();
            if next.iter().all(|&w| w == 0) {
                if self.current.len() > self.best.len() {
                    self.best = self.current.clone();
                }
            } else {
                self.expand(next);
            }
            self.current.pop();
            p[v / 64] &= !(1 << (v % 64));
            if self.steps > self.budget {
                return;
            }
        }
    }
}

/// Maximum clique of `g`; at most `budget` search nodes are expanded.
pub fn max_clique(g: &Graph, budget: u64) -> CliqueResult {
    if g.n == 0 {
        return CliqueResult {
            clique: Vec::new(),
            exact: true,
        };
    }
    let mut p = vec![0u64; g.words];
    for v in 0..g.n {
        p[v / 64] |= 1 << (v % 64);
    }
    let mut s = Search {
        g,
        best: vec![0],
        current: Vec::new(),
        steps: 0,
        budget,
    };
    s.expand(p);
    let mut clique = s.best;
    clique.sort_unstable();
    CliqueResult {
        clique,
        exact: s.steps <= budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(g: &Graph) -> usize {
        let n = g.len();
        (0u32..1 << n)
            .filter(|&mask| {
                (0..n).all(|a| {
                    (a + 1..n).all(|b| mask >> a & 1 == 0 || mask >> b & 1 == 0 || g.has_edge(a, b))
                })
            })
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..150 {
            let n = 1 + rng.random_range(0..14);
            let density = 1 + rng.random_range(0..4);
            let mut g = Graph::new(n);
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_range(0..5) < density {
                        g.add_edge(a, b);
                    }
                }
            }
            let r = max_clique(&g, u64::MAX);
            assert!(r.exact);
            assert_eq!(r.clique.len(), brute(&g));
            for (k, &a) in r.clique.iter().enumerate() {
                assert!(r.clique[k + 1..].iter().all(|&b| g.has_edge(a, b)));
            }
        }
    }

    #[test]
    fn wide_graph_crosses_word_boundary() {
        let mut g = Graph::new(130);
        let k = [3, 64, 65, 100, 129];
        for &a in &k {
            for &b in &k {
                g.add_edge(a, b);
            }
        }
        g.add_edge(0, 1);
        assert_eq!(max_clique(&g, u64::MAX).clique, k.to_vec());
        assert_eq!(g.degree(64), 4);
    }
}
