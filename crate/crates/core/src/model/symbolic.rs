//! Windowed symbolic models: subshifts given by forbidden words, and the
//! level-set shift family `example31`.
//!
//! A point is an admissible window `(x_{-N}, ..., x_N)`. Distances use the
//! truncated weighted sup metric `max_n 2^{-|n|} |x_n - y_n|`. The successor
//! set of a window is every admissible window of the form
//! `(x_{-N+1}, ..., x_N, c)`.

use super::{FiniteModel, Geometry, ModelKind, Space};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Enumerates admissible windows, prunes the ones that cannot be extended in
/// both directions, and wires successors. `admissible` must be prefix-closed.
#[allow(clippy::too_many_arguments)]
fn build_windows(
    name: String,
    kind: ModelKind,
    values: &[f64],
    symbol_names: &[String],
    radius: usize,
    admissible: &dyn Fn(&[u8]) -> bool,
    canonical: &dyn Fn(&[u8], &[u8]) -> u8,
    node_cap: usize,
) -> Result<FiniteModel> {
    let len = 2 * radius + 1;
    let q = values.len() as u8;
    let mut words: Vec<Vec<u8>> = Vec::new();
    let mut stack: Vec<Vec<u8>> = vec![Vec::new()];
    while let Some(w) = stack.pop() {
        if w.len() == len {
            words.push(w);
            if words.len() > node_cap {
                return Err(Error::capacity("symbolic windows", words.len(), node_cap));
            }
            continue;
        }
        for c in (0..q).rev() {
            let mut next = w.clone();
            next.push(c);
            if admissible(&next) {
                stack.push(next);
            }
        }
    }
    words.sort();

    // Drop windows with no right continuation or no left predecessor until stable.
    loop {
        let set: std::collections::HashSet<&[u8]> = words.iter().map(|w| w.as_slice()).collect();
        let keep: Vec<bool> = words
            .iter()
            .map(|w| {
                let right = (0..q).any(|c| {
                    let mut n = w[1..].to_vec();
                    n.push(c);
                    set.contains(n.as_slice())
                });
                let left = (0..q).any(|c| {
                    let mut u = vec![c];
                    u.extend_from_slice(&w[..len - 1]);
                    set.contains(u.as_slice())
                });
                right && left
            })
            .collect();
        if keep.iter().all(|&k| k) {
            break;
        }
        words = words
            .into_iter()
            .zip(keep)
            .filter_map(|(w, k)| k.then_some(w))
            .collect();
    }
    if words.is_empty() {
        return Err(Error::EmptyModel(format!("{name}: no admissible windows")));
    }

    let index: HashMap<&[u8], usize> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_slice(), i))
        .collect();
    let mut successors = Vec::with_capacity(words.len());
    let mut image_points = Vec::with_capacity(words.len());
    for w in &words {
        let conts: Vec<u8> = (0..q)
            .filter(|&c| {
                let mut n = w[1..].to_vec();
                n.push(c);
                index.contains_key(n.as_slice())
            })
            .collect();
        let canon = canonical(w, &conts);
        debug_assert!(conts.contains(&canon));
        let mut succ = Vec::with_capacity(conts.len());
        let mut pts = Vec::with_capacity(conts.len() * len);
        // canonical first so that it becomes the image after sorting ties
        for &c in std::iter::once(&canon).chain(conts.iter().filter(|&&c| c != canon)) {
            let mut n = w[1..].to_vec();
            n.push(c);
            succ.push(index[n.as_slice()]);
            pts.extend(n.iter().map(|&s| values[s as usize]));
        }
        successors.push(succ);
        image_points.push(pts);
    }
    let weights: Vec<f64> = (0..len)
        .map(|k| 2f64.powi(-((k as i32 - radius as i32).abs())))
        .collect();
    let coords: Vec<f64> = words
        .iter()
        .flat_map(|w| w.iter().map(|&s| values[s as usize]))
        .collect();
    let labels = words
        .iter()
        .map(|w| {
            let sep = if symbol_names.iter().all(|s| s.chars().count() == 1) {
                ""
            } else {
                ","
            };
            w.iter()
                .map(|&s| symbol_names[s as usize].as_str())
                .collect::<Vec<_>>()
                .join(sep)
        })
        .collect();

    // successor lists get sorted; remember the canonical choice
    let canonical_idx: Vec<usize> = successors.iter().map(|s| s[0]).collect();
    let mut model = FiniteModel::from_parts(
        name,
        kind,
        labels,
        Geometry::Coords {
            space: Space::WeightedSup(weights),
            dim: len,
            coords,
            image_points,
            index: None,
        },
        successors,
        0.0,
    )?;
    model.image = canonical_idx;
    model.proj_error = model.compute_proj_error();
    Ok(model)
}

/// Subshift over `alphabet` (symbol `k` has numeric value `k`) avoiding
/// `forbidden` words, on windows of radius `window`.
pub fn build_subshift_model(
    alphabet: &[char],
    forbidden: &[&str],
    window: usize,
    node_cap: usize,
) -> Result<FiniteModel> {
    if alphabet.is_empty() {
        return Err(Error::Parameter("alphabet is empty".into()));
    }
    if alphabet.len() > u8::MAX as usize {
        return Err(Error::Parameter("alphabet too large".into()));
    }
    let pos: HashMap<char, u8> = alphabet
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as u8))
        .collect();
    if pos.len() != alphabet.len() {
        return Err(Error::Parameter("alphabet has repeated symbols".into()));
    }
    let mut patterns = Vec::new();
    for w in forbidden {
        let p: Option<Vec<u8>> = w.chars().map(|c| pos.get(&c).copied()).collect();
        let p = p.ok_or_else(|| {
            Error::Parameter(format!("forbidden word `{w}` uses unknown symbols"))
        })?;
        if p.is_empty() {
            return Err(Error::Parameter("empty forbidden word".into()));
        }
        patterns.push(p);
    }
    let len = 2 * window + 1;
    if window == 0 || patterns.iter().any(|p| p.len() > len) {
        return Err(Error::Parameter(format!(
            "window radius {window} too small for the forbidden words"
        )));
    }
    let admissible = |w: &[u8]| !patterns.iter().any(|p| w.ends_with(p));
    let canonical = |_: &[u8], conts: &[u8]| conts[0];
    let values: Vec<f64> = (0..alphabet.len()).map(|k| k as f64).collect();
    let names: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let label = format!(
        "subshift:{}[{}]N={}",
        alphabet.iter().collect::<String>(),
        forbidden.join(","),
        window
    );
    build_windows(
        label,
        ModelKind::Subshift,
        &values,
        &names,
        window,
        &admissible,
        &canonical,
        node_cap,
    )
}

/// Level of a symbol: `1..=K` for `±s_k`, `K+1` for `±1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Example31Level {
    Finite(usize),
    Top,
}

struct Ex31Alphabet {
    values: Vec<f64>,
    names: Vec<String>,
    level: Vec<usize>,
    positive: Vec<bool>,
    top: usize,
}

impl Ex31Alphabet {
    fn new(s: &[f64]) -> Self {
        let k = s.len();
        let mut values = vec![-1.0];
        let mut names = vec!["-1".to_string()];
        let mut level = vec![k + 1];
        let mut positive = vec![false];
        for j in (0..k).rev() {
            values.push(-s[j]);
            names.push(format!("-s{}", j + 1));
            level.push(j + 1);
            positive.push(false);
        }
        for (j, &v) in s.iter().enumerate() {
            values.push(v);
            names.push(format!("+s{}", j + 1));
            level.push(j + 1);
            positive.push(true);
        }
        values.push(1.0);
        names.push("+1".into());
        level.push(k + 1);
        positive.push(true);
        Ex31Alphabet {
            values,
            names,
            level,
            positive,
            top: k + 1,
        }
    }

    fn negative_of_level(&self, lvl: usize) -> u8 {
        (0..self.values.len())
            .find(|&c| self.level[c] == lvl && !self.positive[c])
            .unwrap() as u8
    }

    /// The three admissibility conditions restricted to the window.
    fn admissible(&self, w: &[u8]) -> bool {
        let n = w.len();
        for a in 0..n {
            let (la, pa) = (self.level[w[a] as usize], self.positive[w[a] as usize]);
            if a + 1 < n && la > self.level[w[a + 1] as usize] {
                return false;
            }
            if pa {
                let run = if la == self.top { n } else { la };
                for &c in &w[a + 1..n.min(a + 1 + run)] {
                    let (lb, pb) = (self.level[c as usize], self.positive[c as usize]);
                    if lb != la || pb {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// The level-set shift on windows of radius `window` over
/// `S = {±1} ∪ {±s_k}`: levels are non-decreasing, `s_k` is followed by `k`
/// copies of `-s_k`, and `1` is followed only by `-1`.
pub fn build_example31_model(s: &[f64], window: usize, node_cap: usize) -> Result<FiniteModel> {
    if s.is_empty() {
        return Err(Error::Parameter("need at least one level".into()));
    }
    if s[0] <= 0.0 || s.windows(2).any(|p| p[0] >= p[1]) || *s.last().unwrap() >= 1.0 {
        return Err(Error::Parameter(format!(
            "levels must satisfy 0 < s_1 < ... < s_K < 1, got {s:?}"
        )));
    }
    if window == 0 {
        return Err(Error::Parameter("window radius must be >= 1".into()));
    }
    let alpha = Ex31Alphabet::new(s);
    let admissible = |w: &[u8]| alpha.admissible(w);
    // stay on the level of the last symbol, negative sign; always admissible
    let canonical = |w: &[u8], conts: &[u8]| {
        let c = alpha.negative_of_level(alpha.level[*w.last().unwrap() as usize]);
        if conts.contains(&c) {
            c
        } else {
            conts[0]
        }
    };
    let name = format!("example31:K={},N={}", s.len(), window);
    build_windows(
        name,
        ModelKind::Example31,
        &alpha.values,
        &alpha.names,
        window,
        &admissible,
        &canonical,
        node_cap,
    )
}

/// `Some(level)` when every coordinate of window `i` has the same absolute
/// value (the window lies in `X_k` or `X_∞`), `None` for transient windows.
pub fn example31_level(m: &FiniteModel, s: &[f64], i: usize) -> Option<Example31Level> {
    let c = m.coords(i)?;
    let lvl = |v: f64| {
        let a = v.abs();
        if (a - 1.0).abs() < 1e-12 {
            Some(Example31Level::Top)
        } else {
            s.iter()
                .position(|&x| (a - x).abs() < 1e-12)
                .map(|k| Example31Level::Finite(k + 1))
        }
    };
    let first = lvl(c[0])?;
    c.iter().all(|&v| lvl(v) == Some(first)).then_some(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    /// Brute-force count of binary words of length `n` avoiding "11".
    fn golden_count(n: usize) -> usize {
        (0..1u32 << n)
            .filter(|w| (0..n.saturating_sub(1)).all(|k| (w >> k) & 3 != 3))
            .count()
    }

    #[test]
    fn full_shift_counts() {
        let m = build_subshift_model(&['0', '1'], &[], 2, 1000).unwrap();
        assert_eq!(m.len(), 32);
        assert!(m.successors(0).len() == 2);
    }

    #[test]
    fn golden_mean_counts() {
        let m = build_subshift_model(&['0', '1'], &["11"], 2, 1000).unwrap();
        assert_eq!(golden_count(5), 13);
        assert_eq!(m.len(), 13);
        let v = validate_model(&m, 100_000).unwrap();
        assert_eq!(v.separation_floor, 0.25);
    }

    #[test]
    fn shift_metric_and_image() {
        let m = build_subshift_model(&['0', '1'], &[], 2, 1000).unwrap();
        let a = m.labels().iter().position(|l| l == "00000").unwrap();
        let b = m.labels().iter().position(|l| l == "00001").unwrap();
        assert_eq!(m.dist(a, b), 0.25);
        // canonical continuation is the least symbol
        assert_eq!(
            m.image(b),
            m.labels().iter().position(|l| l == "00010").unwrap()
        );
        assert_eq!(m.proj_error(), 0.25);
        assert_eq!(m.chain_floor(), 0.0);
    }

    #[test]
    fn subshift_errors() {
        assert!(build_subshift_model(&[], &[], 2, 100).is_err());
        let err = build_subshift_model(&['0'], &["0"], 2, 100).unwrap_err();
        assert!(matches!(err, Error::EmptyModel(_)));
        assert!(build_subshift_model(&['0', '1'], &["0110110"], 2, 100).is_err());
    }

    #[test]
    fn example31_points() {
        let m = build_example31_model(&[0.5], 1, 1000).unwrap();
        let find = |l: &str| m.labels().iter().position(|x| x == l);
        // the all -1 sequence
        assert!(find("-1,-1,-1").is_some());
        // 1 must be followed by -1
        assert!(find("-1,+1,+1").is_none());
        assert!(find("+s1,-s1,-s1").is_some());
        assert!(find("+s1,+s1,-s1").is_none());
        // levels cannot decrease
        assert!(find("-1,-s1,-s1").is_none());
        assert!(build_example31_model(&[0.5, 0.4], 1, 100).is_err());
        assert!(build_example31_model(&[0.5, 1.0], 1, 100).is_err());
    }

    #[test]
    fn example31_canonical_image_keeps_level() {
        let s = [0.5, 0.75];
        let m = build_example31_model(&s, 3, 100_000).unwrap();
        validate_model(&m, 20_000).unwrap();
        for i in 0..m.len() {
            if let Some(l) = example31_level(&m, &s, i) {
                assert_eq!(example31_level(&m, &s, m.image(i)), Some(l));
            }
        }
    }

    #[test]
    fn example31_window_truncation_is_admissible() {
        let s = [0.5, 0.75];
        let big = build_example31_model(&s, 3, 100_000).unwrap();
        let small = build_example31_model(&s, 2, 100_000).unwrap();
        let labels: std::collections::HashSet<&str> =
            small.labels().iter().map(|x| x.as_str()).collect();
        for l in big.labels() {
            let parts: Vec<&str> = l.split(',').collect();
            let inner = parts[1..parts.len() - 1].join(",");
            assert!(labels.contains(inner.as_str()), "{inner}");
        }
    }
}
