//! Finite models of discrete dynamical systems.
//!
//! A [`FiniteModel`] is a finite point set with a metric, a canonical self-map
//! (`image`) and a successor relation. The successor set of a node holds every
//! node the modeled map can send it to at the model's resolution: the tied
//! nearest cells of a grid model, or every admissible continuation of a
//! symbolic window. It always contains `image(i)`. Orbits of the model are
//! paths in the successor relation; for deterministic models that is just
//! iteration of `image`.

mod grid;
mod schedule;
mod symbolic;

pub use grid::{build_grid_model, GridSpec, MapSpec, DEFAULT_NODE_CAP};
pub use schedule::ResolutionSchedule;
pub use symbolic::{build_example31_model, build_subshift_model, example31_level, Example31Level};

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Absolute slack used for every `dist <= threshold` comparison.
pub const DIST_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Space {
    /// Sup norm on `[0,1]^dim`.
    Interval,
    /// Sup over coordinates of the circle distance on `R/Z`.
    Circle,
    /// `sup_n w_n |x_n - y_n|` over window coordinates.
    WeightedSup(Vec<f64>),
}

impl Space {
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Space::Interval => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            Space::Circle => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = (x - y).abs().rem_euclid(1.0);
                    d.min(1.0 - d)
                })
                .fold(0.0, f64::max),
            Space::WeightedSup(w) => a
                .iter()
                .zip(b)
                .zip(w)
                .map(|((x, y), w)| w * (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// Buckets points of a weighted-sup space by the coordinates on which any
/// two points within distance `r` must agree exactly.
#[derive(Clone, Debug)]
pub struct BucketIndex {
    dim: usize,
    exact: Vec<usize>,
    buckets: HashMap<Vec<u64>, Vec<usize>>,
    all: Vec<usize>,
}

impl BucketIndex {
    pub fn new(weights: &[f64], coords: &[f64], r: f64) -> Self {
        let dim = weights.len();
        let mut values: Vec<f64> = coords.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let gap = values
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(f64::INFINITY, f64::min);
        let exact: Vec<usize> = (0..dim)
            .filter(|&k| weights[k] * gap > r + DIST_TOL)
            .collect();
        let n = coords.len().checked_div(dim).unwrap_or(0);
        let mut buckets: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        if !exact.is_empty() {
            for i in 0..n {
                let key = exact
                    .iter()
                    .map(|&k| coords[i * dim + k].to_bits())
                    .collect();
                buckets.entry(key).or_default().push(i);
            }
        }
        BucketIndex {
            dim,
            exact,
            buckets,
            all: (0..n).collect(),
        }
    }

    /// Superset of the points within `r` of `p`, in increasing order.
    pub fn candidates(&self, p: &[f64]) -> &[usize] {
        debug_assert_eq!(p.len(), self.dim);
        if self.exact.is_empty() {
            return &self.all;
        }
        let key: Vec<u64> = self.exact.iter().map(|&k| p[k].to_bits()).collect();
        self.buckets.get(&key).map_or(&[], |v| v.as_slice())
    }
}

/// Uniform cell-centered grid on the unit cube; used as a spatial index.
#[derive(Clone, Debug, PartialEq)]
pub struct GridIndex {
    pub cells: usize,
    pub dim: usize,
    pub h: f64,
    pub periodic: bool,
}

impl GridIndex {
    fn axis_range(&self, p: f64, r: f64) -> Vec<usize> {
        let lo = ((p - r) / self.h - 0.5 - 1e-9).ceil() as i64;
        let hi = ((p + r) / self.h - 0.5 + 1e-9).floor() as i64;
        let n = self.cells as i64;
        if self.periodic {
            if hi - lo + 1 >= n {
                return (0..self.cells).collect();
            }
            let mut v: Vec<usize> = (lo..=hi).map(|k| k.rem_euclid(n) as usize).collect();
            v.sort_unstable();
            v.dedup();
            v
        } else {
            (lo.max(0)..=hi.min(n - 1)).map(|k| k as usize).collect()
        }
    }

    /// Node indices whose center may lie within sup-distance `r` of `p`.
    pub fn candidates(&self, p: &[f64], r: f64) -> Vec<usize> {
        let mut out = vec![0usize];
        for &c in p {
            let axis = self.axis_range(c, r);
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for &base in &out {
                for &k in &axis {
                    next.push(base * self.cells + k);
                }
            }
            out = next;
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Debug)]
pub enum Geometry {
    /// Points are coordinate vectors; `image_points[i]` holds one or more
    /// coordinate vectors standing for the true image `f(x_i)`.
    Coords {
        space: Space,
        dim: usize,
        coords: Vec<f64>,
        image_points: Vec<Vec<f64>>,
        index: Option<GridIndex>,
    },
    /// Hand-built models: row-major distance and image-distance matrices.
    Explicit {
        dist: Vec<f64>,
        image_dist: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Grid,
    Subshift,
    Example31,
    Explicit,
    Restricted,
}

#[derive(Clone, Debug)]
pub struct FiniteModel {
    name: String,
    kind: ModelKind,
    labels: Vec<String>,
    geometry: Geometry,
    image: Vec<usize>,
    successors: Vec<Vec<usize>>,
    proj_error: f64,
    mesh: f64,
    chain_floor: f64,
}

impl FiniteModel {
    pub(crate) fn from_parts(
        name: String,
        kind: ModelKind,
        labels: Vec<String>,
        geometry: Geometry,
        successors: Vec<Vec<usize>>,
        mesh: f64,
    ) -> Result<Self> {
        let m = successors.len();
        if m == 0 {
            return Err(Error::EmptyModel(name));
        }
        if labels.len() != m {
            return Err(Error::Validation(format!(
                "{} labels for {} points",
                labels.len(),
                m
            )));
        }
        let mut successors = successors;
        for (i, s) in successors.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::Validation(format!("node {i} has no image")));
            }
            if let Some(&bad) = s.iter().find(|&&j| j >= m) {
                return Err(Error::Validation(format!(
                    "node {i} maps to {bad}, outside 0..{m}"
                )));
            }
        }
        let image = successors.iter().map(|s| s[0]).collect();
        let mut model = FiniteModel {
            name,
            kind,
            labels,
            geometry,
            image,
            successors,
            proj_error: 0.0,
            mesh,
            chain_floor: 0.0,
        };
        model.proj_error = model.compute_proj_error();
        model.chain_floor = (0..m)
            .map(|i| {
                model.successors[i]
                    .iter()
                    .map(|&s| model.image_dist(i, s))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Ok(model)
    }

    /// A model given by explicit distance and image-distance matrices.
    /// `image_dist[i][j]` is the distance from the true image of `i` to `j`.
    /// Successors are the nearest nodes to each true image.
    pub fn explicit(
        name: impl Into<String>,
        dist: Vec<Vec<f64>>,
        image_dist: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = dist.len();
        let name = name.into();
        if m == 0 {
            return Err(Error::EmptyModel(name));
        }
        if dist.iter().any(|r| r.len() != m)
            || image_dist.len() != m
            || image_dist.iter().any(|r| r.len() != m)
        {
            return Err(Error::Validation("distance matrices must be square".into()));
        }
        let successors = image_dist
            .iter()
            .map(|row| {
                let best = row.iter().cloned().fold(f64::INFINITY, f64::min);
                (0..m).filter(|&j| row[j] <= best + DIST_TOL).collect()
            })
            .collect();
        let labels = (0..m).map(|i| i.to_string()).collect();
        let geometry = Geometry::Explicit {
            dist: dist.concat(),
            image_dist: image_dist.concat(),
        };
        Self::from_parts(name, ModelKind::Explicit, labels, geometry, successors, 0.0)
    }

    /// An exact map on a finite metric space: `f(x_i) = x_{map[i]}`.
    pub fn from_map(name: impl Into<String>, dist: Vec<Vec<f64>>, map: &[usize]) -> Result<Self> {
        let m = dist.len();
        if map.len() != m {
            return Err(Error::Validation(format!(
                "map has {} entries for {} points",
                map.len(),
                m
            )));
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= m) {
            return Err(Error::Validation(format!(
                "map target {bad} outside 0..{m}"
            )));
        }
        let image_dist = map.iter().map(|&t| dist[t].clone()).collect();
        Self::explicit(name, dist, image_dist)
    }

    fn compute_proj_error(&self) -> f64 {
        (0..self.len())
            .map(|i| match &self.geometry {
                Geometry::Coords {
                    space,
                    dim,
                    coords,
                    image_points,
                    ..
                } => {
                    let target = &coords[self.image[i] * dim..(self.image[i] + 1) * dim];
                    image_points[i]
                        .chunks(*dim)
                        .map(|p| space.dist(p, target))
                        .fold(0.0, f64::max)
                }
                Geometry::Explicit { image_dist, .. } => image_dist[i * self.len() + self.image[i]],
            })
            .fold(0.0, f64::max)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Canonical image; always one of the successors (the lowest-index one
    /// unless the builder picked another canonical continuation).
    pub fn image(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.successors[i]
    }

    pub fn is_deterministic(&self) -> bool {
        self.successors.iter().all(|s| s.len() == 1)
    }

    /// Bound on the distance from a true image to its canonical model image.
    pub fn proj_error(&self) -> f64 {
        self.proj_error
    }

    /// Covering radius of the point set in the modeled space.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Smallest chain resolution for which every successor edge is a chain edge.
    pub fn chain_floor(&self) -> f64 {
        self.chain_floor
    }

    /// Below this scale the model carries no information.
    pub fn resolution_floor(&self) -> f64 {
        self.mesh + self.proj_error
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn coords(&self, i: usize) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Coords { dim, coords, .. } => Some(&coords[i * dim..(i + 1) * dim]),
            Geometry::Explicit { .. } => None,
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Coords {
                space, dim, coords, ..
            } => space.dist(
                &coords[i * dim..(i + 1) * dim],
                &coords[j * dim..(j + 1) * dim],
            ),
            Geometry::Explicit { dist, .. } => dist[i * self.len() + j],
        }
    }

    /// Distance from the true image `f(x_i)` to `x_j`.
    pub fn image_dist(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Coords {
                space,
                dim,
                coords,
                image_points,
                ..
            } => {
                let target = &coords[j * dim..(j + 1) * dim];
                image_points[i]
                    .chunks(*dim)
                    .map(|p| space.dist(p, target))
                    .fold(f64::INFINITY, f64::min)
            }
            Geometry::Explicit { image_dist, .. } => image_dist[i * self.len() + j],
        }
    }

    /// Nodes `j` that may satisfy `image_dist(i, j) <= r` (a superset; callers re-check).
    pub(crate) fn image_candidates(&self, i: usize, r: f64) -> Vec<usize> {
        match &self.geometry {
            Geometry::Coords {
                dim,
                image_points,
                index: Some(index),
                ..
            } => {
                let mut out: Vec<usize> = image_points[i]
                    .chunks(*dim)
                    .flat_map(|p| index.candidates(p, r))
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            }
            _ => (0..self.len()).collect(),
        }
    }

    /// Index for image-candidate queries at radius `r` on weighted-sup models.
    pub(crate) fn bucket_index(&self, r: f64) -> Option<BucketIndex> {
        match &self.geometry {
            Geometry::Coords {
                space: Space::WeightedSup(w),
                coords,
                ..
            } => Some(BucketIndex::new(w, coords, r)),
            _ => None,
        }
    }

    /// Like [`Self::image_candidates`] but served from a bucket index.
    pub(crate) fn image_candidates_bucketed(&self, i: usize, index: &BucketIndex) -> Vec<usize> {
        let Geometry::Coords {
            dim, image_points, ..
        } = &self.geometry
        else {
            return (0..self.len()).collect();
        };
        let mut out: Vec<usize> = image_points[i]
            .chunks(*dim)
            .flat_map(|p| index.candidates(p).iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Closed ball `{j : dist(x, j) <= radius}` in increasing index order.
    pub fn ball(&self, x: usize, radius: f64) -> Vec<usize> {
        let candidates: Vec<usize> = match &self.geometry {
            Geometry::Coords {
                dim,
                coords,
                index: Some(index),
                ..
            } => index.candidates(&coords[x * dim..(x + 1) * dim], radius),
            _ => (0..self.len()).collect(),
        };
        candidates
            .into_iter()
            .filter(|&j| self.dist(x, j) <= radius + DIST_TOL)
            .collect()
    }

    /// `max_{j in set} dist(i, j)` style helpers need `d(i, S)`.
    pub fn dist_to_set(&self, i: usize, set: &[usize]) -> f64 {
        set.iter()
            .map(|&j| self.dist(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Submodel on `nodes` (sorted, deduplicated). Distances are inherited; each
    /// true image is re-projected onto the nearest nodes of the subset.
    /// Returns the model and the map from new to old indices.
    pub fn restrict(&self, nodes: &[usize]) -> Result<(FiniteModel, Vec<usize>)> {
        let mut keep: Vec<usize> = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::EmptyModel(format!("restriction of {}", self.name)));
        }
        if let Some(&bad) = keep.iter().find(|&&j| j >= self.len()) {
            return Err(Error::Parameter(format!("node {bad} outside the model")));
        }
        let k = keep.len();
        let successors: Vec<Vec<usize>> = keep
            .iter()
            .map(|&i| {
                let d: Vec<f64> = keep.iter().map(|&j| self.image_dist(i, j)).collect();
                let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
                // retained successors stay successors; ties with them are kept too
                (0..k).filter(|&a| d[a] <= best + DIST_TOL).collect()
            })
            .collect();
        let labels = keep.iter().map(|&i| self.labels[i].clone()).collect();
        let geometry = match &self.geometry {
            Geometry::Coords {
                space,
                dim,
                coords,
                image_points,
                ..
            } => Geometry::Coords {
                space: space.clone(),
                dim: *dim,
                coords: keep
                    .iter()
                    .flat_map(|&i| coords[i * dim..(i + 1) * dim].iter().cloned())
                    .collect(),
                image_points: keep.iter().map(|&i| image_points[i].clone()).collect(),
                index: None,
            },
            Geometry::Explicit { .. } => Geometry::Explicit {
                dist: keep
                    .iter()
                    .flat_map(|&i| keep.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| self.dist(i, j))
                    .collect(),
                image_dist: keep
                    .iter()
                    .flat_map(|&i| keep.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| self.image_dist(i, j))
                    .collect(),
            },
        };
        let model = FiniteModel::from_parts(
            format!("{}|restricted", self.name),
            if k == self.len() {
                self.kind
            } else {
                ModelKind::Restricted
            },
            labels,
            geometry,
            successors,
            self.mesh,
        )?;
        Ok((model, keep))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub nodes: usize,
    pub triples_checked: usize,
    /// Minimum positive pairwise distance.
    pub separation_floor: f64,
    pub proj_error: f64,
    pub mesh: f64,
}

/// Checks the metric axioms (exhaustively on pairs when feasible, on
/// `triple_samples` deterministic triples for the triangle inequality) and
/// successor totality.
pub fn validate_model(m: &FiniteModel, triple_samples: usize) -> Result<ValidationReport> {
    let n = m.len();
    for i in 0..n {
        let s = m.successors(i);
        if !s.contains(&m.image(i)) || s.iter().any(|&j| j >= n) {
            return Err(Error::Validation(format!("node {i}: image not total")));
        }
    }
    let exhaustive_pairs = n <= 4000;
    let mut separation = f64::INFINITY;
    let mut check_pair = |i: usize, j: usize| -> Result<()> {
        let d = m.dist(i, j);
        if !d.is_finite() || d < 0.0 {
            return Err(Error::Validation(format!("dist({i},{j}) = {d}")));
        }
        if i == j && d != 0.0 {
            return Err(Error::Validation(format!("dist({i},{i}) = {d} != 0")));
        }
        if (d - m.dist(j, i)).abs() > DIST_TOL {
            return Err(Error::Validation(format!("asymmetric pair ({i},{j})")));
        }
        if i != j && d > 0.0 {
            separation = separation.min(d);
        }
        Ok(())
    };
    if exhaustive_pairs {
        for i in 0..n {
            for j in i..n {
                check_pair(i, j)?;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..200_000 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            check_pair(i, j)?;
        }
    }

    let total = n * n * n;
    let mut checked = 0;
    let mut check_triple = |i: usize, j: usize, k: usize| -> Result<()> {
        checked += 1;
        if m.dist(i, k) > m.dist(i, j) + m.dist(j, k) + DIST_TOL {
            return Err(Error::Validation(format!(
                "triangle inequality fails on witness ({i},{j},{k})"
            )));
        }
        Ok(())
    };
    if total <= triple_samples {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    check_triple(i, j, k)?;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7121);
        for _ in 0..triple_samples {
            check_triple(
                rng.random_range(0..n),
                rng.random_range(0..n),
                rng.random_range(0..n),
            )?;
        }
    }
    Ok(ValidationReport {
        nodes: n,
        triples_checked: checked,
        separation_floor: if separation.is_finite() {
            separation
        } else {
            0.0
        },
        proj_error: m.proj_error(),
        mesh: m.mesh(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_point(d: f64) -> FiniteModel {
        FiniteModel::from_map("two", vec![vec![0.0, d], vec![d, 0.0]], &[0, 1]).unwrap()
    }

    #[test]
    fn explicit_fixed_points() {
        let m = two_point(1.0);
        assert_eq!(m.image(0), 0);
        assert_eq!(m.image(1), 1);
        assert_eq!(m.proj_error(), 0.0);
        assert!(m.is_deterministic());
    }

    #[test]
    fn triangle_violation_has_witness() {
        let d = vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ];
        let m = FiniteModel::from_map("bad", d, &[0, 1, 2]).unwrap();
        let err = validate_model(&m, 1000).unwrap_err();
        assert!(err.to_string().contains("(0,1,2)"), "{err}");
    }

    #[test]
    fn restrict_to_everything_is_identity() {
        let m = two_point(1.0);
        let (r, keep) = m.restrict(&[0, 1]).unwrap();
        assert_eq!(keep, vec![0, 1]);
        assert_eq!(r.len(), 2);
        assert_eq!(r.proj_error(), m.proj_error());
        assert_eq!(r.image(1), 1);
    }

    #[test]
    fn restrict_reprojects_images() {
        // 0 -> 1 -> 2 -> 0 on a line; drop node 1
        let d = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let m = FiniteModel::from_map("cyc", d, &[1, 2, 0]).unwrap();
        let (r, _) = m.restrict(&[0, 2]).unwrap();
        // f(x0) = x1 is equidistant from x0 and x2: both kept, canonical is 0
        assert_eq!(r.successors(0), &[0, 1]);
        assert_eq!(r.image(1), 0);
        assert_eq!(r.proj_error(), 1.0);
        assert!(m.restrict(&[]).is_err());
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((Space::Circle.dist(&[0.05], &[0.95]) - 0.1).abs() < 1e-12);
    }
}
