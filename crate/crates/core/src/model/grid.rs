use super::{FiniteModel, Geometry, GridIndex, ModelKind, Space};
use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const DEFAULT_NODE_CAP: usize = 200_000;

/// Concrete maps available for grid discretization.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MapSpec {
    /// `x -> x` on `[0,1]`.
    Identity,
    /// `x -> x + alpha mod 1`.
    Rotation { alpha: f64 },
    /// `x -> 2x mod 1`.
    Doubling,
    /// Full tent map on `[0,1]`.
    Tent,
    /// `x -> r x (1 - x)` on `[0,1]`, `0 <= r <= 4`.
    Logistic { r: f64 },
    /// Projective circle map: with `t = x - phase` in `[-1/2, 1/2)`,
    /// `t -> atan(lambda tan(pi t)) / pi`. Repelling fixed point at `phase`
    /// (derivative `lambda`), attracting one at `phase + 1/2`. Needs `lambda > 1`.
    NorthSouth { lambda: f64, phase: f64 },
    /// Arnold cat map `(x, y) -> (2x + y, x + y)` on the 2-torus.
    Cat,
}

impl MapSpec {
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let allowed: &[&str] = match name {
            "identity" | "doubling" | "tent" | "cat" => &[],
            "rotation" => &["alpha"],
            "logistic" => &["r"],
            "north_south" => &["lambda", "phase"],
            other => return Err(Error::UnknownMap(other.to_string())),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Parameter(format!(
                "map `{name}` has no parameter `{k}`"
            )));
        }
        let spec = match name {
            "identity" => MapSpec::Identity,
            "doubling" => MapSpec::Doubling,
            "tent" => MapSpec::Tent,
            "cat" => MapSpec::Cat,
            "rotation" => MapSpec::Rotation {
                alpha: get("alpha", 0.25),
            },
            "logistic" => MapSpec::Logistic { r: get("r", 4.0) },
            _ => MapSpec::NorthSouth {
                lambda: get("lambda", 3.0),
                phase: get("phase", 0.0),
            },
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapSpec::Identity => "identity",
            MapSpec::Rotation { .. } => "rotation",
            MapSpec::Doubling => "doubling",
            MapSpec::Tent => "tent",
            MapSpec::Logistic { .. } => "logistic",
            MapSpec::NorthSouth { .. } => "north_south",
            MapSpec::Cat => "cat",
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            MapSpec::Logistic { r } if !(0.0..=4.0).contains(&r) => {
                Err(Error::Parameter(format!("logistic r = {r} outside [0, 4]")))
            }
            MapSpec::NorthSouth { lambda, .. } if !(lambda > 1.0 && lambda.is_finite()) => Err(
                Error::Parameter(format!("north_south lambda {lambda} must exceed 1")),
            ),
            MapSpec::Rotation { alpha } | MapSpec::NorthSouth { phase: alpha, .. }
                if !alpha.is_finite() =>
            {
                Err(Error::Parameter("non-finite map parameter".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MapSpec::Cat => 2,
            _ => 1,
        }
    }

    pub fn periodic(&self) -> bool {
        !matches!(
            self,
            MapSpec::Identity | MapSpec::Tent | MapSpec::Logistic { .. }
        )
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        let wrap = |v: f64| v.rem_euclid(1.0);
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        match *self {
            MapSpec::Identity => vec![p[0]],
            MapSpec::Rotation { alpha } => vec![wrap(p[0] + alpha)],
            MapSpec::Doubling => vec![wrap(2.0 * p[0])],
            MapSpec::Tent => {
                let x = p[0];
                vec![clamp(if x < 0.5 { 2.0 * x } else { 2.0 - 2.0 * x })]
            }
            MapSpec::Logistic { r } => vec![clamp(r * p[0] * (1.0 - p[0]))],
            MapSpec::NorthSouth { lambda, phase } => {
                let t = (p[0] - phase + 0.5).rem_euclid(1.0) - 0.5;
                vec![wrap(phase + (lambda * (PI * t).tan()).atan() / PI)]
            }
            MapSpec::Cat => vec![wrap(2.0 * p[0] + p[1]), wrap(p[0] + p[1])],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub map: MapSpec,
    /// Cell width; must divide 1.
    pub mesh: f64,
    pub node_cap: usize,
}

/// Cell-centered grid discretization. Node `k` is the center of the half-open
/// cell `[k h, (k+1) h)` (row-major in 2-D). Successors of a node are all
/// cells whose centers are nearest to the true image of its center; the
/// canonical image is the lowest such index.
pub fn build_grid_model(spec: &GridSpec) -> Result<FiniteModel> {
    let h = spec.mesh;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Parameter(format!("mesh {h} must lie in (0, 1]")));
    }
    let cells = (1.0 / h).round() as usize;
    if ((cells as f64) * h - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "mesh {h} does not divide the unit interval"
        )));
    }
    let dim = spec.map.dim();
    let total = cells
        .checked_pow(dim as u32)
        .filter(|&t| t <= spec.node_cap)
        .ok_or_else(|| {
            Error::capacity(
                "grid nodes",
                cells.saturating_pow(dim as u32),
                spec.node_cap,
            )
        })?;

    let index = GridIndex {
        cells,
        dim,
        h,
        periodic: spec.map.periodic(),
    };
    let space = if index.periodic {
        Space::Circle
    } else {
        Space::Interval
    };
    let mut coords = Vec::with_capacity(total * dim);
    for k in 0..total {
        let mut rest = k;
        let mut c = vec![0.0; dim];
        for axis in (0..dim).rev() {
            c[axis] = ((rest % cells) as f64 + 0.5) * h;
            rest /= cells;
        }
        coords.extend(c);
    }
    let image_points: Vec<Vec<f64>> = coords.chunks(dim).map(|c| spec.map.eval(c)).collect();
    let tie = 1e-9 * h;
    let successors = image_points
        .iter()
        .map(|p| {
            let cand = index.candidates(p, h);
            let d: Vec<(usize, f64)> = cand
                .into_iter()
                .map(|j| (j, space.dist(p, &coords[j * dim..(j + 1) * dim])))
                .collect();
            let best = d.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            d.into_iter()
                .filter(|x| x.1 <= best + tie)
                .map(|x| x.0)
                .collect()
        })
        .collect();
    let labels = coords
        .chunks(dim)
        .map(|c| {
            c.iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    FiniteModel::from_parts(
        format!("grid:{}", spec.map.name()),
        ModelKind::Grid,
        labels,
        Geometry::Coords {
            space,
            dim,
            coords,
            image_points,
            index: Some(index),
        },
        successors,
        h / 2.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    fn grid(map: MapSpec, mesh: f64) -> FiniteModel {
        build_grid_model(&GridSpec {
            map,
            mesh,
            node_cap: DEFAULT_NODE_CAP,
        })
        .unwrap()
    }

    #[test]
    fn doubling_eighth_mesh() {
        let m = grid(MapSpec::Doubling, 0.125);
        assert_eq!(m.len(), 8);
        // center 3/16 -> 3/8, a cell boundary: tie between cells 2 and 3
        assert_eq!(m.image(1), 2);
        assert_eq!(m.successors(1), &[2, 3]);
        assert!((m.proj_error() - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(m.mesh(), 1.0 / 16.0);
    }

    #[test]
    fn identity_and_half_rotation() {
        let id = grid(MapSpec::Identity, 0.25);
        assert!((0..4).all(|i| id.image(i) == i));
        assert_eq!(id.proj_error(), 0.0);
        let rot = grid(MapSpec::Rotation { alpha: 0.5 }, 0.25);
        for i in 0..4 {
            assert_eq!(rot.image(i), (i + 2) % 4);
            assert_eq!(rot.image(rot.image(i)), i);
        }
        assert!(rot.is_deterministic());
    }

    #[test]
    fn projection_error_is_recorded() {
        let m = grid(MapSpec::Logistic { r: 3.7 }, 1.0 / 64.0);
        for i in 0..m.len() {
            assert!(m.image_dist(i, m.image(i)) <= m.proj_error() + 1e-15);
        }
        assert!(m.proj_error() <= m.mesh() + 1e-15);
        validate_model(&m, 5000).unwrap();
    }

    #[test]
    fn north_south_has_two_fixed_cells() {
        let h = 1.0 / 64.0;
        let m = grid(
            MapSpec::NorthSouth {
                lambda: 3.0,
                phase: h / 2.0,
            },
            h,
        );
        let fixed: Vec<usize> = (0..m.len()).filter(|&i| m.successors(i) == [i]).collect();
        assert_eq!(fixed, vec![0, 32]);
    }

    #[test]
    fn cat_map_is_two_dimensional() {
        let m = grid(MapSpec::Cat, 0.125);
        assert_eq!(m.len(), 64);
        validate_model(&m, 10_000).unwrap();
    }

    #[test]
    fn errors() {
        assert!(matches!(
            MapSpec::from_name("nosuch", &BTreeMap::new()),
            Err(Error::UnknownMap(_))
        ));
        let err = build_grid_model(&GridSpec {
            map: MapSpec::Doubling,
            mesh: 1e-4,
            node_cap: 1000,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(build_grid_model(&GridSpec {
            map: MapSpec::Doubling,
            mesh: 0.3,
            node_cap: 1000,
        })
        .is_err());
    }

    #[test]
    fn image_error_bound_holds_everywhere() {
        for map in [
            MapSpec::Tent,
            MapSpec::Doubling,
            MapSpec::Rotation { alpha: 0.1 },
        ] {
            let m = grid(map.clone(), 1.0 / 32.0);
            for i in 0..m.len() {
                let c = m.coords(i).unwrap();
                let fx = map.eval(c);
                let target = m.coords(m.image(i)).unwrap();
                let space = if map.periodic() {
                    Space::Circle
                } else {
                    Space::Interval
                };
                assert!(space.dist(&fx, target) <= m.proj_error() + 1e-15);
            }
        }
    }
}
