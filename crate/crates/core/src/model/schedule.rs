use super::FiniteModel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Resolutions at which the "for every ε there is δ" quantifiers are sampled.
/// Every list is strictly decreasing; the finest entry is last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSchedule {
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Ball radii standing in for closed neighborhoods of a point.
    pub radii: Vec<f64>,
}

fn check_list(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("schedule `{name}` is empty")));
    }
    if v.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::Config(format!(
            "schedule `{name}` has non-positive entries"
        )));
    }
    if v.windows(2).any(|p| p[0] <= p[1]) {
        return Err(Error::Config(format!(
            "schedule `{name}` must be strictly decreasing"
        )));
    }
    Ok(())
}

impl ResolutionSchedule {
    pub fn new(epsilons: Vec<f64>, deltas: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        let s = ResolutionSchedule {
            epsilons,
            deltas,
            radii,
        };
        s.check_shape()?;
        Ok(s)
    }

    pub fn check_shape(&self) -> Result<()> {
        check_list("epsilons", &self.epsilons)?;
        check_list("deltas", &self.deltas)?;
        check_list("radii", &self.radii)
    }

    /// Checks the floors against a model: ε ≥ mesh + proj_error, δ ≥ the
    /// chain floor, radii ≥ mesh.
    pub fn validate_for(&self, m: &FiniteModel) -> Result<()> {
        self.check_shape()?;
        let tol = 1e-12;
        let eps = self.finest_epsilon();
        if eps + tol < m.resolution_floor() {
            return Err(Error::resolution("epsilon", eps, m.resolution_floor()));
        }
        let delta = self.finest_delta();
        if delta + tol < m.chain_floor() {
            return Err(Error::resolution("delta", delta, m.chain_floor()));
        }
        let r = self.finest_radius();
        if r + tol < m.mesh() {
            return Err(Error::resolution("radius", r, m.mesh()));
        }
        Ok(())
    }

    pub fn finest_epsilon(&self) -> f64 {
        *self.epsilons.last().unwrap()
    }

    pub fn finest_delta(&self) -> f64 {
        *self.deltas.last().unwrap()
    }

    pub fn finest_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rules() {
        assert!(ResolutionSchedule::new(vec![0.5, 0.25], vec![0.1], vec![0.2]).is_ok());
        assert!(ResolutionSchedule::new(vec![0.25, 0.5], vec![0.1], vec![0.2]).is_err());
        assert!(ResolutionSchedule::new(vec![], vec![0.1], vec![0.2]).is_err());
        assert!(ResolutionSchedule::new(vec![0.5], vec![0.0], vec![0.2]).is_err());
    }

    #[test]
    fn floor_is_named() {
        let m = crate::model::build_grid_model(&crate::model::GridSpec {
            map: crate::model::MapSpec::Doubling,
            mesh: 1.0 / 16.0,
            node_cap: 1000,
        })
        .unwrap();
        let s = ResolutionSchedule::new(vec![0.01], vec![0.1], vec![0.1]).unwrap();
        let err = s.validate_for(&m).unwrap_err();
        assert!(err.to_string().contains("0.0625"), "{err}");
    }
}
