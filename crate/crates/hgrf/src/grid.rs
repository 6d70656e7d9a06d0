//! Regular rectangular grids and multi-component fields on them.

use crate::error::{HgrfError, Result};
use crate::params::VariableId;

impl VariableId {
    /// Physical unit of the component when the potentials are in m^2/s.
    pub fn unit(self) -> &'static str {
        match self {
            VariableId::Psi | VariableId::Chi => "m^2/s",
            VariableId::U | VariableId::V => "m/s",
            VariableId::Zeta | VariableId::Div => "1/s",
        }
    }
}

/// A regular rectangular grid: dimensions, spacing and origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    x0: f64,
    y0: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(HgrfError::Shape(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        if !(dx.is_finite() && dy.is_finite() && dx > 0.0 && dy > 0.0) {
            return Err(HgrfError::Domain(format!(
                "grid spacing must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(HgrfError::Domain("grid origin must be finite".to_string()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0,
            y0,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }

    /// Row-major index (x fastest, y-major blocks).
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    pub fn location(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.x0 + ix as f64 * self.dx,
            self.y0 + iy as f64 * self.dy,
        ]
    }

    /// Grid node nearest to a point, with the squared snap distance.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize, f64) {
        let fx = ((x - self.x0) / self.dx).round().clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.dy).round().clamp(0.0, (self.ny - 1) as f64);
        let (ix, iy) = (fx as usize, fy as usize);
        let loc = self.location(ix, iy);
        let d2 = (x - loc[0]).powi(2) + (y - loc[1]).powi(2);
        (ix, iy, d2)
    }
}

/// Multi-component scalar field on a grid, one row-major array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    components: Vec<VariableId>,
    values: Vec<Vec<f64>>,
}

impl GridField {
    pub fn new(spec: GridSpec, components: Vec<VariableId>, values: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() || components.len() != values.len() {
            return Err(HgrfError::Shape(format!(
                "{} component names for {} value arrays",
                components.len(),
                values.len()
            )));
        }
        for (v, arr) in components.iter().zip(&values) {
            if arr.len() != spec.n_points() {
                return Err(HgrfError::Shape(format!(
                    "component {v} has {} values, grid has {}",
                    arr.len(),
                    spec.n_points()
                )));
            }
            if arr.iter().any(|x| !x.is_finite()) {
                return Err(HgrfError::NonFinite(format!(
                    "component {v} contains non-finite values"
                )));
            }
        }
        Ok(Self {
            spec,
            components,
            values,
        })
    }

    pub fn zeros(spec: GridSpec, components: Vec<VariableId>) -> Self {
        let values = vec![vec![0.0; spec.n_points()]; components.len()];
        Self {
            spec,
            components,
            values,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn components(&self) -> &[VariableId] {
        &self.components
    }

    pub fn component_index(&self, v: VariableId) -> Option<usize> {
        self.components.iter().position(|&c| c == v)
    }

    pub fn component(&self, v: VariableId) -> Option<&[f64]> {
        self.component_index(v).map(|i| self.values[i].as_slice())
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    pub fn value(&self, comp: usize, ix: usize, iy: usize) -> f64 {
        self.values[comp][self.spec.index(ix, iy)]
    }

    pub fn set(&mut self, comp: usize, ix: usize, iy: usize, value: f64) {
        let idx = self.spec.index(ix, iy);
        self.values[comp][idx] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(1, 5, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(GridSpec::new(4, 5, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(GridSpec::new(4, 5, 1.0, 1.0, f64::INFINITY, 0.0).is_err());
        let g = GridSpec::new(4, 5, 0.5, 2.0, -1.0, 3.0).unwrap();
        assert_eq!(g.n_points(), 20);
        assert_eq!(g.location(2, 1), [0.0, 5.0]);
        assert_eq!(g.index(3, 2), 2 * 4 + 3);
    }

    #[test]
    fn nearest_node_snaps_and_reports_distance() {
        let g = GridSpec::new(4, 4, 0.5, 0.5, 0.0, 0.0).unwrap();
        let (ix, iy, d2) = g.nearest_node(1.01, 0.49);
        assert_eq!((ix, iy), (2, 1));
        assert!(d2 < 1e-3);
    }

    #[test]
    fn field_shape_checks() {
        let g = GridSpec::new(3, 2, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(GridField::new(g, vec![VariableId::U], vec![vec![0.0; 5]]).is_err());
        assert!(GridField::new(g, vec![VariableId::U], vec![vec![f64::NAN; 6]]).is_err());
        let f = GridField::new(g, vec![VariableId::U], vec![vec![1.0; 6]]).unwrap();
        assert_eq!(f.component(VariableId::U).unwrap().len(), 6);
        assert!(f.component(VariableId::V).is_none());
    }

    #[test]
    fn units_follow_the_variable() {
        assert_eq!(VariableId::Psi.unit(), "m^2/s");
        assert_eq!(VariableId::U.unit(), "m/s");
        assert_eq!(VariableId::Div.unit(), "1/s");
    }
}
