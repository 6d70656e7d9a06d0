//! Centered finite differences on grid fields.
//!
//! These operators exist for diagnostics and consistency checks; the model
//! itself never differentiates numerically.

use crate::error::{HgrfError, Result};
use crate::grid::GridField;
use crate::params::VariableId;

/// FD divergence d(u)/dx + d(v)/dy over the interior.
pub fn divergence_interior(field: &GridField) -> Result<Vec<f64>> {
    wind_operator(field, false)
}

/// FD curl -d(u)/dy + d(v)/dx over the interior.
pub fn curl_interior(field: &GridField) -> Result<Vec<f64>> {
    wind_operator(field, true)
}

fn wind_operator(field: &GridField, curl: bool) -> Result<Vec<f64>> {
    let u = field
        .component(VariableId::U)
        .ok_or_else(|| HgrfError::Shape("field lacks a u component".to_string()))?;
    let v = field
        .component(VariableId::V)
        .ok_or_else(|| HgrfError::Shape("field lacks a v component".to_string()))?;
    let spec = field.spec();
    let (nx, ny) = (spec.nx(), spec.ny());
    if nx < 3 || ny < 3 {
        return Err(HgrfError::Shape(
            "centered differences need at least a 3x3 grid".to_string(),
        ));
    }
    let (dx, dy) = (spec.dx(), spec.dy());
    let mut out = Vec::with_capacity((nx - 2) * (ny - 2));
    for iy in 1..ny - 1 {
        for ix in 1..nx - 1 {
            let i = iy * nx + ix;
            let du_dx = (u[i + 1] - u[i - 1]) / (2.0 * dx);
            let du_dy = (u[i + nx] - u[i - nx]) / (2.0 * dy);
            let dv_dx = (v[i + 1] - v[i - 1]) / (2.0 * dx);
            let dv_dy = (v[i + nx] - v[i - nx]) / (2.0 * dy);
            out.push(if curl { dv_dx - du_dy } else { du_dx + dv_dy });
        }
    }
    Ok(out)
}

pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;

    fn wind_field(nx: usize, ny: usize, d: f64, f: impl Fn(f64, f64) -> (f64, f64)) -> GridField {
        let spec = GridSpec::new(nx, ny, d, d, 0.0, 0.0).unwrap();
        let mut u = vec![0.0; nx * ny];
        let mut v = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let [x, y] = spec.location(ix, iy);
                let (a, b) = f(x, y);
                u[iy * nx + ix] = a;
                v[iy * nx + ix] = b;
            }
        }
        GridField::new(spec, vec![VariableId::U, VariableId::V], vec![u, v]).unwrap()
    }

    #[test]
    fn divergence_and_curl_of_linear_fields_are_exact() {
        // u = 2x + y, v = -x + 3y: div = 5, curl = -1 - 1 = -2.
        let f = wind_field(8, 6, 0.5, |x, y| (2.0 * x + y, -x + 3.0 * y));
        for d in divergence_interior(&f).unwrap() {
            assert_relative_eq!(d, 5.0, epsilon = 1e-12);
        }
        for c in curl_interior(&f).unwrap() {
            assert_relative_eq!(c, -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn small_grids_are_rejected() {
        let f = wind_field(2, 2, 1.0, |_, _| (0.0, 0.0));
        assert!(divergence_interior(&f).is_err());
    }
}
