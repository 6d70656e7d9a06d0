//! Variance-stabilizing preprocessing and marginal diagnostics.
//!
//! Observed wind anomalies are rarely stationary in amplitude: the local
//! energy level varies across the domain. A kernel-smoothed energy surface
//! g is estimated from the wind, and every component is divided by
//! (c + g). Division violates the differential relations between the
//! variables only through the gradient of the smoothed surface, so the
//! smoother the surface (and the larger c), the smaller the violation;
//! `transform_error` quantifies it. Marginal kurtosis and QQ data judge
//! how close the transformed field is to Gaussian.

use crate::error::{HgrfError, Result};
use crate::grid::{GridField, GridSpec};
use crate::params::VariableId;
use crate::stats;

/// Kernel family of the energy smoother.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelFamily {
    #[default]
    Gaussian,
}

/// Energy-smoother configuration: kernel, bandwidth (length units) and the
/// positive offset constant c of the transform (default 1/3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherSpec {
    pub kernel: KernelFamily,
    pub bandwidth: f64,
    pub c: f64,
}

impl SmootherSpec {
    pub fn new(bandwidth: f64, c: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(HgrfError::Domain(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(HgrfError::Domain(format!("c must be positive, got {c}")));
        }
        Ok(Self {
            kernel: KernelFamily::Gaussian,
            bandwidth,
            c,
        })
    }

    /// Default offset constant.
    pub fn with_default_c(bandwidth: f64) -> Result<Self> {
        Self::new(bandwidth, 1.0 / 3.0)
    }

    /// A bandwidth below the grid spacing smooths almost nothing.
    pub fn is_degenerate_for(&self, grid: &GridSpec) -> bool {
        self.bandwidth < grid.dx().min(grid.dy())
    }
}

/// Scalar surface on a grid (the smoothed energy field).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_points() {
            return Err(HgrfError::Shape(format!(
                "{} values for a grid of {}",
                values.len(),
                spec.n_points()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Separable 1-D convolution with boundary renormalization: on a full
/// rectangle, dividing the smoothed field by the smoothed indicator equals
/// renormalizing the kernel over the in-domain mask, so the surface has no
/// boundary dip.
fn smooth_axis(values: &[f64], n_fast: usize, n_slow: usize, weights: &[f64], along_fast: bool) -> Vec<f64> {
    let half = weights.len() / 2;
    let mut out = vec![0.0; values.len()];
    let (n_outer, n_inner) = if along_fast {
        (n_slow, n_fast)
    } else {
        (n_fast, n_slow)
    };
    for outer in 0..n_outer {
        for inner in 0..n_inner {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            let lo = inner.saturating_sub(half);
            let hi = (inner + half).min(n_inner - 1);
            for j in lo..=hi {
                let w = weights[j + half - inner];
                let idx = if along_fast {
                    outer * n_fast + j
                } else {
                    j * n_fast + outer
                };
                acc += w * values[idx];
                wsum += w;
            }
            let idx = if along_fast {
                outer * n_fast + inner
            } else {
                inner * n_fast + outer
            };
            out[idx] = acc / wsum;
        }
    }
    out
}

fn gaussian_weights(bandwidth: f64, spacing: f64) -> Vec<f64> {
    let half = ((4.0 * bandwidth / spacing).ceil() as usize).max(1);
    (0..=2 * half)
        .map(|i| {
            let d = (i as f64 - half as f64) * spacing;
            (-0.5 * (d / bandwidth).powi(2)).exp()
        })
        .collect()
}

/// Kernel-smoothed wind energy surface g >= 0 on the field's grid.
///
/// The pointwise energy is the wind amplitude sqrt(u^2 + v^2); smoothing is
/// a separable Gaussian renormalized over the domain.
pub fn energy_smooth(field: &GridField, spec: &SmootherSpec) -> Result<ScalarField> {
    let u = field
        .component(VariableId::U)
        .ok_or_else(|| HgrfError::Shape("energy_smooth needs a u component".to_string()))?;
    let v = field
        .component(VariableId::V)
        .ok_or_else(|| HgrfError::Shape("energy_smooth needs a v component".to_string()))?;
    let g = field.spec();
    let energy: Vec<f64> = u.iter().zip(v).map(|(a, b)| a.hypot(*b)).collect();
    let wx = gaussian_weights(spec.bandwidth, g.dx());
    let wy = gaussian_weights(spec.bandwidth, g.dy());
    let pass_x = smooth_axis(&energy, g.nx(), g.ny(), &wx, true);
    let smoothed = smooth_axis(&pass_x, g.nx(), g.ny(), &wy, false);
    ScalarField::new(*g, smoothed)
}

/// Divide every component pointwise by (c + g).
pub fn transform(field: &GridField, ghat: &ScalarField, c: f64) -> Result<GridField> {
    scale_field(field, ghat, c, |value, denom| value / denom)
}

/// Undo `transform` given the same surface and constant.
pub fn inverse_transform(field: &GridField, ghat: &ScalarField, c: f64) -> Result<GridField> {
    scale_field(field, ghat, c, |value, denom| value * denom)
}

fn scale_field(
    field: &GridField,
    ghat: &ScalarField,
    c: f64,
    op: fn(f64, f64) -> f64,
) -> Result<GridField> {
    if c <= 0.0 || !c.is_finite() {
        return Err(HgrfError::Domain(format!("c must be positive, got {c}")));
    }
    if field.spec() != ghat.spec() {
        return Err(HgrfError::Shape(
            "field and energy surface grids differ".to_string(),
        ));
    }
    let values = field
        .values()
        .iter()
        .map(|comp| {
            comp.iter()
                .zip(ghat.values())
                .map(|(x, g)| op(*x, c + g))
                .collect()
        })
        .collect();
    GridField::new(*field.spec(), field.components().to_vec(), values)
}

/// Relative size of the differential-relation violation introduced by the
/// transform, for one potential component:
/// ||chi grad(g) / (c+g)^2|| / ||grad(chi) / (c+g)|| over the interior.
pub fn transform_error(
    field: &GridField,
    var: VariableId,
    ghat: &ScalarField,
    c: f64,
) -> Result<f64> {
    if !matches!(var, VariableId::Psi | VariableId::Chi) {
        return Err(HgrfError::Domain(
            "transform_error applies to a potential component (psi or chi)".to_string(),
        ));
    }
    let chi = field
        .component(var)
        .ok_or_else(|| HgrfError::Shape(format!("field lacks component {var}")))?;
    if field.spec() != ghat.spec() {
        return Err(HgrfError::Shape(
            "field and energy surface grids differ".to_string(),
        ));
    }
    let spec = field.spec();
    let (nx, ny) = (spec.nx(), spec.ny());
    if nx < 3 || ny < 3 {
        return Err(HgrfError::Shape(
            "transform_error needs at least a 3x3 grid".to_string(),
        ));
    }
    let g = ghat.values();
    let mut err_sq = 0.0;
    let mut ref_sq = 0.0;
    for iy in 1..ny - 1 {
        for ix in 1..nx - 1 {
            let i = iy * nx + ix;
            let denom = c + g[i];
            let dgx = (g[i + 1] - g[i - 1]) / (2.0 * spec.dx());
            let dgy = (g[i + nx] - g[i - nx]) / (2.0 * spec.dy());
            let dcx = (chi[i + 1] - chi[i - 1]) / (2.0 * spec.dx());
            let dcy = (chi[i + nx] - chi[i - nx]) / (2.0 * spec.dy());
            let scale = chi[i] / (denom * denom);
            err_sq += scale * scale * (dgx * dgx + dgy * dgy);
            ref_sq += (dcx * dcx + dcy * dcy) / (denom * denom);
        }
    }
    if ref_sq == 0.0 {
        return Err(HgrfError::Degenerate(
            "potential gradient vanishes on the interior".to_string(),
        ));
    }
    Ok((err_sq / ref_sq).sqrt())
}

/// Kurtosis and QQ data of one field component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDiagnostics {
    pub var: VariableId,
    pub kurtosis: f64,
    /// (standard-normal quantile, standardized sample quantile) pairs.
    pub qq: Vec<(f64, f64)>,
}

/// Marginal Gaussianity diagnostics for every component of a field.
pub fn marginal_diagnostics(field: &GridField) -> Result<Vec<ComponentDiagnostics>> {
    field
        .components()
        .iter()
        .zip(field.values())
        .map(|(var, values)| {
            if values.len() < 100 {
                return Err(HgrfError::Degenerate(format!(
                    "component {var} has {} values; diagnostics need at least 100",
                    values.len()
                )));
            }
            let kurtosis = stats::kurtosis(values).map_err(|_| {
                HgrfError::Degenerate(format!("component {var} has zero variance"))
            })?;
            let m = stats::mean(values);
            let sd = (values.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
                / values.len() as f64)
                .sqrt();
            let mut sorted: Vec<f64> = values.iter().map(|x| (x - m) / sd).collect();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let n = sorted.len();
            let qq = sorted
                .into_iter()
                .enumerate()
                .map(|(i, s)| (stats::normal_quantile((i as f64 + 0.5) / n as f64), s))
                .collect();
            Ok(ComponentDiagnostics {
                var: *var,
                kurtosis,
                qq,
            })
        })
        .collect()
}
