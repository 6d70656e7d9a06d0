//! Cross-covariance blocks of the six-variable field.
//!
//! Every variable is a first- or second-order differential operator applied
//! to the potentials (psi, chi), so every covariance block is a signed
//! combination of partial derivatives of the scalar potential covariance
//! C(h) = Sigma_{b1 b2} M(||A h||, nu). Derivatives are expanded through
//! the radial ladder: with w = A h and T the w-space derivative tensor,
//!
//!   T_a       = g1 w_a
//!   T_ab      = g2 w_a w_b + g1 d_ab
//!   T_abc     = g3 w_a w_b w_c + g2 (w_a d_bc + w_b d_ac + w_c d_ab)
//!   T_abcd    = g4 w^4 + g3 (six w w d terms) + g2 (three d d terms)
//!
//! and each lag-space index pulls back through one factor of A. An
//! s-located derivative of order k contributes a factor (-1)^k. The
//! component-wise anisotropy transforms of the gradient, curl and Laplacian
//! fields give a second, independent route to the same numbers; that route
//! lives in the test suite as a cross-check.

use crate::error::{HgrfError, Result};
use crate::matern::{self, matern};
use crate::params::{AnisotropyMatrix, Lag, ModelParams, VariableId};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Which potential a differential-operator term acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    Psi,
    Chi,
}

/// One term `coef * d^(dx+dy) base / dx^dx dy^dy` of a variable's operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpTerm {
    pub coef: f64,
    pub base: Potential,
    pub dx: u8,
    pub dy: u8,
}

impl OpTerm {
    pub const fn new(coef: f64, base: Potential, dx: u8, dy: u8) -> Self {
        Self { coef, base, dx, dy }
    }

    fn order(&self) -> usize {
        (self.dx + self.dy) as usize
    }
}

const PSI_OP: &[OpTerm] = &[OpTerm::new(1.0, Potential::Psi, 0, 0)];
const CHI_OP: &[OpTerm] = &[OpTerm::new(1.0, Potential::Chi, 0, 0)];
// u = -d2 psi + d1 chi, v = d1 psi + d2 chi (curl fixed as (-d2, d1)).
const U_OP: &[OpTerm] = &[
    OpTerm::new(-1.0, Potential::Psi, 0, 1),
    OpTerm::new(1.0, Potential::Chi, 1, 0),
];
const V_OP: &[OpTerm] = &[
    OpTerm::new(1.0, Potential::Psi, 1, 0),
    OpTerm::new(1.0, Potential::Chi, 0, 1),
];
const ZETA_OP: &[OpTerm] = &[
    OpTerm::new(1.0, Potential::Psi, 2, 0),
    OpTerm::new(1.0, Potential::Psi, 0, 2),
];
const DIV_OP: &[OpTerm] = &[
    OpTerm::new(1.0, Potential::Chi, 2, 0),
    OpTerm::new(1.0, Potential::Chi, 0, 2),
];

impl VariableId {
    /// The variable expressed as a differential operator on the potentials.
    pub fn operator(self) -> &'static [OpTerm] {
        match self {
            VariableId::Psi => PSI_OP,
            VariableId::Chi => CHI_OP,
            VariableId::U => U_OP,
            VariableId::V => V_OP,
            VariableId::Zeta => ZETA_OP,
            VariableId::Div => DIV_OP,
        }
    }
}

/// Sigma entry for a potential pair.
fn sigma_entry(p: &ModelParams, a: Potential, b: Potential) -> f64 {
    match (a, b) {
        (Potential::Psi, Potential::Psi) => p.sigma_psi() * p.sigma_psi(),
        (Potential::Chi, Potential::Chi) => p.sigma_chi() * p.sigma_chi(),
        _ => p.rho() * p.sigma_psi() * p.sigma_chi(),
    }
}

/// Refuse blocks whose variance does not exist at the given smoothness:
/// wind components need nu > 1, vorticity/divergence need nu > 2.
fn require_smoothness(p: &ModelParams, v: VariableId) -> Result<()> {
    let required = v.order() as f64;
    if required > 0.0 && p.nu() <= required {
        return Err(HgrfError::Smoothness {
            block: v.name().to_string(),
            required,
            nu: p.nu(),
        });
    }
    Ok(())
}

/// Scalar potential covariance Sigma_{ij} M(||A h||, nu) for i, j in {psi, chi}.
pub fn potential_block(p: &ModelParams, i: VariableId, j: VariableId, h: Lag) -> Result<f64> {
    let pot = |v: VariableId| match v {
        VariableId::Psi => Ok(Potential::Psi),
        VariableId::Chi => Ok(Potential::Chi),
        other => Err(HgrfError::Domain(format!(
            "potential_block expects psi or chi, got {other}"
        ))),
    };
    let (a, b) = (pot(i)?, pot(j)?);
    let w = p.anisotropy().apply(h);
    Ok(sigma_entry(p, a, b) * matern(w[0].hypot(w[1]), p.nu())?)
}

/// Covariance block in the isotropic frame (requires r1 = r2 = 1, theta = 0).
pub fn iso_block(p: &ModelParams, i: VariableId, j: VariableId, h: Lag) -> Result<f64> {
    if !p.is_unit_isotropic() {
        return Err(HgrfError::Domain(
            "iso_block requires r1 = r2 = 1 and theta = 0".to_string(),
        ));
    }
    aniso_block(p, i, j, h)
}

/// General-parameter covariance block Cov(X_i(s), X_j(s + h)).
pub fn aniso_block(p: &ModelParams, i: VariableId, j: VariableId, h: Lag) -> Result<f64> {
    require_smoothness(p, i)?;
    require_smoothness(p, j)?;
    operator_cov(p, i.operator(), j.operator(), h)
}

/// Covariance of two arbitrary differential operators of the potentials,
/// Cov((Op_a F)(s), (Op_b F)(s + h)) with F = (psi, chi).
///
/// Total derivative order per term pair must stay within the ladder (4).
pub fn operator_cov(p: &ModelParams, a: &[OpTerm], b: &[OpTerm], h: Lag) -> Result<f64> {
    let aniso = p.anisotropy();
    let w = aniso.apply(h);
    let r = w[0].hypot(w[1]);
    let kmax = {
        let oa = a.iter().map(OpTerm::order).max().unwrap_or(0);
        let ob = b.iter().map(OpTerm::order).max().unwrap_or(0);
        oa + ob
    };
    if kmax > matern::MAX_LADDER_ORDER {
        return Err(HgrfError::UnsupportedOrder { order: kmax });
    }

    let gs = ladder_for_radius(p.nu(), r, kmax)?;
    let identity = aniso.is_identity();

    let mut total = 0.0;
    for ta in a {
        for tb in b {
            let sign = if ta.order().is_multiple_of(2) { 1.0 } else { -1.0 };
            let coef = sign * ta.coef * tb.coef * sigma_entry(p, ta.base, tb.base);
            if coef == 0.0 {
                continue;
            }
            let mut idx = [0usize; 4];
            let k = fill_indices(&mut idx, ta, tb);
            let d = if identity {
                tensor(&gs, &w, &idx[..k])
            } else {
                pullback(&aniso, &gs, &w, &idx[..k])
            };
            total += coef * d;
        }
    }
    if !total.is_finite() {
        return Err(HgrfError::NonFinite(format!(
            "covariance block non-finite at lag ({}, {})",
            h.h1, h.h2
        )));
    }
    Ok(total)
}

/// Ladder values for one radius; at the origin the analytic limits are used
/// (odd tensors vanish there, even orders only touch g_{k/2}).
fn ladder_for_radius(nu: f64, r: f64, kmax: usize) -> Result<[f64; 5]> {
    if r > 0.0 {
        return Ok(matern::ladder_all(nu, r, kmax));
    }
    let mut gs = [0.0; 5];
    for (j, slot) in gs.iter_mut().enumerate().take(kmax + 1) {
        if (nu > j as f64 && 2 * j <= kmax) || j == 0 {
            *slot = matern::ladder_origin(nu, j);
        } else if 2 * j <= kmax {
            // A genuinely needed origin limit is missing.
            return Err(HgrfError::NonDifferentiable { order: j, nu });
        }
        // Higher-order rungs only multiply powers of w = 0; leave them 0.
    }
    Ok(gs)
}

/// Write the combined multi-index (s-term then t-term axes) and return its length.
fn fill_indices(idx: &mut [usize; 4], ta: &OpTerm, tb: &OpTerm) -> usize {
    let mut k = 0;
    for t in [ta, tb] {
        for _ in 0..t.dx {
            idx[k] = 0;
            k += 1;
        }
        for _ in 0..t.dy {
            idx[k] = 1;
            k += 1;
        }
    }
    k
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// w-space derivative tensor of M(||w||) at the given index tuple.
fn tensor(gs: &[f64; 5], w: &[f64; 2], idx: &[usize]) -> f64 {
    match *idx {
        [] => gs[0],
        [a] => gs[1] * w[a],
        [a, b] => gs[2] * w[a] * w[b] + gs[1] * delta(a, b),
        [a, b, c] => {
            gs[3] * w[a] * w[b] * w[c]
                + gs[2] * (w[a] * delta(b, c) + w[b] * delta(a, c) + w[c] * delta(a, b))
        }
        [a, b, c, d] => {
            gs[4] * w[a] * w[b] * w[c] * w[d]
                + gs[3]
                    * (w[a] * w[b] * delta(c, d)
                        + w[a] * w[c] * delta(b, d)
                        + w[a] * w[d] * delta(b, c)
                        + w[b] * w[c] * delta(a, d)
                        + w[b] * w[d] * delta(a, c)
                        + w[c] * w[d] * delta(a, b))
                + gs[2]
                    * (delta(a, b) * delta(c, d)
                        + delta(a, c) * delta(b, d)
                        + delta(a, d) * delta(b, c))
        }
        _ => unreachable!("ladder orders above 4 are rejected earlier"),
    }
}

/// Lag-space derivative: contract each tensor index with one factor of A,
/// d/dh_a = sum_m A[m][a] d/dw_m.
fn pullback(aniso: &AnisotropyMatrix, gs: &[f64; 5], w: &[f64; 2], idx: &[usize]) -> f64 {
    let a = aniso.entries();
    let k = idx.len();
    if k == 0 {
        return gs[0];
    }
    let mut sum = 0.0;
    let mut m = [0usize; 4];
    for assignment in 0..(1usize << k) {
        let mut weight = 1.0;
        for (j, slot) in m.iter_mut().enumerate().take(k) {
            *slot = (assignment >> j) & 1;
            weight *= a[*slot][idx[j]];
        }
        if weight != 0.0 {
            sum += weight * tensor(gs, w, &m[..k]);
        }
    }
    sum
}

/// Joint covariance matrix over (variable, location) pairs.
///
/// Entry (i, j) is Cov(X_i(s_i), X_j(s_j)); the matrix is symmetric by
/// construction through C_ij(-h) = C_ji(h).
pub fn joint_matrix(p: &ModelParams, items: &[(VariableId, [f64; 2])]) -> Result<DMatrix<f64>> {
    let n = items.len();
    for (v, _) in items {
        require_smoothness(p, *v)?;
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let (vi, si) = items[i];
            let mut row = vec![0.0; n - i];
            for (offset, slot) in row.iter_mut().enumerate() {
                let j = i + offset;
                let (vj, sj) = items[j];
                let h = Lag::new(sj[0] - si[0], sj[1] - si[1]);
                *slot = aniso_block(p, vi, vj, h)?;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(HgrfError::NonFinite(
            "joint covariance matrix has non-finite entries".to_string(),
        ));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn reference_params() -> ModelParams {
        // nu = 5, sigma_chi/sigma_psi = 0.3, rho = 0.7, r1 = r2 = 0.25
        ModelParams::new(1.0, 0.3, 0.7, 5.0, 0.25, 0.25, 0.0).unwrap()
    }

    fn generic_params() -> ModelParams {
        ModelParams::new(1.0, 0.82, -0.3, 2.5, 1.3, 0.6, 0.4).unwrap()
    }

    /// Five-point central difference of `f` along one coordinate.
    fn stencil5(f: &mut dyn FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    /// FD oracle: differentiate the scalar potential covariance in actual
    /// s/t coordinates, axis list entries are 0..=3 for (s1, s2, t1, t2).
    fn fd_deriv(
        p: &ModelParams,
        b1: Potential,
        b2: Potential,
        point: [f64; 4],
        axes: &[usize],
        h: f64,
    ) -> f64 {
        if axes.is_empty() {
            let lag = Lag::new(point[2] - point[0], point[3] - point[1]);
            let w = p.anisotropy().apply(lag);
            return sigma_entry(p, b1, b2) * matern(w[0].hypot(w[1]), p.nu()).unwrap();
        }
        let (axis, rest) = (axes[0], &axes[1..]);
        let mut f = |x: f64| {
            let mut q = point;
            q[axis] = x;
            fd_deriv(p, b1, b2, q, rest, h)
        };
        stencil5(&mut f, point[axis], h)
    }

    /// FD oracle for a full operator pair at lag h (s = 0, t = h).
    fn fd_operator_cov(p: &ModelParams, a: &[OpTerm], b: &[OpTerm], lag: Lag, h: f64) -> f64 {
        let mut total = 0.0;
        for ta in a {
            for tb in b {
                let mut axes = Vec::new();
                axes.extend(std::iter::repeat_n(0usize, ta.dx as usize));
                axes.extend(std::iter::repeat_n(1usize, ta.dy as usize));
                axes.extend(std::iter::repeat_n(2usize, tb.dx as usize));
                axes.extend(std::iter::repeat_n(3usize, tb.dy as usize));
                total += ta.coef
                    * tb.coef
                    * fd_deriv(p, ta.base, tb.base, [0.0, 0.0, lag.h1, lag.h2], &axes, h);
            }
        }
        total
    }

    #[test]
    fn potential_cross_block_at_zero_lag_is_rho() {
        let p = ModelParams::isotropic(1.0, 1.0, 0.7, 1.7).unwrap();
        let c = potential_block(&p, VariableId::Psi, VariableId::Chi, Lag::zero()).unwrap();
        assert_relative_eq!(c, 0.7, max_relative = 1e-15);
    }

    #[test]
    fn potential_block_matches_sigma_matrix_at_origin() {
        let p = reference_params();
        let psi = VariableId::Psi;
        let chi = VariableId::Chi;
        let z = Lag::zero();
        assert_relative_eq!(potential_block(&p, psi, psi, z).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            potential_block(&p, psi, chi, z).unwrap(),
            0.3 * 0.7,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            potential_block(&p, chi, chi, z).unwrap(),
            0.09,
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_rho_kills_cross_blocks() {
        let p = ModelParams::new(1.3, 0.5, 0.0, 2.0, 0.8, 1.1, 0.9).unwrap();
        for &h in &[Lag::zero(), Lag::new(0.4, -1.2)] {
            assert_eq!(potential_block(&p, VariableId::Psi, VariableId::Chi, h).unwrap(), 0.0);
        }
    }

    #[test]
    fn potential_block_rejects_wind_arguments() {
        let p = reference_params();
        assert!(potential_block(&p, VariableId::U, VariableId::Psi, Lag::zero()).is_err());
    }

    #[test]
    fn odd_blocks_vanish_at_origin() {
        let p = ModelParams::isotropic(1.0, 0.5, 0.2, 3.0).unwrap();
        assert_eq!(
            iso_block(&p, VariableId::Psi, VariableId::U, Lag::zero()).unwrap(),
            0.0
        );
        assert_eq!(
            iso_block(&p, VariableId::U, VariableId::Zeta, Lag::zero()).unwrap(),
            0.0
        );
    }

    #[test]
    fn wind_block_matches_finite_differences() {
        let p = ModelParams::isotropic(1.0, 0.5, 0.2, 3.0).unwrap();
        let h = Lag::new(0.7, -0.3);
        let exact = iso_block(&p, VariableId::U, VariableId::U, h).unwrap();
        let fd = fd_operator_cov(&p, U_OP, U_OP, h, 1e-2);
        assert_relative_eq!(exact, fd, max_relative = 1e-5);
    }

    #[test]
    fn vorticity_block_matches_nested_laplacian_stencil() {
        let p = ModelParams::isotropic(1.0, 0.5, 0.2, 5.0).unwrap();
        let h = Lag::new(1.0, 0.0);
        let exact = iso_block(&p, VariableId::Zeta, VariableId::Zeta, h).unwrap();
        let fd = fd_operator_cov(&p, ZETA_OP, ZETA_OP, h, 2e-2);
        assert_relative_eq!(exact, fd, max_relative = 1e-4);
    }

    #[test]
    fn every_block_matches_finite_differences_under_anisotropy() {
        let p = generic_params();
        let lags = [Lag::new(0.6, 0.45), Lag::new(-1.3, 0.2), Lag::new(0.05, -0.8)];
        for vi in VariableId::ALL {
            for vj in VariableId::ALL {
                for &h in &lags {
                    let exact = aniso_block(&p, vi, vj, h).unwrap();
                    let fd = fd_operator_cov(&p, vi.operator(), vj.operator(), h, 8e-3);
                    let scale = exact.abs().max(1e-8);
                    assert!(
                        ((exact - fd) / scale).abs() < 1e-4,
                        "({vi},{vj}) at ({},{}) exact={exact:e} fd={fd:e}",
                        h.h1,
                        h.h2
                    );
                }
            }
        }
    }

    #[test]
    fn rotation_only_anisotropy_is_a_conjugated_isotropic_block() {
        // With r1 = r2 = 1 the wind block satisfies C(h) = A^T C_iso(A h) A.
        let theta = std::f64::consts::PI / 6.0;
        let p = ModelParams::new(1.0, 0.5, 0.2, 3.0, 1.0, 1.0, theta).unwrap();
        let p_iso = ModelParams::isotropic(1.0, 0.5, 0.2, 3.0).unwrap();
        let a = p.anisotropy();
        let e = a.entries();
        let h = Lag::new(0.9, -0.2);
        let ah = a.apply(h);
        let ah = Lag::new(ah[0], ah[1]);

        let wind = [VariableId::U, VariableId::V];
        let mut c = [[0.0; 2]; 2];
        let mut c_iso = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = aniso_block(&p, wind[i], wind[j], h).unwrap();
                c_iso[i][j] = iso_block(&p_iso, wind[i], wind[j], ah).unwrap();
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let mut conj = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        conj += e[k][i] * c_iso[k][l] * e[l][j];
                    }
                }
                assert_relative_eq!(c[i][j], conj, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pure_rotational_submodel_reduces_to_psi_term() {
        // rho = 0, sigma_chi = 0: Cov(u, v) is the cross-derivative of the
        // psi covariance alone, g2 h1 h2 in the isotropic frame.
        let p = ModelParams::isotropic(1.4, 0.0, 0.0, 2.5).unwrap();
        for &h in &[Lag::new(0.7, 0.4), Lag::new(-0.3, 1.1)] {
            let block = iso_block(&p, VariableId::U, VariableId::V, h).unwrap();
            let g2 = crate::matern::ladder_all(2.5, h.norm(), 2)[2];
            let expect = 1.4 * 1.4 * g2 * h.h1 * h.h2;
            assert_relative_eq!(block, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn blocks_are_symmetric_under_argument_swap() {
        let p = generic_params();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let vi = VariableId::ALL[rng.random_range(0..6)];
            let vj = VariableId::ALL[rng.random_range(0..6)];
            let h = Lag::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let a = aniso_block(&p, vi, vj, h).unwrap();
            let b = aniso_block(&p, vj, vi, -h).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn scalar_isotropy_under_equal_scales() {
        let p = ModelParams::new(1.0, 0.7, 0.4, 1.8, 0.7, 0.7, 0.3).unwrap();
        let r = 1.37;
        let base = potential_block(&p, VariableId::Psi, VariableId::Chi, Lag::new(r, 0.0)).unwrap();
        for k in 0..16 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let h = Lag::new(r * phi.cos(), r * phi.sin());
            let rotated = potential_block(&p, VariableId::Psi, VariableId::Chi, h).unwrap();
            assert_relative_eq!(base, rotated, max_relative = 1e-12);
        }
    }

    #[test]
    fn vector_isotropy_of_the_wind_block() {
        // r1 = r2 = 1 with arbitrary theta: C(h) = Q^T C(Q h) Q.
        let p = ModelParams::new(1.0, 0.5, 0.2, 3.0, 1.0, 1.0, 1.1).unwrap();
        let wind = [VariableId::U, VariableId::V];
        let h = Lag::new(0.8, 0.33);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..16 {
            let phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let (s, c) = phi.sin_cos();
            let q = [[c, -s], [s, c]];
            let qh = Lag::new(q[0][0] * h.h1 + q[0][1] * h.h2, q[1][0] * h.h1 + q[1][1] * h.h2);
            for i in 0..2 {
                for j in 0..2 {
                    let lhs = aniso_block(&p, wind[i], wind[j], h).unwrap();
                    let mut rhs = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            rhs += q[k][i]
                                * aniso_block(&p, wind[k], wind[l], qh).unwrap()
                                * q[l][j];
                        }
                    }
                    assert_relative_eq!(lhs, rhs, max_relative = 1e-10, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn divergent_part_transforms_by_conjugation_with_a() {
        // Independent route for the gradient-field block: the covariance of
        // grad(chi compose A) is A^T [iso grad-chi block at lag A h] A.
        let p = generic_params();
        let p_iso = ModelParams::isotropic(
            p.sigma_psi(),
            p.sigma_chi(),
            p.rho(),
            p.nu(),
        )
        .unwrap();
        let grad_chi: [&[OpTerm]; 2] = [
            &[OpTerm::new(1.0, Potential::Chi, 1, 0)],
            &[OpTerm::new(1.0, Potential::Chi, 0, 1)],
        ];
        let a = p.anisotropy();
        let e = a.entries();
        for &h in &[Lag::new(0.8, -0.3), Lag::new(-0.2, 1.4)] {
            let ah = a.apply(h);
            let ah = Lag::new(ah[0], ah[1]);
            let mut iso = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    iso[i][j] = operator_cov(&p_iso, grad_chi[i], grad_chi[j], ah).unwrap();
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    let direct = operator_cov(&p, grad_chi[i], grad_chi[j], h).unwrap();
                    let mut conj = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            conj += e[k][i] * iso[k][l] * e[l][j];
                        }
                    }
                    assert_relative_eq!(direct, conj, max_relative = 1e-11, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn rotational_part_transforms_by_the_r_conjugated_matrix() {
        // The curl-field block needs the more complex sandwich
        // R A^T R^T [iso curl-psi block at A h] R A R^T.
        let p = generic_params();
        let p_iso = ModelParams::isotropic(
            p.sigma_psi(),
            p.sigma_chi(),
            p.rho(),
            p.nu(),
        )
        .unwrap();
        let rot_psi: [&[OpTerm]; 2] = [
            &[OpTerm::new(-1.0, Potential::Psi, 0, 1)],
            &[OpTerm::new(1.0, Potential::Psi, 1, 0)],
        ];
        let a = p.anisotropy();
        let e = a.entries();
        let r = crate::params::AnisotropyMatrix::QUARTER_TURN;
        // m = R A^T R^T
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m[i][j] += r[i][k] * e[l][k] * r[j][l];
                    }
                }
            }
        }
        for &h in &[Lag::new(0.8, -0.3), Lag::new(0.5, 0.9)] {
            let ah = a.apply(h);
            let ah = Lag::new(ah[0], ah[1]);
            let mut iso = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    iso[i][j] = operator_cov(&p_iso, rot_psi[i], rot_psi[j], ah).unwrap();
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    let direct = operator_cov(&p, rot_psi[i], rot_psi[j], h).unwrap();
                    // direct = (m iso m^T)_{ij} = sum_kl m[i][k] iso[k][l] m[j][l]
                    let mut conj = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            conj += m[i][k] * iso[k][l] * m[j][l];
                        }
                    }
                    assert_relative_eq!(direct, conj, max_relative = 1e-11, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn laplacian_block_matches_axis_weighted_decomposition() {
        // At theta = 0 the divergence block decomposes into r1^4, r2^4 and
        // 2 r1^2 r2^2 weighted second-derivative covariances of the
        // isotropic model at lag A h.
        let p = ModelParams::new(1.0, 0.82, -0.3, 3.2, 1.3, 0.6, 0.0).unwrap();
        let p_iso = ModelParams::isotropic(1.0, 0.82, -0.3, 3.2).unwrap();
        let dxx: &[OpTerm] = &[OpTerm::new(1.0, Potential::Chi, 2, 0)];
        let dyy: &[OpTerm] = &[OpTerm::new(1.0, Potential::Chi, 0, 2)];
        let a = p.anisotropy();
        let (r1, r2) = (p.r1(), p.r2());
        for &h in &[Lag::new(0.7, 0.2), Lag::new(-0.4, 1.0), Lag::zero()] {
            let ah = a.apply(h);
            let ah = Lag::new(ah[0], ah[1]);
            let direct = aniso_block(&p, VariableId::Div, VariableId::Div, h).unwrap();
            let weighted = r1.powi(4) * operator_cov(&p_iso, dxx, dxx, ah).unwrap()
                + r2.powi(4) * operator_cov(&p_iso, dyy, dyy, ah).unwrap()
                + 2.0 * r1 * r1 * r2 * r2 * operator_cov(&p_iso, dxx, dyy, ah).unwrap();
            assert_relative_eq!(direct, weighted, max_relative = 1e-11, epsilon = 1e-14);
        }
    }

    #[test]
    fn potential_wind_blocks_are_antisymmetric() {
        let p = generic_params();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..200 {
            let pot = [VariableId::Psi, VariableId::Chi][rng.random_range(0..2)];
            let wind = [VariableId::U, VariableId::V][rng.random_range(0..2)];
            let h = Lag::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let a = aniso_block(&p, wind, pot, h).unwrap();
            let b = aniso_block(&p, pot, wind, h).unwrap();
            assert_abs_diff_eq!(a, -b, epsilon = 1e-15 + 1e-14 * a.abs());
        }
    }

    #[test]
    fn correlated_potentials_stay_divergence_consistent() {
        // The cross-covariance of chi with the rotational wind part is a
        // pure rotation field: its lag divergence vanishes even at rho != 0,
        // while the covariance itself is far from zero.
        let p = ModelParams::isotropic(1.0, 0.8, 0.7, 2.5).unwrap();
        let rot1: &[OpTerm] = &[OpTerm::new(-1.0, Potential::Psi, 0, 1)];
        let rot2: &[OpTerm] = &[OpTerm::new(1.0, Potential::Psi, 1, 0)];
        let chi: &[OpTerm] = &[OpTerm::new(1.0, Potential::Chi, 0, 0)];

        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let mut max_mag: f64 = 0.0;
        for _ in 0..200 {
            let r = rng.random_range(0.2..3.0);
            let phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let h = Lag::new(r * phi.cos(), r * phi.sin());
            let eps = 1e-4;
            let v1 = |l: Lag| operator_cov(&p, chi, rot1, l).unwrap();
            let v2 = |l: Lag| operator_cov(&p, chi, rot2, l).unwrap();
            let div = (v1(Lag::new(h.h1 + eps, h.h2)) - v1(Lag::new(h.h1 - eps, h.h2)))
                / (2.0 * eps)
                + (v2(Lag::new(h.h1, h.h2 + eps)) - v2(Lag::new(h.h1, h.h2 - eps))) / (2.0 * eps);
            let mag = v1(h).hypot(v2(h));
            max_mag = max_mag.max(mag);
            assert!(
                div.abs() <= 1e-6 * mag.max(1e-3),
                "lag ({}, {}): div = {div:e}, mag = {mag:e}",
                h.h1,
                h.h2
            );
        }
        assert!(max_mag > 0.01 * p.sigma_psi() * p.sigma_chi());
    }

    #[test]
    fn joint_matrix_collocated_potentials_is_sigma() {
        let p = reference_params();
        let items = [
            (VariableId::Psi, [0.3, 0.4]),
            (VariableId::Chi, [0.3, 0.4]),
        ];
        let m = joint_matrix(&p, &items).unwrap();
        assert_relative_eq!(m[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(m[(0, 1)], 0.21, max_relative = 1e-14);
        assert_relative_eq!(m[(1, 0)], 0.21, max_relative = 1e-14);
        assert_relative_eq!(m[(1, 1)], 0.09, max_relative = 1e-14);
    }

    #[test]
    fn joint_wind_matrix_is_positive_definite() {
        let p = reference_params();
        let items = [
            (VariableId::U, [0.0, 0.0]),
            (VariableId::V, [0.0, 0.0]),
            (VariableId::U, [1.0, 1.0]),
            (VariableId::V, [1.0, 1.0]),
        ];
        let m = joint_matrix(&p, &items).unwrap();
        assert!(nalgebra::Cholesky::new(m).is_some());
    }

    #[test]
    fn full_six_variable_matrix_is_nearly_psd() {
        let p = ModelParams::new(2.0, 0.6, 0.7, 5.0, 0.9, 0.5, 0.8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut items = Vec::new();
        for _ in 0..5 {
            let loc = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            for v in VariableId::ALL {
                items.push((v, loc));
            }
        }
        let m = joint_matrix(&p, &items).unwrap();
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-8 * m.trace(), "min eigenvalue {min:e}");
    }

    #[test]
    fn smoothness_gating_names_the_block() {
        let p = ModelParams::isotropic(1.0, 1.0, 0.0, 2.0).unwrap();
        let err = aniso_block(&p, VariableId::Zeta, VariableId::Zeta, Lag::zero()).unwrap_err();
        match err {
            HgrfError::Smoothness { block, .. } => assert_eq!(block, "zeta"),
            other => panic!("expected smoothness error, got {other}"),
        }
        let p = ModelParams::isotropic(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(aniso_block(&p, VariableId::U, VariableId::Psi, Lag::zero()).is_err());
        // nu just above the gate works.
        let p = ModelParams::isotropic(1.0, 1.0, 0.0, 1.05).unwrap();
        assert!(aniso_block(&p, VariableId::U, VariableId::U, Lag::zero()).is_ok());
    }
}
