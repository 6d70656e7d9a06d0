//! Matern correlation function and its radial derivative ladder.
//!
//! The correlation is M(r, nu) = 2^(1-nu)/Gamma(nu) * r^nu * K_nu(r). All
//! covariance blocks of the six-variable field are built from the ladder
//! g_k = ((1/r) d/dr)^k M, which has the closed form
//! g_k(r) = (-1)^k * 2^(1-nu)/Gamma(nu) * r^(nu-k) * K_(nu-k)(r)
//! via the identity d/dr [r^m K_m(r)] = -r^m K_(m-1)(r). Nested numerical
//! differentiation is far too unstable at fourth order, so the ladder is
//! the only derivative path used by the library; finite differences appear
//! only as test oracles.

use crate::bessel::bessel_k;
use crate::error::{HgrfError, Result};

/// Largest supported ladder order.
pub const MAX_LADDER_ORDER: usize = 4;

/// Below this radius the ladder switches from the direct Bessel product to
/// the small-argument series of r^mu K_mu(r).
pub(crate) const SERIES_WINDOW: f64 = 1e-4;

/// Matern correlation M(r, nu).
///
/// Returns exactly 1 at r = 0; errors for r < 0 or nu <= 0.
pub fn matern(r: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !r.is_finite() || r < 0.0 {
        return Err(HgrfError::Domain(format!(
            "matern radius must be finite and nonnegative, got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    Ok(matern_norm(nu) * phi(nu, r))
}

/// k-fold application of (1/r d/dr) to the Matern correlation.
///
/// At r = 0 the limit (-1)^k 2^(-k) Gamma(nu-k)/Gamma(nu) is returned and
/// requires nu > k; below the series window the same requirement applies.
pub fn radial_ladder(r: f64, nu: f64, k: usize) -> Result<f64> {
    check_nu(nu)?;
    if !r.is_finite() || r < 0.0 {
        return Err(HgrfError::Domain(format!(
            "ladder radius must be finite and nonnegative, got {r}"
        )));
    }
    if k > MAX_LADDER_ORDER {
        return Err(HgrfError::UnsupportedOrder { order: k });
    }
    if r < SERIES_WINDOW && nu <= k as f64 {
        return Err(HgrfError::NonDifferentiable { order: k, nu });
    }
    if r == 0.0 {
        return Ok(ladder_origin(nu, k));
    }
    Ok(ladder_value(nu, r, k))
}

/// Matern correlation with a fixed smoothness parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternRadial {
    nu: f64,
}

impl MaternRadial {
    pub fn new(nu: f64) -> Result<Self> {
        check_nu(nu)?;
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Correlation M(r, nu).
    pub fn eval(&self, r: f64) -> Result<f64> {
        matern(r, self.nu)
    }

    /// Ladder value g_k(r).
    pub fn ladder(&self, r: f64, k: usize) -> Result<f64> {
        radial_ladder(r, self.nu, k)
    }
}

/// A single rung of the derivative ladder, g_k = ((1/r) d/dr)^k M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDerivLadder {
    radial: MaternRadial,
    order: usize,
}

impl RadialDerivLadder {
    pub fn new(nu: f64, order: usize) -> Result<Self> {
        if order > MAX_LADDER_ORDER {
            return Err(HgrfError::UnsupportedOrder { order });
        }
        Ok(Self {
            radial: MaternRadial::new(nu)?,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        self.radial.ladder(r, self.order)
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !nu.is_finite() || nu <= 0.0 {
        return Err(HgrfError::Domain(format!(
            "smoothness nu must be finite and positive, got {nu}"
        )));
    }
    Ok(())
}

/// 2^(1-nu)/Gamma(nu).
pub(crate) fn matern_norm(nu: f64) -> f64 {
    (1.0 - nu).exp2() / libm::tgamma(nu)
}

/// Ladder value at r > 0, any order, no origin gating.
pub(crate) fn ladder_value(nu: f64, r: f64, k: usize) -> f64 {
    debug_assert!(r > 0.0);
    let mu = nu - k as f64;
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let value = if mu >= 0.0 {
        phi(mu, r)
    } else {
        // r^mu K_|mu|(r) = phi(|mu|, r) * r^(2 mu)
        phi(-mu, r) * r.powf(2.0 * mu)
    };
    sign * matern_norm(nu) * value
}

/// All of g_0 .. g_kmax at r > 0.
pub(crate) fn ladder_all(nu: f64, r: f64, kmax: usize) -> [f64; MAX_LADDER_ORDER + 1] {
    debug_assert!(kmax <= MAX_LADDER_ORDER);
    let mut g = [0.0; MAX_LADDER_ORDER + 1];
    for (k, slot) in g.iter_mut().enumerate().take(kmax + 1) {
        *slot = ladder_value(nu, r, k);
    }
    g
}

/// Limit of g_k at r = 0; caller must ensure nu > k.
pub(crate) fn ladder_origin(nu: f64, k: usize) -> f64 {
    debug_assert!(nu > k as f64);
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (-(k as f64)).exp2() * libm::tgamma(nu - k as f64) / libm::tgamma(nu)
}

/// phi(mu, r) = r^mu K_mu(r) for mu >= 0, r > 0.
///
/// Inside the series window, non-integer orders use the small-argument
/// expansion of both I branches; near-integer orders fall back to the
/// Bessel product, which Temme's series evaluates accurately there.
fn phi(mu: f64, r: f64) -> f64 {
    debug_assert!(mu >= 0.0 && r > 0.0);
    if r >= SERIES_WINDOW || (mu - mu.round()).abs() < 1e-2 {
        return r.powf(mu) * bessel_k(mu, r);
    }
    let pi = std::f64::consts::PI;
    let q = r * r / 4.0;
    let mut s_minus = 0.0;
    let mut s_plus = 0.0;
    let mut q_pow = 1.0;
    let mut m_fact = 1.0;
    for m in 0..5 {
        if m > 0 {
            m_fact *= m as f64;
            q_pow *= q;
        }
        let c = q_pow / m_fact;
        s_minus += c / libm::tgamma(m as f64 + 1.0 - mu);
        s_plus += c / libm::tgamma(m as f64 + 1.0 + mu);
    }
    pi / (2.0 * (pi * mu).sin()) * (mu.exp2() * s_minus - (-mu).exp2() * r.powf(2.0 * mu) * s_plus)
}
