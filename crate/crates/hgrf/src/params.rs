//! Model parameters, variable identifiers and lag/anisotropy primitives.

use crate::error::{HgrfError, Result};

/// The six jointly modeled field variables.
///
/// `Zeta` is the Laplacian of the streamfunction (vorticity) and `Div` the
/// Laplacian of the velocity potential (divergence); the wind components are
/// u = -d(psi)/dy + d(chi)/dx and v = d(psi)/dx + d(chi)/dy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariableId {
    Psi,
    Chi,
    U,
    V,
    Zeta,
    Div,
}

impl VariableId {
    pub const ALL: [VariableId; 6] = [
        VariableId::Psi,
        VariableId::Chi,
        VariableId::U,
        VariableId::V,
        VariableId::Zeta,
        VariableId::Div,
    ];

    /// Differential order of the variable relative to the potentials.
    pub fn order(self) -> usize {
        match self {
            VariableId::Psi | VariableId::Chi => 0,
            VariableId::U | VariableId::V => 1,
            VariableId::Zeta | VariableId::Div => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VariableId::Psi => "psi",
            VariableId::Chi => "chi",
            VariableId::U => "u",
            VariableId::V => "v",
            VariableId::Zeta => "zeta",
            VariableId::Div => "div",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psi" => Ok(VariableId::Psi),
            "chi" => Ok(VariableId::Chi),
            "u" => Ok(VariableId::U),
            "v" => Ok(VariableId::V),
            "zeta" => Ok(VariableId::Zeta),
            "div" => Ok(VariableId::Div),
            other => Err(HgrfError::Domain(format!(
                "unknown variable '{other}' (expected psi, chi, u, v, zeta or div)"
            ))),
        }
    }
}

impl std::fmt::Display for VariableId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Spatial separation h = t - s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lag {
    pub h1: f64,
    pub h2: f64,
}

impl Lag {
    pub fn new(h1: f64, h2: f64) -> Self {
        Self { h1, h2 }
    }

    pub fn zero() -> Self {
        Self { h1: 0.0, h2: 0.0 }
    }

    pub fn norm(self) -> f64 {
        self.h1.hypot(self.h2)
    }
}

impl std::ops::Neg for Lag {
    type Output = Lag;

    fn neg(self) -> Lag {
        Lag {
            h1: -self.h1,
            h2: -self.h2,
        }
    }
}

/// The seven parameters of the bivariate Matern wind-field model.
///
/// `sigma_psi`/`sigma_chi` are the potential standard deviations, `rho`
/// their cross-correlation, `nu` the Matern smoothness, `r1`/`r2` inverse
/// scale factors and `theta` the anisotropy angle (reduced modulo pi; the
/// correlation only depends on theta through the matrix A^T A, which is
/// pi-periodic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    sigma_psi: f64,
    sigma_chi: f64,
    rho: f64,
    nu: f64,
    r1: f64,
    r2: f64,
    theta: f64,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma_psi: f64,
        sigma_chi: f64,
        rho: f64,
        nu: f64,
        r1: f64,
        r2: f64,
        theta: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("sigma_psi", sigma_psi),
            ("sigma_chi", sigma_chi),
            ("rho", rho),
            ("nu", nu),
            ("r1", r1),
            ("r2", r2),
            ("theta", theta),
        ] {
            if !v.is_finite() {
                return Err(HgrfError::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if sigma_psi <= 0.0 {
            return Err(HgrfError::Domain(format!(
                "sigma_psi must be positive, got {sigma_psi}"
            )));
        }
        if sigma_chi < 0.0 {
            return Err(HgrfError::Domain(format!(
                "sigma_chi must be nonnegative, got {sigma_chi}"
            )));
        }
        if rho.abs() > 1.0 {
            return Err(HgrfError::Domain(format!("|rho| must be <= 1, got {rho}")));
        }
        if nu <= 0.0 {
            return Err(HgrfError::Domain(format!("nu must be positive, got {nu}")));
        }
        if r1 <= 0.0 || r2 <= 0.0 {
            return Err(HgrfError::Domain(format!(
                "scale factors must be positive, got r1={r1}, r2={r2}"
            )));
        }
        Ok(Self {
            sigma_psi,
            sigma_chi,
            rho,
            nu,
            r1,
            r2,
            theta: wrap_angle(theta),
        })
    }

    /// Isotropic shorthand: r1 = r2 = 1, theta = 0.
    pub fn isotropic(sigma_psi: f64, sigma_chi: f64, rho: f64, nu: f64) -> Result<Self> {
        Self::new(sigma_psi, sigma_chi, rho, nu, 1.0, 1.0, 0.0)
    }

    pub fn sigma_psi(&self) -> f64 {
        self.sigma_psi
    }

    pub fn sigma_chi(&self) -> f64 {
        self.sigma_chi
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Ratio sigma_chi / sigma_psi of divergent to rotational amplitude.
    pub fn lambda(&self) -> f64 {
        self.sigma_chi / self.sigma_psi
    }

    pub fn anisotropy(&self) -> AnisotropyMatrix {
        AnisotropyMatrix::new(self.r1, self.r2, self.theta)
    }

    /// True when the anisotropy transform is the identity.
    pub fn is_unit_isotropic(&self) -> bool {
        self.r1 == 1.0 && self.r2 == 1.0 && self.theta == 0.0
    }

    /// Returns the parameters with both sigmas multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.sigma_psi * factor,
            self.sigma_chi * factor,
            self.rho,
            self.nu,
            self.r1,
            self.r2,
            self.theta,
        )
    }
}

/// Reduce an angle to [0, pi).
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut t = theta % pi;
    if t < 0.0 {
        t += pi;
    }
    // -1e-18 % pi rounds to pi itself
    if t >= pi {
        t -= pi;
    }
    t
}

/// Geometric anisotropy matrix A = [[r1 cos t, r1 sin t], [-r2 sin t, r2 cos t]].
///
/// When r1 = r2 = 1 this is a rotation. The quarter-turn rotation used to
/// express the rotational wind part lives here as [`AnisotropyMatrix::QUARTER_TURN`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyMatrix {
    entries: [[f64; 2]; 2],
}

impl AnisotropyMatrix {
    /// R = [[0, -1], [1, 0]], the quarter-turn used by the curl operator.
    pub const QUARTER_TURN: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

    pub fn new(r1: f64, r2: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            entries: [[r1 * c, r1 * s], [-r2 * s, r2 * c]],
        }
    }

    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn entries(&self) -> &[[f64; 2]; 2] {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.entries == [[1.0, 0.0], [0.0, 1.0]]
    }

    pub fn det(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    /// w = A h.
    pub fn apply(&self, h: Lag) -> [f64; 2] {
        [
            self.entries[0][0] * h.h1 + self.entries[0][1] * h.h2,
            self.entries[1][0] * h.h1 + self.entries[1][1] * h.h2,
        ]
    }
}
