//! Physical parameters, the concentric-disk geometry and the stability
//! regime table.
//!
//! The plate occupies the annulus `r_interface < r < r_outer`, the membrane
//! the inner disk `r < r_interface`. On the interface circle the outward
//! normal of the plate domain points toward the center.

use std::fmt;

use crate::error::{Error, Result, Violation};

/// Material and damping constants of the plate-membrane model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Plate thermal capacity.
    pub rho0: f64,
    /// Plate mass density.
    pub rho1: f64,
    /// Membrane mass density.
    pub rho2: f64,
    /// Thermal conductivity.
    pub beta0: f64,
    /// Flexural rigidity.
    pub beta1: f64,
    /// Membrane tension.
    pub beta2: f64,
    /// Thermal coupling; zero means an isothermal plate.
    pub mu: f64,
    /// Rotational inertia.
    pub gamma: f64,
    /// Structural (Kelvin-Voigt type) damping of the plate.
    pub rho_damp: f64,
    /// Viscous damping of the membrane.
    pub m_damp: f64,
    /// Newton cooling constant on the outer boundary.
    pub kappa: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            rho1: 1.0,
            rho2: 1.0,
            beta0: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            mu: 1.0,
            gamma: 0.0,
            rho_damp: 0.0,
            m_damp: 0.0,
            kappa: 1.0,
        }
    }
}

impl PhysicalParams {
    /// Unit material constants with the given damping triple and coupling.
    pub fn unit(m_damp: f64, rho_damp: f64, gamma: f64, mu: f64) -> Self {
        Self { m_damp, rho_damp, gamma, mu, ..Self::default() }
    }
}

/// Concentric-disk geometry plus the reference point of the multiplier
/// `q(x) = x - x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusGeometry {
    pub r_interface: f64,
    pub r_outer: f64,
    pub x0: [f64; 2],
}

impl Default for AnnulusGeometry {
    fn default() -> Self {
        Self { r_interface: 1.0, r_outer: 2.0, x0: [0.0, 0.0] }
    }
}

/// Asymptotic behaviour predicted by the stability theorems for a
/// parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    /// Damped membrane and structural damping: exponential decay for any
    /// rotational inertia.
    ExponentialRhoDamped,
    /// Damped membrane, thin plate, no structural damping: the thermal
    /// coupling alone yields exponential decay.
    ExponentialThermalOnly,
    /// Damped membrane without structural damping where only strong
    /// stability (no imaginary spectrum) is established.
    StrongOnlyUnproven,
    /// Undamped membrane, structural damping, geometric condition holds.
    NotExponentialPolynomial,
    /// Undamped membrane without structural damping.
    NotExponentialNoRate,
    /// Undamped membrane, structural damping, geometric condition fails.
    NotExponentialGeometryFails,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 6] = [
        RegimeLabel::ExponentialRhoDamped,
        RegimeLabel::ExponentialThermalOnly,
        RegimeLabel::StrongOnlyUnproven,
        RegimeLabel::NotExponentialPolynomial,
        RegimeLabel::NotExponentialNoRate,
        RegimeLabel::NotExponentialGeometryFails,
    ];

    pub fn is_exponential(self) -> bool {
        matches!(self, Self::ExponentialRhoDamped | Self::ExponentialThermalOnly)
    }

    pub fn is_not_exponential(self) -> bool {
        matches!(
            self,
            Self::NotExponentialPolynomial | Self::NotExponentialNoRate | Self::NotExponentialGeometryFails
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExponentialRhoDamped => "ExponentialRhoDamped",
            Self::ExponentialThermalOnly => "ExponentialThermalOnly",
            Self::StrongOnlyUnproven => "StrongOnlyUnproven",
            Self::NotExponentialPolynomial => "NotExponentialPolynomial",
            Self::NotExponentialNoRate => "NotExponentialNoRate",
            Self::NotExponentialGeometryFails => "NotExponentialGeometryFails",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Checks every invariant of the parameter set and the geometry and
/// reports all violations at once.
pub fn validate_params(p: PhysicalParams, g: AnnulusGeometry) -> Result<(PhysicalParams, AnnulusGeometry)> {
    let mut bad = Vec::new();
    let positive = [
        ("rho0", p.rho0),
        ("rho1", p.rho1),
        ("rho2", p.rho2),
        ("beta0", p.beta0),
        ("beta1", p.beta1),
        ("beta2", p.beta2),
        ("kappa", p.kappa),
    ];
    for (field, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            bad.push(Violation { field, value, requirement: "must be finite and > 0" });
        }
    }
    let nonnegative = [("mu", p.mu), ("gamma", p.gamma), ("rho", p.rho_damp), ("m", p.m_damp)];
    for (field, value) in nonnegative {
        if !(value >= 0.0 && value.is_finite()) {
            bad.push(Violation { field, value, requirement: "must be finite and >= 0" });
        }
    }
    if !(g.r_interface > 0.0 && g.r_interface.is_finite()) {
        bad.push(Violation { field: "r_interface", value: g.r_interface, requirement: "must be finite and > 0" });
    }
    if !(g.r_outer.is_finite() && g.r_outer > g.r_interface) {
        bad.push(Violation {
            field: "geometry",
            value: g.r_outer,
            requirement: "r_outer must exceed r_interface",
        });
    }
    if !(g.x0[0].is_finite() && g.x0[1].is_finite()) {
        bad.push(Violation { field: "x0", value: f64::NAN, requirement: "must be finite" });
    }
    if bad.is_empty() {
        Ok((p, g))
    } else {
        Err(Error::InvalidParameters(bad))
    }
}

pub const DEFAULT_CONDITION_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricCondition {
    pub satisfied: bool,
    pub max_q_dot_nu: f64,
}

/// Samples `(x - x0) . nu` on the interface, `nu = -(cos t, sin t)` being
/// the outward normal of the plate domain there.
pub fn check_geometric_condition(g: &AnnulusGeometry, n_theta: usize) -> Result<GeometricCondition> {
    if n_theta < 8 {
        return Err(Error::InvalidArgument(format!("n_theta must be at least 8, got {n_theta}")));
    }
    let r = g.r_interface;
    let max = (0..n_theta)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64;
            let (s, c) = t.sin_cos();
            // (x - x0) . nu with x = r e_r, nu = -e_r.
            g.x0[0] * c + g.x0[1] * s - r
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GeometricCondition { satisfied: max <= 0.0, max_q_dot_nu: max })
}

/// Closed form of the sampled maximum: `|x0| - r_interface`.
pub fn analytic_max_q_dot_nu(g: &AnnulusGeometry) -> f64 {
    g.x0[0].hypot(g.x0[1]) - g.r_interface
}

pub fn classify_regime(p: &PhysicalParams, g: &AnnulusGeometry) -> RegimeLabel {
    let damped_membrane = p.m_damp > 0.0;
    let structural = p.rho_damp > 0.0;
    if damped_membrane {
        if structural {
            RegimeLabel::ExponentialRhoDamped
        } else if p.gamma == 0.0 && p.mu > 0.0 {
            RegimeLabel::ExponentialThermalOnly
        } else {
            RegimeLabel::StrongOnlyUnproven
        }
    } else if structural {
        // Equality counts as satisfied; use the closed form so the verdict
        // does not depend on where the angular samples fall.
        if analytic_max_q_dot_nu(g) <= 0.0 {
            RegimeLabel::NotExponentialPolynomial
        } else {
            RegimeLabel::NotExponentialGeometryFails
        }
    } else {
        RegimeLabel::NotExponentialNoRate
    }
}
