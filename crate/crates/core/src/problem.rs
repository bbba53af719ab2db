//! Problem description: the damping coefficient `c(t,x) = a0 <x>^{-alpha} (1+t)^{-beta}`,
//! the radial initial-data family, and closed-form exponent calculators.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::RadialQuadrature;
use crate::smoothstep::{self, Jet};

/// Japanese bracket `<r> = sqrt(1 + r^2)`.
#[inline]
pub fn bracket(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

/// Damping coefficient parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingSpec {
    pub a0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DampingSpec {
    pub fn new(a0: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(invalid("a0", format!("must be positive and finite, got {a0}")));
        }
        if !alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        if !(beta.is_finite() && beta > -1.0) {
            return Err(invalid("beta", format!("must exceed -1, got {beta}")));
        }
        Ok(Self { a0, alpha, beta })
    }

    /// Spatial factor `a(x) = a0 <x>^{-alpha}`.
    #[inline]
    pub fn spatial(&self, r: f64) -> f64 {
        self.a0 * (1.0 + r * r).powf(-0.5 * self.alpha)
    }

    /// Temporal factor `b(t) = (1+t)^{-beta}`.
    #[inline]
    pub fn temporal(&self, t: f64) -> f64 {
        (1.0 + t).powf(-self.beta)
    }

    #[inline]
    pub fn coefficient(&self, t: f64, r: f64) -> f64 {
        self.spatial(r) * self.temporal(t)
    }

    /// `B(t) = (1+t)^{1+beta} / (1+beta)`, the primitive of `1/b` shifted so `B(0) = 1/(1+beta)`.
    pub fn time_scale(&self, t: f64) -> f64 {
        (1.0 + t).powf(1.0 + self.beta) / (1.0 + self.beta)
    }

    pub fn beta_plus(&self) -> f64 {
        self.beta.max(0.0)
    }
}

/// `c(t, r)` for `t >= 0`, `r >= 0`.
pub fn damping_coefficient(spec: &DampingSpec, t: f64, r: f64) -> f64 {
    spec.coefficient(t, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    Zero,
    /// `exp(1 - 1/(1 - s^2))` on `s = r/R < 1`.
    Bump,
    /// `(1 + cos(pi s)) / 2` on `s < 1`.
    RaisedCosine,
    /// Flat on `s <= 1/2`, quintic descent to zero at `s = 1`.
    QuinticPlateau,
}

impl ProfileShape {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileShape::Zero => "zero",
            ProfileShape::Bump => "bump",
            ProfileShape::RaisedCosine => "raised_cosine",
            ProfileShape::QuinticPlateau => "quintic_plateau",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(ProfileShape::Zero),
            "bump" => Some(ProfileShape::Bump),
            "raised_cosine" => Some(ProfileShape::RaisedCosine),
            "quintic_plateau" => Some(ProfileShape::QuinticPlateau),
            _ => None,
        }
    }
}

/// A compactly supported radial profile `amplitude * shape(r / radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub shape: ProfileShape,
    pub amplitude: f64,
    pub radius: f64,
}

impl Profile {
    pub const ZERO: Profile = Profile {
        shape: ProfileShape::Zero,
        amplitude: 0.0,
        radius: 1.0,
    };

    pub fn new(shape: ProfileShape, amplitude: f64, radius: f64) -> Self {
        Self {
            shape,
            amplitude,
            radius,
        }
    }

    pub fn bump(amplitude: f64, radius: f64) -> Self {
        Self::new(ProfileShape::Bump, amplitude, radius)
    }

    pub fn is_zero(&self) -> bool {
        self.shape == ProfileShape::Zero || self.amplitude == 0.0
    }

    /// Value with first and second radial derivatives.
    pub fn jet(&self, r: f64) -> Jet {
        if self.is_zero() {
            return Jet::ZERO;
        }
        let rad = self.radius;
        let s = r / rad;
        if s >= 1.0 {
            return Jet::ZERO;
        }
        let j = match self.shape {
            ProfileShape::Zero => Jet::ZERO,
            ProfileShape::Bump => {
                let q = 1.0 - s * s;
                let g = (1.0 - 1.0 / q).exp();
                // derivatives in s
                let dq = -2.0 * s;
                let ddq = -2.0;
                let dphi = dq / (q * q);
                let ddphi = ddq / (q * q) - 2.0 * dq * dq / (q * q * q);
                Jet {
                    value: g,
                    d1: g * dphi,
                    d2: g * (dphi * dphi + ddphi),
                }
            }
            ProfileShape::RaisedCosine => {
                let pi = std::f64::consts::PI;
                Jet {
                    value: 0.5 * (1.0 + (pi * s).cos()),
                    d1: -0.5 * pi * (pi * s).sin(),
                    d2: -0.5 * pi * pi * (pi * s).cos(),
                }
            }
            ProfileShape::QuinticPlateau => {
                let w = smoothstep::descending(2.0 * s - 1.0);
                Jet {
                    value: w.value,
                    d1: 2.0 * w.d1,
                    d2: 4.0 * w.d2,
                }
            }
        };
        Jet {
            value: self.amplitude * j.value,
            d1: self.amplitude * j.d1 / rad,
            d2: self.amplitude * j.d2 / (rad * rad),
        }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        self.jet(r).value
    }

    /// Radial Laplacian `u'' + (N-1) u'/r`, with `N u''(0)` at the origin.
    pub fn laplacian(&self, r: f64, dim: usize) -> f64 {
        let j = self.jet(r);
        if r == 0.0 {
            dim as f64 * j.d2
        } else {
            j.d2 + (dim as f64 - 1.0) * j.d1 / r
        }
    }
}

/// Dimension, nonlinearity, data amplitude and radial initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dim: usize,
    pub p: f64,
    pub epsilon: f64,
    pub u0: Profile,
    pub u1: Profile,
    pub r0: f64,
}

impl ProblemSpec {
    pub fn new(dim: usize, p: f64, epsilon: f64, u0: Profile, u1: Profile, r0: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must exceed 1, got {p}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be non-negative, got {epsilon}")));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(invalid("r0", format!("must be positive, got {r0}")));
        }
        for (name, prof) in [("u0", &u0), ("u1", &u1)] {
            if !prof.is_zero() && !(prof.radius > 0.0 && prof.radius <= r0) {
                return Err(invalid(
                    if name == "u0" { "u0_radius" } else { "u1_radius" },
                    format!("profile radius {} must lie in (0, r0 = {r0}]", prof.radius),
                ));
            }
        }
        if dim >= 3 {
            let local_max = dim as f64 / (dim as f64 - 2.0);
            if p > local_max {
                log::warn!(
                    "p = {p} exceeds the local-existence bound N/(N-2) = {local_max} for N = {dim}"
                );
            }
        }
        Ok(Self {
            dim,
            p,
            epsilon,
            u0,
            u1,
            r0,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// `p_c = 1 + 2/(N - alpha)`.
pub fn critical_exponent(dim: usize, alpha: f64) -> Result<f64> {
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let denom = dim as f64 - alpha;
    if denom <= 0.0 {
        return Err(invalid("alpha", format!("must be below N = {dim}, got {alpha}")));
    }
    Ok(1.0 + 2.0 / denom)
}

/// Upper-bound lifespan scaling as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum LifespanBound {
    /// `T(eps) <~ eps^{-kappa}`.
    Subcritical { kappa: f64 },
    /// `T(eps) <~ exp(C eps^{-exponent})`.
    Critical { exponent: f64 },
}

impl LifespanBound {
    /// Predicted slope of `log T` (subcritical) or `log log T` (critical) against `log eps`.
    pub fn is_critical(&self) -> bool {
        matches!(self, LifespanBound::Critical { .. })
    }

    pub fn target_slope(&self) -> f64 {
        match *self {
            LifespanBound::Subcritical { kappa } => -kappa,
            LifespanBound::Critical { exponent } => -exponent,
        }
    }
}

const CRITICAL_REL_TOL: f64 = 1e-12;

pub fn is_critical(p: f64, p_c: f64) -> bool {
    (p - p_c).abs() <= CRITICAL_REL_TOL * p_c
}

pub fn lifespan_exponent(spec: &DampingSpec, prob: &ProblemSpec) -> Result<LifespanBound> {
    lifespan_exponent_for(prob.dim, prob.p, spec.alpha, spec.beta)
}

pub fn lifespan_exponent_for(dim: usize, p: f64, alpha: f64, beta: f64) -> Result<LifespanBound> {
    let p_c = critical_exponent(dim, alpha)?;
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    if is_critical(p, p_c) {
        return Ok(LifespanBound::Critical { exponent: p - 1.0 });
    }
    if p > p_c {
        return Err(Error::Supercritical { p, p_c });
    }
    let gap = 1.0 / (p - 1.0) - (dim as f64 - alpha) / 2.0;
    let kappa = (2.0 - alpha) / (2.0 * (1.0 + beta)) / gap;
    Ok(LifespanBound::Subcritical { kappa })
}

/// Nodes used when no solver grid is supplied.
pub const DEFAULT_MASS_NODES: usize = 4097;

/// `int (u1 + (a0 <x>^{-alpha} - beta) u0) dx` over `R^N` by radial Simpson on `[0, r0]`.
///
/// The data amplitude `epsilon` is not applied.
pub fn initial_mass_functional(spec: &DampingSpec, prob: &ProblemSpec) -> f64 {
    initial_mass_functional_on(spec, prob, prob.r0 / (DEFAULT_MASS_NODES - 1) as f64)
}

/// As [`initial_mass_functional`] with radial step `dr` (the solver grid spacing).
pub fn initial_mass_functional_on(spec: &DampingSpec, prob: &ProblemSpec, dr: f64) -> f64 {
    let intervals = (prob.r0 / dr).ceil().max(2.0) as usize;
    let quad = RadialQuadrature::uniform(prob.dim, intervals as f64 * dr, intervals + 1);
    quad.integrate(|r| prob.u1.value(r) + (spec.spatial(r) - spec.beta) * prob.u0.value(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coefficient_examples() {
        let s = DampingSpec::new(1.0, 0.7, -0.3).unwrap();
        assert_eq!(damping_coefficient(&s, 0.0, 0.0), 1.0);
        let s = DampingSpec::new(2.0, -2.0, 1.0).unwrap();
        assert_relative_eq!(damping_coefficient(&s, 1.0, 3f64.sqrt()), 4.0, epsilon = 1e-14);
        let s = DampingSpec::new(1.0, -1.0, 0.0).unwrap();
        assert_eq!(damping_coefficient(&s, 17.0, 0.0), 1.0);
    }

    #[test]
    fn rejects_bad_damping() {
        assert!(DampingSpec::new(0.0, -1.0, 0.0).is_err());
        assert!(DampingSpec::new(1.0, -1.0, -1.0).is_err());
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(1, 0.0).unwrap(), 3.0);
        assert_eq!(critical_exponent(3, -1.0).unwrap(), 1.5);
        assert_eq!(critical_exponent(2, 0.0).unwrap(), 2.0);
        assert!(critical_exponent(2, 2.0).is_err());
        assert!(critical_exponent(2, 3.0).is_err());
    }

    #[test]
    fn lifespan_examples() {
        assert_eq!(
            lifespan_exponent_for(1, 1.5, -1.0, 0.0).unwrap(),
            LifespanBound::Subcritical { kappa: 1.5 }
        );
        assert_eq!(
            lifespan_exponent_for(1, 2.0, -1.0, 1.0).unwrap(),
            LifespanBound::Critical { exponent: 1.0 }
        );
        assert_eq!(
            lifespan_exponent_for(2, 2.0, 0.0, 0.0).unwrap(),
            LifespanBound::Critical { exponent: 1.0 }
        );
        assert!(matches!(
            lifespan_exponent_for(1, 3.0, -1.0, 0.0),
            Err(Error::Supercritical { .. })
        ));
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let prof = Profile::bump(1.3, 2.0);
        let h = 1e-5;
        for &r in &[0.0, 0.4, 1.1, 1.7, 1.95] {
            let j = prof.jet(r);
            let lo = prof.value((r - h).abs());
            let hi = prof.value(r + h);
            assert_relative_eq!(j.d1, (hi - lo) / (2.0 * h), epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!(j.d2, (hi - 2.0 * j.value + lo) / (h * h), epsilon = 1e-4, max_relative = 1e-4);
        }
    }

    #[test]
    fn profiles_vanish_outside_support() {
        for shape in [ProfileShape::Bump, ProfileShape::RaisedCosine, ProfileShape::QuinticPlateau] {
            let prof = Profile::new(shape, 2.0, 1.5);
            assert_eq!(prof.jet(1.5), Jet::ZERO);
            assert_eq!(prof.jet(7.0), Jet::ZERO);
            assert!(prof.value(0.0) > 0.0);
        }
    }

    #[test]
    fn mass_of_velocity_only_data() {
        // u1 = c * raised cosine on [0, 1] in N = 1; integral over R is c * 1.
        let spec = DampingSpec::new(1.0, -1.0, 0.0).unwrap();
        let u1 = Profile::new(ProfileShape::RaisedCosine, 1.0, 1.0);
        let prob = ProblemSpec::new(1, 2.0, 1.0, Profile::ZERO, u1, 1.0).unwrap();
        assert_relative_eq!(initial_mass_functional(&spec, &prob), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mass_positive_for_position_only_data() {
        let spec = DampingSpec::new(0.5, -1.5, 0.0).unwrap();
        let prob = ProblemSpec::new(3, 1.2, 1.0, Profile::bump(1.0, 1.0), Profile::ZERO, 1.0).unwrap();
        assert!(initial_mass_functional(&spec, &prob) > 0.0);
    }
}
