//! Physical constants and endpoint quantities of the separation protocol.
//!
//! Everything is SI double precision. The two ions sit in the external potential
//! α(t)q² + β(t)q⁴ and repel through C_c/(q₁ − q₂); their equilibrium separation `d`
//! solves βd⁵ + 2αd³ − 2C_c = 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J·s), CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m), CODATA 2018.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Unified atomic mass unit (kg), CODATA 2018.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// C_c = e²/(4πε₀) in J·m.
pub fn coulomb_constant() -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY)
}

/// 2 MHz read as an ordinary frequency: ω₀ = 2π × 2×10⁶ rad/s.
pub const DEFAULT_OMEGA0: f64 = 2.0 * std::f64::consts::PI * 2.0e6;
/// 2 MHz read as an angular frequency.
pub const LITERAL_OMEGA0: f64 = 2.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// kg
    pub ion_mass: f64,
    /// Quadratic trap coefficient at t = 0 (J/m²).
    pub alpha0: f64,
    /// Reference angular frequency (rad/s); alpha0 = m·omega0²/2.
    pub omega0: f64,
    /// Quadratic trap coefficient at t_f (J/m²).
    pub alpha_final: f64,
    /// d(t_f)/d(0).
    pub distance_ratio: f64,
    /// Protocol duration (s).
    pub t_final: f64,
    /// C_c (J·m).
    pub coulomb_const: f64,
}

impl PhysicalConfig {
    /// Builds a config from the reference frequency; `alpha_final_ratio` is α(t_f)/α(0).
    pub fn new(
        ion_mass: f64,
        omega0: f64,
        alpha_final_ratio: f64,
        distance_ratio: f64,
        t_final: f64,
    ) -> Self {
        let alpha0 = 0.5 * ion_mass * omega0 * omega0;
        Self {
            ion_mass,
            alpha0,
            omega0,
            alpha_final: alpha_final_ratio * alpha0,
            distance_ratio,
            t_final,
            coulomb_const: coulomb_constant(),
        }
    }

    /// Two ⁹Be ions, ω₀ = 2π·2 MHz, α(t_f) = −α(0)/2, d(t_f) = 10·d(0).
    pub fn beryllium_pair(t_final: f64) -> Self {
        Self::beryllium_pair_at(DEFAULT_OMEGA0, t_final)
    }

    /// Same pair with another reference frequency, e.g. [`LITERAL_OMEGA0`].
    pub fn beryllium_pair_at(omega0: f64, t_final: f64) -> Self {
        Self::new(9.0 * ATOMIC_MASS_UNIT, omega0, -0.5, 10.0, t_final)
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    /// ħω₀ in joules, the natural energy unit for reporting.
    pub fn hbar_omega0(&self) -> f64 {
        HBAR * self.omega0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ion_mass", self.ion_mass),
            ("alpha0", self.alpha0),
            ("omega0", self.omega0),
            ("coulomb_const", self.coulomb_const),
            ("t_final", self.t_final),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !self.alpha_final.is_finite() {
            return Err(Error::InvalidConfig("alpha_final must be finite".into()));
        }
        if !(self.distance_ratio.is_finite() && self.distance_ratio > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "distance_ratio must exceed 1, got {}",
                self.distance_ratio
            )));
        }
        let expected = 0.5 * self.ion_mass * self.omega0 * self.omega0;
        if ((self.alpha0 - expected) / expected).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "alpha0 = {} does not match m·omega0²/2 = {expected}",
                self.alpha0
            )));
        }
        Ok(())
    }
}

/// Squared normal-mode frequencies (Ω₋², Ω₊²) of the pair at separation `d`.
///
/// Ω₋ is the in-phase (centre-of-mass) mode, Ω₊ the stretch mode.
pub fn mode_frequencies_sq(alpha: f64, beta: f64, d: f64, mass: f64, coulomb: f64) -> (f64, f64) {
    let minus = (2.0 * alpha + 3.0 * beta * d * d) / mass;
    let plus = minus + 4.0 * coulomb / (mass * d * d * d);
    (minus, plus)
}

/// βd⁵ + 2αd³ − 2C_c.
pub fn quintic_residual(alpha: f64, beta: f64, d: f64, coulomb: f64) -> f64 {
    let d3 = d * d * d;
    beta * d3 * d * d + 2.0 * alpha * d3 - 2.0 * coulomb
}

/// The equilibrium separation for trap coefficients (α, β): the smallest positive
/// root of the quintic.
///
/// `guess` seeds the bracket search; any positive value works, a nearby one is faster.
pub fn solve_quintic(alpha: f64, beta: f64, coulomb: f64, guess: f64) -> Result<f64> {
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::NonPhysical("non-finite trap coefficients".into()));
    }
    if beta == 0.0 {
        if alpha > 0.0 {
            return Ok((coulomb / alpha).cbrt());
        }
        return Err(Error::NonPhysical(format!("alpha = {alpha} with beta = 0 has no equilibrium")));
    }
    let f = |d: f64| quintic_residual(alpha, beta, d, coulomb);
    let mut hi = if guess.is_finite() && guess > 0.0 { guess } else { (coulomb / alpha.abs()).cbrt() };
    let mut lo = hi;
    // f(0) = −2C_c < 0, so walk `lo` down until negative and `hi` up until positive.
    let mut steps = 0;
    while f(lo) >= 0.0 {
        lo *= 0.8;
        steps += 1;
        if steps > 400 {
            return Err(Error::NonPhysical("quintic bracket failed below guess".into()));
        }
    }
    steps = 0;
    while f(hi) <= 0.0 {
        hi *= 1.25;
        steps += 1;
        if steps > 400 {
            return Err(Error::NonPhysical(format!(
                "quintic with alpha = {alpha:e}, beta = {beta:e} has no positive root"
            )));
        }
    }
    let scale = |d: f64| (beta * d.powi(5)).abs() + (2.0 * alpha * d.powi(3)).abs() + 2.0 * coulomb;
    let mut d = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fd = f(d);
        if fd.abs() <= 1e-15 * scale(d) {
            return Ok(d);
        }
        if fd < 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
        let d2 = d * d;
        let slope = 5.0 * beta * d2 * d2 + 6.0 * alpha * d2;
        let newton = d - fd / slope;
        d = if slope != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(d)
}

/// Trap geometry and mode frequencies at both ends of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub d0: f64,
    pub d_final: f64,
    pub beta_final: f64,
    pub omega_minus_0: f64,
    pub omega_plus_0: f64,
    pub omega_minus_f: f64,
    pub omega_plus_f: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
}

impl Endpoints {
    /// Endpoints of a protocol that leaves the initial trap untouched (γ± = 1).
    pub fn stationary(config: &PhysicalConfig) -> Self {
        let d0 = (config.coulomb_const / config.alpha0).cbrt();
        let (wm2, wp2) = mode_frequencies_sq(config.alpha0, 0.0, d0, config.ion_mass, config.coulomb_const);
        Self {
            d0,
            d_final: d0,
            beta_final: 0.0,
            omega_minus_0: wm2.sqrt(),
            omega_plus_0: wp2.sqrt(),
            omega_minus_f: wm2.sqrt(),
            omega_plus_f: wp2.sqrt(),
            gamma_minus: 1.0,
            gamma_plus: 1.0,
        }
    }

    /// Final-trap ground energy ħ(Ω₋(t_f) + Ω₊(t_f))/2 of the normal modes.
    pub fn final_ground_energy(&self) -> f64 {
        0.5 * HBAR * (self.omega_minus_f + self.omega_plus_f)
    }
}

pub fn derive_endpoints(config: &PhysicalConfig) -> Result<Endpoints> {
    config.validate()?;
    let m = config.ion_mass;
    let cc = config.coulomb_const;

    let d0 = (cc / config.alpha0).cbrt();
    let d_final = config.distance_ratio * d0;
    let df3 = d_final * d_final * d_final;
    let beta_final = (2.0 * cc - 2.0 * config.alpha_final * df3) / (df3 * d_final * d_final);
    if !(beta_final > 0.0) {
        return Err(Error::NonPhysicalEndpoint(format!("beta_final = {beta_final:e} must be positive")));
    }

    let (wm0, wp0) = mode_frequencies_sq(config.alpha0, 0.0, d0, m, cc);
    let (wmf, wpf) = mode_frequencies_sq(config.alpha_final, beta_final, d_final, m, cc);
    for (name, w2) in [("Ω₋(0)²", wm0), ("Ω₊(0)²", wp0), ("Ω₋(t_f)²", wmf), ("Ω₊(t_f)²", wpf)] {
        if !(w2 > 0.0) {
            return Err(Error::NonPhysicalEndpoint(format!("{name} = {w2:e} must be positive")));
        }
    }
    let (omega_minus_0, omega_plus_0) = (wm0.sqrt(), wp0.sqrt());
    let (omega_minus_f, omega_plus_f) = (wmf.sqrt(), wpf.sqrt());
    Ok(Endpoints {
        d0,
        d_final,
        beta_final,
        omega_minus_0,
        omega_plus_0,
        omega_minus_f,
        omega_plus_f,
        gamma_minus: (omega_minus_0 / omega_minus_f).sqrt(),
        gamma_plus: (omega_plus_0 / omega_plus_f).sqrt(),
    })
}
