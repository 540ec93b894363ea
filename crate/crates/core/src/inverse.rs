//! Inverse engineering: from scaling functions ρ± to mode frequencies, ion separation,
//! lab controls, and the forced stretch-mode oscillation.

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzParams, PolyEval, Scaling};
use crate::error::{Error, Result};
use crate::model::{self, Endpoints, PhysicalConfig};

pub const DEFAULT_SAMPLES: usize = 2001;

/// Ω² = Ω₀²/ρ⁴ − ρ̈/ρ, solving the Ermakov equation for the frequency. `rho` carries
/// s-derivatives, converted here with 1/t_f².
pub fn ermakov_invert(rho: &PolyEval, omega0: f64, t_f: f64) -> Result<f64> {
    if !(rho.value > 0.0) {
        return Err(Error::NonPhysical(format!("rho = {} is not positive", rho.value)));
    }
    let r2 = rho.value * rho.value;
    Ok(omega0 * omega0 / (r2 * r2) - rho.d2 / (t_f * t_f * rho.value))
}

/// Squared frequency and its first two time derivatives for one mode.
#[inline]
fn omega2_with_rates(rho: &PolyEval, omega0_sq: f64, t_f: f64) -> [f64; 3] {
    let inv_t = 1.0 / t_f;
    let r = rho.value;
    let r1 = rho.d1 * inv_t;
    let r2 = rho.d2 * inv_t * inv_t;
    let r3 = rho.d3 * inv_t * inv_t * inv_t;
    let r4 = rho.d4 * inv_t * inv_t * inv_t * inv_t;
    let ir = 1.0 / r;
    let ir2 = ir * ir;
    let ir4 = ir2 * ir2;
    let w = omega0_sq * ir4;
    let value = w - r2 * ir;
    let rate = -4.0 * w * r1 * ir - (r3 * ir - r2 * r1 * ir2);
    let accel = 20.0 * w * r1 * r1 * ir2 - 4.0 * w * r2 * ir
        - (r4 * ir - 2.0 * r3 * r1 * ir2 - r2 * r2 * ir2 + 2.0 * r2 * r1 * r1 * ir2 * ir);
    [value, rate, accel]
}

#[derive(Debug, Clone, Copy)]
struct Kinematics {
    rho_minus: PolyEval,
    rho_plus: PolyEval,
    omega2_minus: f64,
    omega2_plus: f64,
    d: f64,
    d_ddot: f64,
}

/// Everything needed to evaluate the protocol at an arbitrary time.
struct Protocol {
    minus: Scaling,
    plus: Scaling,
    t_final: f64,
    omega0_minus_sq: f64,
    omega0_plus_sq: f64,
    // (4 C_c / m)^(1/3)
    d_scale: f64,
}

impl Protocol {
    fn new(config: &PhysicalConfig, endpoints: &Endpoints, params: &AnsatzParams) -> Self {
        Self {
            minus: Scaling::rho_minus(params.gamma_minus),
            plus: Scaling::rho_plus(params),
            t_final: config.t_final,
            omega0_minus_sq: endpoints.omega_minus_0 * endpoints.omega_minus_0,
            omega0_plus_sq: endpoints.omega_plus_0 * endpoints.omega_plus_0,
            d_scale: (4.0 * config.coulomb_const / config.ion_mass).cbrt(),
        }
    }

    #[inline]
    fn at(&self, s: f64) -> Result<Kinematics> {
        let rho_minus = self.minus.eval(s);
        let rho_plus = self.plus.eval(s);
        if !(rho_minus.value > 0.0 && rho_plus.value > 0.0) {
            return Err(Error::NonPhysical(format!(
                "rho passes through zero at s = {s:.4} (rho- = {:e}, rho+ = {:e})",
                rho_minus.value, rho_plus.value
            )));
        }
        let [wm, wm1, wm2] = omega2_with_rates(&rho_minus, self.omega0_minus_sq, self.t_final);
        let [wp, wp1, wp2] = omega2_with_rates(&rho_plus, self.omega0_plus_sq, self.t_final);
        let gap = wp - wm;
        if !(gap > 0.0) || !gap.is_finite() {
            return Err(Error::NonPhysical(format!(
                "Omega+^2 - Omega-^2 = {gap:e} at s = {s:.4}: no real positive separation"
            )));
        }
        let rate = (wp1 - wm1) / gap;
        let accel = (wp2 - wm2) / gap;
        let d = self.d_scale / gap.cbrt();
        let d_ddot = d * (4.0 / 9.0 * rate * rate - accel / 3.0);
        Ok(Kinematics { rho_minus, rho_plus, omega2_minus: wm, omega2_plus: wp, d, d_ddot })
    }
}

/// Time-sampled mode dynamics of one protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrajectory {
    pub t_final: f64,
    pub ion_mass: f64,
    pub params: AnsatzParams,
    pub omega0_minus: f64,
    pub omega0_plus: f64,
    pub grid: Vec<f64>,
    pub rho_minus: Vec<PolyEval>,
    pub rho_plus: Vec<PolyEval>,
    pub omega2_minus: Vec<f64>,
    pub omega2_plus: Vec<f64>,
    pub d: Vec<f64>,
    pub d_ddot: Vec<f64>,
    /// Stretch-mode displacement in mass-weighted coordinates (√kg·m).
    pub x_plus: Vec<f64>,
    pub x_plus_dot: Vec<f64>,
    /// Richardson estimate of the RK4 error in x₊(t_f), when the grid allows halving.
    pub x_plus_error: Option<f64>,
}

impl ModeTrajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn last(&self) -> usize {
        self.grid.len() - 1
    }
}

/// Builds ρ±, Ω±², d, d̈ on a uniform grid and integrates
/// ẍ₊ + Ω₊²x₊ = −√(m/2)·d̈ from rest with classical RK4.
pub fn build_trajectory(
    config: &PhysicalConfig,
    endpoints: &Endpoints,
    params: &AnsatzParams,
    n_samples: usize,
) -> Result<ModeTrajectory> {
    if n_samples < 2 {
        return Err(Error::InvalidConfig(format!("n_samples = {n_samples} must be at least 2")));
    }
    if !params.is_finite() {
        return Err(Error::NonPhysical("non-finite ansatz parameters".into()));
    }
    let protocol = Protocol::new(config, endpoints, params);
    let t_f = config.t_final;
    let steps = n_samples - 1;
    let h = t_f / steps as f64;
    let force_scale = -(0.5 * config.ion_mass).sqrt();

    let mut traj = ModeTrajectory {
        t_final: t_f,
        ion_mass: config.ion_mass,
        params: *params,
        omega0_minus: endpoints.omega_minus_0,
        omega0_plus: endpoints.omega_plus_0,
        grid: Vec::with_capacity(n_samples),
        rho_minus: Vec::with_capacity(n_samples),
        rho_plus: Vec::with_capacity(n_samples),
        omega2_minus: Vec::with_capacity(n_samples),
        omega2_plus: Vec::with_capacity(n_samples),
        d: Vec::with_capacity(n_samples),
        d_ddot: Vec::with_capacity(n_samples),
        x_plus: Vec::with_capacity(n_samples),
        x_plus_dot: Vec::with_capacity(n_samples),
        x_plus_error: None,
    };

    let push = |traj: &mut ModeTrajectory, k: usize, kin: &Kinematics| {
        traj.grid.push(k as f64 * h);
        traj.rho_minus.push(kin.rho_minus);
        traj.rho_plus.push(kin.rho_plus);
        traj.omega2_minus.push(kin.omega2_minus);
        traj.omega2_plus.push(kin.omega2_plus);
        traj.d.push(kin.d);
        traj.d_ddot.push(kin.d_ddot);
    };

    let mut node = protocol.at(0.0)?;
    push(&mut traj, 0, &node);
    let (mut x, mut v) = (0.0_f64, 0.0_f64);
    traj.x_plus.push(x);
    traj.x_plus_dot.push(v);
    // midpoint stiffness/forcing, kept for the Richardson pass
    let mut mids = Vec::with_capacity(steps);
    for k in 0..steps {
        let s_mid = (k as f64 + 0.5) / steps as f64;
        let s_next = if k + 1 == steps { 1.0 } else { (k + 1) as f64 / steps as f64 };
        let mid = protocol.at(s_mid)?;
        let next = protocol.at(s_next)?;
        let (w0, f0) = (node.omega2_plus, force_scale * node.d_ddot);
        let (w1, f1) = (mid.omega2_plus, force_scale * mid.d_ddot);
        let (w2, f2) = (next.omega2_plus, force_scale * next.d_ddot);
        (x, v) = rk4_step(x, v, h, (w0, f0), (w1, f1), (w2, f2));
        mids.push((w1, f1));
        push(&mut traj, k + 1, &next);
        traj.x_plus.push(x);
        traj.x_plus_dot.push(v);
        node = next;
    }

    if steps % 2 == 0 && steps >= 4 {
        // Same integrator at step 2h, reusing the grid nodes as midpoints.
        let (mut xc, mut vc) = (0.0, 0.0);
        for j in (0..steps).step_by(2) {
            let sample = |i: usize| (traj.omega2_plus[i], force_scale * traj.d_ddot[i]);
            (xc, vc) = rk4_step(xc, vc, 2.0 * h, sample(j), sample(j + 1), sample(j + 2));
        }
        traj.x_plus_error = Some((x - xc) / 15.0);
    }
    Ok(traj)
}

#[inline]
fn rk4_step(x: f64, v: f64, h: f64, a: (f64, f64), m: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let acc = |(w, f): (f64, f64), x: f64| f - w * x;
    let (k1x, k1v) = (v, acc(a, x));
    let (k2x, k2v) = (v + 0.5 * h * k1v, acc(m, x + 0.5 * h * k1x));
    let (k3x, k3v) = (v + 0.5 * h * k2v, acc(m, x + 0.5 * h * k2x));
    let (k4x, k4v) = (v + h * k3v, acc(b, x + h * k3x));
    (
        x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Lab-frame trap controls sampled on the protocol grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlWaveforms {
    pub grid: Vec<f64>,
    /// J/m²
    pub alpha: Vec<f64>,
    /// J/m⁴
    pub beta: Vec<f64>,
    /// m
    pub d: Vec<f64>,
}

impl ControlWaveforms {
    /// Controls frozen at (α, β) for `n_samples` points over [0, t_final].
    pub fn constant(alpha: f64, beta: f64, d: f64, t_final: f64, n_samples: usize) -> Self {
        let steps = (n_samples - 1) as f64;
        Self {
            grid: (0..n_samples).map(|k| k as f64 * t_final / steps).collect(),
            alpha: vec![alpha; n_samples],
            beta: vec![beta; n_samples],
            d: vec![d; n_samples],
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        *self.grid.last().unwrap_or(&0.0)
    }

    /// Index and value of the largest β sample.
    pub fn beta_max(&self) -> (usize, f64) {
        self.beta
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, b)| if b > best.1 { (i, b) } else { best })
    }

    /// Largest |βd⁵ + 2αd³ − 2C_c| / 2C_c over all samples.
    pub fn max_quintic_residual(&self, coulomb: f64) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(&self.d)
            .map(|((&a, &b), &d)| model::quintic_residual(a, b, d, coulomb).abs() / (2.0 * coulomb))
            .fold(0.0, f64::max)
    }
}

/// α = m(3Ω₊² − 5Ω₋²)/8 and β = 2C_c/d⁵ − 2α/d² at every sample.
pub fn reconstruct_controls(traj: &ModeTrajectory, config: &PhysicalConfig) -> Result<ControlWaveforms> {
    let m = config.ion_mass;
    let cc = config.coulomb_const;
    let mut alpha = Vec::with_capacity(traj.len());
    let mut beta = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let d = traj.d[k];
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NonPhysical(format!("separation {d:e} at sample {k}")));
        }
        let a = m / 8.0 * (3.0 * traj.omega2_plus[k] - 5.0 * traj.omega2_minus[k]);
        let d2 = d * d;
        alpha.push(a);
        beta.push(2.0 * cc / (d2 * d2 * d) - 2.0 * a / d2);
    }
    Ok(ControlWaveforms { grid: traj.grid.clone(), alpha, beta, d: traj.d.clone() })
}

/// Trajectory plus waveforms in one call.
pub fn controls_for(
    config: &PhysicalConfig,
    endpoints: &Endpoints,
    params: &AnsatzParams,
    n_samples: usize,
) -> Result<(ModeTrajectory, ControlWaveforms)> {
    let traj = build_trajectory(config, endpoints, params, n_samples)?;
    let wf = reconstruct_controls(&traj, config)?;
    Ok((traj, wf))
}
