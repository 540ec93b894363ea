use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::ControlWaveforms;
use crate::model::{self, Endpoints, PhysicalConfig, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hamiltonian {
    /// Quartic trap plus Coulomb repulsion, no expansion.
    Full,
    /// Potential expanded to second order around the instantaneous equilibrium ±d(t)/2.
    HarmonicTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gaussian,
    Grid,
}

/// Gaussian phase-space state of the ion pair, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState2D {
    /// (q₁, q₂, p₁, p₂)
    pub center: [f64; 4],
    /// Symmetrized second moments, ordered like `center`.
    pub covariance: [[f64; 4]; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationReport {
    pub e_final: f64,
    pub e_ground_ref: f64,
    pub e_exc: f64,
    /// e_exc / ħω₀
    pub e_exc_quanta: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub state: GaussianState2D,
    /// Largest |SᵀJS − J| entry seen along the way (oscillator units).
    pub max_symplectic_error: f64,
}

/// Oscillator units of the reference frequency.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Units {
    pub length: f64,
    pub momentum: f64,
    pub energy: f64,
    pub time: f64,
    mass: f64,
    omega0: f64,
    coulomb: f64,
}

impl Units {
    pub fn of(config: &PhysicalConfig) -> Self {
        let length = (HBAR / (config.ion_mass * config.omega0)).sqrt();
        Self {
            length,
            momentum: HBAR / length,
            energy: HBAR * config.omega0,
            time: 1.0 / config.omega0,
            mass: config.ion_mass,
            omega0: config.omega0,
            coulomb: config.coulomb_const / (length * HBAR * config.omega0),
        }
    }

    fn alpha(&self, alpha: f64) -> f64 {
        alpha / (self.mass * self.omega0 * self.omega0)
    }

    fn beta(&self, beta: f64) -> f64 {
        let l2 = self.length * self.length;
        beta * l2 * l2 / self.energy
    }

    fn scale(&self) -> Vector4<f64> {
        Vector4::new(self.length, self.length, self.momentum, self.momentum)
    }

    fn to_scaled(&self, s: &GaussianState2D) -> (Vector4<f64>, Matrix4<f64>) {
        let k = self.scale();
        let c = Vector4::from_fn(|i, _| s.center[i] / k[i]);
        let cov = Matrix4::from_fn(|i, j| s.covariance[i][j] / (k[i] * k[j]));
        (c, cov)
    }

    fn to_si(&self, c: &Vector4<f64>, cov: &Matrix4<f64>) -> GaussianState2D {
        let k = self.scale();
        GaussianState2D {
            center: [0, 1, 2, 3].map(|i| c[i] * k[i]),
            covariance: [0, 1, 2, 3].map(|i| [0, 1, 2, 3].map(|j| cov[(i, j)] * k[i] * k[j])),
        }
    }
}

/// Trap controls in oscillator units at one instant.
#[derive(Debug, Clone, Copy)]
struct Trap {
    a: f64,
    b: f64,
    d: f64,
}

fn gradient(trap: &Trap, c: f64, h: Hamiltonian, x1: f64, x2: f64) -> [f64; 2] {
    match h {
        Hamiltonian::Full => {
            let r = x1 - x2;
            let coul = c / (r * r);
            [
                2.0 * trap.a * x1 + 4.0 * trap.b * x1 * x1 * x1 - coul,
                2.0 * trap.a * x2 + 4.0 * trap.b * x2 * x2 * x2 + coul,
            ]
        }
        Hamiltonian::HarmonicTruncated => {
            let (e1, e2) = (0.5 * trap.d, -0.5 * trap.d);
            let g = gradient(trap, c, Hamiltonian::Full, e1, e2);
            let hs = hessian(trap, c, Hamiltonian::Full, e1, e2);
            let (u1, u2) = (x1 - e1, x2 - e2);
            [g[0] + hs[0] * u1 + hs[1] * u2, g[1] + hs[1] * u1 + hs[2] * u2]
        }
    }
}

/// (H₁₁, H₁₂, H₂₂)
fn hessian(trap: &Trap, c: f64, h: Hamiltonian, x1: f64, x2: f64) -> [f64; 3] {
    let (x1, x2) = match h {
        Hamiltonian::Full => (x1, x2),
        Hamiltonian::HarmonicTruncated => (0.5 * trap.d, -0.5 * trap.d),
    };
    let r = x1 - x2;
    let coul = 2.0 * c / (r * r * r);
    [
        2.0 * trap.a + 12.0 * trap.b * x1 * x1 + coul,
        -coul,
        2.0 * trap.a + 12.0 * trap.b * x2 * x2 + coul,
    ]
}

fn potential(trap: &Trap, c: f64, x1: f64, x2: f64) -> f64 {
    trap.a * (x1 * x1 + x2 * x2) + trap.b * (x1.powi(4) + x2.powi(4)) + c / (x1 - x2)
}

fn potential_with(trap: &Trap, c: f64, h: Hamiltonian, x1: f64, x2: f64) -> f64 {
    match h {
        Hamiltonian::Full => potential(trap, c, x1, x2),
        Hamiltonian::HarmonicTruncated => {
            let (e1, e2) = (0.5 * trap.d, -0.5 * trap.d);
            let g = gradient(trap, c, Hamiltonian::Full, e1, e2);
            let hs = hessian(trap, c, Hamiltonian::Full, e1, e2);
            let (u1, u2) = (x1 - e1, x2 - e2);
            potential(trap, c, e1, e2)
                + g[0] * u1
                + g[1] * u2
                + 0.5 * (hs[0] * u1 * u1 + 2.0 * hs[1] * u1 * u2 + hs[2] * u2 * u2)
        }
    }
}

/// Cubic Lagrange interpolation of the sampled controls at fractional index `u`.
struct Sampler<'a> {
    wf: &'a ControlWaveforms,
    units: Units,
}

impl Sampler<'_> {
    fn channel(series: &[f64], u: f64) -> f64 {
        let n = series.len();
        if n == 1 {
            return series[0];
        }
        let k = (u.floor() as usize).min(n - 2);
        let f = u - k as f64;
        if f == 0.0 {
            return series[k];
        }
        if n < 4 {
            return series[k] * (1.0 - f) + series[k + 1] * f;
        }
        // four-point stencil, shifted inward at the ends
        let start = k.saturating_sub(1).min(n - 4);
        let x = u - start as f64;
        let mut acc = 0.0;
        for i in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if i != j {
                    w *= (x - j as f64) / (i as f64 - j as f64);
                }
            }
            acc += w * series[start + i];
        }
        acc
    }

    fn at(&self, u: f64) -> Trap {
        Trap {
            a: self.units.alpha(Self::channel(&self.wf.alpha, u)),
            b: self.units.beta(Self::channel(&self.wf.beta, u)),
            d: Self::channel(&self.wf.d, u) / self.units.length,
        }
    }
}

type Phase = [f64; 20];

fn flow(trap: &Trap, c: f64, h: Hamiltonian, y: &Phase) -> Phase {
    let mut dy = [0.0; 20];
    let g = gradient(trap, c, h, y[0], y[1]);
    dy[0] = y[2];
    dy[1] = y[3];
    dy[2] = -g[0];
    dy[3] = -g[1];
    let [h11, h12, h22] = hessian(trap, c, h, y[0], y[1]);
    // S is row-major in y[4..20]; Ṡ = [[0, I], [−H, 0]] S
    let s = &y[4..];
    for col in 0..4 {
        let (s0, s1, s2, s3) = (s[col], s[4 + col], s[8 + col], s[12 + col]);
        dy[4 + col] = s2;
        dy[4 + 4 + col] = s3;
        dy[4 + 8 + col] = -(h11 * s0 + h12 * s1);
        dy[4 + 12 + col] = -(h12 * s0 + h22 * s1);
    }
    dy
}

fn axpy(y: &Phase, k: &Phase, h: f64) -> Phase {
    let mut out = *y;
    for i in 0..20 {
        out[i] += h * k[i];
    }
    out
}

fn symplectic_error(y: &Phase) -> f64 {
    let s = Matrix4::from_row_slice(&y[4..20]);
    let j = symplectic_form();
    (s.transpose() * j * s - j).abs().max()
}

fn symplectic_form() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}

/// Ground state of the normal-mode Hamiltonian of the trap at waveform sample `k`.
pub(crate) fn ground_state_of(wf: &ControlWaveforms, k: usize, config: &PhysicalConfig) -> Result<GaussianState2D> {
    let (alpha, beta, d) = (wf.alpha[k], wf.beta[k], wf.d[k]);
    let (wm2, wp2) = model::mode_frequencies_sq(alpha, beta, d, config.ion_mass, config.coulomb_const);
    if !(wm2 > 0.0 && wp2 > 0.0) {
        return Err(Error::NonPhysical(format!("unstable trap at sample {k}: Ω² = ({wm2:e}, {wp2:e})")));
    }
    Ok(ground_state(config, d, wm2.sqrt(), wp2.sqrt()))
}

fn ground_state(config: &PhysicalConfig, d: f64, omega_minus: f64, omega_plus: f64) -> GaussianState2D {
    let units = Units::of(config);
    let (wm, wp) = (omega_minus / config.omega0, omega_plus / config.omega0);
    // COM (x₁+x₂)/√2 and stretch (x₁−x₂)/√2 decouple; unit mass, ħ = 1
    let rot = nalgebra::Matrix2::new(1.0, 1.0, 1.0, -1.0) / 2f64.sqrt();
    let qq = rot * nalgebra::Matrix2::new(0.5 / wm, 0.0, 0.0, 0.5 / wp) * rot.transpose();
    let pp = rot * nalgebra::Matrix2::new(0.5 * wm, 0.0, 0.0, 0.5 * wp) * rot.transpose();
    let mut cov = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            cov[(i, j)] = qq[(i, j)];
            cov[(i + 2, j + 2)] = pp[(i, j)];
        }
    }
    let dl = d / units.length;
    units.to_si(&Vector4::new(0.5 * dl, -0.5 * dl, 0.0, 0.0), &cov)
}

/// Ground state of the initial trap: centres ±d₀/2 at rest, mode variances ħ/(2Ω±(0)).
pub fn initial_state(config: &PhysicalConfig, endpoints: &Endpoints) -> GaussianState2D {
    ground_state(config, endpoints.d0, endpoints.omega_minus_0, endpoints.omega_plus_0)
}

impl GaussianState2D {
    /// Symplectic eigenvalues of the covariance in units of ħ (each ≥ 1/2).
    pub fn symplectic_eigenvalues(&self, config: &PhysicalConfig) -> [f64; 2] {
        let (_, cov) = Units::of(config).to_scaled(self);
        let eig = SymmetricEigen::new(cov);
        let root = eig.eigenvectors
            * Matrix4::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let j = symplectic_form();
        let m = root * j.transpose() * cov * j * root;
        let mut nu: Vec<f64> = SymmetricEigen::new(0.5 * (m + m.transpose()))
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        nu.sort_by(f64::total_cmp);
        // each value appears twice
        [0.5 * (nu[0] + nu[1]), 0.5 * (nu[2] + nu[3])]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| {
            let (a, b) = (self.covariance[i][j], self.covariance[j][i]);
            (a - b).abs() <= 1e-12 * (a.abs() + b.abs())
        }))
    }
}

/// RK4 steps per sample interval.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// Propagates under the full Hamiltonian with [`DEFAULT_SUBSTEPS`] RK4 steps per waveform interval.
pub fn propagate(state: &GaussianState2D, waveforms: &ControlWaveforms, config: &PhysicalConfig) -> Result<GaussianState2D> {
    Ok(propagate_with(state, waveforms, config, Hamiltonian::Full, DEFAULT_SUBSTEPS)?.state)
}

pub fn propagate_with(
    state: &GaussianState2D,
    waveforms: &ControlWaveforms,
    config: &PhysicalConfig,
    hamiltonian: Hamiltonian,
    substeps: usize,
) -> Result<Propagation> {
    if waveforms.len() < 2 {
        return Err(Error::InvalidConfig("waveforms need at least two samples".into()));
    }
    let units = Units::of(config);
    let sampler = Sampler { wf: waveforms, units };
    let c = units.coulomb;
    let (c0, cov0) = units.to_scaled(state);

    let mut y: Phase = [0.0; 20];
    y[..4].copy_from_slice(c0.as_slice());
    for i in 0..4 {
        y[4 + 5 * i] = 1.0;
    }

    let substeps = substeps.max(1);
    let intervals = waveforms.len() - 1;
    let dt = waveforms.t_final() / intervals as f64 / units.time / substeps as f64;
    let du = 1.0 / substeps as f64;
    let mut max_err: f64 = 0.0;
    for k in 0..intervals {
        for j in 0..substeps {
            let u0 = k as f64 + j as f64 * du;
            let (ta, tm, tb) = (sampler.at(u0), sampler.at(u0 + 0.5 * du), sampler.at(u0 + du));
            let k1 = flow(&ta, c, hamiltonian, &y);
            let k2 = flow(&tm, c, hamiltonian, &axpy(&y, &k1, 0.5 * dt));
            let k3 = flow(&tm, c, hamiltonian, &axpy(&y, &k2, 0.5 * dt));
            let k4 = flow(&tb, c, hamiltonian, &axpy(&y, &k3, dt));
            for i in 0..20 {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if !(y[0] - y[1] > 0.0) {
                let t = (u0 + du) * dt / du * units.time;
                return Err(Error::IonCollision { t });
            }
        }
        max_err = max_err.max(symplectic_error(&y));
    }

    let s = Matrix4::from_row_slice(&y[4..20]);
    let cov = s * cov0 * s.transpose();
    let cov = 0.5 * (cov + cov.transpose());
    let center = Vector4::new(y[0], y[1], y[2], y[3]);
    Ok(Propagation { state: units.to_si(&center, &cov), max_symplectic_error: max_err })
}

/// ⟨H⟩ at the final sample over the Gaussian (second-order moment expansion) against
/// the normal-mode ground energy of the final trap.
pub fn excitation(final_state: &GaussianState2D, waveforms: &ControlWaveforms, config: &PhysicalConfig) -> Result<ExcitationReport> {
    excitation_with(final_state, waveforms, config, Hamiltonian::Full)
}

/// Excitation measured with the same potential the state was propagated under.
pub fn excitation_with(
    final_state: &GaussianState2D,
    waveforms: &ControlWaveforms,
    config: &PhysicalConfig,
    hamiltonian: Hamiltonian,
) -> Result<ExcitationReport> {
    let units = Units::of(config);
    let last = waveforms.len() - 1;
    let trap = Sampler { wf: waveforms, units }.at(last as f64);
    let c = units.coulomb;
    let (wm2, wp2) = model::mode_frequencies_sq(
        waveforms.alpha[last],
        waveforms.beta[last],
        waveforms.d[last],
        config.ion_mass,
        config.coulomb_const,
    );
    if !(wm2 > 0.0 && wp2 > 0.0) {
        return Err(Error::NonPhysical("final trap is not confining".into()));
    }
    let ground_quanta = 0.5 * (wm2.sqrt() + wp2.sqrt()) / config.omega0;

    let (x, cov) = units.to_scaled(final_state);
    let (e1, e2) = (0.5 * trap.d, -0.5 * trap.d);
    let kinetic = 0.5 * (x[2] * x[2] + x[3] * x[3]);
    let classical = kinetic + (potential_with(&trap, c, hamiltonian, x[0], x[1]) - potential(&trap, c, e1, e2));
    let [h11, h12, h22] = hessian(&trap, c, hamiltonian, x[0], x[1]);
    let spread = 0.5 * (h11 * cov[(0, 0)] + 2.0 * h12 * cov[(0, 1)] + h22 * cov[(1, 1)])
        + 0.5 * (cov[(2, 2)] + cov[(3, 3)]);
    let exc_quanta = classical + (spread - ground_quanta);

    let e_ground_ref = (potential(&trap, c, e1, e2) + ground_quanta) * units.energy;
    let e_exc = exc_quanta * units.energy;
    Ok(ExcitationReport {
        e_final: e_ground_ref + e_exc,
        e_ground_ref,
        e_exc,
        e_exc_quanta: exc_quanta,
        method: Method::Gaussian,
    })
}
