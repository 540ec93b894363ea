//! Split-operator propagation of the two-ion wavefunction on a grid that rides along
//! the classical centre. Oscillator units (ħ = m = ω₀ = 1), normal coordinates
//! X = (x₁+x₂)/√2, Y = (x₁−x₂)/√2.

#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use ionsep_core::inverse::ControlWaveforms;
use ionsep_core::model::{mode_frequencies_sq, PhysicalConfig, HBAR};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Points per axis (power of two is fastest).
    pub n: usize,
    /// Half-width of each axis in multiples of the wider endpoint ground-state width.
    pub half_width: f64,
    pub steps_per_sample: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { n: 128, half_width: 12.0, steps_per_sample: 2 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridResult {
    pub e_exc_quanta: f64,
    pub e_exc: f64,
    /// |1 − ‖φ‖²| at the end.
    pub norm_error: f64,
    /// Probability in the outer fifth of the position box.
    pub edge_position: f64,
    /// Probability in the outer fifth of the momentum box.
    pub edge_momentum: f64,
}

#[derive(Clone, Copy)]
struct Trap {
    a: f64,
    b: f64,
    c: f64,
}

impl Trap {
    fn at(wf: &ControlWaveforms, config: &PhysicalConfig, u: f64) -> Self {
        let n = wf.len();
        let k = (u.floor() as usize).min(n - 2);
        let f = u - k as f64;
        let lerp = |s: &[f64]| s[k] * (1.0 - f) + s[k + 1] * f;
        let l = (HBAR / (config.ion_mass * config.omega0)).sqrt();
        let e = HBAR * config.omega0;
        Self {
            a: lerp(&wf.alpha) / (config.ion_mass * config.omega0 * config.omega0),
            b: lerp(&wf.beta) * l.powi(4) / e,
            c: config.coulomb_const / (l * e),
        }
    }

    fn potential(&self, x1: f64, x2: f64) -> f64 {
        self.a * (x1 * x1 + x2 * x2) + self.b * (x1.powi(4) + x2.powi(4)) + self.c / (x1 - x2)
    }

    fn grad_lab(&self, x1: f64, x2: f64) -> (f64, f64) {
        let r = x1 - x2;
        let coul = self.c / (r * r);
        (
            2.0 * self.a * x1 + 4.0 * self.b * x1.powi(3) - coul,
            2.0 * self.a * x2 + 4.0 * self.b * x2.powi(3) + coul,
        )
    }

    /// V(x + δ) − V(x) − ∇V(x)·δ written without cancellation.
    fn remainder(&self, x1: f64, x2: f64, d1: f64, d2: f64) -> f64 {
        let quartic = |x: f64, d: f64| d * d * (6.0 * x * x + 4.0 * x * d + d * d);
        let r = x1 - x2;
        let e = d1 - d2;
        self.a * (d1 * d1 + d2 * d2) + self.b * (quartic(x1, d1) + quartic(x2, d2)) + self.c * e * e / (r * r * (r + e))
    }
}

fn to_lab(x: f64, y: f64) -> (f64, f64) {
    ((x + y) * FRAC_1_SQRT_2, (x - y) * FRAC_1_SQRT_2)
}

/// Classical centre (X, Y, P_X, P_Y).
fn centre_flow(trap: &Trap, s: &[f64; 4]) -> [f64; 4] {
    let (x1, x2) = to_lab(s[0], s[1]);
    let (g1, g2) = trap.grad_lab(x1, x2);
    [s[2], s[3], -(g1 + g2) * FRAC_1_SQRT_2, -(g1 - g2) * FRAC_1_SQRT_2]
}

struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), scratch: vec![Complex64::default(); n * n] }
    }

    fn transpose(&mut self, buf: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.scratch[j * n + i] = buf[i * n + j];
            }
        }
        buf.copy_from_slice(&self.scratch);
    }

    fn run(&mut self, buf: &mut [Complex64], forward: bool) {
        let plan = if forward { self.fwd.clone() } else { self.inv.clone() };
        plan.process(buf);
        self.transpose(buf);
        plan.process(buf);
        self.transpose(buf);
        if !forward {
            let k = 1.0 / (self.n * self.n) as f64;
            buf.iter_mut().for_each(|v| *v *= k);
        }
    }
}

pub fn propagate_grid(
    waveforms: &ControlWaveforms,
    config: &PhysicalConfig,
    d0: f64,
    omega_minus_0: f64,
    omega_plus_0: f64,
    opts: &GridOptions,
) -> GridResult {
    let n = opts.n;
    let last = waveforms.len() - 1;
    let l = (HBAR / (config.ion_mass * config.omega0)).sqrt();
    let (wm0, wp0) = (omega_minus_0 / config.omega0, omega_plus_0 / config.omega0);
    let final_sq = mode_frequencies_sq(
        waveforms.alpha[last],
        waveforms.beta[last],
        waveforms.d[last],
        config.ion_mass,
        config.coulomb_const,
    );
    let (wmf, wpf) = (final_sq.0.sqrt() / config.omega0, final_sq.1.sqrt() / config.omega0);

    let width = |w0: f64, wf: f64| (0.5 / w0.min(wf)).sqrt();
    let (lx, ly) = (opts.half_width * width(wm0, wmf), opts.half_width * width(wp0, wpf));
    let (hx, hy) = (2.0 * lx / n as f64, 2.0 * ly / n as f64);
    let xs: Vec<f64> = (0..n).map(|i| -lx + i as f64 * hx).collect();
    let ys: Vec<f64> = (0..n).map(|j| -ly + j as f64 * hy).collect();
    let wave = |i: usize, h: f64| {
        let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * PI * m / (n as f64 * h)
    };
    let kx: Vec<f64> = (0..n).map(|i| wave(i, hx)).collect();
    let ky: Vec<f64> = (0..n).map(|j| wave(j, hy)).collect();

    // ground state of the initial normal modes
    let mut phi: Vec<Complex64> = Vec::with_capacity(n * n);
    for &x in &xs {
        for &y in &ys {
            phi.push(Complex64::new((-0.5 * (wm0 * x * x + wp0 * y * y)).exp(), 0.0));
        }
    }
    let norm = |phi: &[Complex64]| phi.iter().map(|v| v.norm_sqr()).sum::<f64>() * hx * hy;
    let z = norm(&phi).sqrt();
    phi.iter_mut().for_each(|v| *v /= z);

    // ions at ±d₀/2 at rest: X = 0, Y = d₀/√2
    let mut centre = [0.0, d0 / l * FRAC_1_SQRT_2, 0.0, 0.0];

    let kick = |phi: &mut [Complex64], trap: &Trap, c: &[f64; 4], tau: f64| {
        let (x1, x2) = to_lab(c[0], c[1]);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let (d1, d2) = to_lab(x, y);
                let w = trap.remainder(x1, x2, d1, d2);
                phi[i * n + j] *= Complex64::from_polar(1.0, -w * tau);
            }
        }
    };
    let kinetic: Vec<f64> = (0..n * n).map(|idx| 0.5 * (kx[idx / n].powi(2) + ky[idx % n].powi(2))).collect();

    let sub = opts.steps_per_sample.max(1);
    let dt = waveforms.t_final() * config.omega0 / last as f64 / sub as f64;
    let du = 1.0 / sub as f64;
    let mut fft = Fft2::new(n);
    let total = last * sub;
    kick(&mut phi, &Trap::at(waveforms, config, 0.0), &centre, 0.5 * dt);
    for step in 0..total {
        let u0 = step as f64 * du;
        let (ta, tm, tb) =
            (Trap::at(waveforms, config, u0), Trap::at(waveforms, config, u0 + 0.5 * du), Trap::at(waveforms, config, u0 + du));
        let add = |s: &[f64; 4], k: &[f64; 4], h: f64| [0, 1, 2, 3].map(|i| s[i] + h * k[i]);
        let k1 = centre_flow(&ta, &centre);
        let k2 = centre_flow(&tm, &add(&centre, &k1, 0.5 * dt));
        let k3 = centre_flow(&tm, &add(&centre, &k2, 0.5 * dt));
        let k4 = centre_flow(&tb, &add(&centre, &k3, dt));
        centre = [0, 1, 2, 3].map(|i| centre[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));

        fft.run(&mut phi, true);
        for (v, t) in phi.iter_mut().zip(&kinetic) {
            *v *= Complex64::from_polar(1.0, -t * dt);
        }
        fft.run(&mut phi, false);
        let tau = if step + 1 == total { 0.5 * dt } else { dt };
        kick(&mut phi, &tb, &centre, tau);
    }

    // energy relative to the final trap's classical minimum and normal-mode ground energy
    let trap = Trap::at(waveforms, config, last as f64);
    let p_norm = norm(&phi);
    let (x1, x2) = to_lab(centre[0], centre[1]);
    let (g1, g2) = trap.grad_lab(x1, x2);
    let (gx, gy) = ((g1 + g2) * FRAC_1_SQRT_2, (g1 - g2) * FRAC_1_SQRT_2);
    let df = waveforms.d[last] / l;
    let v_min = trap.potential(0.5 * df, -0.5 * df);
    let classical = 0.5 * (centre[2].powi(2) + centre[3].powi(2)) + (trap.potential(x1, x2) - v_min);

    let (mut w_mean, mut dx_mean, mut dy_mean, mut edge_pos) = (0.0, 0.0, 0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let p = phi[i * n + j].norm_sqr() * hx * hy / p_norm;
            let (d1, d2) = to_lab(x, y);
            w_mean += p * trap.remainder(x1, x2, d1, d2);
            dx_mean += p * x;
            dy_mean += p * y;
            if x.abs() > 0.8 * lx || y.abs() > 0.8 * ly {
                edge_pos += p;
            }
        }
    }
    let mut spec = phi.clone();
    fft.run(&mut spec, true);
    let s_norm: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
    let (kmx, kmy) = (PI / hx, PI / hy);
    let (mut t_mean, mut px_mean, mut py_mean, mut edge_mom) = (0.0, 0.0, 0.0, 0.0);
    for idx in 0..n * n {
        let p = spec[idx].norm_sqr() / s_norm;
        let (a, b) = (kx[idx / n], ky[idx % n]);
        t_mean += p * kinetic[idx];
        px_mean += p * a;
        py_mean += p * b;
        if a.abs() > 0.8 * kmx || b.abs() > 0.8 * kmy {
            edge_mom += p;
        }
    }
    let quantum = t_mean + centre[2] * px_mean + centre[3] * py_mean + w_mean + gx * dx_mean + gy * dy_mean;
    let e_exc_quanta = classical + quantum - 0.5 * (wmf + wpf);
    GridResult {
        e_exc_quanta,
        e_exc: e_exc_quanta * HBAR * config.omega0,
        norm_error: (1.0 - p_norm).abs(),
        edge_position: edge_pos,
        edge_momentum: edge_mom,
    }
}
