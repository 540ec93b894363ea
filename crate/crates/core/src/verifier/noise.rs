use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::VerifyContext;
use crate::ansatz::AnsatzParams;
use crate::error::{Error, Result};
use crate::inverse::ControlWaveforms;
use crate::model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// One N(1, σ) factor per channel for the whole trace.
    #[default]
    PerTrace,
    /// An independent factor at every sample.
    PerSample,
}

/// α′ = α·N(1, σ), β′ = β·N(1, σ); d is re-solved from the quintic at every sample.
pub fn perturb_controls<R: Rng + ?Sized>(
    waveforms: &ControlWaveforms,
    sigma: f64,
    coulomb: f64,
    model: NoiseModel,
    rng: &mut R,
) -> Result<ControlWaveforms> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("sigma = {sigma} must be non-negative")));
    }
    if sigma == 0.0 {
        return Ok(waveforms.clone());
    }
    let factor = |rng: &mut R| 1.0 + sigma * rng.sample::<f64, _>(StandardNormal);
    let mut out = waveforms.clone();
    match model {
        NoiseModel::PerTrace => {
            let fa = factor(rng);
            let fb = factor(rng);
            out.alpha.iter_mut().for_each(|a| *a *= fa);
            out.beta.iter_mut().for_each(|b| *b *= fb);
        }
        NoiseModel::PerSample => {
            for k in 0..out.len() {
                out.alpha[k] *= factor(rng);
                out.beta[k] *= factor(rng);
            }
        }
    }
    for k in 0..out.len() {
        out.d[k] = model::solve_quintic(out.alpha[k], out.beta[k], coulomb, waveforms.d[k])?;
    }
    Ok(out)
}

/// Per-draw generator: ChaCha8 seeded with `seed`, stream = draw index.
pub fn draw_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudy {
    pub sigma: f64,
    pub n_draws: usize,
    pub rng_seed: u64,
    pub model: NoiseModel,
    /// E_exc (J) of the unperturbed controls.
    pub nominal_e_exc: f64,
    /// One entry per draw; `None` where the perturbed controls were unphysical.
    pub e_exc_samples: Vec<Option<f64>>,
    pub n_failed: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl NoiseStudy {
    pub fn successful(&self) -> impl Iterator<Item = f64> + '_ {
        self.e_exc_samples.iter().flatten().copied()
    }

    fn summarize(&mut self) {
        let mut ok: Vec<f64> = self.successful().collect();
        self.n_failed = self.n_draws - ok.len();
        if ok.is_empty() {
            (self.mean, self.median, self.max) = (f64::NAN, f64::NAN, f64::NAN);
            return;
        }
        ok.sort_by(f64::total_cmp);
        let n = ok.len();
        self.mean = ok.iter().sum::<f64>() / n as f64;
        self.median = if n % 2 == 1 { ok[n / 2] } else { 0.5 * (ok[n / 2 - 1] + ok[n / 2]) };
        self.max = ok[n - 1];
    }
}

pub fn noise_study(
    params: &AnsatzParams,
    sigma: f64,
    n_draws: usize,
    rng_seed: u64,
    model: NoiseModel,
    ctx: &VerifyContext,
) -> Result<NoiseStudy> {
    if n_draws == 0 {
        return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
    }
    let (nominal, wf) = ctx.verify(params)?;
    let coulomb = ctx.config.coulomb_const;
    let e_exc_samples = (0..n_draws)
        .map(|i| {
            let mut rng = draw_rng(rng_seed, i as u64);
            perturb_controls(&wf, sigma, coulomb, model, &mut rng)
                .and_then(|noisy| ctx.verify_waveforms(&noisy))
                .ok()
                .map(|r| r.e_exc)
        })
        .collect();
    let mut study = NoiseStudy {
        sigma,
        n_draws,
        rng_seed,
        model,
        nominal_e_exc: nominal.e_exc,
        e_exc_samples,
        n_failed: 0,
        mean: 0.0,
        median: 0.0,
        max: 0.0,
    };
    study.summarize();
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_endpoints, PhysicalConfig};

    fn ctx() -> VerifyContext {
        let cfg = PhysicalConfig::beryllium_pair(3.2e-6);
        VerifyContext::new(cfg, derive_endpoints(&cfg).unwrap())
    }

    fn params(ctx: &VerifyContext) -> AnsatzParams {
        AnsatzParams::new([0.0; 3], ctx.endpoints.gamma_minus, ctx.endpoints.gamma_plus)
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = ctx();
        let wf = c.waveforms(&params(&c)).unwrap();
        let mut rng = draw_rng(1, 0);
        let same = perturb_controls(&wf, 0.0, c.config.coulomb_const, NoiseModel::PerTrace, &mut rng).unwrap();
        assert_eq!(same, wf);
        let study = noise_study(&params(&c), 0.0, 5, 7, NoiseModel::PerTrace, &c).unwrap();
        assert!(study.successful().all(|e| e == study.nominal_e_exc));
        assert_eq!(study.n_failed, 0);
        assert_eq!(study.e_exc_samples.len(), 5);
    }

    #[test]
    fn seeded_perturbation_is_reproducible() {
        let c = ctx();
        let wf = c.waveforms(&params(&c)).unwrap();
        let a = perturb_controls(&wf, 1e-3, c.config.coulomb_const, NoiseModel::PerTrace, &mut draw_rng(42, 3)).unwrap();
        let b = perturb_controls(&wf, 1e-3, c.config.coulomb_const, NoiseModel::PerTrace, &mut draw_rng(42, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, wf);
        // per-trace: a single factor on the whole α trace
        let ratio = a.alpha[0] / wf.alpha[0];
        assert!(a.alpha.iter().zip(&wf.alpha).all(|(x, y)| ((x / y) - ratio).abs() < 1e-12));
        assert!(a.max_quintic_residual(c.config.coulomb_const) < 1e-10);
    }

    #[test]
    fn noise_factor_has_unit_mean() {
        let sigma = 3e-4;
        let mut rng = draw_rng(2024, 0);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| 1.0 + sigma * rng.sample::<f64, _>(StandardNormal)).sum::<f64>() / n as f64;
        // standard error σ/√n; allow four of them
        assert!((mean - 1.0).abs() < 4.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn statistics_recompute_from_samples() {
        let c = ctx();
        let s = noise_study(&params(&c), 1e-3, 9, 11, NoiseModel::PerTrace, &c).unwrap();
        let ok: Vec<f64> = s.successful().collect();
        assert_eq!(ok.len() + s.n_failed, s.n_draws);
        let mean = ok.iter().sum::<f64>() / ok.len() as f64;
        assert!((mean - s.mean).abs() <= 1e-12 * mean.abs());
        assert!(ok.iter().all(|&e| e <= s.max));
        assert!(noise_study(&params(&c), 1e-3, 0, 11, NoiseModel::PerTrace, &c).is_err());
    }
}
