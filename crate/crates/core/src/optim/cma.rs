use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Evaluator, Exhausted, Start};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaParams {
    pub population: usize,
    pub sigma0: f64,
    /// First-generation samples are clipped to the seed ± this bound.
    pub init_bound: f64,
    pub sigma_max: f64,
    /// Stop once σ times the largest axis falls below this.
    pub tol_x: f64,
    /// Relative flatness of recent generation bests that counts as converged.
    pub tol_fun: f64,
}

impl Default for CmaParams {
    fn default() -> Self {
        Self { population: 70, sigma0: 12.0, init_bound: 20.0, sigma_max: 1e3, tol_x: 1e-11, tol_fun: 1e-12 }
    }
}

/// Log-decreasing recombination weights over the best half, summing to one.
pub(crate) fn weights(lambda: usize) -> Vec<f64> {
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu).map(|i| ((mu as f64) + 0.5).ln() - (i as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub(crate) fn minimize<R: Rng>(ev: &mut Evaluator, start: &Start, p: &CmaParams, rng: &mut R) -> Result<bool, Exhausted> {
    minimize_observed(ev, start, p, rng, &mut |_| {})
}

/// `observe` sees σ after every update.
fn minimize_observed<R: Rng>(
    ev: &mut Evaluator,
    start: &Start,
    p: &CmaParams,
    rng: &mut R,
    observe: &mut dyn FnMut(f64),
) -> Result<bool, Exhausted> {
    let n = start.center.len();
    let nf = n as f64;
    let lambda = p.population.max(4);
    let w = weights(lambda);
    let mu = w.len();
    let mu_eff = 1.0 / w.iter().map(|x| x * x).sum::<f64>();

    let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let ds = 1.0 + cs + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0);
    let cc = (4.0 + mu_eff / nf) / (4.0 + nf + 2.0 * mu_eff / nf);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = DVector::from_column_slice(&start.center);
    let mut sigma = p.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut axes = DVector::<f64>::from_element(n, 1.0);
    let mut ps = DVector::<f64>::zeros(n);
    let mut pc = DVector::<f64>::zeros(n);
    let flat_window = 10 + (30.0 * nf / lambda as f64).ceil() as usize;
    let mut gen_best = Vec::new();

    for gen in 0usize.. {
        let mut pop: Vec<(DVector<f64>, f64)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
            let mut x = &mean + sigma * (&basis * z.component_mul(&axes));
            if gen == 0 {
                for (xi, ci) in x.iter_mut().zip(&start.center) {
                    *xi = xi.clamp(ci - p.init_bound, ci + p.init_bound);
                }
            }
            let f = ev.eval(x.as_slice())?;
            pop.push((x, f));
        }
        pop.sort_by(|a, b| a.1.total_cmp(&b.1));

        let old = mean.clone();
        mean = pop[..mu].iter().zip(&w).fold(DVector::zeros(n), |acc, ((x, _), wi)| acc + *wi * x);
        let y_w = (&mean - &old) / sigma;

        // C^(-1/2) y_w
        let inv_sqrt = &basis * DMatrix::from_diagonal(&axes.map(|d| 1.0 / d)) * basis.transpose();
        ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mu_eff).sqrt() * (&inv_sqrt * &y_w);
        let ps_norm = ps.norm();
        let hs = ps_norm / (1.0 - (1.0 - cs).powi(2 * (gen as i32 + 1))).sqrt() < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
        let hsf = if hs { 1.0 } else { 0.0 };
        pc = (1.0 - cc) * &pc + hsf * (cc * (2.0 - cc) * mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for ((x, _), wi) in pop[..mu].iter().zip(&w) {
            let y = (x - &old) / sigma;
            rank_mu += *wi * &y * y.transpose();
        }
        cov = (1.0 - c1 - cmu) * &cov
            + c1 * (&pc * pc.transpose() + (1.0 - hsf) * cc * (2.0 - cc) * &cov)
            + cmu * rank_mu;
        cov = 0.5 * (&cov + cov.transpose());

        sigma *= ((cs / ds) * (ps_norm / chi_n - 1.0)).exp();
        sigma = sigma.min(p.sigma_max);
        observe(sigma);

        let eig = SymmetricEigen::new(cov.clone());
        basis = eig.eigenvectors;
        axes = eig.eigenvalues.map(|l| l.max(1e-300).sqrt());

        gen_best.push(pop[0].1);
        let max_axis = axes.max();
        if sigma * max_axis < p.tol_x {
            return Ok(true);
        }
        if gen_best.len() > flat_window {
            let recent = &gen_best[gen_best.len() - flat_window..];
            let (lo, hi) = recent.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if hi - lo <= p.tol_fun * lo.abs().max(f64::MIN_POSITIVE) {
                return Ok(true);
            }
        }
        if max_axis / axes.min() > 1e7 || !sigma.is_finite() {
            return Ok(true);
        }
    }
    unreachable!()
}
