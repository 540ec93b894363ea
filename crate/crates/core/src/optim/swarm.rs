use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stalled, uniform_box, Evaluator, Exhausted, Start};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmParams {
    pub population: usize,
    pub init_range: f64,
    pub warm_spread: f64,
    pub inertia_min: f64,
    pub inertia_max: f64,
    pub self_adjustment: f64,
    pub social_adjustment: f64,
    /// Smallest neighbourhood as a fraction of the swarm.
    pub min_neighbors_fraction: f64,
    pub stall_iterations: usize,
    pub tol: f64,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            population: 50,
            init_range: 100.0,
            warm_spread: 30.0,
            inertia_min: 0.01,
            inertia_max: 1.40,
            self_adjustment: 1.49,
            social_adjustment: 1.49,
            min_neighbors_fraction: 0.25,
            stall_iterations: 20,
            tol: 1e-6,
        }
    }
}

pub(crate) fn minimize<R: Rng>(ev: &mut Evaluator, start: &Start, p: &SwarmParams, rng: &mut R) -> Result<bool, Exhausted> {
    let n = start.center.len();
    let spread = if start.warm { p.warm_spread } else { p.init_range };
    let vmax = 2.0 * spread;
    let n_swarm = p.population.max(2);
    let min_nb = ((p.min_neighbors_fraction * n_swarm as f64).floor() as usize).clamp(1, n_swarm - 1);

    // a warm swarm keeps the previous optimum as one of its particles
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(n_swarm);
    if start.warm {
        x.push(start.center.clone());
    }
    while x.len() < n_swarm {
        x.push(uniform_box(rng, &start.center, spread));
    }
    let mut v: Vec<Vec<f64>> = (0..n_swarm).map(|_| uniform_box(rng, &vec![0.0; n], vmax)).collect();
    let mut fx = Vec::with_capacity(n_swarm);
    for xi in &x {
        fx.push(ev.eval(xi)?);
    }
    let mut pbest = x.clone();
    let mut fbest = fx.clone();
    let mut best = fbest.iter().copied().fold(f64::INFINITY, f64::min);

    let mut w = p.inertia_max;
    let mut stall_count = 0usize;
    let mut nb_size = min_nb;
    let mut trace = vec![best];
    loop {
        for i in 0..n_swarm {
            // best personal best among a random neighbourhood that includes i
            let mut lead = i;
            for j in sample(rng, n_swarm, nb_size).into_iter() {
                if fbest[j] < fbest[lead] {
                    lead = j;
                }
            }
            for k in 0..n {
                let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                let vel = w * v[i][k]
                    + p.self_adjustment * u1 * (pbest[i][k] - x[i][k])
                    + p.social_adjustment * u2 * (pbest[lead][k] - x[i][k]);
                v[i][k] = vel.clamp(-vmax, vmax);
                x[i][k] += v[i][k];
                // the initial box doubles as the search bounds; hitting a wall stops that component
                let (lo, hi) = (start.center[k] - spread, start.center[k] + spread);
                if x[i][k] < lo || x[i][k] > hi {
                    x[i][k] = x[i][k].clamp(lo, hi);
                    v[i][k] = 0.0;
                }
            }
        }
        for i in 0..n_swarm {
            fx[i] = ev.eval(&x[i])?;
            if fx[i] < fbest[i] {
                fbest[i] = fx[i];
                pbest[i].clone_from(&x[i]);
            }
        }
        let new_best = fbest.iter().copied().fold(f64::INFINITY, f64::min);
        if new_best < best {
            best = new_best;
            stall_count = stall_count.saturating_sub(1);
            nb_size = min_nb;
            if stall_count < 2 {
                w *= 2.0;
            } else if stall_count > 5 {
                w /= 2.0;
            }
            w = w.clamp(p.inertia_min, p.inertia_max);
        } else {
            stall_count += 1;
            nb_size = (nb_size + min_nb).min(n_swarm);
        }
        trace.push(best);
        if trace.len() > p.stall_iterations {
            let then = trace[trace.len() - 1 - p.stall_iterations];
            if stalled(then, best, p.tol) {
                return Ok(true);
            }
        }
    }
}
