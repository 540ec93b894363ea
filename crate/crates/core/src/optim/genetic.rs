use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stalled, uniform_box, Evaluator, Exhausted, Start};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneticParams {
    pub population: usize,
    /// Half-width of the uniform initial population for a cold start.
    pub init_range: f64,
    /// Half-width around the previous optimum for a warm start.
    pub warm_spread: f64,
    pub tournament: usize,
    pub elite: usize,
    pub mutation_prob: f64,
    /// Initial mutation standard deviation as a fraction of the initial population width.
    pub mutation_scale: f64,
    pub stall_generations: usize,
    pub tol: f64,
}

impl Default for GeneticParams {
    fn default() -> Self {
        Self {
            population: 50,
            init_range: 60.0,
            warm_spread: 5.0,
            tournament: 5,
            elite: 3,
            mutation_prob: 0.1,
            mutation_scale: 0.5,
            stall_generations: 50,
            tol: 1e-6,
        }
    }
}

struct Member {
    x: Vec<f64>,
    f: f64,
}

fn tournament<'a, R: Rng>(pop: &'a [Member], size: usize, rng: &mut R) -> &'a Member {
    (0..size.max(1))
        .map(|_| &pop[rng.random_range(0..pop.len())])
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .unwrap()
}

/// Point on the segment between the parents, pulled toward the fitter one: weight
/// f₂/(f₁ + f₂) on the first parent. Falls back to the midpoint when the values are not
/// positive and finite.
fn crossover(a: &Member, b: &Member) -> Vec<f64> {
    let total = a.f + b.f;
    let w = if a.f >= 0.0 && b.f >= 0.0 && total > 0.0 && total.is_finite() { b.f / total } else { 0.5 };
    a.x.iter().zip(&b.x).map(|(p, q)| w * p + (1.0 - w) * q).collect()
}

pub(crate) fn minimize<R: Rng>(
    ev: &mut Evaluator,
    start: &Start,
    p: &GeneticParams,
    rng: &mut R,
) -> Result<bool, Exhausted> {
    minimize_observed(ev, start, p, rng, &mut |_| {})
}

/// `observe` sees the best value of each sorted generation.
fn minimize_observed<R: Rng>(
    ev: &mut Evaluator,
    start: &Start,
    p: &GeneticParams,
    rng: &mut R,
    observe: &mut dyn FnMut(f64),
) -> Result<bool, Exhausted> {
    let spread = if start.warm { p.warm_spread } else { p.init_range };
    let n_pop = p.population.max(2);
    let max_gen = (ev.remaining() / n_pop).max(1);
    let sigma0 = p.mutation_scale * 2.0 * spread;

    let mut pop = Vec::with_capacity(n_pop);
    if start.warm {
        pop.push(Member { x: start.center.clone(), f: ev.eval(&start.center)? });
    }
    while pop.len() < n_pop {
        let x = uniform_box(rng, &start.center, spread);
        let f = ev.eval(&x)?;
        pop.push(Member { x, f });
    }
    let mut best_trace = Vec::new();
    for gen in 0..max_gen {
        pop.sort_by(|a, b| a.f.total_cmp(&b.f));
        observe(pop[0].f);
        best_trace.push(pop[0].f);
        if best_trace.len() > p.stall_generations {
            let then = best_trace[best_trace.len() - 1 - p.stall_generations];
            if stalled(then, pop[0].f, p.tol) {
                return Ok(true);
            }
        }
        let sigma = sigma0 * (1.0 - gen as f64 / max_gen as f64);
        let n_elite = p.elite.min(n_pop);
        let mut next: Vec<Member> = pop.drain(..n_elite).collect();
        let rest = std::mem::take(&mut pop);
        let parents: Vec<Member> = next.iter().map(|m| Member { x: m.x.clone(), f: m.f }).chain(rest).collect();
        while next.len() < n_pop {
            let a = tournament(&parents, p.tournament, rng);
            let b = tournament(&parents, p.tournament, rng);
            let mut x = crossover(a, b);
            for xi in x.iter_mut() {
                if rng.random::<f64>() < p.mutation_prob {
                    let z: f64 = StandardNormal.sample(rng);
                    *xi += sigma * z;
                }
            }
            let f = ev.eval(&x)?;
            next.push(Member { x, f });
        }
        pop = next;
    }
    Ok(false)
}
