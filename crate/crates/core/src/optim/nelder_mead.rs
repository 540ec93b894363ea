use serde::{Deserialize, Serialize};

use super::{Evaluator, Exhausted, Start};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadParams {
    /// Relative tolerance, floored at unit scale, on the simplex spread in f and in x.
    pub tol: f64,
    pub max_iter: usize,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMeadParams {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 5000, reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
}

pub(crate) fn minimize(ev: &mut Evaluator, start: &Start, p: &NelderMeadParams) -> Result<bool, Exhausted> {
    minimize_observed(ev, start, p, &mut |_, _| {})
}

/// Largest distance between two vertices.
#[cfg(test)]
pub(crate) fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            d = d.max(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    d
}

pub(crate) fn minimize_observed(
    ev: &mut Evaluator,
    start: &Start,
    p: &NelderMeadParams,
    observe: &mut dyn FnMut(Step, &[Vec<f64>]),
) -> Result<bool, Exhausted> {
    let n = start.center.len();
    // usual initial simplex: 5% along each axis, a small absolute step for zero entries
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.center.clone());
    for i in 0..n {
        let mut v = start.center.clone();
        v[i] = if v[i] != 0.0 { 1.05 * v[i] } else { 0.00025 };
        simplex.push(v);
    }
    let mut fs = Vec::with_capacity(n + 1);
    for v in &simplex {
        fs.push(ev.eval(v)?);
    }
    sort(&mut simplex, &mut fs);

    for _ in 0..p.max_iter {
        let f_spread = fs[1..].iter().map(|f| (f - fs[0]).abs()).fold(0.0, f64::max);
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let x_scale = simplex[0].iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let f_scale = fs[0].abs().max(1.0);
        if f_spread <= p.tol * f_scale && x_spread <= p.tol * x_scale {
            return Ok(true);
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (centroid[j] - worst[j])).collect() };

        let xr = along(p.reflection);
        let fr = ev.eval(&xr)?;
        let step = if fr < fs[0] {
            let xe = along(p.reflection * p.expansion);
            let fe = ev.eval(&xe)?;
            if fe < fr {
                simplex[n] = xe;
                fs[n] = fe;
                Step::Expand
            } else {
                simplex[n] = xr;
                fs[n] = fr;
                Step::Reflect
            }
        } else if fr < fs[n - 1] {
            simplex[n] = xr;
            fs[n] = fr;
            Step::Reflect
        } else {
            let (xc, outside) = if fr < fs[n] {
                (along(p.reflection * p.contraction), true)
            } else {
                (along(-p.contraction), false)
            };
            let fc = ev.eval(&xc)?;
            if (outside && fc <= fr) || (!outside && fc < fs[n]) {
                simplex[n] = xc;
                fs[n] = fc;
                if outside {
                    Step::ContractOutside
                } else {
                    Step::ContractInside
                }
            } else {
                for i in 1..=n {
                    let v: Vec<f64> =
                        (0..n).map(|j| simplex[0][j] + p.shrink * (simplex[i][j] - simplex[0][j])).collect();
                    fs[i] = ev.eval(&v)?;
                    simplex[i] = v;
                }
                Step::Shrink
            }
        };
        sort(&mut simplex, &mut fs);
        observe(step, &simplex);
    }
    Ok(false)
}

fn sort(simplex: &mut [Vec<f64>], fs: &mut [f64]) {
    let mut idx: Vec<usize> = (0..fs.len()).collect();
    idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
    let (s, f): (Vec<_>, Vec<_>) = idx.iter().map(|&i| (simplex[i].clone(), fs[i])).unzip();
    simplex.clone_from_slice(&s);
    fs.copy_from_slice(&f);
}
