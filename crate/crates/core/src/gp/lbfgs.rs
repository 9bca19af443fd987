//! Limited-memory BFGS restricted to a box by projection.
//!
//! The search direction comes from the usual two-loop recursion; components
//! that would push an active coordinate out of the box are zeroed, and the
//! trial point is projected back onto the box before the Armijo test.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub(crate) struct BoxLbfgs {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub pgtol: f64,
    /// Stop when the relative objective decrease falls below this.
    pub ftol: f64,
}

impl Default for BoxLbfgs {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 200,
            pgtol: 1e-6,
            ftol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    #[allow(dead_code)]
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| {
            if (*xi <= *lo && *gi > 0.0) || (*xi >= *hi && *gi < 0.0) {
                0.0
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(g: &[f64], pairs: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(last) = pairs.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (p, a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn freeze_active(d: &mut [f64], x: &[f64], lower: &[f64], upper: &[f64]) {
    for i in 0..d.len() {
        if (x[i] <= lower[i] && d[i] < 0.0) || (x[i] >= upper[i] && d[i] > 0.0) {
            d[i] = 0.0;
        }
    }
}

impl BoxLbfgs {
    /// Minimizes `objective` over the box `[lower, upper]`.
    ///
    /// The objective returns `None` where it cannot be evaluated; the line
    /// search treats such points as infinitely bad. Returns `None` only if the
    /// starting point itself cannot be evaluated.
    pub fn minimize<F>(&self, mut objective: F, x0: &[f64], lower: &[f64], upper: &[f64]) -> Option<Minimum>
    where
        F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    {
        let mut x = x0.to_vec();
        project(&mut x, lower, upper);
        let (mut fx, mut g) = objective(&x).filter(|(f, _)| f.is_finite())?;
        let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(self.memory);
        let mut iterations = 0;

        while iterations < self.max_iterations {
            if projected_gradient_norm(&x, &g, lower, upper) < self.pgtol {
                break;
            }
            iterations += 1;

            let mut d = two_loop(&g, &pairs);
            freeze_active(&mut d, &x, lower, upper);
            if dot(&d, &g) >= 0.0 {
                pairs.clear();
                d = g.iter().map(|v| -v).collect();
                freeze_active(&mut d, &x, lower, upper);
                if dot(&d, &g) >= 0.0 {
                    break;
                }
            }

            let mut step = if pairs.is_empty() {
                let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (1.0 / dmax).min(1.0)
            } else {
                1.0
            };

            let mut accepted = None;
            for _ in 0..40 {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
                project(&mut trial, lower, upper);
                let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                if moved.iter().all(|v| *v == 0.0) {
                    break;
                }
                if let Some((ft, gt)) = objective(&trial) {
                    if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &moved) {
                        accepted = Some((trial, ft, gt, moved));
                        break;
                    }
                }
                step *= 0.5;
            }

            let Some((x_new, f_new, g_new, s)) = accepted else {
                if pairs.is_empty() {
                    break;
                }
                pairs.clear();
                continue;
            };

            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
                if pairs.len() == self.memory {
                    pairs.pop_front();
                }
                pairs.push_back(Pair { rho: 1.0 / sy, s, y });
            }

            let decrease = fx - f_new;
            x = x_new;
            g = g_new;
            let f_old = fx;
            fx = f_new;
            if decrease <= self.ftol * f_old.abs().max(f_new.abs()).max(1.0) {
                break;
            }
        }

        Some(Minimum {
            x,
            value: fx,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock_converges() {
        let opt = BoxLbfgs {
            max_iterations: 500,
            ..Default::default()
        };
        let m = opt
            .minimize(rosenbrock, &[-1.2, 1.0], &[-10.0, -10.0], &[10.0, 10.0])
            .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
        assert!(m.iterations > 0 && m.iterations <= 500);
    }

    #[test]
    fn active_bound_is_respected() {
        // minimum of (x-3)^2 + (y+1)^2 on [0,2]x[0,2] is at (2, 0)
        let f = |x: &[f64]| {
            Some((
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)],
            ))
        };
        let m = BoxLbfgs::default()
            .minimize(f, &[1.0, 1.0], &[0.0, 0.0], &[2.0, 2.0])
            .unwrap();
        assert_eq!(m.x, vec![2.0, 0.0]);
        assert!((m.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unevaluable_start_returns_none() {
        let f = |_: &[f64]| None;
        assert!(BoxLbfgs::default().minimize(f, &[0.0], &[-1.0], &[1.0]).is_none());
    }

    #[test]
    fn failed_regions_are_avoided() {
        // objective undefined for x > 0.5; minimum of (x-1)^2 restricted there is 0.5
        let f = |x: &[f64]| (x[0] <= 0.5).then(|| ((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)]));
        let m = BoxLbfgs::default().minimize(f, &[-1.0], &[-2.0], &[2.0]).unwrap();
        assert!(m.x[0] <= 0.5 && m.x[0] > 0.4, "{:?}", m);
    }
}
