//! Latin hypercube designs and cost-based budget allocation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Latin hypercube sample in `[0, 1)^dim`: each column holds exactly one
/// point per stratum `[k/n, (k+1)/n)`, jittered uniformly inside it.
pub fn lhs_unit<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, dim);
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        strata.shuffle(rng);
        for (i, &k) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            // (k + u) / n can round up to (k + 1) / n
            let v = (k as f64 + u) / n as f64;
            let upper = (k + 1) as f64 / n as f64;
            out[(i, d)] = if v >= upper { upper.next_down() } else { v };
        }
    }
    out
}

/// Seeded LHS of `n` points mapped affinely onto `bounds`.
pub fn lhs(n: usize, bounds: &[(f64, f64)], seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let mut x = lhs_unit(n, bounds.len(), &mut rng);
    for (d, (lo, hi)) in bounds.iter().enumerate() {
        x.column_mut(d).apply(|v| *v = lo + *v * (hi - lo));
    }
    x
}

/// Per-level sample counts bought with a total budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub total_budget: f64,
    pub fractions: Vec<f64>,
    pub costs: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BudgetPlan {
    pub fn consumed(&self) -> f64 {
        self.counts.iter().zip(&self.costs).map(|(n, c)| *n as f64 * c).sum()
    }
}

const FLOOR_SLACK: f64 = 1e-9;

/// Default per-level minimums: 2 for the most expensive level, 1 elsewhere.
pub fn default_minimums(costs: &[f64]) -> Vec<usize> {
    let top = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    costs.iter().map(|c| if *c == top { 2 } else { 1 }).collect()
}

/// Splits `total` across levels as `floor(fraction * total / cost)`.
///
/// Levels with a zero fraction are dropped (count 0). Every other level is
/// raised to its minimum; if that overshoots the budget, points are removed
/// from the cheapest levels that are still above their minimum.
pub fn allocate_budget(total: f64, fractions: &[f64], costs: &[f64], minimums: Option<&[usize]>) -> Result<BudgetPlan> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Allocation(format!("budget must be positive, got {total}")));
    }
    if fractions.len() != costs.len() || fractions.is_empty() {
        return Err(Error::Allocation(format!(
            "{} fractions for {} cost levels",
            fractions.len(),
            costs.len()
        )));
    }
    if fractions.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::Allocation("fractions must be non-negative".into()));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Allocation(format!("fractions sum to {sum}, expected 1")));
    }
    if costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::Allocation("costs must be positive".into()));
    }
    let minimums = match minimums {
        Some(m) if m.len() != costs.len() => {
            return Err(Error::Allocation(format!(
                "{} minimums for {} levels",
                m.len(),
                costs.len()
            )))
        }
        Some(m) => m.to_vec(),
        None => default_minimums(costs),
    };

    let mut counts: Vec<usize> = fractions
        .iter()
        .zip(costs)
        .map(|(f, c)| (f * total / c + FLOOR_SLACK).floor() as usize)
        .collect();
    let mut floors = vec![0; counts.len()];
    for m in 0..counts.len() {
        if fractions[m] > 0.0 {
            floors[m] = minimums[m];
            counts[m] = counts[m].max(minimums[m]);
        }
    }

    let consumed = |counts: &[usize]| counts.iter().zip(costs).map(|(n, c)| *n as f64 * c).sum::<f64>();
    while consumed(&counts) > total + FLOOR_SLACK {
        let cheapest = (0..counts.len())
            .filter(|&m| counts[m] > floors[m])
            .min_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(b.cmp(&a)));
        match cheapest {
            Some(m) => counts[m] -= 1,
            None => {
                return Err(Error::Allocation(format!(
                    "minimum counts {floors:?} cost {} which exceeds the budget {total}",
                    consumed(&floors)
                )))
            }
        }
    }

    Ok(BudgetPlan {
        total_budget: total,
        fractions: fractions.to_vec(),
        costs: costs.to_vec(),
        counts,
    })
}
