//! Exhaustive search for periodic grid sequences in the `ε`-fair core.
//!
//! For a sequence `x_1, x_2, …` with stage games `v_1, V(N; x_1), …` the slack of `S` is
//! `Σ_t μ_t g_S(x_t) − (1−δ) v_1(S)` with `μ_t = (1−δ)δ^{t−1}` and
//! `g_S(y) = y(S) − δ V(N; y)(S)`. Replacing `μ` by an arbitrary distribution over grid
//! points gives an LP whose value bounds every grid sequence at once; when that bound
//! already rules out `ε`, no enumeration is needed.

use serde::Serialize;

use super::convex::StageTable;
use crate::dynamics::{DiscountSpec, DynamicSpec, Grid};
use crate::error::{Error, Result};
use crate::game_core::simplex::{LinearProgram, Relation};

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicSearch {
    pub found: bool,
    pub eps: f64,
    /// A passing cycle `y_1, …, y_p` repeated from time 1.
    pub cycle: Option<Vec<Vec<f64>>>,
    /// Upper bound on the smallest coalition slack of any grid sequence.
    pub bound: f64,
    /// The bound alone rules out every grid sequence.
    pub proved_by_bound: bool,
    /// Largest smallest-slack among enumerated cycles.
    pub best_slack: f64,
    pub explored: usize,
    pub max_period: usize,
}

struct Problem {
    points: Vec<Vec<f64>>,
    /// `g[k][m]` for grid point `k` and coalition mask `m ≥ 1`.
    g: Vec<Vec<f64>>,
    /// `(1−δ) v_1(S)` per mask.
    c: Vec<f64>,
    /// `max_k g[k][m]`.
    gmax: Vec<f64>,
}

/// Searches cycles of period `1..=max_period` (repeated from time 1) on the grid.
/// `budget` caps the number of enumerated nodes.
pub fn periodic_fair_search(
    spec: &DynamicSpec,
    ds: &DiscountSpec,
    eps: f64,
    grid: Grid,
    max_period: usize,
    budget: usize,
) -> Result<PeriodicSearch> {
    if max_period == 0 {
        return Err(Error::input("max_period must be at least 1"));
    }
    let table = StageTable::build(spec, grid)?;
    table.require_constant_grand(spec.initial().grand_worth())?;
    let d = ds.delta;
    let n = spec.players();
    let masks = 1usize << n;
    let g: Vec<Vec<f64>> = table
        .points
        .iter()
        .zip(&table.games)
        .map(|(y, v)| {
            (0..masks)
                .map(|m| {
                    let ys: f64 = (0..n).filter(|i| m >> i & 1 == 1).map(|i| y[i]).sum();
                    ys - d * v.worth_local(m)
                })
                .collect()
        })
        .collect();
    let c: Vec<f64> = (0..masks)
        .map(|m| (1.0 - d) * spec.initial().worth_local(m))
        .collect();
    let gmax: Vec<f64> = (0..masks)
        .map(|m| g.iter().map(|r| r[m]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let prob = Problem {
        points: table.points,
        g,
        c,
        gmax,
    };
    let bound = relaxation_bound(&prob, masks)?;
    let mut out = PeriodicSearch {
        found: false,
        eps,
        cycle: None,
        bound,
        proved_by_bound: false,
        best_slack: f64::NEG_INFINITY,
        explored: 0,
        max_period,
    };
    if bound < -eps - 1e-9 {
        out.proved_by_bound = true;
        return Ok(out);
    }
    for p in 1..=max_period {
        let dp = d.powi(p as i32);
        let w: Vec<f64> = (0..p).map(|j| (1.0 - d) * d.powi(j as i32) / (1.0 - dp)).collect();
        let mut stack = Vec::with_capacity(p);
        let partial = vec![0.0; masks];
        if let Some(cycle) = dfs(&prob, &w, eps, &mut stack, partial, &mut out, budget)? {
            out.found = true;
            out.cycle = Some(cycle.iter().map(|&k| prob.points[k].clone()).collect());
            return Ok(out);
        }
    }
    Ok(out)
}

fn relaxation_bound(prob: &Problem, masks: usize) -> Result<f64> {
    let k = prob.points.len();
    // variables: μ over points, s⁺, s⁻; maximize s
    let mut obj = vec![0.0; k + 2];
    obj[k] = -1.0;
    obj[k + 1] = 1.0;
    let mut lp = LinearProgram::minimize(obj);
    let mut row = vec![1.0; k];
    row.extend([0.0, 0.0]);
    lp.add(row, Relation::Eq, 1.0);
    for m in 1..masks {
        // Σ μ g − s ≥ c
        let mut row: Vec<f64> = prob.g.iter().map(|r| r[m]).collect();
        row.extend([-1.0, 1.0]);
        lp.add(row, Relation::Ge, prob.c[m]);
    }
    let (x, _) = lp
        .solve()?
        .optimal()
        .ok_or_else(|| Error::Solver("relaxation bound LP has no optimum".into()))?;
    Ok(x[k] - x[k + 1])
}

fn dfs(
    prob: &Problem,
    w: &[f64],
    eps: f64,
    stack: &mut Vec<usize>,
    partial: Vec<f64>,
    out: &mut PeriodicSearch,
    budget: usize,
) -> Result<Option<Vec<usize>>> {
    out.explored += 1;
    if out.explored > budget {
        return Err(Error::Budget {
            reason: format!("periodic fair search exceeded {budget} nodes"),
            explored: out.explored,
        });
    }
    let j = stack.len();
    let masks = partial.len();
    if j == w.len() {
        let slack = (1..masks)
            .map(|m| partial[m] - prob.c[m])
            .fold(f64::INFINITY, f64::min);
        out.best_slack = out.best_slack.max(slack);
        return Ok((slack >= -eps - 1e-9).then(|| stack.clone()));
    }
    let rest: f64 = w[j..].iter().sum();
    let optimistic = (1..masks)
        .map(|m| partial[m] - prob.c[m] + rest * prob.gmax[m])
        .fold(f64::INFINITY, f64::min);
    if optimistic < -eps - 1e-9 {
        return Ok(None);
    }
    for k in 0..prob.points.len() {
        let next: Vec<f64> = partial
            .iter()
            .zip(&prob.g[k])
            .map(|(p, g)| p + w[j] * g)
            .collect();
        stack.push(k);
        let r = dfs(prob, w, eps, stack, next, out, budget)?;
        stack.pop();
        if r.is_some() {
            return Ok(r);
        }
    }
    Ok(None)
}
