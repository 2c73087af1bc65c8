//! End-to-end runs of the bundled examples.

use serde::Serialize;

use crate::bundled::{self, CONSTANT_WORTH};
use crate::credible_core::{credible_core_check, theorem3_equivalence, CredibleOptions, Policy};
use crate::dynamics::{AllocationSequence, DiscountSpec, DynamicSpec, Grid};
use crate::error::{Error, Result};
use crate::fair_core::{
    efficiency_check, fair_core_membership, periodic_fair_search, synthesize_fair_sequence,
    theorem1_certificate_search,
};
use crate::game_core::least_core;
use crate::spec_io::SpecFile;
use crate::stable_core::{
    constant_worth_criterion, stable_core_membership, stationary_search, StableOptions,
};

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    /// Named quantities behind the verdict.
    pub values: Vec<(String, f64)>,
}

pub struct Example {
    pub name: &'static str,
    pub about: &'static str,
    run: fn() -> Result<(bool, Vec<(String, f64)>)>,
}

impl Example {
    pub fn run(&self) -> Result<Outcome> {
        let (passed, values) = (self.run)().map_err(|e| Error::input(format!("{}: {e}", self.name)))?;
        Ok(Outcome {
            name: self.name,
            passed,
            values,
        })
    }
}

fn load(name: &str) -> Result<(DynamicSpec, SpecFile)> {
    let f = bundled::load(name)?;
    Ok((f.dynamic()?, f))
}

fn sequence(f: &SpecFile, name: &str) -> Result<AllocationSequence> {
    f.sequence()?
        .ok_or_else(|| Error::input(format!("{name} has no sequence")))
}

fn v(name: &str, x: f64) -> (String, f64) {
    (name.to_string(), x)
}

fn majority_least_core() -> Result<(bool, Vec<(String, f64)>)> {
    let mut out = Vec::new();
    let mut ok = true;
    for name in ["majority3", "alternating_u1u2"] {
        let g = bundled::load(name)?.game()?;
        let r = least_core(&g, 0.0)?;
        ok &= (r.epsilon_star - 1.0 / 3.0).abs() < 1e-6;
        out.push(v(&format!("{name}.epsilon_star"), r.epsilon_star));
    }
    Ok((ok, out))
}

fn alternating_fair() -> Result<(bool, Vec<(String, f64)>)> {
    let (spec, f) = load("alternating_u1u2")?;
    let seq = sequence(&f, "alternating_u1u2")?;
    let ds = DiscountSpec::new(0.99, 1e-8, 4.0)?;
    let loose = fair_core_membership(&spec, &seq, &ds, 0.05)?;
    let tight = fair_core_membership(&spec, &seq, &ds, 0.001)?;
    let target = [0.5, 1.5, 1.5, 0.5];
    let dist = loose
        .average
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let worst = loose.worst.as_ref().map_or(0.0, |w| w.slack);
    Ok((
        loose.member && !tight.member && dist <= 0.01,
        vec![v("worst_slack", worst), v("average_distance", dist)],
    ))
}

fn efficiency() -> Result<(bool, Vec<(String, f64)>)> {
    let (spec, f) = load("efficiency_e1")?;
    let seq = sequence(&f, "efficiency_e1")?;
    let ds = DiscountSpec::new(0.99, 1e-8, 1.0)?;
    let grid = Grid::new(3)?;
    let fair = fair_core_membership(&spec, &seq, &ds, 0.0)?;
    let e1 = efficiency_check(&spec, &seq, &ds, grid)?;
    let (uspec, uf) = load("uniform_preserving")?;
    let useq = sequence(&uf, "uniform_preserving")?;
    let uni = efficiency_check(&uspec, &useq, &ds, grid)?;
    Ok((
        fair.member && !e1.efficient && uni.efficient,
        vec![
            v("e1.share", e1.share),
            v("e1.optimum", e1.optimum),
            v("uniform.share", uni.share),
        ],
    ))
}

fn damped_majority() -> Result<(bool, Vec<(String, f64)>)> {
    let (spec, f) = load("damped_majority")?;
    let seq = sequence(&f, "damped_majority")?;
    let grid = Grid::default();
    let ds = DiscountSpec::new(0.99, 1e-6, 1.0)?;
    let fair = periodic_fair_search(&spec, &ds, 0.1, grid, 4, 1_000_000)?;
    let mut ok = !fair.found;
    let mut out = vec![v("fair_bound", fair.bound)];
    for delta in [0.5, 0.9, 0.99] {
        let ds = DiscountSpec::new(delta, 1e-6, 1.0)?;
        let opts = StableOptions {
            grid,
            ..Default::default()
        };
        let r = stable_core_membership(&spec, &seq, &ds, 0.01, opts)?;
        ok &= r.member;
        out.push(v(&format!("stable_violation@{delta}"), r.max_violation()));
    }
    Ok((ok, out))
}

fn cyclic_splits() -> Result<(bool, Vec<(String, f64)>)> {
    let (spec, _) = load("cyclic_splits")?;
    let grid = Grid::new(30)?;
    let cert = theorem1_certificate_search(&spec, grid, 3)?
        .ok_or_else(|| Error::SearchExhausted("no certificate for cyclic_splits".into()))?;
    let ds = DiscountSpec::new(0.99, 1e-4, 1.0)?;
    let seq = synthesize_fair_sequence(&cert, &ds)?;
    let eps = 2.0 * (1.0 - ds.delta) * spec.initial().max_abs_worth() + 0.01;
    let r = fair_core_membership(&spec, &seq, &ds, eps)?;
    let centre = cert.x.iter().map(|x| (x - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    let (control, _) = load("majority_control")?;
    let none = theorem1_certificate_search(&control, grid, 3)?.is_none();
    Ok((
        r.member && centre < 1e-9 && none,
        vec![
            v("certificate_slack", cert.slack),
            v("worst_fair_slack", r.worst.map_or(0.0, |w| w.slack)),
        ],
    ))
}

fn inflating() -> Result<(bool, Vec<(String, f64)>)> {
    let (spec, f) = load("inflating")?;
    let policy = f.policy().unwrap_or(Policy::Uniform);
    let ds = DiscountSpec::with_horizon(0.8, 20, 1.2)?;
    let opts = CredibleOptions {
        grid: Grid::new(10)?,
        h_check: 3,
        stages: 3,
        ..Default::default()
    };
    let c = credible_core_check(&spec, &policy, &ds, 0.01, 1, opts)?;
    let t = theorem3_equivalence(&spec, &policy, &ds, 0.01, 1, opts)?;
    let same = match (&t.earliest_a, &t.earliest_b) {
        (Some(a), Some(b)) => a.history == b.history && a.coalition == b.coalition,
        _ => false,
    };
    Ok((
        !c.credible && t.a && t.b && t.agree && same,
        vec![v("one_deviation_gain", t.a_gain), v("multi_stage_gain", t.b_gain)],
    ))
}

fn constant_worth() -> Result<(bool, Vec<(String, f64)>)> {
    let ds = DiscountSpec::new(0.9, 1e-6, 1.0)?;
    let grid = Grid::default();
    let eps = 0.05;
    let mut ok = true;
    let mut out = Vec::new();
    for (name, text) in CONSTANT_WORTH {
        let spec = SpecFile::parse(text)?.dynamic()?;
        let c = constant_worth_criterion(&spec, &ds, grid)?;
        let opts = StableOptions {
            grid,
            ..Default::default()
        };
        let s = stationary_search(&spec, &ds, eps, grid, opts)?;
        ok &= c.predicts(eps) == s.found;
        out.push(v(&format!("{name}.epsilon_star"), c.epsilon_star));
    }
    Ok((ok, out))
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "least-core",
        about: "majority and triangle games have least-core value 1/3",
        run: majority_least_core,
    },
    Example {
        name: "alternating-fair",
        about: "alternating triangle games: fair at eps 0.05, not at 0.001",
        run: alternating_fair,
    },
    Example {
        name: "efficiency",
        about: "e_1 then zeros is fair but wasteful; equal splits are efficient",
        run: efficiency,
    },
    Example {
        name: "damped-majority",
        about: "empty fair core, uniform splits stable",
        run: damped_majority,
    },
    Example {
        name: "cyclic-splits",
        about: "convexification certificate at the centre and its fair sequence",
        run: cyclic_splits,
    },
    Example {
        name: "inflating",
        about: "a splitting pair gains; one-shot and multi-stage checks agree",
        run: inflating,
    },
    Example {
        name: "constant-worth",
        about: "least core of v_* predicts stationary stable sequences on 10 instances",
        run: constant_worth,
    },
];
