//! Dynamics whose worths depend only on aggregates: `V(S; x)(T) = U_T(x(T))`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicSpec, State, Transition};
use crate::error::{Error, Result};
use crate::game_core::{Allocation, Coalition, Game};

/// Fixed-point tolerance `|U(f) − f|`.
pub const TOL_FP: f64 = 1e-8;
/// Iteration cap for fixed-point searches.
pub const MAX_ITERATIONS: usize = 1_000_000;

/// A continuous one-step worth map `c ↦ U(c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregateMap {
    Identity,
    Constant { value: f64 },
    /// `min(slope·c + intercept, cap)`.
    Affine {
        slope: f64,
        intercept: f64,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// Linear interpolation through knots sorted by abscissa, extended with the end slopes.
    Piecewise { knots: Vec<[f64; 2]> },
}

impl AggregateMap {
    pub fn eval(&self, c: f64) -> f64 {
        match self {
            AggregateMap::Identity => c,
            AggregateMap::Constant { value } => *value,
            AggregateMap::Affine {
                slope,
                intercept,
                cap,
            } => {
                let v = slope * c + intercept;
                cap.map_or(v, |m| v.min(m))
            }
            AggregateMap::Piecewise { knots } => {
                let k = knots.len();
                if k == 1 {
                    return knots[0][1];
                }
                let seg = if c <= knots[0][0] {
                    0
                } else if c >= knots[k - 1][0] {
                    k - 2
                } else {
                    knots.windows(2).position(|w| c <= w[1][0]).unwrap_or(k - 2)
                };
                let ([x0, y0], [x1, y1]) = (knots[seg], knots[seg + 1]);
                if x1 == x0 {
                    return y1;
                }
                y0 + (y1 - y0) * (c - x0) / (x1 - x0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let AggregateMap::Piecewise { knots } = self {
            if knots.is_empty() || knots.windows(2).any(|w| w[1][0] < w[0][0]) {
                return Err(Error::input("piecewise map needs knots sorted by abscissa"));
            }
        }
        Ok(())
    }
}

/// Per-coalition maps `U^1_T` for every nonempty `T ⊆ N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateDynamic {
    n: usize,
    /// Indexed by coalition bits; entry 0 unused.
    maps: Vec<AggregateMap>,
    /// `v_1(N)`: the range of entries considered is `[0, scale]`.
    scale: f64,
    /// Resolution of the evaluation grid on `[0, scale]`.
    eval_steps: u32,
}

/// Limit of the iterated map from one entry.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub coalition: Coalition,
    pub entry: f64,
    pub limit: f64,
    pub iterations: usize,
    /// A time after which every grid entry's orbit is within `eps` of its limit.
    pub certified_m: usize,
}

/// The limit game `u_x(T) = f_T(x(T))`.
#[derive(Clone, Debug, Serialize)]
pub struct InducedGame {
    pub base: Allocation,
    pub game: Game,
}

impl AggregateDynamic {
    pub fn new(n: usize, maps: Vec<AggregateMap>, scale: f64) -> Result<Self> {
        if maps.len() != 1 << n {
            return Err(Error::input(format!(
                "need {} maps (one per coalition bitset), got {}",
                1usize << n,
                maps.len()
            )));
        }
        for m in &maps {
            m.validate()?;
        }
        if !(scale > 0.0) {
            return Err(Error::input("v_1(N) must be positive"));
        }
        Ok(Self {
            n,
            maps,
            scale,
            eval_steps: 20,
        })
    }

    /// Builds the maps from a closure over coalitions.
    pub fn from_fn(n: usize, scale: f64, mut f: impl FnMut(Coalition) -> AggregateMap) -> Result<Self> {
        let maps = (0..1u32 << n)
            .map(|b| {
                if b == 0 {
                    AggregateMap::Constant { value: 0.0 }
                } else {
                    f(Coalition::from_bits(b))
                }
            })
            .collect();
        Self::new(n, maps, scale)
    }

    pub fn with_eval_steps(mut self, steps: u32) -> Self {
        self.eval_steps = steps.max(1);
        self
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn map(&self, t: Coalition) -> &AggregateMap {
        &self.maps[t.bits() as usize]
    }

    fn divergence_cap(&self) -> f64 {
        1e6 * self.scale
    }

    /// Grid of entries `{scale · j / steps}` on which certificates are evaluated.
    pub fn eval_grid(&self) -> Vec<f64> {
        (0..=self.eval_steps)
            .map(|j| self.scale * j as f64 / self.eval_steps as f64)
            .collect()
    }

    /// `U^1_T(c)`.
    pub fn step(&self, t: Coalition, c: f64) -> Result<f64> {
        let v = self.map(t).eval(c);
        if !v.is_finite() || v.abs() > self.divergence_cap() {
            return Err(Error::Divergence {
                coalition: t,
                reason: format!("U(c) = {v} exceeds the divergence cap"),
            });
        }
        Ok(v)
    }

    /// Checks that `U^1_T` is nondecreasing on a tenfold refinement of the evaluation grid.
    pub fn check_monotone(&self, t: Coalition) -> Result<()> {
        let steps = self.eval_steps as usize * 10;
        let mut prev = f64::NEG_INFINITY;
        for j in 0..=steps {
            let c = self.scale * j as f64 / steps as f64;
            let v = self.map(t).eval(c);
            if v < prev - 1e-12 {
                return Err(Error::Hypothesis(format!(
                    "U for {t} decreases near c = {c}"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    /// Rescales so that `v_1(N) = 1`: `U'(c) = U(c·s)/s`. Returns the factor `s`.
    pub fn normalized(&self) -> (AggregateDynamic, f64) {
        let s = self.scale;
        let maps = self
            .maps
            .iter()
            .map(|m| scale_map(m, s))
            .collect();
        (
            AggregateDynamic {
                n: self.n,
                maps,
                scale: 1.0,
                eval_steps: self.eval_steps,
            },
            s,
        )
    }

    /// Game over `s` with `worth(T) = U_T(x(T))` for the payoff fragment `x` over `s`.
    pub fn game_after(&self, x: &Allocation) -> Result<Game> {
        let s = x.coalition();
        let mut err = None;
        let g = Game::from_fn(s, |t| match self.step(t, x.total(t)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(g),
        }
    }

    /// `V(N; x)` for an allocation with every player getting `total/n`; used as `v_1`.
    pub fn uniform_initial_game(&self) -> Result<Game> {
        let n = self.n;
        let x = Allocation::new(Coalition::grand(n), vec![self.scale / n as f64; n], 0.0)?;
        self.game_after(&x)
    }

    /// Wraps the dynamic into a spec with `v_1 = V(N; uniform)`.
    pub fn spec(&self, floor: f64) -> Result<DynamicSpec> {
        let v1 = self.uniform_initial_game()?;
        DynamicSpec::new(v1, std::sync::Arc::new(self.clone()), floor)
    }
}

fn scale_map(m: &AggregateMap, s: f64) -> AggregateMap {
    match m {
        AggregateMap::Identity => AggregateMap::Identity,
        AggregateMap::Constant { value } => AggregateMap::Constant { value: value / s },
        AggregateMap::Affine {
            slope,
            intercept,
            cap,
        } => AggregateMap::Affine {
            slope: *slope,
            intercept: intercept / s,
            cap: cap.map(|c| c / s),
        },
        AggregateMap::Piecewise { knots } => AggregateMap::Piecewise {
            knots: knots.iter().map(|[x, y]| [x / s, y / s]).collect(),
        },
    }
}

impl Transition for AggregateDynamic {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        Ok((self.game_after(&state.allocation)?, state.aux.clone()))
    }

    fn aggregate(&self) -> Option<&AggregateDynamic> {
        Some(self)
    }

    fn name(&self) -> &str {
        "aggregate"
    }
}

/// `U^t_T(c)`, the `t`-fold composition.
pub fn iterate_u(ad: &AggregateDynamic, t: Coalition, c: f64, times: usize) -> Result<f64> {
    if times == 0 {
        return Err(Error::input("iteration count must be at least 1"));
    }
    if c < 0.0 {
        return Err(Error::input(format!("entry must be nonnegative, got {c}")));
    }
    let mut v = c;
    for _ in 0..times {
        v = ad.step(t, v)?;
    }
    Ok(v)
}

/// Iterates `U_T` from `c` until it settles; returns the limit and iteration count.
fn limit_of(ad: &AggregateDynamic, t: Coalition, c: f64) -> Result<(f64, usize)> {
    let mut v = c;
    for it in 0..MAX_ITERATIONS {
        let next = ad.step(t, v)?;
        if (next - v).abs() <= 1e-12 * (1.0 + v.abs()) {
            return Ok((next, it + 1));
        }
        v = next;
    }
    let gap = (ad.step(t, v)? - v).abs();
    if gap <= TOL_FP {
        return Ok((v, MAX_ITERATIONS));
    }
    Err(Error::Divergence {
        coalition: t,
        reason: format!("no fixed point within {MAX_ITERATIONS} iterations (residual {gap})"),
    })
}

/// `f_T(c)` with a uniform convergence time certified on the evaluation grid.
pub fn fixed_point(ad: &AggregateDynamic, t: Coalition, c: f64, eps: f64) -> Result<FixedPointReport> {
    if !(eps > 0.0) {
        return Err(Error::input("eps must be positive"));
    }
    if c < 0.0 {
        return Err(Error::input(format!("entry must be nonnegative, got {c}")));
    }
    ad.check_monotone(t)?;
    let (limit, iterations) = limit_of(ad, t, c)?;
    let mut certified_m = 1;
    for g in ad.eval_grid() {
        let (f, _) = limit_of(ad, t, g)?;
        let mut v = ad.step(t, g)?;
        let mut m = 1;
        while (f - v).abs() >= eps {
            v = ad.step(t, v)?;
            m += 1;
            if m > MAX_ITERATIONS {
                return Err(Error::Divergence {
                    coalition: t,
                    reason: "orbit never enters the eps-band".into(),
                });
            }
        }
        certified_m = certified_m.max(m);
    }
    Ok(FixedPointReport {
        coalition: t,
        entry: c,
        limit,
        iterations,
        certified_m,
    })
}

/// `f_T(c)` without the grid certificate.
pub fn limit(ad: &AggregateDynamic, t: Coalition, c: f64) -> Result<f64> {
    Ok(limit_of(ad, t, c)?.0)
}

/// The game `u_x`.
pub fn induced_game(ad: &AggregateDynamic, x: &Allocation) -> Result<InducedGame> {
    let s = x.coalition();
    let mut worth = vec![0.0; 1 << s.len()];
    for (m, w) in worth.iter_mut().enumerate().skip(1) {
        let t = s.from_local_mask(m);
        *w = limit(ad, t, x.total(t))?;
    }
    Ok(InducedGame {
        base: x.clone(),
        game: Game::from_table(s, worth)?,
    })
}
