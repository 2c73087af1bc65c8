//! Splits, convexifications and the certificates that characterize fair-core non-emptiness.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{AllocationSequence, DiscountSpec, DynamicSpec, Grid, State};
use crate::error::{Error, Result};
use crate::game_core::simplex::{LinearProgram, Relation};
use crate::game_core::{convex_combine, Allocation, Game};

const WEIGHT_EPS: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;

/// `x = Σ α_j y_j` with every `y_j` an allocation.
#[derive(Clone, Debug, Serialize)]
pub struct Split {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ α_j y_j`.
    pub fn barycenter(&self) -> Vec<f64> {
        let n = self.points.first().map_or(0, |p| p.len());
        let mut x = vec![0.0; n];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += w * pi;
            }
        }
        x
    }
}

/// `x` lies in the (`slack`-relaxed) core of `v = Σ α_j V(N; y_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexCertificate {
    pub x: Vec<f64>,
    pub split: Split,
    pub v: Game,
    /// `min_{T ≠ ∅, N} x(T) − v(T)`.
    pub slack: f64,
}

/// Stage games `V(N; y)` for every grid allocation `y` of `v_1`.
pub(crate) struct StageTable {
    pub points: Vec<Vec<f64>>,
    pub games: Vec<Game>,
}

impl StageTable {
    pub fn build(spec: &DynamicSpec, grid: Grid) -> Result<Self> {
        if spec.uses_aux() {
            return Err(Error::Config(
                "convexification needs stage games that depend on the allocation alone".into(),
            ));
        }
        let points = grid.allocations(spec.initial(), spec.floor())?;
        let games = points
            .par_iter()
            .map(|y| {
                let st = State::new(
                    Allocation::new(spec.grand(), y.clone(), spec.floor())?,
                    spec.initial_aux().to_vec(),
                );
                Ok(spec.transition(&st)?.0)
            })
            .collect::<Result<Vec<Game>>>()?;
        Ok(Self { points, games })
    }

    /// Checks `V(N; y)(N) = d` on the grid.
    pub fn require_constant_grand(&self, d: f64) -> Result<()> {
        for (y, g) in self.points.iter().zip(&self.games) {
            if (g.grand_worth() - d).abs() > 1e-9 * (1.0 + d.abs()) {
                return Err(Error::Hypothesis(format!(
                    "grand worth {} after {y:?} differs from {d}",
                    g.grand_worth()
                )));
            }
        }
        Ok(())
    }
}

/// Grid split of `x` whose games average to `v`, with at most `k_max` points.
pub fn convexification_contains(
    spec: &DynamicSpec,
    x: &[f64],
    v: &Game,
    k_max: usize,
    grid: Grid,
) -> Result<Option<Split>> {
    if k_max < 1 {
        return Err(Error::input("k_max must be at least 1"));
    }
    let table = StageTable::build(spec, grid)?;
    let m = table.points.len();
    let n = spec.players();
    let mut lp = LinearProgram::minimize(vec![0.0; m]);
    for i in 0..n {
        lp.add(table.points.iter().map(|y| y[i]).collect(), Relation::Eq, x[i]);
    }
    lp.add(vec![1.0; m], Relation::Eq, 1.0);
    for mask in 1..v.table().len() {
        lp.add(
            table.games.iter().map(|g| g.worth_local(mask)).collect(),
            Relation::Eq,
            v.worth_local(mask),
        );
    }
    let Some((alpha, _)) = lp.solve()?.optimal() else {
        return Ok(None);
    };
    let split = support(&table, &alpha);
    Ok((split.len() <= k_max).then_some(split))
}

fn support(table: &StageTable, alpha: &[f64]) -> Split {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (y, &a) in table.points.iter().zip(alpha) {
        if a > WEIGHT_EPS {
            points.push(y.clone());
            weights.push(a);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Split { points, weights }
}

/// Best core slack of `x` over splits supported on `allowed` grid points:
/// maximize `s` subject to `x(T) − Σ α_y V(N;y)(T) ≥ s` for proper `T`.
fn best_split(
    table: &StageTable,
    allowed: &[usize],
    x: &[f64],
    grand_slack: Option<f64>,
) -> Result<Option<(f64, Vec<f64>)>> {
    let n = x.len();
    let m = allowed.len();
    // variables: α over allowed points, s⁺, s⁻
    let mut obj = vec![0.0; m + 2];
    obj[m] = -1.0;
    obj[m + 1] = 1.0;
    let mut lp = LinearProgram::minimize(obj);
    for i in 0..n {
        let mut row: Vec<f64> = allowed.iter().map(|&k| table.points[k][i]).collect();
        row.extend([0.0, 0.0]);
        lp.add(row, Relation::Eq, x[i]);
    }
    let mut row = vec![1.0; m];
    row.extend([0.0, 0.0]);
    lp.add(row, Relation::Eq, 1.0);
    let full = (1usize << n) - 1;
    for mask in 1..=full {
        let xt: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| x[i]).sum();
        let mut row: Vec<f64> = allowed
            .iter()
            .map(|&k| table.games[k].worth_local(mask))
            .collect();
        if mask == full {
            if let Some(g) = grand_slack {
                row.extend([0.0, 0.0]);
                lp.add(row, Relation::Le, xt + g);
            }
            continue;
        }
        // Σ α V(T) + s ≤ x(T)
        row.extend([1.0, -1.0]);
        lp.add(row, Relation::Le, xt);
    }
    let Some((sol, _)) = lp.solve()?.optimal() else {
        return Ok(None);
    };
    let s = sol[m] - sol[m + 1];
    let mut alpha = vec![0.0; table.points.len()];
    for (j, &k) in allowed.iter().enumerate() {
        alpha[k] = sol[j];
    }
    Ok(Some((s, alpha)))
}

fn certificate(table: &StageTable, x: &[f64], alpha: &[f64], slack: f64) -> Result<ConvexCertificate> {
    let split = support(table, alpha);
    let games: Vec<Game> = table
        .points
        .iter()
        .zip(&table.games)
        .filter(|(y, _)| split.points.contains(y))
        .map(|(_, g)| g.clone())
        .collect();
    let v = convex_combine(&games, &split.weights)?;
    Ok(ConvexCertificate {
        x: x.to_vec(),
        split,
        v,
        slack,
    })
}

/// Search over grid `x` for `v ∈ conv V(N; x)` with `x` in the core of `v`.
/// Returns the certificate with the largest core slack, if any slack is nonnegative.
pub fn theorem1_certificate_search(
    spec: &DynamicSpec,
    grid: Grid,
    k_max: usize,
) -> Result<Option<ConvexCertificate>> {
    let table = StageTable::build(spec, grid)?;
    table.require_constant_grand(spec.initial().grand_worth())?;
    let all: Vec<usize> = (0..table.points.len()).collect();
    search(&table, &all, &table.points, 0.0, None, k_max)
}

fn search(
    table: &StageTable,
    allowed: &[usize],
    candidates: &[Vec<f64>],
    tol: f64,
    grand_slack: Option<f64>,
    k_max: usize,
) -> Result<Option<ConvexCertificate>> {
    let found: Vec<Result<Option<(f64, Vec<f64>, Vec<f64>)>>> = candidates
        .par_iter()
        .map(|x| {
            Ok(best_split(table, allowed, x, grand_slack)?
                .filter(|(s, _)| *s >= -tol - FEAS_TOL)
                .map(|(s, a)| (s, a, x.clone())))
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for f in found {
        if let Some(c) = f? {
            let support = c.1.iter().filter(|a| **a > WEIGHT_EPS).count();
            if support <= k_max && best.as_ref().map_or(true, |b| c.0 > b.0 + 1e-12) {
                best = Some(c);
            }
        }
    }
    best.map(|(s, a, x)| certificate(table, &x, &a, s)).transpose()
}

/// Like [`theorem1_certificate_search`] with split points in `M_γ` (grid points whose
/// grand worth is within `γ` of the grid maximum) and `x` only in the `γ`-core of `v`.
pub fn efficient_fair_certificate_search(
    spec: &DynamicSpec,
    gamma: f64,
    grid: Grid,
    k_max: usize,
) -> Result<Option<ConvexCertificate>> {
    if !(gamma > 0.0) {
        return Err(Error::input("gamma must be positive"));
    }
    let table = StageTable::build(spec, grid)?;
    let sup = table
        .games
        .iter()
        .map(|g| g.grand_worth())
        .fold(f64::NEG_INFINITY, f64::max);
    let allowed: Vec<usize> = (0..table.points.len())
        .filter(|&k| table.games[k].grand_worth() > sup - gamma)
        .collect();
    if allowed.is_empty() {
        return Err(Error::Refinement(
            "no grid allocation keeps the grand worth within gamma of its maximum; refine the grid".into(),
        ));
    }
    search(&table, &allowed, &table.points, gamma, Some(gamma), k_max)
}

/// Assigns periods `t = 1, 2, …` to split classes so that
/// `(1−δ) Σ_{t ∈ T^j} δ^{t−1} → α_j`, each period going to the class with the
/// largest remaining weight. Returns the class of each of the first `len` periods.
pub fn period_partition(weights: &[f64], delta: f64, len: usize) -> Result<Vec<usize>> {
    if weights.is_empty() || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::input("weights must be nonnegative and nonempty"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("weights sum to {total}, not 1")));
    }
    let mut rem = weights.to_vec();
    let mut out = Vec::with_capacity(len);
    let mut w = 1.0 - delta;
    for t in 1..=len {
        let (j, &r) = rem
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |b, c| if *c.1 > *b.1 { c } else { b });
        if r < w - 1e-12 {
            return Err(Error::Partition {
                delta,
                reason: format!(
                    "period {t} weighs {w:.3e} but the largest remaining class weight is {r:.3e}; \
                     use a discount factor of at least {:.4}",
                    1.0 - 1.0 / weights.iter().filter(|a| **a > 0.0).count() as f64
                ),
            });
        }
        rem[j] -= w;
        out.push(j);
        w *= delta;
    }
    Ok(out)
}

/// The sequence `x_t = y_j` for `t ∈ T^j`, unrolled to the discount horizon.
pub fn synthesize_fair_sequence(cert: &ConvexCertificate, ds: &DiscountSpec) -> Result<AllocationSequence> {
    if cert.split.len() == 1 {
        return Ok(AllocationSequence::constant(cert.split.points[0].clone()));
    }
    let classes = period_partition(&cert.split.weights, ds.delta, ds.horizon)?;
    AllocationSequence::finite(
        classes
            .into_iter()
            .map(|j| cert.split.points[j].clone())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{cyclic_splits_spec, static_spec};

    #[test]
    fn half_half_partition_at_one_half() {
        let p = period_partition(&[0.5, 0.5], 0.5, 6).unwrap();
        assert_eq!(p, vec![0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn partition_overshoot_is_reported() {
        assert!(matches!(
            period_partition(&[0.1, 0.9], 0.2, 5),
            Err(Error::Partition { .. })
        ));
    }

    #[test]
    fn constant_dynamic_trivial_split() {
        let g = Game::additive(&[0.5, 0.5]);
        let spec = static_spec(g.clone());
        let s = convexification_contains(&spec, &[0.5, 0.5], &g, 1, Grid::new(4).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(s.len(), 1);
        let c = theorem1_certificate_search(&spec, Grid::new(4).unwrap(), 4).unwrap().unwrap();
        assert_eq!(c.split.len(), 1);
    }

    #[test]
    fn e_i_split_of_center() {
        let spec = cyclic_splits_spec();
        let third = 1.0 / 3.0;
        let v = Game::additive(&[third; 3]);
        let s = convexification_contains(&spec, &[third; 3], &v, 8, Grid::new(30).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.weights.iter().all(|w| (w - third).abs() < 1e-9));
        // three permutations of (0.35, 0.35, 0.3) all induce majority and average to the center
        let maj = Game::majority(3, 1.0);
        let s = convexification_contains(&spec, &[third; 3], &maj, 8, Grid::new(20).unwrap())
            .unwrap()
            .unwrap();
        assert!(s.points.iter().all(|y| y.iter().all(|v| *v <= 0.8)));
        // p_{-1} alone needs all weight on e_1, which does not average to the center
        let p0 = crate::dynamics::families::p_minus(0);
        assert!(convexification_contains(&spec, &[third; 3], &p0, 8, Grid::new(20).unwrap())
            .unwrap()
            .is_none());
        assert!(convexification_contains(&spec, &[third; 3], &v, 0, Grid::new(20).unwrap()).is_err());
    }
}

#[cfg(test)]
mod round_trip {
    use super::*;
    use crate::dynamics::families::cyclic_splits_spec;
    use crate::fair_core::fair_core_membership;

    #[test]
    fn e_i_certificate_synthesizes_fair_sequence() {
        let spec = cyclic_splits_spec();
        let c = theorem1_certificate_search(&spec, Grid::new(30).unwrap(), 8)
            .unwrap()
            .unwrap();
        for xi in &c.x {
            assert!((xi - 1.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(c.split.len(), 3);
        let ds = DiscountSpec::new(0.99, 1e-6, 1.0).unwrap();
        let seq = synthesize_fair_sequence(&c, &ds).unwrap();
        let r = fair_core_membership(&spec, &seq, &ds, 2.0 * 0.01 + 0.01).unwrap();
        assert!(r.member, "{:?}", r.worst);
        for a in &r.average {
            assert!((a - 1.0 / 3.0).abs() < 0.01);
        }
    }
}
