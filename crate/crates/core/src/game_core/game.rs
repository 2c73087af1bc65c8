use serde::{Deserialize, Serialize};

use super::Coalition;
use crate::error::{Error, Result};

/// Absolute tolerance used for every feasibility comparison.
pub const TOL_FEAS: f64 = 1e-9;

/// A characteristic function over a grand coalition, stored densely.
///
/// `worth` is indexed by local masks over the members of `grand`
/// (bit `k` set means the `k`-th smallest member belongs to the coalition).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Game {
    grand: Coalition,
    worth: Vec<f64>,
}

impl Game {
    /// Builds a game from a local-mask table. Checks `worth(∅) = 0` and finiteness.
    pub fn from_table(grand: Coalition, worth: Vec<f64>) -> Result<Self> {
        if worth.len() != 1 << grand.len() {
            return Err(Error::input(format!(
                "worth table has {} entries, expected {}",
                worth.len(),
                1usize << grand.len()
            )));
        }
        if worth[0].abs() > TOL_FEAS {
            return Err(Error::input("worth of the empty coalition must be 0"));
        }
        if let Some(bad) = worth.iter().position(|w| !w.is_finite()) {
            return Err(Error::input(format!(
                "non-finite worth for coalition {}",
                grand.from_local_mask(bad)
            )));
        }
        let mut worth = worth;
        worth[0] = 0.0;
        Ok(Self { grand, worth })
    }

    /// Builds a game by evaluating `f` on every nonempty subset of `grand`.
    pub fn from_fn(grand: Coalition, mut f: impl FnMut(Coalition) -> f64) -> Self {
        let worth = (0..1usize << grand.len())
            .map(|m| if m == 0 { 0.0 } else { f(grand.from_local_mask(m)) })
            .collect();
        Self { grand, worth }
    }

    /// The additive game `T ↦ Σ_{i∈T} weights[i]` on `{0, .., n-1}`.
    pub fn additive(weights: &[f64]) -> Self {
        let grand = Coalition::grand(weights.len());
        Self::from_fn(grand, |t| t.members().map(|i| weights[i]).sum())
    }

    /// Simple majority game scaled by `scale`: worth `scale` iff `|T| > n/2`.
    pub fn majority(n: usize, scale: f64) -> Self {
        Self::from_fn(Coalition::grand(n), |t| {
            if 2 * t.len() > n {
                scale
            } else {
                0.0
            }
        })
    }

    /// The all-zero game over `grand`.
    pub fn zero(grand: Coalition) -> Self {
        Self {
            grand,
            worth: vec![0.0; 1 << grand.len()],
        }
    }

    pub fn grand(&self) -> Coalition {
        self.grand
    }

    pub fn players(&self) -> usize {
        self.grand.len()
    }

    /// Worth of `t`, which must be a subset of the grand coalition.
    pub fn worth(&self, t: Coalition) -> f64 {
        debug_assert!(t.is_subset_of(self.grand), "{t} not within {}", self.grand);
        self.worth[self.grand.local_mask(t)]
    }

    pub fn worth_local(&self, mask: usize) -> f64 {
        self.worth[mask]
    }

    pub fn grand_worth(&self) -> f64 {
        self.worth[self.worth.len() - 1]
    }

    pub fn table(&self) -> &[f64] {
        &self.worth
    }

    /// Largest absolute worth.
    pub fn max_abs_worth(&self) -> f64 {
        self.worth.iter().fold(0.0f64, |m, w| m.max(w.abs()))
    }

    /// The subgame on `s ⊆ grand`.
    pub fn restrict(&self, s: Coalition) -> Result<Game> {
        if !s.is_subset_of(self.grand) {
            return Err(Error::input(format!("{s} is not a subset of {}", self.grand)));
        }
        Ok(Game::from_fn(s, |t| self.worth(t)))
    }

    /// Pointwise `factor · self`.
    pub fn scaled(&self, factor: f64) -> Game {
        Game {
            grand: self.grand,
            worth: self.worth.iter().map(|w| w * factor).collect(),
        }
    }

    /// Relabels players: `perm[i]` is the new index of old player `i`. Only for games over `{0..n-1}`.
    pub fn permuted(&self, perm: &[usize]) -> Game {
        let n = perm.len();
        let inv = {
            let mut inv = vec![0; n];
            for (old, &new) in perm.iter().enumerate() {
                inv[new] = old;
            }
            inv
        };
        Game::from_fn(self.grand, |t| {
            self.worth(Coalition::from_members(t.members().map(|i| inv[i])))
        })
    }

    /// Largest pointwise difference between two games on the same grand coalition.
    pub fn distance(&self, other: &Game) -> f64 {
        assert_eq!(self.grand, other.grand);
        self.worth
            .iter()
            .zip(&other.worth)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Whether every worth is nonnegative (the model's default domain).
    pub fn is_nonnegative(&self) -> bool {
        self.worth.iter().all(|w| *w >= -TOL_FEAS)
    }

    /// Superadditivity over disjoint pairs, up to `tol`.
    pub fn is_superadditive(&self, tol: f64) -> bool {
        let full = self.worth.len();
        for a in 1..full {
            // enumerate b ⊆ complement(a), b > a to visit each pair once
            let rest = (full - 1) & !a;
            let mut b = rest;
            while b > 0 {
                if b > a && self.worth[a] + self.worth[b] > self.worth[a | b] + tol {
                    return false;
                }
                b = (b - 1) & rest;
            }
        }
        true
    }
}

/// Weighted sum `Σ_j weights[j] · games[j]`.
pub fn convex_combine(games: &[Game], weights: &[f64]) -> Result<Game> {
    if games.is_empty() || games.len() != weights.len() {
        return Err(Error::input("need one weight per game and at least one game"));
    }
    if weights.iter().any(|w| *w < -TOL_FEAS) {
        return Err(Error::input("weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("weights sum to {total}, expected 1")));
    }
    let grand = games[0].grand;
    if let Some(g) = games.iter().find(|g| g.grand != grand) {
        return Err(Error::input(format!(
            "mismatched grand coalitions {grand} and {}",
            g.grand
        )));
    }
    let mut worth = vec![0.0; games[0].worth.len()];
    for (g, w) in games.iter().zip(weights) {
        for (acc, v) in worth.iter_mut().zip(&g.worth) {
            *acc += w * v;
        }
    }
    Ok(Game { grand, worth })
}

/// A payoff vector over the members of `coalition`, in increasing member order.
///
/// Allocations of a game are locally efficient and respect the floor; use
/// [`Allocation::of`] to build a checked one. Restrictions to sub-coalitions
/// (see [`Allocation::restrict`]) are plain fragments and carry no efficiency guarantee.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    coalition: Coalition,
    payoffs: Vec<f64>,
    floor: f64,
}

impl Allocation {
    /// Unchecked constructor for fragments and intermediate vectors.
    pub fn new(coalition: Coalition, payoffs: Vec<f64>, floor: f64) -> Result<Self> {
        if payoffs.len() != coalition.len() {
            return Err(Error::input(format!(
                "payoff vector has {} entries but {coalition} has {} members",
                payoffs.len(),
                coalition.len()
            )));
        }
        Ok(Self {
            coalition,
            payoffs,
            floor,
        })
    }

    /// Checked allocation of `game`: sums to the grand worth and every payoff ≥ `floor`.
    pub fn of(game: &Game, payoffs: Vec<f64>, floor: f64) -> Result<Self> {
        let a = Self::new(game.grand(), payoffs, floor)?;
        a.check_allocation_of(game)?;
        Ok(a)
    }

    /// Verifies local efficiency and the floor against `game`.
    pub fn check_allocation_of(&self, game: &Game) -> Result<()> {
        if self.coalition != game.grand() {
            return Err(Error::input(format!(
                "allocation over {} used for a game over {}",
                self.coalition,
                game.grand()
            )));
        }
        let sum: f64 = self.payoffs.iter().sum();
        let scale = 1.0 + game.grand_worth().abs();
        if (sum - game.grand_worth()).abs() > 1e-7 * scale {
            return Err(Error::input(format!(
                "payoffs sum to {sum}, grand worth is {}",
                game.grand_worth()
            )));
        }
        if let Some((k, p)) = self
            .payoffs
            .iter()
            .enumerate()
            .find(|(_, p)| **p < self.floor - 1e-7)
        {
            return Err(Error::input(format!(
                "payoff {p} of player {} is below the floor {}",
                self.coalition.from_local_mask(1 << k).label(),
                self.floor
            )));
        }
        Ok(())
    }

    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn into_payoffs(self) -> Vec<f64> {
        self.payoffs
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Payoff of global player `i`.
    pub fn get(&self, i: usize) -> Option<f64> {
        self.coalition.rank_of(i).map(|k| self.payoffs[k])
    }

    /// Aggregate `x(T)` for `T ⊆ coalition`.
    pub fn total(&self, t: Coalition) -> f64 {
        debug_assert!(t.is_subset_of(self.coalition));
        self.coalition
            .members()
            .zip(&self.payoffs)
            .filter(|(i, _)| t.contains(*i))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn sum(&self) -> f64 {
        self.payoffs.iter().sum()
    }

    /// The sub-vector on `t ⊆ coalition`.
    pub fn restrict(&self, t: Coalition) -> Result<Allocation> {
        if !t.is_subset_of(self.coalition) {
            return Err(Error::input(format!("{t} is not a subset of {}", self.coalition)));
        }
        let payoffs = self
            .coalition
            .members()
            .zip(&self.payoffs)
            .filter(|(i, _)| t.contains(*i))
            .map(|(_, p)| *p)
            .collect();
        Ok(Allocation {
            coalition: t,
            payoffs,
            floor: self.floor,
        })
    }
}

/// Whether `x(T) ≥ worth(T) − eps` for every nonempty `T ⊆ grand`.
pub fn core_membership(game: &Game, x: &Allocation, eps: f64) -> Result<bool> {
    Ok(core_violation(game, x)? <= eps + TOL_FEAS)
}

/// Largest excess `worth(T) − x(T)` over nonempty `T`, clamped below at `-∞`.
pub fn core_violation(game: &Game, x: &Allocation) -> Result<f64> {
    if x.coalition() != game.grand() || x.payoffs().len() != game.players() {
        return Err(Error::input(format!(
            "allocation over {} does not match game over {}",
            x.coalition(),
            game.grand()
        )));
    }
    let n = game.players();
    // subset sums by local mask, built incrementally
    let mut sums = vec![0.0; 1 << n];
    let mut worst = f64::NEG_INFINITY;
    for m in 1..1usize << n {
        let low = m.trailing_zeros() as usize;
        sums[m] = sums[m & (m - 1)] + x.payoffs()[low];
        worst = worst.max(game.worth_local(m) - sums[m]);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u1() -> Game {
        Game::from_fn(Coalition::grand(4), |t| {
            let core = t & Coalition::from_members([0, 1, 2]);
            match core.len() {
                2 => 3.0,
                3 => 4.0,
                _ => 0.0,
            }
        })
    }

    #[test]
    fn additive_identity_allocation_is_in_core() {
        let g = Game::additive(&[0.5, 1.0, 2.0]);
        let x = Allocation::of(&g, vec![0.5, 1.0, 2.0], 0.0).unwrap();
        assert!(core_membership(&g, &x, 0.0).unwrap());
    }

    #[test]
    fn u1_core_is_empty_for_sample_allocations() {
        let g = u1();
        for p in [
            vec![4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 0.0],
            vec![1.0, 1.5, 1.5, 0.0],
            vec![2.0, 2.0, 0.0, 0.0],
        ] {
            let x = Allocation::of(&g, p, 0.0).unwrap();
            assert!(!core_membership(&g, &x, 0.0).unwrap());
        }
    }

    #[test]
    fn majority_uniform_in_third_core() {
        let g = Game::majority(3, 1.0);
        let x = Allocation::of(&g, vec![1.0 / 3.0; 3], 0.0).unwrap();
        assert!(core_membership(&g, &x, 1.0 / 3.0).unwrap());
        assert!(!core_membership(&g, &x, 0.3).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let g = Game::majority(3, 1.0);
        let x = Allocation::new(Coalition::grand(2), vec![0.5, 0.5], 0.0).unwrap();
        assert!(matches!(core_membership(&g, &x, 0.0), Err(Error::Input(_))));
    }

    #[test]
    fn convex_combination_of_p_minus_i() {
        let p = |i: usize| {
            let mut w = [0.5; 3];
            w[i] = 0.0;
            Game::additive(&w)
        };
        let v = convex_combine(&[p(0), p(1), p(2)], &[1.0 / 3.0; 3]).unwrap();
        assert!(v.distance(&Game::additive(&[1.0 / 3.0; 3])) < 1e-12);
    }

    #[test]
    fn convex_combination_identity_and_idempotence() {
        let g = u1();
        assert_eq!(convex_combine(&[g.clone()], &[1.0]).unwrap(), g);
        let twice = convex_combine(&[g.clone(), g.clone()], &[0.5, 0.5]).unwrap();
        assert!(twice.distance(&g) < 1e-12);
    }

    #[test]
    fn convex_combination_rejects_mismatched_grand() {
        let a = Game::majority(3, 1.0);
        let b = Game::majority(4, 1.0);
        assert!(convex_combine(&[a, b], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn restriction_of_allocation() {
        let x = Allocation::new(Coalition::grand(3), vec![1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(x.restrict(Coalition::grand(3)).unwrap().payoffs(), &[1.0, 2.0, 3.0]);
        assert_eq!(
            x.restrict(Coalition::from_members([1, 2])).unwrap().payoffs(),
            &[2.0, 3.0]
        );
        let y = Allocation::new(Coalition::grand(3), vec![0.5, 0.5, 0.0], 0.0).unwrap();
        assert_eq!(y.restrict(Coalition::singleton(2)).unwrap().payoffs(), &[0.0]);
        let sub = Allocation::new(Coalition::from_members([0, 1]), vec![1.0, 1.0], 0.0).unwrap();
        assert!(sub.restrict(Coalition::singleton(2)).is_err());
    }

    #[test]
    fn superadditivity_detects_violation() {
        assert!(Game::majority(3, 1.0).is_superadditive(1e-12));
        let bad = Game::from_fn(Coalition::grand(2), |t| if t.len() == 1 { 1.0 } else { 1.5 });
        assert!(!bad.is_superadditive(1e-12));
    }
}
