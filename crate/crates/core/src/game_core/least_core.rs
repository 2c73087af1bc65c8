use serde::Serialize;

use super::simplex::{LinearProgram, LpOutcome, Relation};
use super::{Allocation, Coalition, Game};
use crate::error::{Error, Result};

/// Largest player count handled by the exact least-core LP.
pub const MAX_LP_PLAYERS: usize = 16;

/// Result of the least-core program.
#[derive(Clone, Debug, Serialize)]
pub struct LeastCoreReport {
    /// Smallest `ε` such that some allocation satisfies `x(T) ≥ worth(T) − ε` for all proper `T`.
    /// Nonpositive exactly when the core is nonempty.
    pub epsilon_star: f64,
    pub witness: Allocation,
    /// Proper coalitions whose constraint is tight at the witness.
    pub binding: Vec<Coalition>,
}

/// Least core of `game` over allocations bounded below by `floor`.
///
/// Solved by constraint generation: the LP starts from the singleton rows and
/// repeatedly adds the most violated coalition (ties broken by smallest bitset).
pub fn least_core(game: &Game, floor: f64) -> Result<LeastCoreReport> {
    let n = game.players();
    if n > MAX_LP_PLAYERS {
        return Err(Error::Config(format!(
            "least core limited to {MAX_LP_PLAYERS} players, game has {n}"
        )));
    }
    let grand = game.grand();
    let distributable = game.grand_worth() - n as f64 * floor;
    if distributable < -1e-9 {
        return Err(Error::Config(format!(
            "floor {floor} infeasible: {n} players cannot each get it from grand worth {}",
            game.grand_worth()
        )));
    }
    if n == 1 {
        let witness = Allocation::new(grand, vec![game.grand_worth()], floor)?;
        return Ok(LeastCoreReport {
            epsilon_star: 0.0,
            witness,
            binding: Vec::new(),
        });
    }

    let full = (1usize << n) - 1;
    let mut active: Vec<usize> = (0..n).map(|i| 1usize << i).collect();
    // variables: z_0..z_{n-1} (x_i − floor), e⁺, e⁻
    let width = n + 2;
    loop {
        let mut objective = vec![0.0; width];
        objective[n] = 1.0;
        objective[n + 1] = -1.0;
        let mut lp = LinearProgram::minimize(objective);
        let mut row = vec![1.0; width];
        row[n] = 0.0;
        row[n + 1] = 0.0;
        lp.add(row, Relation::Eq, distributable.max(0.0));
        for &m in &active {
            let mut row = vec![0.0; width];
            for (k, r) in row.iter_mut().enumerate().take(n) {
                if m >> k & 1 == 1 {
                    *r = 1.0;
                }
            }
            row[n] = 1.0;
            row[n + 1] = -1.0;
            let rhs = game.worth_local(m) - m.count_ones() as f64 * floor;
            lp.add(row, Relation::Ge, rhs);
        }
        let (sol, _) = match lp.solve()? {
            LpOutcome::Optimal { x, value } => (x, value),
            LpOutcome::Infeasible => {
                return Err(Error::Config("least-core LP infeasible".into()));
            }
            LpOutcome::Unbounded => {
                return Err(Error::Solver("least-core LP unbounded".into()));
            }
        };
        let eps = sol[n] - sol[n + 1];
        let x: Vec<f64> = sol[..n].iter().map(|z| z + floor).collect();

        let mut sums = vec![0.0; full + 1];
        let mut worst: Option<(usize, f64)> = None;
        for m in 1..full {
            let low = m.trailing_zeros() as usize;
            sums[m] = sums[m & (m - 1)] + x[low];
            let viol = game.worth_local(m) - sums[m] - eps;
            if viol > 1e-10 && worst.map_or(true, |(_, w)| viol > w) {
                worst = Some((m, viol));
            }
        }
        match worst {
            Some((m, _)) if !active.contains(&m) => active.push(m),
            _ => {
                let binding = (1..full)
                    .filter(|&m| (game.worth_local(m) - sums[m] - eps).abs() <= 1e-7)
                    .map(|m| grand.from_local_mask(m))
                    .collect();
                return Ok(LeastCoreReport {
                    epsilon_star: eps,
                    witness: Allocation::new(grand, x, floor)?,
                    binding,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_core::core_membership;

    fn u1() -> Game {
        Game::from_fn(Coalition::grand(4), |t| {
            match (t & Coalition::from_members([0, 1, 2])).len() {
                2 => 3.0,
                3 => 4.0,
                _ => 0.0,
            }
        })
    }

    #[test]
    fn additive_game_has_zero_gap() {
        let r = least_core(&Game::additive(&[0.2, 0.3, 0.5]), 0.0).unwrap();
        assert!(r.epsilon_star.abs() < 1e-9);
    }

    #[test]
    fn u1_gap_is_one_third() {
        let r = least_core(&u1(), 0.0).unwrap();
        assert!((r.epsilon_star - 1.0 / 3.0).abs() < 1e-9, "{}", r.epsilon_star);
    }

    #[test]
    fn majority_gap_and_witness() {
        let r = least_core(&Game::majority(3, 1.0), 0.0).unwrap();
        assert!((r.epsilon_star - 1.0 / 3.0).abs() < 1e-9);
        for p in r.witness.payoffs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(r.binding.len(), 3);
        let g = Game::majority(3, 1.0);
        assert!(core_membership(&g, &r.witness, r.epsilon_star + 1e-9).unwrap());
    }

    #[test]
    fn infeasible_floor_is_config_error() {
        let g = Game::majority(3, 1.0);
        assert!(matches!(least_core(&g, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn strict_core_gives_negative_gap() {
        // unanimity-like game: only N has worth
        let g = Game::from_fn(Coalition::grand(3), |t| if t.len() == 3 { 3.0 } else { 0.0 });
        let r = least_core(&g, 0.0).unwrap();
        assert!((r.epsilon_star + 1.0).abs() < 1e-9);
    }
}
