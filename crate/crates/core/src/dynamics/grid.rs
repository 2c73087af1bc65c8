use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_core::Game;

/// Uniform discretization of allocation simplices: the amount above the floor
/// is split in `steps` equal units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub steps: u32,
}

impl Default for Grid {
    fn default() -> Self {
        Self { steps: 20 }
    }
}

impl Grid {
    pub fn new(steps: u32) -> Result<Self> {
        if steps == 0 {
            return Err(Error::input("grid needs at least one step"));
        }
        Ok(Self { steps })
    }

    /// Grid from a resolution such as `0.05` (= 1/20).
    pub fn from_resolution(r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::input(format!("grid resolution must lie in (0,1], got {r}")));
        }
        Self::new((1.0 / r).round() as u32)
    }

    pub fn resolution(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// Nonnegative integer vectors of length `k` summing to `steps`, lexicographically.
    pub fn compositions(&self, k: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        if k == 0 {
            return out;
        }
        let mut cur = vec![0u32; k];
        fill(&mut out, &mut cur, 0, self.steps);
        out
    }

    /// Grid allocations of a game: coordinates `floor + c_i · (worth − k·floor)/steps`.
    pub fn allocations(&self, game: &Game, floor: f64) -> Result<Vec<Vec<f64>>> {
        self.points(game.players(), game.grand_worth(), floor)
    }

    pub fn points(&self, k: usize, total: f64, floor: f64) -> Result<Vec<Vec<f64>>> {
        let free = total - k as f64 * floor;
        if free < -1e-9 {
            return Err(Error::Simulation {
                step: 0,
                reason: format!("worth {total} cannot give {k} players the floor {floor}"),
            });
        }
        let free = free.max(0.0);
        let unit = free / self.steps as f64;
        if free == 0.0 {
            return Ok(vec![vec![floor; k]]);
        }
        Ok(self
            .compositions(k)
            .into_iter()
            .map(|c| c.into_iter().map(|ci| floor + ci as f64 * unit).collect())
            .collect())
    }

    /// Number of grid points for `k` players: `C(steps + k − 1, k − 1)`.
    pub fn count(&self, k: usize) -> usize {
        if k == 0 {
            return 0;
        }
        let (n, r) = (self.steps as usize + k - 1, k - 1);
        (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    }
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in 0..=left {
        cur[pos] = v;
        fill(out, cur, pos + 1, left - v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        let g = Grid::new(20).unwrap();
        assert_eq!(g.compositions(3).len(), 231);
        assert_eq!(g.count(3), 231);
        assert_eq!(g.count(4), 1771);
        assert_eq!(g.compositions(1), vec![vec![20]]);
    }

    #[test]
    fn points_respect_floor_and_sum() {
        let g = Grid::new(4).unwrap();
        for p in g.points(3, 2.0, -0.5).unwrap() {
            assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            assert!(p.iter().all(|v| *v >= -0.5));
        }
        assert!(g.points(3, 1.0, 0.5).is_err());
    }
}
