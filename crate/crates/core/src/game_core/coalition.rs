use std::fmt;
use std::ops::{BitAnd, BitOr, Not, Sub};

use serde::{Deserialize, Serialize};

/// Largest player count for which coalitions are enumerated.
pub const MAX_PLAYERS: usize = 24;

/// A set of players encoded as a bitset over global player indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u32);

impl Coalition {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub const fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    /// The grand coalition `{0, .., n-1}`.
    pub fn grand(n: usize) -> Self {
        assert!(n <= MAX_PLAYERS, "at most {MAX_PLAYERS} players supported");
        if n == 0 {
            Self(0)
        } else {
            Self(u32::MAX >> (32 - n))
        }
    }

    pub fn singleton(i: usize) -> Self {
        Self(1 << i)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        Self(members.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, i: usize) -> bool {
        i < 32 && (self.0 >> i) & 1 == 1
    }

    pub const fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn is_proper_subset_of(self, other: Self) -> bool {
        self.is_subset_of(other) && self.0 != other.0
    }

    /// Members in increasing order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    /// Position of player `i` among the members, if present.
    pub fn rank_of(self, i: usize) -> Option<usize> {
        self.contains(i)
            .then(|| (self.0 & ((1u32 << i) - 1)).count_ones() as usize)
    }

    /// Compress `sub` (a subset of `self`) into a mask over `self`'s member positions.
    pub fn local_mask(self, sub: Coalition) -> usize {
        debug_assert!(sub.is_subset_of(self));
        let mut out = 0usize;
        for (pos, i) in self.members().enumerate() {
            if sub.contains(i) {
                out |= 1 << pos;
            }
        }
        out
    }

    /// Expand a local mask over member positions back into a global coalition.
    pub fn from_local_mask(self, mask: usize) -> Coalition {
        let mut out = 0u32;
        for (pos, i) in self.members().enumerate() {
            if mask >> pos & 1 == 1 {
                out |= 1 << i;
            }
        }
        Coalition(out)
    }

    /// All subsets of `self` (including the empty set and `self`), in increasing local-mask order.
    pub fn subsets(self) -> impl Iterator<Item = Coalition> {
        (0..1usize << self.len()).map(move |m| self.from_local_mask(m))
    }

    /// Nonempty proper subsets of `self`.
    pub fn proper_subsets(self) -> impl Iterator<Item = Coalition> {
        let full = (1usize << self.len()) - 1;
        (1..full).map(move |m| self.from_local_mask(m))
    }

    /// Human-readable comma-separated member list, e.g. `0,2`.
    pub fn label(self) -> String {
        if self.is_empty() {
            return "∅".to_string();
        }
        self.members()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub struct Members(u32);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

impl BitOr for Coalition {
    type Output = Self;
    fn bitor(self, rhs: Self) -> Self {
        Self(self.0 | rhs.0)
    }
}

impl BitAnd for Coalition {
    type Output = Self;
    fn bitand(self, rhs: Self) -> Self {
        Self(self.0 & rhs.0)
    }
}

impl Sub for Coalition {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 & !rhs.0)
    }
}

impl Not for Coalition {
    type Output = Self;
    fn not(self) -> Self {
        Self(!self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_mask_round_trip() {
        let s = Coalition::from_members([1, 3, 4]);
        let t = Coalition::from_members([1, 4]);
        let m = s.local_mask(t);
        assert_eq!(m, 0b101);
        assert_eq!(s.from_local_mask(m), t);
    }

    #[test]
    fn proper_subsets_of_three() {
        let n = Coalition::grand(3);
        assert_eq!(n.proper_subsets().count(), 6);
        assert_eq!(n.subsets().count(), 8);
        assert!(n.proper_subsets().all(|t| t.is_proper_subset_of(n) && !t.is_empty()));
    }

    #[test]
    fn rank_and_members() {
        let s = Coalition::from_members([0, 2, 5]);
        assert_eq!(s.members().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(s.rank_of(5), Some(2));
        assert_eq!(s.rank_of(1), None);
        assert_eq!(s.label(), "0,2,5");
    }
}
