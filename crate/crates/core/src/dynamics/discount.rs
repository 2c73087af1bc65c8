use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Common discount factor plus the truncation used for infinite sums.
///
/// All present values are normalized at the time they start from:
/// `(1−δ) Σ_{t≥h} δ^{t−h} a_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscountSpec {
    pub delta: f64,
    /// Number of periods kept before truncating.
    pub horizon: usize,
    /// Bound on the discarded tail, `δ^horizon · max_worth`.
    pub tail_bound: f64,
}

impl DiscountSpec {
    /// Picks the shortest horizon whose tail is at most `precision` for streams bounded by `max_worth`.
    pub fn new(delta: f64, precision: f64, max_worth: f64) -> Result<Self> {
        check_delta(delta)?;
        if precision <= 0.0 || !precision.is_finite() {
            return Err(Error::input(format!("precision must be positive, got {precision}")));
        }
        let m = max_worth.abs().max(1e-300);
        let horizon = if m <= precision {
            1
        } else {
            ((precision / m).ln() / delta.ln()).ceil().max(1.0) as usize
        };
        Ok(Self::with_horizon(delta, horizon, max_worth).expect("delta already checked"))
    }

    pub fn with_horizon(delta: f64, horizon: usize, max_worth: f64) -> Result<Self> {
        check_delta(delta)?;
        if horizon == 0 {
            return Err(Error::input("horizon must be at least 1"));
        }
        Ok(Self {
            delta,
            horizon,
            tail_bound: delta.powi(horizon as i32) * max_worth.abs(),
        })
    }

    /// Weight `(1−δ) δ^{k}` of the `k`-th period after the reference time.
    pub fn weight(&self, k: usize) -> f64 {
        (1.0 - self.delta) * self.delta.powi(k as i32)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("discount factor must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// `(1−δ) Σ_{t=h}^{len} δ^{t−h} stream_t` with 1-based time `h`.
pub fn present_value(stream: &[f64], ds: &DiscountSpec, from: usize) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::input("empty stream"));
    }
    if from == 0 || from > stream.len() {
        return Err(Error::input(format!(
            "start time {from} outside 1..={}",
            stream.len()
        )));
    }
    let d = ds.delta;
    let mut acc = 0.0;
    for a in stream[from - 1..].iter().rev() {
        acc = a + d * acc;
    }
    Ok((1.0 - d) * acc)
}

/// A vector-valued stream given by a finite prefix followed by a repeating cycle.
///
/// An empty cycle means the stream is only known up to the prefix; present
/// values are then truncated and the caller must account for the tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub prefix: Vec<Vec<f64>>,
    pub cycle: Vec<Vec<f64>>,
}

impl Stream {
    pub fn periodic(prefix: Vec<Vec<f64>>, cycle: Vec<Vec<f64>>) -> Self {
        Self { prefix, cycle }
    }

    pub fn finite(values: Vec<Vec<f64>>) -> Self {
        Self {
            prefix: values,
            cycle: Vec::new(),
        }
    }

    pub fn is_periodic(&self) -> bool {
        !self.cycle.is_empty()
    }

    /// Element at 1-based time `t`, if known.
    pub fn at(&self, t: usize) -> Option<&[f64]> {
        let p = self.prefix.len();
        if t == 0 {
            None
        } else if t <= p {
            Some(&self.prefix[t - 1])
        } else if self.cycle.is_empty() {
            None
        } else {
            Some(&self.cycle[(t - p - 1) % self.cycle.len()])
        }
    }

    /// Times that must be inspected to see every distinct suffix: prefix plus one cycle.
    pub fn distinct_len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    fn width(&self) -> usize {
        self.prefix
            .first()
            .or(self.cycle.first())
            .map_or(0, |v| v.len())
    }

    /// `(1−δ) Σ_{t≥h} δ^{t−h} a_t`, exact for periodic streams.
    /// Returns the value and the number of periods actually summed when truncated
    /// (`None` when exact).
    pub fn discounted_from(&self, h: usize, delta: f64) -> (Vec<f64>, Option<usize>) {
        let w = self.width();
        let p = self.prefix.len();
        let mut acc = vec![0.0; w];
        let mut truncated = None;
        if !self.cycle.is_empty() {
            let l = self.cycle.len();
            let start = if h > p { (h - p - 1) % l } else { 0 };
            let mut c = vec![0.0; w];
            for k in (0..l).rev() {
                let v = &self.cycle[(start + k) % l];
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci = vi + delta * *ci;
                }
            }
            let denom = 1.0 - delta.powi(l as i32);
            for (a, ci) in acc.iter_mut().zip(&c) {
                *a = ci / denom;
            }
        } else if h > p {
            truncated = Some(0);
        } else {
            truncated = Some(p + 1 - h);
        }
        if h <= p {
            for v in self.prefix[h - 1..].iter().rev() {
                for (a, vi) in acc.iter_mut().zip(v) {
                    *a = vi + delta * *a;
                }
            }
        }
        for a in acc.iter_mut() {
            *a *= 1.0 - delta;
        }
        (acc, truncated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_meets_precision() {
        let ds = DiscountSpec::new(0.99, 1e-4, 1.0).unwrap();
        assert!(ds.tail_bound <= 1e-4);
        assert!(0.99f64.powi(ds.horizon as i32 - 1) > 1e-4);
        assert!(DiscountSpec::new(1.0, 1e-4, 1.0).is_err());
    }

    #[test]
    fn constant_stream_has_its_value() {
        let ds = DiscountSpec::new(0.9, 1e-9, 2.0).unwrap();
        let stream = vec![2.0; ds.horizon];
        let v = present_value(&stream, &ds, 1).unwrap();
        assert!((v - 2.0).abs() <= ds.tail_bound + 1e-12);
    }

    #[test]
    fn single_impulse() {
        let ds = DiscountSpec::with_horizon(0.5, 10, 1.0).unwrap();
        let mut s = vec![0.0; 10];
        s[0] = 1.0;
        assert!((present_value(&s, &ds, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(present_value(&[], &ds, 1).is_err());
    }

    #[test]
    fn periodic_stream_matches_long_truncation() {
        let s = Stream::periodic(vec![vec![5.0]], vec![vec![1.0], vec![0.0], vec![2.0]]);
        let long: Vec<Vec<f64>> = (1..=4000).map(|t| s.at(t).unwrap().to_vec()).collect();
        let f = Stream::finite(long);
        for h in [1, 2, 3, 4, 7] {
            let (a, ta) = s.discounted_from(h, 0.97);
            let (b, tb) = f.discounted_from(h, 0.97);
            assert!(ta.is_none() && tb.is_some());
            assert!((a[0] - b[0]).abs() < 1e-9, "h={h}: {} vs {}", a[0], b[0]);
        }
    }
}
