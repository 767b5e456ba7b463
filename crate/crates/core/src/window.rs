//! Finite unrolling of a full-time graph.

use std::fmt;

use serde::Serialize;

use crate::bits::BitDag;
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::graph::{time_offset, Ftcg, TimedVertex};

/// Time slices `t_min..=t_max` relative to the reference time 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    pub t_min: i64,
    pub t_max: i64,
}

impl Window {
    pub fn new(t_min: i64, t_max: i64) -> Result<Self> {
        if t_min > 0 || t_max < 0 {
            return Err(Error::InvalidWindow(format!(
                "window [{t_min}, {t_max}] must contain the reference time 0"
            )));
        }
        Ok(Window { t_min, t_max })
    }

    /// `t_min = -(gamma + 2 gamma_max)`, `t_max = 0`.
    pub fn default_for(gamma: u32, gamma_max: u32) -> Self {
        Window {
            t_min: -(gamma as i64 + 2 * gamma_max as i64),
            t_max: 0,
        }
    }

    /// A window reaching `depth` steps into the past; it must hold every
    /// closed-form set, so `depth >= gamma + gamma_max`.
    pub fn with_depth(depth: u32, gamma: u32, gamma_max: u32) -> Result<Self> {
        let need = gamma as u64 + gamma_max as u64;
        if (depth as u64) < need {
            return Err(Error::InvalidWindow(format!(
                "depth {depth} is smaller than gamma + gamma_max = {need}"
            )));
        }
        Ok(Window {
            t_min: -(depth as i64),
            t_max: 0,
        })
    }

    pub fn slices(&self) -> usize {
        (self.t_max - self.t_min + 1) as usize
    }

    pub fn contains_time(&self, time: i64) -> bool {
        (self.t_min..=self.t_max).contains(&time)
    }

    #[inline]
    pub(crate) fn index(&self, n: usize, series: usize, time: i64) -> usize {
        (time - self.t_min) as usize * n + series
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", time_offset(self.t_min), time_offset(self.t_max))
    }
}

/// Writes the unrolled edges of a lag pattern into `g`.
pub(crate) fn unroll_into(n: usize, masks: &[u64], w: &Window, g: &mut BitDag) {
    let slices = w.slices();
    g.reset(n * slices);
    for a in 0..n {
        for b in 0..n {
            let mut m = masks[a * n + b];
            while m != 0 {
                let k = m.trailing_zeros() as usize;
                m &= m - 1;
                for s in k..slices {
                    g.add_edge((s - k) * n + a, s * n + b);
                }
            }
        }
    }
}

/// The induced subgraph of the full-time graph on the window.
pub fn unroll(f: &Ftcg, w: &Window) -> Dag<TimedVertex> {
    let n = f.len();
    let mut g = BitDag::new(0);
    unroll_into(n, f.masks(), w, &mut g);
    let mut labels = Vec::with_capacity(n * w.slices());
    for time in w.t_min..=w.t_max {
        for s in f.series() {
            labels.push(TimedVertex::new(s.clone(), time));
        }
    }
    Dag::from_bits(labels, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrolled_edges_repeat_through_time() {
        let f = Ftcg::from_names(&["X", "Y"], 1, &[("X", "Y", 1), ("X", "X", 1)]).unwrap();
        let g = unroll(&f, &Window::new(-2, 0).unwrap());
        assert_eq!(g.len(), 6);
        assert!(g.has_edge(&TimedVertex::at("X", -2), &TimedVertex::at("Y", -1)));
        assert!(g.has_edge(&TimedVertex::at("X", -1), &TimedVertex::at("Y", 0)));
        assert!(g.has_edge(&TimedVertex::at("X", -1), &TimedVertex::at("X", 0)));
        assert_eq!(g.edges().len(), 4);
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(1, 2).is_err());
        assert!(Window::with_depth(2, 1, 2).is_err());
        assert_eq!(Window::with_depth(3, 1, 2).unwrap().t_min, -3);
        assert_eq!(Window::default_for(1, 2).t_min, -5);
        assert_eq!(Window::default_for(0, 1).to_string(), "[t-2, t]");
    }
}
