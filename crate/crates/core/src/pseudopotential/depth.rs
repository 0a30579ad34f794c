//! Trap depth by bisection on the level set that first connects the minimum to the box edge.

use serde::{Deserialize, Serialize};

use super::{Minimum, PseudoError};
use crate::grid::ScalarGrid;

/// Relative tolerance on the depth bisection.
pub const DEPTH_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EscapeDirection {
    Up,
    Side,
    Down,
}

impl std::fmt::Display for EscapeDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EscapeDirection::Up => "UP",
            EscapeDirection::Side => "SIDE",
            EscapeDirection::Down => "DOWN",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapDepth {
    /// Escape energy above the minimum (J).
    pub depth: f64,
    /// Secular-potential level of the lowest escape path (J).
    pub level: f64,
    pub escape: EscapeDirection,
    /// Highest point on the escape path found at the connecting level.
    pub saddle: (f64, f64),
    /// Set when the basin reaches the edge at every level (depth reported as zero).
    pub open_basin: bool,
}

/// Flood fill from one node over `{ψ < level}` with 4-connectivity.
struct Flood<'a> {
    psi: &'a ScalarGrid,
    seen: Vec<bool>,
    parent: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

impl<'a> Flood<'a> {
    fn new(psi: &'a ScalarGrid) -> Self {
        let n = psi.values.len();
        Self { psi, seen: vec![false; n], parent: vec![NO_PARENT; n] }
    }

    /// Breadth-first fill; returns the first edge node reached, if any.
    fn reaches_edge(&mut self, start: usize, level: f64) -> Option<usize> {
        let s = self.psi.spec;
        let cols = s.cols();
        self.seen.iter_mut().for_each(|v| *v = false);
        if self.psi.values[start] >= level {
            return None;
        }
        let mut queue = std::collections::VecDeque::new();
        self.seen[start] = true;
        self.parent[start] = NO_PARENT;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % cols, k / cols);
            if s.is_boundary(i, j) {
                return Some(k);
            }
            for n in [k - 1, k + 1, k - cols, k + cols] {
                if !self.seen[n] && self.psi.values[n] < level {
                    self.seen[n] = true;
                    self.parent[n] = k as u32;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Node of highest ψ on the parent chain from `end` back to the start.
    fn path_max(&self, end: usize) -> usize {
        let mut best = end;
        let mut k = end;
        while self.parent[k] != NO_PARENT {
            k = self.parent[k] as usize;
            if self.psi.values[k] > self.psi.values[best] {
                best = k;
            }
        }
        best
    }
}

/// Escape energy of the basin around `min`.
pub fn trap_depth(psi: &ScalarGrid, min: &Minimum, rel_tol: f64) -> Result<TrapDepth, PseudoError> {
    let s = psi.spec;
    let start = s.idx(min.node.0, min.node.1);
    let mut flood = Flood::new(psi);
    let base = psi.values[start];
    let top = psi.values.iter().cloned().fold(f64::MIN, f64::max);
    let hi_init = top + (top - base).abs().max(f64::MIN_POSITIVE);

    let eps = (top - base).abs() * 1e-12 + f64::MIN_POSITIVE;
    if s.is_boundary(min.node.0, min.node.1) || flood.reaches_edge(start, base + eps).is_some() {
        return Ok(TrapDepth {
            depth: 0.0,
            level: base,
            escape: EscapeDirection::Up,
            saddle: (min.x, min.y),
            open_basin: true,
        });
    }

    let (mut lo, mut hi) = (base, hi_init);
    if flood.reaches_edge(start, hi).is_none() {
        return Err(PseudoError::NoTrap("basin never reaches the domain edge"));
    }
    while hi - lo > rel_tol * (hi - min.value) {
        let mid = 0.5 * (lo + hi);
        if flood.reaches_edge(start, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let exit = flood.reaches_edge(start, hi).expect("hi connects");
    let saddle_node = flood.path_max(exit);
    let (si, sj) = (saddle_node % s.cols(), saddle_node / s.cols());
    let saddle = (s.x(si), s.y(sj));
    let level = 0.5 * (lo + hi);
    Ok(TrapDepth {
        depth: level - min.value,
        level,
        escape: classify(saddle.0 - min.x, saddle.1 - min.y),
        saddle,
        open_basin: false,
    })
}

fn classify(dx: f64, dy: f64) -> EscapeDirection {
    if dx.abs() > dy.abs() {
        EscapeDirection::Side
    } else if dy > 0.0 {
        EscapeDirection::Up
    } else {
        EscapeDirection::Down
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::pseudopotential::find_minimum;

    fn spec() -> GridSpec {
        GridSpec::new(80, 80, -1.0, 0.0, 0.025).unwrap()
    }

    #[test]
    fn radial_bowl_depth_is_lowest_edge_value() {
        // centred at (0, 1); the nearest walls are the sides and floor at distance 1
        let psi = ScalarGrid::from_fn(spec(), |x, y| 0.5 * (x * x + 2.0 * (y - 1.0).powi(2)));
        let m = find_minimum(&psi, None).unwrap();
        let d = trap_depth(&psi, &m, 1e-6).unwrap();
        let s = psi.spec;
        let edge_min = (0..s.rows())
            .flat_map(|j| (0..s.cols()).map(move |i| (i, j)))
            .filter(|&(i, j)| s.is_boundary(i, j))
            .map(|(i, j)| psi.at(i, j))
            .fold(f64::MAX, f64::min);
        assert!((d.depth - (edge_min - m.value)).abs() < 1e-4 * edge_min);
        assert_eq!(d.escape, EscapeDirection::Side);
        assert!(!d.open_basin);
    }

    #[test]
    fn classifies_vertical_escape() {
        // tilted so the top wall is cheaper than the sides
        let up = ScalarGrid::from_fn(spec(), |x, y| 4.0 * x * x + (y - 1.0).powi(2) - 0.5 * (y - 1.0));
        let m = find_minimum(&up, None).unwrap();
        assert_eq!(trap_depth(&up, &m, 1e-4).unwrap().escape, EscapeDirection::Up);
        let down = ScalarGrid::from_fn(spec(), |x, y| 4.0 * x * x + (y - 1.0).powi(2) + 0.5 * (y - 1.0));
        let m = find_minimum(&down, None).unwrap();
        assert_eq!(trap_depth(&down, &m, 1e-4).unwrap().escape, EscapeDirection::Down);
    }

    #[test]
    fn double_well_uses_lowest_saddle() {
        // two wells separated by a barrier; the edge is far higher than the barrier,
        // so depth is set by the walls, not the inner barrier
        let psi = ScalarGrid::from_fn(spec(), |x, y| (x * x - 0.25).powi(2) * 16.0 + 10.0 * (y - 1.0).powi(2) + 0.1 * x);
        let m = find_minimum(&psi, None).unwrap();
        assert!(m.x < 0.0);
        let d = trap_depth(&psi, &m, 1e-5).unwrap();
        assert!(d.depth > 1.0);
    }

    #[test]
    fn open_basin_flagged() {
        let psi = ScalarGrid::from_fn(spec(), |x, y| x * x + y);
        let m = super::super::Minimum { x: 0.0, y: 0.0, value: 0.0, node: (40, 0) };
        let d = trap_depth(&psi, &m, 1e-4).unwrap();
        assert!(d.open_basin);
        assert_eq!(d.depth, 0.0);
    }
}
