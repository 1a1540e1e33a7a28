//! Dijkstra global planner over the footprint-inflated grid.

use std::borrow::Cow;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::clearance::ClearanceMap;
use crate::error::{Error, Result};
use crate::sim::{OccupancyGrid, Pose2D, RobotSpec};

/// Cell-centre waypoints from the start cell to the goal cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPath {
    pub waypoints: Vec<[f64; 2]>,
    pub length: f64,
}

impl GlobalPath {
    pub fn from_waypoints(waypoints: Vec<[f64; 2]>) -> Self {
        let length = waypoints
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum();
        Self { waypoints, length }
    }

    /// Smallest distance from `p` to any waypoint.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        self.waypoints
            .iter()
            .map(|w| (w[0] - p[0]).powi(2) + (w[1] - p[1]).powi(2))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// 8-neighbour offsets with step costs in cells. Diagonals may not cut corners.
pub(crate) const NEIGHBOURS: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT_2),
    (-1, 1, SQRT_2),
    (1, -1, SQRT_2),
    (-1, -1, SQRT_2),
];

/// Cells the robot centre may occupy: clearance at least the footprint radius.
pub fn traversable_mask(clearance: &ClearanceMap, spec: &RobotSpec) -> Vec<bool> {
    (0..clearance.width() * clearance.height())
        .map(|idx| clearance.at_index(idx) >= spec.footprint_radius)
        .collect()
}

/// Whether a move from `(i, j)` by `(di, dj)` is allowed on `mask`.
#[inline]
pub(crate) fn move_allowed(mask: &[bool], w: usize, h: usize, i: usize, j: usize, di: i64, dj: i64) -> Option<usize> {
    let (ni, nj) = (i as i64 + di, j as i64 + dj);
    if ni < 0 || nj < 0 || ni >= w as i64 || nj >= h as i64 {
        return None;
    }
    let n = nj as usize * w + ni as usize;
    if !mask[n] {
        return None;
    }
    if di != 0 && dj != 0 {
        let side_a = j * w + ni as usize;
        let side_b = nj as usize * w + i;
        if !mask[side_a] || !mask[side_b] {
            return None;
        }
    }
    Some(n)
}

/// Minimal-cost path between the cells containing `start` and `goal`.
///
/// The start cell is always expandable so a robot brushing an inflated
/// region can still plan out of it. Ties pop the lower cell index first.
pub fn plan_global(grid: &OccupancyGrid, clearance: &ClearanceMap, start: Pose2D, goal: [f64; 2], spec: &RobotSpec) -> Result<GlobalPath> {
    let mask = traversable_mask(clearance, spec);
    plan_on_mask(grid, &mask, start.position(), goal)
}

pub fn plan_on_mask(grid: &OccupancyGrid, mask: &[bool], start: [f64; 2], goal: [f64; 2]) -> Result<GlobalPath> {
    let (w, h) = (grid.width(), grid.height());
    let s = grid.cell_of(start[0], start[1]).ok_or(Error::NoPath)?;
    let g = grid.cell_of(goal[0], goal[1]).ok_or(Error::NoPath)?;
    let (s, g) = (grid.index(s.0, s.1), grid.index(g.0, g.1));
    if !mask[g] {
        return Err(Error::NoPath);
    }
    let mask: Cow<[bool]> = if mask[s] {
        Cow::Borrowed(mask)
    } else {
        let mut owned = mask.to_vec();
        owned[s] = true;
        Cow::Owned(owned)
    };
    let mut dist = vec![f64::INFINITY; w * h];
    let mut parent = vec![usize::MAX; w * h];
    let mut done = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse(Key(0.0, s)));
    while let Some(Reverse(Key(d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == g {
            break;
        }
        let (i, j) = (u % w, u / w);
        for (di, dj, c) in NEIGHBOURS {
            if let Some(n) = move_allowed(&mask, w, h, i, j, di, dj) {
                let nd = d + c;
                if nd < dist[n] {
                    dist[n] = nd;
                    parent[n] = u;
                    heap.push(Reverse(Key(nd, n)));
                }
            }
        }
    }
    if !done[g] {
        return Err(Error::NoPath);
    }
    let mut cells = vec![g];
    let mut cur = g;
    while cur != s {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    let waypoints = cells
        .into_iter()
        .map(|idx| grid.cell_center(idx % w, idx / w))
        .collect();
    Ok(GlobalPath::from_waypoints(waypoints))
}

/// Angle of the local goal in the robot frame, plus the local goal itself.
///
/// The local goal is the first waypoint at or beyond `lookahead` from the
/// robot, searching forward from the waypoint nearest the robot; the final
/// waypoint when none is far enough.
pub fn local_goal(path: &GlobalPath, pose: Pose2D, lookahead: f64) -> ([f64; 2], f64) {
    let wp = &path.waypoints;
    let Some(&last) = wp.last() else {
        return ([pose.x, pose.y], 0.0);
    };
    let d2 = |p: &[f64; 2]| (p[0] - pose.x).powi(2) + (p[1] - pose.y).powi(2);
    let mut nearest = 0;
    let mut best = f64::INFINITY;
    for (k, p) in wp.iter().enumerate() {
        let d = d2(p);
        if d < best {
            best = d;
            nearest = k;
        }
    }
    let target = wp[nearest..]
        .iter()
        .find(|p| d2(p).sqrt() >= lookahead)
        .copied()
        .unwrap_or(last);
    (target, relative_bearing(pose, target))
}

/// Bearing of `target` in the robot frame, in `[-pi, pi]`.
pub fn relative_bearing(pose: Pose2D, target: [f64; 2]) -> f64 {
    let (dx, dy) = (target[0] - pose.x, target[1] - pose.y);
    let (s, c) = pose.heading.sin_cos();
    let gx = c * dx + s * dy;
    let gy = -s * dx + c * dy;
    gy.atan2(gx)
}
