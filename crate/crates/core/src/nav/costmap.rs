use crate::clearance::ClearanceMap;
use crate::sim::{OccupancyGrid, Pose2D, RobotSpec};

use super::params::PlannerParams;

/// Cost of a cell whose centre is within the footprint radius of an obstacle.
pub const LETHAL: f64 = f64::INFINITY;

/// Robot-centred window of inflated obstacle costs, aligned to the world grid.
///
/// Soft costs lie in `(0, 1]`, decaying exponentially with clearance beyond
/// the footprint radius and reaching 0 at the inflation radius. Cells outside
/// the world are lethal; queries outside the window return 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCostmap {
    i0: i64,
    j0: i64,
    size: usize,
    resolution: f64,
    origin: [f64; 2],
    costs: Vec<f64>,
}

/// Inflated cost for a cell with the given clearance.
#[inline]
pub fn inflation_cost(clearance: f64, footprint_radius: f64, inflation_radius: f64, decay: f64) -> f64 {
    if clearance < footprint_radius {
        LETHAL
    } else if clearance < inflation_radius {
        (-decay * (clearance - footprint_radius)).exp()
    } else {
        0.0
    }
}

impl LocalCostmap {
    pub fn build(
        grid: &OccupancyGrid,
        clearance: &ClearanceMap,
        pose: Pose2D,
        params: &PlannerParams,
        spec: &RobotSpec,
        window: f64,
        decay: f64,
    ) -> Self {
        let res = grid.resolution();
        let size = ((window / res).round() as usize).max(1);
        let (ci, cj) = grid.cell_of_unbounded(pose.x, pose.y);
        let i0 = ci - (size / 2) as i64;
        let j0 = cj - (size / 2) as i64;
        let mut costs = Vec::with_capacity(size * size);
        for dj in 0..size as i64 {
            for di in 0..size as i64 {
                let (i, j) = (i0 + di, j0 + dj);
                let c = clearance.at_or_zero(i, j);
                costs.push(inflation_cost(c, spec.footprint_radius, params.inflation_radius, decay));
            }
        }
        Self {
            i0,
            j0,
            size,
            resolution: res,
            origin: grid.origin(),
            costs,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Cost at a world point.
    #[inline]
    pub fn cost_at(&self, x: f64, y: f64) -> f64 {
        let i = ((x - self.origin[0]) / self.resolution).floor() as i64 - self.i0;
        let j = ((y - self.origin[1]) / self.resolution).floor() as i64 - self.j0;
        if i < 0 || j < 0 || i >= self.size as i64 || j >= self.size as i64 {
            0.0
        } else {
            self.costs[j as usize * self.size + i as usize]
        }
    }

    /// World coordinates of the centre of window cell `(di, dj)`.
    pub fn cell_center(&self, di: usize, dj: usize) -> [f64; 2] {
        [
            self.origin[0] + ((self.i0 + di as i64) as f64 + 0.5) * self.resolution,
            self.origin[1] + ((self.j0 + dj as i64) as f64 + 0.5) * self.resolution,
        ]
    }
}
