//! Deterministic 2D world: unicycle kinematics, occupancy grid collision
//! checks and a planar lidar raycaster.
//!
//! Everything here is a pure function of its inputs so actor workers can call
//! it concurrently without coordination.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of beams in a scan.
pub const SCAN_BEAMS: usize = 720;
/// Field of view of the scanner, radians (270 degrees).
pub const SCAN_FOV: f64 = 1.5 * PI;
/// Range cap applied to every beam, meters.
pub const SCAN_MAX_RANGE: f64 = 2.0;

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Robot pose in the world frame. `heading` is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.x).hypot(p[1] - self.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }
}

/// Velocity command `(v, omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: f64,
    pub angular: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist {
        linear: 0.0,
        angular: 0.0,
    };

    pub fn new(linear: f64, angular: f64) -> Self {
        Self { linear, angular }
    }
}

/// Physical envelope of the simulated differential-drive base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub footprint_radius: f64,
    pub max_linear_accel: f64,
    pub max_angular_accel: f64,
    pub max_linear: f64,
    pub max_angular: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            footprint_radius: 0.3,
            max_linear_accel: 2.0,
            max_angular_accel: 3.2,
            max_linear: 2.0,
            max_angular: 3.14,
        }
    }
}

impl RobotSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("footprint_radius", self.footprint_radius),
            ("max_linear_accel", self.max_linear_accel),
            ("max_angular_accel", self.max_angular_accel),
            ("max_linear", self.max_linear),
            ("max_angular", self.max_angular),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("robot {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `sin(x) / x`, accurate near zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Integrate a constant twist for `dt` seconds along the exact arc.
pub fn step_kinematics(pose: Pose2D, twist: Twist, dt: f64) -> Result<Pose2D> {
    if !pose.is_finite() {
        return Err(Error::NonFinite("pose"));
    }
    if !(twist.linear.is_finite() && twist.angular.is_finite()) {
        return Err(Error::NonFinite("twist"));
    }
    if !dt.is_finite() {
        return Err(Error::NonFinite("dt"));
    }
    if dt <= 0.0 {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    Ok(integrate_arc(pose, twist, dt))
}

/// Unchecked arc integration, used on hot paths with validated inputs.
#[inline]
pub(crate) fn integrate_arc(pose: Pose2D, twist: Twist, dt: f64) -> Pose2D {
    let half = 0.5 * twist.angular * dt;
    let chord = twist.linear * dt * sinc(half);
    let mid = pose.heading + half;
    Pose2D {
        x: pose.x + chord * mid.cos(),
        y: pose.y + chord * mid.sin(),
        heading: normalize_angle(pose.heading + twist.angular * dt),
    }
}

/// Boolean occupancy grid, row-major with row 0 at the origin's `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: [f64; 2],
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// All-free grid.
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self> {
        Self::from_cells(width, height, resolution, vec![false; width * height])
    }

    pub fn from_cells(width: usize, height: usize, resolution: f64, cells: Vec<bool>) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Config(format!("grid resolution must be positive, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("grid dimensions must be non-zero".into()));
        }
        if cells.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin: [0.0, 0.0],
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// World extent in meters `(width, height)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn occupied(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.width + i]
    }

    /// Occupancy with everything outside the grid treated as wall.
    #[inline]
    pub fn occupied_or_outside(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            true
        } else {
            self.cells[j as usize * self.width + i as usize]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, occupied: bool) {
        let idx = self.index(i, j);
        self.cells[idx] = occupied;
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (i, j) = self.cell_of_unbounded(x, y);
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }

    #[inline]
    pub fn cell_of_unbounded(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin[0]) / self.resolution).floor() as i64,
            ((y - self.origin[1]) / self.resolution).floor() as i64,
        )
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.resolution,
            self.origin[1] + (j as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Plain-text form: a `width height resolution` header followed by
    /// `height` lines of `0`/`1` characters, top row (highest `y`) first.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height + 32);
        let _ = writeln!(out, "{} {} {}", self.width, self.height, self.resolution);
        for j in (0..self.height).rev() {
            for i in 0..self.width {
                out.push(if self.occupied(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("grid", "empty input"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse("grid", format!("bad header {header:?}")));
        }
        let width: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse("grid", format!("bad width {:?}", fields[0])))?;
        let height: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse("grid", format!("bad height {:?}", fields[1])))?;
        let resolution: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse("grid", format!("bad resolution {:?}", fields[2])))?;
        let mut rows: Vec<&str> = lines.map(str::trim).collect();
        if rows.len() != height {
            return Err(Error::parse(
                "grid",
                format!("expected {height} rows, found {}", rows.len()),
            ));
        }
        rows.reverse();
        let mut cells = Vec::with_capacity(width * height);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::parse(
                    "grid",
                    format!("row {j} has {} cells, expected {width}", row.len()),
                ));
            }
            for ch in row.chars() {
                match ch {
                    '0' => cells.push(false),
                    '1' => cells.push(true),
                    other => return Err(Error::parse("grid", format!("bad cell {other:?}"))),
                }
            }
        }
        Self::from_cells(width, height, resolution, cells)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// 720-beam planar scan; beam 0 points 135 degrees to the right of the heading.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub ranges: Vec<f64>,
}

impl LaserScan {
    /// Angle of `beam` relative to the robot heading.
    pub fn beam_angle(beam: usize) -> f64 {
        -0.5 * SCAN_FOV + beam as f64 * SCAN_FOV / (SCAN_BEAMS - 1) as f64
    }

    pub fn min_range(&self) -> f64 {
        self.ranges.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean ranges of the right (negative angle) and left (positive angle) halves.
    pub fn half_means(&self) -> (f64, f64) {
        let half = self.ranges.len() / 2;
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (mean(&self.ranges[..half]), mean(&self.ranges[half..]))
    }
}

/// Cast every beam of the scanner from `pose` using exact grid traversal.
pub fn raycast_scan(grid: &OccupancyGrid, pose: Pose2D) -> Result<LaserScan> {
    if !pose.is_finite() {
        return Err(Error::NonFinite("pose"));
    }
    if !grid.contains(pose.x, pose.y) {
        return Err(Error::OutOfBounds {
            x: pose.x,
            y: pose.y,
        });
    }
    let ranges = (0..SCAN_BEAMS)
        .map(|b| cast_ray(grid, pose.x, pose.y, pose.heading + LaserScan::beam_angle(b), SCAN_MAX_RANGE))
        .collect();
    Ok(LaserScan { ranges })
}

/// Distance along a ray to the first occupied cell, capped at `max_range`.
/// Cells outside the grid count as occupied.
pub fn cast_ray(grid: &OccupancyGrid, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
    let res = grid.resolution;
    let gx = (x - grid.origin[0]) / res;
    let gy = (y - grid.origin[1]) / res;
    let (dx, dy) = (angle.cos(), angle.sin());
    let mut ci = gx.floor() as i64;
    let mut cj = gy.floor() as i64;
    if grid.occupied_or_outside(ci, cj) {
        return 0.5 * res;
    }
    let max_cells = max_range / res;
    let (step_i, mut t_max_x, t_delta_x) = axis_setup(gx, ci, dx);
    let (step_j, mut t_max_y, t_delta_y) = axis_setup(gy, cj, dy);
    loop {
        let t_entry;
        if t_max_x < t_max_y {
            ci += step_i;
            t_entry = t_max_x;
            t_max_x += t_delta_x;
        } else {
            cj += step_j;
            t_entry = t_max_y;
            t_max_y += t_delta_y;
        }
        if t_entry >= max_cells {
            return max_range;
        }
        if grid.occupied_or_outside(ci, cj) {
            return (t_entry * res).max(0.5 * res).min(max_range);
        }
    }
}

fn axis_setup(g: f64, cell: i64, d: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, ((cell + 1) as f64 - g) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (g - cell as f64) / -d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// True iff an occupied cell centre lies strictly within the footprint radius.
pub fn check_collision(grid: &OccupancyGrid, pose: Pose2D, spec: &RobotSpec) -> bool {
    let r = spec.footprint_radius;
    let res = grid.resolution;
    let (i0, j0) = grid.cell_of_unbounded(pose.x - r, pose.y - r);
    let (i1, j1) = grid.cell_of_unbounded(pose.x + r, pose.y + r);
    let r2 = r * r;
    for j in j0..=j1 {
        let cy = grid.origin[1] + (j as f64 + 0.5) * res - pose.y;
        for i in i0..=i1 {
            let cx = grid.origin[0] + (i as f64 + 0.5) * res - pose.x;
            if cx * cx + cy * cy < r2 && grid.occupied_or_outside(i, j) {
                return true;
            }
        }
    }
    false
}
