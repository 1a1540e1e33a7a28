use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::sync::Arc;

use navtune_core::nav::{local_goal, plan_on_mask, relative_bearing, DwaConfig, GlobalPath, NavStack, NavWorld};
use navtune_core::sim::{check_collision, step_kinematics, OccupancyGrid, Pose2D, RobotSpec, Twist};
use navtune_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RES: f64 = 0.05;

/// Bellman-Ford over the same move rules: 8-connected, no corner cutting,
/// start cell always usable.
fn oracle_length(w: usize, h: usize, mask: &[bool], s: usize, g: usize) -> f64 {
    let mut m = mask.to_vec();
    m[s] = true;
    let free = |i: i64, j: i64| i >= 0 && j >= 0 && i < w as i64 && j < h as i64 && m[j as usize * w + i as usize];
    let mut dist = vec![f64::INFINITY; w * h];
    dist[s] = 0.0;
    loop {
        let mut changed = false;
        for u in 0..w * h {
            if !dist[u].is_finite() {
                continue;
            }
            let (i, j) = ((u % w) as i64, (u / w) as i64);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if (di, dj) == (0, 0) || !free(i + di, j + dj) {
                        continue;
                    }
                    if di != 0 && dj != 0 && !(free(i + di, j) && free(i, j + dj)) {
                        continue;
                    }
                    let v = (j + dj) as usize * w + (i + di) as usize;
                    let c = dist[u] + if di != 0 && dj != 0 { SQRT_2 } else { 1.0 };
                    if c < dist[v] - 1e-12 {
                        dist[v] = c;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist[g]
}

#[test]
fn dijkstra_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (w, h) = (12, 10);
    let grid = OccupancyGrid::new(w, h, RES).unwrap();
    for _ in 0..200 {
        let mask: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.7)).collect();
        let s = rng.random_range(0..w * h);
        let g = rng.random_range(0..w * h);
        let start = grid.cell_center(s % w, s / w);
        let goal = grid.cell_center(g % w, g / w);
        let want = if mask[g] { oracle_length(w, h, &mask, s, g) } else { f64::INFINITY };
        match plan_on_mask(&grid, &mask, start, goal) {
            Ok(path) => {
                assert!((path.length - want * RES).abs() < 1e-9, "{} vs {}", path.length, want * RES);
                assert_eq!(path.waypoints.first(), Some(&start));
                assert_eq!(path.waypoints.last(), Some(&goal));
            }
            Err(Error::NoPath) => assert!(want.is_infinite()),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn empty_ten_by_ten_corner_to_corner() {
    let grid = OccupancyGrid::new(10, 10, RES).unwrap();
    let mask = vec![true; 100];
    let path = plan_on_mask(&grid, &mask, grid.cell_center(0, 0), grid.cell_center(9, 9)).unwrap();
    assert!((path.length - 9.0 * SQRT_2 * RES).abs() < RES);
    assert!((path.length - oracle_length(10, 10, &mask, 0, 99) * RES).abs() < 1e-12);
}

#[test]
fn local_goal_frame_transform() {
    let path = GlobalPath::from_waypoints((0..=60).map(|k| [0.0, k as f64 * RES]).collect());
    let pose = Pose2D::new(0.0, 0.0, FRAC_PI_4);
    let (target, phi) = local_goal(&path, pose, 1.0);
    // Rotation-matrix oracle: R(-heading) applied to the world offset.
    let (dx, dy) = (target[0] - pose.x, target[1] - pose.y);
    let (s, c) = pose.heading.sin_cos();
    let want = (-s * dx + c * dy).atan2(c * dx + s * dy);
    assert!((phi - want).abs() < 1e-12);
    assert!((phi - FRAC_PI_4).abs() < 1e-12);
    assert!((relative_bearing(Pose2D::new(0.0, 0.0, 0.0), [0.0, 1.0]) - FRAC_PI_2).abs() < 1e-12);
    assert_eq!(relative_bearing(Pose2D::new(0.0, 0.0, 0.0), [1.0, 0.0]), 0.0);
}

fn walled(w: usize, h: usize) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(w, h, RES).unwrap();
    for i in 0..w {
        g.set(i, 0, true);
        g.set(i, h - 1, true);
    }
    for j in 0..h {
        g.set(0, j, true);
        g.set(w - 1, j, true);
    }
    g
}

fn stack_for(grid: OccupancyGrid, goal: [f64; 2]) -> NavStack {
    let spec = RobotSpec::default();
    let world = Arc::new(NavWorld::new(grid, &spec));
    NavStack::new(world, goal, spec, DwaConfig::default(), RES)
}

/// Drive the stack with perfect actuation until the goal or `cycles` run out.
fn drive(stack: &mut NavStack, mut pose: Pose2D, goal: [f64; 2], params: &navtune_core::PlannerParams, cycles: usize) -> (Pose2D, Vec<Twist>) {
    let mut twist = Twist::ZERO;
    let mut commands = Vec::new();
    stack.replan(pose).unwrap();
    for _ in 0..cycles {
        if pose.distance_to(goal) < 0.3 {
            break;
        }
        let out = stack.step(pose, twist, params).unwrap();
        commands.push(out.twist);
        for _ in 0..4 {
            let next = step_kinematics(pose, out.twist, RES).unwrap();
            if check_collision(&stack.world().grid, next, &RobotSpec::default()) {
                twist = Twist::ZERO;
                break;
            }
            pose = next;
            twist = out.twist;
        }
        let _ = stack.replan(pose);
    }
    (pose, commands)
}

#[test]
fn open_corridor_reaches_goal() {
    let grid = walled(60, 200);
    let goal = [1.525, 9.0];
    let mut stack = stack_for(grid, goal);
    let params = DwaConfig::default().bounds.defaults();
    let (end, commands) = drive(&mut stack, Pose2D::new(1.525, 1.0, FRAC_PI_2), goal, &params, 100);
    assert!(end.distance_to(goal) < 0.3, "stopped at {end:?}");
    assert!(commands.iter().all(|t| t.linear > 0.0));
}

#[test]
fn linear_speed_respects_max_vel_x() {
    let grid = walled(60, 200);
    let goal = [1.525, 9.0];
    let mut stack = stack_for(grid, goal);
    let mut params = DwaConfig::default().bounds.defaults();
    params.max_vel_x = 0.1;
    let (_, commands) = drive(&mut stack, Pose2D::new(1.525, 1.0, FRAC_PI_2), goal, &params, 20);
    assert!(commands.iter().all(|t| t.linear <= 0.1 + 1e-12));
}

#[test]
fn boxed_robot_recovers_in_place() {
    let mut grid = walled(100, 100);
    let centre = [2.525, 2.525];
    for j in 0..100 {
        for i in 0..100 {
            let p = grid.cell_center(i, j);
            if (0.32..0.38).contains(&(p[0] - centre[0]).hypot(p[1] - centre[1])) {
                grid.set(i, j, true);
            }
        }
    }
    let mut stack = stack_for(grid, centre);
    let pose = Pose2D::new(centre[0], centre[1], 0.0);
    stack.replan(pose).unwrap();
    let out = stack.step(pose, Twist::ZERO, &DwaConfig::default().bounds.defaults()).unwrap();
    assert!(out.recovering && !out.decision.feasible);
    assert_eq!(out.twist.linear, 0.0);
    assert!(out.twist.angular != 0.0);
    assert_eq!(stack.recovery_count(), 1);
}

#[test]
fn recovery_ends_once_a_candidate_is_feasible() {
    // A pocket open only behind the robot: rotating in place eventually
    // exposes the exit, after which DWA takes over again.
    let mut grid = walled(120, 120);
    let c = [3.025, 3.025];
    for j in 0..120 {
        for i in 0..120 {
            let p = grid.cell_center(i, j);
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            let d = dx.hypot(dy);
            let behind = dx < 0.0 && dy.abs() < 0.45;
            if (0.32..0.4).contains(&d) && !behind {
                grid.set(i, j, true);
            }
        }
    }
    let goal = [1.0, 3.025];
    let mut stack = stack_for(grid, goal);
    let params = DwaConfig::default().bounds.defaults();
    let mut pose = Pose2D::new(c[0], c[1], 0.0);
    stack.replan(pose).unwrap();
    let mut recovered = 0;
    let mut resumed = false;
    for _ in 0..200 {
        let out = stack.step(pose, Twist::ZERO, &params).unwrap();
        if !out.recovering {
            resumed = true;
            break;
        }
        recovered += 1;
        assert_eq!(out.twist.linear, 0.0);
        pose = step_kinematics(pose, out.twist, 0.2).unwrap();
    }
    assert!(resumed, "still recovering after {recovered} cycles");
    assert!(recovered > 0);
    assert_eq!(stack.recovery_count(), 0);
}
