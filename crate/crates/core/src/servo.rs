//! Oracle substitute for the visual-servoing network.
//!
//! Instead of regressing from pixels, the grid is rendered from ground truth:
//! each cell whose workspace footprint overlaps a part's graspable disc
//! carries that instance's value-function sample and control command, plus
//! configurable Gaussian noise. Control selection keeps only the candidate
//! with the minimal value (non-optimal suppression), and a grasp executes
//! once the minimum drops below the termination threshold.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vector3;
use crate::rng::SimRng;
use crate::scalar::Scalar;
use crate::scene::{Gripper, PartId, Scene};
use crate::time::SimTime;
use crate::{Real, Vec3};

/// Value function driving the servo loop: squared Euclidean distance between
/// the end-effector and the pre-grasp target, in m². Positive-definite and
/// zero only at the target.
pub fn ground_truth_lyapunov<T: Scalar>(ee: Vector3<T>, pregrasp: Vector3<T>) -> T {
    (ee - pregrasp).norm_squared()
}

/// Proportional control toward the pre-grasp target, speed-limited. Strictly
/// decreases the value function whenever `gain * dt <= 1`.
pub fn proportional_control<T: Scalar>(
    ee: Vector3<T>,
    pregrasp: Vector3<T>,
    gain: T,
    max_speed: T,
) -> Vector3<T> {
    (-(ee - pregrasp) * gain).clamp_norm(max_speed)
}

/// Gaussian noise levels injected into rendered grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoNoise {
    /// Std-dev on each cell's value sample (m²).
    pub sigma_value: Real,
    /// Std-dev on each control component (m/s).
    pub sigma_control: Real,
}

impl Default for ServoNoise {
    fn default() -> Self {
        ServoNoise {
            sigma_value: 2e-5,
            sigma_control: 0.01,
        }
    }
}

impl ServoNoise {
    pub const NONE: ServoNoise = ServoNoise {
        sigma_value: 0.0,
        sigma_control: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoConfig {
    pub rows: usize,
    pub cols: usize,
    /// Proportional gain, 1/s.
    pub gain: Real,
    /// Speed limit on emitted controls, m/s.
    pub max_speed: Real,
    /// Terminate servoing when the minimal value drops below this, m².
    pub terminate_threshold: Real,
    /// Straight-down travel before closing the gripper, m.
    pub descend_depth: Real,
    /// Height of the pre-grasp pose above a part centre, m.
    pub hover_height: Real,
    pub noise: ServoNoise,
    /// Maximal planar offset for a mechanical grasp to catch, m.
    pub align_tolerance: Real,
    /// Servo loop rate, Hz.
    pub tick_rate: Real,
    /// Probability that a well-aligned grasp succeeds mechanically.
    pub p_mech: Real,
    /// Std-dev of the planar knock a failed grasp gives the part, m.
    pub knock_sigma: Real,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            rows: 16,
            cols: 16,
            gain: 2.0,
            max_speed: 0.25,
            terminate_threshold: 1e-4,
            descend_depth: 0.03,
            hover_height: 0.10,
            noise: ServoNoise::default(),
            align_tolerance: 0.015,
            tick_rate: 30.0,
            p_mech: 0.96,
            knock_sigma: 0.01,
        }
    }
}

impl ServoConfig {
    /// Noise-free, mechanically perfect variant for oracle runs.
    pub fn oracle() -> Self {
        ServoConfig {
            noise: ServoNoise::NONE,
            p_mech: 1.0,
            ..ServoConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("servo grid must have at least one cell"));
        }
        for (name, v) in [
            ("gain", self.gain),
            ("max_speed", self.max_speed),
            ("terminate_threshold", self.terminate_threshold),
            ("descend_depth", self.descend_depth),
            ("hover_height", self.hover_height),
            ("align_tolerance", self.align_tolerance),
            ("tick_rate", self.tick_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("servo.{name} must be positive, got {v}")));
            }
        }
        if self.noise.sigma_value < 0.0 || self.noise.sigma_control < 0.0 {
            return Err(Error::config("servo noise sigmas must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.p_mech) {
            return Err(Error::config(format!(
                "servo.p_mech must lie in [0,1], got {}",
                self.p_mech
            )));
        }
        if self.knock_sigma < 0.0 {
            return Err(Error::config("servo.knock_sigma must be non-negative"));
        }
        if self.gain / self.tick_rate > 1.0 {
            return Err(Error::config(
                "servo gain/tick_rate exceeds 1: the discrete loop would overshoot",
            ));
        }
        SimTime::period_of_rate(self.tick_rate)?;
        Ok(())
    }

    /// Pre-grasp pose for a part: hover height above its centre.
    pub fn pregrasp(&self, part_position: Vec3) -> Vec3 {
        Vector3::new(
            part_position.x,
            part_position.y,
            part_position.z + self.hover_height,
        )
    }
}

/// One grid cell. Invalid cells carry zeroed value/control and are never
/// selectable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub valid: bool,
    pub value: Real,
    pub control: Vec3,
    pub instance_id: Option<PartId>,
}

impl GridCell {
    fn invalid() -> Self {
        GridCell {
            valid: false,
            value: 0.0,
            control: Vector3::zero(),
            instance_id: None,
        }
    }
}

/// Per-cell value/control field over the workspace image plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovGrid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<GridCell>,
}

impl LyapunovGrid {
    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        &self.cells[row * self.cols + col]
    }
}

/// Render the grid for the current scene.
///
/// Cells overlapping a part's graspable disc become valid and carry the
/// instance's ground-truth value and speed-limited proportional control,
/// each perturbed by zero-mean Gaussian noise. Everything else is invalid.
pub fn render_lyapunov_grid(scene: &Scene, cfg: &ServoConfig, rng: &mut SimRng) -> LyapunovGrid {
    let bounds = scene.workspace_bounds;
    let dx = (bounds.max.x - bounds.min.x) / cfg.cols as Real;
    let dy = (bounds.max.y - bounds.min.y) / cfg.rows as Real;
    let parts: Vec<_> = scene.unattached().collect();

    let mut cells = Vec::with_capacity(cfg.rows * cfg.cols);
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            let x0 = bounds.min.x + c as Real * dx;
            let y0 = bounds.min.y + r as Real * dy;
            let (x1, y1) = (x0 + dx, y0 + dy);
            let cx = x0 + dx / 2.0;
            let cy = y0 + dy / 2.0;

            // nearest part whose graspable disc overlaps this cell footprint
            let mut owner: Option<(&crate::scene::Part, Real)> = None;
            for part in &parts {
                let px = part.position.x.max(x0).min(x1);
                let py = part.position.y.max(y0).min(y1);
                let ddx = part.position.x - px;
                let ddy = part.position.y - py;
                if ddx * ddx + ddy * ddy <= scene.part_radius * scene.part_radius {
                    let center_dist =
                        (part.position.x - cx).powi(2) + (part.position.y - cy).powi(2);
                    if owner.map_or(true, |(_, d)| center_dist < d) {
                        owner = Some((part, center_dist));
                    }
                }
            }

            let cell = match owner {
                Some((part, _)) => {
                    let pregrasp = cfg.pregrasp(part.position);
                    let mut value = ground_truth_lyapunov(scene.ee_pose, pregrasp);
                    let mut control =
                        proportional_control(scene.ee_pose, pregrasp, cfg.gain, cfg.max_speed);
                    if cfg.noise.sigma_value > 0.0 {
                        let n = Normal::new(0.0, cfg.noise.sigma_value).unwrap();
                        value = (value + n.sample(rng)).max(0.0);
                    }
                    if cfg.noise.sigma_control > 0.0 {
                        let n = Normal::new(0.0, cfg.noise.sigma_control).unwrap();
                        control.x += n.sample(rng);
                        control.y += n.sample(rng);
                        control.z += n.sample(rng);
                    }
                    GridCell {
                        valid: true,
                        value,
                        control,
                        instance_id: Some(part.id),
                    }
                }
                None => GridCell::invalid(),
            };
            cells.push(cell);
        }
    }
    LyapunovGrid {
        rows: cfg.rows,
        cols: cfg.cols,
        cells,
    }
}

/// The selected control candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub cell_index: usize,
    pub control: Vec3,
    pub v_min: Real,
    pub instance_id: Option<PartId>,
}

/// Non-optimal suppression: the valid cell of globally minimal value wins,
/// ties resolving to the lowest cell index. `None` when no cell is valid.
pub fn select_control(grid: &LyapunovGrid) -> Option<Selection> {
    let mut best: Option<Selection> = None;
    for (i, cell) in grid.cells.iter().enumerate() {
        if !cell.valid {
            continue;
        }
        if best.map_or(true, |b| cell.value < b.v_min) {
            best = Some(Selection {
                cell_index: i,
                control: cell.control,
                v_min: cell.value,
                instance_id: cell.instance_id,
            });
        }
    }
    best
}

/// Output of one servo tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoSignal {
    pub control: Vec3,
    pub v_min: Option<Real>,
    pub terminate: bool,
    /// True when no graspable part remains anywhere in the scene.
    pub assembly_done: bool,
    pub target: Option<PartId>,
}

/// Render, select, and threshold: the servo module's per-tick output.
pub fn servo_tick(scene: &Scene, cfg: &ServoConfig, rng: &mut SimRng) -> ServoSignal {
    let grid = render_lyapunov_grid(scene, cfg, rng);
    match select_control(&grid) {
        Some(sel) => ServoSignal {
            control: sel.control,
            v_min: Some(sel.v_min),
            terminate: sel.v_min < cfg.terminate_threshold,
            assembly_done: false,
            target: sel.instance_id,
        },
        None => ServoSignal {
            control: Vector3::zero(),
            v_min: None,
            terminate: false,
            assembly_done: scene.unattached_count() == 0,
            target: None,
        },
    }
}

/// Result of a grasp attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspOutcome {
    pub success: bool,
    pub part: PartId,
    pub alignment_error: Real,
}

/// Descend and close the gripper on the nearest unattached part.
///
/// Succeeds when the planar alignment error is within tolerance and the
/// mechanical draw succeeds; a failed attempt knocks the part by a small
/// random planar offset. The scene is mutated in place.
pub fn execute_grasp(scene: &mut Scene, cfg: &ServoConfig, rng: &mut SimRng) -> Result<GraspOutcome> {
    if let Gripper::Holding(id) = scene.gripper {
        return Err(Error::contract(format!(
            "grasp attempted while already holding part {id}"
        )));
    }
    let target = scene
        .nearest_unattached(scene.ee_pose)
        .ok_or_else(|| Error::contract("grasp attempted with no unattached part"))?;
    let part_id = target.id;
    let part_position = target.position;
    let alignment_error = scene.ee_pose.planar_distance(part_position);

    // straight-down approach, then close
    scene.ee_pose.z -= cfg.descend_depth;
    let aligned = alignment_error <= cfg.align_tolerance;
    let mechanical = cfg.p_mech >= 1.0 || rng.random_range(0.0..1.0) < cfg.p_mech;
    let success = aligned && mechanical;

    if success {
        scene.gripper = Gripper::Holding(part_id);
        let ee = scene.ee_pose;
        let part = scene.part_mut(part_id).unwrap();
        part.attached = true;
        part.position = ee;
    } else if cfg.knock_sigma > 0.0 {
        let n = Normal::new(0.0, cfg.knock_sigma).unwrap();
        let (dx, dy) = (n.sample(rng), n.sample(rng));
        let bounds = scene.workspace_bounds;
        let part = scene.part_mut(part_id).unwrap();
        part.position.x += dx;
        part.position.y += dy;
        part.position = bounds.clamp(part.position);
    }

    // lift back to hover height above the table plane
    scene.ee_pose.z = part_position.z + cfg.hover_height;
    if let Gripper::Holding(id) = scene.gripper {
        let ee = scene.ee_pose;
        scene.part_mut(id).unwrap().position = ee;
    }

    Ok(GraspOutcome {
        success,
        part: part_id,
        alignment_error,
    })
}

/// One line of the optional per-tick grid dump: the grid with a normalized
/// shade and colour code per valid cell, for plotting.
#[derive(Debug, Serialize)]
struct GridDumpLine<'a> {
    time: SimTime,
    rows: usize,
    cols: usize,
    cells: Vec<GridDumpCell<'a>>,
}

#[derive(Debug, Serialize)]
struct GridDumpCell<'a> {
    row: usize,
    col: usize,
    #[serde(flatten)]
    cell: &'a GridCell,
    #[serde(skip_serializing_if = "Option::is_none")]
    shade: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    color: Option<String>,
}

/// Append one JSON line describing `grid` at `time` to `writer`.
pub fn write_grid_dump<W: std::io::Write>(
    writer: &mut W,
    time: SimTime,
    grid: &LyapunovGrid,
) -> Result<()> {
    let v_max = grid
        .cells
        .iter()
        .filter(|c| c.valid)
        .map(|c| c.value)
        .fold(0.0_f64, Real::max);
    let cells = grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let shade = if cell.valid {
                Some(if v_max > 0.0 { cell.value / v_max } else { 0.0 })
            } else {
                None
            };
            let color = shade.map(|s| {
                let r = (s * 255.0).round() as u8;
                let b = ((1.0 - s) * 255.0).round() as u8;
                format!("#{r:02x}00{b:02x}")
            });
            GridDumpCell {
                row: i / grid.cols,
                col: i % grid.cols,
                cell,
                shade,
                color,
            }
        })
        .collect();
    let line = GridDumpLine {
        time,
        rows: grid.rows,
        cols: grid.cols,
        cells,
    };
    serde_json::to_writer(&mut *writer, &line)?;
    writer.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::scene::Part;
    use crate::Aabb;
    use proptest::prelude::*;

    fn test_scene(parts: &[(PartId, Real, Real)]) -> Scene {
        Scene {
            parts: parts
                .iter()
                .map(|&(id, x, y)| Part {
                    id,
                    position: Vector3::new(x, y, 0.0),
                    orientation: 0.0,
                    attached: false,
                })
                .collect(),
            ee_pose: Vector3::new(0.5, 0.5, 0.25),
            gripper: Gripper::Open,
            workspace_bounds: Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 1.0, 0.5)),
            part_radius: 0.03,
        }
    }

    fn noise_free() -> ServoConfig {
        ServoConfig::oracle()
    }

    #[test]
    fn lyapunov_value_examples() {
        let v: f64 = ground_truth_lyapunov(
            Vector3::new(0.4, 0.0, 0.3),
            Vector3::new(0.4, 0.0, 0.2),
        );
        assert!((v - 0.01).abs() < 1e-15);

        let p = Vector3::new(0.1, 0.2, 0.3);
        assert_eq!(ground_truth_lyapunov::<f64>(p, p), 0.0);

        // 0.3^2 + 0.4^2 = 0.25
        let v: f64 = ground_truth_lyapunov(
            Vector3::new(0.1, 0.2, 0.3),
            Vector3::new(0.4, 0.6, 0.3),
        );
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn noise_free_cells_carry_instance_ground_truth() {
        let scene = test_scene(&[(0, 0.7, 0.5)]);
        let cfg = noise_free();
        let mut rng = seeded_rng(1);
        let grid = render_lyapunov_grid(&scene, &cfg, &mut rng);
        let expected = ground_truth_lyapunov(scene.ee_pose, cfg.pregrasp(scene.parts[0].position));
        let valid: Vec<_> = grid.cells.iter().filter(|c| c.valid).collect();
        assert!(!valid.is_empty());
        for cell in valid {
            assert_eq!(cell.value, expected);
            assert_eq!(cell.instance_id, Some(0));
        }
    }

    #[test]
    fn empty_scene_renders_all_invalid() {
        let scene = test_scene(&[]);
        let mut rng = seeded_rng(2);
        let grid = render_lyapunov_grid(&scene, &noise_free(), &mut rng);
        assert!(grid.cells.iter().all(|c| !c.valid));
        let signal = servo_tick(&scene, &noise_free(), &mut rng);
        assert!(signal.assembly_done);
        assert!(!signal.terminate);
        assert_eq!(signal.control, Vector3::zero());
    }

    #[test]
    fn two_instances_partition_into_two_value_groups() {
        let scene = test_scene(&[(0, 0.3, 0.5), (1, 0.8, 0.5)]);
        let cfg = noise_free();
        let mut rng = seeded_rng(3);
        let grid = render_lyapunov_grid(&scene, &cfg, &mut rng);
        let v0 = ground_truth_lyapunov(scene.ee_pose, cfg.pregrasp(scene.parts[0].position));
        let v1 = ground_truth_lyapunov(scene.ee_pose, cfg.pregrasp(scene.parts[1].position));
        assert_ne!(v0, v1);
        for cell in grid.cells.iter().filter(|c| c.valid) {
            match cell.instance_id {
                Some(0) => assert_eq!(cell.value, v0),
                Some(1) => assert_eq!(cell.value, v1),
                other => panic!("unexpected instance {other:?}"),
            }
        }
        let groups: std::collections::BTreeSet<_> = grid
            .cells
            .iter()
            .filter(|c| c.valid)
            .map(|c| c.instance_id)
            .collect();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn select_control_takes_the_minimum_valid_cell() {
        let mk = |valid, value| GridCell {
            valid,
            value,
            control: Vector3::zero(),
            instance_id: valid.then_some(0),
        };
        let grid = LyapunovGrid {
            rows: 1,
            cols: 3,
            cells: vec![mk(true, 0.5), mk(true, 0.2), mk(false, 0.0)],
        };
        let sel = select_control(&grid).unwrap();
        assert_eq!(sel.cell_index, 1);
        assert_eq!(sel.v_min, 0.2);

        let empty = LyapunovGrid {
            rows: 1,
            cols: 2,
            cells: vec![mk(false, 0.0), mk(false, 0.0)],
        };
        assert!(select_control(&empty).is_none());
    }

    #[test]
    fn nearer_instance_wins_by_brute_force() {
        // parts at planar distances 0.3 and 0.1 from the end-effector
        let mut scene = test_scene(&[(0, 0.2, 0.5), (1, 0.6, 0.5)]);
        scene.ee_pose = Vector3::new(0.5, 0.5, 0.10); // at hover height
        let cfg = noise_free();
        let mut rng = seeded_rng(4);
        let grid = render_lyapunov_grid(&scene, &cfg, &mut rng);
        let sel = select_control(&grid).unwrap();
        // brute-force minimum over all rendered cells agrees
        let brute = grid
            .cells
            .iter()
            .filter(|c| c.valid)
            .map(|c| c.value)
            .fold(Real::INFINITY, Real::min);
        assert_eq!(sel.v_min, brute);
        assert_eq!(sel.instance_id, Some(1));
        assert!((sel.v_min - 0.01).abs() < 1e-12);
    }

    #[test]
    fn terminate_is_a_threshold_comparison() {
        let mut scene = test_scene(&[(0, 0.5, 0.5)]);
        let cfg = noise_free();
        // v = 2 * tau
        let offset = (2.0 * cfg.terminate_threshold).sqrt();
        scene.ee_pose = Vector3::new(0.5 + offset, 0.5, cfg.hover_height);
        let mut rng = seeded_rng(5);
        let signal = servo_tick(&scene, &cfg, &mut rng);
        assert!(!signal.terminate);
        assert!(signal.control.norm() > 0.0);

        // v = 0.5 * tau
        let offset = (0.5 * cfg.terminate_threshold).sqrt();
        scene.ee_pose = Vector3::new(0.5 + offset, 0.5, cfg.hover_height);
        let signal = servo_tick(&scene, &cfg, &mut rng);
        assert!(signal.terminate);
    }

    #[test]
    fn grasp_succeeds_when_aligned_and_faultless() {
        let mut scene = test_scene(&[(0, 0.5, 0.5)]);
        scene.ee_pose = Vector3::new(0.5, 0.5, 0.10);
        let cfg = noise_free();
        let mut rng = seeded_rng(6);
        let out = execute_grasp(&mut scene, &cfg, &mut rng).unwrap();
        assert!(out.success);
        assert_eq!(out.alignment_error, 0.0);
        assert_eq!(scene.gripper, Gripper::Holding(0));
        assert_eq!(scene.unattached_count(), 0);

        // grasping while holding is a contract violation
        assert!(execute_grasp(&mut scene, &cfg, &mut rng).is_err());
    }

    #[test]
    fn misaligned_grasp_fails_and_knocks_the_part() {
        let mut scene = test_scene(&[(0, 0.5, 0.5)]);
        scene.ee_pose = Vector3::new(0.55, 0.5, 0.10); // 5 cm off, tolerance 1.5 cm
        let cfg = noise_free();
        let before = scene.parts[0].position;
        let mut rng = seeded_rng(7);
        let out = execute_grasp(&mut scene, &cfg, &mut rng).unwrap();
        assert!(!out.success);
        assert_eq!(scene.gripper, Gripper::Open);
        assert_ne!(scene.parts[0].position, before);
        assert!(scene.validate().is_ok());
    }

    /// Drive the closed loop from the current pose until terminate, then
    /// grasp. Returns (success, ticks).
    fn servo_until_grasp(
        scene: &mut Scene,
        cfg: &ServoConfig,
        rng: &mut SimRng,
        max_ticks: usize,
    ) -> (bool, usize) {
        let dt = 1.0 / cfg.tick_rate;
        for tick in 0..max_ticks {
            let signal = servo_tick(scene, cfg, rng);
            if signal.terminate {
                let out = execute_grasp(scene, cfg, rng).unwrap();
                return (out.success, tick);
            }
            scene.ee_pose += signal.control * dt;
        }
        (false, max_ticks)
    }

    #[test]
    fn calibrated_grasp_success_rate_matches_target() {
        // Monte Carlo over full servo-then-grasp attempts at default noise.
        let cfg = ServoConfig::default();
        let rng = seeded_rng(99);
        let attempts = 5_000;
        let mut successes = 0;
        for i in 0..attempts {
            let mut sub = rng.substream(&format!("attempt{i}"));
            let x = sub.random_range(0.15..0.85);
            let y = sub.random_range(0.15..0.85);
            let mut scene = test_scene(&[(0, x, y)]);
            scene.ee_pose = Vector3::new(
                sub.random_range(0.1..0.9),
                sub.random_range(0.1..0.9),
                sub.random_range(0.15..0.4),
            );
            let (ok, _) = servo_until_grasp(&mut scene, &cfg, &mut sub, 10_000);
            if ok {
                successes += 1;
            }
        }
        let rate = successes as Real / attempts as Real;
        assert!(
            (rate - 0.96).abs() < 0.02,
            "grasp success rate {rate} not within 0.96 +- 0.02"
        );
    }

    #[test]
    fn teleported_target_still_converges() {
        // reactivity to a dynamic environment: move the part mid-loop
        let cfg = noise_free();
        let mut rng = seeded_rng(8);
        let mut scene = test_scene(&[(0, 0.8, 0.8)]);
        let dt = 1.0 / cfg.tick_rate;
        for tick in 0..10_000 {
            if tick == 10 {
                scene.part_mut(0).unwrap().position = Vector3::new(0.15, 0.2, 0.0);
            }
            let signal = servo_tick(&scene, &cfg, &mut rng);
            if signal.terminate {
                assert!(tick < 1_000, "termination took unreasonably long");
                return;
            }
            scene.ee_pose += signal.control * dt;
        }
        panic!("servo loop never terminated after target teleport");
    }

    #[test]
    fn grid_dump_writes_one_json_line() {
        let scene = test_scene(&[(0, 0.6, 0.4)]);
        let mut rng = seeded_rng(9);
        let grid = render_lyapunov_grid(&scene, &noise_free(), &mut rng);
        let mut buf = Vec::new();
        write_grid_dump(&mut buf, SimTime::from_micros(33_333), &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["rows"], 16);
        assert!(v["cells"].as_array().unwrap().len() == 256);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Noise-free closed loop: the value strictly decreases every tick
        /// until termination, from any start.
        #[test]
        fn noise_free_value_strictly_decreases(
            px in 0.1f64..0.9, py in 0.1f64..0.9,
            ex in 0.05f64..0.95, ey in 0.05f64..0.95, ez in 0.05f64..0.45,
        ) {
            let cfg = noise_free();
            let mut scene = test_scene(&[(0, px, py)]);
            scene.ee_pose = Vector3::new(ex, ey, ez);
            let pregrasp = cfg.pregrasp(scene.parts[0].position);
            let mut rng = seeded_rng(10);
            let dt = 1.0 / cfg.tick_rate;
            let mut v_prev = ground_truth_lyapunov(scene.ee_pose, pregrasp);
            for _ in 0..5_000 {
                let signal = servo_tick(&scene, &cfg, &mut rng);
                if signal.terminate {
                    return Ok(());
                }
                scene.ee_pose += signal.control * dt;
                let v = ground_truth_lyapunov(scene.ee_pose, pregrasp);
                prop_assert!(v < v_prev, "value did not decrease: {v} >= {v_prev}");
                v_prev = v;
            }
            prop_assert!(false, "no termination within 5000 ticks");
        }

        /// Scrambling the payload of invalid cells never changes selection.
        #[test]
        fn selection_ignores_invalid_cells(
            seed in 0u64..1_000,
            garbage in proptest::collection::vec(0.0f64..10.0, 256),
        ) {
            let mut rng = seeded_rng(seed);
            let scene = test_scene(&[(0, 0.3, 0.4), (1, 0.7, 0.6)]);
            let mut grid = render_lyapunov_grid(&scene, &ServoConfig::default(), &mut rng);
            let before = select_control(&grid);
            for (cell, g) in grid.cells.iter_mut().zip(garbage) {
                if !cell.valid {
                    cell.value = g;
                    cell.control = Vector3::new(g, -g, g);
                }
            }
            prop_assert_eq!(select_control(&grid), before);
        }

        /// Noise-free selection always picks the instance of minimal
        /// ground-truth value.
        #[test]
        fn noise_free_selection_is_greedy_on_ground_truth(
            p0x in 0.1f64..0.9, p0y in 0.1f64..0.9,
            p1x in 0.1f64..0.9, p1y in 0.1f64..0.9,
            ex in 0.05f64..0.95, ey in 0.05f64..0.95,
        ) {
            prop_assume!(((p0x - p1x).powi(2) + (p0y - p1y).powi(2)).sqrt() > 0.12);
            let cfg = noise_free();
            let mut scene = test_scene(&[(0, p0x, p0y), (1, p1x, p1y)]);
            scene.ee_pose = Vector3::new(ex, ey, cfg.hover_height);
            let v0 = ground_truth_lyapunov(scene.ee_pose, cfg.pregrasp(scene.parts[0].position));
            let v1 = ground_truth_lyapunov(scene.ee_pose, cfg.pregrasp(scene.parts[1].position));
            prop_assume!((v0 - v1).abs() > 1e-12);
            let mut rng = seeded_rng(12);
            let grid = render_lyapunov_grid(&scene, &cfg, &mut rng);
            let sel = select_control(&grid).unwrap();
            let expect = if v0 < v1 { Some(0) } else { Some(1) };
            prop_assert_eq!(sel.instance_id, expect);
        }
    }
}
