//! Push planning on the top-down uncertainty and height fields.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TopDownGrid, Vec2, WorkspaceGrid};
use crate::pushsim::PushAction;
use crate::scene::{HeightMap, Workspace};

/// Shortest push the planner will emit after clipping, meters.
pub const MIN_PUSH_DISTANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Weight of validity against informativeness.
    pub eta: f64,
    /// Base push length, meters.
    pub push_distance: f64,
    /// Consecutive starts closer than this double the push length.
    pub repeat_start_threshold: f64,
    /// Start and target closer than this trigger a random direction.
    pub closeness_threshold: f64,
    /// Stop once the peak uncertainty falls below this.
    pub termination_threshold: f64,
    pub max_steps: usize,
    /// Side of the square pre-selection window, meters.
    pub search_window: f64,
    /// Gripper footprint in cells (rows, cols).
    pub footprint: [usize; 2],
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            push_distance: 0.1,
            repeat_start_threshold: 0.05,
            closeness_threshold: 0.05,
            termination_threshold: 2.0,
            max_steps: 20,
            search_window: 0.4,
            footprint: [12, 12],
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("push_distance", self.push_distance),
            ("repeat_start_threshold", self.repeat_start_threshold),
            ("closeness_threshold", self.closeness_threshold),
            ("termination_threshold", self.termination_threshold),
            ("search_window", self.search_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be non-negative, got {}", self.eta)));
        }
        if self.max_steps == 0 || self.footprint[0] == 0 || self.footprint[1] == 0 {
            return Err(Error::Config("max_steps and footprint must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-region scores indexed by the region's top-left cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionScores {
    pub footprint: [usize; 2],
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl RegionScores {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// A gripper-sized candidate region with its cached scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerRegion {
    pub i: usize,
    pub j: usize,
    pub height: usize,
    pub width: usize,
    pub informativeness: f64,
    pub validity: f64,
}

impl PlannerRegion {
    pub fn cell_count(&self) -> usize {
        self.height * self.width
    }

    /// World (x, y) of the region center.
    pub fn center(&self, grid: &WorkspaceGrid) -> Vec2 {
        [
            grid.origin[0] + (self.i as f64 + self.height as f64 / 2.0) * grid.cell_size,
            grid.origin[1] + (self.j as f64 + self.width as f64 / 2.0) * grid.cell_size,
        ]
    }
}

fn check_footprint(grid: &WorkspaceGrid, footprint: [usize; 2]) -> Result<()> {
    if footprint[0] == 0 || footprint[1] == 0 || footprint[0] > grid.rows || footprint[1] > grid.cols {
        return Err(Error::Dimension(format!(
            "footprint {}x{} does not fit a {}x{} grid",
            footprint[0], footprint[1], grid.rows, grid.cols
        )));
    }
    Ok(())
}

/// Sum of every `footprint`-sized window, via a summed-area table.
pub fn window_sums(field: &TopDownGrid, footprint: [usize; 2]) -> Result<RegionScores> {
    let g = field.geometry();
    check_footprint(g, footprint)?;
    let (rows, cols) = (g.rows, g.cols);
    let stride = cols + 1;
    let mut sat = vec![0.0; (rows + 1) * stride];
    for i in 0..rows {
        let mut run = 0.0;
        for j in 0..cols {
            run += field.get(i, j);
            sat[(i + 1) * stride + j + 1] = sat[i * stride + j + 1] + run;
        }
    }
    let [h, w] = footprint;
    let out_rows = rows - h + 1;
    let out_cols = cols - w + 1;
    let mut values = Vec::with_capacity(out_rows * out_cols);
    for i in 0..out_rows {
        for j in 0..out_cols {
            let s = sat[(i + h) * stride + j + w] - sat[i * stride + j + w] - sat[(i + h) * stride + j] + sat[i * stride + j];
            values.push(s);
        }
    }
    Ok(RegionScores {
        footprint,
        rows: out_rows,
        cols: out_cols,
        values,
    })
}

/// Average uncertainty over each gripper-sized region.
pub fn informativeness_map(uncertainty: &TopDownGrid, footprint: [usize; 2]) -> Result<RegionScores> {
    let mut scores = window_sums(uncertainty, footprint)?;
    let n = (footprint[0] * footprint[1]) as f64;
    scores.values.iter_mut().for_each(|v| *v /= n);
    Ok(scores)
}

/// Sliding maximum of one line with a monotone deque.
fn sliding_max(line: &[f64], width: usize, out: &mut Vec<f64>) {
    let mut deque = std::collections::VecDeque::new();
    for (k, &v) in line.iter().enumerate() {
        while deque.back().is_some_and(|&b: &usize| line[b] <= v) {
            deque.pop_back();
        }
        deque.push_back(k);
        if deque[0] + width <= k {
            deque.pop_front();
        }
        if k + 1 >= width {
            out.push(line[deque[0]]);
        }
    }
}

/// Negated maximum height over each region.
pub fn validity_map(heights: &HeightMap, footprint: [usize; 2]) -> Result<RegionScores> {
    let field = heights.grid();
    let g = field.geometry();
    check_footprint(g, footprint)?;
    let [h, w] = footprint;
    let out_cols = g.cols - w + 1;
    let out_rows = g.rows - h + 1;
    let mut row_max = Vec::with_capacity(g.rows * out_cols);
    for i in 0..g.rows {
        sliding_max(&field.values()[i * g.cols..(i + 1) * g.cols], w, &mut row_max);
    }
    let mut values = vec![0.0; out_rows * out_cols];
    let mut column = Vec::with_capacity(g.rows);
    let mut col_max = Vec::with_capacity(out_rows);
    for j in 0..out_cols {
        column.clear();
        column.extend((0..g.rows).map(|i| row_max[i * out_cols + j]));
        col_max.clear();
        sliding_max(&column, h, &mut col_max);
        for (i, m) in col_max.iter().enumerate() {
            values[i * out_cols + j] = -m;
        }
    }
    Ok(RegionScores {
        footprint,
        rows: out_rows,
        cols: out_cols,
        values,
    })
}

/// First strict maximum in row-major order.
fn argmax_in(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, score: impl Fn(usize, usize) -> f64) -> (usize, usize) {
    let mut best = (rows.start, cols.start);
    let mut best_score = f64::NEG_INFINITY;
    for i in rows {
        for j in cols.clone() {
            let s = score(i, j);
            if s > best_score {
                best_score = s;
                best = (i, j);
            }
        }
    }
    best
}

fn region(i: usize, j: usize, footprint: [usize; 2], inf: &RegionScores, val: &RegionScores) -> PlannerRegion {
    PlannerRegion {
        i,
        j,
        height: footprint[0],
        width: footprint[1],
        informativeness: inf.get(i, j),
        validity: val.get(i, j),
    }
}

/// Top-left cell of the search window with the highest mean uncertainty,
/// and the window size in cells.
pub fn search_window(uncertainty: &TopDownGrid, cfg: &PlannerConfig) -> Result<(usize, usize, [usize; 2])> {
    let g = uncertainty.geometry();
    let side = (cfg.search_window / g.cell_size).round() as usize;
    let size = [side.clamp(cfg.footprint[0], g.rows), side.clamp(cfg.footprint[1], g.cols)];
    let sums = window_sums(uncertainty, size)?;
    let (i, j) = argmax_in(0..sums.rows, 0..sums.cols, |i, j| sums.get(i, j));
    Ok((i, j, size))
}

/// Start region: best `I + eta * V` inside the most uncertain window.
pub fn select_start(
    uncertainty: &TopDownGrid,
    inf: &RegionScores,
    val: &RegionScores,
    cfg: &PlannerConfig,
) -> Result<PlannerRegion> {
    if inf.rows != val.rows || inf.cols != val.cols || inf.footprint != val.footprint {
        return Err(Error::Dimension("informativeness and validity maps differ".into()));
    }
    let (wi, wj, size) = search_window(uncertainty, cfg)?;
    let [h, w] = inf.footprint;
    let rows = wi..wi + size[0] - h + 1;
    let cols = wj..wj + size[1] - w + 1;
    let (i, j) = argmax_in(rows, cols, |i, j| inf.get(i, j) + cfg.eta * val.get(i, j));
    Ok(region(i, j, inf.footprint, inf, val))
}

/// Region with the highest mean uncertainty over the whole grid.
pub fn select_target(inf: &RegionScores) -> (usize, usize) {
    argmax_in(0..inf.rows, 0..inf.cols, |i, j| inf.get(i, j))
}

/// Everything decided in one planning step, for logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPush {
    pub action: PushAction,
    pub start_region: PlannerRegion,
    pub target: Vec2,
    pub random_direction: bool,
}

/// Longest travel from `start` along `dir` that stays on the table.
fn travel_limit(start: Vec2, dir: Vec2, ws: &Workspace) -> f64 {
    let mut limit = f64::INFINITY;
    for a in 0..2 {
        if dir[a] > 1e-12 {
            limit = limit.min((ws.max[a] - start[a]) / dir[a]);
        } else if dir[a] < -1e-12 {
            limit = limit.min((ws.min[a] - start[a]) / dir[a]);
        }
    }
    limit.max(0.0)
}

/// Uniform unit vector.
pub fn random_direction(rng: &mut impl Rng) -> Vec2 {
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    [theta.cos(), theta.sin()]
}

/// Push length after the repeat rule and workspace clipping.
pub fn push_length(start: Vec2, dir: Vec2, history: &[Vec2], ws: &Workspace, cfg: &PlannerConfig) -> f64 {
    let repeated = history
        .last()
        .is_some_and(|p| (p[0] - start[0]).hypot(p[1] - start[1]) < cfg.repeat_start_threshold);
    let base = if repeated { 2.0 * cfg.push_distance } else { cfg.push_distance };
    base.min(travel_limit(start, dir, ws)).max(MIN_PUSH_DISTANCE)
}

/// Plans the next push from the current fields.
///
/// `history` holds the start points of earlier pushes in this episode.
pub fn plan_push(
    uncertainty: &TopDownGrid,
    heights: &HeightMap,
    cfg: &PlannerConfig,
    history: &[Vec2],
    rng: &mut impl Rng,
) -> Result<PlannedPush> {
    if !uncertainty.same_geometry(heights.grid()) {
        return Err(Error::Dimension("uncertainty and height grids differ".into()));
    }
    let grid = *uncertainty.geometry();
    let ws = Workspace::from_grid(&grid);
    let inf = informativeness_map(uncertainty, cfg.footprint)?;
    let val = validity_map(heights, cfg.footprint)?;
    let start_region = select_start(uncertainty, &inf, &val, cfg)?;
    let (ti, tj) = select_target(&inf);
    let target = region(ti, tj, cfg.footprint, &inf, &val).center(&grid);
    let start = start_region.center(&grid);
    let delta = [target[0] - start[0], target[1] - start[1]];
    let gap = delta[0].hypot(delta[1]);
    let (direction, random) = if gap < cfg.closeness_threshold {
        (random_direction(rng), true)
    } else {
        ([delta[0] / gap, delta[1] / gap], false)
    };
    let distance = push_length(start, direction, history, &ws, cfg);
    Ok(PlannedPush {
        action: PushAction::new(start, direction, distance)?,
        start_region,
        target,
        random_direction: random,
    })
}

/// Whether exploration should stop before taking step `step` (0-based).
pub fn should_terminate(uncertainty: &TopDownGrid, step: usize, cfg: &PlannerConfig) -> bool {
    step >= cfg.max_steps || uncertainty.max() < cfg.termination_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid(rows: usize, cols: usize) -> WorkspaceGrid {
        WorkspaceGrid::new([0.0, 0.0], 0.01, rows, cols).unwrap()
    }

    fn field(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> TopDownGrid {
        let values = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        TopDownGrid::from_values(grid(rows, cols), values).unwrap()
    }

    fn naive_mean(u: &TopDownGrid, i: usize, j: usize, fp: [usize; 2]) -> f64 {
        let mut s = 0.0;
        for a in i..i + fp[0] {
            for b in j..j + fp[1] {
                s += u.get(a, b);
            }
        }
        s / (fp[0] * fp[1]) as f64
    }

    #[test]
    fn informativeness_examples() {
        let u = field(10, 10, |_, _| 0.7);
        let inf = informativeness_map(&u, [3, 3]).unwrap();
        assert_eq!((inf.rows, inf.cols), (8, 8));
        assert!(inf.values.iter().all(|v| (v - 0.7).abs() < 1e-12));
        let hot = field(10, 10, |i, j| if (i, j) == (4, 5) { 9.0 } else { 0.0 });
        let inf = informativeness_map(&hot, [3, 3]).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let covers = (i..i + 3).contains(&4) && (j..j + 3).contains(&5);
                let want = if covers { 1.0 } else { 0.0 };
                assert!((inf.get(i, j) - want).abs() < 1e-12);
            }
        }
        assert!(informativeness_map(&hot, [11, 2]).is_err());
    }

    #[test]
    fn validity_examples() {
        let empty = HeightMap(field(20, 20, |_, _| 0.0));
        let v = validity_map(&empty, [4, 4]).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
        let one = HeightMap(field(20, 20, |i, j| if (8..11).contains(&i) && (8..11).contains(&j) { 0.08 } else { 0.0 }));
        let v = validity_map(&one, [4, 4]).unwrap();
        assert_eq!(v.get(7, 7), -0.08);
        assert_eq!(v.get(0, 0), 0.0);
        assert_eq!(v.get(10, 5), -0.08);
        assert_eq!(v.get(11, 5), 0.0);
    }

    #[test]
    fn start_avoids_tall_objects_under_uniform_uncertainty() {
        let u = field(30, 30, |_, _| 1.0);
        let h = HeightMap(field(30, 30, |i, j| if i < 8 && j < 8 { 0.08 } else { 0.0 }));
        let cfg = PlannerConfig {
            footprint: [4, 4],
            ..PlannerConfig::default()
        };
        let inf = informativeness_map(&u, cfg.footprint).unwrap();
        let val = validity_map(&h, cfg.footprint).unwrap();
        let r = select_start(&u, &inf, &val, &cfg).unwrap();
        assert_eq!(r.validity, 0.0);
        assert_eq!((r.i, r.j), (0, 8));
    }

    #[test]
    fn target_tie_break_and_hot_cell() {
        let u = field(16, 16, |_, _| 2.0);
        assert_eq!(select_target(&informativeness_map(&u, [4, 4]).unwrap()), (0, 0));
        let hot = field(16, 16, |i, j| if (i, j) == (9, 3) { 1.0 } else { 0.0 });
        let (i, j) = select_target(&informativeness_map(&hot, [4, 4]).unwrap());
        assert_eq!((i, j), (6, 0));
    }

    fn world_field(f: impl Fn(usize, usize) -> f64) -> TopDownGrid {
        let g = WorkspaceGrid::default();
        let values = (0..g.rows).flat_map(|i| (0..g.cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        TopDownGrid::from_values(g, values).unwrap()
    }

    #[test]
    fn axis_aligned_push_and_repeat_doubling() {
        // Start region centered at (0.3, 0.3), target region at (0.3, 0.5).
        let u = world_field(|i, j| {
            if (144..156).contains(&i) && (244..256).contains(&j) {
                10.0
            } else if (144..156).contains(&i) && (144..156).contains(&j) {
                5.0
            } else {
                0.0
            }
        });
        let h = HeightMap(world_field(|i, j| if (144..156).contains(&i) && (244..256).contains(&j) { 0.5 } else { 0.0 }));
        let cfg = PlannerConfig {
            eta: 20.0,
            ..PlannerConfig::default()
        };
        let mut rng = seed::rng(1, &[seed::stream::PLAN]);
        let p = plan_push(&u, &h, &cfg, &[], &mut rng).unwrap();
        let s = p.action.start;
        assert!((s[0] - 0.3).abs() < 1e-12 && (s[1] - 0.3).abs() < 1e-12, "{s:?}");
        assert!((p.action.direction[0]).abs() < 1e-12 && (p.action.direction[1] - 1.0).abs() < 1e-12);
        assert_eq!(p.action.distance, 0.1);
        assert!(!p.random_direction);
        let p2 = plan_push(&u, &h, &cfg, &[[0.3, 0.33]], &mut rng).unwrap();
        assert!((p2.action.distance - 0.2).abs() < 1e-12);
        let p3 = plan_push(&u, &h, &cfg, &[[0.3, 0.33], [0.9, 0.9]], &mut rng).unwrap();
        assert_eq!(p3.action.distance, 0.1);
    }

    #[test]
    fn coincident_start_and_target_gives_uniform_directions() {
        let ws = Workspace::default();
        let mut rng = seed::rng(99, &[seed::stream::PLAN]);
        let n = 10_000;
        let mut sum = [0.0, 0.0];
        for _ in 0..n {
            let d = random_direction(&mut rng);
            assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-12);
            sum[0] += d[0];
            sum[1] += d[1];
        }
        assert!((sum[0] / n as f64).hypot(sum[1] / n as f64) < 0.05);
        // A single hot region makes start and target coincide.
        let u = world_field(|i, j| if (300..312).contains(&i) && (200..212).contains(&j) { 1.0 } else { 0.0 });
        let h = HeightMap(world_field(|_, _| 0.0));
        let p = plan_push(&u, &h, &PlannerConfig::default(), &[], &mut rng).unwrap();
        assert!(p.random_direction);
        p.action.validate(&ws).unwrap();
    }

    #[test]
    fn pushes_are_clipped_at_the_edge() {
        let ws = Workspace::default();
        let cfg = PlannerConfig::default();
        let d = push_length([1.45, 0.5], [1.0, 0.0], &[], &ws, &cfg);
        assert!((d - 0.05).abs() < 1e-12);
        let d = push_length([1.495, 0.5], [1.0, 0.0], &[], &ws, &cfg);
        assert_eq!(d, MIN_PUSH_DISTANCE);
    }

    #[test]
    fn termination_rule() {
        let cfg = PlannerConfig {
            termination_threshold: 1.0,
            ..PlannerConfig::default()
        };
        let zero = field(4, 4, |_, _| 0.0);
        assert!(should_terminate(&zero, 0, &cfg));
        let hot = field(4, 4, |i, _| if i == 2 { 5.0 } else { 0.0 });
        assert!(!should_terminate(&hot, 3, &cfg));
        assert!(should_terminate(&hot, 20, &cfg));
        assert_eq!(PlannerConfig::default().max_steps, 20);
        assert_eq!(PlannerConfig::default().eta, 0.5);
    }

    proptest! {
        #[test]
        fn fast_maps_match_naive(rows in 4usize..40, cols in 4usize..40, fh in 1usize..6, fw in 1usize..6, seed_v in 0u64..1000) {
            prop_assume!(fh <= rows && fw <= cols);
            let mut rng = seed::rng(seed_v, &[]);
            let vals: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..3.0)).collect();
            let u = TopDownGrid::from_values(grid(rows, cols), vals).unwrap();
            let inf = informativeness_map(&u, [fh, fw]).unwrap();
            let hm = HeightMap(u.clone());
            let val = validity_map(&hm, [fh, fw]).unwrap();
            for i in 0..inf.rows {
                for j in 0..inf.cols {
                    prop_assert!((inf.get(i, j) - naive_mean(&u, i, j, [fh, fw])).abs() < 1e-9);
                    let mut m = f64::NEG_INFINITY;
                    for a in i..i + fh { for b in j..j + fw { m = m.max(u.get(a, b)); } }
                    prop_assert_eq!(val.get(i, j), -m);
                }
            }
        }
    }
}
