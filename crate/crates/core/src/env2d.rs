//! Point robot in the unit square with axis-aligned rectangular obstacles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::graph::{make_graph, Graph};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("action {0} is not in 0..8")]
    InvalidAction(usize),
    #[error("requested an empty dataset")]
    EmptyRequest,
    #[error("obstacle {0:?} is not a proper rectangle inside the unit square")]
    BadObstacle([f64; 4]),
    #[error("unknown world {0:?}")]
    UnknownWorld(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct State2D {
    pub x: f64,
    pub y: f64,
}

impl State2D {
    pub const fn new(x: f64, y: f64) -> Self {
        State2D { x, y }
    }

    pub fn dist(self, o: State2D) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn lerp(self, o: State2D, t: f64) -> State2D {
        State2D::new(self.x + t * (o.x - self.x), self.y + t * (o.y - self.y))
    }

    pub fn clamp_unit(self) -> State2D {
        State2D::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl From<[f64; 2]> for State2D {
    fn from(a: [f64; 2]) -> Self {
        State2D::new(a[0], a[1])
    }
}

impl From<State2D> for [f64; 2] {
    fn from(s: State2D) -> Self {
        [s.x, s.y]
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(a: [f64; 4]) -> Self {
        Rect { xmin: a[0], ymin: a[1], xmax: a[2], ymax: a[3] }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.xmin, r.ymin, r.xmax, r.ymax]
    }
}

impl Rect {
    pub fn contains(&self, p: State2D) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Smallest `t` in `[0, 1]` at which `a + t (b - a)` touches the
    /// rectangle, by Liang-Barsky clipping.
    pub fn first_hit(&self, a: State2D, b: State2D) -> Option<f64> {
        let d = [b.x - a.x, b.y - a.y];
        let p = [a.x, a.y];
        let lo = [self.xmin, self.ymin];
        let hi = [self.xmax, self.ymax];
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for axis in 0..2 {
            if d[axis] == 0.0 {
                if p[axis] < lo[axis] || p[axis] > hi[axis] {
                    return None;
                }
                continue;
            }
            let ta = (lo[axis] - p[axis]) / d[axis];
            let tb = (hi[axis] - p[axis]) / d[axis];
            let (enter, exit) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(enter);
            t1 = t1.min(exit);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

pub const N_ACTIONS: usize = 8;

/// Unit directions N, NE, E, SE, S, SW, W, NW.
pub fn direction(u: usize) -> Result<(f64, f64), EnvError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [(0.0, 1.0), (h, h), (1.0, 0.0), (h, -h), (0.0, -1.0), (-h, -h), (-1.0, 0.0), (-h, h)];
    dirs.get(u).copied().ok_or(EnvError::InvalidAction(u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World2D {
    pub obstacles: Vec<Rect>,
    pub step_size: f64,
    pub free_cost: f64,
    pub collision_cost: f64,
    pub goal_threshold: f64,
    pub alpha_free: f64,
    pub alpha_collision: f64,
}

/// On-disk world format: `{"obstacles": [[xmin, ymin, xmax, ymax], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldFile {
    pub obstacles: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionTuple {
    pub s: State2D,
    pub u: usize,
    pub c: f64,
    #[serde(rename = "sn")]
    pub s_next: State2D,
}

impl World2D {
    pub fn new(obstacles: Vec<Rect>) -> Result<Self, EnvError> {
        for r in &obstacles {
            let ok = r.xmin < r.xmax && r.ymin < r.ymax && r.xmin >= 0.0 && r.ymin >= 0.0 && r.xmax <= 1.0 && r.ymax <= 1.0;
            if !ok {
                return Err(EnvError::BadObstacle((*r).into()));
            }
        }
        Ok(World2D {
            obstacles,
            step_size: 0.025,
            free_cost: 0.025,
            collision_cost: 10.0,
            goal_threshold: 0.15,
            alpha_free: 1.0,
            alpha_collision: 100.0,
        })
    }

    pub fn from_file(f: WorldFile) -> Result<Self, EnvError> {
        World2D::new(f.obstacles.into_iter().map(Rect::from).collect())
    }

    pub fn to_file(&self) -> WorldFile {
        WorldFile { obstacles: self.obstacles.iter().map(|&r| r.into()).collect() }
    }

    pub fn is_free(&self, p: State2D) -> bool {
        (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y) && !self.obstacles.iter().any(|r| r.contains(p))
    }

    /// Fraction along `a -> b` where the first obstacle is touched.
    pub fn first_collision(&self, a: State2D, b: State2D) -> Option<f64> {
        self.obstacles
            .iter()
            .filter_map(|r| r.first_hit(a, b))
            .min_by(f64::total_cmp)
    }

    pub fn segment_free(&self, a: State2D, b: State2D) -> bool {
        self.first_collision(a, b).is_none()
    }

    /// One move of length `step_size`. A move that would touch an obstacle
    /// is blocked and costs `collision_cost`; the boundary clamps for free.
    pub fn step(&self, s: State2D, u: usize) -> Result<(State2D, Cost), EnvError> {
        let (dx, dy) = direction(u)?;
        let target = State2D::new(s.x + self.step_size * dx, s.y + self.step_size * dy).clamp_unit();
        if self.segment_free(s, target) {
            Ok((target, Cost::clamped(self.free_cost)))
        } else {
            Ok((s, Cost::clamped(self.collision_cost)))
        }
    }

    /// With-reset cost of the straight segment `s -> s_next`.
    ///
    /// Free segments cost `alpha_free` times their length. Otherwise the
    /// tracker stops at the first obstacle contact `s_stop` and the cost is
    /// `alpha_free |s - s_stop| + alpha_collision |s_next - s_stop|`.
    pub fn segment_cost(&self, s: State2D, s_next: State2D) -> Cost {
        let len = s.dist(s_next);
        if len == 0.0 {
            return Cost::ZERO;
        }
        match self.first_collision(s, s_next) {
            None => Cost::clamped(self.alpha_free * len),
            Some(t) => Cost::clamped(self.alpha_free * t * len + self.alpha_collision * (1.0 - t) * len),
        }
    }

    /// Total with-reset cost of a polyline and whether every piece was free.
    pub fn path_cost(&self, states: &[State2D]) -> (f64, bool) {
        let mut total = 0.0;
        let mut free = true;
        for w in states.windows(2) {
            total += self.segment_cost(w[0], w[1]).value();
            free &= self.segment_free(w[0], w[1]);
        }
        (total, free)
    }

    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> State2D {
        loop {
            let p = State2D::new(rng.gen::<f64>(), rng.gen::<f64>());
            if self.is_free(p) {
                return p;
            }
        }
    }

    /// Rejection-samples a free point inside `region`.
    pub fn sample_free_in<R: Rng + ?Sized>(&self, region: Rect, rng: &mut R) -> State2D {
        loop {
            let p = State2D::new(rng.gen_range(region.xmin..=region.xmax), rng.gen_range(region.ymin..=region.ymax));
            if self.is_free(p) {
                return p;
            }
        }
    }

    pub fn sample_start_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> (State2D, State2D) {
        (self.sample_free(rng), self.sample_free(rng))
    }

    /// Uniform free states with uniform actions, stepped once each.
    pub fn sample_dataset(&self, m: usize, seed: u64) -> Result<Vec<TransitionTuple>, EnvError> {
        if m == 0 {
            return Err(EnvError::EmptyRequest);
        }
        let mut rng = rng_from_seed(seed);
        Ok((0..m)
            .map(|_| {
                let s = self.sample_free(&mut rng);
                let u = rng.gen_range(0..N_ACTIONS);
                let (s_next, c) = self.step(s, u).expect("action in range");
                TransitionTuple { s, u, c: c.value(), s_next }
            })
            .collect())
    }

    /// Free points of a `res x res` lattice over the unit square, in
    /// row-major `(x, y)` order with `x` varying slowest.
    pub fn free_lattice(&self, res: usize) -> Vec<State2D> {
        lattice(res).into_iter().filter(|&p| self.is_free(p)).collect()
    }

    /// 8-connected lattice graph over `free_lattice(res)`: edges join
    /// neighbouring free points whose connecting segment is free, costing
    /// `alpha_free` times their length.
    pub fn lattice_graph(&self, res: usize) -> (Graph, Vec<State2D>) {
        let pts = self.free_lattice(res);
        let h = 1.0 / (res - 1) as f64;
        let mut edges = Vec::new();
        for (i, &a) in pts.iter().enumerate() {
            for (j, &b) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = a.dist(b);
                if d <= h * std::f64::consts::SQRT_2 + 1e-9 && self.segment_free(a, b) {
                    edges.push((i, j, self.alpha_free * d));
                }
            }
        }
        (make_graph(pts.len(), &edges).expect("lattice edges are valid"), pts)
    }
}

/// Every point of a `res x res` lattice over the unit square.
pub fn lattice(res: usize) -> Vec<State2D> {
    assert!(res >= 2, "lattice needs at least 2 points per axis");
    let h = 1.0 / (res - 1) as f64;
    (0..res)
        .flat_map(|i| (0..res).map(move |j| State2D::new(i as f64 * h, j as f64 * h)))
        .collect()
}

pub const BUILTIN_NAMES: [&str; 5] = ["empty", "wall2d", "corridor", "corridor_simple", "rooms_hard"];

fn rects(list: &[[f64; 4]]) -> Vec<Rect> {
    list.iter().map(|&a| Rect::from(a)).collect()
}

/// Hand-authored layouts.
///
/// - `empty`: no obstacles.
/// - `wall2d`: a central vertical wall with one passage along the top.
/// - `corridor`: two staggered horizontal walls forming an S-shaped corridor.
/// - `corridor_simple`: a left room and a right room joined by one corridor.
/// - `rooms_hard`: left and right rooms separated by a wall with two gaps.
pub fn builtin_world(name: &str) -> Result<World2D, EnvError> {
    let obstacles = match name {
        "empty" => vec![],
        "wall2d" => rects(&[[0.48, 0.0, 0.52, 0.7]]),
        "corridor" => rects(&[[0.0, 0.3, 0.7, 0.36], [0.3, 0.64, 1.0, 0.7]]),
        "corridor_simple" => rects(&[[0.3, 0.0, 0.7, 0.42], [0.3, 0.58, 0.7, 1.0]]),
        "rooms_hard" => rects(&[
            [0.3, 0.0, 0.36, 0.2],
            [0.3, 0.3, 0.36, 0.7],
            [0.3, 0.8, 0.36, 1.0],
            [0.64, 0.0, 0.7, 0.45],
            [0.64, 0.55, 0.7, 1.0],
        ]),
        other => return Err(EnvError::UnknownWorld(other.to_string())),
    };
    World2D::new(obstacles)
}

pub fn builtin_worlds() -> Vec<(&'static str, World2D)> {
    BUILTIN_NAMES.iter().map(|&n| (n, builtin_world(n).expect("builtin"))).collect()
}
