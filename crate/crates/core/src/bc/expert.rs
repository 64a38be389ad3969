//! Shortest-path demonstrations from A* on a regular lattice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BcError;
use crate::env2d::{Rect, State2D, World2D};
use crate::rng::derive_rng;

pub const EXPERT_RESOLUTION: usize = 100;
/// Minimum distance from lattice nodes to any obstacle.
pub const EXPERT_CLEARANCE: f64 = 0.03;
/// Attach search radius, in cells.
const ATTACH_CELLS: i64 = 5;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpertDataset {
    pub trajectories: Vec<Vec<State2D>>,
}

#[derive(Serialize, Deserialize)]
struct Line {
    states: Vec<State2D>,
}

impl ExpertDataset {
    /// One `{"states": [[x, y], ...]}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut w, &Line { states: t.clone() })?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, BcError> {
        let mut trajectories = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| BcError::Parse { line: i + 1, msg: e.to_string() })?;
            trajectories.push(parsed.states);
        }
        Ok(ExpertDataset { trajectories })
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, smaller node id first on ties.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Lattice<'a> {
    world: &'a World2D,
    res: usize,
    free: Vec<bool>,
}

impl<'a> Lattice<'a> {
    fn new(world: &'a World2D, res: usize, clearance: f64) -> Self {
        let mut lat = Lattice { world, res, free: Vec::new() };
        lat.free = (0..res * res)
            .map(|k| {
                let p = lat.point(k);
                world.is_free(p) && world.obstacles.iter().all(|r| rect_distance(r, p) >= clearance)
            })
            .collect();
        lat
    }

    fn point(&self, k: usize) -> State2D {
        let h = 1.0 / (self.res - 1) as f64;
        State2D::new((k / self.res) as f64 * h, (k % self.res) as f64 * h)
    }

    /// Free lattice node nearest to `p` that `p` sees in a straight line.
    fn attach(&self, p: State2D) -> Option<usize> {
        let h = 1.0 / (self.res - 1) as f64;
        let (ci, cj) = ((p.x / h).round() as i64, (p.y / h).round() as i64);
        let mut best: Option<(f64, usize)> = None;
        for di in -ATTACH_CELLS..=ATTACH_CELLS {
            for dj in -ATTACH_CELLS..=ATTACH_CELLS {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= self.res as i64 || j >= self.res as i64 {
                    continue;
                }
                let k = i as usize * self.res + j as usize;
                let d = p.dist(self.point(k));
                if self.free[k] && best.is_none_or(|(bd, _)| d < bd) && self.world.segment_free(p, self.point(k)) {
                    best = Some((d, k));
                }
            }
        }
        best.map(|(_, k)| k)
    }

    fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((k / self.res) as i64, (k % self.res) as i64);
        let res = self.res as i64;
        (-1..=1)
            .flat_map(move |di| (-1..=1).map(move |dj| (i + di, j + dj)))
            .filter(move |&(a, b)| (a, b) != (i, j) && a >= 0 && b >= 0 && a < res && b < res)
            .map(move |(a, b)| (a * res + b) as usize)
            .filter(move |&n| self.free[n] && self.world.segment_free(self.point(k), self.point(n)))
    }
}

fn rect_distance(r: &Rect, p: State2D) -> f64 {
    let dx = (r.xmin - p.x).max(p.x - r.xmax).max(0.0);
    let dy = (r.ymin - p.y).max(p.y - r.ymax).max(0.0);
    dx.hypot(dy)
}

/// Shortest 8-connected path over lattice nodes at least `clearance` from
/// every obstacle, between the nodes nearest `s` and `g`, with `s` and `g`
/// themselves as endpoints.
pub fn astar_path(world: &World2D, s: State2D, g: State2D, res: usize, clearance: f64) -> Option<Vec<State2D>> {
    let lat = Lattice::new(world, res, clearance);
    astar_on(&lat, s, g)
}

fn astar_on(lat: &Lattice<'_>, s: State2D, g: State2D) -> Option<Vec<State2D>> {
    let (src, dst) = (lat.attach(s)?, lat.attach(g)?);
    let goal_pt = lat.point(dst);
    let n = lat.res * lat.res;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    dist[src] = 0.0;
    open.push(Open { f: lat.point(src).dist(goal_pt), node: src });
    while let Some(Open { node, .. }) = open.pop() {
        if closed[node] {
            continue;
        }
        if node == dst {
            break;
        }
        closed[node] = true;
        for nb in lat.neighbours(node) {
            let nd = dist[node] + lat.point(node).dist(lat.point(nb));
            if nd < dist[nb] {
                dist[nb] = nd;
                parent[nb] = node;
                open.push(Open { f: nd + lat.point(nb).dist(goal_pt), node: nb });
            }
        }
    }
    if dist[dst].is_infinite() {
        return None;
    }
    let mut nodes = vec![dst];
    while *nodes.last().unwrap() != src {
        nodes.push(parent[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    let mut path = vec![s];
    path.extend(nodes.into_iter().map(|k| lat.point(k)));
    path.push(g);
    path.dedup();
    Some(path)
}

/// The polyline with collinear runs merged and each run split into equal
/// pieces no longer than `step`. Turning vertices are kept, so every piece
/// lies on the original polyline.
pub fn densify(path: &[State2D], step: f64) -> Vec<State2D> {
    let mut corners = vec![path[0]];
    for k in 1..path.len() {
        let (a, b) = (*corners.last().unwrap(), path[k]);
        if k + 1 < path.len() {
            let c = path[k + 1];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            let dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
            if cross.abs() < 1e-12 && dot > 0.0 {
                continue;
            }
        }
        corners.push(b);
    }
    let mut out = vec![path[0]];
    for w in corners.windows(2) {
        let pieces = (w[0].dist(w[1]) / step - 1e-9).ceil().max(1.0) as usize;
        out.extend((1..pieces).map(|i| w[0].lerp(w[1], i as f64 / pieces as f64)));
        out.push(w[1]);
    }
    out
}

/// `demos` densified A* demonstrations between random free pairs; pairs
/// without a lattice path are redrawn.
pub fn generate_expert_dataset(world: &World2D, demos: usize, seed: u64) -> ExpertDataset {
    let lat = Lattice::new(world, EXPERT_RESOLUTION, EXPERT_CLEARANCE);
    let trajectories = (0..demos)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, &[i as u64]);
            loop {
                let (s, g) = world.sample_start_goal(&mut rng);
                if let Some(p) = astar_on(&lat, s, g) {
                    return densify(&p, world.step_size);
                }
            }
        })
        .collect();
    ExpertDataset { trajectories }
}
