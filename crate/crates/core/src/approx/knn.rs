//! Exact k-nearest-neighbour search over a kd-tree.
//!
//! Neighbours are ranked by `(squared distance, insertion index)`, so the
//! returned set never depends on traversal order.

use super::ApproxError;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Fixed-capacity list of the best `(d2, idx)` candidates, sorted ascending.
struct Best {
    k: usize,
    items: Vec<(f64, u32)>,
}

impl Best {
    #[inline]
    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, idx: u32) {
        let full = self.items.len() >= self.k;
        if full {
            let (wd, wi) = self.items[self.k - 1];
            if d2 > wd || (d2 == wd && idx > wi) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&(d, i)| d < d2 || (d == d2 && i < idx));
        self.items.insert(pos, (d2, idx));
    }
}

impl<const D: usize> KdTree<D> {
    pub fn build(points: Vec<[f64; D]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            Self::build_rec(&points, &mut order, 0, points.len(), &mut nodes);
        }
        KdTree { points, order, nodes }
    }

    fn build_rec(points: &[[f64; D]], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..D {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &order[start..end] {
                let v = points[i as usize][a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest <= 0.0 {
            nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = (end - start) / 2;
        order[start..end].select_nth_unstable_by(mid, |&a, &b| points[a as usize][axis].total_cmp(&points[b as usize][axis]));
        let value = points[order[start + mid] as usize][axis];
        nodes.push(Node::Split { axis, value, left: 0, right: 0 });
        let left = Self::build_rec(points, order, start, start + mid, nodes);
        let right = Self::build_rec(points, order, start + mid, end, nodes);
        nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64; D] {
        &self.points[i]
    }

    /// Indices of the `k` nearest points, nearest first.
    pub fn nearest(&self, q: &[f64; D], k: usize) -> Vec<(f64, u32)> {
        let k = k.min(self.points.len());
        let mut best = Best { k, items: Vec::with_capacity(k + 1) };
        if k > 0 {
            self.search(0, q, &mut best);
        }
        best.items
    }

    fn search(&self, node: usize, q: &[f64; D], best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    best.offer(dist2(q, &self.points[i as usize]), i);
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.worst() {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Mean of the `k` nearest targets.
#[derive(Debug, Clone)]
pub struct KnnRegressor<const D: usize> {
    tree: KdTree<D>,
    targets: Vec<f64>,
    k: usize,
}

/// Fits a regressor; `k` is clamped to the dataset size.
pub fn knn_fit<const D: usize>(data: Vec<([f64; D], f64)>, k: usize) -> Result<KnnRegressor<D>, ApproxError> {
    if data.is_empty() {
        return Err(ApproxError::EmptyData);
    }
    assert!(k >= 1, "k must be positive");
    let (points, targets): (Vec<_>, Vec<_>) = data.into_iter().unzip();
    let k = k.min(points.len());
    Ok(KnnRegressor { tree: KdTree::build(points), targets, k })
}

impl<const D: usize> KnnRegressor<D> {
    pub fn predict(&self, q: &[f64; D]) -> f64 {
        let nn = self.tree.nearest(q, self.k);
        nn.iter().map(|&(_, i)| self.targets[i as usize]).sum::<f64>() / nn.len() as f64
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Majority label of the `k` nearest points; ties go to the smallest label.
#[derive(Debug, Clone)]
pub struct KnnClassifier<const D: usize> {
    tree: KdTree<D>,
    labels: Vec<usize>,
    n_labels: usize,
    k: usize,
}

pub fn knn_classifier<const D: usize>(data: Vec<([f64; D], usize)>, k: usize) -> Result<KnnClassifier<D>, ApproxError> {
    if data.is_empty() {
        return Err(ApproxError::EmptyData);
    }
    assert!(k >= 1, "k must be positive");
    let (points, labels): (Vec<_>, Vec<_>) = data.into_iter().unzip();
    let n_labels = labels.iter().copied().max().unwrap_or(0) + 1;
    let k = k.min(points.len());
    Ok(KnnClassifier { tree: KdTree::build(points), labels, n_labels, k })
}

impl<const D: usize> KnnClassifier<D> {
    pub fn predict(&self, q: &[f64; D]) -> usize {
        let mut votes = vec![0usize; self.n_labels];
        for (_, i) in self.tree.nearest(q, self.k) {
            votes[self.labels[i as usize]] += 1;
        }
        let top = *votes.iter().max().unwrap();
        votes.iter().position(|&v| v == top).unwrap()
    }
}
