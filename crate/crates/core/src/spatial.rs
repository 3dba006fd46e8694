//! A static k-d tree over weighted points with aggregated mass and second moments per node.
//!
//! Ball queries use closed balls and the same distance formula as
//! [`distance`], so boundary ties agree with brute-force enumeration.

const LEAF_SIZE: usize = 8;

/// Euclidean distance, computed as `sqrt(sum((a_k - b_k)^2))`.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance_sq(a, b).sqrt()
}

#[inline]
pub fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weighted mass, centroid and centered scatter matrix of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub mean: Vec<f64>,
    /// Row-major `d x d` matrix `sum w (x - mean)(x - mean)^T`.
    pub scatter: Vec<f64>,
}

impl Moments {
    pub fn zero(dim: usize) -> Self {
        Moments {
            mass: 0.0,
            mean: vec![0.0; dim],
            scatter: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn add_point(&mut self, x: &[f64], w: f64) {
        let d = self.dim();
        if self.mass == 0.0 {
            self.mass = w;
            self.mean.copy_from_slice(x);
            self.scatter.iter_mut().for_each(|s| *s = 0.0);
            return;
        }
        let m = self.mass + w;
        let coef = self.mass * w / m;
        for a in 0..d {
            let da = x[a] - self.mean[a];
            for b in 0..d {
                self.scatter[a * d + b] += coef * da * (x[b] - self.mean[b]);
            }
        }
        for k in 0..d {
            self.mean[k] += (x[k] - self.mean[k]) * (w / m);
        }
        self.mass = m;
    }

    /// Chan-style pairwise merge.
    pub fn merge(&mut self, other: &Moments) {
        if other.mass == 0.0 {
            return;
        }
        if self.mass == 0.0 {
            self.clone_from(other);
            return;
        }
        let d = self.dim();
        let m = self.mass + other.mass;
        let coef = self.mass * other.mass / m;
        let delta: Vec<f64> = (0..d).map(|k| other.mean[k] - self.mean[k]).collect();
        for a in 0..d {
            for b in 0..d {
                self.scatter[a * d + b] += other.scatter[a * d + b] + coef * delta[a] * delta[b];
            }
        }
        for k in 0..d {
            self.mean[k] += delta[k] * (other.mass / m);
        }
        self.mass = m;
    }
}

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
    mass: f64,
    moments: Moments,
}

/// Static k-d tree. Point indices refer to the slice the tree was built from.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    /// `2 * dim` entries per node: mins then maxs.
    bounds: Vec<f64>,
}

impl KdTree {
    pub fn new(coords: &[f64], weights: &[f64], dim: usize) -> Self {
        let count = weights.len();
        assert_eq!(coords.len(), count * dim);
        let mut tree = KdTree {
            dim,
            coords: coords.to_vec(),
            weights: weights.to_vec(),
            perm: (0..count).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if count > 0 {
            tree.build(0, count);
        }
        tree
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let d = self.dim;
        let id = self.nodes.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut moments = Moments::zero(d);
        let mut mass = 0.0;
        for &i in &self.perm[start..end] {
            let p = &self.coords[i * d..(i + 1) * d];
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
            mass += self.weights[i];
        }
        self.nodes.push(Node {
            start,
            end,
            children: None,
            mass,
            moments: Moments::zero(d),
        });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        if end - start <= LEAF_SIZE {
            for &i in &self.perm[start..end] {
                moments.add_point(&self.coords[i * d..(i + 1) * d], self.weights[i]);
            }
        } else {
            let axis = (0..d)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
                .unwrap_or(0);
            let mid = (start + end) / 2;
            let coords = &self.coords;
            self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                coords[a * d + axis]
                    .total_cmp(&coords[b * d + axis])
                    .then(a.cmp(&b))
            });
            let left = self.build(start, mid);
            let right = self.build(mid, end);
            moments = self.nodes[left].moments.clone();
            moments.merge(&self.nodes[right].moments.clone());
            self.nodes[id].children = Some((left, right));
        }
        self.nodes[id].moments = moments;
        id
    }

    fn node_bounds(&self, node: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        let b = &self.bounds[node * 2 * d..(node + 1) * 2 * d];
        (&b[..d], &b[d..])
    }

    /// (nearest, farthest) distance from `c` to the node's bounding box.
    fn box_range(&self, node: usize, c: &[f64]) -> (f64, f64) {
        let (lo, hi) = self.node_bounds(node);
        let mut near = 0.0;
        let mut far = 0.0;
        for k in 0..self.dim {
            let a = (c[k] - lo[k]).abs();
            let b = (c[k] - hi[k]).abs();
            let gap = if c[k] < lo[k] {
                lo[k] - c[k]
            } else if c[k] > hi[k] {
                c[k] - hi[k]
            } else {
                0.0
            };
            near += gap * gap;
            let f = a.max(b);
            far += f * f;
        }
        (near.sqrt(), far.sqrt())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Total weight of points in the closed ball `B(c, r)`.
    pub fn ball_mass(&self, c: &[f64], r: f64) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let (near, far) = self.box_range(node, c);
            if near > r {
                continue;
            }
            let nd = &self.nodes[node];
            if far <= r {
                total += nd.mass;
                continue;
            }
            match nd.children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => {
                    for &i in &self.perm[nd.start..nd.end] {
                        if distance(self.point(i), c) <= r {
                            total += self.weights[i];
                        }
                    }
                }
            }
        }
        total
    }

    /// Mass, centroid and scatter of the points in the closed ball `B(c, r)`.
    pub fn ball_moments(&self, c: &[f64], r: f64) -> Moments {
        let mut acc = Moments::zero(self.dim);
        if self.nodes.is_empty() {
            return acc;
        }
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let (near, far) = self.box_range(node, c);
            if near > r {
                continue;
            }
            let nd = &self.nodes[node];
            if far <= r {
                acc.merge(&nd.moments);
                continue;
            }
            match nd.children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => {
                    for &i in &self.perm[nd.start..nd.end] {
                        let p = self.point(i);
                        if distance(p, c) <= r {
                            acc.add_point(p, self.weights[i]);
                        }
                    }
                }
            }
        }
        acc
    }

    /// Indices of points in the closed ball `B(c, r)`, ascending.
    pub fn ball_indices(&self, c: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let (near, far) = self.box_range(node, c);
            if near > r {
                continue;
            }
            let nd = &self.nodes[node];
            if far <= r {
                out.extend_from_slice(&self.perm[nd.start..nd.end]);
                continue;
            }
            match nd.children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => {
                    for &i in &self.perm[nd.start..nd.end] {
                        if distance(self.point(i), c) <= r {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Smallest positive distance from `c` to any point, if one exists.
    pub fn nearest_positive(&self, c: &[f64]) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let (near, _) = self.box_range(node, c);
            if near >= best {
                continue;
            }
            let nd = &self.nodes[node];
            match nd.children {
                Some((a, b)) => {
                    // visit the closer child first
                    let (na, _) = self.box_range(a, c);
                    let (nb, _) = self.box_range(b, c);
                    if na <= nb {
                        stack.push(b);
                        stack.push(a);
                    } else {
                        stack.push(a);
                        stack.push(b);
                    }
                }
                None => {
                    for &i in &self.perm[nd.start..nd.end] {
                        let dist = distance(self.point(i), c);
                        if dist > 0.0 && dist < best {
                            best = dist;
                        }
                    }
                }
            }
        }
        best.is_finite().then_some(best)
    }

    /// Largest distance from `c` to any point.
    pub fn farthest(&self, c: &[f64]) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut best = 0.0f64;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let (_, far) = self.box_range(node, c);
            if far <= best {
                continue;
            }
            let nd = &self.nodes[node];
            match nd.children {
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => {
                    for &i in &self.perm[nd.start..nd.end] {
                        best = best.max(distance(self.point(i), c));
                    }
                }
            }
        }
        best
    }
}
