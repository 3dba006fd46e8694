//! "DM-lite" dyadic lattice: a nested family of partitions of the atoms
//! with separated centers and controlled radii.
//!
//! Lengths are measured in the unit `s = r(root) / C0`, so level `k` has
//! scale `A0^-k s`, radii in `[A0^-k s, C0 A0^-k s]` and side length
//! `l(Q) = 56 C0 A0^-k s`.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::spatial::distance;

const NONE: usize = usize::MAX;
const MAX_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeParams {
    pub a0: u32,
    pub c0: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        LatticeParams { a0: 16, c0: 30.0 }
    }
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if self.a0 < 16 {
            return Err(Error::Parameter(format!("A0 must be >= 16, got {}", self.a0)));
        }
        if !(self.c0 >= 30.0 && self.c0.is_finite()) {
            return Err(Error::Parameter(format!("C0 must be >= 30, got {}", self.c0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Cube {
    pub id: usize,
    pub level: usize,
    pub center_atom: usize,
    pub center: Vec<f64>,
    /// `r(Q)`.
    pub radius: f64,
    /// `l(Q)`.
    pub side: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Atom range in [`Lattice::order`].
    pub start: usize,
    pub end: usize,
    pub mass: f64,
    /// `mu(100 B(Q)) <= C0 mu(B(Q))`.
    pub doubling: bool,
    /// `max |x - x_Q| / r(Q)` over the atoms of `Q`.
    pub containment: f64,
    pub leaf: bool,
}

impl Cube {
    pub fn atom_count(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone)]
pub struct Lattice<'m> {
    mu: &'m DiscreteMeasure,
    params: LatticeParams,
    unit: f64,
    cubes: Vec<Cube>,
    levels: Vec<Vec<usize>>,
    order: Vec<usize>,
    position: Vec<usize>,
    level_map: Vec<Vec<usize>>,
}

/// Counts of violated structural invariants; all zero for a valid lattice.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub partition: usize,
    pub nesting: usize,
    pub mass_additivity: usize,
    pub center_separation: usize,
    pub radius_range: usize,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.partition + self.nesting + self.mass_additivity + self.center_separation + self.radius_range == 0
    }
}

/// Ball-sandwich properties that the construction does not guarantee.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub max_containment: f64,
    /// Cubes with `f(Q) > 28`.
    pub containment_violations: usize,
    /// Cubes `Q` where some atom of `B(Q)` lies outside `Q`.
    pub ball_leaks: usize,
    pub doubling_cubes: usize,
    pub cubes: usize,
}

#[derive(Default)]
struct CenterGrid {
    cell: f64,
    dim: usize,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl CenterGrid {
    fn new(cell: f64, dim: usize) -> Self {
        CenterGrid { cell, dim, buckets: HashMap::new() }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, x: &[f64], atom: usize) {
        let key = self.key(x);
        self.buckets.entry(key).or_default().push(atom);
    }

    /// Whether every stored atom lies at distance `>= cell` from `x`.
    fn separated(&self, mu: &DiscreteMeasure, x: &[f64]) -> bool {
        let base = self.key(x);
        let mut offset = vec![-1i64; self.dim];
        loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(list) = self.buckets.get(&key) {
                if list.iter().any(|&a| distance(mu.point(a), x) < self.cell) {
                    return false;
                }
            }
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    return true;
                }
                offset[axis] += 1;
                if offset[axis] <= 1 {
                    break;
                }
                offset[axis] = -1;
                axis += 1;
            }
        }
    }
}

impl<'m> Lattice<'m> {
    pub fn build(mu: &'m DiscreteMeasure, params: LatticeParams) -> Result<Self> {
        params.validate()?;
        if mu.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let a0 = params.a0 as f64;
        let c0 = params.c0;
        let count = mu.len();
        let dim = mu.dim();
        let index = mu.index();

        let mut lo = mu.point(0).to_vec();
        let mut hi = lo.clone();
        for i in 1..count {
            for (a, v) in mu.point(i).iter().enumerate() {
                lo[a] = lo[a].min(*v);
                hi[a] = hi[a].max(*v);
            }
        }
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut root_center = 0;
        let mut best = f64::INFINITY;
        for i in 0..count {
            let d = distance(mu.point(i), &mid);
            if d < best {
                best = d;
                root_center = i;
            }
        }
        let spread = (0..count)
            .map(|i| distance(mu.point(i), mu.point(root_center)))
            .fold(0.0, f64::max);
        let root_radius = spread.max(mu.r_min());
        let unit = root_radius / c0;

        let mut cubes = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let root_leaf = count == 1 || root_radius < mu.r_min();
        cubes.push(Cube {
            id: 0,
            level: 0,
            center_atom: root_center,
            center: mu.point(root_center).to_vec(),
            radius: root_radius,
            side: 56.0 * c0 * unit,
            parent: None,
            children: Vec::new(),
            start: 0,
            end: count,
            mass: 0.0,
            doubling: false,
            containment: if root_radius > 0.0 { spread / root_radius } else { 0.0 },
            leaf: root_leaf,
        });
        members.push((0..count).collect());
        let mut levels = vec![vec![0usize]];
        let mut level_map = vec![vec![0usize; count]];

        for k in 0..MAX_LEVELS {
            let parents: Vec<usize> = levels[k].iter().copied().filter(|&q| !cubes[q].leaf).collect();
            if parents.is_empty() {
                break;
            }
            if k + 1 == MAX_LEVELS {
                for &p in &parents {
                    cubes[p].leaf = true;
                }
                break;
            }
            let scale = unit * a0.powi(-(k as i32 + 1));
            let side = 56.0 * c0 * scale;
            let mut grid = CenterGrid::new(10.0 * scale, dim);
            let mut is_center = vec![false; count];
            let mut centers_of: HashMap<usize, Vec<usize>> = HashMap::new();
            for &p in &parents {
                let c = cubes[p].center_atom;
                grid.insert(mu.point(c), c);
                is_center[c] = true;
                centers_of.entry(p).or_default().push(c);
            }
            let mut candidates: Vec<(f64, usize)> = parents
                .iter()
                .flat_map(|&p| members[p].iter().copied())
                .filter(|&i| !is_center[i])
                .map(|i| (index.ball_mass(mu.point(i), scale), i))
                .collect();
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, i) in candidates {
                let x = mu.point(i);
                if grid.separated(mu, x) {
                    grid.insert(x, i);
                    centers_of.entry(level_map[k][i]).or_default().push(i);
                }
            }

            let mut next_level = Vec::new();
            let mut map = vec![NONE; count];
            for &p in &parents {
                let centers = &centers_of[&p];
                let mut groups: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
                for &i in &members[p] {
                    let x = mu.point(i);
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (c_idx, &c) in centers.iter().enumerate() {
                        let d = distance(x, mu.point(c));
                        if d < best_d || (d == best_d && c < centers[best]) {
                            best_d = d;
                            best = c_idx;
                        }
                    }
                    groups[best].push(i);
                }
                for (c_idx, group) in groups.into_iter().enumerate() {
                    let c = centers[c_idx];
                    let id = cubes.len();
                    let xc = mu.point(c);
                    let spread = group.iter().map(|&i| distance(mu.point(i), xc)).fold(0.0, f64::max);
                    let radius = spread.clamp(scale, c0 * scale);
                    for &i in &group {
                        map[i] = id;
                    }
                    cubes.push(Cube {
                        id,
                        level: k + 1,
                        center_atom: c,
                        center: xc.to_vec(),
                        radius,
                        side,
                        parent: Some(p),
                        children: Vec::new(),
                        start: 0,
                        end: 0,
                        mass: 0.0,
                        doubling: false,
                        containment: spread / radius,
                        leaf: group.len() == 1 || radius < mu.r_min(),
                    });
                    members.push(group);
                    cubes[p].children.push(id);
                    next_level.push(id);
                }
            }
            levels.push(next_level);
            level_map.push(map);
        }

        for q in (0..cubes.len()).rev() {
            let mass = if cubes[q].leaf {
                let mut atoms = members[q].clone();
                atoms.sort_unstable();
                atoms.iter().map(|&i| mu.weight(i)).sum()
            } else {
                cubes[q].children.iter().map(|&c| cubes[c].mass).sum()
            };
            let cube = &mut cubes[q];
            cube.mass = mass;
            cube.doubling = index.ball_mass(&cube.center, 100.0 * cube.radius) <= c0 * index.ball_mass(&cube.center, cube.radius);
        }

        let mut order = Vec::with_capacity(count);
        let mut stack = vec![(0usize, false)];
        while let Some((q, closing)) = stack.pop() {
            if closing {
                cubes[q].end = order.len();
                continue;
            }
            cubes[q].start = order.len();
            stack.push((q, true));
            if cubes[q].leaf {
                let mut atoms = members[q].clone();
                atoms.sort_unstable();
                order.extend(atoms);
            } else {
                for &c in cubes[q].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        let mut position = vec![0; count];
        for (p, &i) in order.iter().enumerate() {
            position[i] = p;
        }

        Ok(Lattice { mu, params, unit, cubes, levels, order, position, level_map })
    }

    pub fn measure(&self) -> &'m DiscreteMeasure {
        self.mu
    }

    pub fn params(&self) -> LatticeParams {
        self.params
    }

    pub fn a0(&self) -> f64 {
        self.params.a0 as f64
    }

    /// Length unit `s`; the root radius is `C0 s`.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn cube(&self, id: usize) -> Result<&Cube> {
        self.cubes.get(id).ok_or(Error::UnknownCube(id))
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Cubes of level `k`, excluding leaves of coarser levels.
    pub fn level(&self, k: usize) -> &[usize] {
        self.levels.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Atom permutation in which every cube owns a contiguous range.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn atoms(&self, q: usize) -> &[usize] {
        let c = &self.cubes[q];
        &self.order[c.start..c.end]
    }

    pub fn contains_atom(&self, q: usize, atom: usize) -> bool {
        let c = &self.cubes[q];
        (c.start..c.end).contains(&self.position[atom])
    }

    /// Level-`k` cube holding `atom`, if the atom has not already ended in a coarser leaf.
    pub fn cube_at(&self, k: usize, atom: usize) -> Option<usize> {
        self.level_map.get(k).map(|m| m[atom]).filter(|&q| q != NONE)
    }

    /// Whether `p` is `q` or one of its descendants.
    pub fn is_within(&self, p: usize, q: usize) -> bool {
        let (a, b) = (&self.cubes[p], &self.cubes[q]);
        a.level >= b.level && a.start >= b.start && a.end <= b.end && a.start < a.end
    }

    /// `q` and every cube below it, in depth-first order.
    pub fn subtree(&self, q: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![q];
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.cubes[c].children.iter().rev());
        }
        out
    }

    /// Ancestors of `q` from `q` itself up to the root.
    pub fn chain(&self, q: usize) -> Vec<usize> {
        let mut out = vec![q];
        let mut c = q;
        while let Some(p) = self.cubes[c].parent {
            out.push(p);
            c = p;
        }
        out
    }

    /// `lambda Q`: same-level cubes within `lambda l(Q)` of `x_Q` (distance to their nearest atom).
    pub fn neighborhood(&self, q: usize, lambda: f64) -> Result<Vec<usize>> {
        let cube = self.cube(q)?;
        if !(lambda >= 1.0) {
            return Err(Error::Parameter(format!("lambda must be >= 1, got {lambda}")));
        }
        let found = self.mu.index().ball_indices(&cube.center, lambda * cube.side);
        let set: BTreeSet<usize> = found
            .into_iter()
            .filter_map(|i| self.cube_at(cube.level, i))
            .collect();
        Ok(set.into_iter().collect())
    }

    /// `D(lambda Q)`: members of `lambda Q` and all their descendants, sorted by id.
    pub fn neighborhood_tree(&self, q: usize, lambda: f64) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = self
            .neighborhood(q, lambda)?
            .into_iter()
            .flat_map(|p| self.subtree(p))
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// `mu(N_l(Q))`: mass of atoms within `A0^(-k-l) s` of the boundary of `Q`,
    /// from either side.
    pub fn boundary_mass(&self, q: usize, l: u32) -> Result<f64> {
        let cube = self.cube(q)?;
        let t = self.unit * self.a0().powi(-(cube.level as i32) - l as i32);
        let index = self.mu.index();
        let mut marked = vec![false; self.mu.len()];
        for &i in self.atoms(q) {
            let x = self.mu.point(i);
            for j in index.ball_indices(x, t) {
                if !self.contains_atom(q, j) && distance(x, self.mu.point(j)) < t {
                    marked[i] = true;
                    marked[j] = true;
                }
            }
        }
        Ok((0..self.mu.len()).filter(|&i| marked[i]).map(|i| self.mu.weight(i)).sum())
    }

    /// `mu(N_l(Q)) / mu(90 B(Q))` for `l = 0..=max_l`.
    pub fn boundary_profile(&self, q: usize, max_l: u32) -> Result<Vec<f64>> {
        let cube = self.cube(q)?;
        let big = self.mu.index().ball_mass(&cube.center, 90.0 * cube.radius);
        (0..=max_l).map(|l| Ok(self.boundary_mass(q, l)? / big)).collect()
    }

    pub fn check_invariants(&self) -> InvariantReport {
        let mut report = InvariantReport::default();
        let count = self.mu.len();
        let a0 = self.a0();
        let mut ended = vec![false; count];
        for k in 0..self.levels.len() {
            let mut seen = vec![0u32; count];
            for &q in &self.levels[k] {
                for &i in self.atoms(q) {
                    seen[i] += 1;
                }
            }
            for i in 0..count {
                let expected = u32::from(!ended[i]);
                if seen[i] != expected {
                    report.partition += 1;
                }
            }
            for &q in &self.levels[k] {
                if self.cubes[q].leaf {
                    for &i in self.atoms(q) {
                        ended[i] = true;
                    }
                }
            }
        }

        for cube in &self.cubes {
            if let Some(p) = cube.parent {
                let bad = self
                    .atoms(cube.id)
                    .iter()
                    .filter(|&&i| self.cube_at(cube.level - 1, i) != Some(p))
                    .count();
                report.nesting += bad;
            }
            if !cube.leaf {
                let covered: usize = cube.children.iter().map(|&c| self.cubes[c].atom_count()).sum();
                if cube.children.is_empty() || covered != cube.atom_count() {
                    report.nesting += 1;
                }
                let sum: f64 = cube.children.iter().map(|&c| self.cubes[c].mass).sum();
                if sum != cube.mass {
                    report.mass_additivity += 1;
                }
            }
            let direct: f64 = self.atoms(cube.id).iter().map(|&i| self.mu.weight(i)).sum();
            if (direct - cube.mass).abs() > 1e-12 * cube.mass.max(f64::MIN_POSITIVE) {
                report.mass_additivity += 1;
            }
            let scale = self.unit * a0.powi(-(cube.level as i32));
            let tol = 1e-12 * scale;
            if cube.radius < scale - tol || cube.radius > self.params.c0 * scale + tol {
                report.radius_range += 1;
            }
            if !(self.contains_atom(cube.id, cube.center_atom)) {
                report.nesting += 1;
            }
        }

        for (k, ids) in self.levels.iter().enumerate() {
            let sep = 10.0 * self.unit * a0.powi(-(k as i32));
            let mut grid = CenterGrid::new(sep, self.mu.dim());
            // insertion in id order; each later center is checked against all earlier ones
            for &q in ids {
                let x = self.mu.point(self.cubes[q].center_atom);
                if !grid.separated(self.mu, x) {
                    report.center_separation += 1;
                }
                grid.insert(x, self.cubes[q].center_atom);
            }
        }
        report
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let index = self.mu.index();
        let mut d = Diagnostics {
            max_containment: 0.0,
            containment_violations: 0,
            ball_leaks: 0,
            doubling_cubes: 0,
            cubes: self.cubes.len(),
        };
        for cube in &self.cubes {
            d.max_containment = d.max_containment.max(cube.containment);
            if cube.containment > 28.0 {
                d.containment_violations += 1;
            }
            if cube.doubling {
                d.doubling_cubes += 1;
            }
            let inside = index.ball_indices(&cube.center, cube.radius);
            if inside.iter().any(|&i| !self.contains_atom(cube.id, i)) {
                d.ball_leaks += 1;
            }
        }
        d
    }

    /// JSON tree `{id, k, center, r, ell, mass, db, f, children}`.
    pub fn to_json(&self) -> Value {
        self.node_json(0)
    }

    fn node_json(&self, q: usize) -> Value {
        let c = &self.cubes[q];
        let children: Vec<Value> = c.children.iter().map(|&ch| self.node_json(ch)).collect();
        json!({
            "id": c.id,
            "k": c.level,
            "center": c.center,
            "r": c.radius,
            "ell": c.side,
            "mass": c.mass,
            "db": c.doubling,
            "f": c.containment,
            "leaf": c.leaf,
            "atoms": c.atom_count(),
            "children": children,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, parse_csv, Generator};

    fn build(mu: &DiscreteMeasure) -> Lattice<'_> {
        Lattice::build(mu, LatticeParams::default()).unwrap()
    }

    #[test]
    fn parameter_ranges() {
        let mu = generate(&Generator::Segment { count: 4 }, 1).unwrap();
        assert!(Lattice::build(&mu, LatticeParams { a0: 8, c0: 30.0 }).is_err());
        assert!(Lattice::build(&mu, LatticeParams { a0: 16, c0: 10.0 }).is_err());
    }

    #[test]
    fn singleton_is_a_leaf_root() {
        let mu = parse_csv("0.5,0.5,2", 1).unwrap();
        let lat = build(&mu);
        assert_eq!(lat.len(), 1);
        assert!(lat.cubes()[0].leaf);
        assert_eq!(lat.cubes()[0].mass, 2.0);
        assert!(lat.check_invariants().ok());
    }

    #[test]
    fn segment_four_is_a_nested_chain() {
        let mu = generate(&Generator::Segment { count: 4 }, 1).unwrap();
        let lat = build(&mu);
        assert!(lat.check_invariants().ok(), "{:?}", lat.check_invariants());
        for k in 0..lat.depth() {
            let covered: usize = lat.level(k).iter().map(|&q| lat.cubes()[q].atom_count()).sum();
            let ended: usize = (0..k)
                .flat_map(|j| lat.level(j).iter())
                .filter(|&&q| lat.cubes()[q].leaf)
                .map(|&q| lat.cubes()[q].atom_count())
                .sum();
            assert_eq!(covered + ended, 4);
        }
        assert_eq!(lat.cubes()[0].mass, 1.0);
    }

    #[test]
    fn two_atoms_split_into_leaves() {
        let mu = parse_csv("0,0,1\n1,0,1", 1).unwrap();
        let lat = build(&mu);
        assert!(!lat.cubes()[0].leaf);
        assert_eq!(lat.level(1).len(), 2);
        for &q in lat.level(1) {
            assert!(lat.cubes()[q].leaf);
            // split at a scale far below the gap, so no boundary layer
            assert_eq!(lat.boundary_mass(q, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn root_has_no_boundary_and_trivial_neighborhood() {
        let mu = generate(&Generator::Circle { count: 64 }, 1).unwrap();
        let lat = build(&mu);
        for l in 0..4 {
            assert_eq!(lat.boundary_mass(0, l).unwrap(), 0.0);
        }
        for lambda in [1.0, 9.0, 1e6] {
            assert_eq!(lat.neighborhood(0, lambda).unwrap(), vec![0]);
        }
        assert!(matches!(lat.neighborhood(lat.len(), 1.0), Err(Error::UnknownCube(_))));
    }

    #[test]
    fn cantor_level_one_matches_generation_three_clusters() {
        let mu = generate(&Generator::Cantor4 { generations: 5, ratio: 0.25 }, 1).unwrap();
        let lat = build(&mu);
        assert!(lat.check_invariants().ok());
        // cluster label: generation-3 square index, read off from coordinates
        let label = |i: usize| {
            let p = mu.point(i);
            let mut key = Vec::new();
            let (mut cx, mut cy, mut side) = (0.0f64, 0.0f64, 1.0f64);
            for _ in 0..3 {
                let off = 0.5 * (side - side * 0.25);
                let sx = if p[0] > cx { 1.0 } else { -1.0 };
                let sy = if p[1] > cy { 1.0 } else { -1.0 };
                key.push((sx > 0.0, sy > 0.0));
                cx += sx * off;
                cy += sy * off;
                side *= 0.25;
            }
            key
        };
        let mut clusters: HashMap<Vec<(bool, bool)>, BTreeSet<usize>> = HashMap::new();
        for i in 0..mu.len() {
            clusters.entry(label(i)).or_default().insert(i);
        }
        assert_eq!(clusters.len(), 64);
        let found: BTreeSet<BTreeSet<usize>> = lat
            .level(1)
            .iter()
            .map(|&q| lat.atoms(q).iter().copied().collect())
            .collect();
        let expected: BTreeSet<BTreeSet<usize>> = clusters.into_values().collect();
        assert_eq!(found, expected);

        // every level-1 center lies within 9 l(Q) of all other level-1 clusters
        let q = lat.level(1)[0];
        let nb = lat.neighborhood(q, 9.0).unwrap();
        assert_eq!(nb.len(), 64);
        let side = lat.cubes()[q].side;
        for &p in lat.level(1) {
            let d = lat.atoms(p).iter().map(|&i| distance(mu.point(i), &lat.cubes()[q].center)).fold(f64::INFINITY, f64::min);
            assert!(d <= 9.0 * side);
        }
    }

    #[test]
    fn battery_invariants() {
        let battery = [
            (Generator::Segment { count: 64 }, 1),
            (Generator::Segment { count: 1024 }, 1),
            (Generator::Circle { count: 512 }, 1),
            (Generator::LipschitzGraph { count: 1024, slope: 1.0 }, 1),
            (Generator::Cantor4 { generations: 4, ratio: 0.25 }, 1),
            (Generator::Segment { count: 300 }, 2),
        ];
        for (g, n) in battery {
            let mu = generate(&g, n).unwrap();
            let lat = build(&mu);
            let rep = lat.check_invariants();
            assert!(rep.ok(), "{g:?}: {rep:?}");
        }
    }

    #[test]
    fn deterministic_rebuild() {
        let mu = generate(&Generator::LipschitzGraph { count: 500, slope: 1.5 }, 1).unwrap();
        let a = build(&mu);
        let b = build(&mu);
        assert_eq!(a.order(), b.order());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn boundary_mass_shrinks_with_l() {
        let mu = generate(&Generator::Segment { count: 1024 }, 1).unwrap();
        let lat = build(&mu);
        let q = lat.level(1)[lat.level(1).len() / 2];
        let profile = lat.boundary_profile(q, 3).unwrap();
        for w in profile.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn neighborhood_tree_contains_members_and_descendants() {
        let mu = generate(&Generator::Segment { count: 1024 }, 1).unwrap();
        let lat = build(&mu);
        let q = lat.level(2)[5];
        let nb = lat.neighborhood(q, 1.0).unwrap();
        assert!(nb.contains(&q));
        let tree = lat.neighborhood_tree(q, 1.0).unwrap();
        for p in lat.subtree(q) {
            assert!(tree.binary_search(&p).is_ok());
        }
    }
}
