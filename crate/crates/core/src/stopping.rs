//! Stopping-time families under a root cube, the `sigma` functional, the
//! MDW and DB(M) classifications, enlarged cubes and the corona
//! decomposition into trees.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::coeffs::CoeffTable;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::spatial::distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingConfig {
    /// `Lambda = A0^(k_lambda n)`.
    pub k_lambda: u32,
    /// Low-density threshold.
    pub delta0: f64,
    /// DB parameter.
    pub m: f64,
    /// Corona exponent: `Lambda_* = Lambda^(N/(N-1))`.
    pub big_n: u32,
    /// Overrides `Lambda_*` with `A0^(k n)`.
    pub k_lambda_star: Option<f64>,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        StoppingConfig { k_lambda: 2, delta0: 1e-3, m: 4.0, big_n: 8, k_lambda_star: None }
    }
}

/// Constants derived from a config for a given lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub lambda: f64,
    pub b: f64,
    pub lambda_star: f64,
    pub delta0: f64,
    pub m: f64,
    pub big_n: u32,
    pub k_lambda: u32,
}

impl StoppingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_lambda == 0 {
            return Err(Error::Parameter("k_lambda must be >= 1".into()));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(Error::Parameter(format!("delta0 must lie in (0, 1), got {}", self.delta0)));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::Parameter(format!("M must be >= 1, got {}", self.m)));
        }
        if self.big_n < 2 {
            return Err(Error::Parameter(format!("N must be >= 2, got {}", self.big_n)));
        }
        if let Some(k) = self.k_lambda_star {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Parameter(format!("k_lambda_star must be positive, got {k}")));
            }
        }
        Ok(())
    }

    pub fn thresholds(&self, a0: f64, n: usize) -> Thresholds {
        let lambda = a0.powi((self.k_lambda as usize * n) as i32);
        let nn = self.big_n as f64;
        Thresholds {
            lambda,
            b: lambda.powf(1.0 / (100.0 * n as f64)),
            lambda_star: match self.k_lambda_star {
                Some(k) => a0.powf(k * n as f64),
                None => lambda.powf(nn / (nn - 1.0)),
            },
            delta0: self.delta0,
            m: self.m,
            big_n: self.big_n,
            k_lambda: self.k_lambda,
        }
    }

    /// Human-readable notes about regimes the practical constants leave.
    pub fn warnings(&self, a0: f64, n: usize) -> Vec<String> {
        let t = self.thresholds(a0, n);
        let mut out = Vec::new();
        if self.delta0 >= t.lambda.powi(-2) {
            out.push(format!("delta0 = {} is not below Lambda^-2 = {:e}", self.delta0, t.lambda.powi(-2)));
        }
        out
    }
}

/// `sum Theta(P)^2 mu(P)`; leaves are skipped and counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sigma {
    pub value: f64,
    pub excluded_leaves: usize,
}

pub fn sigma(table: &CoeffTable<'_, '_>, ids: &[usize]) -> Result<Sigma> {
    let lat = table.lattice();
    let mut out = Sigma { value: 0.0, excluded_leaves: 0 };
    for &p in ids {
        let cube = lat.cube(p)?;
        if cube.leaf {
            out.excluded_leaves += 1;
            continue;
        }
        let t = table.big_theta(p);
        out.value += t * t * cube.mass;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopFamilies {
    pub root: usize,
    pub hd: Vec<usize>,
    pub ld: Vec<usize>,
    pub stop: Vec<usize>,
    /// `HD(R) cap Stop(R)`.
    pub hd_stop: Vec<usize>,
    pub root_p_doubling: bool,
}

/// Evaluates the stopping rules of a root `R` on the lattice.
pub struct Stopper<'t, 'l, 'm> {
    table: &'t CoeffTable<'l, 'm>,
    t: Thresholds,
}

#[derive(Clone, Copy, PartialEq)]
enum Hit {
    High,
    Low,
}

impl<'t, 'l, 'm> Stopper<'t, 'l, 'm> {
    pub fn new(table: &'t CoeffTable<'l, 'm>, cfg: StoppingConfig) -> Result<Self> {
        cfg.validate()?;
        let lat = table.lattice();
        Ok(Stopper { table, t: cfg.thresholds(lat.a0(), lat.measure().n()) })
    }

    pub fn thresholds(&self) -> Thresholds {
        self.t
    }

    fn lattice(&self) -> &'l Lattice<'m> {
        self.table.lattice()
    }

    fn high(&self, p: usize, r: usize, factor: f64) -> bool {
        !self.table.is_leaf(p) && self.table.big_theta(p) >= factor * self.table.big_theta(r)
    }

    fn low(&self, p: usize, r: usize) -> bool {
        self.table.all()[p].poisson <= self.t.delta0 * self.table.big_theta(r)
    }

    /// Maximal cubes below `starts` (inclusive) that satisfy either rule, tagged by which.
    fn first_hits(&self, r: usize, starts: &[usize], factor: f64) -> Vec<(usize, Hit)> {
        let lat = self.lattice();
        let mut out = Vec::new();
        let mut stack: Vec<usize> = starts.iter().rev().copied().collect();
        while let Some(p) = stack.pop() {
            if self.high(p, r, factor) {
                out.push((p, Hit::High));
            } else if self.low(p, r) {
                out.push((p, Hit::Low));
            } else {
                stack.extend(lat.cubes()[p].children.iter().rev());
            }
        }
        out
    }

    /// Maximal cubes below `starts` satisfying a single predicate.
    fn maximal(&self, starts: &[usize], pred: impl Fn(usize) -> bool) -> Vec<usize> {
        let lat = self.lattice();
        let mut out = Vec::new();
        let mut stack: Vec<usize> = starts.iter().rev().copied().collect();
        while let Some(p) = stack.pop() {
            if pred(p) {
                out.push(p);
            } else {
                stack.extend(lat.cubes()[p].children.iter().rev());
            }
        }
        out.sort_unstable();
        out
    }

    /// `HD(R)`, `LD(R)` and `Stop(R)` inside `D(R)`.
    pub fn families(&self, r: usize) -> Result<StopFamilies> {
        let lat = self.lattice();
        let cube = lat.cube(r)?;
        let starts = cube.children.clone();
        let hd = self.maximal(&starts, |p| self.high(p, r, self.t.lambda));
        let ld = self.maximal(&starts, |p| self.low(p, r));
        let hits = self.first_hits(r, &starts, self.t.lambda);
        let mut stop: Vec<usize> = hits.iter().map(|h| h.0).collect();
        let mut hd_stop: Vec<usize> = hits.iter().filter(|h| h.1 == Hit::High).map(|h| h.0).collect();
        stop.sort_unstable();
        hd_stop.sort_unstable();
        Ok(StopFamilies {
            root: r,
            hd,
            ld,
            stop,
            hd_stop,
            root_p_doubling: self.table.all()[r].p_doubling,
        })
    }

    fn sigma_of(&self, ids: &[usize]) -> f64 {
        sigma(self.table, ids).map(|s| s.value).unwrap_or(0.0)
    }

    /// `sigma(HD(R) cap Stop(R)) >= B^-1 sigma(R)`, ignoring the `P`-doubling requirement.
    pub fn mdw_inequality(&self, r: usize, b: f64) -> Result<bool> {
        let fam = self.families(r)?;
        Ok(self.sigma_of(&fam.hd_stop) >= self.sigma_of(&[r]) / b)
    }

    /// `R` is `P`-doubling and has moderate decrement of Wolff energy.
    pub fn is_mdw(&self, r: usize) -> Result<bool> {
        self.lattice().cube(r)?;
        Ok(self.table.all()[r].p_doubling && self.mdw_inequality(r, self.t.b)?)
    }

    /// Smallest `k >= 1` with `sum_{hd^k(R) cap D(9R)} (l(P)/l(R))^(1/2) Theta(P)^2 mu(P) > M^2 Theta(R)^2 mu(9R)`.
    pub fn db_witness(&self, r: usize, m: f64) -> Result<Option<i32>> {
        let lat = self.lattice();
        let energies = self.table.energies(r, 9.0)?;
        let mass_9r: f64 = lat.neighborhood(r, 9.0)?.iter().map(|&p| lat.cubes()[p].mass).sum();
        let theta = self.table.big_theta(r);
        let rhs = m * m * theta * theta * mass_9r;
        Ok(energies.hd_sums.iter().find(|(_, &s)| s > rhs).map(|(&k, _)| k))
    }

    /// `(R in DB(M), minimal witnessing k)`; never true for cubes that are not `P`-doubling.
    pub fn is_db(&self, r: usize, m: f64) -> Result<(bool, Option<i32>)> {
        self.lattice().cube(r)?;
        if !self.table.all()[r].p_doubling {
            return Ok((false, None));
        }
        let k = self.db_witness(r, m)?;
        Ok((k.is_some(), k))
    }

    /// `e_j(R)`: `R` plus the level-`(k+1)` cubes `Q` with `dist(x_R, Q) < l(R)/2 + 2 j l(Q)`.
    pub fn enlarged_cube(&self, r: usize, j: u32) -> Result<EnlargedCube> {
        let lat = self.lattice();
        let mu = lat.measure();
        let cube = lat.cube(r)?;
        let child_side = cube.side / lat.a0();
        let reach = cube.side / 2.0 + 2.0 * j as f64 * child_side;
        let mut cubes = BTreeSet::new();
        for i in mu.index().ball_indices(&cube.center, reach) {
            if distance(mu.point(i), &cube.center) < reach {
                if let Some(q) = lat.cube_at(cube.level + 1, i) {
                    cubes.insert(q);
                }
            }
        }
        let mut atoms: BTreeSet<usize> = lat.atoms(r).iter().copied().collect();
        for &q in &cubes {
            atoms.extend(lat.atoms(q).iter().copied());
        }
        Ok(EnlargedCube { root: r, j, cubes: cubes.into_iter().collect(), atoms: atoms.into_iter().collect() })
    }

    /// `sigma(HD(R) cap Stop(e_j(R)))`.
    pub fn sigma_hd_stop_enlarged(&self, e: &EnlargedCube) -> f64 {
        let lat = self.lattice();
        let r = e.root;
        let mut starts: Vec<usize> = lat.cubes()[r].children.clone();
        for &q in &e.cubes {
            if lat.cubes()[q].parent != Some(r) {
                starts.push(q);
            }
        }
        let hits = self.first_hits(r, &starts, self.t.lambda);
        let hd: Vec<usize> = hits.iter().filter(|h| h.1 == Hit::High).map(|h| h.0).collect();
        self.sigma_of(&hd)
    }

    /// `h(R)`: the least `j` in `[10, max(10, A0/4)]` with
    /// `sigma_j <= B^(1/4) sigma_(j-10)`, minus 10.
    pub fn select_h(&self, r: usize) -> Result<HSelection> {
        let lat = self.lattice();
        lat.cube(r)?;
        let upper = ((lat.a0() / 4.0).floor() as u32).max(10);
        let range_truncated = lat.a0() / 4.0 < 10.0;
        let sigmas: Vec<f64> = (0..=upper)
            .map(|j| self.enlarged_cube(r, j).map(|e| self.sigma_hd_stop_enlarged(&e)))
            .collect::<Result<_>>()?;
        let bound = self.t.b.powf(0.25);
        let mut best: Option<(f64, u32)> = None;
        for j in 10..=upper {
            let (num, den) = (sigmas[j as usize], sigmas[j as usize - 10]);
            if num <= bound * den {
                return Ok(self.selection(r, j, true, range_truncated, upper));
            }
            let ratio = if den > 0.0 { num / den } else { f64::INFINITY };
            if best.is_none_or(|b| ratio < b.0) {
                best = Some((ratio, j));
            }
        }
        let j = best.map_or(10, |b| b.1);
        Ok(self.selection(r, j, false, range_truncated, upper))
    }

    fn selection(&self, r: usize, j: u32, witnessed: bool, range_truncated: bool, upper: u32) -> HSelection {
        let lat = self.lattice();
        let inside_2r = self
            .enlarged_cube(r, j)
            .ok()
            .and_then(|e| {
                let two_r = lat.neighborhood(r, 2.0).ok()?;
                Some(e.atoms.iter().all(|&i| two_r.iter().any(|&q| lat.contains_atom(q, i))))
            })
            .unwrap_or(false);
        HSelection { j, h: j - 10, witnessed, range_truncated, upper, inside_2r }
    }

    /// Corona decomposition from the lattice root.
    pub fn corona(&self) -> Result<Corona> {
        let lat = self.lattice();
        let mut trees = Vec::new();
        let mut frontier = vec![lat.root()];
        let mut rounds = 0;
        let mut seen = BTreeSet::new();
        while !frontier.is_empty() {
            rounds += 1;
            if rounds > lat.depth() + 1 {
                return Err(Error::Validation("corona iteration failed to terminate".into()));
            }
            let mut next = Vec::new();
            for r in frontier {
                if !seen.insert(r) {
                    continue;
                }
                let tree = self.tree(r)?;
                next.extend(tree.ends.iter().copied());
                trees.push(tree);
            }
            next.sort_unstable();
            next.dedup();
            frontier = next;
        }

        let mut membership = vec![0usize; lat.len()];
        for t in &trees {
            for &c in &t.cubes {
                membership[c] += 1;
            }
        }
        let uncovered = lat.cubes().iter().filter(|c| !c.leaf && membership[c.id] == 0).count();
        let roots: BTreeSet<usize> = trees.iter().map(|t| t.root).collect();
        let ends: BTreeSet<usize> = trees.iter().flat_map(|t| t.ends.iter().copied()).collect();
        let bad_overlaps = (0..lat.len())
            .filter(|&c| membership[c] > 2 || (membership[c] == 2 && !(roots.contains(&c) && ends.contains(&c))))
            .count();
        let top: Vec<usize> = trees.iter().map(|t| t.root).collect();
        let sigma_top = self.sigma_of(&top);
        Ok(Corona { trees, sigma_top, uncovered, bad_overlaps, rounds })
    }

    fn tree(&self, r: usize) -> Result<CoronaTree> {
        let lat = self.lattice();
        let cube = lat.cube(r)?;
        let stop_star: Vec<usize> = {
            let mut s: Vec<usize> =
                self.first_hits(r, &cube.children, self.t.lambda_star).into_iter().map(|h| h.0).collect();
            s.sort_unstable();
            s
        };
        let ends = self.maximal(&stop_star, |p| !self.table.is_leaf(p) && self.table.all()[p].p_doubling);
        let ends: Vec<usize> = ends.into_iter().filter(|&p| !self.table.is_leaf(p) && self.table.all()[p].p_doubling).collect();
        let end_set: BTreeSet<usize> = ends.iter().copied().collect();
        let mut cubes = Vec::new();
        let mut stack = vec![r];
        while let Some(p) = stack.pop() {
            cubes.push(p);
            if !end_set.contains(&p) {
                stack.extend(lat.cubes()[p].children.iter().rev());
            }
        }
        cubes.sort_unstable();
        let thetas: Vec<f64> = cubes.iter().filter(|&&p| !self.table.is_leaf(p)).map(|&p| self.table.big_theta(p)).collect();
        let theta_max = thetas.iter().copied().fold(0.0, f64::max);
        let theta_min = thetas.iter().copied().fold(f64::INFINITY, f64::min);
        let sigma_root = self.sigma_of(&[r]);
        let sigma_ends = self.sigma_of(&ends);
        let mdw = self.is_mdw(r)?;
        let decay_bound = 2.0 * self.t.lambda_star.powf(2.0 / self.t.big_n as f64) / self.t.b * sigma_root;
        Ok(CoronaTree {
            root: r,
            stop: stop_star,
            ends,
            cubes,
            sigma_root,
            sigma_ends,
            theta_max,
            theta_min: if theta_min.is_finite() { theta_min } else { 0.0 },
            mdw,
            end_decay_holds: (!mdw).then_some(sigma_ends <= decay_bound),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnlargedCube {
    pub root: usize,
    pub j: u32,
    /// Level-`(k+1)` cubes within the threshold.
    pub cubes: Vec<usize>,
    /// Atoms of `R` and of those cubes, sorted.
    pub atoms: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HSelection {
    pub j: u32,
    pub h: u32,
    /// False when no `j` in range satisfies the inequality and `j` is the argmin of the ratio.
    pub witnessed: bool,
    /// Set when `A0/4 < 10`, so the scan covers only `j = 10`.
    pub range_truncated: bool,
    pub upper: u32,
    /// Whether `e_j(R)` lies inside `2R`.
    pub inside_2r: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoronaTree {
    pub root: usize,
    /// `Stop_*(R)`.
    pub stop: Vec<usize>,
    /// `End_*(R)`.
    pub ends: Vec<usize>,
    /// `Tree(R)`, sorted by id.
    pub cubes: Vec<usize>,
    pub sigma_root: f64,
    pub sigma_ends: f64,
    /// Extremes of `Theta` over the non-leaf cubes of the tree.
    pub theta_max: f64,
    pub theta_min: f64,
    pub mdw: bool,
    /// For roots outside MDW: `sigma(End_*) <= 2 Lambda_*^(2/N) B^-1 sigma(R)`.
    pub end_decay_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corona {
    pub trees: Vec<CoronaTree>,
    /// `sum_{R in Top} Theta(R)^2 mu(R)`.
    pub sigma_top: f64,
    /// Non-leaf cubes outside every tree.
    pub uncovered: usize,
    /// Cubes shared by trees other than as root of one and end of another.
    pub bad_overlaps: usize,
    pub rounds: usize,
}

impl Corona {
    pub fn top(&self) -> Vec<usize> {
        self.trees.iter().map(|t| t.root).collect()
    }

    /// `{top: [{root, tree_cubes, end_cubes, sigma, theta_osc}], ...}`.
    pub fn to_json(&self) -> serde_json::Value {
        let top: Vec<serde_json::Value> = self
            .trees
            .iter()
            .map(|t| {
                serde_json::json!({
                    "root": t.root,
                    "tree_cubes": t.cubes,
                    "end_cubes": t.ends,
                    "stop_cubes": t.stop,
                    "sigma": t.sigma_root,
                    "sigma_end": t.sigma_ends,
                    "theta_osc": {"max": t.theta_max, "min": t.theta_min},
                    "mdw": t.mdw,
                    "end_decay_holds": t.end_decay_holds,
                })
            })
            .collect();
        serde_json::json!({
            "top": top,
            "sigma_top": self.sigma_top,
            "uncovered": self.uncovered,
            "bad_overlaps": self.bad_overlaps,
            "rounds": self.rounds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeParams;
    use crate::measure::{generate, DiscreteMeasure, Generator};

    fn segment_with_cluster() -> DiscreteMeasure {
        let mut coords = Vec::new();
        let mut w = Vec::new();
        for i in 0..512 {
            coords.extend([i as f64 / 511.0, 0.0]);
            w.push(0.5 / 512.0);
        }
        for i in 0..64 {
            let a = i as f64 * std::f64::consts::TAU / 64.0;
            coords.extend([0.3 + 1e-4 * a.cos(), 0.2 + 1e-4 * a.sin()]);
            w.push(0.5 / 64.0);
        }
        DiscreteMeasure::new(1, coords, w).unwrap()
    }

    #[test]
    fn uniform_segment_has_no_stopping() {
        let mu = generate(&Generator::Segment { count: 1024 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let cfg = StoppingConfig { delta0: 1e-4, ..Default::default() };
        let s = Stopper::new(&table, cfg).unwrap();
        let fam = s.families(0).unwrap();
        assert!(fam.hd.is_empty() && fam.ld.is_empty() && fam.stop.is_empty());
        assert!(!s.is_mdw(0).unwrap());
        // the root sees the whole support inside a ball far larger than it, one bucket below its children
        assert_eq!(s.is_db(0, 4.0).unwrap(), (true, Some(1)));
        for c in &lat.cubes()[1..] {
            assert!(!s.is_db(c.id, 4.0).unwrap().0);
        }
        let h = s.select_h(0).unwrap();
        assert_eq!((h.j, h.h, h.witnessed), (10, 0, true));
        let corona = s.corona().unwrap();
        assert_eq!(corona.top(), vec![0]);
        assert_eq!(corona.uncovered, 0);
    }

    #[test]
    fn cluster_triggers_high_density() {
        let mu = segment_with_cluster();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig::default()).unwrap();
        let fam = s.families(0).unwrap();
        assert!(!fam.hd.is_empty());
        for (i, &a) in fam.stop.iter().enumerate() {
            for &b in &fam.stop[i + 1..] {
                assert!(!lat.is_within(a, b) && !lat.is_within(b, a));
            }
            assert!(lat.is_within(a, 0));
        }
    }

    #[test]
    fn sigma_of_root_and_additivity() {
        let mu = generate(&Generator::Cantor4 { generations: 4, ratio: 0.25 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let root = sigma(&table, &[0]).unwrap().value;
        assert_eq!(root, table.big_theta(0).powi(2) * mu.total_mass());
        let a: Vec<usize> = lat.level(1)[..3].to_vec();
        let b: Vec<usize> = lat.level(1)[3..].to_vec();
        let all: Vec<usize> = lat.level(1).to_vec();
        let sum = sigma(&table, &a).unwrap().value + sigma(&table, &b).unwrap().value;
        assert!((sum - sigma(&table, &all).unwrap().value).abs() <= 1e-14 * sum);
    }

    #[test]
    fn db_monotone_in_m_and_mdw_in_b() {
        let mu = segment_with_cluster();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig::default()).unwrap();
        for c in lat.cubes().iter().filter(|c| !c.leaf) {
            let mut prev = true;
            for m in [0.5, 1.0, 4.0, 64.0] {
                let now = s.db_witness(c.id, m).unwrap().is_some();
                assert!(prev || !now);
                prev = now;
            }
            let mut prev = false;
            for b in [1.0, 4.0, 1e3, 1e9] {
                let now = s.mdw_inequality(c.id, b).unwrap();
                assert!(!prev || now);
                prev = now;
            }
        }
    }

    #[test]
    fn enlarged_cubes_grow() {
        let mu = generate(&Generator::Segment { count: 1024 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig::default()).unwrap();
        let r = lat.level(1)[lat.level(1).len() / 2];
        let mut prev: Vec<usize> = Vec::new();
        for j in 0..12 {
            let e = s.enlarged_cube(r, j).unwrap();
            assert!(prev.iter().all(|i| e.atoms.binary_search(i).is_ok()));
            prev = e.atoms;
        }
        // an isolated cube with no next-level neighbours: e_0 is the cube itself
        let mu = generate(&Generator::Cantor4 { generations: 5, ratio: 0.25 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig::default()).unwrap();
        for &r in lat.level(2) {
            let e = s.enlarged_cube(r, 0).unwrap();
            let own: Vec<usize> = {
                let mut a = lat.atoms(r).to_vec();
                a.sort_unstable();
                a
            };
            if e.cubes.iter().all(|&q| lat.cubes()[q].parent == Some(r)) {
                assert_eq!(e.atoms, own);
            }
        }
    }

    #[test]
    fn corona_covers_cantor() {
        let mu = generate(&Generator::Cantor4 { generations: 5, ratio: 0.25 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig::default()).unwrap();
        let c = s.corona().unwrap();
        assert_eq!(c.uncovered, 0);
        assert_eq!(c.bad_overlaps, 0);
        for t in &c.trees {
            for (i, &a) in t.ends.iter().enumerate() {
                for &b in &t.ends[i + 1..] {
                    assert!(!lat.is_within(a, b) && !lat.is_within(b, a));
                }
            }
        }
    }

    #[test]
    fn cantor_corona_splits_with_small_star_exponent() {
        let mu = generate(&Generator::Cantor4 { generations: 6, ratio: 0.25 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let cfg = StoppingConfig { delta0: 0.05, k_lambda_star: Some(1.0), ..Default::default() };
        let s = Stopper::new(&table, cfg).unwrap();
        let c = s.corona().unwrap();
        // root bucket sits one step under the first level, which is uniform and P-doubling
        let expected: Vec<usize> = std::iter::once(0).chain(lat.level(1).iter().copied()).collect();
        assert!(lat.level(1).iter().all(|&q| table.exponent(q) == table.exponent(0) + 1));
        assert_eq!(c.top(), expected);
        assert_eq!((c.uncovered, c.bad_overlaps), (0, 0));
        let again = s.corona().unwrap();
        assert_eq!(serde_json::to_string(&c.to_json()).unwrap(), serde_json::to_string(&again.to_json()).unwrap());
    }

    #[test]
    fn sigma_scales_with_bucket_shift() {
        let mu = generate(&Generator::Segment { count: 256 }, 1).unwrap();
        let t = 16.0;
        let nu = mu.transformed(1.0, None, None, t).unwrap();
        let lm = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let ln = Lattice::build(&nu, LatticeParams::default()).unwrap();
        let tm = CoeffTable::build(&lm, None).unwrap();
        let tn = CoeffTable::build(&ln, None).unwrap();
        let ids: Vec<usize> = lm.cubes().iter().filter(|c| !c.leaf).map(|c| c.id).collect();
        let a = sigma(&tm, &ids).unwrap().value;
        let b = sigma(&tn, &ids).unwrap().value;
        assert!((b / a - t.powi(3)).abs() <= 1e-12 * t.powi(3));
    }

    #[test]
    fn mdw_trivial_cases() {
        let mu = generate(&Generator::Segment { count: 1024 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig { delta0: 1e-4, ..Default::default() }).unwrap();
        for &q in lat.level(1) {
            let fam = s.families(q).unwrap();
            if fam.stop.is_empty() {
                assert!(!s.is_mdw(q).unwrap());
            }
        }
        let mu = segment_with_cluster();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig::default()).unwrap();
        for c in lat.cubes().iter().filter(|c| !c.leaf) {
            let fam = s.families(c.id).unwrap();
            let hs = sigma(&table, &fam.hd_stop).unwrap().value;
            if hs >= sigma(&table, &[c.id]).unwrap().value {
                assert!(s.mdw_inequality(c.id, 1.0).unwrap());
            }
        }
    }

    #[test]
    fn config_checks() {
        assert!(StoppingConfig { delta0: 0.0, ..Default::default() }.validate().is_err());
        assert!(StoppingConfig { big_n: 1, ..Default::default() }.validate().is_err());
        let w = StoppingConfig::default().warnings(16.0, 1);
        assert_eq!(w.len(), 1);
        let t = StoppingConfig::default().thresholds(16.0, 1);
        assert_eq!(t.lambda, 256.0);
        assert!((t.b - 256f64.powf(0.01)).abs() < 1e-15);
    }
}
