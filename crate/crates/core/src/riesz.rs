//! Riesz kernel `(x - y) / |x - y|^(n+1)` and everything built from it:
//! truncated, principal-value and maximal transforms, suppressed kernels,
//! energies, a Cotlar-type diagnostic, Haar differences and a treecode.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::measure::DiscreteMeasure;
use crate::spatial::{distance, distance_sq};

/// `|v|^-(n+1)` given `|v|^2`.
#[inline]
fn inv_pow(r2: f64, n: usize) -> f64 {
    let m = n as i32 + 1;
    if m % 2 == 0 {
        1.0 / r2.powi(m / 2)
    } else {
        1.0 / (r2.powi(m / 2) * r2.sqrt())
    }
}

#[inline]
fn accumulate(acc: &mut [f64], x: &[f64], y: &[f64], scale: f64) {
    for ((a, xa), ya) in acc.iter_mut().zip(x).zip(y) {
        *a += scale * (xa - ya);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn riesz_kernel(x: &[f64], y: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension("kernel arguments differ in dimension".into()));
    }
    let r2 = distance_sq(x, y);
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    let f = inv_pow(r2, n);
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * f).collect())
}

/// `R_eps mu(x)`: sum over atoms with `|x - x_j| > eps`.
pub fn riesz_truncated(mu: &DiscreteMeasure, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("truncation must be positive, got {eps}")));
    }
    check_point(mu, x)?;
    let mut acc = vec![0.0; mu.dim()];
    for j in 0..mu.len() {
        let y = mu.point(j);
        let r2 = distance_sq(x, y);
        if r2.sqrt() > eps {
            accumulate(&mut acc, x, y, mu.weight(j) * inv_pow(r2, mu.n()));
        }
    }
    Ok(acc)
}

fn check_point(mu: &DiscreteMeasure, x: &[f64]) -> Result<()> {
    if x.len() != mu.dim() {
        return Err(Error::Dimension(format!("point has {} coordinates, expected {}", x.len(), mu.dim())));
    }
    Ok(())
}

/// Principal-value surrogate at atom `i`: all other atoms at positive distance.
pub fn riesz_pv(mu: &DiscreteMeasure, i: usize) -> Vec<f64> {
    let x = mu.point(i);
    let mut acc = vec![0.0; mu.dim()];
    for j in 0..mu.len() {
        let y = mu.point(j);
        let r2 = distance_sq(x, y);
        if j != i && r2 > 0.0 {
            accumulate(&mut acc, x, y, mu.weight(j) * inv_pow(r2, mu.n()));
        }
    }
    acc
}

/// A vector field sampled at the atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    pub dim: usize,
    /// Flat, `dim` values per atom.
    pub values: Vec<f64>,
    pub epsilon: Option<f64>,
    pub self_excluded: bool,
}

impl Field {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        norm(self.at(i))
    }

    /// `id, v_1..v_d, |v|` per line.
    pub fn to_csv(&self) -> String {
        let f = crate::fmt_f64;
        let mut out = String::from("id");
        for a in 0..self.dim {
            out.push_str(&format!(",v{}", a + 1));
        }
        out.push_str(",norm\n");
        for i in 0..self.len() {
            out.push_str(&i.to_string());
            for v in self.at(i) {
                out.push(',');
                out.push_str(&f(*v));
            }
            out.push(',');
            out.push_str(&f(self.magnitude(i)));
            out.push('\n');
        }
        out
    }
}

/// Direct `O(N^2)` field at every atom: the pv surrogate when `eps` is `None`,
/// otherwise `R_eps`.
pub fn riesz_field_direct(mu: &DiscreteMeasure, eps: Option<f64>) -> Result<Field> {
    if let Some(e) = eps {
        if !(e > 0.0) {
            return Err(Error::Parameter(format!("truncation must be positive, got {e}")));
        }
    }
    let values: Vec<Vec<f64>> = (0..mu.len())
        .into_par_iter()
        .map(|i| match eps {
            None => riesz_pv(mu, i),
            Some(e) => riesz_truncated(mu, mu.point(i), e).expect("validated truncation"),
        })
        .collect();
    Ok(Field {
        dim: mu.dim(),
        values: values.concat(),
        epsilon: eps,
        self_excluded: true,
    })
}

/// `sum_i w_i |pv R mu(x_i)|^2`.
pub fn riesz_energy(mu: &DiscreteMeasure) -> f64 {
    let parts: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let v = riesz_pv(mu, i);
            mu.weight(i) * v.iter().map(|a| a * a).sum::<f64>()
        })
        .collect();
    parts.into_iter().sum()
}

/// `sup_{eps >= eps_min} |R_eps mu(x)|`, exact over the breakpoints of the truncation.
pub fn riesz_maximal(mu: &DiscreteMeasure, x: &[f64], eps_min: f64) -> Result<f64> {
    if !(eps_min > 0.0) {
        return Err(Error::Parameter(format!("eps_min must be positive, got {eps_min}")));
    }
    check_point(mu, x)?;
    let mut by_distance: Vec<(f64, usize)> = (0..mu.len())
        .map(|j| (distance(x, mu.point(j)), j))
        .filter(|(d, _)| *d > eps_min)
        .collect();
    by_distance.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut acc = vec![0.0; mu.dim()];
    let mut best: f64 = 0.0;
    let mut k = 0;
    while k < by_distance.len() {
        // acc holds atoms strictly farther than the current distance: R_eps at eps = d
        best = best.max(norm(&acc));
        let d = by_distance[k].0;
        while k < by_distance.len() && by_distance[k].0 == d {
            let j = by_distance[k].1;
            let y = mu.point(j);
            accumulate(&mut acc, x, y, mu.weight(j) * inv_pow(distance_sq(x, y), mu.n()));
            k += 1;
        }
    }
    Ok(best.max(norm(&acc)))
}

/// Nonnegative 1-Lipschitz function on the atoms, extended by `min_i (phi_i + |x - x_i|)`.
#[derive(Debug, Clone)]
pub struct SuppressionProfile {
    values: Vec<f64>,
}

impl SuppressionProfile {
    pub fn new(mu: &DiscreteMeasure, values: Vec<f64>) -> Result<Self> {
        if values.len() != mu.len() {
            return Err(Error::Dimension(format!("{} profile values for {} atoms", values.len(), mu.len())));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("profile value at atom {i} is negative or non-finite")));
        }
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..mu.len() {
            for j in i + 1..mu.len() {
                let d = distance(mu.point(i), mu.point(j));
                let excess = (values[i] - values[j]).abs() - d;
                if excess > 1e-12 * d.max(values[i]).max(values[j]) && worst.is_none_or(|w| excess > w.2) {
                    worst = Some((i, j, excess));
                }
            }
        }
        if let Some((i, j, excess)) = worst {
            return Err(Error::Lipschitz { i, j, excess });
        }
        Ok(SuppressionProfile { values })
    }

    pub fn constant(mu: &DiscreteMeasure, c: f64) -> Result<Self> {
        Self::new(mu, vec![c; mu.len()])
    }

    pub fn at_atom(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn at(&self, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
        (0..mu.len())
            .map(|i| self.values[i] + distance(x, mu.point(i)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `K_Phi(x, y) = (x - y) / (|x - y|^2 + phi_x phi_y)^((n+1)/2)`; `None` at `0/0`.
pub fn suppressed_kernel(x: &[f64], y: &[f64], phi_x: f64, phi_y: f64, n: usize) -> Option<Vec<f64>> {
    let den = distance_sq(x, y) + phi_x * phi_y;
    if den == 0.0 {
        return None;
    }
    let f = inv_pow(den, n);
    Some(x.iter().zip(y).map(|(a, b)| (a - b) * f).collect())
}

/// `sum_j w_j K_Phi(x, x_j)` with `Phi(x)` from the profile's extension.
pub fn suppressed_field(mu: &DiscreteMeasure, x: &[f64], profile: &SuppressionProfile) -> Result<Vec<f64>> {
    check_point(mu, x)?;
    let phi_x = profile.at(mu, x);
    let mut acc = vec![0.0; mu.dim()];
    for j in 0..mu.len() {
        let y = mu.point(j);
        let den = distance_sq(x, y) + phi_x * profile.at_atom(j);
        if den > 0.0 {
            accumulate(&mut acc, x, y, mu.weight(j) * inv_pow(den, mu.n()));
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WEnergy {
    pub value: f64,
    /// Fewer than two atoms, or zero diameter.
    pub degenerate: bool,
}

/// `sum_{i != j in F} w_i w_j / (diam(F) |x_i - x_j|^(n-1))`. For `n > 1`
/// coincident pairs are skipped.
pub fn w_energy(mu: &DiscreteMeasure, set: &[usize]) -> Result<WEnergy> {
    if let Some(&i) = set.iter().find(|&&i| i >= mu.len()) {
        return Err(Error::Parameter(format!("atom index {i} out of range")));
    }
    let degenerate = WEnergy { value: 0.0, degenerate: true };
    if set.len() < 2 {
        return Ok(degenerate);
    }
    let mut diam: f64 = 0.0;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            diam = diam.max(distance(mu.point(i), mu.point(j)));
        }
    }
    if diam == 0.0 {
        return Ok(degenerate);
    }
    let n = mu.n() as i32;
    let mut total = 0.0;
    for (a, &i) in set.iter().enumerate() {
        for (b, &j) in set.iter().enumerate() {
            if a == b {
                continue;
            }
            let d = distance(mu.point(i), mu.point(j));
            if n > 1 && d == 0.0 {
                continue;
            }
            total += mu.weight(i) * mu.weight(j) / d.powi(n - 1);
        }
    }
    Ok(WEnergy { value: total / diam, degenerate: false })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CotlarRow {
    pub atom: usize,
    /// `sup_{eps >= r0} |R_eps mu(x)|`.
    pub maximal: f64,
    /// Largest average of `|pv R mu|` over balls `B(x, r)`, `r > r0`, with
    /// `mu(B(x, 16 r)) <= 128^(n+2) mu(B(x, r))`.
    pub doubling_average: f64,
    /// `maximal / (doubling_average + theta1)`; zero when both vanish.
    pub ratio: f64,
}

pub fn cotlar_report(mu: &DiscreteMeasure, sample: &[usize], r0: f64, theta1: f64) -> Result<Vec<CotlarRow>> {
    if !(r0 > 0.0) {
        return Err(Error::Parameter(format!("r0 must be positive, got {r0}")));
    }
    if let Some(&i) = sample.iter().find(|&&i| i >= mu.len()) {
        return Err(Error::Parameter(format!("atom index {i} out of range")));
    }
    let field = riesz_field_direct(mu, None)?;
    let magnitude: Vec<f64> = (0..mu.len()).map(|i| field.magnitude(i)).collect();
    let doubling = 128f64.powi(mu.n() as i32 + 2);
    let rows = sample
        .par_iter()
        .map(|&i| {
            let x = mu.point(i);
            let maximal = riesz_maximal(mu, x, r0).expect("validated r0");
            let mut sorted: Vec<(f64, usize)> = (0..mu.len()).map(|j| (distance(x, mu.point(j)), j)).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let dist: Vec<f64> = sorted.iter().map(|s| s.0).collect();
            let mut mass = Vec::with_capacity(sorted.len());
            let mut integral = Vec::with_capacity(sorted.len());
            let (mut m, mut s) = (0.0, 0.0);
            for &(_, j) in &sorted {
                m += mu.weight(j);
                s += mu.weight(j) * magnitude[j];
                mass.push(m);
                integral.push(s);
            }
            // number of atoms with distance <= r
            let upto = |r: f64| dist.partition_point(|&d| d <= r);
            let mut radii: Vec<f64> = vec![r0];
            for &d in &dist {
                for r in [d, d / 16.0] {
                    if r > r0 {
                        radii.push(r);
                    }
                }
            }
            let mut best: f64 = 0.0;
            for r in radii {
                let k = upto(r);
                if k == 0 {
                    continue;
                }
                let inner = mass[k - 1];
                let outer = mass[upto(16.0 * r) - 1];
                if outer <= doubling * inner {
                    best = best.max(integral[k - 1] / inner);
                }
            }
            let den = best + theta1;
            CotlarRow {
                atom: i,
                maximal,
                doubling_average: best,
                ratio: if den > 0.0 { maximal / den } else { 0.0 },
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaarDelta {
    /// Per atom of the measure; zero outside `Q`.
    pub values: Vec<f64>,
    pub leaf: bool,
}

fn weighted_mean(mu: &DiscreteMeasure, atoms: &[usize], f: &[f64]) -> f64 {
    let mut sorted = atoms.to_vec();
    sorted.sort_unstable();
    let (mut s, mut m) = (0.0, 0.0);
    for i in sorted {
        s += mu.weight(i) * f[i];
        m += mu.weight(i);
    }
    s / m
}

/// `Delta_Q f = sum_{S child of Q} m_S(f) chi_S - m_Q(f) chi_Q`.
pub fn haar_delta(lattice: &Lattice<'_>, f: &[f64], q: usize) -> Result<HaarDelta> {
    let mu = lattice.measure();
    if f.len() != mu.len() {
        return Err(Error::Dimension(format!("{} values for {} atoms", f.len(), mu.len())));
    }
    let cube = lattice.cube(q)?;
    let mut values = vec![0.0; mu.len()];
    if cube.leaf {
        return Ok(HaarDelta { values, leaf: true });
    }
    let mq = weighted_mean(mu, lattice.atoms(q), f);
    for &s in &cube.children {
        let ms = weighted_mean(mu, lattice.atoms(s), f);
        for &i in lattice.atoms(s) {
            values[i] = ms - mq;
        }
    }
    Ok(HaarDelta { values, leaf: false })
}

/// `||Delta_Q f||^2_{L^2(mu)}` for every cube, zero on leaves.
pub fn haar_energy(lattice: &Lattice<'_>, f: &[f64]) -> Result<Vec<f64>> {
    let mu = lattice.measure();
    if f.len() != mu.len() {
        return Err(Error::Dimension(format!("{} values for {} atoms", f.len(), mu.len())));
    }
    let means: Vec<f64> = (0..lattice.len()).map(|q| weighted_mean(mu, lattice.atoms(q), f)).collect();
    Ok(lattice
        .cubes()
        .iter()
        .map(|cube| {
            if cube.leaf {
                return 0.0;
            }
            cube.children
                .iter()
                .map(|&s| lattice.cubes()[s].mass * (means[s] - means[cube.id]).powi(2))
                .sum()
        })
        .collect())
}

/// Treecode output: the field plus traversal counts and, when requested, the
/// deviation from direct summation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeField {
    pub field: Field,
    pub monopoles: usize,
    pub direct_pairs: usize,
    pub validation: Option<TreeValidation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeValidation {
    /// `max_i |tree_i - direct_i| / sum_j w_j |K(x_i, x_j)|`.
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// `max_i |tree_i - direct_i| / |direct_i|` over points with nonzero direct field.
    pub max_naive_relative: f64,
    /// `|sum_i w_i tree_i|`.
    pub momentum: f64,
    /// `|sum_i w_i direct_i|`.
    pub direct_momentum: f64,
    /// `sum_i w_i |tree_i - direct_i|`, the bound the treecode momentum drift must respect.
    pub momentum_bound: f64,
}

/// Barnes-Hut style field at the atoms using lattice cubes as clusters.
///
/// A cube is replaced by its total mass at the weighted centroid when
/// `2 s / D <= theta_mac`, where `s` is the largest centroid-to-atom distance in
/// the cube and `D` the distance from the evaluation point to the centroid; with
/// a truncation `eps` the cube must also lie entirely beyond `eps`. Unaccepted
/// leaves are summed directly in ascending atom order.
pub fn riesz_field_tree(lattice: &Lattice<'_>, eps: Option<f64>, theta_mac: f64, validate: bool) -> Result<TreeField> {
    if !(theta_mac > 0.0 && theta_mac < 1.0) {
        return Err(Error::Parameter(format!("opening parameter must lie in (0, 1), got {theta_mac}")));
    }
    if let Some(e) = eps {
        if !(e > 0.0) {
            return Err(Error::Parameter(format!("truncation must be positive, got {e}")));
        }
    }
    let mu = lattice.measure();
    let dim = mu.dim();
    let n = mu.n();
    let cubes = lattice.cubes();
    let mut centroid = vec![0.0; cubes.len() * dim];
    let mut spread = vec![0.0; cubes.len()];
    for cube in cubes {
        let c = &mut centroid[cube.id * dim..(cube.id + 1) * dim];
        for &i in lattice.atoms(cube.id) {
            for (a, v) in mu.point(i).iter().enumerate() {
                c[a] += mu.weight(i) * v;
            }
        }
        let m: f64 = lattice.atoms(cube.id).iter().map(|&i| mu.weight(i)).sum();
        c.iter_mut().for_each(|v| *v /= m);
        let c = &centroid[cube.id * dim..(cube.id + 1) * dim];
        spread[cube.id] = lattice.atoms(cube.id).iter().map(|&i| distance(mu.point(i), c)).fold(0.0, f64::max);
    }

    let per_point: Vec<(Vec<f64>, usize, usize)> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.point(i);
            let mut far = vec![0.0; dim];
            let mut near: Vec<usize> = Vec::new();
            let mut monopoles = 0;
            let mut stack = vec![lattice.root()];
            while let Some(q) = stack.pop() {
                let c = &centroid[q * dim..(q + 1) * dim];
                let s = spread[q];
                let d = distance(x, c);
                let beyond = eps.is_none_or(|e| d - s > e);
                if s > 0.0 && 2.0 * s <= theta_mac * d && beyond {
                    accumulate(&mut far, x, c, cubes[q].mass * inv_pow(d * d, n));
                    monopoles += 1;
                } else if cubes[q].leaf {
                    near.extend_from_slice(lattice.atoms(q));
                } else {
                    stack.extend(cubes[q].children.iter());
                }
            }
            near.sort_unstable();
            let mut close = vec![0.0; dim];
            for &j in &near {
                let y = mu.point(j);
                let r2 = distance_sq(x, y);
                let keep = match eps {
                    None => j != i && r2 > 0.0,
                    Some(e) => r2.sqrt() > e,
                };
                if keep {
                    accumulate(&mut close, x, y, mu.weight(j) * inv_pow(r2, n));
                }
            }
            let v: Vec<f64> = far.iter().zip(&close).map(|(a, b)| a + b).collect();
            (v, monopoles, near.len())
        })
        .collect();
    let monopoles = per_point.iter().map(|p| p.1).sum();
    let direct_pairs = per_point.iter().map(|p| p.2).sum();
    let field = Field {
        dim,
        values: per_point.into_iter().flat_map(|p| p.0).collect(),
        epsilon: eps,
        self_excluded: true,
    };
    let validation = if validate { Some(validate_tree(mu, &field, eps)?) } else { None };
    Ok(TreeField { field, monopoles, direct_pairs, validation })
}

fn validate_tree(mu: &DiscreteMeasure, tree: &Field, eps: Option<f64>) -> Result<TreeValidation> {
    let direct = riesz_field_direct(mu, eps)?;
    let n = mu.n();
    let absolute: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.point(i);
            (0..mu.len())
                .filter_map(|j| {
                    let r2 = distance_sq(x, mu.point(j));
                    let keep = match eps {
                        None => j != i && r2 > 0.0,
                        Some(e) => r2.sqrt() > e,
                    };
                    keep.then(|| mu.weight(j) * r2.sqrt() * inv_pow(r2, n))
                })
                .sum()
        })
        .collect();
    let dim = mu.dim();
    let mut max_dev: f64 = 0.0;
    let mut sum_dev = 0.0;
    let mut max_naive: f64 = 0.0;
    let mut momentum = vec![0.0; dim];
    let mut direct_momentum = vec![0.0; dim];
    let mut bound = 0.0;
    for i in 0..mu.len() {
        let diff: Vec<f64> = tree.at(i).iter().zip(direct.at(i)).map(|(a, b)| a - b).collect();
        let err = norm(&diff);
        let rel = if absolute[i] > 0.0 { err / absolute[i] } else { 0.0 };
        max_dev = max_dev.max(rel);
        sum_dev += rel;
        let dn = direct.magnitude(i);
        if dn > 0.0 {
            max_naive = max_naive.max(err / dn);
        }
        for a in 0..dim {
            momentum[a] += mu.weight(i) * tree.at(i)[a];
            direct_momentum[a] += mu.weight(i) * direct.at(i)[a];
        }
        bound += mu.weight(i) * err;
    }
    Ok(TreeValidation {
        max_deviation: max_dev,
        mean_deviation: sum_dev / mu.len() as f64,
        max_naive_relative: max_naive,
        momentum: norm(&momentum),
        direct_momentum: norm(&direct_momentum),
        momentum_bound: bound,
    })
}

/// `sum_{i in Q} w_i sum_{j in Q, j != i} w_j K(x_i, x_j)` together with the scale
/// `sum_{i in Q} w_i * max_{i != j in Q} w_j |K(x_i, x_j)|` it should vanish against.
pub fn cube_self_interaction(lattice: &Lattice<'_>, q: usize) -> Result<(Vec<f64>, f64)> {
    let mu = lattice.measure();
    lattice.cube(q)?;
    let mut atoms = lattice.atoms(q).to_vec();
    atoms.sort_unstable();
    let mut total = vec![0.0; mu.dim()];
    let mut max_pair: f64 = 0.0;
    let mut mass = 0.0;
    for &i in &atoms {
        let x = mu.point(i);
        let mut inner = vec![0.0; mu.dim()];
        for &j in &atoms {
            let y = mu.point(j);
            let r2 = distance_sq(x, y);
            if j != i && r2 > 0.0 {
                let f = mu.weight(j) * inv_pow(r2, mu.n());
                accumulate(&mut inner, x, y, f);
                max_pair = max_pair.max(f * r2.sqrt());
            }
        }
        for (t, v) in total.iter_mut().zip(&inner) {
            *t += mu.weight(i) * v;
        }
        mass += mu.weight(i);
    }
    Ok((total, mass * max_pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeParams;
    use crate::measure::{generate, parse_csv, Generator};

    #[test]
    fn kernel_basics() {
        assert_eq!(riesz_kernel(&[1.0, 0.0], &[0.0, 0.0], 1).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(riesz_kernel(&[1.0, 0.0], &[1.0, 0.0], 1), Err(Error::Singularity)));
        let x = [0.3, -1.2, 0.5];
        let y = [1.0, 0.25, -0.75];
        let a = riesz_kernel(&x, &y, 2).unwrap();
        let b = riesz_kernel(&y, &x, 2).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(*p, -*q);
        }
        assert!((norm(&a) - distance(&x, &y).powi(-2)).abs() < 1e-14);
    }

    #[test]
    fn truncated_examples() {
        let one = parse_csv("0,0,1", 1).unwrap();
        assert_eq!(riesz_truncated(&one, &[2.0, 0.0], 1.0).unwrap(), vec![0.5, 0.0]);
        assert_eq!(riesz_truncated(&one, &[2.0, 0.0], 2.0).unwrap(), vec![0.0, 0.0]);
        let pair = parse_csv("1,0,1\n-1,0,1", 1).unwrap();
        assert_eq!(riesz_truncated(&pair, &[0.0, 0.0], 0.5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pv_and_energy_examples() {
        let one = parse_csv("0,0,1", 1).unwrap();
        assert_eq!(riesz_pv(&one, 0), vec![0.0, 0.0]);
        assert_eq!(riesz_energy(&one), 0.0);
        let pair = parse_csv("0,0,1\n1,0,1", 1).unwrap();
        assert_eq!(riesz_energy(&pair), 2.0);
    }

    #[test]
    fn energy_scales_cubically() {
        let mu = generate(&Generator::Circle { count: 100 }, 1).unwrap();
        let a = riesz_energy(&mu);
        let b = riesz_energy(&mu.scaled(10.0).unwrap());
        assert!((b - 1000.0 * a).abs() <= 1e-9 * b);
    }

    #[test]
    fn maximal_examples() {
        let one = parse_csv("0,0,2", 1).unwrap();
        assert_eq!(riesz_maximal(&one, &[0.5, 0.0], 0.1).unwrap(), 4.0);
        let pair = parse_csv("1,0,1\n-1,0,1", 1).unwrap();
        assert_eq!(riesz_maximal(&pair, &[0.0, 0.0], 0.1).unwrap(), 0.0);
        let mu = generate(&Generator::LipschitzGraph { count: 80, slope: 2.0 }, 1).unwrap();
        let x = [0.37, 0.4];
        let m = riesz_maximal(&mu, &x, 0.01).unwrap();
        let mut seen: f64 = 0.0;
        for k in 0..400 {
            let eps = 0.01 + k as f64 * 0.005;
            let v = norm(&riesz_truncated(&mu, &x, eps).unwrap());
            assert!(v <= m * (1.0 + 1e-12));
            seen = seen.max(v);
        }
        // the sampled sup approaches the exact one from below
        assert!(seen <= m && seen > 0.0);
    }

    #[test]
    fn suppression_reduces_to_pv_and_validates() {
        let mu = generate(&Generator::Circle { count: 50 }, 1).unwrap();
        let zero = SuppressionProfile::constant(&mu, 0.0).unwrap();
        for i in [0, 7, 33] {
            assert_eq!(suppressed_field(&mu, mu.point(i), &zero).unwrap(), riesz_pv(&mu, i));
        }
        let mut bad = vec![0.0; mu.len()];
        bad[3] = 5.0;
        assert!(matches!(SuppressionProfile::new(&mu, bad), Err(Error::Lipschitz { .. })));
    }

    #[test]
    fn constant_suppression_is_uniform_regularization() {
        let mu = generate(&Generator::Segment { count: 40 }, 1).unwrap();
        let c = 0.05;
        let prof = SuppressionProfile::constant(&mu, c).unwrap();
        let x = mu.point(11).to_vec();
        let v = suppressed_field(&mu, &x, &prof).unwrap();
        let mut expected = vec![0.0; 2];
        for j in 0..mu.len() {
            let y = mu.point(j);
            let den = (distance_sq(&x, y) + c * c).powf(1.0);
            for a in 0..2 {
                expected[a] += mu.weight(j) * (x[a] - y[a]) / den;
            }
        }
        for a in 0..2 {
            assert!((v[a] - expected[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn w_energy_examples() {
        let pair = parse_csv("0,0,1\n1,0,1", 1).unwrap();
        assert_eq!(w_energy(&pair, &[0, 1]).unwrap().value, 2.0);
        assert!(w_energy(&pair, &[0]).unwrap().degenerate);
        let mu = generate(&Generator::LipschitzGraph { count: 30, slope: 1.0 }, 1).unwrap();
        let set: Vec<usize> = (0..30).collect();
        let w = w_energy(&mu, &set).unwrap().value;
        let m = mu.total_mass();
        let sq: f64 = mu.weights().iter().map(|w| w * w).sum();
        let diam = mu.diameter();
        assert!((w - (m * m - sq) / diam).abs() < 1e-12 * w);
        let t = w_energy(&mu.scaled(3.0).unwrap(), &set).unwrap().value;
        assert!((t - 9.0 * w).abs() < 1e-12 * t);
    }

    #[test]
    fn cotlar_trivial_cases() {
        let one = parse_csv("0,0,1", 1).unwrap();
        let rows = cotlar_report(&one, &[0], 0.5, 0.0).unwrap();
        assert_eq!((rows[0].maximal, rows[0].doubling_average, rows[0].ratio), (0.0, 0.0, 0.0));
        let pair = parse_csv("1,0,1\n-1,0,1", 1).unwrap();
        let rows = cotlar_report(&pair, &[0, 1], 0.5, 1.0).unwrap();
        // each atom sees its partner at distance 2 beyond r0
        assert_eq!(rows[0].maximal, 0.5);
    }

    #[test]
    fn haar_examples() {
        let mu = generate(&Generator::Segment { count: 256 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let constant = vec![3.5; 256];
        for q in 0..lat.len() {
            assert!(haar_delta(&lat, &constant, q).unwrap().values.iter().all(|v| *v == 0.0));
        }
        let f: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let energy: f64 = haar_energy(&lat, &f).unwrap().iter().sum();
        let mean = weighted_mean(&mu, &(0..256).collect::<Vec<_>>(), &f);
        let total: f64 = (0..256).map(|i| mu.weight(i) * (f[i] - mean).powi(2)).sum();
        assert!((energy - total).abs() <= 1e-9 * total);
        for q in 0..lat.len() {
            let d = haar_delta(&lat, &f, q).unwrap();
            let integral: f64 = (0..256).map(|i| mu.weight(i) * d.values[i]).sum();
            assert!(integral.abs() < 1e-12);
            assert_eq!(d.leaf, lat.cubes()[q].leaf);
        }
    }

    #[test]
    fn tree_with_tiny_opening_is_direct() {
        let mu = generate(&Generator::Cantor4 { generations: 3, ratio: 0.25 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let tree = riesz_field_tree(&lat, None, 1e-12, false).unwrap();
        let direct = riesz_field_direct(&mu, None).unwrap();
        assert_eq!(tree.monopoles, 0);
        assert_eq!(tree.field.values, direct.values);
        let tree = riesz_field_tree(&lat, Some(0.01), 1e-12, false).unwrap();
        assert_eq!(tree.field.values, riesz_field_direct(&mu, Some(0.01)).unwrap().values);
    }

    #[test]
    fn tree_accuracy_on_segment() {
        let mu = generate(&Generator::Segment { count: 2048 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let tree = riesz_field_tree(&lat, None, 0.3, true).unwrap();
        let v = tree.validation.unwrap();
        assert!(v.max_deviation < 1e-2, "{v:?}");
        assert!(tree.monopoles > 0);
        assert!(v.direct_momentum < 1e-10);
        assert!(v.momentum <= v.momentum_bound + 1e-10);
    }

    #[test]
    fn cube_antisymmetry() {
        let mu = generate(&Generator::Cantor4 { generations: 3, ratio: 0.25 }, 1).unwrap();
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        for q in 0..lat.len() {
            let (v, scale) = cube_self_interaction(&lat, q).unwrap();
            assert!(norm(&v) <= 1e-9 * scale.max(f64::MIN_POSITIVE));
        }
    }
}
