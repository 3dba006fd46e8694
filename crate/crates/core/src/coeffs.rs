//! Per-ball and per-cube coefficients: beta numbers, densities, the
//! bucketed density `Theta`, the Poisson coefficient `P(Q)`, high-density
//! families and the associated energies.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::measure::{Ball, DiscreteMeasure};
use crate::spatial::{distance, Moments};

/// An `n`-plane in `R^(n+1)`, stored as a base point and a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyperplane {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

impl Hyperplane {
    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.point)
            .zip(&self.normal)
            .map(|((a, b), u)| (a - b) * u)
            .sum::<f64>()
            .abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaFit {
    pub beta: f64,
    /// Best plane; absent when the ball holds no mass.
    pub plane: Option<Hyperplane>,
    /// No mass in the ball, or all of it on a single hyperplane.
    pub degenerate: bool,
}

/// `beta_2(B)`: the `L^2` distance of `mu|B` to its best hyperplane, normalized by `r^(n+2)`.
pub fn beta2(mu: &DiscreteMeasure, ball: &Ball) -> Result<BetaFit> {
    if ball.center.len() != mu.dim() {
        return Err(Error::Dimension(format!(
            "ball center has {} coordinates, measure lives in R^{}",
            ball.center.len(),
            mu.dim()
        )));
    }
    let m = mu.index().ball_moments(&ball.center, ball.radius);
    Ok(fit_plane(&m, ball.radius, mu.n()))
}

/// Best-plane fit from accumulated moments.
pub fn fit_plane(m: &Moments, radius: f64, n: usize) -> BetaFit {
    let d = m.dim();
    if m.mass <= 0.0 {
        return BetaFit { beta: 0.0, plane: None, degenerate: true };
    }
    let (lambda, normal) = smallest_eigenpair(&m.scatter, d);
    let trace: f64 = (0..d).map(|a| m.scatter[a * d + a]).sum();
    let degenerate = lambda <= 1e-13 * trace || trace == 0.0;
    let beta = if degenerate {
        0.0
    } else {
        (lambda / radius.powi(n as i32 + 2)).sqrt()
    };
    BetaFit {
        beta,
        plane: Some(Hyperplane { point: m.mean.clone(), normal }),
        degenerate,
    }
}

fn smallest_eigenpair(scatter: &[f64], d: usize) -> (f64, Vec<f64>) {
    if d == 2 {
        let (a, b, c) = (scatter[0], scatter[1], scatter[3]);
        let lambda = (0.5 * (a + c) - (0.5 * (a - c)).hypot(b)).max(0.0);
        let v = if b != 0.0 {
            let (x, y) = (b, lambda - a);
            let norm = x.hypot(y);
            vec![x / norm, y / norm]
        } else if a <= c {
            vec![1.0, 0.0]
        } else {
            vec![0.0, 1.0]
        };
        return (lambda, v);
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, scatter));
    let mut best = 0;
    for i in 1..d {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let v = eig.eigenvectors.column(best);
    let norm = v.norm();
    (eig.eigenvalues[best].max(0.0), v.iter().map(|x| x / norm).collect())
}

/// `theta_mu(B(x, r)) = mu(B(x, r)) / r^n`.
pub fn theta(mu: &DiscreteMeasure, x: &[f64], r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("radius must be positive, got {r}")));
    }
    if x.len() != mu.dim() {
        return Err(Error::Dimension(format!("point has {} coordinates, expected {}", x.len(), mu.dim())));
    }
    Ok(mu.index().ball_mass(x, r) / r.powi(mu.n() as i32))
}

/// Bucket `value` into `[A0^(kn), A0^((k+1)n))`; returns `(A0^(kn), k)`.
pub fn density_bucket(value: f64, a0: f64, n: usize) -> Result<(f64, i32)> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::Validation(format!("density must be positive and finite, got {value}")));
    }
    let base = a0.powi(n as i32);
    let mut k = (value.ln() / base.ln()).floor() as i32;
    while base.powi(k + 1) <= value {
        k += 1;
    }
    while base.powi(k) > value {
        k -= 1;
    }
    Ok((base.powi(k), k))
}

/// Wolff energy `sum_i w_i sum_j r_j^(3/4) theta(x_i, r_j)^2 ln(ratio)` on the
/// radii `r_j = diam ratio^-j >= r_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WolffEnergy {
    pub value: f64,
    pub radii: usize,
    pub singleton: bool,
}

pub fn wolff_energy(mu: &DiscreteMeasure, ratio: f64) -> Result<WolffEnergy> {
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::Parameter(format!("grid ratio must exceed 1, got {ratio}")));
    }
    if mu.len() < 2 {
        return Ok(WolffEnergy { value: 0.0, radii: 0, singleton: true });
    }
    let radii = radius_grid(mu.diameter(), mu.r_min(), ratio);
    let n = mu.n() as i32;
    let index = mu.index();
    let log = ratio.ln();
    let mut total = 0.0;
    for i in 0..mu.len() {
        let x = mu.point(i);
        let mut inner = 0.0;
        for &r in &radii {
            let th = index.ball_mass(x, r) / r.powi(n);
            inner += r.powf(0.75) * th * th;
        }
        total += mu.weight(i) * inner * log;
    }
    Ok(WolffEnergy { value: total, radii: radii.len(), singleton: false })
}

/// `diam ratio^-j` for `j = 0, 1, ...` while the radius stays `>= r_min`.
pub fn radius_grid(diam: f64, r_min: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 0;
    loop {
        let r = diam * ratio.powi(-j);
        if r < r_min * (1.0 - 1e-12) || out.len() > 4096 {
            break;
        }
        out.push(r);
        j += 1;
    }
    if out.is_empty() {
        out.push(r_min.max(diam));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeCoeffs {
    /// `beta_2(2B_Q)`.
    pub beta: f64,
    pub beta_degenerate: bool,
    /// `mu(2B_Q)`.
    pub mass_2b: f64,
    /// `theta_mu(2B_Q)`.
    pub theta_ball: f64,
    /// `mu(2B_Q) / l(Q)^n`, the quantity `Theta` buckets.
    pub density: f64,
    /// `Theta(Q)`.
    pub big_theta: f64,
    pub exponent: i32,
    /// `P(Q)`.
    pub poisson: f64,
    pub p_doubling: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Energies {
    pub e: f64,
    pub e_h: f64,
    pub e_inf: f64,
    /// Per `k >= 1`: sum of `(l(P)/l(Q))^(1/2) Theta(P)^2 mu(P)` over `hd^k(Q) cap D(lambda Q)`.
    pub hd_sums: BTreeMap<i32, f64>,
    /// `m_k(Q)` for `k >= 1`.
    pub m: BTreeMap<i32, f64>,
    /// Members of some `hd^k(Q)`, `k >= 4`, whose bucket differs from `A0^(kn) Theta(Q)`
    /// while `Q` is `P`-doubling.
    pub jump_mismatches: usize,
}

/// Chain and child diagnostics evaluated over a whole table.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoeffDiagnostics {
    /// Parent/child pairs with `2B_P` inside `2B_Q`.
    pub child_pairs: usize,
    /// Pairs skipped because `2B_P` is not inside `2B_Q`.
    pub child_excluded: usize,
    /// Checked pairs with `Theta(P) > A0^n Theta(Q)`.
    pub child_violations: usize,
    /// Non-`P`-doubling chains tested for decay.
    pub chains: usize,
    pub chain_violations: usize,
}

/// Coefficients for every cube of a lattice.
#[derive(Debug, Clone)]
pub struct CoeffTable<'l, 'm> {
    lattice: &'l Lattice<'m>,
    c_d: f64,
    cubes: Vec<CubeCoeffs>,
    subtree_max: Vec<i32>,
    energy_below: Vec<f64>,
}

impl<'l, 'm> CoeffTable<'l, 'm> {
    /// `c_d` defaults to `4 A0^n`.
    pub fn build(lattice: &'l Lattice<'m>, c_d: Option<f64>) -> Result<Self> {
        let mu = lattice.measure();
        let n = mu.n() as i32;
        let a0 = lattice.a0();
        let c_d = c_d.unwrap_or(4.0 * a0.powi(n));
        if !(c_d > 0.0 && c_d.is_finite()) {
            return Err(Error::Parameter(format!("C_d must be positive, got {c_d}")));
        }
        let index = mu.index();
        let count = lattice.len();
        let mut cubes = Vec::with_capacity(count);
        let mut ancestor_sum = vec![0.0; count];
        for cube in lattice.cubes() {
            let radius = 56.0 * cube.radius;
            let moments = index.ball_moments(&cube.center, radius);
            let fit = fit_plane(&moments, radius, mu.n());
            let mass_2b = moments.mass;
            let density = mass_2b / cube.side.powi(n);
            let (big_theta, exponent) = density_bucket(density, a0, mu.n())?;
            let own = mass_2b / cube.side.powi(n + 1);
            let acc = own + cube.parent.map_or(0.0, |p| ancestor_sum[p]);
            ancestor_sum[cube.id] = acc;
            let poisson = cube.side * acc;
            cubes.push(CubeCoeffs {
                beta: fit.beta,
                beta_degenerate: fit.degenerate,
                mass_2b,
                theta_ball: mass_2b / radius.powi(n),
                density,
                big_theta,
                exponent,
                poisson,
                p_doubling: poisson <= c_d * density,
            });
        }
        let mut subtree_max = vec![i32::MIN; count];
        let mut energy_below = vec![0.0; count];
        for q in (0..count).rev() {
            let cube = &lattice.cubes()[q];
            if cube.leaf {
                continue;
            }
            let c = &cubes[q];
            let mut m = c.exponent;
            let mut e = cube.side.powf(0.75) * c.big_theta * c.big_theta * cube.mass;
            for &ch in &cube.children {
                m = m.max(subtree_max[ch]);
                e += energy_below[ch];
            }
            subtree_max[q] = m;
            energy_below[q] = e;
        }
        Ok(CoeffTable { lattice, c_d, cubes, subtree_max, energy_below })
    }

    pub fn lattice(&self) -> &'l Lattice<'m> {
        self.lattice
    }

    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    pub fn get(&self, q: usize) -> Result<&CubeCoeffs> {
        self.cubes.get(q).ok_or(Error::UnknownCube(q))
    }

    pub fn all(&self) -> &[CubeCoeffs] {
        &self.cubes
    }

    pub fn big_theta(&self, q: usize) -> f64 {
        self.cubes[q].big_theta
    }

    pub fn exponent(&self, q: usize) -> i32 {
        self.cubes[q].exponent
    }

    pub fn is_leaf(&self, q: usize) -> bool {
        self.lattice.cubes()[q].leaf
    }

    /// Largest bucket exponent over the non-leaf cubes below and including `q`.
    pub fn subtree_max(&self, q: usize) -> i32 {
        self.subtree_max[q]
    }

    /// `hd^k(Q)`, optionally intersected with `D(lambda Q)`.
    pub fn hd(&self, q: usize, k: i32, restrict: Option<f64>) -> Result<Vec<usize>> {
        self.lattice.cube(q)?;
        if k < 0 {
            return Err(Error::Parameter(format!("hd^k needs k >= 0, got {k}")));
        }
        let threshold = self.cubes[q].exponent + k;
        let mut out = Vec::new();
        let mut stack = self.region_roots(q, restrict)?;
        stack.reverse();
        while let Some(p) = stack.pop() {
            if self.is_leaf(p) || self.subtree_max[p] < threshold {
                continue;
            }
            if self.cubes[p].exponent >= threshold {
                out.push(p);
                continue;
            }
            stack.extend(self.lattice.cubes()[p].children.iter().rev());
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Level-`(k+1)` cubes from which a search over strictly smaller cubes starts.
    fn region_roots(&self, q: usize, restrict: Option<f64>) -> Result<Vec<usize>> {
        let level = self.lattice.cubes()[q].level;
        let tops: Vec<usize> = match restrict {
            Some(lambda) => self.lattice.neighborhood(q, lambda)?,
            None => self.lattice.level(level).to_vec(),
        };
        Ok(tops
            .into_iter()
            .flat_map(|t| self.lattice.cubes()[t].children.iter().copied())
            .collect())
    }

    /// `E(lambda Q)`, `E^H(lambda Q)`, `E_inf(lambda Q)` and `m_k(Q)`.
    pub fn energies(&self, q: usize, lambda: f64) -> Result<Energies> {
        let lat = self.lattice;
        let cube = lat.cube(q)?;
        let members = lat.neighborhood(q, lambda)?;
        let mut out = Energies::default();
        let side_q = cube.side;
        for &m in &members {
            out.e += self.energy_below[m];
        }
        out.e /= side_q.powf(0.75);

        let eq = self.cubes[q].exponent;
        let exact_check = self.cubes[q].p_doubling;
        let a0n = lat.a0().powi(lat.measure().n() as i32);
        // (cube, largest exponent among its strict ancestors below level(Q))
        let mut stack: Vec<(usize, i32)> = Vec::new();
        for &m in members.iter().rev() {
            for &c in lat.cubes()[m].children.iter().rev() {
                stack.push((c, i32::MIN));
            }
        }
        while let Some((p, above)) = stack.pop() {
            if self.is_leaf(p) {
                continue;
            }
            let floor = above.max(eq - 1);
            if self.subtree_max[p] <= floor {
                continue;
            }
            let c = &self.cubes[p];
            let pc = &lat.cubes()[p];
            let ratio = pc.side / side_q;
            let weight = c.big_theta * c.big_theta * pc.mass;
            // P lies in hd^k(Q) exactly for k in (above - eq, c.exponent - eq], k >= 0
            let k_lo = (floor - eq + 1).max(0);
            let k_hi = c.exponent - eq;
            for k in k_lo..=k_hi {
                out.e_h += ratio.powf(0.75) * weight;
                if k >= 1 {
                    *out.hd_sums.entry(k).or_insert(0.0) += ratio.sqrt() * weight;
                    let slot = out.m.entry(k).or_insert(0.0);
                    *slot = slot.max(ratio);
                }
                if k >= 4 && exact_check && (c.big_theta != a0n.powi(k) * self.cubes[q].big_theta) {
                    out.jump_mismatches += 1;
                }
            }
            let next = above.max(c.exponent);
            for &ch in pc.children.iter().rev() {
                stack.push((ch, next));
            }
        }
        out.e_inf = out.hd_sums.values().copied().fold(0.0, f64::max);
        Ok(out)
    }

    pub fn diagnostics(&self) -> CoeffDiagnostics {
        let lat = self.lattice;
        let a0n = lat.a0().powi(lat.measure().n() as i32);
        let mut d = CoeffDiagnostics::default();
        for cube in lat.cubes() {
            let Some(p) = cube.parent else { continue };
            let parent = &lat.cubes()[p];
            let gap = distance(&cube.center, &parent.center) + 56.0 * cube.radius;
            if gap <= 56.0 * parent.radius {
                d.child_pairs += 1;
                if self.cubes[cube.id].big_theta > a0n * self.cubes[p].big_theta {
                    d.child_violations += 1;
                }
            } else {
                d.child_excluded += 1;
            }
        }
        // chains Q_0 > Q_1 > ... > Q_m with Q_1..Q_m not P-doubling
        for cube in lat.cubes() {
            if self.cubes[cube.id].p_doubling {
                continue;
            }
            let tilde = self.cubes[cube.id].density;
            let mut m = 0i32;
            let mut cur = cube.id;
            while let Some(p) = lat.cubes()[cur].parent {
                m += 1;
                d.chains += 1;
                if tilde > lat.a0().powf(-m as f64 / 2.0) * self.cubes[p].poisson * (1.0 + 1e-12) {
                    d.chain_violations += 1;
                }
                if self.cubes[p].p_doubling {
                    break;
                }
                cur = p;
            }
        }
        d
    }

    /// One CSV row per cube.
    pub fn to_csv(&self, energies: Option<&[Option<Energies>]>) -> String {
        let f = crate::fmt_f64;
        let mut out = String::from(
            "id,level,leaf,mass,beta,beta_degenerate,theta_2bq,density,big_theta,exponent,poisson,p_doubling,e9,eh9,einf9\n",
        );
        for (q, c) in self.cubes.iter().enumerate() {
            let cube = &self.lattice.cubes()[q];
            let en = energies.and_then(|e| e[q].as_ref());
            let (e, eh, ei) = en.map_or((String::new(), String::new(), String::new()), |e| (f(e.e), f(e.e_h), f(e.e_inf)));
            out.push_str(&format!(
                "{q},{},{},{},{},{},{},{},{},{},{},{},{e},{eh},{ei}\n",
                cube.level,
                cube.leaf,
                f(cube.mass),
                f(c.beta),
                c.beta_degenerate,
                f(c.theta_ball),
                f(c.density),
                f(c.big_theta),
                c.exponent,
                f(c.poisson),
                c.p_doubling,
            ));
        }
        out
    }
}
