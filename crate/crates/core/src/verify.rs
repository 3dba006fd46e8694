//! Both sides of the beta/Riesz comparison, the Jones-Wolff potential,
//! a capacity estimator and battery reports.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{fit_plane, radius_grid, CoeffTable};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeParams};
use crate::measure::{generate, growth_constant, DiscreteMeasure, Generator};
use crate::riesz::riesz_energy;
use crate::spatial::distance;
use crate::stopping::{Stopper, StoppingConfig};

pub const DEFAULT_GRID_RATIO: f64 = 2.0;

/// `sum_Q beta_2(2B_Q)^2 Theta(Q) mu(Q)` over non-leaf cubes.
pub fn beta_wolff_lhs_lattice(table: &CoeffTable<'_, '_>) -> f64 {
    let lat = table.lattice();
    lat.cubes()
        .iter()
        .filter(|c| !c.leaf)
        .map(|c| {
            let k = &table.all()[c.id];
            k.beta * k.beta * k.big_theta * c.mass
        })
        .sum()
}

/// The lattice sum with the unbucketed ball density `theta_mu(2B_Q)` in place of `Theta(Q)`.
pub fn beta_wolff_lhs_lattice_ball(table: &CoeffTable<'_, '_>) -> f64 {
    let lat = table.lattice();
    lat.cubes()
        .iter()
        .filter(|c| !c.leaf)
        .map(|c| {
            let k = &table.all()[c.id];
            k.beta * k.beta * k.theta_ball * c.mass
        })
        .sum()
}

/// `sum_i w_i sum_j beta_2(x_i, r_j)^2 theta(x_i, r_j) ln(ratio)` on the radius grid.
pub fn beta_wolff_lhs_grid(mu: &DiscreteMeasure, ratio: f64) -> Result<f64> {
    check_ratio(ratio)?;
    if mu.len() < 2 {
        return Ok(0.0);
    }
    let radii = radius_grid(mu.diameter(), mu.r_min(), ratio);
    let log = ratio.ln();
    let parts: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| mu.weight(i) * point_beta_integral(mu, mu.point(i), &radii) * log)
        .collect();
    Ok(parts.into_iter().sum())
}

fn point_beta_integral(mu: &DiscreteMeasure, x: &[f64], radii: &[f64]) -> f64 {
    let n = mu.n();
    radii
        .iter()
        .map(|&r| {
            let m = mu.index().ball_moments(x, r);
            let beta = fit_plane(&m, r, n).beta;
            beta * beta * m.mass / r.powi(n as i32)
        })
        .sum()
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 1.0 && ratio.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("grid ratio must exceed 1, got {ratio}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckParams {
    pub lattice: LatticeParams,
    pub grid_ratio: f64,
    pub c_d: Option<f64>,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams { lattice: LatticeParams::default(), grid_ratio: DEFAULT_GRID_RATIO, c_d: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub atoms: usize,
    pub n: usize,
    pub total_mass: f64,
    pub lhs_lattice: f64,
    pub lhs_lattice_ball: f64,
    pub lhs_grid: f64,
    /// `Theta(root)^2 mu(root)`.
    pub sigma_root: f64,
    pub riesz_energy: f64,
    pub theta0: f64,
    pub theta0_sq_mass: f64,
    /// `lhs_grid / (riesz_energy + theta0^2 |mu|)`.
    pub r1: f64,
    /// `riesz_energy / (lhs_grid + theta0^2 |mu|)`.
    pub r2: f64,
    pub r1_lattice: f64,
    pub r2_lattice: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtimes: Option<BTreeMap<String, f64>>,
}

pub fn theorem_check(mu: &DiscreteMeasure, params: &CheckParams, timed: bool) -> Result<ComparisonReport> {
    if mu.len() < 2 {
        return Err(Error::Validation("comparison needs at least two atoms".into()));
    }
    let mut runtimes = BTreeMap::new();
    let mut clock = |name: &str, start: Instant| {
        runtimes.insert(name.to_string(), start.elapsed().as_secs_f64());
    };

    let t = Instant::now();
    let lat = Lattice::build(mu, params.lattice)?;
    let table = CoeffTable::build(&lat, params.c_d)?;
    let lhs_lattice = beta_wolff_lhs_lattice(&table);
    clock("lhs_lattice", t);

    let t = Instant::now();
    let lhs_grid = beta_wolff_lhs_grid(mu, params.grid_ratio)?;
    clock("lhs_grid", t);

    let t = Instant::now();
    let riesz = riesz_energy(mu);
    clock("riesz_energy", t);

    let t = Instant::now();
    let theta0 = growth_constant(mu).theta0;
    clock("growth_constant", t);

    let floor = theta0 * theta0 * mu.total_mass();
    let root_theta = table.big_theta(lat.root());
    Ok(ComparisonReport {
        atoms: mu.len(),
        n: mu.n(),
        total_mass: mu.total_mass(),
        lhs_lattice,
        lhs_lattice_ball: beta_wolff_lhs_lattice_ball(&table),
        lhs_grid,
        sigma_root: root_theta * root_theta * lat.cubes()[lat.root()].mass,
        riesz_energy: riesz,
        theta0,
        theta0_sq_mass: floor,
        r1: lhs_grid / (riesz + floor),
        r2: riesz / (lhs_grid + floor),
        r1_lattice: lhs_lattice / (riesz + floor),
        r2_lattice: riesz / (lhs_lattice + floor),
        runtimes: timed.then_some(runtimes),
    })
}

/// `U(x) = sup_r theta(x, r) + (integral of beta_2^2 theta dr/r)^(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialSample {
    pub theta_sup: f64,
    pub beta_integral: f64,
    pub u: f64,
}

/// Radii are restricted to `[r_min, diam]`. The supremum runs over the
/// atom distances in that range plus both endpoints; between consecutive
/// distances the closed-ball density only decreases, so this is exact.
pub fn jones_wolff_potential(mu: &DiscreteMeasure, x: &[f64], ratio: f64) -> Result<PotentialSample> {
    check_ratio(ratio)?;
    if x.len() != mu.dim() {
        return Err(Error::Dimension(format!("point has {} coordinates, expected {}", x.len(), mu.dim())));
    }
    let (lo, hi) = (mu.r_min(), mu.diameter().max(mu.r_min()));
    let n = mu.n() as i32;
    let mut dists: Vec<(f64, f64)> = (0..mu.len()).map(|j| (distance(x, mu.point(j)), mu.weight(j))).collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut theta_sup: f64 = 0.0;
    let mut mass = 0.0;
    let mut k = 0;
    while k < dists.len() && dists[k].0 <= lo {
        mass += dists[k].1;
        k += 1;
    }
    theta_sup = theta_sup.max(mass / lo.powi(n));
    while k < dists.len() && dists[k].0 <= hi {
        let d = dists[k].0;
        while k < dists.len() && dists[k].0 == d {
            mass += dists[k].1;
            k += 1;
        }
        theta_sup = theta_sup.max(mass / d.powi(n));
    }
    let radii = radius_grid(mu.diameter(), mu.r_min(), ratio);
    let beta_integral = point_beta_integral(mu, x, &radii) * ratio.ln();
    Ok(PotentialSample { theta_sup, beta_integral, u: theta_sup + beta_integral.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEstimate {
    /// `t mu(E)`.
    pub kappa: f64,
    /// `1 / max_{x in E} U(x)`.
    pub t: f64,
    pub max_u: f64,
    pub argmax: usize,
}

/// Best scalar multiple of `mu` with `U <= 1` on the atoms of `E`; a lower
/// bound for the capacity of `E`.
pub fn capacity_estimate(mu: &DiscreteMeasure, set: &[usize], ratio: f64) -> Result<CapacityEstimate> {
    if set.is_empty() {
        return Err(Error::Validation("capacity needs a non-empty atom set".into()));
    }
    if let Some(&bad) = set.iter().find(|&&i| i >= mu.len()) {
        return Err(Error::Validation(format!("atom {bad} out of range ({} atoms)", mu.len())));
    }
    let us: Vec<f64> = set
        .par_iter()
        .map(|&i| jones_wolff_potential(mu, mu.point(i), ratio).map(|p| p.u))
        .collect::<Result<_>>()?;
    let (pos, max_u) = us
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, u)| if u > best.1 { (k, u) } else { best });
    if !(max_u > 0.0) {
        return Err(Error::Validation("potential vanishes on the set".into()));
    }
    let t = 1.0 / max_u;
    let mass: f64 = set.iter().map(|&i| mu.weight(i)).sum();
    Ok(CapacityEstimate { kappa: t * mass, t, max_u, argmax: set[pos] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryEntry {
    pub generator: Generator,
    #[serde(default = "one")]
    pub n: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Battery {
    pub entries: Vec<BatteryEntry>,
}

impl Battery {
    /// The reference sweep used by the acceptance checks.
    pub fn standard() -> Self {
        let mut entries = vec![
            Generator::Segment { count: 64 },
            Generator::Segment { count: 1024 },
            Generator::Circle { count: 512 },
            Generator::LipschitzGraph { count: 1024, slope: 1.0 },
        ];
        entries.extend((2..=6).map(|g| Generator::Cantor4 { generations: g, ratio: 0.25 }));
        Battery { entries: entries.into_iter().map(|generator| BatteryEntry { generator, n: 1 }).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoronaSummary {
    pub top_count: usize,
    pub sigma_top: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub generator: String,
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub lhs_lattice: Option<f64>,
    pub lhs_grid: Option<f64>,
    pub riesz_energy: Option<f64>,
    pub theta0_sq_mass: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub corona: Option<CoronaSummary>,
    pub capacity: Option<CapacityEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtimes: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub check: CheckParams,
    pub stopping: StoppingConfig,
    /// Wall-clock timings make the report non-reproducible; off by default.
    pub runtimes: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { check: CheckParams::default(), stopping: StoppingConfig::default(), runtimes: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

pub fn suite_report(battery: &Battery, opts: &SuiteOptions) -> SuiteReport {
    let entries = battery.entries.par_iter().map(|e| suite_entry(e, opts)).collect();
    SuiteReport { entries }
}

fn suite_entry(entry: &BatteryEntry, opts: &SuiteOptions) -> SuiteEntry {
    let mut out = SuiteEntry {
        generator: entry.generator.kind().to_string(),
        params: entry.generator.params(),
        n: entry.n,
        error: None,
        lhs_lattice: None,
        lhs_grid: None,
        riesz_energy: None,
        theta0_sq_mass: None,
        r1: None,
        r2: None,
        corona: None,
        capacity: None,
        runtimes: None,
    };
    if let Err(e) = fill_entry(entry, opts, &mut out) {
        out.error = Some(e.to_string());
    }
    out
}

fn fill_entry(entry: &BatteryEntry, opts: &SuiteOptions, out: &mut SuiteEntry) -> Result<()> {
    let mu = generate(&entry.generator, entry.n)?;
    let report = theorem_check(&mu, &opts.check, opts.runtimes)?;
    out.lhs_lattice = Some(report.lhs_lattice);
    out.lhs_grid = Some(report.lhs_grid);
    out.riesz_energy = Some(report.riesz_energy);
    out.theta0_sq_mass = Some(report.theta0_sq_mass);
    out.r1 = Some(report.r1);
    out.r2 = Some(report.r2);
    let mut runtimes = report.runtimes;

    let t = Instant::now();
    let lat = Lattice::build(&mu, opts.check.lattice)?;
    let table = CoeffTable::build(&lat, opts.check.c_d)?;
    let corona = Stopper::new(&table, opts.stopping)?.corona()?;
    out.corona = Some(CoronaSummary { top_count: corona.trees.len(), sigma_top: corona.sigma_top });
    if let Some(r) = runtimes.as_mut() {
        r.insert("corona".into(), t.elapsed().as_secs_f64());
    }

    let t = Instant::now();
    let all: Vec<usize> = (0..mu.len()).collect();
    out.capacity = Some(capacity_estimate(&mu, &all, opts.check.grid_ratio)?);
    if let Some(r) = runtimes.as_mut() {
        r.insert("capacity".into(), t.elapsed().as_secs_f64());
    }
    out.runtimes = runtimes;
    Ok(())
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plot series keyed by file name: one `x,y` CSV per generator kind and
    /// quantity, `x` being the generator size parameter.
    pub fn plot_series(&self) -> BTreeMap<String, String> {
        let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for e in &self.entries {
            let x = match e.generator.as_str() {
                "cantor4" => e.params.get("g"),
                _ => e.params.get("N"),
            };
            let Some(&x) = x else { continue };
            for (name, y) in [("lhs_grid", e.lhs_grid), ("lhs_lattice", e.lhs_lattice), ("riesz_energy", e.riesz_energy)] {
                if let Some(y) = y {
                    series.entry(format!("{}_n{}_{}.csv", e.generator, e.n, name)).or_default().push((x, y));
                }
            }
        }
        series
            .into_iter()
            .map(|(name, mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let body: String = pts.iter().map(|(x, y)| format!("{},{}\n", crate::fmt_f64(*x), crate::fmt_f64(*y))).collect();
                (name, format!("x,y\n{body}"))
            })
            .collect()
    }
}
