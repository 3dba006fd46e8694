//! Weighted atom clouds standing in for Radon measures, plus generators,
//! file ingestion, closed-ball masses and the growth constant.
//!
//! Every supremum over radii is restricted to `r >= r_min`, the resolution
//! floor of the discretization (by default the smallest positive pairwise
//! distance between atoms).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{distance, KdTree};

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("ball radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("ball center has non-finite coordinates".into()));
        }
        Ok(Ball { center, radius })
    }
}

/// A finite weighted atom cloud in `R^(n+1)`.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
    r_min: f64,
    r_min_defined: bool,
    diameter: f64,
    index: OnceLock<KdTree>,
}

impl DiscreteMeasure {
    /// Builds a measure in `R^(n+1)` from a flat coordinate buffer (`atoms * (n + 1)` values).
    pub fn new(n: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("codimension-one dimension n must be >= 1".into()));
        }
        let dim = n + 1;
        if weights.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if coords.len() != weights.len() * dim {
            return Err(Error::Dimension(format!(
                "expected {} coordinates for {} atoms in R^{dim}, got {}",
                weights.len() * dim,
                weights.len(),
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("atom {} has a non-finite coordinate", i / dim)));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Validation(format!(
                "atom {i} has non-positive or non-finite weight {}",
                weights[i]
            )));
        }
        let total_mass = weights.iter().sum();
        let mut mu = DiscreteMeasure {
            n,
            dim,
            coords,
            weights,
            total_mass,
            r_min: 1.0,
            r_min_defined: false,
            diameter: 0.0,
            index: OnceLock::new(),
        };
        let (r_min, diameter) = {
            let tree = mu.index();
            let nearest: Vec<Option<f64>> = (0..mu.len())
                .into_par_iter()
                .map(|i| tree.nearest_positive(mu.point(i)))
                .collect();
            let r_min = nearest.into_iter().flatten().fold(f64::INFINITY, f64::min);
            let diameter = (0..mu.len())
                .into_par_iter()
                .map(|i| tree.farthest(mu.point(i)))
                .collect::<Vec<_>>()
                .into_iter()
                .fold(0.0, f64::max);
            (r_min, diameter)
        };
        if r_min.is_finite() {
            mu.r_min = r_min;
            mu.r_min_defined = true;
        }
        mu.diameter = diameter;
        Ok(mu)
    }

    /// Same atoms with an explicit resolution floor.
    pub fn with_r_min(mut self, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::Parameter(format!("r_min must be positive, got {r_min}")));
        }
        self.r_min = r_min;
        self.r_min_defined = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Resolution floor. Falls back to 1 when no positive pairwise distance exists;
    /// see [`DiscreteMeasure::r_min_defined`].
    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_min_defined(&self) -> bool {
        self.r_min_defined
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn index(&self) -> &KdTree {
        self.index
            .get_or_init(|| KdTree::new(&self.coords, &self.weights, self.dim))
    }

    /// `t * mu` for `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let w = self.weights.iter().map(|w| w * t).collect();
        let mut mu = DiscreteMeasure::new(self.n, self.coords.clone(), w)?;
        mu.r_min = self.r_min;
        mu.r_min_defined = self.r_min_defined;
        Ok(mu)
    }

    /// Pushforward under `x -> s * R x + b` with weights multiplied by `weight_factor`.
    /// `rotation` is row-major `d x d`; pass `None` for the identity.
    pub fn transformed(
        &self,
        s: f64,
        rotation: Option<&[f64]>,
        shift: Option<&[f64]>,
        weight_factor: f64,
    ) -> Result<Self> {
        let d = self.dim;
        let mut coords = Vec::with_capacity(self.coords.len());
        for i in 0..self.len() {
            let p = self.point(i);
            for a in 0..d {
                let mut v = match rotation {
                    Some(rot) => (0..d).map(|b| rot[a * d + b] * p[b]).sum::<f64>(),
                    None => p[a],
                };
                v *= s;
                if let Some(b) = shift {
                    v += b[a];
                }
                coords.push(v);
            }
        }
        let w = self.weights.iter().map(|w| w * weight_factor).collect();
        DiscreteMeasure::new(self.n, coords, w)
    }

    /// Restriction to a subset of atoms (indices into this measure).
    pub fn restricted(&self, atoms: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(atoms.len() * self.dim);
        let mut w = Vec::with_capacity(atoms.len());
        for &i in atoms {
            if i >= self.len() {
                return Err(Error::Parameter(format!("atom index {i} out of range")));
            }
            coords.extend_from_slice(self.point(i));
            w.push(self.weights[i]);
        }
        DiscreteMeasure::new(self.n, coords, w)
    }
}

/// `mu(B)` for the closed ball `B`.
pub fn ball_mass(mu: &DiscreteMeasure, ball: &Ball) -> Result<f64> {
    if ball.center.len() != mu.dim() {
        return Err(Error::Dimension(format!(
            "ball center has {} coordinates, measure lives in R^{}",
            ball.center.len(),
            mu.dim()
        )));
    }
    Ok(mu.index().ball_mass(&ball.center, ball.radius))
}

/// Result of [`growth_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthConstant {
    pub theta0: f64,
    /// Set when the measure is a single atom and the value is `w / r_min^n`.
    pub singleton: bool,
}

/// `max mu(B(x_i, r)) / r^n` over atoms and candidate radii `r >= r_min`.
///
/// Candidate radii are the pairwise distances from `x_i` (clamped below by
/// `r_min`) together with `r_min`; the ratio is right-continuous between
/// them so the maximum over this finite set is exact. Distances are bucketed
/// dyadically and only buckets whose upper bound can beat the running
/// maximum are sorted.
pub fn growth_constant(mu: &DiscreteMeasure) -> GrowthConstant {
    let n = mu.n() as i32;
    let r_min = mu.r_min();
    if mu.len() == 1 {
        return GrowthConstant {
            theta0: mu.weight(0) / r_min.powi(n),
            singleton: true,
        };
    }
    let best = (0..mu.len())
        .into_par_iter()
        .map(|i| atom_growth(mu, i, r_min, n))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    GrowthConstant {
        theta0: best,
        singleton: false,
    }
}

fn atom_growth(mu: &DiscreteMeasure, i: usize, r_min: f64, n: i32) -> f64 {
    let x = mu.point(i);
    // bucket b holds distances in [r_min 2^(b-1), r_min 2^b) shifted so that bucket 0 is d <= r_min
    let mut buckets: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut base_mass = 0.0;
    for j in 0..mu.len() {
        let d = distance(x, mu.point(j));
        let w = mu.weight(j);
        if d <= r_min {
            base_mass += w;
            continue;
        }
        let b = (d / r_min).log2().floor() as usize + 1;
        if buckets.len() <= b {
            buckets.resize_with(b + 1, Vec::new);
        }
        buckets[b].push((d, w));
    }
    let mut best = base_mass / r_min.powi(n);
    // cumulative mass up to and including bucket b
    let mut cumulative = Vec::with_capacity(buckets.len());
    let mut acc = base_mass;
    for bucket in &buckets {
        acc += bucket.iter().map(|(_, w)| w).sum::<f64>();
        cumulative.push(acc);
    }
    // bucket b (b >= 1) covers radii r >= r_min 2^(b-1); ratio there <= cumulative[b] / (r_min 2^(b-1))^n
    let mut order: Vec<(f64, usize)> = (1..buckets.len())
        .filter(|&b| !buckets[b].is_empty())
        .map(|b| (cumulative[b] / (r_min * 2f64.powi(b as i32 - 1)).powi(n), b))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (bound, b) in order {
        if bound <= best {
            break;
        }
        let mut items = std::mem::take(&mut buckets[b]);
        items.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut mass = cumulative[b - 1];
        let mut k = 0;
        while k < items.len() {
            let d = items[k].0;
            while k < items.len() && items[k].0 == d {
                mass += items[k].1;
                k += 1;
            }
            best = best.max(mass / d.powi(n));
        }
    }
    best
}

/// Synthetic measure families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `count` equispaced atoms on `[0,1] x {0}^n`, weights `1/count`.
    Segment { count: usize },
    /// `count` atoms on the unit circle in the first coordinate plane, weights `1/count`.
    Circle { count: usize },
    /// `count` atoms on the graph of a function with `|f'| <= slope`, arclength weights.
    LipschitzGraph { count: usize, slope: f64 },
    /// Centers of the generation-`generations` squares of the planar four-corner Cantor set.
    Cantor4 { generations: u32, ratio: f64 },
}

impl Generator {
    /// Parses a generator id plus a parameter map (`N`, `slope`, `g`, `ratio`).
    pub fn from_params(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| params.get(key).copied();
        let count = |key: &str| -> Result<usize> {
            let v = get(key).ok_or_else(|| Error::Parameter(format!("{kind} requires parameter {key}")))?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Parameter(format!("{key} must be a non-negative integer, got {v}")));
            }
            Ok(v as usize)
        };
        match kind {
            "segment" => Ok(Generator::Segment { count: count("N")? }),
            "circle" => Ok(Generator::Circle { count: count("N")? }),
            "lipschitz_graph" => Ok(Generator::LipschitzGraph {
                count: count("N")?,
                slope: get("slope").unwrap_or(1.0),
            }),
            "cantor4" => Ok(Generator::Cantor4 {
                generations: count("g")? as u32,
                ratio: get("ratio").unwrap_or(0.25),
            }),
            other => Err(Error::Parameter(format!("unknown generator kind '{other}'"))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Generator::Segment { .. } => "segment",
            Generator::Circle { .. } => "circle",
            Generator::LipschitzGraph { .. } => "lipschitz_graph",
            Generator::Cantor4 { .. } => "cantor4",
        }
    }

    /// Parameters as a flat map, in the same keys `from_params` accepts.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            Generator::Segment { count } | Generator::Circle { count } => {
                m.insert("N".into(), count as f64);
            }
            Generator::LipschitzGraph { count, slope } => {
                m.insert("N".into(), count as f64);
                m.insert("slope".into(), slope);
            }
            Generator::Cantor4 { generations, ratio } => {
                m.insert("g".into(), generations as f64);
                m.insert("ratio".into(), ratio);
            }
        }
        m
    }

    /// The size parameter a sweep is usually plotted against (`N` or `g`).
    pub fn size_param(&self) -> f64 {
        match *self {
            Generator::Segment { count }
            | Generator::Circle { count }
            | Generator::LipschitzGraph { count, .. } => count as f64,
            Generator::Cantor4 { generations, .. } => generations as f64,
        }
    }
}

/// Materializes a generator in `R^(n+1)`.
pub fn generate(kind: &Generator, n: usize) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::Dimension("n must be >= 1".into()));
    }
    let dim = n + 1;
    let embed = |coords: &mut Vec<f64>, x: f64, y: f64| {
        coords.push(x);
        coords.push(y);
        coords.extend(std::iter::repeat_n(0.0, dim - 2));
    };
    match *kind {
        Generator::Segment { count } => {
            if count == 0 {
                return Err(Error::Parameter("segment needs N >= 1".into()));
            }
            let mut coords = Vec::with_capacity(count * dim);
            for i in 0..count {
                let x = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                embed(&mut coords, x, 0.0);
            }
            DiscreteMeasure::new(n, coords, vec![1.0 / count as f64; count])
        }
        Generator::Circle { count } => {
            if count == 0 {
                return Err(Error::Parameter("circle needs N >= 1".into()));
            }
            let mut coords = Vec::with_capacity(count * dim);
            for i in 0..count {
                let a = 2.0 * PI * i as f64 / count as f64;
                embed(&mut coords, a.cos(), a.sin());
            }
            DiscreteMeasure::new(n, coords, vec![1.0 / count as f64; count])
        }
        Generator::LipschitzGraph { count, slope } => {
            if count == 0 {
                return Err(Error::Parameter("lipschitz_graph needs N >= 1".into()));
            }
            if !(slope > 0.0 && slope.is_finite()) {
                return Err(Error::Parameter(format!("slope bound must be positive, got {slope}")));
            }
            // f' = slope * (2 cos(2 pi t) + cos(6 pi t)) / 3, so |f'| <= slope
            let f = |t: f64| {
                slope * (2.0 * (2.0 * PI * t).sin() / (2.0 * PI) + (6.0 * PI * t).sin() / (6.0 * PI)) / 3.0
            };
            let pts: Vec<(f64, f64)> = (0..count)
                .map(|i| {
                    let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                    (t, f(t))
                })
                .collect();
            let mut coords = Vec::with_capacity(count * dim);
            for &(x, y) in &pts {
                embed(&mut coords, x, y);
            }
            let seg = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            let weights = if count == 1 {
                vec![1.0]
            } else {
                (0..count)
                    .map(|i| {
                        let left = if i > 0 { seg(pts[i - 1], pts[i]) } else { 0.0 };
                        let right = if i + 1 < count { seg(pts[i], pts[i + 1]) } else { 0.0 };
                        0.5 * (left + right)
                    })
                    .collect()
            };
            DiscreteMeasure::new(n, coords, weights)
        }
        Generator::Cantor4 { generations, ratio } => {
            if dim != 2 {
                return Err(Error::Dimension(format!("cantor4 lives in the plane, requested R^{dim}")));
            }
            if generations == 0 {
                return Err(Error::Parameter("cantor4 needs g >= 1".into()));
            }
            if !(ratio > 0.0 && ratio <= 0.5) {
                return Err(Error::Parameter(format!("cantor4 ratio must lie in (0, 1/2], got {ratio}")));
            }
            let mut centers = vec![(0.0f64, 0.0f64)];
            let mut side = 1.0f64;
            for _ in 0..generations {
                let offset = 0.5 * (side - side * ratio);
                let mut next = Vec::with_capacity(centers.len() * 4);
                for &(cx, cy) in &centers {
                    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                        next.push((cx + sx * offset, cy + sy * offset));
                    }
                }
                centers = next;
                side *= ratio;
            }
            let count = centers.len();
            let coords = centers.iter().flat_map(|&(x, y)| [x, y]).collect();
            DiscreteMeasure::new(n, coords, vec![0.25f64.powi(generations as i32); count])
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMeasure {
    n: usize,
    atoms: Vec<Vec<f64>>,
}

/// Loads a measure from CSV (`x_1,...,x_d,w` per row, no header) or, for a
/// `.json` path, from `{"n": .., "atoms": [[x.., w], ..]}`.
pub fn load_measure(path: &Path, n: usize) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_json(&text, Some(n))
    } else {
        parse_csv(&text, n)
    }
}

pub fn parse_json(text: &str, n: Option<usize>) -> Result<DiscreteMeasure> {
    let parsed: JsonMeasure = serde_json::from_str(text)?;
    if let Some(n) = n {
        if n != parsed.n {
            return Err(Error::Dimension(format!(
                "file declares n = {}, requested n = {n}",
                parsed.n
            )));
        }
    }
    let dim = parsed.n + 1;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (i, row) in parsed.atoms.iter().enumerate() {
        if row.len() != dim + 1 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("atom {i} has {} values, expected {}", row.len(), dim + 1),
            });
        }
        coords.extend_from_slice(&row[..dim]);
        weights.push(row[dim]);
    }
    validate_rows(&weights)?;
    DiscreteMeasure::new(parsed.n, coords, weights)
}

pub fn parse_csv(text: &str, n: usize) -> Result<DiscreteMeasure> {
    let dim = n + 1;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} ('{field}') is not a number", k + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("field {} is not finite", k + 1),
                });
            }
            if k < dim {
                coords.push(v);
            } else {
                if v <= 0.0 {
                    return Err(Error::Validation(format!("line {line}: weight {v} is not positive")));
                }
                weights.push(v);
            }
        }
    }
    if weights.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    DiscreteMeasure::new(n, coords, weights)
}

fn validate_rows(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::Validation(format!("atom {i}: weight {} is not positive", weights[i])));
    }
    Ok(())
}

/// CSV with 17 significant digits per value, one atom per line.
pub fn to_csv(mu: &DiscreteMeasure) -> String {
    let mut out = String::new();
    for i in 0..mu.len() {
        let mut fields: Vec<String> = mu.point(i).iter().map(|v| crate::fmt_f64(*v)).collect();
        fields.push(crate::fmt_f64(mu.weight(i)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json(mu: &DiscreteMeasure) -> serde_json::Value {
    let atoms: Vec<Vec<f64>> = (0..mu.len())
        .map(|i| {
            let mut row = mu.point(i).to_vec();
            row.push(mu.weight(i));
            row
        })
        .collect();
    serde_json::json!({ "n": mu.n(), "atoms": atoms })
}
