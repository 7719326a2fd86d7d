//! Random collocation points on the interior, interfaces, boundary faces and
//! (for space-time problems) the initial slice.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{GeometrySpec, InterfacePoint};
use crate::randnet::derive_seed;

/// Interior points closer than this (in level-set value) to an interface are rejected.
pub const INTERIOR_REJECTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Interior,
    Interface(usize),
    Boundary,
    Initial,
}

impl Region {
    fn stream(self) -> u64 {
        match self {
            Region::Interior => 0,
            Region::Boundary => 1,
            Region::Initial => 2,
            Region::Interface(label) => 16 + label as u64,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Interior => write!(f, "interior"),
            Region::Interface(l) => write!(f, "interface{l}"),
            Region::Boundary => write!(f, "boundary"),
            Region::Initial => write!(f, "initial"),
        }
    }
}

/// How interface points are distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterfaceMeasure {
    /// Uniform in the curve/surface parameter (and in `t`).
    #[default]
    Parameter,
    /// Uniform in arclength / surface area, by rejection against the parameter Jacobian.
    Arclength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Allocation {
    /// Integer weights; counts follow the floor-then-remainder rule.
    Ratio,
    /// Weights are the counts themselves.
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    total: usize,
    weights: Vec<(Region, u64)>,
    allocation: Allocation,
    pub seed: u64,
    pub interface_measure: InterfaceMeasure,
}

impl SamplingPlan {
    /// `total` points split by integer `weights`, e.g. `3:1:1`.
    pub fn from_ratios(total: usize, weights: Vec<(Region, u64)>, seed: u64) -> Self {
        Self { total, weights, allocation: Allocation::Ratio, seed, interface_measure: InterfaceMeasure::Parameter }
    }

    /// Fixed per-region counts.
    pub fn absolute(counts: Vec<(Region, usize)>, seed: u64) -> Self {
        let total = counts.iter().map(|(_, c)| c).sum();
        Self {
            total,
            weights: counts.into_iter().map(|(r, c)| (r, c as u64)).collect(),
            allocation: Allocation::Absolute,
            seed,
            interface_measure: InterfaceMeasure::Parameter,
        }
    }

    pub fn with_interface_measure(mut self, measure: InterfaceMeasure) -> Self {
        self.interface_measure = measure;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn weights(&self) -> &[(Region, u64)] {
        &self.weights
    }

    pub fn is_absolute(&self) -> bool {
        self.allocation == Allocation::Absolute
    }

    pub fn fractions(&self) -> Vec<(Region, f64)> {
        let sum: u64 = self.weights.iter().map(|(_, w)| w).sum();
        self.weights.iter().map(|(r, w)| (*r, *w as f64 / sum as f64)).collect()
    }

    /// Same plan with a different total (ratio plans only).
    pub fn with_total(mut self, total: usize) -> Self {
        if self.allocation == Allocation::Ratio {
            self.total = total;
        }
        self
    }
}

/// Turns a `interior : interface.. : boundary` ratio into a space-time one whose
/// boundary share is split 4:1 between the lateral boundary and the initial slice.
pub fn split_initial(weights: &[(Region, u64)]) -> Vec<(Region, u64)> {
    let mut out = Vec::with_capacity(weights.len() + 1);
    for &(region, w) in weights {
        match region {
            Region::Boundary => {
                out.push((Region::Boundary, 4 * w));
                out.push((Region::Initial, w));
            }
            other => out.push((other, 5 * w)),
        }
    }
    out
}

/// Per-region counts: `floor(N w_r / W)` each, leftover to the interior, and at
/// least one point in every region with positive weight.
pub fn stratified_counts(plan: &SamplingPlan) -> Result<Vec<(Region, usize)>> {
    if plan.total == 0 {
        return Err(Error::InfeasiblePlan("no points requested".into()));
    }
    if plan.allocation == Allocation::Absolute {
        return Ok(plan.weights.iter().map(|(r, w)| (*r, *w as usize)).collect());
    }
    let sum: u64 = plan.weights.iter().map(|(_, w)| w).sum();
    if sum == 0 {
        return Err(Error::InfeasiblePlan("all region weights are zero".into()));
    }
    let interior = plan
        .weights
        .iter()
        .position(|(r, _)| *r == Region::Interior)
        .ok_or_else(|| Error::InfeasiblePlan("plan has no interior region".into()))?;
    let n = plan.total as u128;
    let mut counts: Vec<(Region, usize)> =
        plan.weights.iter().map(|(r, w)| (*r, (n * *w as u128 / sum as u128) as usize)).collect();
    let assigned: usize = counts.iter().map(|(_, c)| c).sum();
    counts[interior].1 += plan.total - assigned;
    for i in 0..counts.len() {
        if plan.weights[i].1 > 0 && counts[i].1 == 0 {
            if counts[interior].1 <= 1 {
                return Err(Error::InfeasiblePlan(format!("{} points cannot cover every region", plan.total)));
            }
            counts[interior].1 -= 1;
            counts[i].1 = 1;
        }
    }
    Ok(counts)
}

/// A collocation point tagged with the subdomain that owns it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPoint {
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub subdomain: usize,
}

impl TaggedPoint {
    /// Network input: the spatial coordinates followed by `t` when present.
    pub fn input(&self) -> Vec<f64> {
        network_input(&self.x, self.t)
    }
}

pub fn network_input(x: &[f64], t: Option<f64>) -> Vec<f64> {
    let mut v = x.to_vec();
    v.extend(t);
    v
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<TaggedPoint>,
    pub interface_pts: Vec<InterfacePoint>,
    pub boundary: Vec<TaggedPoint>,
    pub initial: Vec<TaggedPoint>,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.interior.len() + self.interface_pts.len() + self.boundary.len() + self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn region_rng(plan: &SamplingPlan, region: Region) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, &[0x5A4D_504C, region.stream()]))
}

fn uniform_box(geom: &GeometrySpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = geom.domain();
    (0..b.dim()).map(|k| b.lo()[k] + b.width(k) * rng.gen::<f64>()).collect()
}

fn uniform_time(geom: &GeometrySpec, rng: &mut ChaCha8Rng) -> Option<f64> {
    geom.time_horizon().map(|horizon| horizon * rng.gen::<f64>())
}

fn sample_interior(geom: &GeometrySpec, n: usize, rng: &mut ChaCha8Rng, initial: bool) -> Vec<TaggedPoint> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = uniform_box(geom, rng);
        let t = if initial { Some(0.0) } else { uniform_time(geom, rng) };
        if geom.min_abs_level_set(&x, t) < INTERIOR_REJECTION {
            continue;
        }
        if let Ok(subdomain) = geom.classify_point(&x, t) {
            out.push(TaggedPoint { x, t, subdomain });
        }
    }
    out
}

fn sample_interface(
    geom: &GeometrySpec,
    label: usize,
    n: usize,
    measure: InterfaceMeasure,
    rng: &mut ChaCha8Rng,
) -> Vec<InterfacePoint> {
    let iface = &geom.interfaces()[label];
    let bounds = iface.parameter_bounds(geom.domain());
    let density_bound = iface.surface_density_bound(geom.time_horizon().unwrap_or(0.0));
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let param: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect();
        let t = uniform_time(geom, rng);
        if measure == InterfaceMeasure::Arclength
            && rng.gen::<f64>() * density_bound > iface.surface_density(&param, t)
        {
            continue;
        }
        out.push(iface.point_at(&param, t, geom.dim()));
    }
    out
}

fn sample_boundary(geom: &GeometrySpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<TaggedPoint> {
    let b = geom.domain();
    let d = b.dim();
    let measures: Vec<f64> = (0..d).map(|k| b.face_measure(k)).collect();
    let total: f64 = 2.0 * measures.iter().sum::<f64>();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // pick a face with probability proportional to its measure
        let mut pick = rng.gen::<f64>() * total;
        let mut face = (d - 1, 1);
        'outer: for (axis, m) in measures.iter().enumerate() {
            for side in 0..2 {
                if pick < *m {
                    face = (axis, side);
                    break 'outer;
                }
                pick -= m;
            }
        }
        let mut x = uniform_box(geom, rng);
        x[face.0] = if face.1 == 0 { b.lo()[face.0] } else { b.hi()[face.0] };
        let t = uniform_time(geom, rng);
        if let Ok(subdomain) = geom.classify_point(&x, t) {
            out.push(TaggedPoint { x, t, subdomain });
        }
    }
    out
}

/// Draws the collocation set for `plan`. Every region has its own random stream
/// derived from `plan.seed`, so regions are independent and reproducible.
pub fn sample_collocation(geom: &GeometrySpec, plan: &SamplingPlan) -> Result<CollocationSet> {
    let counts = stratified_counts(plan)?;
    for label in 0..geom.interfaces().len() {
        if !counts.iter().any(|(r, _)| *r == Region::Interface(label)) {
            return Err(Error::InfeasiblePlan(format!("no sampling share for interface {label}")));
        }
    }
    let mut set = CollocationSet::default();
    for (region, n) in counts {
        let mut rng = region_rng(plan, region);
        match region {
            Region::Interior => set.interior.extend(sample_interior(geom, n, &mut rng, false)),
            Region::Interface(label) => {
                if label >= geom.interfaces().len() {
                    return Err(Error::InfeasiblePlan(format!("interface {label} does not exist")));
                }
                set.interface_pts.extend(sample_interface(geom, label, n, plan.interface_measure, &mut rng));
            }
            Region::Boundary => set.boundary.extend(sample_boundary(geom, n, &mut rng)),
            Region::Initial => {
                if !geom.is_space_time() {
                    return Err(Error::InfeasiblePlan("initial points requested for a stationary problem".into()));
                }
                set.initial.extend(sample_interior(geom, n, &mut rng, true));
            }
        }
    }
    Ok(set)
}
