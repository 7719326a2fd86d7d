//! Domains, interfaces and subdomain classification.
//!
//! Every interface is a signed level set `phi` with `phi < 0` on its inner
//! side. Interfaces in a [`GeometrySpec`] are ordered innermost to outermost,
//! so a point's subdomain index is the number of interfaces it lies outside
//! of. Interface `i` separates subdomain `i` (inner) from `i + 1` (outer).

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Absolute level-set tolerance for "on the interface".
pub const ON_INTERFACE_TOL: f64 = 1e-10;
/// Points closer than this to an interface cannot be classified.
pub const AMBIGUOUS_TOL: f64 = 1e-12;
/// Distance along the normal used to push quadrature or grid nodes off an interface.
pub const NUDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidGeometry(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidGeometry(format!("empty box {lo:?} x {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `(lo, hi)^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    /// Measure of either face orthogonal to `axis`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        (0..self.dim()).filter(|&k| k != axis).map(|k| self.width(k)).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Whether `x` has at least one coordinate pinned to a face.
    pub fn on_boundary(&self, x: &[f64]) -> bool {
        self.contains(x) && x.iter().zip(self.lo.iter().zip(&self.hi)).any(|(v, (l, h))| v == l || v == h)
    }
}

/// Radial profile of a polar curve: `base + amplitude * trig(frequency * theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterfaceKind {
    /// Star-shaped planar curve `|x - c| = r(theta)`.
    PolarCurve { center: [f64; 2], base: f64, amplitude: f64, frequency: f64, profile: Trig },
    /// Circle (2-D) or sphere (3-D).
    Sphere { center: Vec<f64>, radius: f64 },
    /// `x[axis] = offset`; the inner side is `x[axis] < offset`.
    Hyperplane { axis: usize, offset: f64 },
    /// Circle whose radius grows as `radius0 + rate * t`.
    MovingCircle { center: [f64; 2], radius0: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub kind: InterfaceKind,
    pub label: usize,
}

/// A point on an interface together with its unit spatial normal, which points
/// from the inner subdomain to the outer one.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePoint {
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub normal: Vec<f64>,
    pub interface_label: usize,
}

impl Interface {
    pub fn new(kind: InterfaceKind) -> Self {
        Self { kind, label: 0 }
    }

    pub fn polar(center: [f64; 2], base: f64, amplitude: f64, frequency: f64, profile: Trig) -> Self {
        Self::new(InterfaceKind::PolarCurve { center, base, amplitude, frequency, profile })
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Self {
        Self::new(InterfaceKind::Sphere { center, radius })
    }

    pub fn hyperplane(axis: usize, offset: f64) -> Self {
        Self::new(InterfaceKind::Hyperplane { axis, offset })
    }

    pub fn moving_circle(center: [f64; 2], radius0: f64, rate: f64) -> Self {
        Self::new(InterfaceKind::MovingCircle { center, radius0, rate })
    }

    pub fn is_moving(&self) -> bool {
        matches!(self.kind, InterfaceKind::MovingCircle { .. })
    }

    /// Spatial dimension the interface lives in, if fixed by its kind.
    fn native_dim(&self) -> Option<usize> {
        match &self.kind {
            InterfaceKind::PolarCurve { .. } | InterfaceKind::MovingCircle { .. } => Some(2),
            InterfaceKind::Sphere { center, .. } => Some(center.len()),
            InterfaceKind::Hyperplane { .. } => None,
        }
    }

    /// Radius of a polar curve at angle `theta` and its derivative in `theta`.
    fn polar_radius(base: f64, amplitude: f64, frequency: f64, profile: Trig, theta: f64) -> (f64, f64) {
        let arg = frequency * theta;
        match profile {
            Trig::Sin => (base + amplitude * arg.sin(), amplitude * frequency * arg.cos()),
            Trig::Cos => (base + amplitude * arg.cos(), -amplitude * frequency * arg.sin()),
        }
    }

    fn circle_radius(radius0: f64, rate: f64, t: Option<f64>) -> f64 {
        radius0 + rate * t.unwrap_or(0.0)
    }

    pub fn level_set(&self, x: &[f64], t: Option<f64>) -> f64 {
        match &self.kind {
            InterfaceKind::PolarCurve { center, base, amplitude, frequency, profile } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let (r, _) = Self::polar_radius(*base, *amplitude, *frequency, *profile, dy.atan2(dx));
                dx * dx + dy * dy - r * r
            }
            InterfaceKind::Sphere { center, radius } => {
                x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() - radius * radius
            }
            InterfaceKind::Hyperplane { axis, offset } => x[*axis] - offset,
            InterfaceKind::MovingCircle { center, radius0, rate } => {
                let r = Self::circle_radius(*radius0, *rate, t);
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                dx * dx + dy * dy - r * r
            }
        }
    }

    /// Spatial gradient of the level set.
    pub fn gradient(&self, x: &[f64], t: Option<f64>) -> Vec<f64> {
        match &self.kind {
            InterfaceKind::PolarCurve { center, base, amplitude, frequency, profile } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let rho2 = dx * dx + dy * dy;
                let (r, dr) = Self::polar_radius(*base, *amplitude, *frequency, *profile, dy.atan2(dx));
                // grad(theta) = (-dy, dx) / rho^2
                vec![2.0 * dx + 2.0 * r * dr * dy / rho2, 2.0 * dy - 2.0 * r * dr * dx / rho2]
            }
            InterfaceKind::Sphere { center, .. } => x.iter().zip(center).map(|(a, c)| 2.0 * (a - c)).collect(),
            InterfaceKind::Hyperplane { axis, .. } => {
                let mut g = vec![0.0; x.len()];
                g[*axis] = 1.0;
                g
            }
            InterfaceKind::MovingCircle { center, .. } => {
                let _ = t;
                vec![2.0 * (x[0] - center[0]), 2.0 * (x[1] - center[1])]
            }
        }
    }

    /// Unit spatial normal at a point on the interface, oriented inner to outer.
    pub fn normal(&self, x: &[f64], t: Option<f64>) -> Result<Vec<f64>> {
        let value = self.level_set(x, t);
        if value.abs() >= ON_INTERFACE_TOL {
            return Err(Error::NotOnInterface { point: x.to_vec(), label: self.label, value });
        }
        Ok(unit(self.gradient(x, t)))
    }

    /// Number of free parameters of [`Interface::point_at`].
    pub fn parameter_dim(&self, spatial_dim: usize) -> usize {
        match &self.kind {
            InterfaceKind::PolarCurve { .. } | InterfaceKind::MovingCircle { .. } => 1,
            InterfaceKind::Sphere { center, .. } => center.len() - 1,
            InterfaceKind::Hyperplane { .. } => spatial_dim - 1,
        }
    }

    /// Ranges of the interface parameters. Angles are in radians; hyperplane
    /// parameters are the remaining coordinates in axis order.
    pub fn parameter_bounds(&self, domain: &DomainBox) -> Vec<(f64, f64)> {
        match &self.kind {
            InterfaceKind::PolarCurve { .. } | InterfaceKind::MovingCircle { .. } => vec![(0.0, TAU)],
            InterfaceKind::Sphere { center, .. } => match center.len() {
                2 => vec![(0.0, TAU)],
                _ => vec![(0.0, PI), (0.0, TAU)],
            },
            InterfaceKind::Hyperplane { axis, .. } => (0..domain.dim())
                .filter(|k| k != axis)
                .map(|k| (domain.lo()[k], domain.hi()[k]))
                .collect(),
        }
    }

    /// Maps a parameter (see [`Interface::parameter_bounds`]) to a point with its normal.
    /// `t` positions moving interfaces; static interfaces just carry it along.
    pub fn point_at(&self, param: &[f64], t: Option<f64>, spatial_dim: usize) -> InterfacePoint {
        let x = match &self.kind {
            InterfaceKind::PolarCurve { center, base, amplitude, frequency, profile } => {
                let (r, _) = Self::polar_radius(*base, *amplitude, *frequency, *profile, param[0]);
                vec![center[0] + r * param[0].cos(), center[1] + r * param[0].sin()]
            }
            InterfaceKind::Sphere { center, radius } => {
                if center.len() == 2 {
                    vec![center[0] + radius * param[0].cos(), center[1] + radius * param[0].sin()]
                } else {
                    let (polar, azimuth) = (param[0], param[1]);
                    vec![
                        center[0] + radius * polar.sin() * azimuth.cos(),
                        center[1] + radius * polar.sin() * azimuth.sin(),
                        center[2] + radius * polar.cos(),
                    ]
                }
            }
            InterfaceKind::Hyperplane { axis, offset } => {
                let mut x = Vec::with_capacity(spatial_dim);
                let mut rest = param.iter();
                for k in 0..spatial_dim {
                    x.push(if k == *axis { *offset } else { *rest.next().expect("hyperplane parameter") });
                }
                x
            }
            InterfaceKind::MovingCircle { center, radius0, rate } => {
                let r = Self::circle_radius(*radius0, *rate, t);
                vec![center[0] + r * param[0].cos(), center[1] + r * param[0].sin()]
            }
        };
        let normal = unit(self.gradient(&x, t));
        InterfacePoint { x, t, normal, interface_label: self.label }
    }

    /// Surface-measure density of the parameterization at `param`.
    pub fn surface_density(&self, param: &[f64], t: Option<f64>) -> f64 {
        match &self.kind {
            InterfaceKind::PolarCurve { base, amplitude, frequency, profile, .. } => {
                let (r, dr) = Self::polar_radius(*base, *amplitude, *frequency, *profile, param[0]);
                (r * r + dr * dr).sqrt()
            }
            InterfaceKind::Sphere { center, radius } => {
                if center.len() == 2 {
                    *radius
                } else {
                    radius * radius * param[0].sin()
                }
            }
            InterfaceKind::Hyperplane { .. } => 1.0,
            InterfaceKind::MovingCircle { radius0, rate, .. } => Self::circle_radius(*radius0, *rate, t),
        }
    }

    /// Upper bound of [`Interface::surface_density`] over the parameter range and `t in [0, t_max]`.
    pub fn surface_density_bound(&self, t_max: f64) -> f64 {
        match &self.kind {
            InterfaceKind::PolarCurve { base, amplitude, frequency, .. } => {
                let r = base.abs() + amplitude.abs();
                let dr = amplitude.abs() * frequency.abs();
                (r * r + dr * dr).sqrt()
            }
            InterfaceKind::Sphere { center, radius } => {
                if center.len() == 2 {
                    *radius
                } else {
                    radius * radius
                }
            }
            InterfaceKind::Hyperplane { .. } => 1.0,
            InterfaceKind::MovingCircle { radius0, rate, .. } => radius0.abs() + rate.abs() * t_max,
        }
    }
}

pub(crate) fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    domain: DomainBox,
    interfaces: Vec<Interface>,
    time_horizon: Option<f64>,
}

impl GeometrySpec {
    /// Builds a geometry from interfaces listed innermost first. Labels are
    /// reassigned to list positions.
    pub fn new(domain: DomainBox, interfaces: Vec<Interface>, time_horizon: Option<f64>) -> Result<Self> {
        if let Some(t) = time_horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidGeometry(format!("time horizon {t}")));
            }
        }
        let interfaces: Vec<Interface> =
            interfaces.into_iter().enumerate().map(|(label, i)| Interface { label, ..i }).collect();
        let geom = Self { domain, interfaces, time_horizon };
        geom.validate()?;
        Ok(geom)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let t_max = self.time_horizon.unwrap_or(0.0);
        for iface in &self.interfaces {
            if let Some(nd) = iface.native_dim() {
                if nd != dim {
                    return Err(Error::InvalidGeometry(format!(
                        "interface {} is {nd}-dimensional in a {dim}-dimensional box",
                        iface.label
                    )));
                }
            }
            match &iface.kind {
                InterfaceKind::PolarCurve { frequency, .. } if frequency.fract() != 0.0 => {
                    return Err(Error::InvalidGeometry(format!("polar frequency {frequency} is not an integer")));
                }
                InterfaceKind::Sphere { center, radius } => {
                    if !(2..=3).contains(&center.len()) || *radius <= 0.0 {
                        return Err(Error::InvalidGeometry(format!(
                            "sphere of radius {radius} in dimension {}",
                            center.len()
                        )));
                    }
                }
                InterfaceKind::Hyperplane { axis, offset } => {
                    if *axis >= dim || *offset <= self.domain.lo()[*axis] || *offset >= self.domain.hi()[*axis] {
                        return Err(Error::InvalidGeometry(format!("hyperplane x{axis} = {offset} misses the box")));
                    }
                }
                InterfaceKind::MovingCircle { .. } if self.time_horizon.is_none() => {
                    return Err(Error::InvalidGeometry("moving interface without a time horizon".into()));
                }
                _ => {}
            }
        }

        // Dense sampling: positive radii, inside the box, strictly nested.
        const SAMPLES: usize = 2000;
        for (i, iface) in self.interfaces.iter().enumerate() {
            if let InterfaceKind::PolarCurve { base, amplitude, frequency, profile, .. } = &iface.kind {
                for k in 0..10 * SAMPLES {
                    let theta = TAU * k as f64 / (10 * SAMPLES) as f64;
                    if Interface::polar_radius(*base, *amplitude, *frequency, *profile, theta).0 <= 0.0 {
                        return Err(Error::InvalidGeometry(format!("polar radius of interface {i} vanishes")));
                    }
                }
            }
            if let InterfaceKind::MovingCircle { radius0, rate, .. } = &iface.kind {
                if radius0.min(radius0 + rate * t_max) <= 0.0 {
                    return Err(Error::InvalidGeometry(format!("moving radius of interface {i} vanishes")));
                }
            }
            let bounds = iface.parameter_bounds(&self.domain);
            let times: Vec<Option<f64>> = match self.time_horizon {
                Some(t) => (0..=4).map(|k| Some(t * k as f64 / 4.0)).collect(),
                None => vec![None],
            };
            for t in times {
                for k in 0..SAMPLES {
                    // low-discrepancy walk over the parameter box
                    let param: Vec<f64> = bounds
                        .iter()
                        .enumerate()
                        .map(|(j, (lo, hi))| {
                            let u = ((k as f64 + 0.5) * (0.618_033_988_749_895 + 0.414_213_562 * j as f64)).fract();
                            lo + (hi - lo) * u
                        })
                        .collect();
                    let p = iface.point_at(&param, t, dim);
                    if !self.domain.contains(&p.x) {
                        return Err(Error::InvalidGeometry(format!("interface {i} leaves the box at {:?}", p.x)));
                    }
                    if let Some(next) = self.interfaces.get(i + 1) {
                        if next.level_set(&p.x, t) >= 0.0 {
                            return Err(Error::InvalidGeometry(format!(
                                "interface {i} is not strictly inside interface {}",
                                i + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn time_horizon(&self) -> Option<f64> {
        self.time_horizon
    }

    pub fn is_space_time(&self) -> bool {
        self.time_horizon.is_some()
    }

    pub fn n_subdomains(&self) -> usize {
        self.interfaces.len() + 1
    }

    /// `(inner, outer)` subdomains separated by interface `label`.
    pub fn adjacent(&self, label: usize) -> (usize, usize) {
        (label, label + 1)
    }

    fn check_inside(&self, x: &[f64], t: Option<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let t_ok = match (self.time_horizon, t) {
            (Some(horizon), Some(t)) => (0.0..=horizon).contains(&t),
            (Some(_), None) => false,
            (None, _) => true,
        };
        if !t_ok || !self.domain.contains(x) {
            let mut p = x.to_vec();
            p.extend(t);
            return Err(Error::PointOutsideDomain(p));
        }
        Ok(())
    }

    /// Index of the subdomain containing `x` (at time `t` for space-time geometries).
    pub fn classify_point(&self, x: &[f64], t: Option<f64>) -> Result<usize> {
        self.check_inside(x, t)?;
        let mut index = 0;
        for iface in &self.interfaces {
            let phi = iface.level_set(x, t);
            if phi.abs() < AMBIGUOUS_TOL {
                return Err(Error::AmbiguousPoint { point: x.to_vec(), label: iface.label, tol: AMBIGUOUS_TOL });
            }
            if phi > 0.0 {
                index += 1;
            }
        }
        Ok(index)
    }

    /// Like [`GeometrySpec::classify_point`], but a point sitting on an interface is
    /// first moved [`NUDGE`] along the outward normal.
    pub fn classify_nudged(&self, x: &[f64], t: Option<f64>) -> Result<usize> {
        match self.classify_point(x, t) {
            Err(Error::AmbiguousPoint { label, .. }) => {
                let iface = &self.interfaces[label];
                let n = unit(iface.gradient(x, t));
                let moved: Vec<f64> = x.iter().zip(&n).map(|(a, b)| a + NUDGE * b).collect();
                self.classify_point(&moved, t)
            }
            other => other,
        }
    }

    /// Minimum absolute level-set value over all interfaces.
    pub fn min_abs_level_set(&self, x: &[f64], t: Option<f64>) -> f64 {
        self.interfaces.iter().map(|i| i.level_set(x, t).abs()).fold(f64::INFINITY, f64::min)
    }
}

pub fn interface_normal(iface: &Interface, x: &[f64], t: Option<f64>) -> Result<Vec<f64>> {
    iface.normal(x, t)
}
