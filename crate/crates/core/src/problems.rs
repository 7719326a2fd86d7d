//! The six benchmark problems: geometries, exact solutions, derived data and
//! default discretisation settings.
//!
//! Source terms are written out in closed form. With `u` the exact piece on
//! subdomain `s`, the stationary source is `f = -beta_s * lap(u)` and the
//! parabolic one is `f = u_t - beta_s * lap(u)`. Jump data follow from the traces:
//! `g1 = u_in - u_out`, `g2 = beta_in grad(u_in).n - beta_out grad(u_out).n`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::{Bases, ExactSolution, FieldFn, InitialFn, InterfaceFn, ProblemDefinition};
use crate::error::{Error, Result};
use crate::geometry::{DomainBox, GeometrySpec, Interface, Trig};
use crate::quadrature::QuadratureRule;
use crate::randnet::{derive_seed, RandomFeatureNetwork};
use crate::sampling::{sample_collocation, split_initial, Region, SamplingPlan};

/// `(r_weight, r_bias)` for one network.
pub type InitRange = (f64, f64);

/// Everything a run needs besides the problem itself. All fields are overridable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSettings {
    pub m: usize,
    pub sampling: SamplingPlan,
    /// One range per subdomain for the solution networks.
    pub u_ranges: Vec<InitRange>,
    /// Flux networks of the mixed form, one range per subdomain.
    pub p_ranges: Vec<InitRange>,
    pub mixed: bool,
    pub trials: usize,
    pub error_rule: QuadratureRule,
}

impl ExampleSettings {
    pub fn n_points(&self) -> usize {
        self.sampling.total()
    }
}

#[derive(Clone)]
pub struct ExampleSpec {
    pub id: usize,
    pub title: &'static str,
    pub problem: ProblemDefinition,
    pub exact: Arc<dyn ExactSolution>,
    pub settings: ExampleSettings,
}

impl std::fmt::Debug for ExampleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExampleSpec")
            .field("id", &self.id)
            .field("title", &self.title)
            .field("problem", &self.problem)
            .field("settings", &self.settings)
            .finish()
    }
}

/// Choices that change the problem itself rather than its discretisation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleOptions {
    pub beta: Option<Vec<f64>>,
    /// Space dimension of the hyperplane example.
    pub dim: Option<usize>,
    /// Use the first-order (flux) formulation; two-dimensional stationary examples only.
    pub mixed: bool,
}

pub const EXAMPLE_IDS: [usize; 6] = [1, 2, 3, 4, 5, 6];

pub fn example(id: usize, opts: &ExampleOptions) -> Result<ExampleSpec> {
    let mut spec = match id {
        1 => flower(opts)?,
        2 => sphere(opts)?,
        3 => nested(opts)?,
        4 => hyperplane(opts)?,
        5 => heat(opts, false)?,
        6 => heat(opts, true)?,
        other => return Err(Error::UnknownExample(other)),
    };
    if opts.dim.is_some() && id != 4 {
        return Err(Error::InvalidParameter(format!("example {id} has a fixed dimension")));
    }
    if opts.mixed {
        if spec.problem.geom.dim() != 2 || spec.problem.geom.is_space_time() {
            return Err(Error::UnsupportedDimension(spec.problem.geom.dim()));
        }
        spec.settings.mixed = true;
        if id == 1 {
            spec.settings.u_ranges = vec![(1.0, 1.1); 2];
            spec.settings.p_ranges = vec![(0.7, 2.1); 2];
        }
    }
    Ok(spec)
}

fn beta_or(opts: &ExampleOptions, default: Vec<f64>) -> Result<Vec<f64>> {
    match &opts.beta {
        Some(b) if b.len() != default.len() => Err(Error::DimensionMismatch { expected: default.len(), found: b.len() }),
        Some(b) => Ok(b.clone()),
        None => Ok(default),
    }
}

fn ratio_plan(n: usize, weights: &[u64]) -> SamplingPlan {
    // weights: interior, one per interface, boundary
    let k = weights.len() - 2;
    let mut w = vec![(Region::Interior, weights[0])];
    w.extend((0..k).map(|i| (Region::Interface(i), weights[1 + i])));
    w.push((Region::Boundary, weights[k + 1]));
    SamplingPlan::from_ratios(n, w, 0)
}

/// Builds the problem with jump data derived from `exact`.
fn derived_problem(
    geom: GeometrySpec,
    beta: Vec<f64>,
    exact: Arc<dyn ExactSolution>,
    source: FieldFn,
) -> Result<ProblemDefinition> {
    let adj = geom.clone();
    let e = exact.clone();
    let jump: InterfaceFn = Arc::new(move |p| {
        let (inner, outer) = adj.adjacent(p.interface_label);
        e.value(inner, &p.x, p.t) - e.value(outer, &p.x, p.t)
    });
    let adj = geom.clone();
    let e = exact.clone();
    let b = beta.clone();
    let flux_jump: InterfaceFn = Arc::new(move |p| {
        let (inner, outer) = adj.adjacent(p.interface_label);
        let dn = |s: usize| e.gradient(s, &p.x, p.t).iter().zip(&p.normal).map(|(g, n)| g * n).sum::<f64>();
        b[inner] * dn(inner) - b[outer] * dn(outer)
    });
    let e = exact.clone();
    let dirichlet: FieldFn = Arc::new(move |s, x, t| e.value(s, x, t));
    let initial: Option<InitialFn> = if geom.is_space_time() {
        let e = exact.clone();
        Some(Arc::new(move |s, x| e.value(s, x, Some(0.0))))
    } else {
        None
    };
    Ok(ProblemDefinition::new(geom, beta, source, jump, flux_jump, dirichlet, initial)?.with_exact(exact))
}

fn square() -> DomainBox {
    DomainBox::cube(2, -1.0, 1.0).expect("valid box")
}

// ---------------------------------------------------------------- flower

/// `e^{xy} / beta_0` inside the flower, `sin x sin y / beta_1` outside.
#[derive(Debug, Clone)]
pub struct FlowerSolution {
    pub beta: [f64; 2],
}

impl ExactSolution for FlowerSolution {
    fn value(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        match s {
            0 => (x[0] * x[1]).exp() / self.beta[0],
            _ => x[0].sin() * x[1].sin() / self.beta[1],
        }
    }

    fn gradient(&self, s: usize, x: &[f64], _t: Option<f64>) -> Vec<f64> {
        let (a, b) = (x[0], x[1]);
        match s {
            0 => {
                let e = (a * b).exp() / self.beta[0];
                vec![b * e, a * e]
            }
            _ => vec![a.cos() * b.sin() / self.beta[1], a.sin() * b.cos() / self.beta[1]],
        }
    }

    fn laplacian(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        let (a, b) = (x[0], x[1]);
        match s {
            0 => (a * a + b * b) * (a * b).exp() / self.beta[0],
            _ => -2.0 * a.sin() * b.sin() / self.beta[1],
        }
    }
}

fn flower(opts: &ExampleOptions) -> Result<ExampleSpec> {
    let c = 0.02 * 5f64.sqrt();
    let geom = GeometrySpec::new(square(), vec![Interface::polar([c, c], 0.4, 0.2, 20.0, Trig::Sin)], None)?;
    let beta = beta_or(opts, vec![1.0, 10.0])?;
    let exact = Arc::new(FlowerSolution { beta: [beta[0], beta[1]] });
    // the 1/beta scaling cancels against -beta lap
    let source: FieldFn = Arc::new(|s, x, _| {
        let (a, b) = (x[0], x[1]);
        match s {
            0 => -(a * a + b * b) * (a * b).exp(),
            _ => 2.0 * a.sin() * b.sin(),
        }
    });
    Ok(ExampleSpec {
        id: 1,
        title: "flower-shaped interface",
        problem: derived_problem(geom, beta, exact.clone(), source)?,
        exact,
        settings: ExampleSettings {
            m: 320,
            sampling: ratio_plan(5000, &[3, 1, 1]),
            u_ranges: vec![(1.6, 0.7); 2],
            p_ranges: vec![(0.7, 2.1); 2],
            mixed: false,
            trials: 10,
            error_rule: QuadratureRule::default(),
        },
    })
}

// ---------------------------------------------------------------- sphere

/// `5 e^{|x|^2} + 20` inside the ball of radius 0.75, `10 (x + y + z)` outside.
#[derive(Debug, Clone)]
pub struct SphereSolution;

impl ExactSolution for SphereSolution {
    fn value(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        match s {
            0 => 5.0 * norm2(x).exp() + 20.0,
            _ => 10.0 * x.iter().sum::<f64>(),
        }
    }

    fn gradient(&self, s: usize, x: &[f64], _t: Option<f64>) -> Vec<f64> {
        match s {
            0 => {
                let e = norm2(x).exp();
                x.iter().map(|xi| 10.0 * xi * e).collect()
            }
            _ => vec![10.0; 3],
        }
    }

    fn laplacian(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        match s {
            // d/dx_i (10 x_i e^{r^2}) = (10 + 20 x_i^2) e^{r^2}, summed over three axes
            0 => (30.0 + 20.0 * norm2(x)) * norm2(x).exp(),
            _ => 0.0,
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn sphere(opts: &ExampleOptions) -> Result<ExampleSpec> {
    let geom =
        GeometrySpec::new(DomainBox::cube(3, -1.0, 1.0)?, vec![Interface::sphere(vec![0.0; 3], 0.75)], None)?;
    let beta = beta_or(opts, vec![1.0, 100.0])?;
    let b0 = beta[0];
    let source: FieldFn = Arc::new(move |s, x, _| match s {
        0 => -b0 * (30.0 + 20.0 * norm2(x)) * norm2(x).exp(),
        _ => 0.0,
    });
    let exact = Arc::new(SphereSolution);
    Ok(ExampleSpec {
        id: 2,
        title: "spherical interface in three dimensions",
        problem: derived_problem(geom, beta, exact.clone(), source)?,
        exact,
        settings: ExampleSettings {
            m: 640,
            sampling: ratio_plan(10_000, &[6, 1, 3]),
            u_ranges: vec![(2.54, 0.33); 2],
            p_ranges: Vec::new(),
            mixed: false,
            trials: 10,
            error_rule: QuadratureRule::default(),
        },
    })
}

// ---------------------------------------------------------------- nested

/// Four pieces separated by a circle, a five-petal curve and another circle.
#[derive(Debug, Clone)]
pub struct NestedSolution;

impl ExactSolution for NestedSolution {
    fn value(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        let (a, b) = (x[0], x[1]);
        match s {
            0 => b.cos() + 1.8,
            1 => a.exp() + 1.3,
            2 => a.sin() + 0.5,
            _ => -a + (b + 2.0).ln(),
        }
    }

    fn gradient(&self, s: usize, x: &[f64], _t: Option<f64>) -> Vec<f64> {
        let (a, b) = (x[0], x[1]);
        match s {
            0 => vec![0.0, -b.sin()],
            1 => vec![a.exp(), 0.0],
            2 => vec![a.cos(), 0.0],
            _ => vec![-1.0, 1.0 / (b + 2.0)],
        }
    }

    fn laplacian(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        let (a, b) = (x[0], x[1]);
        match s {
            0 => -b.cos(),
            1 => a.exp(),
            2 => -a.sin(),
            _ => -1.0 / ((b + 2.0) * (b + 2.0)),
        }
    }
}

fn nested(opts: &ExampleOptions) -> Result<ExampleSpec> {
    let geom = GeometrySpec::new(
        square(),
        vec![
            Interface::sphere(vec![0.0, 0.0], 0.2),
            Interface::polar([0.0, 0.0], 0.5, -0.1, 5.0, Trig::Cos),
            Interface::sphere(vec![0.0, 0.0], 0.8),
        ],
        None,
    )?;
    let beta = beta_or(opts, vec![1.0, 2.0, 3.0, 4.0])?;
    let b = beta.clone();
    let source: FieldFn = Arc::new(move |s, x, _| {
        let (a, y) = (x[0], x[1]);
        match s {
            0 => b[0] * y.cos(),
            1 => -b[1] * a.exp(),
            2 => b[2] * a.sin(),
            _ => b[3] / ((y + 2.0) * (y + 2.0)),
        }
    });
    let exact = Arc::new(NestedSolution);
    Ok(ExampleSpec {
        id: 3,
        title: "three nested interfaces",
        problem: derived_problem(geom, beta, exact.clone(), source)?,
        exact,
        settings: ExampleSettings {
            m: 320,
            sampling: ratio_plan(5000, &[6, 1, 1, 1, 1]),
            u_ranges: vec![(1.1, 1.1), (0.7, 0.7), (0.3, 0.3), (1.0, 1.0)],
            p_ranges: vec![(0.7, 2.1); 4],
            mixed: false,
            trials: 10,
            error_rule: QuadratureRule::default(),
        },
    })
}

// ---------------------------------------------------------------- hyperplane

/// `|x|^2 / d` for `x_1 < 0.5`, `sum(x) / d` beyond.
#[derive(Debug, Clone)]
pub struct HyperplaneSolution {
    pub dim: usize,
}

impl ExactSolution for HyperplaneSolution {
    fn value(&self, s: usize, x: &[f64], _t: Option<f64>) -> f64 {
        let d = self.dim as f64;
        match s {
            0 => norm2(x) / d,
            _ => x.iter().sum::<f64>() / d,
        }
    }

    fn gradient(&self, s: usize, x: &[f64], _t: Option<f64>) -> Vec<f64> {
        let d = self.dim as f64;
        match s {
            0 => x.iter().map(|v| 2.0 * v / d).collect(),
            _ => vec![1.0 / d; self.dim],
        }
    }

    fn laplacian(&self, s: usize, _x: &[f64], _t: Option<f64>) -> f64 {
        match s {
            0 => 2.0,
            _ => 0.0,
        }
    }
}

/// Dimension used by the hyperplane example unless overridden.
pub const DEFAULT_HYPERPLANE_DIM: usize = 5;

fn hyperplane(opts: &ExampleOptions) -> Result<ExampleSpec> {
    let dim = opts.dim.unwrap_or(DEFAULT_HYPERPLANE_DIM);
    if dim < 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let geom = GeometrySpec::new(DomainBox::cube(dim, 0.0, 1.0)?, vec![Interface::hyperplane(0, 0.5)], None)?;
    let beta = beta_or(opts, vec![1.0, 1.0])?;
    let b0 = beta[0];
    let source: FieldFn = Arc::new(move |s, _, _| if s == 0 { -2.0 * b0 } else { 0.0 });
    let exact = Arc::new(HyperplaneSolution { dim });
    let mut problem = derived_problem(geom, beta.clone(), exact.clone(), source)?;
    // on x_1 = 1/2 with n = e_1: beta_0 * 2 (1/2) / d - beta_1 / d
    let g2 = (beta[0] - beta[1]) / dim as f64;
    problem.flux_jump = Arc::new(move |_| g2);
    let sampling = SamplingPlan::absolute(
        vec![(Region::Interior, 1000), (Region::Interface(0), 10_000), (Region::Boundary, 200 * dim)],
        0,
    );
    Ok(ExampleSpec {
        id: 4,
        title: "hyperplane interface in high dimension",
        problem,
        exact,
        settings: ExampleSettings {
            m: 1800,
            sampling,
            u_ranges: vec![(0.01, 0.01); 2],
            p_ranges: Vec::new(),
            mixed: false,
            trials: 10,
            error_rule: QuadratureRule::MonteCarlo { samples: 10_000, seed: 0 },
        },
    })
}

// ---------------------------------------------------------------- heat

/// `-e^{-t} (8 |x|^2 - 3.5)` inside the circle, `e^{x - t} cos(pi y / 2)` outside.
#[derive(Debug, Clone)]
pub struct HeatSolution;

impl ExactSolution for HeatSolution {
    fn value(&self, s: usize, x: &[f64], t: Option<f64>) -> f64 {
        let t = t.unwrap_or(0.0);
        match s {
            0 => -(-t).exp() * (8.0 * norm2(x) - 3.5),
            _ => (x[0] - t).exp() * (0.5 * PI * x[1]).cos(),
        }
    }

    fn gradient(&self, s: usize, x: &[f64], t: Option<f64>) -> Vec<f64> {
        let t = t.unwrap_or(0.0);
        match s {
            0 => vec![-16.0 * (-t).exp() * x[0], -16.0 * (-t).exp() * x[1]],
            _ => {
                let e = (x[0] - t).exp();
                vec![e * (0.5 * PI * x[1]).cos(), -0.5 * PI * e * (0.5 * PI * x[1]).sin()]
            }
        }
    }

    fn laplacian(&self, s: usize, x: &[f64], t: Option<f64>) -> f64 {
        let t = t.unwrap_or(0.0);
        match s {
            0 => -32.0 * (-t).exp(),
            _ => (1.0 - 0.25 * PI * PI) * self.value(1, x, Some(t)),
        }
    }

    fn time_derivative(&self, s: usize, x: &[f64], t: Option<f64>) -> f64 {
        -self.value(s, x, t)
    }
}

fn heat(opts: &ExampleOptions, moving: bool) -> Result<ExampleSpec> {
    let iface =
        if moving { Interface::moving_circle([0.0, 0.0], 0.5, 0.3) } else { Interface::sphere(vec![0.0, 0.0], 0.5) };
    let geom = GeometrySpec::new(square(), vec![iface], Some(1.0))?;
    let beta = beta_or(opts, vec![1.0, 1.0])?;
    let b = beta.clone();
    let source: FieldFn = Arc::new(move |s, x, t| {
        let t = t.unwrap_or(0.0);
        match s {
            0 => (-t).exp() * (8.0 * norm2(x) - 3.5) + 32.0 * b[0] * (-t).exp(),
            _ => {
                let u = (x[0] - t).exp() * (0.5 * PI * x[1]).cos();
                -u - b[1] * (1.0 - 0.25 * PI * PI) * u
            }
        }
    });
    let exact = Arc::new(HeatSolution);
    let r = if moving { 1.0 } else { 0.6 };
    let base = ratio_plan(5000, &[14, 3, 3]);
    Ok(ExampleSpec {
        id: if moving { 6 } else { 5 },
        title: if moving { "parabolic problem with a moving interface" } else { "parabolic problem with a fixed interface" },
        problem: derived_problem(geom, beta, exact.clone(), source)?,
        exact,
        settings: ExampleSettings {
            m: 320,
            sampling: SamplingPlan::from_ratios(5000, split_initial(base.weights()), 0),
            u_ranges: vec![(r, r); 2],
            p_ranges: Vec::new(),
            mixed: false,
            trials: 10,
            error_rule: QuadratureRule::default(),
        },
    })
}

// ---------------------------------------------------------------- bases

const U_NET: u64 = 0x55;
const P_NET: u64 = 0x50;

/// Fresh random bases for one trial. Network seeds derive from `seed`, the
/// subdomain and the field, so trial `k` with seed `base + k` is reproducible.
pub fn build_bases(geom: &GeometrySpec, settings: &ExampleSettings, seed: u64) -> Result<Bases> {
    let n_sub = geom.n_subdomains();
    if settings.u_ranges.len() != n_sub {
        return Err(Error::DimensionMismatch { expected: n_sub, found: settings.u_ranges.len() });
    }
    let d_in = geom.dim() + usize::from(geom.is_space_time());
    let make = |tags: &[u64], (rw, rb): InitRange| -> Result<RandomFeatureNetwork> {
        let net = RandomFeatureNetwork::build(derive_seed(seed, tags), d_in, &[settings.m], rw, rb)?;
        Ok(if geom.is_space_time() { net.with_time_axis() } else { net })
    };
    let u = (0..n_sub).map(|s| make(&[U_NET, s as u64], settings.u_ranges[s])).collect::<Result<Vec<_>>>()?;
    if !settings.mixed {
        return Ok(Bases::strong(u));
    }
    if settings.p_ranges.len() != n_sub {
        return Err(Error::DimensionMismatch { expected: n_sub, found: settings.p_ranges.len() });
    }
    let p = (0..n_sub)
        .map(|s| (0..geom.dim()).map(|k| make(&[P_NET, s as u64, k as u64], settings.p_ranges[s])).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    Ok(Bases::mixed(u, p))
}

// ---------------------------------------------------------------- checks

/// Largest defect of the derived data against the exact solution's analytic
/// derivatives, at collocation points drawn with the example's own plan.
/// Each defect is measured relative to `max(1, |reference|)`.
pub fn consistency_defect(spec: &ExampleSpec, n_points: usize, seed: u64) -> Result<f64> {
    let prob = &spec.problem;
    let exact = &spec.exact;
    let plan = spec.settings.sampling.clone().with_total(n_points).with_seed(seed);
    let plan = if plan.is_absolute() {
        // keep the region mix, but cap the work
        SamplingPlan::from_ratios(n_points, plan.weights().to_vec(), seed)
    } else {
        plan
    };
    let pts = sample_collocation(&prob.geom, &plan)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for p in &pts.interior {
        let s = p.subdomain;
        let op = exact.time_derivative(s, &p.x, p.t) - prob.beta[s] * exact.laplacian(s, &p.x, p.t);
        worst = worst.max(rel((prob.source)(s, &p.x, p.t), op));
    }
    for p in &pts.interface_pts {
        let (inner, outer) = prob.geom.adjacent(p.interface_label);
        let jump = exact.value(inner, &p.x, p.t) - exact.value(outer, &p.x, p.t);
        let dn = |s: usize| exact.gradient(s, &p.x, p.t).iter().zip(&p.normal).map(|(g, n)| g * n).sum::<f64>();
        let flux = prob.beta[inner] * dn(inner) - prob.beta[outer] * dn(outer);
        worst = worst.max(rel((prob.jump)(p), jump)).max(rel((prob.flux_jump)(p), flux));
    }
    for p in &pts.boundary {
        worst = worst.max(rel((prob.dirichlet)(p.subdomain, &p.x, p.t), exact.value(p.subdomain, &p.x, p.t)));
    }
    if let Some(u0) = &prob.initial {
        for p in &pts.initial {
            worst = worst.max(rel(u0(p.subdomain, &p.x), exact.value(p.subdomain, &p.x, Some(0.0))));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all() -> Vec<ExampleSpec> {
        EXAMPLE_IDS.iter().map(|&id| example(id, &ExampleOptions::default()).unwrap()).collect()
    }

    #[test]
    fn unknown_ids() {
        assert!(matches!(example(0, &ExampleOptions::default()), Err(Error::UnknownExample(0))));
        assert!(matches!(example(7, &ExampleOptions::default()), Err(Error::UnknownExample(7))));
    }

    #[test]
    fn spot_values() {
        let e1 = example(1, &ExampleOptions::default()).unwrap();
        assert_eq!((e1.problem.source)(0, &[0.0, 0.0], None), 0.0);
        let e2 = example(2, &ExampleOptions::default()).unwrap();
        let g = e2.problem.geom.interfaces()[0].point_at(&[std::f64::consts::FRAC_PI_2, 0.0], None, 3);
        assert!((g.x[0] - 0.75).abs() < 1e-15);
        let expected = 5.0 * 0.5625f64.exp() + 20.0 - 7.5;
        assert!(((e2.problem.jump)(&g) - expected).abs() < 1e-12);
        let e5 = example(5, &ExampleOptions::default()).unwrap();
        assert_eq!((e5.problem.initial.as_ref().unwrap())(0, &[0.0, 0.0]), 3.5);
    }

    #[test]
    fn defaults() {
        let specs = all();
        let shape: Vec<(usize, usize, usize)> =
            specs.iter().map(|s| (s.id, s.settings.m, s.settings.n_points())).collect();
        assert_eq!(shape, vec![(1, 320, 5000), (2, 640, 10000), (3, 320, 5000), (4, 1800, 12000), (5, 320, 5000), (6, 320, 5000)]);
        assert_eq!(specs[0].settings.u_ranges, vec![(1.6, 0.7); 2]);
        assert_eq!(specs[0].problem.beta, vec![1.0, 10.0]);
        assert_eq!(specs[2].problem.beta, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(specs[3].settings.error_rule, QuadratureRule::MonteCarlo { samples: 10_000, seed: 0 });
        assert_eq!(specs[4].settings.u_ranges, vec![(0.6, 0.6); 2]);
        assert_eq!(specs[5].settings.u_ranges, vec![(1.0, 1.0); 2]);
        let mixed = example(1, &ExampleOptions { mixed: true, ..Default::default() }).unwrap();
        assert!(mixed.settings.mixed);
        assert_eq!(mixed.settings.p_ranges, vec![(0.7, 2.1); 2]);
        assert!(example(2, &ExampleOptions { mixed: true, ..Default::default() }).is_err());
        let d20 = example(4, &ExampleOptions { dim: Some(20), ..Default::default() }).unwrap();
        assert_eq!(d20.settings.n_points(), 1000 + 10_000 + 4000);
        assert!(example(1, &ExampleOptions { dim: Some(3), ..Default::default() }).is_err());
        assert!(example(1, &ExampleOptions { beta: Some(vec![1.0]), ..Default::default() }).is_err());
    }

    // fourth-order central differences
    fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
    }

    #[test]
    fn analytic_derivatives_match_fd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for spec in all() {
            let geom = &spec.problem.geom;
            let e = &spec.exact;
            let dim = geom.dim();
            for _ in 0..200 {
                let b = geom.domain();
                // keep stencils inside the box where log/exp pieces stay tame
                let x: Vec<f64> = (0..dim).map(|k| b.lo()[k] + 0.05 + (b.width(k) - 0.1) * rng.gen::<f64>()).collect();
                let t = geom.time_horizon().map(|h| h * rng.gen::<f64>());
                for s in 0..geom.n_subdomains() {
                    let grad = e.gradient(s, &x, t);
                    let mut lap = 0.0;
                    for k in 0..dim {
                        let along = |v: f64| {
                            let mut y = x.clone();
                            y[k] = v;
                            e.value(s, &y, t)
                        };
                        let g = d1(&along, x[k], 1e-3);
                        assert!((g - grad[k]).abs() <= 1e-7 * grad[k].abs().max(1.0), "ex{} s{s} k{k}", spec.id);
                        lap += d2(&along, x[k], 1e-2);
                    }
                    let l = e.laplacian(s, &x, t);
                    assert!((lap - l).abs() <= 1e-5 * l.abs().max(1.0), "ex{} s{s}: {lap} vs {l}", spec.id);
                    if let Some(t0) = t {
                        let in_time = |v: f64| e.value(s, &x, Some(v));
                        let ut = d1(&in_time, t0, 1e-3);
                        let a = e.time_derivative(s, &x, t);
                        assert!((ut - a).abs() <= 1e-7 * a.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn derived_data_is_consistent() {
        for spec in all() {
            let defect = consistency_defect(&spec, 1000, 4).unwrap();
            assert!(defect <= 1e-8, "example {} defect {defect}", spec.id);
        }
        let strong = example(3, &ExampleOptions { beta: Some(vec![1e-6, 1e-4, 1e-2, 1.0]), ..Default::default() }).unwrap();
        assert!(consistency_defect(&strong, 1000, 1).unwrap() <= 1e-8);
    }

    #[test]
    fn hyperplane_flux_closed_form() {
        let spec = example(4, &ExampleOptions { beta: Some(vec![3.0, 0.5]), dim: Some(7), ..Default::default() }).unwrap();
        let p = spec.problem.geom.interfaces()[0].point_at(&[0.3; 6], None, 7);
        let from_grad = 3.0 * spec.exact.gradient(0, &p.x, None)[0] - 0.5 * spec.exact.gradient(1, &p.x, None)[0];
        assert!(((spec.problem.flux_jump)(&p) - from_grad).abs() < 1e-15);
        assert!(((spec.problem.flux_jump)(&p) - 2.5 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn bases_follow_settings() {
        let spec = example(3, &ExampleOptions::default()).unwrap();
        let bases = build_bases(&spec.problem.geom, &spec.settings, 11).unwrap();
        assert_eq!(bases.u.len(), 4);
        assert_eq!(bases.u[2].init_ranges(), (0.3, 0.3));
        assert_eq!(bases, build_bases(&spec.problem.geom, &spec.settings, 11).unwrap());
        assert_ne!(bases, build_bases(&spec.problem.geom, &spec.settings, 12).unwrap());
        let heat = example(6, &ExampleOptions::default()).unwrap();
        let b = build_bases(&heat.problem.geom, &heat.settings, 0).unwrap();
        assert_eq!((b.u[0].d_in(), b.u[0].time_axis()), (3, Some(2)));
        let mixed = example(1, &ExampleOptions { mixed: true, ..Default::default() }).unwrap();
        let b = build_bases(&mixed.problem.geom, &mixed.settings, 0).unwrap();
        assert_eq!(b.n_columns(), 6 * 320);
    }
}
