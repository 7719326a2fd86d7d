//! Gauss-Legendre tensor rules, Monte Carlo rules and relative L2 errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{ExactSolution, Solution};
use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::par;
use crate::randnet::derive_seed;

/// Largest tensor rule we are willing to build.
pub const MAX_TENSOR_NODES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    GaussLegendre { nodes_per_axis: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::GaussLegendre { nodes_per_axis: 20 }
    }
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("Gauss-Legendre rule needs n >= 1".into()));
    }
    if n == 1 {
        return Ok((vec![0.0], vec![2.0]));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// A weighted evaluation point with its owning subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadNode {
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub weight: f64,
    pub subdomain: usize,
}

impl QuadNode {
    pub fn input(&self) -> Vec<f64> {
        crate::sampling::network_input(&self.x, self.t)
    }
}

/// Box corners of the integration region: space, or space-time with `t` last.
fn integration_box(geom: &GeometrySpec) -> (Vec<f64>, Vec<f64>) {
    let mut lo = geom.domain().lo().to_vec();
    let mut hi = geom.domain().hi().to_vec();
    if let Some(horizon) = geom.time_horizon() {
        lo.push(0.0);
        hi.push(horizon);
    }
    (lo, hi)
}

fn make_node(geom: &GeometrySpec, mut coords: Vec<f64>, weight: f64, time: Option<f64>) -> Result<QuadNode> {
    let t = match time {
        Some(t) => Some(t),
        None if geom.is_space_time() => coords.pop(),
        None => None,
    };
    let subdomain = geom.classify_nudged(&coords, t)?;
    Ok(QuadNode { x: coords, t, weight, subdomain })
}

fn tensor_nodes(geom: &GeometrySpec, lo: &[f64], hi: &[f64], n: usize, time: Option<f64>) -> Result<Vec<QuadNode>> {
    let (xi, wi) = gauss_legendre_1d(n)?;
    let dim = lo.len();
    let total = n.checked_pow(dim as u32).filter(|&c| c <= MAX_TENSOR_NODES).ok_or_else(|| {
        Error::InvalidParameter(format!("{n}^{dim} tensor nodes is too many; use a Monte Carlo rule"))
    })?;
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    par::map_range(total, |idx| {
        let mut rest = idx;
        let mut coords = vec![0.0; dim];
        let mut weight = 1.0;
        // last axis varies fastest
        for k in (0..dim).rev() {
            let j = rest % n;
            rest /= n;
            coords[k] = lo[k] + half[k] * (xi[j] + 1.0);
            weight *= half[k] * wi[j];
        }
        make_node(geom, coords, weight, time)
    })
    .into_iter()
    .collect()
}

/// Integration nodes over the domain (times `(0, T)` for space-time problems).
pub fn quadrature_nodes(geom: &GeometrySpec, rule: &QuadratureRule) -> Result<Vec<QuadNode>> {
    let (lo, hi) = integration_box(geom);
    match *rule {
        QuadratureRule::GaussLegendre { nodes_per_axis } => tensor_nodes(geom, &lo, &hi, nodes_per_axis, None),
        QuadratureRule::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("Monte Carlo rule needs at least one sample".into()));
            }
            let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
            let weight = volume / samples as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x4D43]));
            let draws: Vec<Vec<f64>> = (0..samples)
                .map(|_| lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.gen::<f64>()).collect())
                .collect();
            draws.into_iter().map(|c| make_node(geom, c, weight, None)).collect()
        }
    }
}

/// Spatial tensor nodes on the slice `t = time` of a space-time problem.
pub fn slice_nodes(geom: &GeometrySpec, nodes_per_axis: usize, time: f64) -> Result<Vec<QuadNode>> {
    if !geom.is_space_time() {
        return Err(Error::NoTimeAxis);
    }
    let b = geom.domain();
    tensor_nodes(geom, b.lo(), b.hi(), nodes_per_axis, Some(time))
}

/// `sqrt(sum w (u - v)^2) / sqrt(sum w u^2)` with `u` exact, `v` approximate.
pub fn relative_l2(nodes: &[QuadNode], exact: &[f64], approx: &[f64]) -> Result<f64> {
    if exact.len() != nodes.len() {
        return Err(Error::DimensionMismatch { expected: nodes.len(), found: exact.len() });
    }
    if approx.len() != nodes.len() {
        return Err(Error::DimensionMismatch { expected: nodes.len(), found: approx.len() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((node, u), v) in nodes.iter().zip(exact).zip(approx) {
        num += node.weight * (u - v) * (u - v);
        den += node.weight * u * u;
    }
    finish(num, den)
}

/// Vector-field version: `exact[k][i]` is component `k` at node `i`.
pub fn relative_l2_vector(nodes: &[QuadNode], exact: &[Vec<f64>], approx: &[Vec<f64>]) -> Result<f64> {
    if exact.len() != approx.len() {
        return Err(Error::DimensionMismatch { expected: exact.len(), found: approx.len() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, v) in exact.iter().zip(approx) {
        if u.len() != nodes.len() || v.len() != nodes.len() {
            return Err(Error::DimensionMismatch { expected: nodes.len(), found: u.len().min(v.len()) });
        }
        for ((node, a), b) in nodes.iter().zip(u).zip(v) {
            num += node.weight * (a - b) * (a - b);
            den += node.weight * a * a;
        }
    }
    finish(num, den)
}

fn finish(num: f64, den: f64) -> Result<f64> {
    let den = den.sqrt();
    if !(den >= 1e-300) {
        return Err(Error::ZeroDenominator(den));
    }
    Ok(num.sqrt() / den)
}

/// Relative L2 error of a fitted solution against the exact one.
pub fn relative_l2_error(sol: &Solution, exact: &dyn ExactSolution, nodes: &[QuadNode]) -> Result<f64> {
    let u: Vec<f64> = nodes.iter().map(|n| exact.value(n.subdomain, &n.x, n.t)).collect();
    relative_l2(nodes, &u, &sol.eval_nodes(nodes)?)
}

/// Relative L2 error of the flux approximation against `p = beta grad u`.
pub fn relative_l2_error_flux(
    sol: &Solution,
    exact: &dyn ExactSolution,
    beta: &[f64],
    nodes: &[QuadNode],
) -> Result<f64> {
    let grads: Vec<Vec<f64>> = nodes.iter().map(|n| exact.gradient(n.subdomain, &n.x, n.t)).collect();
    let dim = grads.first().map_or(0, |g| g.len());
    let p: Vec<Vec<f64>> =
        (0..dim).map(|k| nodes.iter().zip(&grads).map(|(n, g)| beta[n.subdomain] * g[k]).collect()).collect();
    relative_l2_vector(nodes, &p, &sol.eval_flux_nodes(nodes)?)
}

/// Weighted sum of `f` over the nodes.
pub fn integrate(nodes: &[QuadNode], f: impl Fn(&QuadNode) -> f64) -> f64 {
    nodes.iter().map(|n| n.weight * f(n)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainBox, Interface, Trig};
    use proptest::prelude::*;

    fn plain(dim: usize) -> GeometrySpec {
        GeometrySpec::new(DomainBox::cube(dim, -1.0, 1.0).unwrap(), vec![], None).unwrap()
    }

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre_1d(1).unwrap();
        assert_eq!((x, w), (vec![0.0], vec![2.0]));
        let (x, w) = gauss_legendre_1d(2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre_1d(3).unwrap();
        let quartic: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((quartic - 0.4).abs() <= 1e-14);
        assert!(gauss_legendre_1d(0).is_err());
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=40 {
            let (_, w) = gauss_legendre_1d(n).unwrap();
            assert!((w.iter().sum::<f64>() - 2.0).abs() <= 1e-14, "n={n}");
        }
    }

    #[test]
    fn exact_up_to_degree_2n_minus_1() {
        for n in 1..=30 {
            let (x, w) = gauss_legendre_1d(n).unwrap();
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() <= 1e-13, "n={n} deg={deg} err={}", (q - exact).abs());
            }
        }
    }

    #[test]
    fn shifted_solution_error() {
        let g = plain(2);
        let nodes = quadrature_nodes(&g, &QuadratureRule::default()).unwrap();
        assert_eq!(nodes.len(), 400);
        let exact: Vec<f64> = nodes.iter().map(|n| n.x[0]).collect();
        let approx: Vec<f64> = exact.iter().map(|u| u + 0.1).collect();
        let e = relative_l2(&nodes, &exact, &approx).unwrap();
        assert!((e - 0.1 * 2.0 / (4.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert_eq!(relative_l2(&nodes, &exact, &exact).unwrap(), 0.0);
        assert!((relative_l2(&nodes, &exact, &vec![0.0; 400]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_l2(&nodes, &vec![0.0; 400], &exact), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn vector_error_offset() {
        let g = plain(2);
        let nodes = quadrature_nodes(&g, &QuadratureRule::default()).unwrap();
        let p: Vec<Vec<f64>> = vec![nodes.iter().map(|n| n.x[0]).collect(), nodes.iter().map(|n| n.x[1]).collect()];
        let shifted: Vec<Vec<f64>> = p.iter().map(|c| c.iter().map(|v| v + 0.1).collect()).collect();
        // sqrt(2 * 0.04) / sqrt(2 * 4/3)
        let e = relative_l2_vector(&nodes, &p, &shifted).unwrap();
        assert!((e - 0.1732050807568877).abs() < 1e-13);
        let zero = vec![vec![0.0; nodes.len()]; 2];
        assert!((relative_l2_vector(&nodes, &p, &zero).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nodes_carry_subdomains() {
        let c = 0.02 * 5f64.sqrt();
        let g = GeometrySpec::new(
            DomainBox::cube(2, -1.0, 1.0).unwrap(),
            vec![Interface::polar([c, c], 0.4, 0.2, 20.0, Trig::Sin)],
            None,
        )
        .unwrap();
        let nodes = quadrature_nodes(&g, &QuadratureRule::GaussLegendre { nodes_per_axis: 60 }).unwrap();
        let inner = integrate(&nodes.iter().filter(|n| n.subdomain == 0).cloned().collect::<Vec<_>>(), |_| 1.0);
        let area = std::f64::consts::PI * (0.16 + 0.02);
        assert!((inner - area).abs() < 0.05, "{inner} vs {area}");
        for n in &nodes {
            assert_eq!(g.classify_nudged(&n.x, None).unwrap(), n.subdomain);
        }
    }

    #[test]
    fn space_time_and_slices() {
        let g = GeometrySpec::new(
            DomainBox::cube(2, -1.0, 1.0).unwrap(),
            vec![Interface::moving_circle([0.0, 0.0], 0.5, 0.3)],
            Some(1.0),
        )
        .unwrap();
        let nodes = quadrature_nodes(&g, &QuadratureRule::GaussLegendre { nodes_per_axis: 8 }).unwrap();
        assert_eq!(nodes.len(), 512);
        assert!((integrate(&nodes, |_| 1.0) - 4.0).abs() < 1e-13);
        assert!((integrate(&nodes, |n| n.t.unwrap()) - 2.0).abs() < 1e-13);
        let slice = slice_nodes(&g, 20, 1.0).unwrap();
        assert_eq!(slice.len(), 400);
        for n in &slice {
            let inside = n.x[0].hypot(n.x[1]) < 0.8;
            assert_eq!(n.subdomain == 0, inside);
        }
        assert_eq!(slice_nodes(&plain(2), 4, 0.0), Err(Error::NoTimeAxis));
    }

    #[test]
    fn huge_tensor_rule_rejected() {
        let g = GeometrySpec::new(DomainBox::cube(20, 0.0, 1.0).unwrap(), vec![], None).unwrap();
        assert!(matches!(quadrature_nodes(&g, &QuadratureRule::default()), Err(Error::InvalidParameter(_))));
        let mc = quadrature_nodes(&g, &QuadratureRule::MonteCarlo { samples: 100, seed: 1 }).unwrap();
        assert_eq!(mc.len(), 100);
    }

    #[test]
    fn monte_carlo_is_unbiased() {
        // d = 3 integrand exp(x + y z) on (-1,1)^3, compared with a 20^3 tensor rule
        let g = plain(3);
        let f = |n: &QuadNode| (n.x[0] + n.x[1] * n.x[2]).exp();
        let gl = integrate(&quadrature_nodes(&g, &QuadratureRule::default()).unwrap(), f);
        let estimates: Vec<f64> = (0..32)
            .map(|seed| integrate(&quadrature_nodes(&g, &QuadratureRule::MonteCarlo { samples: 2000, seed }).unwrap(), f))
            .collect();
        let mean = estimates.iter().sum::<f64>() / 32.0;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 31.0;
        let sigma = (var / 32.0).sqrt();
        assert!((mean - gl).abs() <= 3.0 * sigma, "mean {mean} gl {gl} sigma {sigma}");
    }

    #[test]
    fn parallel_and_sequential_nodes_agree() {
        let g = plain(3);
        let a = quadrature_nodes(&g, &QuadratureRule::GaussLegendre { nodes_per_axis: 7 }).unwrap();
        let b = par::sequential(|| quadrature_nodes(&g, &QuadratureRule::GaussLegendre { nodes_per_axis: 7 }).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn tensor_rule_integrates_polynomials(n in 1usize..12, px in 0u32..6, py in 0u32..6) {
            prop_assume!(px < 2 * n as u32 && py < 2 * n as u32);
            let g = GeometrySpec::new(DomainBox::new(vec![0.0, -2.0], vec![1.0, 3.0]).unwrap(), vec![], None).unwrap();
            let nodes = quadrature_nodes(&g, &QuadratureRule::GaussLegendre { nodes_per_axis: n }).unwrap();
            let q = integrate(&nodes, |n| n.x[0].powi(px as i32) * n.x[1].powi(py as i32));
            let ix = 1.0 / (px as f64 + 1.0);
            let iy = (3f64.powi(py as i32 + 1) - (-2f64).powi(py as i32 + 1)) / (py as f64 + 1.0);
            prop_assert!((q - ix * iy).abs() <= 1e-11 * (ix * iy).abs().max(1.0));
        }
    }
}
