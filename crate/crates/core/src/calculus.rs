//! Finite-difference derivatives of the basis functions.
//!
//! Each operator shifts the whole point set along one axis and re-evaluates
//! the basis, so one call differentiates all `m` basis functions at once.
//! Central stencils are used everywhere, including next to the box boundary.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::randnet::{shifted, RandomFeatureNetwork};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Step for first derivatives.
    pub h1: f64,
    /// Step for second derivatives.
    pub h2: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { h1: 1e-6, h2: 5e-4 }
    }
}

impl FdConfig {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(Error::InvalidParameter(format!("finite-difference steps ({h1}, {h2})")));
        }
        Ok(Self { h1, h2 })
    }
}

fn check_axis(net: &RandomFeatureNetwork, axis: usize, points: &ArrayView2<f64>) -> Result<()> {
    if points.ncols() != net.d_in() {
        return Err(Error::DimensionMismatch { expected: net.d_in(), found: points.ncols() });
    }
    if axis >= net.d_in() {
        return Err(Error::DimensionMismatch { expected: net.d_in(), found: axis + 1 });
    }
    Ok(())
}

/// `(psi(x + h e_k) - psi(x - h e_k)) / 2h` with `h = cfg.h1`.
pub fn fd_partial(net: &RandomFeatureNetwork, axis: usize, points: ArrayView2<f64>, cfg: &FdConfig) -> Result<Array2<f64>> {
    check_axis(net, axis, &points)?;
    let h = cfg.h1;
    let plus = net.eval_basis(shifted(points, axis, h).view())?;
    let minus = net.eval_basis(shifted(points, axis, -h).view())?;
    let inv = 1.0 / (2.0 * h);
    Ok(Zip::from(&plus).and(&minus).map_collect(|p, m| (p - m) * inv))
}

fn second_difference(
    net: &RandomFeatureNetwork,
    axis: usize,
    points: ArrayView2<f64>,
    center: &Array2<f64>,
    h: f64,
) -> Result<Array2<f64>> {
    let plus = net.eval_basis(shifted(points, axis, h).view())?;
    let minus = net.eval_basis(shifted(points, axis, -h).view())?;
    let inv = 1.0 / (h * h);
    Ok(Zip::from(&plus).and(center).and(&minus).map_collect(|p, c, m| (p - 2.0 * c + m) * inv))
}

/// `(psi(x + h e_k) - 2 psi(x) + psi(x - h e_k)) / h^2` with `h = cfg.h2`.
pub fn fd_second_partial(
    net: &RandomFeatureNetwork,
    axis: usize,
    points: ArrayView2<f64>,
    cfg: &FdConfig,
) -> Result<Array2<f64>> {
    check_axis(net, axis, &points)?;
    let center = net.eval_basis(points)?;
    second_difference(net, axis, points, &center, cfg.h2)
}

/// Sum of [`fd_second_partial`] over `axes`, sharing the centre evaluation.
pub fn fd_laplacian(
    net: &RandomFeatureNetwork,
    points: ArrayView2<f64>,
    cfg: &FdConfig,
    axes: &[usize],
) -> Result<Array2<f64>> {
    for &axis in axes {
        check_axis(net, axis, &points)?;
    }
    let center = net.eval_basis(points)?;
    let mut lap = Array2::<f64>::zeros(center.dim());
    for &axis in axes {
        lap += &second_difference(net, axis, points, &center, cfg.h2)?;
    }
    Ok(lap)
}

/// First derivative along the network's time axis (the last input), step `h1`.
pub fn fd_time_partial(net: &RandomFeatureNetwork, points: ArrayView2<f64>, cfg: &FdConfig) -> Result<Array2<f64>> {
    let axis = net.time_axis().ok_or(Error::NoTimeAxis)?;
    fd_partial(net, axis, points, cfg)
}

/// Exact derivatives of a single-hidden-layer tanh basis.
#[derive(Debug, Clone)]
pub struct AnalyticDerivatives {
    pub values: Array2<f64>,
    /// `gradient[k][[i, j]] = d psi_j / d x_k at x_i`
    pub gradient: Vec<Array2<f64>>,
    /// `hessian_diag[k][[i, j]] = d^2 psi_j / d x_k^2 at x_i`
    pub hessian_diag: Vec<Array2<f64>>,
}

impl AnalyticDerivatives {
    pub fn laplacian(&self, axes: &[usize]) -> Array2<f64> {
        let mut lap = Array2::zeros(self.values.dim());
        for &k in axes {
            lap += &self.hessian_diag[k];
        }
        lap
    }
}

/// Chain-rule derivatives: with `s = tanh(w . x + b)`, `ds/dx_k = (1 - s^2) w_k`
/// and `d^2 s/dx_k^2 = -2 s (1 - s^2) w_k^2`.
pub fn analytic_derivatives(net: &RandomFeatureNetwork, points: ArrayView2<f64>) -> Result<AnalyticDerivatives> {
    if net.layers().len() != 1 {
        return Err(Error::UnsupportedDepth(net.layers().len()));
    }
    let values = net.eval_basis(points)?;
    let weights = &net.layers()[0].weights;
    let slope = values.mapv(|s| 1.0 - s * s);
    let curvature = Zip::from(&values).and(&slope).map_collect(|s, d| -2.0 * s * d);
    let mut gradient = Vec::with_capacity(net.d_in());
    let mut hessian_diag = Vec::with_capacity(net.d_in());
    for k in 0..net.d_in() {
        let w = weights.column(k);
        let mut g = slope.clone();
        let mut h = curvature.clone();
        for (mut gr, mut hr) in g.rows_mut().into_iter().zip(h.rows_mut()) {
            gr.zip_mut_with(&w, |a, wk| *a *= wk);
            hr.zip_mut_with(&w, |a, wk| *a *= wk * wk);
        }
        gradient.push(g);
        hessian_diag.push(h);
    }
    Ok(AnalyticDerivatives { values, gradient, hessian_diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randnet::HiddenLayer;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_net(w: [f64; 2], b: f64) -> RandomFeatureNetwork {
        RandomFeatureNetwork::from_layers(vec![HiddenLayer { weights: array![[w[0], w[1]]], bias: array![b] }]).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_basis_has_zero_derivatives() {
        let net = RandomFeatureNetwork::build(1, 2, &[6], 0.0, 0.9).unwrap();
        let pts = array![[0.3, -0.4], [0.9, 0.1]];
        let cfg = FdConfig::default();
        assert!(fd_partial(&net, 0, pts.view(), &cfg).unwrap().iter().all(|v| *v == 0.0));
        assert!(fd_second_partial(&net, 1, pts.view(), &cfg).unwrap().iter().all(|v| *v == 0.0));
        assert!(fd_laplacian(&net, pts.view(), &cfg, &[0, 1]).unwrap().iter().all(|v| *v == 0.0));
        let exact = analytic_derivatives(&net, pts.view()).unwrap();
        assert!(exact.gradient.iter().all(|g| g.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_unit_first_derivative_at_origin() {
        for c in [0.5, 1.0, 2.5] {
            let net = unit_net([c, 0.0], 0.0);
            let d = fd_partial(&net, 0, array![[0.0, 0.0]].view(), &FdConfig::default()).unwrap();
            assert_abs_diff_eq!(d[[0, 0]], c, epsilon = 1e-6);
            let dy = fd_partial(&net, 1, array![[0.3, 0.2]].view(), &FdConfig::default()).unwrap();
            assert_abs_diff_eq!(dy[[0, 0]], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_unit_second_derivative_at_origin() {
        let net = unit_net([1.0, 0.0], 0.0);
        let d2 = fd_second_partial(&net, 0, array![[0.0, 0.0]].view(), &FdConfig::default()).unwrap();
        assert!(d2[[0, 0]].abs() <= 1e-7);
    }

    #[test]
    fn fd_matches_analytic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = FdConfig::default();
        for d in [2usize, 3] {
            let net = RandomFeatureNetwork::build(rng.gen(), d, &[100], 3.0, 1.0).unwrap();
            let pts = random_points(&mut rng, 100, d);
            let exact = analytic_derivatives(&net, pts.view()).unwrap();
            let weights = &net.layers()[0].weights;
            for k in 0..d {
                let g = fd_partial(&net, k, pts.view(), &cfg).unwrap();
                let h = fd_second_partial(&net, k, pts.view(), &cfg).unwrap();
                let gerr = (&g - &exact.gradient[k]).mapv(f64::abs).fold(0.0f64, |a, b| a.max(*b));
                assert!(gerr <= 1e-6, "gradient error {gerr:e}");
                // Lagrange remainder of the second difference is h^2/12 w^4 tanh''''(xi)
                // with max |tanh''''| = 4.0859, plus a rounding allowance.
                for ((i, j), err) in (&h - &exact.hessian_diag[k]).indexed_iter() {
                    let bound = cfg.h2 * cfg.h2 / 12.0 * weights[[j, k]].powi(4) * 4.0859 + 1e-8;
                    assert!(err.abs() <= bound, "point {i} unit {j}: {err:e} > {bound:e}");
                }
            }
        }
    }

    #[test]
    fn laplacian_is_sum_of_second_partials() {
        let net = RandomFeatureNetwork::build(5, 3, &[30], 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 50, 3);
        let cfg = FdConfig::default();
        let lap = fd_laplacian(&net, pts.view(), &cfg, &[0, 1, 2]).unwrap();
        let mut sum = Array2::<f64>::zeros(lap.dim());
        for k in 0..3 {
            sum += &fd_second_partial(&net, k, pts.view(), &cfg).unwrap();
        }
        assert_eq!(lap, sum);
    }

    #[test]
    fn sphere_basis_laplacian_matches_oracle() {
        let net = RandomFeatureNetwork::build(8, 3, &[640], 2.54, 0.33).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points(&mut rng, 200, 3);
        let lap = fd_laplacian(&net, pts.view(), &FdConfig::default(), &[0, 1, 2]).unwrap();
        let exact = analytic_derivatives(&net, pts.view()).unwrap().laplacian(&[0, 1, 2]);
        let err = (&lap - &exact).mapv(f64::abs).fold(0.0f64, |a, b| a.max(*b));
        assert!(err <= 1e-5, "laplacian error {err:e}");
    }

    #[test]
    fn time_partial_uses_last_axis() {
        let net = RandomFeatureNetwork::build(3, 3, &[20], 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(&mut rng, 30, 3);
        let cfg = FdConfig::default();
        assert!(matches!(fd_time_partial(&net, pts.view(), &cfg), Err(Error::NoTimeAxis)));
        let net = net.with_time_axis();
        let dt = fd_time_partial(&net, pts.view(), &cfg).unwrap();
        assert_eq!(dt, fd_partial(&net, 2, pts.view(), &cfg).unwrap());
        let exact = analytic_derivatives(&net, pts.view()).unwrap();
        let err = (&dt - &exact.gradient[2]).mapv(f64::abs).fold(0.0f64, |a, b| a.max(*b));
        assert!(err <= 1e-6);

        // no weight on the time input: derivative vanishes
        let mut layer = net.layers()[0].clone();
        layer.weights.column_mut(2).fill(0.0);
        let frozen = RandomFeatureNetwork::from_layers(vec![layer]).unwrap().with_time_axis();
        assert!(fd_time_partial(&frozen, pts.view(), &cfg).unwrap().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn operators_are_linear_in_coefficients() {
        let net = RandomFeatureNetwork::build(13, 2, &[25], 1.6, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = random_points(&mut rng, 20, 2);
        let cfg = FdConfig::default();
        let alpha = Array1::from_shape_simple_fn(25, || rng.gen_range(-1.0..1.0));
        // laplacian of u = sum alpha_j psi_j evaluated pointwise through shifted solutions
        let lap = fd_laplacian(&net, pts.view(), &cfg, &[0, 1]).unwrap().dot(&alpha);
        let h = cfg.h2;
        for i in 0..pts.nrows() {
            let x = pts.row(i);
            let u = |dx: f64, dy: f64| {
                let p = array![[x[0] + dx, x[1] + dy]];
                net.eval_solution(alpha.view(), p.view()).unwrap()[0]
            };
            let direct = (u(h, 0.0) - 2.0 * u(0.0, 0.0) + u(-h, 0.0)) / (h * h)
                + (u(0.0, h) - 2.0 * u(0.0, 0.0) + u(0.0, -h)) / (h * h);
            assert_abs_diff_eq!(lap[i], direct, epsilon = 1e-6);
        }
    }

    #[test]
    fn errors() {
        let net = RandomFeatureNetwork::build(3, 2, &[4], 1.0, 1.0).unwrap();
        let pts = array![[0.0, 0.0]];
        assert!(matches!(fd_partial(&net, 2, pts.view(), &FdConfig::default()), Err(Error::DimensionMismatch { .. })));
        let deep = RandomFeatureNetwork::build(3, 2, &[4, 4], 1.0, 1.0).unwrap();
        assert!(matches!(analytic_derivatives(&deep, pts.view()), Err(Error::UnsupportedDepth(2))));
        assert!(FdConfig::new(0.0, 1e-3).is_err());
    }
}
