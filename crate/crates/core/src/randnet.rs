//! Randomized networks: hidden weights drawn once from a seeded stream and
//! frozen, so the last hidden layer is a fixed basis `psi_1..psi_m`.

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

/// Rows evaluated per work item.
const ROW_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    /// `n_out x n_in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Mixes `tags` into `base` with SplitMix64 so that every (subdomain, field)
/// pair gets its own independent generator seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureNetwork {
    d_in: usize,
    layers: Vec<HiddenLayer>,
    activation: Activation,
    r_weight: f64,
    r_bias: f64,
    seed: u64,
    time_axis: bool,
}

impl RandomFeatureNetwork {
    /// Draws weights from `U(-r_weight, r_weight)` and biases from `U(-r_bias, r_bias)`.
    /// Layer `l` uses ChaCha stream `l` of `seed`, so appending layers leaves
    /// earlier ones untouched.
    pub fn build(seed: u64, d_in: usize, hidden_widths: &[usize], r_weight: f64, r_bias: f64) -> Result<Self> {
        if d_in == 0 || hidden_widths.is_empty() || hidden_widths.contains(&0) {
            return Err(Error::InvalidShape(format!("d_in = {d_in}, hidden widths {hidden_widths:?}")));
        }
        if !(r_weight >= 0.0 && r_bias >= 0.0 && r_weight.is_finite() && r_bias.is_finite()) {
            return Err(Error::InvalidShape(format!("init ranges ({r_weight}, {r_bias})")));
        }
        let mut layers = Vec::with_capacity(hidden_widths.len());
        let mut n_in = d_in;
        for (l, &n_out) in hidden_widths.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64);
            let mut draw = |r: f64| r * (2.0 * rng.gen::<f64>() - 1.0);
            let weights = Array2::from_shape_simple_fn((n_out, n_in), || draw(r_weight));
            let bias = Array1::from_shape_simple_fn(n_out, || draw(r_bias));
            layers.push(HiddenLayer { weights, bias });
            n_in = n_out;
        }
        Ok(Self { d_in, layers, activation: Activation::Tanh, r_weight, r_bias, seed, time_axis: false })
    }

    /// Network with explicit layers; used for hand-built test bases.
    pub fn from_layers(layers: Vec<HiddenLayer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::InvalidShape("no hidden layers".into()))?;
        let d_in = first.weights.ncols();
        let mut n_in = d_in;
        for layer in &layers {
            if layer.weights.ncols() != n_in || layer.bias.len() != layer.weights.nrows() {
                return Err(Error::InvalidShape("inconsistent layer shapes".into()));
            }
            n_in = layer.weights.nrows();
        }
        Ok(Self { d_in, layers, activation: Activation::Tanh, r_weight: f64::NAN, r_bias: f64::NAN, seed: 0, time_axis: false })
    }

    /// Marks the last input coordinate as time.
    pub fn with_time_axis(mut self) -> Self {
        self.time_axis = true;
        self
    }

    pub fn time_axis(&self) -> Option<usize> {
        self.time_axis.then(|| self.d_in - 1)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    /// Basis dimension `m` (width of the last hidden layer).
    pub fn width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    /// Total depth including the linear output layer.
    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn layers(&self) -> &[HiddenLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn init_ranges(&self) -> (f64, f64) {
        (self.r_weight, self.r_bias)
    }

    fn forward_into(&self, points: ArrayView2<f64>, mut out: ArrayViewMut2<f64>) {
        let n_layers = self.layers.len();
        let mut input = points.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation;
            if l + 1 == n_layers {
                general_mat_mul(1.0, &input, &layer.weights.t(), 0.0, &mut out);
                for mut row in out.rows_mut() {
                    row.zip_mut_with(&layer.bias, |z, b| *z = act.apply(*z + b));
                }
            } else {
                let mut z = input.dot(&layer.weights.t());
                for mut row in z.rows_mut() {
                    row.zip_mut_with(&layer.bias, |z, b| *z = act.apply(*z + b));
                }
                input = z;
            }
        }
    }

    /// `N x m` matrix whose row `i` is `psi(x_i)`.
    pub fn eval_basis(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.d_in {
            return Err(Error::DimensionMismatch { expected: self.d_in, found: points.ncols() });
        }
        let (n, m) = (points.nrows(), self.width());
        let mut out = Array2::<f64>::zeros((n, m));
        if n == 0 || m == 0 {
            return Ok(out);
        }
        let data = out.as_slice_mut().expect("standard layout");
        par::for_each_chunk_mut(data, ROW_CHUNK * m, |chunk_idx, chunk| {
            let start = chunk_idx * ROW_CHUNK;
            let rows = chunk.len() / m;
            let block = points.slice(ndarray::s![start..start + rows, ..]);
            let view = ArrayViewMut2::from_shape((rows, m), chunk).expect("chunk shape");
            self.forward_into(block, view);
        });
        Ok(out)
    }

    /// `u(x_i) = sum_k alpha_k psi_k(x_i)`.
    pub fn eval_solution(&self, alpha: ArrayView1<f64>, points: ArrayView2<f64>) -> Result<Array1<f64>> {
        if alpha.len() != self.width() {
            return Err(Error::DimensionMismatch { expected: self.width(), found: alpha.len() });
        }
        Ok(self.eval_basis(points)?.dot(&alpha))
    }
}

/// Stacks point vectors into an `N x d` matrix.
pub fn points_matrix<'a>(points: impl IntoIterator<Item = &'a [f64]>, d: usize) -> Array2<f64> {
    let flat: Vec<f64> = points.into_iter().flat_map(|p| p.iter().copied()).collect();
    let n = flat.len() / d.max(1);
    Array2::from_shape_vec((n, d), flat).expect("point dimension")
}

/// Copy of `points` with `delta` added to column `axis`.
pub fn shifted(points: ArrayView2<f64>, axis: usize, delta: f64) -> Array2<f64> {
    let mut p = points.to_owned();
    p.index_axis_mut(Axis(1), axis).mapv_inplace(|v| v + delta);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array};
    use proptest::prelude::*;

    #[test]
    fn build_respects_ranges() {
        let net = RandomFeatureNetwork::build(1, 2, &[320], 1.6, 0.7).unwrap();
        let layer = &net.layers()[0];
        assert_eq!(layer.weights.dim(), (320, 2));
        assert_eq!(layer.bias.len(), 320);
        assert!(layer.weights.iter().all(|w| w.abs() <= 1.6));
        assert!(layer.bias.iter().all(|b| b.abs() <= 0.7));
        assert_eq!(net.width(), 320);
        assert_eq!(net.depth(), 2);
    }

    #[test]
    fn build_is_deterministic_and_layer_streams_split() {
        let a = RandomFeatureNetwork::build(9, 3, &[40], 1.0, 1.0).unwrap();
        let b = RandomFeatureNetwork::build(9, 3, &[40], 1.0, 1.0).unwrap();
        assert_eq!(a, b);
        let deeper = RandomFeatureNetwork::build(9, 3, &[40, 10], 1.0, 1.0).unwrap();
        assert_eq!(deeper.layers()[0], a.layers()[0]);
        let other = RandomFeatureNetwork::build(10, 3, &[40], 1.0, 1.0).unwrap();
        assert_ne!(other.layers()[0], a.layers()[0]);
    }

    #[test]
    fn zero_weight_network_is_constant() {
        let net = RandomFeatureNetwork::build(4, 2, &[8], 0.0, 0.5).unwrap();
        let pts = array![[0.1, 0.2], [-0.7, 0.9]];
        let basis = net.eval_basis(pts.view()).unwrap();
        for k in 0..8 {
            let expected = net.layers()[0].bias[k].tanh();
            assert_eq!(basis[[0, k]], expected);
            assert_eq!(basis[[1, k]], expected);
        }
        let zero = RandomFeatureNetwork::build(4, 2, &[8], 0.0, 0.0).unwrap();
        assert!(zero.eval_basis(pts.view()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_unit_value() {
        let net = RandomFeatureNetwork::from_layers(vec![HiddenLayer { weights: array![[1.0, 0.0]], bias: array![0.0] }])
            .unwrap();
        let v = net.eval_basis(array![[0.5, 0.9]].view()).unwrap();
        assert_abs_diff_eq!(v[[0, 0]], 0.46211715726, epsilon = 1e-11);
    }

    #[test]
    fn empty_points_and_shape_errors() {
        let net = RandomFeatureNetwork::build(1, 2, &[5], 1.0, 1.0).unwrap();
        let empty = Array2::<f64>::zeros((0, 2));
        assert_eq!(net.eval_basis(empty.view()).unwrap().dim(), (0, 5));
        let wrong = Array2::<f64>::zeros((3, 3));
        assert!(matches!(net.eval_basis(wrong.view()), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            net.eval_solution(Array1::zeros(4).view(), Array2::zeros((1, 2)).view()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(RandomFeatureNetwork::build(1, 2, &[], 1.0, 1.0).is_err());
        assert!(RandomFeatureNetwork::build(1, 2, &[0], 1.0, 1.0).is_err());
        assert!(RandomFeatureNetwork::build(1, 0, &[3], 1.0, 1.0).is_err());
    }

    #[test]
    fn eval_solution_matches_naive_dot_products() {
        let net = RandomFeatureNetwork::build(21, 3, &[17], 2.0, 1.0).unwrap();
        let pts = Array::from_shape_fn((600, 3), |(i, j)| ((i * 7 + j * 3) as f64 * 0.137).sin());
        let alpha = Array1::from_shape_fn(17, |k| (k as f64 * 0.77).cos());
        let fast = net.eval_solution(alpha.view(), pts.view()).unwrap();
        let layer = &net.layers()[0];
        for i in 0..pts.nrows() {
            let mut u = 0.0;
            for k in 0..17 {
                let mut z = layer.bias[k];
                for j in 0..3 {
                    z += layer.weights[[k, j]] * pts[[i, j]];
                }
                u += alpha[k] * z.tanh();
            }
            assert_abs_diff_eq!(fast[i], u, epsilon = 1e-12);
        }
        let e3 = Array1::from_shape_fn(17, |k| if k == 3 { 1.0 } else { 0.0 });
        let col = net.eval_solution(e3.view(), pts.view()).unwrap();
        let basis = net.eval_basis(pts.view()).unwrap();
        assert_eq!(col, basis.column(3));
        assert!(net.eval_solution(Array1::zeros(17).view(), pts.view()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sequential_and_parallel_paths_agree() {
        let net = RandomFeatureNetwork::build(2, 2, &[64], 1.5, 0.5).unwrap();
        let pts = Array::from_shape_fn((2000, 2), |(i, j)| ((i + 31 * j) as f64 * 0.01).cos());
        let a = net.eval_basis(pts.view()).unwrap();
        let b = par::sequential(|| net.eval_basis(pts.view()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn deep_networks_evaluate() {
        let net = RandomFeatureNetwork::build(3, 2, &[10, 6], 1.0, 1.0).unwrap();
        let pts = array![[0.3, -0.2]];
        let b = net.eval_basis(pts.view()).unwrap();
        let h1 = (net.layers()[0].weights.dot(&array![0.3, -0.2]) + &net.layers()[0].bias).mapv(f64::tanh);
        let h2 = (net.layers()[1].weights.dot(&h1) + &net.layers()[1].bias).mapv(f64::tanh);
        for k in 0..6 {
            assert_abs_diff_eq!(b[[0, k]], h2[k], epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn solution_is_linear_in_coefficients(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let net = RandomFeatureNetwork::build(seed, 2, &[12], 1.6, 0.7).unwrap();
            let pts = Array::from_shape_fn((40, 2), |(i, j)| ((i * 5 + j + seed as usize) as f64 * 0.3).sin());
            let alpha = Array1::from_shape_fn(12, |k| ((k as u64 + seed) as f64).sin());
            let beta = Array1::from_shape_fn(12, |k| ((k as u64 * 3 + seed) as f64).cos());
            let combo = &alpha * a + &beta * b;
            let lhs = net.eval_solution(combo.view(), pts.view()).unwrap();
            let rhs = net.eval_solution(alpha.view(), pts.view()).unwrap() * a
                + net.eval_solution(beta.view(), pts.view()).unwrap() * b;
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
            }
            let basis = net.eval_basis(pts.view()).unwrap();
            prop_assert!(basis.iter().all(|v| v.abs() < 1.0));
        }
    }
}
