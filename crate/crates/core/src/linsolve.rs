//! Dense least squares `min |M x - r|_2` through LAPACK.

use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Truncated SVD (`dgelsd`), minimum-norm on rank-deficient systems.
    #[default]
    Svd,
    /// Householder QR (`dgels`); assumes full column rank.
    Qr,
    /// Normal equations accumulated in row chunks, then a truncated symmetric eigensolve.
    Normal,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMethod::Svd => "svd",
            SolverMethod::Qr => "qr",
            SolverMethod::Normal => "normal",
        })
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(SolverMethod::Svd),
            "qr" => Ok(SolverMethod::Qr),
            "normal" => Ok(SolverMethod::Normal),
            other => Err(Error::InvalidParameter(format!("unknown solver method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Singular values below `rcond * sigma_max` are dropped.
    pub rcond: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::Svd, rcond: 1e-12 }
    }
}

impl SolverConfig {
    pub fn new(method: SolverMethod, rcond: f64) -> Result<Self> {
        if !(rcond > 0.0 && rcond < 1.0) {
            return Err(Error::InvalidParameter(format!("rcond must lie in (0, 1), got {rcond}")));
        }
        Ok(Self { method, rcond })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub method: SolverMethod,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub sigma_max: f64,
    /// Smallest singular value that was kept. For QR these are |R_ii| estimates.
    pub sigma_min_kept: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub x: Array1<f64>,
    pub diagnostics: SolveDiagnostics,
}

const NORMAL_CHUNK: usize = 4096;

fn to_column_major(m: ArrayView2<f64>) -> Vec<f64> {
    // the transpose in standard layout is exactly M in column-major order
    m.t().iter().copied().collect()
}

fn check(m: &ArrayView2<f64>, r: &ArrayView1<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape(format!("least squares needs a nonempty matrix, got {rows}x{cols}")));
    }
    if r.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: r.len() });
    }
    if !m.iter().all(|v| v.is_finite()) || !r.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

/// Solves `min |M x - r|_2`. Row weights are expected to be folded into `m` and `r` already.
pub fn lstsq(m: ArrayView2<f64>, r: ArrayView1<f64>, cfg: &SolverConfig) -> Result<LstsqSolution> {
    check(&m, &r)?;
    let (x, rank, sigma_max, sigma_min_kept) = match cfg.method {
        SolverMethod::Svd => solve_svd(m, r, cfg.rcond)?,
        SolverMethod::Qr => solve_qr(m, r)?,
        SolverMethod::Normal => solve_normal(m, r, cfg.rcond)?,
    };
    let residual = m.dot(&x) - r;
    let residual_norm = residual.dot(&residual).sqrt();
    let (rows, cols) = m.dim();
    Ok(LstsqSolution {
        x,
        diagnostics: SolveDiagnostics {
            method: cfg.method,
            rows,
            cols,
            rank,
            sigma_max,
            sigma_min_kept,
            residual_norm,
        },
    })
}

fn lapack_info(routine: &'static str, info: i32) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

fn solve_svd(m: ArrayView2<f64>, r: ArrayView1<f64>, rcond: f64) -> Result<(Array1<f64>, usize, f64, f64)> {
    let (rows, cols) = m.dim();
    let mut a = to_column_major(m);
    let ldb = rows.max(cols);
    let mut b = vec![0.0; ldb];
    b[..rows].copy_from_slice(&r.to_vec());
    let mut sv = vec![0.0; rows.min(cols)];
    let mut rank = 0i32;
    let mut info = 0i32;
    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    unsafe {
        lapack::dgelsd(
            rows as i32, cols as i32, 1, &mut a, rows as i32, &mut b, ldb as i32, &mut sv, rcond, &mut rank,
            &mut work_query, -1, &mut iwork_query, &mut info,
        );
    }
    lapack_info("dgelsd", info)?;
    let lwork = work_query[0] as usize;
    let mut work = vec![0.0; lwork.max(1)];
    let mut iwork = vec![0i32; (iwork_query[0] as usize).max(1)];
    unsafe {
        lapack::dgelsd(
            rows as i32, cols as i32, 1, &mut a, rows as i32, &mut b, ldb as i32, &mut sv, rcond, &mut rank,
            &mut work, lwork as i32, &mut iwork, &mut info,
        );
    }
    lapack_info("dgelsd", info)?;
    let rank = rank.max(0) as usize;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = if rank > 0 { sv[rank - 1] } else { 0.0 };
    Ok((Array1::from(b[..cols].to_vec()), rank, sigma_max, sigma_min))
}

fn solve_qr(m: ArrayView2<f64>, r: ArrayView1<f64>) -> Result<(Array1<f64>, usize, f64, f64)> {
    let (rows, cols) = m.dim();
    let mut a = to_column_major(m);
    let ldb = rows.max(cols);
    let mut b = vec![0.0; ldb];
    b[..rows].copy_from_slice(&r.to_vec());
    let mut info = 0i32;
    let mut work_query = [0.0f64];
    unsafe {
        lapack::dgels(b'N', rows as i32, cols as i32, 1, &mut a, rows as i32, &mut b, ldb as i32, &mut work_query, -1, &mut info, 1);
    }
    lapack_info("dgels", info)?;
    let lwork = (work_query[0] as usize).max(1);
    let mut work = vec![0.0; lwork];
    unsafe {
        lapack::dgels(b'N', rows as i32, cols as i32, 1, &mut a, rows as i32, &mut b, ldb as i32, &mut work, lwork as i32, &mut info, 1);
    }
    lapack_info("dgels", info)?;
    let diag: Vec<f64> = (0..rows.min(cols)).map(|k| a[k * rows + k].abs()).collect();
    let sigma_max = diag.iter().copied().fold(0.0, f64::max);
    let sigma_min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((Array1::from(b[..cols].to_vec()), rows.min(cols), sigma_max, sigma_min))
}

/// `M^T M` summed over row chunks so no second copy of `M` is needed.
pub fn gram(m: ArrayView2<f64>) -> Array2<f64> {
    let cols = m.ncols();
    let mut g = Array2::<f64>::zeros((cols, cols));
    for chunk in m.axis_chunks_iter(Axis(0), NORMAL_CHUNK) {
        general_mat_mul(1.0, &chunk.t(), &chunk, 1.0, &mut g);
    }
    g
}

fn solve_normal(m: ArrayView2<f64>, r: ArrayView1<f64>, rcond: f64) -> Result<(Array1<f64>, usize, f64, f64)> {
    let cols = m.ncols();
    let g = gram(m);
    let rhs = m.t().dot(&r);
    // symmetric, so row-major storage is also valid column-major storage
    let mut a: Vec<f64> = g.iter().copied().collect();
    let mut w = vec![0.0; cols];
    let mut info = 0i32;
    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    let n = cols as i32;
    unsafe {
        lapack::dsyevd(b'V', b'U', n, &mut a, n, &mut w, &mut work_query, -1, &mut iwork_query, -1, &mut info);
    }
    lapack_info("dsyevd", info)?;
    let lwork = (work_query[0] as usize).max(1);
    let liwork = (iwork_query[0] as usize).max(1);
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0i32; liwork];
    unsafe {
        lapack::dsyevd(b'V', b'U', n, &mut a, n, &mut w, &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info);
    }
    lapack_info("dsyevd", info)?;
    // eigenvectors are the columns of the column-major result
    let v = Array2::from_shape_vec((cols, cols), a).expect("square").reversed_axes();
    let lambda_max = w.iter().copied().fold(0.0, f64::max);
    // squaring the condition number loses everything below ~eps * lambda_max
    let cutoff = (rcond * rcond).max(f64::EPSILON * cols as f64) * lambda_max;
    let mut coeffs = v.t().dot(&rhs);
    let mut rank = 0;
    let mut lambda_min_kept = f64::INFINITY;
    for (c, &l) in coeffs.iter_mut().zip(&w) {
        if l > cutoff && l > 0.0 {
            *c /= l;
            rank += 1;
            lambda_min_kept = lambda_min_kept.min(l);
        } else {
            *c = 0.0;
        }
    }
    let x = v.dot(&coeffs);
    let sigma_min = if rank > 0 { lambda_min_kept.sqrt() } else { 0.0 };
    Ok((x, rank, lambda_max.max(0.0).sqrt(), sigma_min))
}

/// Norm of `M x - r` restricted to `rows`.
pub fn residual_norm_rows(m: ArrayView2<f64>, r: ArrayView1<f64>, x: ArrayView1<f64>, rows: std::ops::Range<usize>) -> f64 {
    let res = m.slice(s![rows.clone(), ..]).dot(&x) - r.slice(s![rows]);
    res.dot(&res).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(rows: usize, cols: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0));
        let r = Array::from_shape_fn(rows, |_| rng.gen_range(-1.0..1.0));
        (m, r)
    }

    // Gaussian elimination with partial pivoting on M^T M x = M^T r.
    fn normal_equation_oracle(m: &Array2<f64>, r: &Array1<f64>) -> Array1<f64> {
        let n = m.ncols();
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..m.nrows()).map(|k| m[[k, i]] * m[[k, j]]).sum();
            }
            a[i][n] = (0..m.nrows()).map(|k| m[[k, i]] * r[k]).sum();
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
            a.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (a[i][n] - s) / a[i][i];
        }
        Array1::from(x)
    }

    fn rel(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        let d = a - b;
        d.dot(&d).sqrt() / b.dot(b).sqrt()
    }

    #[test]
    fn identity_system() {
        let m = Array2::<f64>::eye(3);
        let r = array![1.0, 2.0, 3.0];
        for method in [SolverMethod::Svd, SolverMethod::Qr, SolverMethod::Normal] {
            let sol = lstsq(m.view(), r.view(), &SolverConfig { method, rcond: 1e-12 }).unwrap();
            assert!(rel(&sol.x, &r) <= 1e-14);
            assert_eq!(sol.diagnostics.rank, 3);
        }
    }

    #[test]
    fn single_column() {
        let m = array![[1.0], [1.0]];
        let r = array![1.0, 3.0];
        let sol = lstsq(m.view(), r.view(), &SolverConfig::default()).unwrap();
        assert_relative_eq!(sol.x[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(sol.diagnostics.residual_norm, 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sol.diagnostics.sigma_max, 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn random_full_rank_agrees_with_oracle() {
        for seed in 0..5 {
            let (m, r) = random_system(50, 20, seed);
            let svd = lstsq(m.view(), r.view(), &SolverConfig::default()).unwrap();
            let qr = lstsq(m.view(), r.view(), &SolverConfig { method: SolverMethod::Qr, rcond: 1e-12 }).unwrap();
            let normal =
                lstsq(m.view(), r.view(), &SolverConfig { method: SolverMethod::Normal, rcond: 1e-12 }).unwrap();
            let oracle = normal_equation_oracle(&m, &r);
            assert!(rel(&svd.x, &qr.x) <= 1e-10);
            assert!(rel(&svd.x, &oracle) <= 1e-8);
            assert!(rel(&qr.x, &oracle) <= 1e-8);
            assert!(rel(&normal.x, &oracle) <= 1e-8);
            assert_eq!(svd.diagnostics.rank, 20);
        }
    }

    #[test]
    fn duplicate_column_gives_minimum_norm() {
        let (m, r) = random_system(50, 20, 11);
        let base = lstsq(m.view(), r.view(), &SolverConfig::default()).unwrap();
        let mut wide = Array2::zeros((50, 21));
        wide.slice_mut(s![.., ..20]).assign(&m);
        wide.column_mut(20).assign(&m.column(3));
        for method in [SolverMethod::Svd, SolverMethod::Normal] {
            let dup = lstsq(wide.view(), r.view(), &SolverConfig { method, rcond: 1e-12 }).unwrap();
            assert_eq!(dup.diagnostics.rank, 20);
            assert!(dup.x.dot(&dup.x).sqrt() <= base.x.dot(&base.x).sqrt() + 1e-10);
            assert_relative_eq!(dup.x[3], dup.x[20], epsilon = 1e-10);
        }
    }

    #[test]
    fn scale_equivariance() {
        let (m, r) = random_system(50, 20, 5);
        let base = lstsq(m.view(), r.view(), &SolverConfig::default()).unwrap();
        for c in [1e-6, 1.0, 1e6] {
            let scaled = lstsq((&m * c).view(), (&r * c).view(), &SolverConfig::default()).unwrap();
            assert!(rel(&scaled.x, &base.x) <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = Array2::<f64>::eye(2);
        let r = array![1.0, 2.0];
        m[[0, 1]] = f64::NAN;
        assert_eq!(lstsq(m.view(), r.view(), &SolverConfig::default()), Err(Error::NonFiniteInput));
        let m = Array2::<f64>::eye(2);
        assert_eq!(
            lstsq(m.view(), array![1.0].view(), &SolverConfig::default()),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(SolverConfig::new(SolverMethod::Svd, 0.0).is_err());
        assert!(SolverConfig::new(SolverMethod::Svd, 1.0).is_err());
        assert_eq!("QR".parse::<SolverMethod>().unwrap(), SolverMethod::Qr);
        assert!("lu".parse::<SolverMethod>().is_err());
    }

    #[test]
    fn gram_matches_direct_product() {
        let (m, _) = random_system(9000, 7, 2);
        let g = gram(m.view());
        let direct = m.t().dot(&m);
        assert!((&g - &direct).iter().zip(direct.iter()).all(|(d, v)| d.abs() <= 1e-12 * v.abs().max(1.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn svd_solution_is_optimal(seed in 0u64..1000) {
            let (m, r) = random_system(50, 20, seed);
            let sol = lstsq(m.view(), r.view(), &SolverConfig::default()).unwrap();
            let best = sol.diagnostics.residual_norm;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            for _ in 0..100 {
                let scale = 10f64.powi(rng.gen_range(-6..1));
                let delta = Array::from_shape_fn(20, |_| scale * rng.gen_range(-1.0..1.0));
                let res = m.dot(&(&sol.x + &delta)) - &r;
                prop_assert!(res.dot(&res).sqrt() >= best - 1e-12);
            }
        }
    }
}
