//! Collocation systems for the strong, mixed and space-time formulations.
//!
//! Rows come in blocks (PDE, interface jump, flux jump, Dirichlet, initial), columns
//! in one block per (field, subdomain). Jump and flux rows couple the two subdomains
//! adjacent to the interface: inner trace minus outer trace.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::calculus::{fd_laplacian, fd_partial, fd_time_partial, FdConfig};
use crate::error::{Error, Result};
use crate::geometry::{GeometrySpec, InterfacePoint};
use crate::linsolve::{lstsq, SolveDiagnostics, SolverConfig};
use crate::quadrature::QuadNode;
use crate::randnet::{points_matrix, RandomFeatureNetwork};
use crate::sampling::{CollocationSet, TaggedPoint};

/// Field data `(subdomain, x, t) -> value`.
pub type FieldFn = Arc<dyn Fn(usize, &[f64], Option<f64>) -> f64 + Send + Sync>;
/// Interface data, evaluated at a point carrying its interface label and normal.
pub type InterfaceFn = Arc<dyn Fn(&InterfacePoint) -> f64 + Send + Sync>;
/// Initial data `(subdomain, x) -> u0`.
pub type InitialFn = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;

/// A closed-form solution with hand-derived derivatives, used for error
/// evaluation and for consistency checks of the derived data.
pub trait ExactSolution: Send + Sync {
    fn value(&self, subdomain: usize, x: &[f64], t: Option<f64>) -> f64;
    /// Spatial gradient.
    fn gradient(&self, subdomain: usize, x: &[f64], t: Option<f64>) -> Vec<f64>;
    /// Spatial Laplacian.
    fn laplacian(&self, subdomain: usize, x: &[f64], t: Option<f64>) -> f64;
    fn time_derivative(&self, _subdomain: usize, _x: &[f64], _t: Option<f64>) -> f64 {
        0.0
    }
}

#[derive(Clone)]
pub struct ProblemDefinition {
    pub geom: GeometrySpec,
    pub beta: Vec<f64>,
    pub source: FieldFn,
    pub jump: InterfaceFn,
    pub flux_jump: InterfaceFn,
    pub dirichlet: FieldFn,
    pub initial: Option<InitialFn>,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("geom", &self.geom)
            .field("beta", &self.beta)
            .field("has_initial", &self.initial.is_some())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemDefinition {
    pub fn new(
        geom: GeometrySpec,
        beta: Vec<f64>,
        source: FieldFn,
        jump: InterfaceFn,
        flux_jump: InterfaceFn,
        dirichlet: FieldFn,
        initial: Option<InitialFn>,
    ) -> Result<Self> {
        if beta.len() != geom.n_subdomains() {
            return Err(Error::DimensionMismatch { expected: geom.n_subdomains(), found: beta.len() });
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter(format!("diffusion coefficients must be positive, got {b}")));
        }
        match (geom.is_space_time(), initial.is_some()) {
            (true, false) => return Err(Error::MissingInitialCondition),
            (false, true) => {
                return Err(Error::InvalidParameter("initial data given for a stationary problem".into()))
            }
            _ => {}
        }
        Ok(Self { geom, beta, source, jump, flux_jump, dirichlet, initial, exact: None })
    }

    pub fn with_exact(mut self, exact: Arc<dyn ExactSolution>) -> Self {
        self.exact = Some(exact);
        self
    }

    /// The zero problem on the same geometry and coefficients.
    pub fn zero_data(&self) -> Self {
        let zero_field: FieldFn = Arc::new(|_, _, _| 0.0);
        let zero_iface: InterfaceFn = Arc::new(|_| 0.0);
        Self {
            geom: self.geom.clone(),
            beta: self.beta.clone(),
            source: zero_field.clone(),
            jump: zero_iface.clone(),
            flux_jump: zero_iface,
            dirichlet: zero_field,
            initial: self.initial.as_ref().map(|_| Arc::new(|_: usize, _: &[f64]| 0.0) as InitialFn),
            exact: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    Pde,
    MixedDiv,
    /// `-beta d_k u + p_k = 0`
    MixedGrad(usize),
    Jump,
    FluxJump,
    Dirichlet,
    Initial,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::Pde => write!(f, "pde"),
            RowTag::MixedDiv => write!(f, "mixed_div"),
            RowTag::MixedGrad(k) => write!(f, "mixed_grad{k}"),
            RowTag::Jump => write!(f, "jump"),
            RowTag::FluxJump => write!(f, "flux_jump"),
            RowTag::Dirichlet => write!(f, "dirichlet"),
            RowTag::Initial => write!(f, "initial"),
        }
    }
}

/// Penalty weights for the constraint blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub jump: f64,
    pub flux_jump: f64,
    pub dirichlet: f64,
    pub initial: f64,
}

impl Weights {
    pub fn uniform(gamma: f64) -> Self {
        Self { jump: gamma, flux_jump: gamma, dirichlet: gamma, initial: gamma }
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self::uniform(50.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyConfig {
    pub fd: FdConfig,
    pub weights: Weights,
    /// Multiply flux-jump rows by the subdomain coefficients (`[beta grad u . n]`).
    pub flux_beta: bool,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self { fd: FdConfig::default(), weights: Weights::default(), flux_beta: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    /// Component `k` of the flux `p = beta grad u`.
    P(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnBlock {
    pub field: Field,
    pub subdomain: usize,
    pub offset: usize,
    pub width: usize,
}

impl ColumnBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.width
    }
}

/// Per-subdomain random bases; `p` is empty for the strong and space-time forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Bases {
    pub u: Vec<RandomFeatureNetwork>,
    pub p: Vec<Vec<RandomFeatureNetwork>>,
}

impl Bases {
    pub fn strong(u: Vec<RandomFeatureNetwork>) -> Self {
        Self { u, p: Vec::new() }
    }

    pub fn mixed(u: Vec<RandomFeatureNetwork>, p: Vec<Vec<RandomFeatureNetwork>>) -> Self {
        Self { u, p }
    }

    pub fn is_mixed(&self) -> bool {
        !self.p.is_empty()
    }

    /// u blocks by subdomain, then flux blocks by (subdomain, component).
    pub fn layout(&self) -> Vec<ColumnBlock> {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (s, net) in self.u.iter().enumerate() {
            blocks.push(ColumnBlock { field: Field::U, subdomain: s, offset, width: net.width() });
            offset += net.width();
        }
        for (s, comps) in self.p.iter().enumerate() {
            for (k, net) in comps.iter().enumerate() {
                blocks.push(ColumnBlock { field: Field::P(k), subdomain: s, offset, width: net.width() });
                offset += net.width();
            }
        }
        blocks
    }

    pub fn n_columns(&self) -> usize {
        self.u.iter().map(|n| n.width()).sum::<usize>()
            + self.p.iter().flat_map(|c| c.iter()).map(|n| n.width()).sum::<usize>()
    }

    fn block(&self, field: Field, subdomain: usize) -> ColumnBlock {
        *self
            .layout()
            .iter()
            .find(|b| b.field == field && b.subdomain == subdomain)
            .expect("block exists for validated bases")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    pub matrix: Array2<f64>,
    pub rhs: Array1<f64>,
    pub row_tags: Vec<RowTag>,
    pub row_weights: Vec<f64>,
    pub columns: Vec<ColumnBlock>,
}

impl BlockSystem {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn count(&self, tag: RowTag) -> usize {
        self.row_tags.iter().filter(|t| **t == tag).count()
    }

    /// Row-major dump: `u64` rows, `u64` cols, then `f64` entries, all little endian.
    pub fn write_matrix<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        for v in self.matrix.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }
}

/// Row buffer: the matrix is filled block by block, then frozen into a [`BlockSystem`].
struct Builder {
    matrix: Array2<f64>,
    rhs: Array1<f64>,
    tags: Vec<RowTag>,
    weights: Vec<f64>,
}

impl Builder {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            matrix: Array2::zeros((rows, cols)),
            rhs: Array1::zeros(rows),
            tags: Vec::with_capacity(rows),
            weights: Vec::with_capacity(rows),
        }
    }

    /// Appends `n` rows of `tag`, returning the first row index.
    fn open(&mut self, tag: RowTag, n: usize, weight: f64) -> usize {
        let start = self.tags.len();
        self.tags.extend(std::iter::repeat_n(tag, n));
        self.weights.extend(std::iter::repeat_n(weight, n));
        start
    }

    fn put(&mut self, row: usize, block: ColumnBlock, values: ArrayView1<f64>, scale: f64) {
        self.matrix
            .slice_mut(s![row, block.range()])
            .zip_mut_with(&values, |a, b| *a += scale * b);
    }

    fn finish(mut self, columns: Vec<ColumnBlock>) -> BlockSystem {
        debug_assert_eq!(self.tags.len(), self.matrix.nrows());
        for (i, w) in self.weights.iter().enumerate() {
            if *w != 1.0 {
                self.matrix.row_mut(i).mapv_inplace(|v| v * w);
                self.rhs[i] *= w;
            }
        }
        BlockSystem { matrix: self.matrix, rhs: self.rhs, row_tags: self.tags, row_weights: self.weights, columns }
    }
}

fn group_indices(keys: impl Iterator<Item = usize>, n_groups: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); n_groups];
    for (i, k) in keys.enumerate() {
        groups[k].push(i);
    }
    groups
}

fn tagged_inputs(points: &[TaggedPoint], idx: &[usize], width: usize) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].input()).collect();
    points_matrix(rows.iter().map(|r| r.as_slice()), width)
}

fn interface_inputs(points: &[InterfacePoint], idx: &[usize], width: usize) -> Array2<f64> {
    let rows: Vec<Vec<f64>> =
        idx.iter().map(|&i| crate::sampling::network_input(&points[i].x, points[i].t)).collect();
    points_matrix(rows.iter().map(|r| r.as_slice()), width)
}

/// `sum_k n_k d psi / d x_k`, skipping axes where no normal has a component.
fn normal_derivative(
    net: &RandomFeatureNetwork,
    inputs: ArrayView2<f64>,
    normals: &[&[f64]],
    dim: usize,
    cfg: &FdConfig,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((inputs.nrows(), net.width()));
    for k in 0..dim {
        if normals.iter().all(|n| n[k] == 0.0) {
            continue;
        }
        let dk = fd_partial(net, k, inputs, cfg)?;
        for (i, n) in normals.iter().enumerate() {
            out.row_mut(i).scaled_add(n[k], &dk.row(i));
        }
    }
    Ok(out)
}

fn validate(prob: &ProblemDefinition, bases: &Bases, pts: &CollocationSet) -> Result<()> {
    let geom = &prob.geom;
    let n_sub = geom.n_subdomains();
    if bases.u.len() != n_sub {
        return Err(Error::DimensionMismatch { expected: n_sub, found: bases.u.len() });
    }
    let d_in = geom.dim() + usize::from(geom.is_space_time());
    let all = bases.u.iter().chain(bases.p.iter().flatten());
    for net in all {
        if net.d_in() != d_in {
            return Err(Error::DimensionMismatch { expected: d_in, found: net.d_in() });
        }
        if geom.is_space_time() && net.time_axis() != Some(geom.dim()) {
            return Err(Error::InvalidShape("space-time networks need the time axis last".into()));
        }
    }
    for s in 0..n_sub {
        if !pts.interior.iter().any(|p| p.subdomain == s) {
            return Err(Error::EmptyRegion(format!("no interior collocation points in subdomain {s}")));
        }
    }
    let mismatch = pts.interior.iter().chain(&pts.boundary).chain(&pts.initial).find(|p| p.x.len() != geom.dim());
    if let Some(p) = mismatch {
        return Err(Error::DimensionMismatch { expected: geom.dim(), found: p.x.len() });
    }
    Ok(())
}

/// Strong-form elliptic system.
pub fn assemble_elliptic(
    prob: &ProblemDefinition,
    bases: &Bases,
    pts: &CollocationSet,
    cfg: &AssemblyConfig,
) -> Result<BlockSystem> {
    if prob.geom.is_space_time() {
        return Err(Error::InvalidParameter("use assemble_spacetime for time-dependent problems".into()));
    }
    assemble_primal(prob, bases, pts, cfg)
}

/// Space-time parabolic system: `u_t - div(beta grad u) = f` on the (d+1)-box.
pub fn assemble_spacetime(
    prob: &ProblemDefinition,
    bases: &Bases,
    pts: &CollocationSet,
    cfg: &AssemblyConfig,
) -> Result<BlockSystem> {
    if !prob.geom.is_space_time() {
        return Err(Error::NoTimeAxis);
    }
    if prob.initial.is_none() {
        return Err(Error::MissingInitialCondition);
    }
    assemble_primal(prob, bases, pts, cfg)
}

/// Picks the formulation from the problem and the bases.
pub fn assemble(
    prob: &ProblemDefinition,
    bases: &Bases,
    pts: &CollocationSet,
    cfg: &AssemblyConfig,
) -> Result<BlockSystem> {
    if bases.is_mixed() {
        assemble_mixed(prob, bases, pts, cfg)
    } else if prob.geom.is_space_time() {
        assemble_spacetime(prob, bases, pts, cfg)
    } else {
        assemble_elliptic(prob, bases, pts, cfg)
    }
}

fn assemble_primal(
    prob: &ProblemDefinition,
    bases: &Bases,
    pts: &CollocationSet,
    cfg: &AssemblyConfig,
) -> Result<BlockSystem> {
    if bases.is_mixed() {
        return Err(Error::InvalidShape("flux bases given to a primal formulation".into()));
    }
    validate(prob, bases, pts)?;
    let geom = &prob.geom;
    let dim = geom.dim();
    let n_sub = geom.n_subdomains();
    let spatial: Vec<usize> = (0..dim).collect();
    let columns = bases.layout();
    let n_init = if geom.is_space_time() { pts.initial.len() } else { 0 };
    let n_rows = pts.interior.len() + 2 * pts.interface_pts.len() + pts.boundary.len() + n_init;
    let mut b = Builder::new(n_rows, bases.n_columns());
    let d_in = bases.u[0].d_in();

    // PDE rows
    let start = b.open(RowTag::Pde, pts.interior.len(), 1.0);
    for (s, idx) in group_indices(pts.interior.iter().map(|p| p.subdomain), n_sub).iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let net = &bases.u[s];
        let inputs = tagged_inputs(&pts.interior, idx, d_in);
        let mut op = fd_laplacian(net, inputs.view(), &cfg.fd, &spatial)?;
        op.mapv_inplace(|v| -prob.beta[s] * v);
        if geom.is_space_time() {
            op += &fd_time_partial(net, inputs.view(), &cfg.fd)?;
        }
        for (j, &i) in idx.iter().enumerate() {
            b.put(start + i, columns[s], op.row(j), 1.0);
            let p = &pts.interior[i];
            b.rhs[start + i] = (prob.source)(s, &p.x, p.t);
        }
    }

    // jump rows, then flux-jump rows, grouped by interface
    let n_if = pts.interface_pts.len();
    let jump_start = b.open(RowTag::Jump, n_if, cfg.weights.jump);
    let flux_start = b.open(RowTag::FluxJump, n_if, cfg.weights.flux_jump);
    let labels = group_indices(pts.interface_pts.iter().map(|p| p.interface_label), geom.interfaces().len());
    for (label, idx) in labels.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let (inner, outer) = geom.adjacent(label);
        let inputs = interface_inputs(&pts.interface_pts, idx, d_in);
        let normals: Vec<&[f64]> = idx.iter().map(|&i| pts.interface_pts[i].normal.as_slice()).collect();
        let (beta_in, beta_out) =
            if cfg.flux_beta { (prob.beta[inner], prob.beta[outer]) } else { (1.0, 1.0) };
        for (s, sign, beta) in [(inner, 1.0, beta_in), (outer, -1.0, beta_out)] {
            let net = &bases.u[s];
            let vals = net.eval_basis(inputs.view())?;
            let dn = normal_derivative(net, inputs.view(), &normals, dim, &cfg.fd)?;
            for (j, &i) in idx.iter().enumerate() {
                b.put(jump_start + i, columns[s], vals.row(j), sign);
                b.put(flux_start + i, columns[s], dn.row(j), sign * beta);
            }
        }
        for &i in idx {
            let p = &pts.interface_pts[i];
            b.rhs[jump_start + i] = (prob.jump)(p);
            b.rhs[flux_start + i] = (prob.flux_jump)(p);
        }
    }

    fill_values(&mut b, RowTag::Dirichlet, cfg.weights.dirichlet, &pts.boundary, bases, &columns, |p| {
        (prob.dirichlet)(p.subdomain, &p.x, p.t)
    })?;
    if let (true, Some(u0)) = (geom.is_space_time(), prob.initial.as_ref()) {
        fill_values(&mut b, RowTag::Initial, cfg.weights.initial, &pts.initial, bases, &columns, |p| {
            u0(p.subdomain, &p.x)
        })?;
    }
    Ok(b.finish(columns))
}

/// Rows `psi^s(x_i) . alpha^s = g(x_i)` for the owning subdomain of each point.
fn fill_values(
    b: &mut Builder,
    tag: RowTag,
    weight: f64,
    points: &[TaggedPoint],
    bases: &Bases,
    columns: &[ColumnBlock],
    data: impl Fn(&TaggedPoint) -> f64,
) -> Result<()> {
    let start = b.open(tag, points.len(), weight);
    let n_sub = bases.u.len();
    for (s, idx) in group_indices(points.iter().map(|p| p.subdomain), n_sub).iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let net = &bases.u[s];
        let vals = net.eval_basis(tagged_inputs(points, idx, net.d_in()).view())?;
        let block = columns.iter().find(|c| c.field == Field::U && c.subdomain == s).copied().expect("u block");
        for (j, &i) in idx.iter().enumerate() {
            b.put(start + i, block, vals.row(j), 1.0);
        }
    }
    for (i, p) in points.iter().enumerate() {
        b.rhs[start + i] = data(p);
    }
    Ok(())
}

/// First-order system `-div p = f`, `p - beta grad u = 0` (two space dimensions).
pub fn assemble_mixed(
    prob: &ProblemDefinition,
    bases: &Bases,
    pts: &CollocationSet,
    cfg: &AssemblyConfig,
) -> Result<BlockSystem> {
    let geom = &prob.geom;
    let dim = geom.dim();
    if dim != 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if geom.is_space_time() {
        return Err(Error::InvalidParameter("the mixed form is stationary only".into()));
    }
    let n_sub = geom.n_subdomains();
    if bases.p.len() != n_sub {
        return Err(Error::DimensionMismatch { expected: n_sub, found: bases.p.len() });
    }
    if let Some(c) = bases.p.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: c.len() });
    }
    validate(prob, bases, pts)?;
    let columns = bases.layout();
    let n1 = pts.interior.len();
    let n2 = pts.interface_pts.len();
    let mut b = Builder::new(3 * n1 + 2 * n2 + pts.boundary.len(), bases.n_columns());

    let div_start = b.open(RowTag::MixedDiv, n1, 1.0);
    let grad_start = [b.open(RowTag::MixedGrad(0), n1, 1.0), b.open(RowTag::MixedGrad(1), n1, 1.0)];
    for (s, idx) in group_indices(pts.interior.iter().map(|p| p.subdomain), n_sub).iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let inputs = tagged_inputs(&pts.interior, idx, dim);
        let u_block = bases.block(Field::U, s);
        for k in 0..dim {
            let p_net = &bases.p[s][k];
            let p_block = bases.block(Field::P(k), s);
            let dp = fd_partial(p_net, k, inputs.view(), &cfg.fd)?;
            let pv = p_net.eval_basis(inputs.view())?;
            let du = fd_partial(&bases.u[s], k, inputs.view(), &cfg.fd)?;
            for (j, &i) in idx.iter().enumerate() {
                b.put(div_start + i, p_block, dp.row(j), -1.0);
                b.put(grad_start[k] + i, u_block, du.row(j), -prob.beta[s]);
                b.put(grad_start[k] + i, p_block, pv.row(j), 1.0);
            }
        }
        for &i in idx {
            let p = &pts.interior[i];
            b.rhs[div_start + i] = (prob.source)(s, &p.x, None);
        }
    }

    let jump_start = b.open(RowTag::Jump, n2, cfg.weights.jump);
    let flux_start = b.open(RowTag::FluxJump, n2, cfg.weights.flux_jump);
    let labels = group_indices(pts.interface_pts.iter().map(|p| p.interface_label), geom.interfaces().len());
    for (label, idx) in labels.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let (inner, outer) = geom.adjacent(label);
        let inputs = interface_inputs(&pts.interface_pts, idx, dim);
        for (s, sign) in [(inner, 1.0), (outer, -1.0)] {
            let vals = bases.u[s].eval_basis(inputs.view())?;
            let u_block = bases.block(Field::U, s);
            for (j, &i) in idx.iter().enumerate() {
                b.put(jump_start + i, u_block, vals.row(j), sign);
            }
            for k in 0..dim {
                let pv = bases.p[s][k].eval_basis(inputs.view())?;
                let p_block = bases.block(Field::P(k), s);
                for (j, &i) in idx.iter().enumerate() {
                    let nk = pts.interface_pts[i].normal[k];
                    b.put(flux_start + i, p_block, pv.row(j), sign * nk);
                }
            }
        }
        for &i in idx {
            let p = &pts.interface_pts[i];
            b.rhs[jump_start + i] = (prob.jump)(p);
            b.rhs[flux_start + i] = (prob.flux_jump)(p);
        }
    }

    fill_values(&mut b, RowTag::Dirichlet, cfg.weights.dirichlet, &pts.boundary, bases, &columns, |p| {
        (prob.dirichlet)(p.subdomain, &p.x, None)
    })?;
    Ok(b.finish(columns))
}

/// RMS of `M x - r` per row tag, with the row weights divided back out.
/// Rows with zero weight carry no information and are skipped.
pub fn residual(sys: &BlockSystem, x: ArrayView1<f64>) -> Result<Vec<(RowTag, f64)>> {
    if x.len() != sys.cols() {
        return Err(Error::DimensionMismatch { expected: sys.cols(), found: x.len() });
    }
    let r = sys.matrix.dot(&x) - &sys.rhs;
    let mut acc: Vec<(RowTag, f64, usize)> = Vec::new();
    for ((tag, w), v) in sys.row_tags.iter().zip(&sys.row_weights).zip(r.iter()) {
        if *w == 0.0 {
            continue;
        }
        let e = v / w;
        match acc.iter_mut().find(|(t, _, _)| t == tag) {
            Some(slot) => {
                slot.1 += e * e;
                slot.2 += 1;
            }
            None => acc.push((*tag, e * e, 1)),
        }
    }
    Ok(acc.into_iter().map(|(t, ss, n)| (t, (ss / n as f64).sqrt())).collect())
}

/// Output-layer coefficients together with the bases they multiply.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub bases: Bases,
    pub alpha: Vec<Array1<f64>>,
    /// `tau[s][k]`, empty unless mixed.
    pub tau: Vec<Vec<Array1<f64>>>,
}

impl Solution {
    pub fn from_coefficients(bases: Bases, x: ArrayView1<f64>) -> Result<Self> {
        if x.len() != bases.n_columns() {
            return Err(Error::DimensionMismatch { expected: bases.n_columns(), found: x.len() });
        }
        let layout = bases.layout();
        let mut alpha = Vec::new();
        let mut tau: Vec<Vec<Array1<f64>>> = vec![Vec::new(); bases.p.len()];
        for block in layout {
            let coeffs = x.slice(s![block.range()]).to_owned();
            match block.field {
                Field::U => alpha.push(coeffs),
                Field::P(_) => tau[block.subdomain].push(coeffs),
            }
        }
        Ok(Self { bases, alpha, tau })
    }

    /// All coefficients in column order (`alpha` blocks, then `tau` blocks).
    pub fn coefficients(&self) -> Array1<f64> {
        self.alpha.iter().chain(self.tau.iter().flatten()).flat_map(|a| a.iter().copied()).collect()
    }

    fn eval_field(
        &self,
        nets: impl Fn(usize) -> (RandomFeatureNetwork, Array1<f64>),
        subdomains: &[usize],
        inputs: ArrayView2<f64>,
    ) -> Result<Vec<f64>> {
        if subdomains.len() != inputs.nrows() {
            return Err(Error::DimensionMismatch { expected: inputs.nrows(), found: subdomains.len() });
        }
        let mut out = vec![0.0; subdomains.len()];
        let n_sub = self.bases.u.len();
        if let Some(&s) = subdomains.iter().find(|&&s| s >= n_sub) {
            return Err(Error::DimensionMismatch { expected: n_sub, found: s + 1 });
        }
        for (s, idx) in group_indices(subdomains.iter().copied(), n_sub).iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let (net, coeffs) = nets(s);
            let sub = inputs.select(ndarray::Axis(0), idx);
            let vals = net.eval_solution(coeffs.view(), sub.view())?;
            for (j, &i) in idx.iter().enumerate() {
                out[i] = vals[j];
            }
        }
        Ok(out)
    }

    /// `u_rho` at `inputs` (rows are network inputs), each in its given subdomain.
    pub fn eval(&self, subdomains: &[usize], inputs: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.eval_field(|s| (self.bases.u[s].clone(), self.alpha[s].clone()), subdomains, inputs)
    }

    /// Components of the flux approximation `p_rho`; mixed solutions only.
    pub fn eval_flux(&self, subdomains: &[usize], inputs: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        if self.tau.is_empty() {
            return Err(Error::InvalidParameter("solution has no flux field".into()));
        }
        let dim = self.tau[0].len();
        (0..dim)
            .map(|k| self.eval_field(|s| (self.bases.p[s][k].clone(), self.tau[s][k].clone()), subdomains, inputs))
            .collect()
    }

    pub fn eval_nodes(&self, nodes: &[QuadNode]) -> Result<Vec<f64>> {
        let (subs, inputs) = node_inputs(nodes, self.bases.u[0].d_in());
        self.eval(&subs, inputs.view())
    }

    pub fn eval_flux_nodes(&self, nodes: &[QuadNode]) -> Result<Vec<Vec<f64>>> {
        let (subs, inputs) = node_inputs(nodes, self.bases.u[0].d_in());
        self.eval_flux(&subs, inputs.view())
    }
}

fn node_inputs(nodes: &[QuadNode], width: usize) -> (Vec<usize>, Array2<f64>) {
    let rows: Vec<Vec<f64>> = nodes.iter().map(|n| n.input()).collect();
    (nodes.iter().map(|n| n.subdomain).collect(), points_matrix(rows.iter().map(|r| r.as_slice()), width))
}

/// Least-squares solve of an assembled system.
pub fn solve_system(sys: &BlockSystem, bases: &Bases, cfg: &SolverConfig) -> Result<(Solution, SolveDiagnostics)> {
    let sol = lstsq(sys.matrix.view(), sys.rhs.view(), cfg)?;
    Ok((Solution::from_coefficients(bases.clone(), sol.x.view())?, sol.diagnostics))
}
