use lrnn_core::assembly::{assemble, solve_system, AssemblyConfig, RowTag};
use lrnn_core::linsolve::SolverConfig;
use lrnn_core::par;
use lrnn_core::problems::{build_bases, example, ExampleOptions, ExampleSpec};
use lrnn_core::quadrature::{quadrature_nodes, relative_l2_error, QuadratureRule};
use lrnn_core::sampling::sample_collocation;

fn small(id: usize, m: usize, n: usize) -> ExampleSpec {
    let mut spec = example(id, &ExampleOptions::default()).unwrap();
    spec.settings.m = m;
    spec.settings.sampling = spec.settings.sampling.clone().with_total(n);
    spec
}

fn solve(spec: &ExampleSpec, seed: u64) -> (ndarray::Array1<f64>, f64) {
    let geom = &spec.problem.geom;
    let pts = sample_collocation(geom, &spec.settings.sampling.clone().with_seed(seed)).unwrap();
    let bases = build_bases(geom, &spec.settings, seed).unwrap();
    let sys = assemble(&spec.problem, &bases, &pts, &AssemblyConfig::default()).unwrap();
    let (sol, _) = solve_system(&sys, &bases, &SolverConfig::default()).unwrap();
    let nodes = quadrature_nodes(geom, &QuadratureRule::GaussLegendre { nodes_per_axis: 12 }).unwrap();
    let err = relative_l2_error(&sol, spec.exact.as_ref(), &nodes).unwrap();
    (sol.coefficients(), err)
}

#[test]
fn same_seed_same_coefficients() {
    let spec = small(1, 60, 600);
    let (a, ea) = solve(&spec, 7);
    let (b, eb) = solve(&spec, 7);
    assert_eq!(a, b);
    assert_eq!(ea.to_bits(), eb.to_bits());
    let (c, _) = solve(&spec, 8);
    assert_ne!(a, c);
}

#[test]
fn sequential_path_is_bitwise_identical() {
    let spec = small(5, 40, 500);
    let (a, _) = solve(&spec, 3);
    let (b, _) = par::sequential(|| solve(&spec, 3));
    assert_eq!(a, b);
}

#[test]
fn small_flower_solve_is_accurate() {
    let (_, err) = solve(&small(1, 80, 1000), 0);
    assert!(err < 1e-3, "relative error {err}");
}

#[test]
fn nested_interfaces_row_counts() {
    let spec = small(3, 30, 1000);
    let geom = &spec.problem.geom;
    let pts = sample_collocation(geom, &spec.settings.sampling).unwrap();
    let bases = build_bases(geom, &spec.settings, 0).unwrap();
    let sys = assemble(&spec.problem, &bases, &pts, &AssemblyConfig::default()).unwrap();
    assert_eq!(sys.cols(), 4 * 30);
    assert_eq!(sys.count(RowTag::Jump), pts.interface_pts.len());
    assert_eq!(sys.count(RowTag::FluxJump), pts.interface_pts.len());
    assert_eq!(sys.rows(), pts.len() + pts.interface_pts.len());
}
