//! Cross-checks against independently computed references.

use gossip_core::affine::{self, substochastic_schur_check, AffineSystem, Orientation};
use gossip_core::engine::fit_geometric_envelope;
use gossip_core::localization::{self, OrientedGraph};
use gossip_core::numerics::laplacian_pseudo_solve;
use gossip_core::opinions::{self, build_network};
use gossip_core::pagerank::{self, WebGraph};
use gossip_core::{DenseMatrix, Vector};
use nalgebra::{DMatrix, SymmetricEigen};

/// `L† rhs` from a full symmetric eigendecomposition, dropping the null space.
fn eigen_pseudo_solve(l: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let m = DMatrix::from_fn(n, n, |i, j| l[(i, j)]);
    let eig = SymmetricEigen::new(m);
    let mut out = vec![0.0; n];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() < 1e-9 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let coeff: f64 = v.iter().zip(rhs).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for i in 0..n {
            out[i] += coeff * v[i];
        }
    }
    out
}

#[test]
fn pseudo_solve_matches_eigendecomposition_on_triangle() {
    let g = OrientedGraph::complete(3).unwrap();
    let l = localization::laplacian(&g);
    let rhs = [2.0, -1.0, -1.0];
    let ours = laplacian_pseudo_solve(&l, &rhs).unwrap();
    let reference = eigen_pseudo_solve(&l, &rhs);
    assert!(ours.max_abs_diff(&Vector::from(reference)) < 1e-12);
    // L = 3I - 11ᵀ on the triangle, so L† rhs = rhs / 3 for zero-mean rhs.
    assert!(ours.max_abs_diff(&Vector::from([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0])) < 1e-14);
}

#[test]
fn pseudo_solve_matches_eigendecomposition_on_assorted_graphs() {
    let graphs = [
        OrientedGraph::path(6).unwrap(),
        OrientedGraph::complete(7).unwrap(),
        OrientedGraph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap(),
    ];
    for g in &graphs {
        let n = g.node_count();
        let l = localization::laplacian(g);
        let rhs = Vector::from((0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 1.3).collect::<Vec<_>>())
            .demeaned();
        let ours = laplacian_pseudo_solve(&l, &rhs).unwrap();
        let reference = eigen_pseudo_solve(&l, &rhs);
        assert!(ours.max_abs_diff(&Vector::from(reference)) < 1e-10);
    }
}

#[test]
fn ls_oracle_matches_eigen_reference_with_noise() {
    let g = OrientedGraph::complete(6).unwrap();
    let s: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let meas = localization::synth_measurements(&g, &s, 0.3, 9).unwrap();
    let ours = localization::ls_oracle(&g, &meas).unwrap();
    let rhs = localization::incidence_matrix(&g).transpose().mul_vec(&meas.b);
    let reference = eigen_pseudo_solve(&localization::laplacian(&g), &rhs);
    assert!(ours.max_abs_diff(&Vector::from(reference)) < 1e-12);
}

#[test]
fn sync_iteration_approaches_fixed_point_geometrically() {
    let q = DenseMatrix::from_rows(&[
        [0.2, 0.5, 0.3, 0.0],
        [0.1, 0.1, 0.4, 0.4],
        [0.0, 0.6, 0.2, 0.2],
        [0.3, 0.0, 0.3, 0.4],
    ])
    .unwrap();
    let sys = AffineSystem::new(q.scale(0.9), Vector::from([1.0, -2.0, 0.5, 3.0])).unwrap();
    let x_star = affine::fixed_point(&sys, false).unwrap();
    let traj = affine::iterate_sync(&sys, &[10.0, 10.0, -10.0, 0.0], 200).unwrap();
    let points: Vec<(f64, f64)> = (50..=200)
        .map(|k| (k as f64, traj.states[k].max_abs_diff(&x_star)))
        .collect();
    let fit = fit_geometric_envelope(&points).unwrap();
    assert!(fit.rate < 1.0);
    assert!((fit.rate - 0.9).abs() < 0.02, "{fit:?}");
    for &(k, e) in &points {
        assert!(e <= fit.constant * fit.rate.powf(k) * (1.0 + 1e-9));
    }
}

#[test]
fn pagerank_fixed_point_is_google_eigenvector() {
    for seed in 0..5 {
        let g = WebGraph::random_strongly_connected(25, 3, seed).unwrap();
        for m in [0.05, 0.15, 0.5] {
            let pi = pagerank::pagerank_exact(&g, m).unwrap();
            let google = pagerank::google_matrix(&g, m).unwrap();
            assert!(google.mul_vec(&pi).max_abs_diff(&pi) <= 1e-9);
            assert!(pi.iter().all(|&p| p > 0.0));
            assert!((pi.sum() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn pagerank_system_passes_column_substochastic_check() {
    let g = WebGraph::random_strongly_connected(10, 2, 3).unwrap();
    let sys = pagerank::pagerank_system(&g, 0.15).unwrap();
    assert!(substochastic_schur_check(sys.matrix(), Orientation::Columns).unwrap());
}

fn three_node() -> opinions::InfluenceNetwork {
    let w = DenseMatrix::from_rows(&[
        [0.5, 0.5, 0.0],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.0, 0.5, 0.5],
    ])
    .unwrap();
    build_network(w, Vector::from([1.0, 0.0, -1.0])).unwrap()
}

#[test]
fn opinion_sync_step_matches_generic_affine_iteration() {
    let net = three_node();
    let sys = opinions::fj_system(&net).unwrap();
    let traj = affine::iterate_sync(&sys, net.prejudice(), 25).unwrap();
    let mut x = net.prejudice().clone();
    for k in 1..=25 {
        x = opinions::fj_sync_step(&net, &x).unwrap();
        assert!(x.max_abs_diff(&traj.states[k]) < 1e-15);
    }
}

#[test]
fn opinion_system_is_substochastic_stable() {
    let net = three_node();
    let sys = opinions::fj_system(&net).unwrap();
    assert!(substochastic_schur_check(sys.matrix(), Orientation::Rows).unwrap());
    assert!(gossip_core::numerics::spectral_radius_estimate(sys.matrix())
        .unwrap()
        .is_stable());
}

#[test]
fn localization_gradient_system_fixed_point_is_ls_estimate() {
    let g = OrientedGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
    let meas = localization::MeasurementSet::new(&g, Vector::from([1.0, 0.7, 1.4, -2.9, 1.5])).unwrap();
    let oracle = localization::ls_oracle(&g, &meas).unwrap();
    let sys = localization::gradient_system(&g, &meas, 0.2).unwrap();
    let x = affine::fixed_point(&sys, false).unwrap();
    assert!(x.max_abs_diff(&oracle) < 1e-12);
    let traj = localization::grad_descent(&g, &meas, 0.2, 2000, false).unwrap();
    assert!(traj.last().max_abs_diff(&oracle) < 1e-10);
}
