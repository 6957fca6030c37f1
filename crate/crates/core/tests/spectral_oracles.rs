mod common;

use common::*;
use gfwt::linalg::{adjoint, complex_schur};
use gfwt::{eig_decompose, gfrft, igfrft, CMatrix, C64};

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

#[test]
fn p3_eigenvalues_match_characteristic_polynomial() {
    // det(L - x I) = -x (x - 1) (x - 3) for the unit path on three vertices.
    let dec = eig_decompose(&path_graph(3).laplacian()).unwrap();
    for (got, want) in dec.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn eigenpairs_satisfy_definition() {
    let g = random_connected_graph(40, 0.15, 11);
    let dec = eig_decompose(&g.laplacian()).unwrap();
    let chi = dec.eigenvectors();
    let l = g.laplacian();
    let lnorm = l.gershgorin_bound();
    let orth = chi.t().dot(chi) - ndarray::Array2::<f64>::eye(40);
    assert!(orth.iter().all(|v| v.abs() < 1e-10));
    let resid = l.matrix().dot(chi) - chi * &ndarray::Array1::from(dec.eigenvalues().to_vec());
    assert!(resid.iter().all(|v| v.abs() < 1e-8 * lnorm));
    assert!(dec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn fractional_basis_is_unitary_and_laplacian_hermitian() {
    for (seed, theta) in [(1u64, 0.1), (2, 0.33), (3, 0.5), (4, 0.87), (5, 1.0)] {
        let g = random_connected_graph(30, 0.1, seed);
        let op = eig_decompose(&g.laplacian()).unwrap().fractional(theta).unwrap();
        let gamma = op.gamma();
        let gg = gamma.dot(&adjoint(gamma)) - CMatrix::eye(30);
        assert!(max_abs(&gg) < 1e-10, "theta {theta}: {}", max_abs(&gg));
        let l = op.l_theta();
        assert!(max_abs(&(l - &adjoint(l))) < 1e-10);
    }
}

#[test]
fn order_one_reproduces_laplacian() {
    let g = random_connected_graph(25, 0.2, 9);
    let l = g.laplacian();
    let op = eig_decompose(&l).unwrap().fractional(1.0).unwrap();
    for (a, b) in op.l_theta().iter().zip(l.matrix().iter()) {
        assert!((a - C64::new(*b, 0.0)).norm() < 1e-10);
    }
}

#[test]
fn order_one_transform_is_graph_fourier_transform() {
    let g = random_connected_graph(12, 0.3, 21);
    let dec = eig_decompose(&g.laplacian()).unwrap();
    let op = dec.fractional(1.0).unwrap();
    let chi = dec.eigenvectors();
    let f: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let hat = gfrft(&f, &op).unwrap();
    for (l, z) in hat.iter().enumerate() {
        let direct: f64 = (0..12).map(|i| chi[[i, l]] * f[i]).sum();
        assert!((z - C64::new(direct, 0.0)).norm() < 1e-12);
    }
    for l in [0, 5, 11] {
        let col: Vec<f64> = chi.column(l).to_vec();
        let hat = gfrft(&col, &op).unwrap();
        for (k, z) in hat.iter().enumerate() {
            let want = if k == l { 1.0 } else { 0.0 };
            assert!((z - C64::new(want, 0.0)).norm() < 1e-12);
        }
        let mut e = vec![C64::new(0.0, 0.0); 12];
        e[l] = C64::new(1.0, 0.0);
        let back = igfrft(&e, &op).unwrap();
        for (i, z) in back.iter().enumerate() {
            assert!((z - C64::new(chi[[i, l]], 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn inverse_round_trip_is_real() {
    let g = random_connected_graph(35, 0.1, 31);
    let op = eig_decompose(&g.laplacian()).unwrap().fractional(0.42).unwrap();
    let mut r = rng(3);
    let f = random_signal(35, &mut r);
    let back = igfrft(&gfrft(&f, &op).unwrap(), &op).unwrap();
    for (z, v) in back.iter().zip(&f) {
        assert!((z.re - v).abs() < 1e-10 && z.im.abs() < 1e-10);
    }
    let zero = igfrft(&vec![C64::new(0.0, 0.0); 35], &op).unwrap();
    assert!(zero.iter().all(|z| z.norm() == 0.0));
    assert!(gfrft(&f[..34], &op).is_err());
}

fn sorted_phases(m: &CMatrix) -> Vec<f64> {
    let (eig, _) = complex_schur(m).unwrap();
    let mut p: Vec<f64> = eig.iter().map(|z| z.arg()).collect();
    p.sort_by(f64::total_cmp);
    p
}

#[test]
fn eigenphases_compose_additively() {
    // Pick a graph whose eigenvector matrix has distinct eigenphases away from ±π.
    let mut checked = 0;
    for seed in 0..40u64 {
        let g = random_connected_graph(16, 0.2, 500 + seed);
        let dec = eig_decompose(&g.laplacian()).unwrap();
        let pb = dec.phase_basis().unwrap();
        let mut ph = pb.phases();
        ph.sort_by(f64::total_cmp);
        let distinct = ph.windows(2).all(|w| w[1] - w[0] > 1e-3);
        let clear_of_pi = ph.iter().all(|p| std::f64::consts::PI - p.abs() > 1e-3);
        if !(distinct && clear_of_pi) {
            continue;
        }
        for (t1, t2) in [(0.2, 0.3), (0.45, 0.5), (0.1, 0.9)] {
            let a = dec.fractional(t1).unwrap();
            let b = dec.fractional(t2).unwrap();
            let c = dec.fractional(t1 + t2).unwrap();
            let prod = a.gamma().dot(b.gamma());
            for (x, y) in sorted_phases(&prod).iter().zip(sorted_phases(c.gamma())) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
        checked += 1;
        if checked == 3 {
            break;
        }
    }
    assert!(checked > 0, "no graph with distinct eigenphases found");
}

#[test]
fn p2_half_order_spectrum() {
    let op = eig_decompose(&path_graph(2).laplacian()).unwrap().fractional(0.5).unwrap();
    let ev = hermitian_eigenvalues(op.l_theta());
    assert!(ev[0].abs() < 1e-12);
    assert!((ev[1] - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn multi_component_null_space() {
    let g = gfwt::build_graph(7, &[(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0), (5, 6, 0.5)]).unwrap();
    assert_eq!(g.component_count(), 3);
    let dec = eig_decompose(&g.laplacian()).unwrap();
    assert_eq!(dec.eigenvalues().iter().filter(|&&v| v == 0.0).count(), 3);
    assert!(dec.eigenvalues().iter().all(|&v| v >= -1e-10));
}
