mod common;

use common::*;
use gfwt::fast::{
    adjoint, build_propagators_action, error_bound, eval_series, forward_fast, product_coefficients, reconstruct_cg,
    reconstruct_with, series_apply, wtw_apply, FourierOptions, Solver,
};
use gfwt::linalg::adjoint as conj_transpose;
use gfwt::{
    build_propagators, eig_decompose, forward_exact, fourier_coefficients, select_scales, BankParams, CMatrix,
    CoefficientPyramid, FilterBank, FourierApprox, SplineKernel, C64,
};
use nalgebra::{Complex, DMatrix, DVector};
use rustfft::FftPlanner;

fn to_na(m: &CMatrix) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Complex::new(m[[i, j]].re, m[[i, j]].im))
}

fn setup(n: usize, theta: f64, m: usize, seed: u64) -> (gfwt::FractionalOperator, FilterBank, FourierApprox) {
    let op = eig_decompose(&random_connected_graph(n, 0.15, seed).laplacian()).unwrap().fractional(theta).unwrap();
    let bank = FilterBank::new(&BankParams::default(), op.r_max_bound()).unwrap();
    let fa = FourierApprox::new(&bank, &FourierOptions::with_order(m)).unwrap();
    (op, bank, fa)
}

#[test]
fn coefficients_match_dense_fft() {
    let g = SplineKernel::default();
    let r_max = 6.5;
    let t = select_scales(r_max, 5, 20.0, 1.0, 2.0).unwrap()[0];
    let samples = 1usize << 14;
    let mut buf: Vec<Complex<f64>> = (0..samples)
        .map(|i| Complex::new(gfwt::SpectralKernel::value(&g, t * r_max * i as f64 / samples as f64), 0.0))
        .collect();
    buf[0] = Complex::new(0.5 * (gfwt::SpectralKernel::value(&g, 0.0) + gfwt::SpectralKernel::value(&g, t * r_max)), 0.0);
    FftPlanner::new().plan_fft_forward(samples).process(&mut buf);
    let c = fourier_coefficients(&g, t, r_max, 20, 1024).unwrap();
    for k in 0..=20 {
        let oracle = buf[k] / samples as f64;
        assert!((c[k] - C64::new(oracle.re, oracle.im)).norm() < 1e-8, "k={k}: {} vs {oracle}", c[k]);
    }
}

#[test]
fn truncated_series_represents_itself() {
    struct Mode;
    impl gfwt::SpectralKernel for Mode {
        fn value(&self, x: f64) -> f64 {
            let w = 2.0 * std::f64::consts::PI * x / 4.0;
            0.3 + (w).cos() - 0.25 * (3.0 * w).sin()
        }
        fn origin_ratio(&self) -> Option<f64> {
            None
        }
    }
    let half = fourier_coefficients(&Mode, 1.0, 4.0, 5, 64).unwrap();
    let mut two = vec![C64::new(0.0, 0.0); 11];
    for k in 0..=5 {
        two[5 + k] = half[k];
        two[5 - k] = half[k].conj();
    }
    let worst = (0..2000)
        .map(|i| {
            let x = 4.0 * i as f64 / 1999.0;
            (eval_series(&two, 4.0, x) - C64::new(gfwt::SpectralKernel::value(&Mode, x), 0.0)).norm()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn bounds_shrink_with_order() {
    let bank = FilterBank::new(&BankParams::default(), 9.0).unwrap();
    let coarse = FourierApprox::new(&bank, &FourierOptions::with_order(5)).unwrap();
    let fine = FourierApprox::new(&bank, &FourierOptions::with_order(40)).unwrap();
    for b in 0..bank.n_bands() {
        assert!(fine.bounds()[b] <= coarse.bounds()[b]);
        assert_eq!(error_bound(&fine, &bank, b, 20_000), fine.bounds()[b]);
    }
    let orders: Vec<f64> = [5, 10, 20, 40]
        .iter()
        .map(|&m| FourierApprox::new(&bank, &FourierOptions::with_order(m)).unwrap().max_bound())
        .collect();
    assert!(orders.windows(2).all(|w| w[1] <= w[0] * 1.05), "{orders:?}");
}

#[test]
fn coefficients_are_conjugate_symmetric() {
    let (_, _, fa) = setup(10, 0.5, 12, 1);
    for b in 0..fa.n_bands() {
        let c = fa.coefficients(b);
        let m = fa.order(b);
        for k in 0..=m {
            assert_eq!(c[m + k], c[m - k].conj());
        }
    }
}

#[test]
fn propagator_matches_matrix_exponential_on_p2() {
    let op = eig_decompose(&path_graph(2).laplacian()).unwrap().fractional(1.0).unwrap();
    let period = 2.7;
    let pp = build_propagators(&op, period).unwrap();
    let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]).map(|v| Complex::new(0.0, 2.0 * std::f64::consts::PI * v / period));
    let oracle = l.exp();
    let plus = pp.plus_matrix().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let o = oracle[(i, j)];
            assert!((plus[[i, j]] - C64::new(o.re, o.im)).norm() < 1e-9);
        }
    }
}

#[test]
fn full_period_phase_is_identity() {
    let op = eig_decompose(&path_graph(2).laplacian()).unwrap().fractional(1.0).unwrap();
    let pp = build_propagators(&op, 2.0).unwrap();
    let plus = pp.plus_matrix().unwrap();
    assert!((plus - &CMatrix::eye(2)).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn propagators_unitary_and_paired() {
    for theta in [0.3, 0.8, 1.0] {
        let (op, _, fa) = setup(40, theta, 10, 7);
        let pp = build_propagators(&op, fa.period()).unwrap();
        let plus = pp.plus_matrix().unwrap();
        let uu = plus.dot(&conj_transpose(plus)) - CMatrix::eye(40);
        assert!(uu.iter().all(|z| z.norm() < 1e-9));
        assert_eq!(pp.minus_matrix().unwrap(), &conj_transpose(plus));
    }
}

#[test]
fn series_on_eigenvectors() {
    let (op, _, fa) = setup(20, 0.65, 15, 3);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let mut r = rng(5);
    let f = random_complex(20, &mut r);
    assert_eq!(series_apply(&pp, &[C64::new(1.0, 0.0)], &f).unwrap(), f);
    let gamma = op.gamma();
    let d = product_coefficients(&fa);
    for l in [0, 7, 19] {
        let col: Vec<C64> = gamma.column(l).to_vec();
        let rl = op.r()[l];
        for b in 0..fa.n_bands() {
            let out = series_apply(&pp, fa.coefficients(b), &col).unwrap();
            let p = fa.eval(b, rl);
            for (o, c) in out.iter().zip(&col) {
                assert!((o - p * c).norm() < 1e-10);
            }
        }
        let out = series_apply(&pp, &d, &col).unwrap();
        let frame: f64 = (0..fa.n_bands()).map(|b| fa.eval(b, rl).norm_sqr()).sum();
        for (o, c) in out.iter().zip(&col) {
            assert!((o - c * frame).norm() < 1e-10);
        }
    }
}

#[test]
fn fast_transform_within_bound_for_many_signals() {
    let (op, bank, fa) = setup(48, 0.4, 20, 17);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let mut r = rng(8);
    for _ in 0..100 {
        let f = random_signal(48, &mut r);
        let fast = forward_fast(&f, &pp, &fa).unwrap();
        let exact = forward_exact(&f, &op, &bank).unwrap();
        let fnorm = real_norm(&f);
        for b in 0..bank.n_bands() {
            let err = fast.bands[b].iter().zip(&exact.bands[b]).map(|(a, e)| (a - e).norm()).fold(0.0, f64::max);
            assert!(err <= fa.bounds()[b] * fnorm);
        }
    }
    assert_eq!(forward_fast(&[0.0; 48], &pp, &fa).unwrap().norm(), 0.0);
}

#[test]
fn order_one_fast_matches_exact_on_64_vertices() {
    let (op, bank, fa) = setup(64, 1.0, 50, 23);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let f = random_signal(64, &mut rng(1));
    let fast = forward_fast(&f, &pp, &fa).unwrap();
    let exact = forward_exact(&f, &op, &bank).unwrap();
    assert!(fast.max_abs_diff(&exact) <= fa.max_bound() * real_norm(&f));
}

#[test]
fn matvec_counts() {
    let (op, _, fa) = setup(16, 0.7, 9, 2);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let f = random_signal(16, &mut rng(2));
    forward_fast(&f, &pp, &fa).unwrap();
    assert_eq!(pp.matvec_count(), 2 * 9);
    pp.reset_count();
    wtw_apply(&f, &pp, &product_coefficients(&fa)).unwrap();
    assert_eq!(pp.matvec_count(), 4 * 9);
}

#[test]
fn action_backend_agrees_with_dense_transform() {
    let (op, _, fa) = setup(18, 0.35, 8, 4);
    let dense = build_propagators(&op, fa.period()).unwrap();
    let action = build_propagators_action(&op, fa.period()).unwrap();
    let f = random_signal(18, &mut rng(3));
    let a = forward_fast(&f, &dense, &fa).unwrap();
    let b = forward_fast(&f, &action, &fa).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-10);
}

fn dense_band(pp: &gfwt::PropagatorPair, coeffs: &[C64]) -> CMatrix {
    let n = pp.n();
    let m = (coeffs.len() - 1) / 2;
    let plus = pp.plus_matrix().unwrap();
    let minus = pp.minus_matrix().unwrap();
    let mut out = CMatrix::eye(n).mapv(|z| z * coeffs[m]);
    let mut fp = CMatrix::eye(n);
    let mut fm = CMatrix::eye(n);
    for k in 1..=m {
        fp = plus.dot(&fp);
        fm = minus.dot(&fm);
        out = out + fp.mapv(|z| z * coeffs[m + k]) + fm.mapv(|z| z * coeffs[m - k]);
    }
    out
}

#[test]
fn adjoint_of_delta_band_is_conjugate_column() {
    let (op, _, fa) = setup(24, 0.55, 10, 12);
    let pp = build_propagators(&op, fa.period()).unwrap();
    for band in [0, 3] {
        let pj = dense_band(&pp, fa.coefficients(band));
        for n in [0, 13] {
            let mut eta = CoefficientPyramid::zeros(op.theta(), fa.scales().to_vec(), 24);
            eta.bands[band][n] = C64::new(1.0, 0.0);
            let out = adjoint(&eta, &pp, &fa).unwrap();
            for (i, z) in out.iter().enumerate() {
                assert!((z - pj[[n, i]].conj()).norm() < 1e-11);
            }
        }
    }
}

#[test]
fn analysis_energy_is_real() {
    let (op, _, fa) = setup(30, 0.25, 12, 14);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let f = random_signal(30, &mut rng(9));
    let w = forward_fast(&f, &pp, &fa).unwrap();
    let e = w.inner(&w);
    assert!(e.im.abs() < 1e-12 * e.re && (e.re - w.norm().powi(2)).abs() < 1e-10 * e.re);
    let out = wtw_apply(&f, &pp, &product_coefficients(&fa)).unwrap();
    let imag: f64 = out.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    assert!(imag <= 1e-9 * real_norm(&f));
}

#[test]
fn product_coefficients_small_cases() {
    let a = C64::new(0.5, 0.25);
    let b = C64::new(1.5, 0.0);
    let row = vec![a.conj(), b, a];
    let fa = FourierApprox::from_coefficients(1.0, 1.0, vec![], vec![row.clone()]).unwrap();
    let d = product_coefficients(&fa);
    let oracle = oracle_product(&[row.clone()]);
    for (k, v) in &oracle {
        assert!((d[(k + 2) as usize] - v).norm() < 1e-15);
    }
    let twice = FourierApprox::from_coefficients(1.0, 1.0, vec![1.0], vec![row.clone(), row]).unwrap();
    let d2 = product_coefficients(&twice);
    for (x, y) in d.iter().zip(&d2) {
        assert!((x * 2.0 - y).norm() < 1e-15);
    }
    assert!(d[2].im == 0.0 && d[2].re >= 0.0);
}

#[test]
fn noisy_reconstruction_matches_least_squares() {
    let n = 20;
    let (op, _, fa) = setup(n, 0.6, 12, 44);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let mut r = rng(12);
    let f = random_signal(n, &mut r);
    let mut c = forward_fast(&f, &pp, &fa).unwrap();
    for band in c.bands.iter_mut() {
        for (z, e) in band.iter_mut().zip(random_complex(n, &mut r)) {
            *z += e * 0.01;
        }
    }
    let rep = reconstruct_cg(&c, &pp, &fa, 1e-13, 500).unwrap();
    assert!(rep.converged);
    // Stack the dense band operators and solve the normal equations directly.
    let bands: Vec<DMatrix<Complex<f64>>> = (0..fa.n_bands()).map(|b| to_na(&dense_band(&pp, fa.coefficients(b)))).collect();
    let mut normal = DMatrix::<Complex<f64>>::zeros(n, n);
    let mut rhs = DVector::<Complex<f64>>::zeros(n);
    for (b, w) in bands.iter().enumerate() {
        normal += w.adjoint() * w;
        let cb = DVector::from_iterator(n, c.bands[b].iter().map(|z| Complex::new(z.re, z.im)));
        rhs += w.adjoint() * cb;
    }
    let sol = normal.lu().solve(&rhs).unwrap();
    for (x, s) in rep.signal.iter().zip(sol.iter()) {
        assert!((x - s.re).abs() < 1e-6, "{x} vs {}", s.re);
    }
}

#[test]
fn solvers_agree_and_residuals_decrease() {
    let (op, _, fa) = setup(60, 0.5, 30, 77);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let f = random_signal(60, &mut rng(13));
    let c = forward_fast(&f, &pp, &fa).unwrap();
    let cr = reconstruct_with(&c, &pp, &fa, 1e-10, 200, Solver::ConjugateResidual).unwrap();
    let cg = reconstruct_with(&c, &pp, &fa, 1e-10, 200, Solver::ConjugateGradient).unwrap();
    assert!(cr.converged && cg.converged);
    assert!(cr.residuals.windows(2).all(|w| w[1] <= w[0]));
    for ((a, b), v) in cr.signal.iter().zip(&cg.signal).zip(&f) {
        assert!((a - v).abs() < 1e-7 && (b - v).abs() < 1e-7);
    }
    assert!(!cr.imag_warning());
}

#[test]
fn forced_non_convergence_is_reported() {
    let (op, _, fa) = setup(30, 0.5, 10, 5);
    let pp = build_propagators(&op, fa.period()).unwrap();
    let c = forward_fast(&random_signal(30, &mut rng(4)), &pp, &fa).unwrap();
    let rep = reconstruct_cg(&c, &pp, &fa, 1e-30, 1).unwrap();
    assert!(!rep.converged && rep.iterations == 1);
    assert!(matches!(rep.check(), Err(gfwt::Error::NotConverged { iterations: 1, .. })));
    assert!(reconstruct_cg(&c, &pp, &fa, 0.0, 10).is_err());
}
