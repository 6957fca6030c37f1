//! Timing and accuracy sweep over graph size and series order.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use gfwt::{
    adjoint, build_propagators, eig_decompose, forward_exact, forward_fast, gaussian_point_cloud_graph,
    product_coefficients, swiss_roll, wtw_apply, CoefficientPyramid, FilterBank, FourierApprox, FourierOptions, Sparsify,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::settings::RunConfig;
use crate::Status;

pub const COLUMNS: &str =
    "n,edges,theta,order,matvecs,max_rel_error,bound,status,setup_s,exact_s,forward_s,wtw_s,sequential_s,matvec_s";

struct Row {
    n: usize,
    edges: usize,
    theta: f64,
    order: usize,
    matvecs: usize,
    max_rel_error: f64,
    bound: f64,
    setup_s: f64,
    exact_s: f64,
    forward_s: f64,
    wtw_s: f64,
    sequential_s: f64,
    matvec_s: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn sweep_size(cfg: &RunConfig, n: usize, theta: f64) -> Result<Vec<Row>> {
    let cloud = swiss_roll(n, cfg.seed)?;
    let sparsify = cfg.sparsify.unwrap_or(Sparsify::Knn(10));
    let g = gaussian_point_cloud_graph(&cloud.points, cfg.sigma, sparsify)?;
    g.require_connected()?;
    let (op, setup_s) = timed(|| eig_decompose(&g.laplacian()).and_then(|d| d.fractional(theta)));
    let op = op?;
    let bank = FilterBank::new(&cfg.bank, op.r_max_bound())?;
    bank.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
    let signals: Vec<Vec<f64>> =
        (0..cfg.signals).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let (exact, exact_s) = timed(|| signals.iter().map(|f| forward_exact(f, &op, &bank)).collect::<gfwt::Result<Vec<_>>>());
    let exact = exact?;
    let per = |total: f64| total / cfg.signals as f64;

    let mut rows = Vec::new();
    for &m in &cfg.orders {
        let opts = FourierOptions { margin: cfg.margin, ..FourierOptions::with_order(m) };
        let (prepared, prep_s) = timed(|| -> gfwt::Result<_> {
            let fa = FourierApprox::new(&bank, &opts)?;
            let pp = build_propagators(&op, fa.period())?;
            Ok((fa, pp))
        });
        let (fa, pp) = prepared?;
        let mut fast: Vec<CoefficientPyramid> = Vec::new();
        let (_, forward_s) = timed(|| -> gfwt::Result<()> {
            for f in &signals {
                fast.push(forward_fast(f, &pp, &fa)?);
            }
            Ok(())
        });
        let matvecs = pp.matvec_count() / cfg.signals;
        let mut max_rel_error = 0.0f64;
        for ((f, a), e) in signals.iter().zip(&fast).zip(&exact) {
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            max_rel_error = max_rel_error.max(a.max_abs_diff(e) / norm);
        }
        let d = product_coefficients(&fa);
        let (single, wtw_s) = timed(|| signals.iter().map(|f| wtw_apply(f, &pp, &d)).collect::<gfwt::Result<Vec<_>>>());
        single?;
        let (seq, sequential_s) = timed(|| {
            signals
                .iter()
                .map(|f| forward_fast(f, &pp, &fa).and_then(|c| adjoint(&c, &pp, &fa)))
                .collect::<gfwt::Result<Vec<_>>>()
        });
        seq?;
        let probe: Vec<gfwt::C64> = signals[0].iter().map(|&v| gfwt::C64::new(v, 0.0)).collect();
        let reps = 20;
        let (_, mv) = timed(|| {
            for _ in 0..reps {
                std::hint::black_box(pp.apply_plus(&probe));
            }
        });
        rows.push(Row {
            n,
            edges: g.edge_count(),
            theta,
            order: m,
            matvecs,
            max_rel_error,
            bound: fa.max_bound(),
            setup_s: setup_s + prep_s,
            exact_s: per(exact_s),
            forward_s: per(forward_s),
            wtw_s: per(wtw_s),
            sequential_s: per(sequential_s),
            matvec_s: mv / reps as f64,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log t` against `log n`.
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / k, sy / k);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    (den > 0.0).then(|| num / den)
}

pub fn bench(cfg: &RunConfig, out: &Path) -> Result<Status> {
    let mut w = crate::commands::create_file(out)?;
    for c in cfg.header() {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{COLUMNS}")?;
    let mut matvec_times = Vec::new();
    for &theta in &cfg.thetas {
        for &n in &cfg.sizes {
            match sweep_size(cfg, n, theta) {
                Ok(rows) => {
                    for r in rows {
                        writeln!(
                            w,
                            "{},{},{},{},{},{:e},{:e},ok,{:.6},{:.6},{:.6},{:.6},{:.6},{:.9}",
                            r.n,
                            r.edges,
                            r.theta,
                            r.order,
                            r.matvecs,
                            r.max_rel_error,
                            r.bound,
                            r.setup_s,
                            r.exact_s,
                            r.forward_s,
                            r.wtw_s,
                            r.sequential_s,
                            r.matvec_s
                        )?;
                        println!(
                            "n={} theta={} M={}: matvecs={} error={:.2e} bound={:.2e} wtw={:.2}ms sequential={:.2}ms",
                            r.n,
                            r.theta,
                            r.order,
                            r.matvecs,
                            r.max_rel_error,
                            r.bound,
                            1e3 * r.wtw_s,
                            1e3 * r.sequential_s
                        );
                        matvec_times.push((r.n as f64, r.matvec_s));
                    }
                }
                Err(e) => {
                    let msg = e.to_string().replace(',', ";");
                    writeln!(w, "{n},,{theta},,,,,failed: {msg},,,,,,")?;
                    eprintln!("n={n} theta={theta}: {msg}");
                }
            }
        }
    }
    if let Some(slope) = loglog_slope(&matvec_times) {
        writeln!(w, "# matvec_time_exponent={slope:.3}")?;
        println!("propagator matvec time grows as n^{slope:.2}");
    }
    w.flush()?;
    Ok(Status::Success)
}
