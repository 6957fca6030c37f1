#![allow(dead_code)]

use gfwt::{build_graph, Graph, C64};
use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus extra edges with probability `p`, weights in [0.1, 2].
pub fn random_connected_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = r.random_range(0..i);
        edges.push((j, i, r.random_range(0.1..2.0)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < p && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
                edges.push((i, j, r.random_range(0.1..2.0)));
            }
        }
    }
    build_graph(n, &edges).unwrap()
}

pub fn path_graph(n: usize) -> Graph {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    build_graph(n, &edges).unwrap()
}

pub fn random_signal(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn random_complex(n: usize, r: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect()
}

pub fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut l = DMatrix::zeros(n, n);
    for e in g.edges() {
        l[(e.i, e.j)] -= e.w;
        l[(e.j, e.i)] -= e.w;
        l[(e.i, e.i)] += e.w;
        l[(e.j, e.j)] += e.w;
    }
    l
}

/// Default band-pass kernel written out branch by branch.
pub fn oracle_g(x: f64) -> f64 {
    if x < 1.0 {
        x * x
    } else if x <= 2.0 {
        -5.0 + 11.0 * x - 6.0 * x * x + x * x * x
    } else {
        4.0 / (x * x)
    }
}

/// Peak of the default cubic, at the interior root of its derivative.
pub fn oracle_rho() -> f64 {
    oracle_g(2.0 - (1.0f64 / 3.0).sqrt())
}

pub fn oracle_h(x: f64, r_max: f64, k: f64) -> f64 {
    let width = 0.6 * r_max / k;
    oracle_rho() * (-(x / width).powi(4)).exp()
}

pub fn oracle_scales(r_max: f64, j: usize, k: f64) -> Vec<f64> {
    let (hi, lo) = (2.0 * k / r_max, 1.0 / r_max);
    if j == 1 {
        return vec![hi];
    }
    (0..j).map(|i| hi * (lo / hi).powf(i as f64 / (j - 1) as f64)).collect()
}

/// Real spectral wavelet transform: band b is `Σ_ℓ k_b(λ_ℓ) χ_ℓ χ_ℓᵀ f`.
pub fn oracle_sgwt(l: &DMatrix<f64>, f: &[f64], j: usize, k: f64) -> Vec<Vec<f64>> {
    let eig = SymmetricEigen::new(l.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)) * (1.0 + 1e-9);
    let scales = oracle_scales(lmax, j, k);
    let fv = nalgebra::DVector::from_column_slice(f);
    let mut out = Vec::new();
    for band in 0..=j {
        let mut acc = nalgebra::DVector::zeros(f.len());
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            let lam = lam.max(0.0);
            let w = if band == 0 { oracle_h(lam, lmax, k) } else { oracle_g(scales[band - 1] * lam) };
            let v = eig.eigenvectors.column(idx);
            acc += v * (w * v.dot(&fv));
        }
        out.push(acc.iter().copied().collect());
    }
    out
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &gfwt::CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| Complex::new(m[[i, j]].re, m[[i, j]].im));
    let mut ev: Vec<f64> = SymmetricEigen::new(dm).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn real_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Coefficients of `Σ_j conj(p_j(x)) p_j(x)` by expanding every product term.
pub fn oracle_product(rows: &[Vec<C64>]) -> std::collections::BTreeMap<i64, C64> {
    let mut out = std::collections::BTreeMap::new();
    for row in rows {
        let m = (row.len() as i64 - 1) / 2;
        for a in -m..=m {
            for b in -m..=m {
                let term = row[(a + m) as usize].conj() * row[(b + m) as usize];
                *out.entry(b - a).or_insert(C64::new(0.0, 0.0)) += term;
            }
        }
    }
    out
}
