//! Laplacian eigendecomposition, fractional Fourier basis and fractional
//! Laplacian.
//!
//! The fractional basis is the principal power `γ = χ^θ` of the orthogonal
//! eigenvector matrix `χ`. It is computed by unitarily diagonalizing `χ`
//! once per graph: the symmetric part `(χ + χᵀ)/2` is diagonalized by a real
//! orthogonal `V`, which block-diagonalizes `χ` itself (eigenvalues
//! `e^{±iφ}` share the eigenvalue `cos φ`). Each small block is put in
//! complex Schur form, giving `χ = V · diag(Q_b Φ_b Q_bᴴ) · Vᵀ`. Raising the
//! unimodular phases to the power `θ` is then cheap for every order, and `γ`
//! can be applied to vectors in `O(N²)` without ever being formed.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use ndarray::s;

use crate::error::{check_len, Error, Result};
use crate::graph::LaplacianMatrix;
use crate::linalg::{self, CMatrix, RMatrix, C64};

/// Default cap on the number of vertices handled with dense factorizations.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

/// Consecutive eigenvalues of `(χ + χᵀ)/2` closer than this share a block.
const CLUSTER_GAP: f64 = 1e-6;

/// Phases within this distance of ±π are snapped to +π.
const PHASE_SNAP: f64 = 1e-9;

/// Eigenpairs of a graph Laplacian with a deterministic basis convention:
/// eigenvalues ascending, each eigenvector's largest-magnitude entry
/// positive, and ties in eigenvalue ordered lexicographically by entries.
#[derive(Debug)]
pub struct SpectralDecomposition {
    lambda: Vec<f64>,
    chi: Arc<RMatrix>,
    phase_basis: OnceLock<Arc<PhaseBasis>>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Eigenvectors as columns.
    pub fn eigenvectors(&self) -> &RMatrix {
        &self.chi
    }

    /// Unitary diagonalization of `χ`, computed on first use.
    pub fn phase_basis(&self) -> Result<&Arc<PhaseBasis>> {
        if let Some(pb) = self.phase_basis.get() {
            return Ok(pb);
        }
        let pb = Arc::new(PhaseBasis::new(&self.chi)?);
        Ok(self.phase_basis.get_or_init(|| pb))
    }

    pub fn fractional(&self, theta: f64) -> Result<FractionalOperator> {
        fractional_basis(self, theta)
    }
}

pub fn eig_decompose(l: &LaplacianMatrix) -> Result<SpectralDecomposition> {
    eig_decompose_with_limit(l, DEFAULT_DENSE_LIMIT)
}

pub fn eig_decompose_with_limit(l: &LaplacianMatrix, limit: usize) -> Result<SpectralDecomposition> {
    let n = l.n();
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    let (mut lambda, mut chi) = linalg::symmetric_eigen(l.matrix())?;
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue".into()));
    }
    let scale = lambda.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-10 * scale;
    for v in lambda.iter_mut() {
        if v.abs() <= zero_tol {
            *v = 0.0;
        } else if *v < 0.0 {
            return Err(Error::NumericalFailure(format!("negative Laplacian eigenvalue {v}")));
        }
    }

    for mut col in chi.columns_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }

    // Order ties lexicographically by eigenvector entries.
    let tie_tol = 1e-10 * scale;
    let mut order: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && lambda[end] - lambda[end - 1] <= tie_tol {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&a, &b| {
                chi.column(a)
                    .iter()
                    .zip(chi.column(b).iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .reverse()
            });
        }
        start = end;
    }
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let old_chi = chi.clone();
        let old_lambda = lambda.clone();
        for (new, &old) in order.iter().enumerate() {
            chi.column_mut(new).assign(&old_chi.column(old));
            lambda[new] = old_lambda[old];
        }
    }

    Ok(SpectralDecomposition { lambda, chi: Arc::new(chi.as_standard_layout().to_owned()), phase_basis: OnceLock::new() })
}

#[derive(Debug, Clone)]
struct PhaseBlock {
    start: usize,
    schur: CMatrix,
    phases: Vec<f64>,
}

/// `χ = V · diag(Q_b diag(e^{iφ}) Q_bᴴ) · Vᵀ` with principal phases in `(-π, π]`.
#[derive(Debug)]
pub struct PhaseBasis {
    v: RMatrix,
    blocks: Vec<PhaseBlock>,
}

impl PhaseBasis {
    pub fn new(chi: &RMatrix) -> Result<Self> {
        let n = chi.nrows();
        let sym = (chi + &chi.t()) * 0.5;
        let (cosines, v) = linalg::symmetric_eigen(&sym)?;
        let chi_v = chi.dot(&v);
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && cosines[end] - cosines[end - 1] <= CLUSTER_GAP {
                end += 1;
            }
            let m = end - start;
            let vb = v.slice(s![.., start..end]);
            let cb = chi_v.slice(s![.., start..end]);
            let t = vb.t().dot(&cb);
            let block = if m == 1 {
                let phase = if t[[0, 0]] >= 0.0 { 0.0 } else { PI };
                PhaseBlock { start, schur: CMatrix::from_elem((1, 1), C64::new(1.0, 0.0)), phases: vec![phase] }
            } else {
                let tc = t.mapv(|x| C64::new(x, 0.0));
                let (eig, q) = linalg::complex_schur(&tc)?;
                let phases = eig.iter().map(|z| snap_phase(z.arg())).collect();
                PhaseBlock { start, schur: q, phases }
            };
            blocks.push(block);
            start = end;
        }
        Ok(Self { v, blocks })
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// All eigenphases of `χ`, in block order.
    pub fn phases(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.phases.iter().copied()).collect()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.phases.len()).max().unwrap_or(0)
    }

    fn block_powers(&self, theta: f64) -> Vec<CMatrix> {
        self.blocks
            .iter()
            .map(|b| {
                let m = b.phases.len();
                let mut scaled = b.schur.clone();
                for (k, &phi) in b.phases.iter().enumerate() {
                    let e = C64::from_polar(1.0, theta * phi);
                    scaled.column_mut(k).mapv_inplace(|z| z * e);
                }
                let out = scaled.dot(&linalg::adjoint(&b.schur));
                debug_assert_eq!(out.nrows(), m);
                out
            })
            .collect()
    }
}

fn snap_phase(phi: f64) -> f64 {
    if PI - phi.abs() <= PHASE_SNAP {
        PI
    } else {
        phi
    }
}

#[derive(Debug)]
enum Basis {
    Identity(usize),
    Real(Arc<RMatrix>),
    Factored { phase: Arc<PhaseBasis>, blocks: Vec<CMatrix> },
    Dense(CMatrix),
}

/// The fractional basis `γ = χ^θ`, the fractional spectrum `r = λ^θ`, and
/// the Hermitian fractional Laplacian `L_θ = γ diag(r) γᴴ`.
///
/// Dense `γ` and `L_θ` are formed lazily; transforms only need products
/// with `γ` and `γᴴ`.
#[derive(Debug)]
pub struct FractionalOperator {
    theta: f64,
    r: Vec<f64>,
    r_max_bound: f64,
    zero_order_convention: bool,
    basis: Basis,
    gamma: OnceLock<CMatrix>,
    l_theta: OnceLock<CMatrix>,
}

/// Relative slack added on top of the largest fractional eigenvalue.
pub const R_MAX_SLACK: f64 = 1e-9;

pub fn fractional_basis(dec: &SpectralDecomposition, theta: f64) -> Result<FractionalOperator> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidOrder(theta));
    }
    let n = dec.n();
    let r: Vec<f64> = dec
        .eigenvalues()
        .iter()
        .map(|&l| if l == 0.0 { 0.0 } else if theta == 0.0 { 1.0 } else { l.powf(theta) })
        .collect();
    let basis = if theta == 0.0 {
        Basis::Identity(n)
    } else if theta == 1.0 {
        Basis::Real(dec.chi.clone())
    } else {
        let phase = dec.phase_basis()?.clone();
        let blocks = phase.block_powers(theta);
        Basis::Factored { phase, blocks }
    };
    Ok(FractionalOperator::assemble(theta, r, basis, theta == 0.0))
}

impl FractionalOperator {
    fn assemble(theta: f64, r: Vec<f64>, basis: Basis, zero_order_convention: bool) -> Self {
        let r_max_bound = r.iter().fold(0.0f64, |m, &v| m.max(v)) * (1.0 + R_MAX_SLACK);
        Self { theta, r, r_max_bound, zero_order_convention, basis, gamma: OnceLock::new(), l_theta: OnceLock::new() }
    }

    /// Build from an explicit unitary `γ` and fractional spectrum `r`.
    pub fn from_dense(theta: f64, gamma: CMatrix, r: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidOrder(theta));
        }
        check_len(gamma.nrows(), gamma.ncols())?;
        check_len(gamma.nrows(), r.len())?;
        Ok(Self::assemble(theta, r, Basis::Dense(gamma), false))
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Fractional spectrum `r_ℓ = λ_ℓ^θ` (with `0^θ = 0`).
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// `max(r) · (1 + 1e-9)`.
    pub fn r_max_bound(&self) -> f64 {
        self.r_max_bound
    }

    /// True for `θ = 0`, where `r` keeps `0` on the Laplacian null space
    /// instead of `0^0 = 1`.
    pub fn zero_order_convention(&self) -> bool {
        self.zero_order_convention
    }

    /// True when `γ` (and hence `L_θ`) is real: the orders 0 and 1.
    pub fn is_real(&self) -> bool {
        matches!(self.basis, Basis::Identity(_) | Basis::Real(_))
    }

    pub fn gamma(&self) -> &CMatrix {
        self.gamma.get_or_init(|| match &self.basis {
            Basis::Identity(n) => CMatrix::eye(*n),
            Basis::Real(chi) => chi.mapv(|x| C64::new(x, 0.0)),
            Basis::Dense(g) => g.clone(),
            Basis::Factored { phase, blocks } => {
                let n = phase.n();
                let mut w = CMatrix::zeros((n, n));
                for (b, pb) in phase.blocks.iter().zip(blocks) {
                    let m = pb.nrows();
                    let vb = phase.v.slice(s![.., b.start..b.start + m]).mapv(|x| C64::new(x, 0.0));
                    w.slice_mut(s![.., b.start..b.start + m]).assign(&vb.dot(pb));
                }
                linalg::complex_times_real(&w, phase.v.t())
            }
        })
    }

    pub fn l_theta(&self) -> &CMatrix {
        self.l_theta.get_or_init(|| {
            let g = self.gamma();
            let mut scaled = g.clone();
            for (mut col, &r) in scaled.columns_mut().into_iter().zip(&self.r) {
                col.mapv_inplace(|z| z * r);
            }
            let mut l = scaled.dot(&linalg::adjoint(g));
            linalg::hermitize(&mut l);
            l
        })
    }

    /// `γ x`.
    pub fn apply_gamma(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n(), x.len())?;
        Ok(match &self.basis {
            Basis::Identity(_) => x.to_vec(),
            Basis::Real(chi) => linalg::real_matvec(chi.view(), x),
            Basis::Dense(g) => linalg::complex_matvec(g, x),
            Basis::Factored { phase, blocks } => {
                let mut y = linalg::real_matvec(phase.v.t(), x);
                apply_blocks(phase, blocks, &mut y, false);
                linalg::real_matvec(phase.v.view(), &y)
            }
        })
    }

    /// `γᴴ x`.
    pub fn apply_gamma_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n(), x.len())?;
        Ok(match &self.basis {
            Basis::Identity(_) => x.to_vec(),
            Basis::Real(chi) => linalg::real_matvec(chi.t(), x),
            Basis::Dense(_) => linalg::complex_matvec(&linalg::adjoint(self.gamma()), x),
            Basis::Factored { phase, blocks } => {
                let mut y = linalg::real_matvec(phase.v.t(), x);
                apply_blocks(phase, blocks, &mut y, true);
                linalg::real_matvec(phase.v.view(), &y)
            }
        })
    }

    /// `γ diag(weights) γᴴ x`, i.e. a spectral function of `L_θ` applied to `x`.
    pub fn spectral_multiply(&self, x: &[C64], weights: &[f64]) -> Result<Vec<C64>> {
        check_len(self.n(), weights.len())?;
        let mut hat = self.apply_gamma_adjoint(x)?;
        for (h, w) in hat.iter_mut().zip(weights) {
            *h *= *w;
        }
        self.apply_gamma(&hat)
    }
}

fn apply_blocks(phase: &PhaseBasis, blocks: &[CMatrix], y: &mut [C64], adjoint: bool) {
    for (b, pb) in phase.blocks.iter().zip(blocks) {
        let m = pb.nrows();
        let seg = &mut y[b.start..b.start + m];
        let input = seg.to_vec();
        for (i, out) in seg.iter_mut().enumerate() {
            *out = (0..m)
                .map(|k| if adjoint { pb[[k, i]].conj() * input[k] } else { pb[[i, k]] * input[k] })
                .sum();
        }
    }
}

/// Forward fractional Fourier transform `γᴴ f`.
pub fn gfrft(f: &[f64], op: &FractionalOperator) -> Result<Vec<C64>> {
    op.apply_gamma_adjoint(&linalg::to_complex(f))
}

/// Inverse fractional Fourier transform `γ f̂`.
pub fn igfrft(spectrum: &[C64], op: &FractionalOperator) -> Result<Vec<C64>> {
    op.apply_gamma(spectrum)
}

/// Estimate an upper bound on the fractional spectrum without a full
/// eigendecomposition: power iteration on `L` for `λ_max`, padded by the
/// final residual and capped by the Gershgorin bound, then raised to `θ`.
pub fn estimate_r_max(l: &LaplacianMatrix, theta: f64, iterations: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidOrder(theta));
    }
    let n = l.n();
    let gersh = l.gershgorin_bound();
    if n == 0 || gersh == 0.0 {
        return Ok(0.0);
    }
    // Alternating signs avoid starting in the constant null vector.
    let mut x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } + (i as f64) * 1e-3).collect();
    let mut rayleigh = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..iterations.max(1) {
        let nx = linalg::real_norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = l.matrix().dot(&ndarray::Array1::from(x.clone())).to_vec();
        rayleigh = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        residual = x.iter().zip(&y).map(|(a, b)| (b - rayleigh * a).powi(2)).sum::<f64>().sqrt();
        x = y;
    }
    let lambda_max = (rayleigh + residual).min(gersh);
    Ok(if theta == 0.0 { 1.0 } else { lambda_max.powf(theta) * (1.0 + R_MAX_SLACK) })
}

const MAGIC: &[u8; 4] = b"FGW1";

/// Serialize as `FGW1`: magic, `N` (u64 LE), `θ` (f64 LE), then `γ` and
/// `L_θ` as row-major little-endian `(re, im)` doubles.
pub fn write_operator<W: Write>(op: &FractionalOperator, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(op.n() as u64).to_le_bytes())?;
    out.write_all(&op.theta.to_le_bytes())?;
    for m in [op.gamma(), op.l_theta()] {
        let mut buf = Vec::with_capacity(m.len() * 16);
        for z in m.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()
}

pub fn read_operator<R: Read>(mut input: R) -> Result<FractionalOperator> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io("<operator>", e))?;
    if bytes.len() < 20 {
        return Err(Error::TruncatedFile { expected: 20, found: bytes.len() });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { found: u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) });
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let theta = f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let expected = n
        .checked_mul(n)
        .and_then(|nn| nn.checked_mul(32))
        .and_then(|b| b.checked_add(20))
        .ok_or_else(|| Error::UnsupportedFormat(format!("dimension {n} too large")))?;
    if bytes.len() != expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    let read_matrix = |offset: usize| -> CMatrix {
        CMatrix::from_shape_fn((n, n), |(i, j)| {
            let at = offset + (i * n + j) * 16;
            let re = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
    };
    let gamma = read_matrix(20);
    let l_theta = read_matrix(20 + n * n * 16);
    // r_ℓ = γ_ℓᴴ L_θ γ_ℓ
    let lg = l_theta.dot(&gamma);
    let r = (0..n)
        .map(|l| {
            let v: C64 = (0..n).map(|i| gamma[[i, l]].conj() * lg[[i, l]]).sum();
            v.re.max(0.0)
        })
        .collect();
    let op = FractionalOperator::from_dense(theta, gamma, r)?;
    let _ = op.l_theta.set(l_theta);
    Ok(op)
}
