//! Fast transform: each band kernel is replaced by a truncated Fourier
//! series in the fractional Laplacian, `p(L_θ) = Σ_k c_k F_k` with
//! `F_k = exp(i 2π k L_θ / P)`, evaluated by repeated application of the
//! propagators `F_1` and `F_{-1} = F_1ᴴ`.
//!
//! The series period `P` is the approximation interval `[0, r_max]`
//! extended by a relative margin. On the margin the band kernel is blended
//! smoothly into its mirror image, so the periodic extension has no jump at
//! `x = P` and the coefficients decay quickly. With a zero margin the
//! kernel is expanded as is on `[0, r_max]`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{check_len, Error, Result};
use crate::exact::CoefficientPyramid;
use crate::kernels::{FilterBank, SpectralKernel};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::spectral::FractionalOperator;

pub const DEFAULT_ORDER: usize = 40;
pub const DEFAULT_MARGIN: f64 = 0.1;
pub const DEFAULT_ERROR_GRID: usize = 20_000;

/// Default quadrature panel count for truncation order `m`.
pub fn default_quadrature(m: usize) -> usize {
    (8 * m).max(1024)
}

const GAUSS_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GAUSS_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// `(1/P) ∫_0^P f(x) e^{-i2πkx/P} dx` for `k = 0..=m`, by 8-point
/// Gauss-Legendre on `q` uniform panels, each split at `breaks`.
fn series_coefficients(f: &dyn Fn(f64) -> f64, breaks: &[f64], period: f64, m: usize, q: usize) -> Vec<C64> {
    let mut sorted: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && *b < period).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out = vec![ZERO; m + 1];
    let mut accumulate = |a: f64, b: f64| {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            for x in [mid - half * node, mid + half * node] {
                let fx = weight * half * f(x);
                let step = C64::from_polar(1.0, -2.0 * PI * x / period);
                let mut z = C64::new(1.0, 0.0);
                for c in out.iter_mut() {
                    *c += fx * z;
                    z *= step;
                }
            }
        }
    };
    let width = period / q as f64;
    let mut bi = 0;
    for p in 0..q {
        let a = p as f64 * width;
        let b = if p + 1 == q { period } else { (p + 1) as f64 * width };
        let mut left = a;
        while bi < sorted.len() && sorted[bi] <= a {
            bi += 1;
        }
        while bi < sorted.len() && sorted[bi] < b {
            accumulate(left, sorted[bi]);
            left = sorted[bi];
            bi += 1;
        }
        accumulate(left, b);
    }
    out.iter_mut().for_each(|c| *c /= period);
    out
}

/// Fourier coefficients `c_k`, `k = 0..=m`, of `x ↦ kernel(t x)` on one
/// period `[0, period]`; `c_{-k} = conj(c_k)`.
pub fn fourier_coefficients<K: SpectralKernel + ?Sized>(
    kernel: &K,
    t: f64,
    period: f64,
    m: usize,
    q: usize,
) -> Result<Vec<C64>> {
    if m == 0 || q < 8 * m {
        return Err(Error::InvalidParameter(format!("need M >= 1 and Q >= 8M, got M={m}, Q={q}")));
    }
    if !(t > 0.0 && t.is_finite() && period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter(format!("need t > 0 and period > 0, got {t}, {period}")));
    }
    let breaks: Vec<f64> = kernel.breakpoints().iter().map(|b| b / t).collect();
    Ok(series_coefficients(&|x| kernel.value(t * x), &breaks, period, m, q))
}

/// Smooth step from 0 at `u = 0` to 1 at `u = 1`, flat to all orders at both ends.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

/// Evaluate a two-sided series `Σ_{k=-M}^{M} c_k e^{i2πkx/P}` (`c` indexed `k + M`).
pub fn eval_series(coeffs: &[C64], period: f64, x: f64) -> C64 {
    let m = (coeffs.len() - 1) / 2;
    let step = C64::from_polar(1.0, 2.0 * PI * x / period);
    let mut acc = coeffs[m];
    let mut zp = C64::new(1.0, 0.0);
    for k in 1..=m {
        zp *= step;
        acc += coeffs[m + k] * zp + coeffs[m - k] * zp.conj();
    }
    acc
}

fn two_sided(half: &[C64]) -> Vec<C64> {
    let m = half.len() - 1;
    let mut out = vec![ZERO; 2 * m + 1];
    for k in 0..=m {
        out[m + k] = half[k];
        out[m - k] = half[k].conj();
    }
    out[m] = C64::new(half[0].re, 0.0);
    out
}

/// Settings for [`FourierApprox`].
#[derive(Debug, Clone, PartialEq)]
pub struct FourierOptions {
    /// Truncation order per band; a single entry applies to every band.
    pub orders: Vec<usize>,
    /// Relative extension of the period beyond `r_max`.
    pub margin: f64,
    /// Quadrature panels; `None` uses [`default_quadrature`].
    pub quadrature: Option<usize>,
    /// Grid size for the sup-error bounds.
    pub error_grid: usize,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self { orders: vec![DEFAULT_ORDER], margin: DEFAULT_MARGIN, quadrature: None, error_grid: DEFAULT_ERROR_GRID }
    }
}

impl FourierOptions {
    pub fn with_order(m: usize) -> Self {
        Self { orders: vec![m], ..Self::default() }
    }
}

/// Truncated Fourier series of every band kernel of a filter bank over
/// `[0, r_max]`, with measured sup-error bounds.
#[derive(Debug, Clone)]
pub struct FourierApprox {
    r_max: f64,
    period: f64,
    scales: Vec<f64>,
    coeffs: Vec<Vec<C64>>,
    bounds: Vec<f64>,
}

impl FourierApprox {
    pub fn new(bank: &FilterBank, options: &FourierOptions) -> Result<Self> {
        let n_bands = bank.n_bands();
        let orders: Vec<usize> = match options.orders.len() {
            1 => vec![options.orders[0]; n_bands],
            l if l == n_bands => options.orders.clone(),
            l => return Err(Error::DimensionMismatch { expected: n_bands, got: l }),
        };
        if orders.contains(&0) {
            return Err(Error::InvalidParameter("truncation orders must be >= 1".into()));
        }
        if !(options.margin >= 0.0 && options.margin.is_finite()) {
            return Err(Error::InvalidParameter(format!("margin must be >= 0, got {}", options.margin)));
        }
        let r_max = bank.r_max();
        let period = r_max * (1.0 + options.margin);
        let mut coeffs = Vec::with_capacity(n_bands);
        for (band, &m) in orders.iter().enumerate() {
            let q = options.quadrature.unwrap_or_else(|| default_quadrature(m));
            if q < 8 * m {
                return Err(Error::InvalidParameter(format!("need Q >= 8M, got Q={q}, M={m}")));
            }
            let f = |x: f64| periodized(bank, band, r_max, period, x);
            let mut breaks = bank.band_breakpoints(band);
            breaks.extend(bank.band_breakpoints(band).iter().map(|b| period - b));
            breaks.push(r_max);
            breaks.push(period - r_max);
            coeffs.push(two_sided(&series_coefficients(&f, &breaks, period, m, q)));
        }
        let mut fa = Self { r_max, period, scales: bank.scales().to_vec(), coeffs, bounds: Vec::new() };
        fa.bounds = (0..n_bands).map(|b| error_bound(&fa, bank, b, options.error_grid)).collect();
        Ok(fa)
    }

    /// Build from explicit two-sided coefficient rows (row `j` indexed `k + M_j`).
    pub fn from_coefficients(r_max: f64, period: f64, scales: Vec<f64>, coeffs: Vec<Vec<C64>>) -> Result<Self> {
        if coeffs.iter().any(|c| c.len() % 2 == 0) {
            return Err(Error::InvalidParameter("coefficient rows must have odd length 2M+1".into()));
        }
        check_len(scales.len() + 1, coeffs.len())?;
        if !(r_max > 0.0 && period >= r_max) {
            return Err(Error::InvalidParameter(format!("need 0 < r_max <= period, got {r_max}, {period}")));
        }
        let bounds = vec![f64::NAN; coeffs.len()];
        Ok(Self { r_max, period, scales, coeffs, bounds })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn n_bands(&self) -> usize {
        self.coeffs.len()
    }

    pub fn order(&self, band: usize) -> usize {
        (self.coeffs[band].len() - 1) / 2
    }

    pub fn max_order(&self) -> usize {
        (0..self.n_bands()).map(|b| self.order(b)).max().unwrap_or(0)
    }

    /// Two-sided coefficients of band `band`, indexed `k + M`.
    pub fn coefficients(&self, band: usize) -> &[C64] {
        &self.coeffs[band]
    }

    /// Measured sup-errors per band (NaN when built from raw coefficients).
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn max_bound(&self) -> f64 {
        self.bounds.iter().fold(0.0f64, |m, &b| m.max(b))
    }

    /// Truncated series of band `band` at `x`.
    pub fn eval(&self, band: usize, x: f64) -> C64 {
        eval_series(&self.coeffs[band], self.period, x)
    }

    /// Min and max of `Σ_j |p_j(x)|²` over a uniform grid on `[0, r_max]`.
    pub fn frame_bounds(&self, grid: usize) -> (f64, f64) {
        let n = grid.max(100);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let x = self.r_max * i as f64 / (n - 1) as f64;
            let v: f64 = (0..self.n_bands()).map(|b| self.eval(b, x).norm_sqr()).sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

fn periodized(bank: &FilterBank, band: usize, r_max: f64, period: f64, x: f64) -> f64 {
    if x <= r_max || period <= r_max {
        return bank.band_value(band, x);
    }
    let w = smooth_step((x - r_max) / (period - r_max));
    (1.0 - w) * bank.band_value(band, x) + w * bank.band_value(band, (period - x).max(0.0))
}

/// `max |k(x) - p(x)|` over a uniform grid of `grid` (at least 1000) points on `[0, r_max]`.
pub fn error_bound(fa: &FourierApprox, bank: &FilterBank, band: usize, grid: usize) -> f64 {
    let n = grid.max(1000);
    (0..n)
        .map(|i| {
            let x = fa.r_max * i as f64 / (n - 1) as f64;
            (fa.eval(band, x) - bank.band_value(band, x)).norm()
        })
        .fold(0.0f64, f64::max)
}

#[derive(Debug)]
enum Backend {
    Dense { plus: CMatrix, minus: CMatrix },
    /// `exp(±i A) x` by scaled Taylor steps, `A = 2π L_θ / P`.
    Action { generator: CMatrix, steps: usize },
}

/// The propagators `F_{+1} = exp(i2πL_θ/P)` and `F_{-1} = F_{+1}ᴴ`, with a
/// counter of propagator-vector products.
#[derive(Debug)]
pub struct PropagatorPair {
    theta: f64,
    period: f64,
    real: bool,
    backend: Backend,
    matvecs: AtomicUsize,
}

/// Dense propagators `γ diag(e^{i2πr/P}) γᴴ` from the spectral factorization.
pub fn build_propagators(op: &FractionalOperator, period: f64) -> Result<PropagatorPair> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    let phases: Vec<C64> = op.r().iter().map(|&r| C64::from_polar(1.0, 2.0 * PI * r / period)).collect();
    let gamma = op.gamma();
    let plus = if op.is_real() {
        let re = gamma.mapv(|z| z.re);
        let mut cos_part = re.clone();
        let mut sin_part = re.clone();
        for ((mut c, mut s), p) in cos_part.columns_mut().into_iter().zip(sin_part.columns_mut()).zip(&phases) {
            c.mapv_inplace(|v| v * p.re);
            s.mapv_inplace(|v| v * p.im);
        }
        let a = cos_part.dot(&re.t());
        let b = sin_part.dot(&re.t());
        let mut out = CMatrix::zeros(a.raw_dim());
        ndarray::Zip::from(&mut out).and(&a).and(&b).for_each(|o, &x, &y| *o = C64::new(x, y));
        out
    } else {
        let mut scaled = gamma.clone();
        for (mut col, p) in scaled.columns_mut().into_iter().zip(&phases) {
            col.mapv_inplace(|z| z * p);
        }
        scaled.dot(&linalg::adjoint(gamma))
    };
    if plus.iter().any(|z| !z.is_finite()) {
        return Err(Error::NumericalFailure("non-finite propagator entries".into()));
    }
    let minus = linalg::adjoint(&plus);
    Ok(PropagatorPair { theta: op.theta(), period, real: op.is_real(), backend: Backend::Dense { plus, minus }, matvecs: AtomicUsize::new(0) })
}

/// Propagators applied as matrix-exponential actions on `L_θ`, without
/// forming `F_{±1}`. Slower; used to cross-check the dense construction.
pub fn build_propagators_action(op: &FractionalOperator, period: f64) -> Result<PropagatorPair> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    let generator = op.l_theta().mapv(|z| z * (2.0 * PI / period));
    let norm_bound = generator
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let steps = norm_bound.ceil().max(1.0) as usize;
    Ok(PropagatorPair {
        theta: op.theta(),
        period,
        real: op.is_real(),
        backend: Backend::Action { generator, steps },
        matvecs: AtomicUsize::new(0),
    })
}

fn expm_action(generator: &CMatrix, steps: usize, sign: f64, x: &[C64]) -> Vec<C64> {
    let scale = C64::new(0.0, sign / steps as f64);
    let mut y = x.to_vec();
    for _ in 0..steps {
        let mut term = y.clone();
        let mut sum = y.clone();
        for k in 1..80 {
            let next = linalg::complex_matvec(generator, &term);
            let factor = scale / k as f64;
            term = next.into_iter().map(|z| z * factor).collect();
            linalg::axpy(&mut sum, C64::new(1.0, 0.0), &term);
            if linalg::norm(&term) <= 1e-17 * linalg::norm(&sum) {
                break;
            }
        }
        y = sum;
    }
    y
}

impl PropagatorPair {
    pub fn n(&self) -> usize {
        match &self.backend {
            Backend::Dense { plus, .. } => plus.nrows(),
            Backend::Action { generator, .. } => generator.nrows(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// True when `L_θ` is real, so `F_{-1} x = conj(F_{+1} conj(x))`.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Dense `F_{+1}`, if this pair stores it.
    pub fn plus_matrix(&self) -> Option<&CMatrix> {
        match &self.backend {
            Backend::Dense { plus, .. } => Some(plus),
            Backend::Action { .. } => None,
        }
    }

    pub fn minus_matrix(&self) -> Option<&CMatrix> {
        match &self.backend {
            Backend::Dense { minus, .. } => Some(minus),
            Backend::Action { .. } => None,
        }
    }

    pub fn apply_plus(&self, x: &[C64]) -> Vec<C64> {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        match &self.backend {
            Backend::Dense { plus, .. } => linalg::complex_matvec(plus, x),
            Backend::Action { generator, steps } => expm_action(generator, *steps, 1.0, x),
        }
    }

    pub fn apply_minus(&self, x: &[C64]) -> Vec<C64> {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        match &self.backend {
            Backend::Dense { minus, .. } => linalg::complex_matvec(minus, x),
            Backend::Action { generator, steps } => expm_action(generator, *steps, -1.0, x),
        }
    }

    /// Propagator-vector products performed since construction or the last reset.
    pub fn matvec_count(&self) -> usize {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.matvecs.store(0, Ordering::Relaxed);
    }
}

/// `Σ_{k=-M}^{M} c_k F_k f` with `c` indexed `k + M`; `2M` propagator products.
pub fn series_apply(pp: &PropagatorPair, coeffs: &[C64], f: &[C64]) -> Result<Vec<C64>> {
    check_len(pp.n(), f.len())?;
    if coeffs.len() % 2 == 0 {
        return Err(Error::InvalidParameter("coefficient sequence must have odd length".into()));
    }
    let m = (coeffs.len() - 1) / 2;
    let mut out: Vec<C64> = f.iter().map(|z| z * coeffs[m]).collect();
    let mut v = f.to_vec();
    for k in 1..=m {
        v = pp.apply_plus(&v);
        linalg::axpy(&mut out, coeffs[m + k], &v);
    }
    let mut u = f.to_vec();
    for k in 1..=m {
        u = pp.apply_minus(&u);
        linalg::axpy(&mut out, coeffs[m - k], &u);
    }
    Ok(out)
}

fn check_bands(pp: &PropagatorPair, fa: &FourierApprox) -> Result<()> {
    if fa.period() != pp.period() {
        return Err(Error::InvalidParameter(format!(
            "series period {} differs from propagator period {}",
            fa.period(),
            pp.period()
        )));
    }
    Ok(())
}

/// All bands of the fast transform from one shared pair of recursions:
/// `2 max_j M_j` propagator products per signal.
pub fn forward_fast(f: &[f64], pp: &PropagatorPair, fa: &FourierApprox) -> Result<CoefficientPyramid> {
    forward_fast_complex(&linalg::to_complex(f), pp, fa)
}

pub fn forward_fast_complex(f: &[C64], pp: &PropagatorPair, fa: &FourierApprox) -> Result<CoefficientPyramid> {
    check_len(pp.n(), f.len())?;
    check_bands(pp, fa)?;
    let mut bands: Vec<Vec<C64>> = (0..fa.n_bands())
        .map(|b| {
            let c0 = fa.coefficients(b)[fa.order(b)];
            f.iter().map(|z| z * c0).collect()
        })
        .collect();
    let max_m = fa.max_order();
    let mut v = f.to_vec();
    for k in 1..=max_m {
        v = pp.apply_plus(&v);
        for (b, band) in bands.iter_mut().enumerate() {
            let m = fa.order(b);
            if k <= m {
                linalg::axpy(band, fa.coefficients(b)[m + k], &v);
            }
        }
    }
    let mut u = f.to_vec();
    for k in 1..=max_m {
        u = pp.apply_minus(&u);
        for (b, band) in bands.iter_mut().enumerate() {
            let m = fa.order(b);
            if k <= m {
                linalg::axpy(band, fa.coefficients(b)[m - k], &u);
            }
        }
    }
    Ok(CoefficientPyramid { theta: pp.theta(), scales: fa.scales().to_vec(), bands })
}

/// As [`forward_fast`], but when `L_θ` is real the negative modes are taken
/// as conjugates of the positive ones (`F_{-k} f = conj(F_k f)` for real
/// `f`), halving the propagator products. Falls back to the dual recursion
/// otherwise.
pub fn forward_fast_conjugate(f: &[f64], pp: &PropagatorPair, fa: &FourierApprox) -> Result<CoefficientPyramid> {
    if !pp.is_real() {
        return forward_fast(f, pp, fa);
    }
    check_len(pp.n(), f.len())?;
    check_bands(pp, fa)?;
    let fc = linalg::to_complex(f);
    let mut bands: Vec<Vec<C64>> = (0..fa.n_bands())
        .map(|b| {
            let c0 = fa.coefficients(b)[fa.order(b)];
            fc.iter().map(|z| z * c0).collect()
        })
        .collect();
    let mut v = fc;
    for k in 1..=fa.max_order() {
        v = pp.apply_plus(&v);
        let vc: Vec<C64> = v.iter().map(|z| z.conj()).collect();
        for (b, band) in bands.iter_mut().enumerate() {
            let m = fa.order(b);
            if k <= m {
                linalg::axpy(band, fa.coefficients(b)[m + k], &v);
                linalg::axpy(band, fa.coefficients(b)[m - k], &vc);
            }
        }
    }
    Ok(CoefficientPyramid { theta: pp.theta(), scales: fa.scales().to_vec(), bands })
}

/// Adjoint of the fast transform, `Σ_j p_j*(L_θ) η_j` with
/// `p_j* = Σ_k conj(c_{j,k}) F_{-k}`, by one Horner sweep per propagator
/// direction: `2 max_j M_j` products in total.
pub fn adjoint(eta: &CoefficientPyramid, pp: &PropagatorPair, fa: &FourierApprox) -> Result<Vec<C64>> {
    check_len(fa.n_bands(), eta.n_bands())?;
    check_bands(pp, fa)?;
    let n = pp.n();
    for band in &eta.bands {
        check_len(n, band.len())?;
    }
    let max_m = fa.max_order();
    // Mode k collects Σ_j conj(c_{j, sign·k}) η_j.
    let gather = |k: usize, sign: i64| -> Vec<C64> {
        let mut acc = vec![ZERO; n];
        for (b, band) in eta.bands.iter().enumerate() {
            let m = fa.order(b);
            if k <= m {
                let idx = (m as i64 + sign * k as i64) as usize;
                linalg::axpy(&mut acc, fa.coefficients(b)[idx].conj(), band);
            }
        }
        acc
    };
    let mut out = gather(0, 1);
    for (sign, apply) in [(1i64, 0usize), (-1, 1)] {
        if max_m == 0 {
            break;
        }
        let step = |x: &[C64]| if apply == 0 { pp.apply_minus(x) } else { pp.apply_plus(x) };
        let mut acc = gather(max_m, sign);
        for k in (1..max_m).rev() {
            acc = step(&acc);
            linalg::axpy(&mut acc, C64::new(1.0, 0.0), &gather(k, sign));
        }
        acc = step(&acc);
        linalg::axpy(&mut out, C64::new(1.0, 0.0), &acc);
    }
    Ok(out)
}

/// Autocorrelation `d_m = Σ_i conj(c_i) c_{i+m}` of a two-sided sequence.
fn autocorrelation(c: &[C64]) -> Vec<C64> {
    let len = c.len();
    let mut d = vec![ZERO; 2 * len - 1];
    let shift = len as i64 - 1;
    for (i, ci) in c.iter().enumerate() {
        for (k, ck) in c.iter().enumerate() {
            d[(k as i64 - i as i64 + shift) as usize] += ci.conj() * ck;
        }
    }
    d
}

/// Coefficients of `Σ_j |p_j|²` as one series of order `2 max_j M_j`.
pub fn product_coefficients(fa: &FourierApprox) -> Vec<C64> {
    let big = 2 * fa.max_order();
    let mut d = vec![ZERO; 2 * big + 1];
    for b in 0..fa.n_bands() {
        let row = autocorrelation(fa.coefficients(b));
        let off = big - 2 * fa.order(b);
        for (i, v) in row.into_iter().enumerate() {
            d[off + i] += v;
        }
    }
    let mid = big;
    d[mid] = C64::new(d[mid].re, 0.0);
    for k in 1..=big {
        let avg = (d[mid + k] + d[mid - k].conj()) * 0.5;
        d[mid + k] = avg;
        d[mid - k] = avg.conj();
    }
    d
}

/// `W̃*W̃ f` evaluated as the single series with coefficients `d`.
pub fn wtw_apply(f: &[f64], pp: &PropagatorPair, d: &[C64]) -> Result<Vec<C64>> {
    series_apply(pp, d, &linalg::to_complex(f))
}

/// Krylov solver for the normal equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Conjugate gradients.
    ConjugateGradient,
    /// Conjugate residuals: the conjugate-gradient variant minimizing the
    /// residual norm, so the residual history is non-increasing.
    ConjugateResidual,
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub signal: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `‖b - A x_k‖ / ‖b‖` after each iteration, starting at 1.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// `‖Im x‖ / ‖x‖` of the complex iterate before taking its real part.
    pub imag_residue: f64,
}

/// Relative imaginary residue above which a reconstruction is flagged.
pub const IMAG_WARNING: f64 = 1e-6;

impl CgReport {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    pub fn imag_warning(&self) -> bool {
        self.imag_residue > IMAG_WARNING
    }

    /// `Err(NotConverged)` when the tolerance was not reached.
    pub fn check(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.residual() })
        }
    }
}

/// Solve `(W̃*W̃) f = W̃* c` from zero by conjugate residuals, stopping at
/// relative residual `tol` or after `max_iter` iterations. Non-convergence
/// is reported in the result, not as an error; see [`CgReport::check`].
pub fn reconstruct_cg(
    p: &CoefficientPyramid,
    pp: &PropagatorPair,
    fa: &FourierApprox,
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    reconstruct_with(p, pp, fa, tol, max_iter, Solver::ConjugateResidual)
}

pub fn reconstruct_with(
    p: &CoefficientPyramid,
    pp: &PropagatorPair,
    fa: &FourierApprox,
    tol: f64,
    max_iter: usize,
    solver: Solver,
) -> Result<CgReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let (lower, _) = fa.frame_bounds(2000);
    if lower <= 0.0 {
        return Err(Error::FrameFailure { lower });
    }
    let d = product_coefficients(fa);
    let apply = |x: &[C64]| series_apply(pp, &d, x);
    let b = adjoint(p, pp, fa)?;
    let n = b.len();
    let b_norm = linalg::norm(&b);
    let mut x = vec![ZERO; n];
    let mut residuals = vec![1.0];
    if b_norm == 0.0 {
        return Ok(CgReport { signal: vec![0.0; n], iterations: 0, residuals: vec![0.0], converged: true, imag_residue: 0.0 });
    }
    let mut r = b.clone();
    let mut dir = r.clone();
    let mut iterations = 0;
    let mut converged = false;
    match solver {
        Solver::ConjugateGradient => {
            let mut rs = linalg::norm(&r).powi(2);
            while iterations < max_iter {
                let ad = apply(&dir)?;
                let curv = linalg::inner(&ad, &dir).re;
                if curv <= 0.0 {
                    break;
                }
                let alpha = rs / curv;
                linalg::axpy(&mut x, C64::new(alpha, 0.0), &dir);
                linalg::axpy(&mut r, C64::new(-alpha, 0.0), &ad);
                iterations += 1;
                let rs_new = linalg::norm(&r).powi(2);
                residuals.push(rs_new.sqrt() / b_norm);
                if rs_new.sqrt() <= tol * b_norm {
                    converged = true;
                    break;
                }
                let beta = rs_new / rs;
                rs = rs_new;
                dir = r.iter().zip(&dir).map(|(ri, di)| ri + di * beta).collect();
            }
        }
        Solver::ConjugateResidual => {
            let mut ar = apply(&r)?;
            let mut ad = ar.clone();
            let mut rar = linalg::inner(&ar, &r).re;
            while iterations < max_iter && rar > 0.0 {
                let ad_norm = linalg::norm(&ad).powi(2);
                if ad_norm == 0.0 {
                    break;
                }
                let alpha = rar / ad_norm;
                linalg::axpy(&mut x, C64::new(alpha, 0.0), &dir);
                linalg::axpy(&mut r, C64::new(-alpha, 0.0), &ad);
                iterations += 1;
                let res = linalg::norm(&r);
                residuals.push(res / b_norm);
                if res <= tol * b_norm {
                    converged = true;
                    break;
                }
                ar = apply(&r)?;
                let rar_new = linalg::inner(&ar, &r).re;
                let beta = rar_new / rar;
                rar = rar_new;
                dir = r.iter().zip(&dir).map(|(ri, di)| ri + di * beta).collect();
                ad = ar.iter().zip(&ad).map(|(ai, di)| ai + di * beta).collect();
            }
        }
    }
    let x_norm = linalg::norm(&x);
    let imag = x.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let imag_residue = if x_norm > 0.0 { imag / x_norm } else { 0.0 };
    Ok(CgReport { signal: x.iter().map(|z| z.re).collect(), iterations, residuals, converged, imag_residue })
}
