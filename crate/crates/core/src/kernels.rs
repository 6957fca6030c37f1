//! Wavelet and scaling kernels, scale selection and frame bounds.

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::linalg;

/// A real kernel on `[0, ∞)`.
pub trait SpectralKernel: Send + Sync {
    /// Kernel value at `x ≥ 0`.
    fn value(&self, x: f64) -> f64;

    /// Points where the kernel is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `lim_{x→0} k(x)/x²`, or `None` when it is infinite.
    fn origin_ratio(&self) -> Option<f64>;
}

/// Checked evaluation.
pub fn eval_kernel<K: SpectralKernel + ?Sized>(k: &K, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::NegativeArgument(x));
    }
    Ok(k.value(x))
}

/// Band-pass kernel: `(x/x1)^α` below `x1`, a cubic between `x1` and `x2`,
/// and `(x2/x)^β` above `x2`. The cubic matches value and slope at both
/// joins, so the kernel is continuously differentiable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineKernel {
    alpha: u32,
    beta: u32,
    x1: f64,
    x2: f64,
    coeffs: [f64; 4],
}

pub fn make_spline_kernel(alpha: u32, beta: u32, x1: f64, x2: f64) -> Result<SplineKernel> {
    if alpha < 1 || beta < 1 {
        return Err(Error::InvalidParameter(format!("alpha and beta must be >= 1, got {alpha}, {beta}")));
    }
    if !(x1 > 0.0 && x1.is_finite() && x2.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < x1 < x2, got x1={x1}, x2={x2}")));
    }
    if x2 - x1 <= 1e-12 * x2.abs() {
        return Err(Error::SingularSystem(format!("x1={x1} and x2={x2} do not bracket an interval")));
    }
    let (a, b) = (f64::from(alpha), f64::from(beta));
    let m = ndarray::array![
        [1.0, x1, x1 * x1, x1 * x1 * x1],
        [1.0, x2, x2 * x2, x2 * x2 * x2],
        [0.0, 1.0, 2.0 * x1, 3.0 * x1 * x1],
        [0.0, 1.0, 2.0 * x2, 3.0 * x2 * x2],
    ];
    let c = linalg::solve(&m, &[1.0, 1.0, a / x1, -b / x2])?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite spline coefficients".into()));
    }
    Ok(SplineKernel { alpha, beta, x1, x2, coeffs: [c[0], c[1], c[2], c[3]] })
}

impl Default for SplineKernel {
    fn default() -> Self {
        make_spline_kernel(2, 2, 1.0, 2.0).expect("default spline is well posed")
    }
}

impl SplineKernel {
    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    /// Cubic coefficients, constant term first.
    pub fn coefficients(&self) -> [f64; 4] {
        self.coeffs
    }

    fn cubic(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    /// Global maximum of the kernel and where it is attained.
    pub fn peak(&self) -> (f64, f64) {
        let [_, c1, c2, c3] = self.coeffs;
        let mut best = (self.x1, self.value(self.x1));
        let mut consider = |x: f64| {
            if x > self.x1 && x < self.x2 {
                let v = self.cubic(x);
                if v > best.1 {
                    best = (x, v);
                }
            }
        };
        // s'(x) = c1 + 2 c2 x + 3 c3 x²
        let (qa, qb, qc) = (3.0 * c3, 2.0 * c2, c1);
        if qa.abs() < 1e-300 {
            if qb != 0.0 {
                consider(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                consider((-qb + sq) / (2.0 * qa));
                consider((-qb - sq) / (2.0 * qa));
            }
        }
        if self.value(self.x2) > best.1 {
            best = (self.x2, self.value(self.x2));
        }
        best
    }
}

impl SpectralKernel for SplineKernel {
    fn value(&self, x: f64) -> f64 {
        if x < self.x1 {
            (x / self.x1).powi(self.alpha as i32)
        } else if x <= self.x2 {
            self.cubic(x)
        } else {
            (self.x2 / x).powi(self.beta as i32)
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.x1, self.x2]
    }

    fn origin_ratio(&self) -> Option<f64> {
        match self.alpha {
            1 => None,
            2 => Some(1.0 / (self.x1 * self.x1)),
            _ => Some(0.0),
        }
    }
}

/// Low-pass kernel `ρ · exp(-(x / width)⁴)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingKernel {
    rho: f64,
    width: f64,
}

/// Fraction of the smallest design eigenvalue at which the scaling kernel
/// has dropped to `ρ/e`.
pub const SCALING_WIDTH_FACTOR: f64 = 0.6;

impl ScalingKernel {
    pub fn new(rho: f64, width: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) || !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter(format!("scaling kernel needs rho >= 0 and width > 0, got {rho}, {width}")));
        }
        Ok(Self { rho, width })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

impl SpectralKernel for ScalingKernel {
    fn value(&self, x: f64) -> f64 {
        self.rho * (-(x / self.width).powi(4)).exp()
    }

    fn origin_ratio(&self) -> Option<f64> {
        if self.rho == 0.0 {
            Some(0.0)
        } else {
            None
        }
    }
}

/// Scaling kernel with `λ_min = r_max / K` and width `0.6 λ_min`.
pub fn make_scaling_kernel(r_max: f64, k_ratio: f64, rho: f64) -> Result<ScalingKernel> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
    }
    if !(k_ratio > 1.0 && k_ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!("K must exceed 1, got {k_ratio}")));
    }
    ScalingKernel::new(rho, SCALING_WIDTH_FACTOR * r_max / k_ratio)
}

/// Log-spaced scales from `x2·K/r_max` (coarsest) down to `x1/r_max` (finest).
pub fn select_scales(r_max: f64, count: usize, k_ratio: f64, x1: f64, x2: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter("need at least one scale".into()));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
    }
    if !(k_ratio > 1.0 && k_ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!("K must exceed 1, got {k_ratio}")));
    }
    if !(x1 > 0.0 && x2 > x1) {
        return Err(Error::InvalidParameter(format!("need 0 < x1 < x2, got {x1}, {x2}")));
    }
    let coarse = x2 * k_ratio / r_max;
    let fine = x1 / r_max;
    if count == 1 {
        return Ok(vec![coarse]);
    }
    let (lc, lf) = (coarse.ln(), fine.ln());
    let steps = (count - 1) as f64;
    let mut scales: Vec<f64> = (0..count).map(|i| (lc + (lf - lc) * i as f64 / steps).exp()).collect();
    scales[0] = coarse;
    scales[count - 1] = fine;
    Ok(scales)
}

/// Design parameters of a filter bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankParams {
    pub alpha: u32,
    pub beta: u32,
    pub x1: f64,
    pub x2: f64,
    /// Number of wavelet scales.
    pub scales: usize,
    /// Ratio between `r_max` and the smallest design eigenvalue.
    pub k_ratio: f64,
}

impl Default for BankParams {
    fn default() -> Self {
        Self { alpha: 2, beta: 2, x1: 1.0, x2: 2.0, scales: 5, k_ratio: 20.0 }
    }
}

impl BankParams {
    /// Read `alpha`, `beta`, `x1`, `x2`, `J`, `K` and an optional explicit
    /// `scales` list, falling back to `self` for missing keys.
    pub fn from_key_values(&self, kv: &KeyValues) -> Result<(Self, Option<Vec<f64>>)> {
        let mut p = *self;
        if let Some(v) = kv.get("alpha")? {
            p.alpha = v;
        }
        if let Some(v) = kv.get("beta")? {
            p.beta = v;
        }
        if let Some(v) = kv.get("x1")? {
            p.x1 = v;
        }
        if let Some(v) = kv.get("x2")? {
            p.x2 = v;
        }
        if let Some(v) = kv.get("J")? {
            p.scales = v;
        }
        if let Some(v) = kv.get("K")? {
            p.k_ratio = v;
        }
        let explicit: Option<Vec<f64>> = kv.get_list("scales")?;
        if let Some(s) = &explicit {
            p.scales = s.len();
        }
        Ok((p, explicit))
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "alpha={}\nbeta={}\nx1={}\nx2={}\nJ={}\nK={}\n",
            self.alpha, self.beta, self.x1, self.x2, self.scales, self.k_ratio
        )
    }
}

/// Wavelet kernel, scaling kernel and scales for one spectral interval
/// `[0, r_max]`. Band 0 is the scaling band, band `j ≥ 1` is `g(t_j x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    g: SplineKernel,
    h: ScalingKernel,
    scales: Vec<f64>,
    k_ratio: f64,
    r_max: f64,
}

impl FilterBank {
    pub fn new(params: &BankParams, r_max: f64) -> Result<Self> {
        let scales = select_scales(r_max, params.scales, params.k_ratio, params.x1, params.x2)?;
        Self::with_scales(params, r_max, scales)
    }

    pub fn with_scales(params: &BankParams, r_max: f64, scales: Vec<f64>) -> Result<Self> {
        let g = make_spline_kernel(params.alpha, params.beta, params.x1, params.x2)?;
        let h = make_scaling_kernel(r_max, params.k_ratio, g.peak().1)?;
        let mut bank = Self::from_parts(g, h, scales, r_max)?;
        bank.k_ratio = params.k_ratio;
        Ok(bank)
    }

    pub fn from_parts(g: SplineKernel, h: ScalingKernel, scales: Vec<f64>, r_max: f64) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidParameter("need at least one scale".into()));
        }
        if scales.iter().any(|&t| !(t > 0.0 && t.is_finite())) || scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("scales must be positive and strictly decreasing".into()));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
        }
        let k_ratio = r_max * SCALING_WIDTH_FACTOR / h.width();
        Ok(Self { g, h, scales, k_ratio, r_max })
    }

    pub fn wavelet(&self) -> &SplineKernel {
        &self.g
    }

    pub fn scaling(&self) -> &ScalingKernel {
        &self.h
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn k_ratio(&self) -> f64 {
        self.k_ratio
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Scaling band plus one band per scale.
    pub fn n_bands(&self) -> usize {
        self.scales.len() + 1
    }

    pub fn band_value(&self, band: usize, x: f64) -> f64 {
        if band == 0 {
            self.h.value(x)
        } else {
            self.g.value(self.scales[band - 1] * x)
        }
    }

    /// Non-smooth points of band `band` as a function of `x`.
    pub fn band_breakpoints(&self, band: usize) -> Vec<f64> {
        if band == 0 {
            Vec::new()
        } else {
            let t = self.scales[band - 1];
            self.g.breakpoints().into_iter().map(|b| b / t).collect()
        }
    }

    /// `G(r) = h²(r) + Σ_j g²(t_j r)`.
    pub fn frame_function(&self, r: f64) -> f64 {
        (0..self.n_bands()).map(|b| self.band_value(b, r).powi(2)).sum()
    }

    /// Frame bounds, failing when the lower bound is not positive.
    pub fn validate(&self) -> Result<(f64, f64)> {
        let (a, b) = frame_bounds(self, DEFAULT_FRAME_GRID);
        if a > 0.0 {
            Ok((a, b))
        } else {
            Err(Error::FrameFailure { lower: a })
        }
    }
}

pub const DEFAULT_FRAME_GRID: usize = 2000;

/// Minimum and maximum of `G` over a uniform grid of `grid_points`
/// (at least 100) on `[0, r_max]`.
pub fn frame_bounds(bank: &FilterBank, grid_points: usize) -> (f64, f64) {
    let n = grid_points.max(100);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = bank.r_max * i as f64 / (n - 1) as f64;
        let v = bank.frame_function(r);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Trapezoid approximation of `∫_0^upper k(x)/x² dx`.
pub fn admissibility_integral<K: SpectralKernel + ?Sized>(k: &K, upper: f64, steps: usize) -> Result<f64> {
    if !(upper > 0.0 && upper.is_finite()) || steps == 0 {
        return Err(Error::InvalidParameter(format!("need upper > 0 and steps > 0, got {upper}, {steps}")));
    }
    if let Some(&last) = k.breakpoints().last() {
        if upper <= last {
            return Err(Error::InvalidParameter(format!("upper {upper} must exceed {last}")));
        }
    }
    let at_zero = k
        .origin_ratio()
        .ok_or_else(|| Error::NonConvergent("integrand k(x)/x² is unbounded at the origin".into()))?;
    let h = upper / steps as f64;
    let f = |x: f64| k.value(x) / (x * x);
    let interior: f64 = (1..steps).map(|i| f(i as f64 * h)).sum();
    Ok(h * (0.5 * (at_zero + f(upper)) + interior))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spline_coefficients() {
        let g = SplineKernel::default();
        let expected = [-5.0, 11.0, -6.0, 1.0];
        for (c, e) in g.coefficients().iter().zip(expected) {
            assert!((c - e).abs() < 1e-12, "{c} vs {e}");
        }
    }

    #[test]
    fn default_spline_values() {
        let g = SplineKernel::default();
        assert_eq!(g.value(0.0), 0.0);
        assert!((g.value(1.0) - 1.0).abs() < 1e-12);
        assert!((g.value(2.0) - 1.0).abs() < 1e-12);
        assert_eq!(g.value(0.5), 0.25);
        assert_eq!(g.value(4.0), 0.25);
        assert!((g.value(1.5) - 1.375).abs() < 1e-12);
        assert!((g.value(10.0) - 0.04).abs() < 1e-15);
        assert!(matches!(eval_kernel(&g, -1.0), Err(Error::NegativeArgument(_))));
    }

    #[test]
    fn degenerate_spline_rejected() {
        assert!(matches!(make_spline_kernel(2, 2, 1.0, 1.0), Err(Error::SingularSystem(_))));
        assert!(make_spline_kernel(0, 2, 1.0, 2.0).is_err());
        assert!(make_spline_kernel(2, 2, 0.0, 2.0).is_err());
    }

    #[test]
    fn spline_peak_inside_transition() {
        let (x, v) = SplineKernel::default().peak();
        let x_expected = 2.0 - (1.0f64 / 3.0).sqrt();
        assert!((x - x_expected).abs() < 1e-12);
        let s = -5.0 + 11.0 * x_expected - 6.0 * x_expected.powi(2) + x_expected.powi(3);
        assert!((v - s).abs() < 1e-12);
    }

    #[test]
    fn scaling_kernel_values() {
        let h = make_scaling_kernel(10.0, 20.0, 1.5).unwrap();
        assert_eq!(h.value(0.0), 1.5);
        let lambda_min = 10.0 / 20.0;
        assert!((h.value(0.6 * lambda_min) - 1.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(make_scaling_kernel(0.0, 20.0, 1.0).is_err());
        assert!(make_scaling_kernel(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn scales_log_spaced() {
        let t = select_scales(10.0, 4, 20.0, 1.0, 2.0).unwrap();
        let expected = [4.0, 4.0 * 40f64.powf(-1.0 / 3.0), 4.0 * 40f64.powf(-2.0 / 3.0), 0.1];
        for (a, b) in t.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        assert_eq!(select_scales(10.0, 1, 20.0, 1.0, 2.0).unwrap(), vec![4.0]);
        assert_eq!(select_scales(10.0, 2, 20.0, 1.0, 2.0).unwrap(), vec![4.0, 0.1]);
        assert!(select_scales(10.0, 0, 20.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn zero_scaling_bank_fails_frame() {
        let g = SplineKernel::default();
        let h = ScalingKernel::new(0.0, 1.0).unwrap();
        let bank = FilterBank::from_parts(g, h, vec![1.0], 5.0).unwrap();
        let (a, _) = frame_bounds(&bank, 100);
        assert_eq!(a, 0.0);
        assert!(matches!(bank.validate(), Err(Error::FrameFailure { .. })));
    }

    #[test]
    fn default_bank_frame() {
        let bank = FilterBank::new(&BankParams::default(), 7.3).unwrap();
        let (a, b) = bank.validate().unwrap();
        assert!(a > 0.0);
        let rho = bank.scaling().rho();
        assert!((bank.frame_function(0.0) - rho * rho).abs() < 1e-15);
        assert!(b >= bank.wavelet().peak().1);
    }

    #[test]
    fn admissibility() {
        let g = SplineKernel::default();
        let coarse = admissibility_integral(&g, 100.0, 400_000).unwrap();
        let fine = admissibility_integral(&g, 100.0, 800_000).unwrap();
        assert!(coarse > 0.0 && (coarse - fine).abs() < 1e-6);
        let g1 = make_spline_kernel(1, 2, 1.0, 2.0).unwrap();
        assert!(matches!(admissibility_integral(&g1, 100.0, 1000), Err(Error::NonConvergent(_))));
        let zero = ScalingKernel::new(0.0, 1.0).unwrap();
        assert_eq!(admissibility_integral(&zero, 10.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn config_round_trip() {
        let p = BankParams { alpha: 3, beta: 1, x1: 0.5, x2: 2.5, scales: 4, k_ratio: 15.0 };
        let kv = KeyValues::parse(&p.to_key_values()).unwrap();
        let (back, explicit) = BankParams::default().from_key_values(&kv).unwrap();
        assert_eq!(back, p);
        assert!(explicit.is_none());
        let kv = KeyValues::parse("scales=3,2,1").unwrap();
        let (p2, explicit) = BankParams::default().from_key_values(&kv).unwrap();
        assert_eq!(p2.scales, 3);
        assert_eq!(explicit.unwrap(), vec![3.0, 2.0, 1.0]);
    }
}
