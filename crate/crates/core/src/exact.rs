//! Exact fractional wavelet transform through the full spectral factorization.

use std::io::{BufRead, Write};

use crate::error::{check_len, Error, Result};
use crate::kernels::FilterBank;
use crate::linalg::{self, C64};
use crate::spectral::FractionalOperator;

/// Wavelet coefficients: band 0 is the scaling band, bands `1..=J` the
/// wavelet bands at scales `t_1 > … > t_J`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPyramid {
    pub theta: f64,
    pub scales: Vec<f64>,
    pub bands: Vec<Vec<C64>>,
}

impl CoefficientPyramid {
    pub fn zeros(theta: f64, scales: Vec<f64>, n: usize) -> Self {
        let bands = vec![vec![linalg::ZERO; n]; scales.len() + 1];
        Self { theta, scales, bands }
    }

    pub fn n(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// `N (J + 1)`.
    pub fn len(&self) -> usize {
        self.bands.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest absolute imaginary part over all coefficients.
    pub fn max_imag(&self) -> f64 {
        self.bands.iter().flatten().fold(0.0f64, |m, z| m.max(z.im.abs()))
    }

    /// `Σ_j <a_j, b_j>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.bands.iter().zip(&other.bands).map(|(a, b)| linalg::inner(a, b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.bands.iter().map(|b| linalg::norm(b).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.bands
            .iter()
            .flatten()
            .zip(other.bands.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }

    /// CSV with header `band,vertex,re,im`, preceded by `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "# theta={}", self.theta)?;
        let scales: Vec<String> = self.scales.iter().map(|t| t.to_string()).collect();
        writeln!(out, "# scales={}", scales.join(","))?;
        writeln!(out, "band,vertex,re,im")?;
        for (b, band) in self.bands.iter().enumerate() {
            for (v, z) in band.iter().enumerate() {
                writeln!(out, "{b},{v},{},{}", z.re, z.im)?;
            }
        }
        out.flush()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut theta = None;
        let mut scales: Option<Vec<f64>> = None;
        let mut rows: Vec<(usize, usize, C64)> = Vec::new();
        let mut seen_header = false;
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io("<pyramid>", e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("theta=") {
                    theta = Some(v.parse().map_err(|_| Error::parse(lineno, "bad theta"))?);
                } else if let Some(v) = comment.strip_prefix("scales=") {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        v.split(',').filter(|s| !s.is_empty()).map(str::parse).collect();
                    scales = Some(parsed.map_err(|_| Error::parse(lineno, "bad scales"))?);
                }
                continue;
            }
            if !seen_header {
                if line != "band,vertex,re,im" {
                    return Err(Error::parse(lineno, format!("expected header band,vertex,re,im, got {line:?}")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::parse(lineno, "expected 4 fields"));
            }
            let band = fields[0].parse().map_err(|_| Error::parse(lineno, "bad band"))?;
            let vertex = fields[1].parse().map_err(|_| Error::parse(lineno, "bad vertex"))?;
            let re = fields[2].parse().map_err(|_| Error::parse(lineno, "bad re"))?;
            let im = fields[3].parse().map_err(|_| Error::parse(lineno, "bad im"))?;
            rows.push((band, vertex, C64::new(re, im)));
        }
        let theta = theta.ok_or_else(|| Error::parse(0, "missing theta comment"))?;
        let scales = scales.ok_or_else(|| Error::parse(0, "missing scales comment"))?;
        let n_bands = scales.len() + 1;
        if rows.len() % n_bands != 0 {
            return Err(Error::DimensionMismatch { expected: n_bands * (rows.len() / n_bands + 1), got: rows.len() });
        }
        let n = rows.len() / n_bands;
        let mut pyramid = Self::zeros(theta, scales, n);
        let mut filled = vec![false; rows.len()];
        for (band, vertex, z) in rows {
            if band >= n_bands {
                return Err(Error::IndexOutOfRange { index: band, len: n_bands });
            }
            if vertex >= n {
                return Err(Error::IndexOutOfRange { index: vertex, len: n });
            }
            let slot = band * n + vertex;
            if filled[slot] {
                return Err(Error::parse(0, format!("coefficient ({band}, {vertex}) given twice")));
            }
            filled[slot] = true;
            pyramid.bands[band][vertex] = z;
        }
        Ok(pyramid)
    }
}

fn band_weights(op: &FractionalOperator, bank: &FilterBank, band: usize) -> Vec<f64> {
    op.r().iter().map(|&r| bank.band_value(band, r)).collect()
}

/// Band `j` at vertex `n` is `Σ_ℓ k_j(r_ℓ) f̂(ℓ) γ_ℓ(n)`, i.e. `k_j(L_θ) f`.
pub fn forward_exact(f: &[f64], op: &FractionalOperator, bank: &FilterBank) -> Result<CoefficientPyramid> {
    check_len(op.n(), f.len())?;
    bank.validate()?;
    let hat = op.apply_gamma_adjoint(&linalg::to_complex(f))?;
    let bands = (0..bank.n_bands())
        .map(|b| {
            let w = band_weights(op, bank, b);
            let scaled: Vec<C64> = hat.iter().zip(&w).map(|(z, w)| z * w).collect();
            op.apply_gamma(&scaled)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientPyramid { theta: op.theta(), scales: bank.scales().to_vec(), bands })
}

/// Analysis vector `ψ` of band `band` centred at `vertex`, so that
/// `<f, ψ> = Σ_m f(m) conj(ψ(m))` equals the band coefficient at `vertex`.
pub fn atom(op: &FractionalOperator, bank: &FilterBank, band: usize, vertex: usize) -> Result<Vec<C64>> {
    if band >= bank.n_bands() {
        return Err(Error::IndexOutOfRange { index: band, len: bank.n_bands() });
    }
    if vertex >= op.n() {
        return Err(Error::IndexOutOfRange { index: vertex, len: op.n() });
    }
    let mut delta = vec![linalg::ZERO; op.n()];
    delta[vertex] = C64::new(1.0, 0.0);
    op.spectral_multiply(&delta, &band_weights(op, bank, band))
}

/// Spectral-domain pseudoinverse: `f̂ = Σ_j k_j(r) Ŵ_j / G(r)`, returned as
/// the real part of `γ f̂`.
pub fn inverse_exact(p: &CoefficientPyramid, op: &FractionalOperator, bank: &FilterBank) -> Result<Vec<f64>> {
    check_len(bank.n_bands(), p.n_bands())?;
    check_len(op.n(), p.n())?;
    bank.validate()?;
    let n = op.n();
    let mut acc = vec![linalg::ZERO; n];
    for (b, band) in p.bands.iter().enumerate() {
        let hat = op.apply_gamma_adjoint(band)?;
        let w = band_weights(op, bank, b);
        for ((a, z), w) in acc.iter_mut().zip(&hat).zip(&w) {
            *a += z * w;
        }
    }
    for (a, &r) in acc.iter_mut().zip(op.r()) {
        let g = bank.frame_function(r);
        if g <= 0.0 {
            return Err(Error::FrameFailure { lower: g });
        }
        *a /= g;
    }
    Ok(op.apply_gamma(&acc)?.into_iter().map(|z| z.re).collect())
}
