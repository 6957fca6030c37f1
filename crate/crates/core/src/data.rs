//! Datasets and file formats: Swiss roll point clouds, IDX archives, binary
//! PGM images, signal and point CSVs, and band-image dataset augmentation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::image_grid_graph;
use crate::kernels::{BankParams, FilterBank};
use crate::linalg::{self, CMatrix, C64};
use crate::spectral::{eig_decompose, SpectralDecomposition};

/// Seeded 3-D point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub seed: u64,
}

/// Roll coordinates `(t cos t / 4π, s, t sin t / 4π)`.
pub fn swiss_point(s: f64, t: f64) -> [f64; 3] {
    [t * t.cos() / (4.0 * PI), s, t * t.sin() / (4.0 * PI)]
}

/// `n` points with `s ~ U[-1, 1]` and `t ~ U[π, 4π]`.
pub fn swiss_roll(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let s = rng.random_range(-1.0..=1.0);
            let t = rng.random_range(PI..=4.0 * PI);
            swiss_point(s, t)
        })
        .collect();
    Ok(PointCloud { points, seed })
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Unsigned-byte IDX array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile { expected: 4, found: bytes.len() });
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let rank = match magic {
        IDX_IMAGES => 3,
        IDX_LABELS => 1,
        found => return Err(Error::BadMagic { found }),
    };
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::TruncatedFile { expected: header, found: bytes.len() });
    }
    let dims: Vec<usize> = (0..rank)
        .map(|i| {
            let at = 4 + 4 * i;
            u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
        })
        .collect();
    let payload = dims.iter().product::<usize>();
    let expected = header + payload;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::DimensionMismatch { expected, got: bytes.len() });
    }
    Ok(IdxArray { dims, data: bytes[header..].to_vec() })
}

pub fn read_idx(path: &Path) -> Result<IdxArray> {
    parse_idx(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_idx<W: Write>(arr: &IdxArray, mut out: W) -> std::io::Result<()> {
    let magic = if arr.dims.len() == 3 { IDX_IMAGES } else { IDX_LABELS };
    out.write_all(&magic.to_be_bytes())?;
    for &d in &arr.dims {
        out.write_all(&(d as u32).to_be_bytes())?;
    }
    out.write_all(&arr.data)?;
    out.flush()
}

/// 8-bit images of one size, with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Option<Vec<u8>>,
}

impl ImageDataset {
    pub fn from_idx(images: IdxArray, labels: Option<IdxArray>) -> Result<Self> {
        if images.dims.len() != 3 {
            return Err(Error::UnsupportedFormat("image archive must be three-dimensional".into()));
        }
        let (count, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);
        let size = rows * cols;
        let imgs = if size == 0 { vec![Vec::new(); count] } else { images.data.chunks(size).map(<[u8]>::to_vec).collect() };
        let labels = match labels {
            None => None,
            Some(l) => {
                if l.dims.len() != 1 {
                    return Err(Error::UnsupportedFormat("label archive must be one-dimensional".into()));
                }
                if l.dims[0] != count {
                    return Err(Error::DimensionMismatch { expected: count, got: l.dims[0] });
                }
                Some(l.data)
            }
        };
        Ok(Self { rows, cols, images: imgs, labels })
    }

    pub fn load(images: &Path, labels: Option<&Path>) -> Result<Self> {
        Self::from_idx(read_idx(images)?, labels.map(read_idx).transpose()?)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keep the given image indices, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        })
    }
}

/// Seeded uniform subsample of `count` distinct indices from `0..total`, sorted.
pub fn subsample(total: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > total {
        return Err(Error::InvalidParameter(format!("cannot pick {count} of {total} items")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, total, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::TruncatedFile { expected: start + 1, found: bytes.len() });
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Binary `P5` greymap with `maxval ≤ 255`, normalized to `[0, 1]`.
pub fn parse_pgm(bytes: &[u8]) -> Result<Array2<f64>> {
    let mut pos = 0;
    let magic = pgm_token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(Error::UnsupportedFormat(format!("expected binary PGM (P5), found {magic:?}")));
    }
    let mut num = |what: &str| -> Result<usize> {
        let tok = pgm_token(bytes, &mut pos)?;
        tok.parse().map_err(|_| Error::UnsupportedFormat(format!("bad PGM {what} {tok:?}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("PGM maxval {maxval} not in 1..=255")));
    }
    let start = pos + 1;
    let expected = start + width * height;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    let data = &bytes[start..expected];
    Ok(Array2::from_shape_fn((height, width), |(i, j)| f64::from(data[i * width + j]) / maxval as f64))
}

pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    parse_pgm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Write values in `[0, 1]` as an 8-bit `P5` greymap (clamped, rounded).
pub fn write_pgm<W: Write>(image: &Array2<f64>, out: W) -> std::io::Result<()> {
    let bytes: Vec<u8> = image.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    write_pgm_bytes(&bytes, image.nrows(), image.ncols(), out)
}

pub fn write_pgm_bytes<W: Write>(bytes: &[u8], rows: usize, cols: usize, mut out: W) -> std::io::Result<()> {
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    out.write_all(bytes)?;
    out.flush()
}

fn data_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(Error::io("<csv>", e))),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

/// One value per line; `#` comments and a non-numeric first line are skipped.
pub fn read_signal<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, item) in data_lines(input).enumerate() {
        let (line, text) = item?;
        match text.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => {}
            Err(_) => return Err(Error::parse(line, format!("not a number: {text:?}"))),
        }
    }
    Ok(out)
}

pub fn write_signal<W: Write>(values: &[f64], mut out: W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "value")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush()
}

/// Comma-separated coordinates, one point per line; a non-numeric first
/// line is treated as a header.
pub fn read_points<R: BufRead>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (k, item) in data_lines(input).enumerate() {
        let (line, text) = item?;
        let parsed: std::result::Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(p) => {
                if let Some(first) = out.first() {
                    if first.len() != p.len() {
                        return Err(Error::parse(line, format!("expected {} coordinates, got {}", first.len(), p.len())));
                    }
                }
                out.push(p);
            }
            Err(_) if k == 0 => {}
            Err(_) => return Err(Error::parse(line, format!("bad coordinates: {text:?}"))),
        }
    }
    Ok(out)
}

pub fn write_points<W: Write>(points: &[[f64; 3]], mut out: W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "x,y,z")?;
    for p in points {
        writeln!(out, "{},{},{}", p[0], p[1], p[2])?;
    }
    out.flush()
}

/// Which real image a complex band is rendered as.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandMode {
    Magnitude,
    Real,
}

/// Per-band min-max rescaling to `[0, 255]`; constant bands map to 0.
pub fn band_to_bytes(band: &[C64], mode: BandMode) -> Vec<u8> {
    let vals: Vec<f64> = band
        .iter()
        .map(|z| match mode {
            BandMode::Magnitude => z.norm(),
            BandMode::Real => z.re,
        })
        .collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    vals.iter()
        .map(|v| if span > 0.0 { (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect()
}

/// Settings for band-image augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub thetas: Vec<f64>,
    pub bank: BankParams,
    /// Gaussian width of the pixel lattice weights.
    pub theta_w: f64,
    /// Spatial distance cutoff of the pixel lattice.
    pub cutoff: f64,
    pub mode: BandMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            thetas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            bank: BankParams::default(),
            theta_w: 1.0,
            cutoff: 1.0,
            mode: BandMode::Magnitude,
        }
    }
}

/// Output count `images × thetas × (J + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentPlan {
    pub images: usize,
    pub thetas: usize,
    pub bands: usize,
}

impl AugmentPlan {
    pub fn new(images: usize, thetas: usize, scales: usize) -> Self {
        Self { images, thetas, bands: scales + 1 }
    }

    pub fn count(&self) -> usize {
        self.images * self.thetas * self.bands
    }
}

/// Dense band filters `k_j(L_θ)` for one image shape, order and bank.
#[derive(Debug)]
pub struct BandOperators {
    pub filters: Vec<CMatrix>,
}

/// Write-once cache of lattice decompositions and band filters.
#[derive(Debug, Default)]
pub struct OperatorCache {
    decompositions: HashMap<(usize, usize, u64, u64), Arc<SpectralDecomposition>>,
    filters: HashMap<(usize, usize, u64, u64, u64, String), Arc<BandOperators>>,
}

impl OperatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn band_operators(
        &mut self,
        rows: usize,
        cols: usize,
        theta_w: f64,
        cutoff: f64,
        theta: f64,
        bank: &BankParams,
    ) -> Result<Arc<BandOperators>> {
        let key = (rows, cols, theta_w.to_bits(), cutoff.to_bits(), theta.to_bits(), format!("{bank:?}"));
        if let Some(ops) = self.filters.get(&key) {
            return Ok(ops.clone());
        }
        let dkey = (rows, cols, theta_w.to_bits(), cutoff.to_bits());
        let dec = match self.decompositions.get(&dkey) {
            Some(d) => d.clone(),
            None => {
                // The lattice weights depend only on pixel positions.
                let graph = image_grid_graph(Array2::zeros((rows, cols)).view(), theta_w, cutoff)?;
                graph.require_connected()?;
                let d = Arc::new(eig_decompose(&graph.laplacian())?);
                self.decompositions.insert(dkey, d.clone());
                d
            }
        };
        let op = dec.fractional(theta)?;
        let fb = FilterBank::new(bank, op.r_max_bound())?;
        fb.validate()?;
        let gamma = op.gamma();
        let gamma_h = linalg::adjoint(gamma);
        let filters = (0..fb.n_bands())
            .map(|b| {
                let mut scaled = gamma.clone();
                for (mut col, &r) in scaled.columns_mut().into_iter().zip(op.r()) {
                    let w = fb.band_value(b, r);
                    col.mapv_inplace(|z| z * w);
                }
                scaled.dot(&gamma_h)
            })
            .collect();
        let ops = Arc::new(BandOperators { filters });
        self.filters.insert(key, ops.clone());
        Ok(ops)
    }
}

/// One written band image.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub src_index: usize,
    pub theta: f64,
    pub band: usize,
    pub label: Option<u8>,
    pub path: String,
}

pub fn write_manifest<W: Write>(rows: &[ManifestRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "src_index,theta,band,label,path")?;
    for r in rows {
        let label = r.label.map(|l| l.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.src_index, r.theta, r.band, label, r.path)?;
    }
    out.flush()
}

/// Transform every image at every order and write its `J + 1` band images
/// as PGM files under `out_dir`, plus `manifest.csv`. `src_indices` gives
/// the index recorded for each image (defaults to its position).
pub fn augment_dataset(
    ds: &ImageDataset,
    cfg: &AugmentConfig,
    out_dir: &Path,
    src_indices: Option<&[usize]>,
    cache: &mut OperatorCache,
) -> Result<Vec<ManifestRow>> {
    if let Some(&bad) = cfg.thetas.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::InvalidOrder(bad));
    }
    if ds.rows < 2 || ds.cols < 2 {
        return Err(Error::DegenerateInput(format!("images must be at least 2x2, got {}x{}", ds.rows, ds.cols)));
    }
    let size = ds.rows * ds.cols;
    if let Some(bad) = ds.images.iter().position(|im| im.len() != size) {
        return Err(Error::DimensionMismatch { expected: size, got: ds.images[bad].len() });
    }
    if let Some(idx) = src_indices {
        if idx.len() != ds.len() {
            return Err(Error::DimensionMismatch { expected: ds.len(), got: idx.len() });
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let n_bands = cfg.bank.scales + 1;
    let mut manifest = Vec::with_capacity(AugmentPlan::new(ds.len(), cfg.thetas.len(), cfg.bank.scales).count());
    let signals = Array2::from_shape_fn((size, ds.len()), |(p, i)| f64::from(ds.images[i][p]) / 255.0);
    for &theta in &cfg.thetas {
        let ops = cache.band_operators(ds.rows, ds.cols, cfg.theta_w, cfg.cutoff, theta, &cfg.bank)?;
        let outputs: Vec<CMatrix> = ops.filters.iter().map(|k| linalg::complex_times_real(k, signals.view())).collect();
        let rows: Vec<Vec<ManifestRow>> = (0..ds.len())
            .into_par_iter()
            .map(|i| {
                let src = src_indices.map_or(i, |s| s[i]);
                (0..n_bands)
                    .map(|b| {
                        let band: Vec<C64> = outputs[b].column(i).to_vec();
                        let bytes = band_to_bytes(&band, cfg.mode);
                        let name = format!("img{src:06}_theta{theta}_band{b}.pgm");
                        let path: PathBuf = out_dir.join(&name);
                        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                        write_pgm_bytes(&bytes, ds.rows, ds.cols, std::io::BufWriter::new(file))
                            .map_err(|e| Error::io(&path, e))?;
                        Ok(ManifestRow { src_index: src, theta, band: b, label: ds.labels.as_ref().map(|l| l[i]), path: name })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        manifest.extend(rows.into_iter().flatten());
    }
    let mpath = out_dir.join("manifest.csv");
    let file = fs::File::create(&mpath).map_err(|e| Error::io(&mpath, e))?;
    write_manifest(&manifest, std::io::BufWriter::new(file)).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Mirror left to right.
pub fn flip_horizontal(img: &[u8], rows: usize, cols: usize) -> Vec<u8> {
    (0..rows).flat_map(|i| (0..cols).rev().map(move |j| img[i * cols + j])).collect()
}

/// Rotate a quarter turn clockwise; the result has `cols` rows and `rows` columns.
pub fn rotate_quarter(img: &[u8], rows: usize, cols: usize) -> Vec<u8> {
    (0..cols).flat_map(|i| (0..rows).map(move |j| img[(rows - 1 - j) * cols + i])).collect()
}

/// Add seeded uniform noise in `[-amplitude, amplitude]`, saturating.
pub fn add_noise(img: &[u8], amplitude: f64, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    img.iter()
        .map(|&p| {
            let delta = if amplitude > 0.0 { rng.random_range(-amplitude..=amplitude) } else { 0.0 };
            (f64::from(p) + delta).round().clamp(0.0, 255.0) as u8
        })
        .collect()
}
