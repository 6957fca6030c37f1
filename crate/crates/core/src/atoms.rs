//! Wavelet atom grids over a range of fractional orders, written as CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exact::atom;
use crate::kernels::{BankParams, FilterBank};
use crate::linalg::C64;
use crate::spectral::SpectralDecomposition;

/// File name of the atom of band `band` at order `theta`.
pub fn atom_file_name(theta: f64, band: usize) -> String {
    format!("atom_theta{theta:.2}_band{band}.csv")
}

/// CSV with columns `vertex,re,im,magnitude,phase`, preceded by `#` lines.
pub fn write_atom_csv<W: Write>(values: &[C64], mut out: W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "vertex,re,im,magnitude,phase")?;
    for (v, z) in values.iter().enumerate() {
        writeln!(out, "{v},{},{},{},{}", z.re, z.im, z.norm(), z.arg())?;
    }
    out.flush()
}

/// Write the atoms of every band centred at `center` for every order in
/// `thetas`; returns the written paths in `(theta, band)` order.
pub fn write_atom_grid(
    dec: &SpectralDecomposition,
    params: &BankParams,
    thetas: &[f64],
    center: usize,
    out_dir: &Path,
    comments: &[String],
) -> Result<Vec<PathBuf>> {
    if center >= dec.n() {
        return Err(Error::IndexOutOfRange { index: center, len: dec.n() });
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for &theta in thetas {
        let op = dec.fractional(theta)?;
        let bank = FilterBank::new(params, op.r_max_bound())?;
        for band in 0..bank.n_bands() {
            let psi = atom(&op, &bank, band, center)?;
            let path = out_dir.join(atom_file_name(theta, band));
            let scale = if band == 0 { "scaling".to_string() } else { bank.scales()[band - 1].to_string() };
            let mut header = comments.to_vec();
            header.extend([
                format!("theta={theta}"),
                format!("band={band}"),
                format!("scale={scale}"),
                format!("center={center}"),
                format!("r_max={}", op.r_max_bound()),
            ]);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_atom_csv(&psi, BufWriter::new(file), &header).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `count` evenly spaced orders from `first` to `last` inclusive.
pub fn theta_grid(first: f64, last: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![first],
        _ => (0..count).map(|i| first + (last - first) * i as f64 / (count - 1) as f64).map(|t| (t * 1e12).round() / 1e12).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::spectral::eig_decompose;

    #[test]
    fn grid_of_small_graph() {
        let g = build_graph(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 0.5)]).unwrap();
        let dec = eig_decompose(&g.laplacian()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let params = BankParams { scales: 2, ..Default::default() };
        let paths = write_atom_grid(&dec, &params, &[0.5, 1.0], 2, dir.path(), &[]).unwrap();
        assert_eq!(paths.len(), 6);
        let text = fs::read_to_string(dir.path().join(atom_file_name(1.0, 1))).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 6);
        for row in &rows[1..] {
            let phase: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
            let m = phase.rem_euclid(std::f64::consts::PI);
            assert!(m < 1e-9 || std::f64::consts::PI - m < 1e-9);
        }
        assert!(write_atom_grid(&dec, &params, &[1.0], 5, dir.path(), &[]).is_err());
    }

    #[test]
    fn theta_grids() {
        assert_eq!(theta_grid(0.1, 1.0, 10), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        assert_eq!(theta_grid(0.0, 1.0, 11).len(), 11);
    }
}
