use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use gfwt::data::{read_pgm, read_points, read_signal, subsample, write_points, write_signal, OperatorCache};
use gfwt::fast::forward_fast_conjugate;
use gfwt::graph::{read_edge_list, write_edge_list};
use gfwt::spectral::{read_operator, write_operator};
use gfwt::{
    augment_dataset, build_propagators, eig_decompose, forward_exact, gaussian_point_cloud_graph, image_grid_graph,
    reconstruct_cg, swiss_roll, write_atom_grid, AugmentConfig, AugmentPlan, CoefficientPyramid, FilterBank,
    FourierApprox, FourierOptions, FractionalOperator, Graph, ImageDataset, Sparsify,
};

use crate::settings::{Backend, RunConfig};
use crate::Status;

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

/// Load an edge list, warning on stderr when it is disconnected.
pub fn load_graph(path: &Path, status: &mut Status) -> Result<Graph> {
    let g = read_edge_list(open(path)?).with_context(|| format!("reading graph {}", path.display()))?;
    if !g.is_connected() {
        eprintln!("warning: {} is disconnected ({})", path.display(), g.stats_line());
        status.raise(Status::GraphWarning);
    }
    Ok(g)
}

pub enum GraphSource {
    SwissRoll { points: usize, points_out: Option<PathBuf> },
    Points(PathBuf),
    Image(PathBuf),
    Edges(PathBuf),
}

pub fn build_graph(cfg: &RunConfig, source: GraphSource, out: &Path) -> Result<Status> {
    let mut header = cfg.header();
    let g = match source {
        GraphSource::SwissRoll { points, points_out } => {
            let cloud = swiss_roll(points, cfg.seed)?;
            header.push(format!("source=swiss_roll points={points}"));
            if let Some(p) = points_out {
                write_points(&cloud.points, create_file(&p)?, &header)?;
            }
            let sparsify = cfg.sparsify.unwrap_or(Sparsify::default_for(points));
            gaussian_point_cloud_graph(&cloud.points, cfg.sigma, sparsify)?
        }
        GraphSource::Points(path) => {
            let pts = read_points(open(&path)?).with_context(|| format!("reading points {}", path.display()))?;
            header.push(format!("source=points file={}", path.display()));
            let sparsify = cfg.sparsify.unwrap_or(Sparsify::default_for(pts.len()));
            gaussian_point_cloud_graph(&pts, cfg.sigma, sparsify)?
        }
        GraphSource::Image(path) => {
            let img = read_pgm(&path)?;
            header.push(format!("source=image file={} size={}x{}", path.display(), img.nrows(), img.ncols()));
            image_grid_graph(img.view(), cfg.theta_w, cfg.cutoff)?
        }
        GraphSource::Edges(path) => {
            header.push(format!("source=edges file={}", path.display()));
            read_edge_list(open(&path)?).with_context(|| format!("reading graph {}", path.display()))?
        }
    };
    let stats = g.stats_line();
    header.push(stats.clone());
    write_edge_list(&g, create_file(out)?, &header)?;
    println!("{stats}");
    if g.is_connected() {
        Ok(Status::Success)
    } else {
        eprintln!("warning: graph is disconnected; zero eigenvalue has multiplicity {}", g.component_count());
        Ok(Status::GraphWarning)
    }
}

/// Fractional operator from a saved container or from a graph.
pub fn load_operator(
    graph: Option<&Path>,
    operator: Option<&Path>,
    theta: f64,
    status: &mut Status,
) -> Result<(FractionalOperator, String)> {
    match (graph, operator) {
        (_, Some(path)) => {
            let op = read_operator(open(path)?).with_context(|| format!("reading operator {}", path.display()))?;
            ensure!(
                (op.theta() - theta).abs() < 1e-12,
                "operator {} has order {}, but {theta} was requested",
                path.display(),
                op.theta()
            );
            Ok((op, format!("operator={}", path.display())))
        }
        (Some(path), None) => {
            let g = load_graph(path, status)?;
            let op = eig_decompose(&g.laplacian())?.fractional(theta)?;
            Ok((op, format!("graph={} {}", path.display(), g.stats_line())))
        }
        (None, None) => bail!("give --graph or --operator"),
    }
}

pub fn load_signal(signal: Option<&Path>, image: Option<&Path>) -> Result<Vec<f64>> {
    match (signal, image) {
        (Some(p), None) => read_signal(open(p)?).with_context(|| format!("reading signal {}", p.display())),
        (None, Some(p)) => Ok(read_pgm(p)?.iter().copied().collect()),
        _ => bail!("give exactly one of --signal or --image"),
    }
}

fn bank_for(cfg: &RunConfig, r_max: f64, scales: Option<Vec<f64>>) -> Result<FilterBank> {
    let bank = match scales.or_else(|| cfg.scales.clone()) {
        Some(s) => FilterBank::with_scales(&gfwt::BankParams { scales: s.len(), ..cfg.bank }, r_max, s)?,
        None => FilterBank::new(&cfg.bank, r_max)?,
    };
    bank.validate()?;
    Ok(bank)
}

fn fourier(cfg: &RunConfig, bank: &FilterBank) -> Result<FourierApprox> {
    let opts = FourierOptions { margin: cfg.margin, ..FourierOptions::with_order(cfg.order) };
    Ok(FourierApprox::new(bank, &opts)?)
}

pub struct TransformArgs<'a> {
    pub graph: Option<&'a Path>,
    pub operator: Option<&'a Path>,
    pub save_operator: Option<&'a Path>,
    pub signal: Option<&'a Path>,
    pub image: Option<&'a Path>,
    pub out: &'a Path,
    pub bounds_out: Option<&'a Path>,
}

pub fn transform(cfg: &RunConfig, a: TransformArgs<'_>) -> Result<Status> {
    let mut status = Status::Success;
    let theta = cfg.single_theta()?;
    let (op, source) = load_operator(a.graph, a.operator, theta, &mut status)?;
    if let Some(p) = a.save_operator {
        let mut w = create_file(p)?;
        write_operator(&op, &mut w)?;
        w.flush()?;
    }
    let f = load_signal(a.signal, a.image)?;
    ensure!(f.len() == op.n(), "signal has {} values but the graph has {} vertices", f.len(), op.n());
    let bank = bank_for(cfg, op.r_max_bound(), None)?;
    let mut header = cfg.header();
    header.push(source);
    header.push(format!("r_max={}", op.r_max_bound()));
    if op.zero_order_convention() {
        header.push("zero_order_convention=r0 set to 0".into());
    }
    let pyramid = match cfg.backend {
        Backend::Exact => forward_exact(&f, &op, &bank)?,
        Backend::Fast => {
            let fa = fourier(cfg, &bank)?;
            let pp = build_propagators(&op, fa.period())?;
            let p = forward_fast_conjugate(&f, &pp, &fa)?;
            header.push(format!("period={} matvecs={}", fa.period(), pp.matvec_count()));
            let bounds_path = a.bounds_out.map(Path::to_path_buf).unwrap_or_else(|| a.out.with_extension("bounds.csv"));
            let mut w = create_file(&bounds_path)?;
            for c in &header {
                writeln!(w, "# {c}")?;
            }
            writeln!(w, "band,scale,order,bound,bound_times_norm")?;
            let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            for b in 0..fa.n_bands() {
                let scale = if b == 0 { String::from("scaling") } else { fa.scales()[b - 1].to_string() };
                writeln!(w, "{b},{scale},{},{},{}", fa.order(b), fa.bounds()[b], fa.bounds()[b] * fnorm)?;
            }
            w.flush()?;
            p
        }
    };
    pyramid.write_csv(create_file(a.out)?, &header)?;
    println!(
        "wrote {} coefficients ({} vertices x {} bands), max |imag| = {:e}",
        pyramid.len(),
        pyramid.n(),
        pyramid.n_bands(),
        pyramid.max_imag()
    );
    Ok(status)
}

pub fn atoms(cfg: &RunConfig, graph: &Path, center: usize, out_dir: &Path) -> Result<Status> {
    let mut status = Status::Success;
    let g = load_graph(graph, &mut status)?;
    let dec = eig_decompose(&g.laplacian())?;
    let mut header = cfg.header();
    header.push(format!("graph={} {}", graph.display(), g.stats_line()));
    let written = write_atom_grid(&dec, &cfg.bank, &cfg.thetas, center, out_dir, &header)?;
    println!(
        "wrote {} atom files ({} orders x {} bands) to {}",
        written.len(),
        cfg.thetas.len(),
        cfg.bank.scales + 1,
        out_dir.display()
    );
    Ok(status)
}

pub struct ReconstructArgs<'a> {
    pub graph: Option<&'a Path>,
    pub operator: Option<&'a Path>,
    pub pyramid: &'a Path,
    pub reference: Option<&'a Path>,
    pub out: &'a Path,
    pub report: Option<&'a Path>,
}

pub fn reconstruct(cfg: &RunConfig, a: ReconstructArgs<'_>) -> Result<Status> {
    let mut status = Status::Success;
    let p = CoefficientPyramid::read_csv(open(a.pyramid)?).with_context(|| format!("reading {}", a.pyramid.display()))?;
    let (op, source) = load_operator(a.graph, a.operator, p.theta, &mut status)?;
    ensure!(p.n() == op.n(), "pyramid has {} vertices but the graph has {}", p.n(), op.n());
    let bank = bank_for(cfg, op.r_max_bound(), Some(p.scales.clone()))?;
    let fa = fourier(cfg, &bank)?;
    let pp = build_propagators(&op, fa.period())?;
    let rep = reconstruct_cg(&p, &pp, &fa, cfg.tol, cfg.max_iter)?;
    let mut lines = vec![
        format!("iterations={}", rep.iterations),
        format!("residual={:e}", rep.residual()),
        format!("converged={}", rep.converged),
        format!("imag_residue={:e}", rep.imag_residue),
    ];
    if let Some(r) = a.reference {
        let reference = read_signal(open(r)?)?;
        ensure!(reference.len() == rep.signal.len(), "reference has {} values", reference.len());
        let diff: f64 = rep.signal.iter().zip(&reference).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let base = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if base > 0.0 { diff / base } else { diff };
        lines.push(format!("relative_error={rel:e}"));
    }
    let mut header = cfg.header();
    header.push(source);
    header.push(format!("theta={}", p.theta));
    header.extend(lines.iter().cloned());
    write_signal(&rep.signal, create_file(a.out)?, &header)?;
    if let Some(path) = a.report {
        let mut w = create_file(path)?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
    }
    println!("{}", lines.join(" "));
    if rep.imag_warning() {
        eprintln!("warning: imaginary residue {:e} exceeds {:e}", rep.imag_residue, gfwt::fast::IMAG_WARNING);
    }
    if let Err(e) = rep.check() {
        eprintln!("error: {e}; output written to {}", a.out.display());
        status.raise(Status::NotConverged);
    }
    Ok(status)
}

pub struct AugmentArgs<'a> {
    pub images: &'a Path,
    pub labels: Option<&'a Path>,
    pub out_dir: &'a Path,
    pub limit: Option<usize>,
    pub sample: Option<usize>,
}

pub fn augment(cfg: &RunConfig, a: AugmentArgs<'_>) -> Result<Status> {
    let ds = ImageDataset::load(a.images, a.labels)?;
    let indices: Vec<usize> = match (a.limit, a.sample) {
        (Some(_), Some(_)) => bail!("give at most one of --limit and --sample"),
        (Some(n), None) => (0..n.min(ds.len())).collect(),
        (None, Some(n)) => subsample(ds.len(), n, cfg.seed)?,
        (None, None) => (0..ds.len()).collect(),
    };
    let ds = if indices.len() == ds.len() { ds } else { ds.select(&indices)? };
    let acfg = AugmentConfig {
        thetas: cfg.thetas.clone(),
        bank: cfg.bank,
        theta_w: cfg.theta_w,
        cutoff: cfg.cutoff,
        mode: cfg.mode,
    };
    let plan = AugmentPlan::new(ds.len(), cfg.thetas.len(), cfg.bank.scales);
    let rows = augment_dataset(&ds, &acfg, a.out_dir, Some(&indices), &mut OperatorCache::new())?;
    ensure!(rows.len() == plan.count(), "wrote {} images, expected {}", rows.len(), plan.count());
    println!(
        "{} images x {} orders x {} bands = {} outputs",
        plan.images,
        plan.thetas,
        plan.bands,
        plan.count()
    );
    let mut w = create_file(&a.out_dir.join("run_config.txt"))?;
    for c in cfg.header() {
        writeln!(w, "{c}")?;
    }
    writeln!(w, "images={} outputs={}", plan.images, plan.count())?;
    w.flush()?;
    println!("manifest: {}", a.out_dir.join("manifest.csv").display());
    Ok(Status::Success)
}
