//! `gfwt`: graph construction, fractional wavelet transforms, atom grids,
//! reconstruction, dataset augmentation and benchmarks.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 graph-quality
//! warning (outputs written), 3 reconstruction did not converge (outputs
//! written).

mod bench;
mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{AugmentArgs, GraphSource, ReconstructArgs, TransformArgs};
use settings::{merge, merge_onto, recorded, Overrides, RunConfig, BANK_KEYS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success = 0,
    GraphWarning = 2,
    NotConverged = 3,
}

impl Status {
    /// Keep the more severe of the two.
    pub fn raise(&mut self, other: Status) {
        *self = (*self).max(other);
    }
}

#[derive(Parser)]
#[command(name = "gfwt", version, about = "Fractional spectral graph wavelet transforms")]
struct Cli {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-image and per-signal parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Wavelet kernel and scale options shared by the transform commands.
#[derive(Args, Default)]
struct BankFlags {
    #[arg(long)]
    alpha: Option<u32>,
    #[arg(long)]
    beta: Option<u32>,
    #[arg(long)]
    x1: Option<f64>,
    #[arg(long)]
    x2: Option<f64>,
    /// Number of wavelet scales J.
    #[arg(long = "scales-count", short = 'J')]
    j: Option<usize>,
    /// Ratio K between the spectral bound and the smallest design eigenvalue.
    #[arg(long = "k-ratio", short = 'K')]
    k: Option<f64>,
}

impl BankFlags {
    fn apply(&self, o: &mut Overrides) {
        o.set("alpha", self.alpha)
            .set("beta", self.beta)
            .set("x1", self.x1)
            .set("x2", self.x2)
            .set("J", self.j)
            .set("K", self.k);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a weighted graph and write it as an edge list.
    BuildGraph {
        /// Sample this many Swiss roll points.
        #[arg(long, group = "source")]
        swiss_roll: Option<usize>,
        /// Point cloud CSV.
        #[arg(long, group = "source")]
        points: Option<PathBuf>,
        /// Binary PGM image; pixels become lattice vertices.
        #[arg(long, group = "source")]
        image: Option<PathBuf>,
        /// Existing edge list to validate and rewrite.
        #[arg(long, group = "source")]
        edges: Option<PathBuf>,
        /// Also write the sampled Swiss roll points here.
        #[arg(long, requires = "swiss_roll")]
        points_out: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        theta_w: Option<f64>,
        /// Lattice distance cutoff.
        #[arg(long)]
        cutoff: Option<f64>,
        /// auto, dense, threshold:EPS or knn:K.
        #[arg(long)]
        sparsify: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Forward transform of one signal at one fractional order.
    Transform {
        #[arg(long, required_unless_present = "operator")]
        graph: Option<PathBuf>,
        /// Saved operator container instead of a graph.
        #[arg(long, conflicts_with = "graph")]
        operator: Option<PathBuf>,
        /// Save the operator built from the graph for later runs.
        #[arg(long)]
        save_operator: Option<PathBuf>,
        /// One-column signal CSV.
        #[arg(long, required_unless_present = "image")]
        signal: Option<PathBuf>,
        /// PGM image used as the signal (row-major).
        #[arg(long, conflicts_with = "signal")]
        image: Option<PathBuf>,
        #[arg(long)]
        theta: Option<f64>,
        /// exact or fast.
        #[arg(long)]
        backend: Option<String>,
        /// Truncation order M of the fast backend.
        #[arg(long, short = 'M')]
        order: Option<usize>,
        #[arg(long)]
        margin: Option<f64>,
        /// Explicit scales, overriding J and K.
        #[arg(long, value_delimiter = ',')]
        scales: Vec<f64>,
        #[command(flatten)]
        bank: BankFlags,
        #[arg(long, short)]
        out: PathBuf,
        /// Where the fast backend writes its per-band error bounds.
        #[arg(long)]
        bounds_out: Option<PathBuf>,
    },
    /// Write wavelet atoms centred at one vertex for a grid of orders.
    Atoms {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        center: usize,
        /// Orders to evaluate.
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<f64>,
        /// Evenly spaced orders FIRST,LAST,COUNT instead of --thetas.
        #[arg(long, value_delimiter = ',', conflicts_with = "thetas")]
        theta_grid: Vec<f64>,
        #[command(flatten)]
        bank: BankFlags,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Recover a signal from wavelet coefficients by conjugate residuals.
    Reconstruct {
        #[arg(long, required_unless_present = "operator")]
        graph: Option<PathBuf>,
        #[arg(long, conflicts_with = "graph")]
        operator: Option<PathBuf>,
        /// Coefficient CSV written by `transform`.
        #[arg(long)]
        pyramid: PathBuf,
        /// Signal to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, short = 'M')]
        order: Option<usize>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[command(flatten)]
        bank: BankFlags,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write band images of every IDX image at every order.
    Augment {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<f64>,
        /// Use the first N images.
        #[arg(long)]
        limit: Option<usize>,
        /// Use N images drawn without replacement.
        #[arg(long, conflicts_with = "limit")]
        sample: Option<usize>,
        #[arg(long)]
        theta_w: Option<f64>,
        #[arg(long)]
        cutoff: Option<f64>,
        /// magnitude or real.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        bank: BankFlags,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Time and check the fast transform over graph sizes and orders.
    Bench {
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        orders: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<f64>,
        /// Random signals per cell.
        #[arg(long)]
        signals: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        sparsify: Option<String>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        bank: BankFlags,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    BANK_KEYS.iter().chain(extra).copied().collect()
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let file = cli.config.as_deref();
    let mut o = Overrides::default();
    match cli.command {
        Command::BuildGraph {
            swiss_roll,
            points,
            image,
            edges,
            points_out,
            sigma,
            theta_w,
            cutoff,
            sparsify,
            seed,
            out,
        } => {
            o.set("sigma", sigma).set("theta_w", theta_w).set("k", cutoff).set("sparsify", sparsify).set("seed", seed);
            let schema = ["sigma", "theta_w", "k", "sparsify", "seed"];
            let cfg = RunConfig::resolve("build-graph", &schema, &merge(file, o)?, &[])?;
            let source = match (swiss_roll, points, image, edges) {
                (Some(n), ..) => GraphSource::SwissRoll { points: n, points_out },
                (_, Some(p), ..) => GraphSource::Points(p),
                (_, _, Some(p), _) => GraphSource::Image(p),
                (.., Some(p)) => GraphSource::Edges(p),
                _ => anyhow::bail!("give one of --swiss-roll, --points, --image or --edges"),
            };
            commands::build_graph(&cfg, source, &out)
        }
        Command::Transform {
            graph,
            operator,
            save_operator,
            signal,
            image,
            theta,
            backend,
            order,
            margin,
            scales,
            bank,
            out,
            bounds_out,
        } => {
            bank.apply(&mut o);
            o.set("thetas", theta).set("backend", backend).set("M", order).set("margin", margin).set_list("scales", &scales);
            let schema = keys(&["thetas", "backend", "M", "margin", "scales"]);
            let cfg = RunConfig::resolve("transform", &schema, &merge(file, o)?, &[1.0])?;
            let args = TransformArgs {
                graph: graph.as_deref(),
                operator: operator.as_deref(),
                save_operator: save_operator.as_deref(),
                signal: signal.as_deref(),
                image: image.as_deref(),
                out: &out,
                bounds_out: bounds_out.as_deref(),
            };
            commands::transform(&cfg, args)
        }
        Command::Atoms { graph, center, thetas, theta_grid, bank, out_dir } => {
            bank.apply(&mut o);
            let grid = match theta_grid.as_slice() {
                [first, last, count] if *count >= 1.0 && count.fract() == 0.0 => {
                    gfwt::theta_grid(*first, *last, *count as usize)
                }
                [] => thetas,
                _ => anyhow::bail!("--theta-grid takes FIRST,LAST,COUNT with a positive integer COUNT"),
            };
            o.set_list("thetas", &grid);
            let cfg = RunConfig::resolve("atoms", &keys(&["thetas"]), &merge(file, o)?, &gfwt::theta_grid(0.1, 1.0, 10))?;
            commands::atoms(&cfg, &graph, center, &out_dir)
        }
        Command::Reconstruct { graph, operator, pyramid, reference, order, margin, tol, max_iter, bank, out, report } => {
            bank.apply(&mut o);
            o.set("M", order).set("margin", margin).set("tol", tol).set("max_iter", max_iter);
            let schema = keys(&["M", "margin", "tol", "max_iter"]);
            // The series must match the one the coefficients were computed with.
            let base = recorded(&pyramid, &keys(&["M", "margin"]))?;
            let cfg = RunConfig::resolve("reconstruct", &schema, &merge_onto(base, file, o)?, &[])?;
            let args = ReconstructArgs {
                graph: graph.as_deref(),
                operator: operator.as_deref(),
                pyramid: &pyramid,
                reference: reference.as_deref(),
                out: &out,
                report: report.as_deref(),
            };
            commands::reconstruct(&cfg, args)
        }
        Command::Augment { images, labels, thetas, limit, sample, theta_w, cutoff, mode, seed, bank, out_dir } => {
            bank.apply(&mut o);
            o.set_list("thetas", &thetas).set("theta_w", theta_w).set("k", cutoff).set("mode", mode).set("seed", seed);
            let schema = keys(&["thetas", "theta_w", "k", "mode", "seed"]);
            let defaults = gfwt::AugmentConfig::default().thetas;
            let cfg = RunConfig::resolve("augment", &schema, &merge(file, o)?, &defaults)?;
            let args = AugmentArgs { images: &images, labels: labels.as_deref(), out_dir: &out_dir, limit, sample };
            commands::augment(&cfg, args)
        }
        Command::Bench { sizes, orders, thetas, signals, sigma, sparsify, margin, seed, bank, out } => {
            bank.apply(&mut o);
            o.set_list("sizes", &sizes)
                .set_list("orders", &orders)
                .set_list("thetas", &thetas)
                .set("signals", signals)
                .set("sigma", sigma)
                .set("sparsify", sparsify)
                .set("margin", margin)
                .set("seed", seed);
            let schema = keys(&["sizes", "orders", "thetas", "signals", "sigma", "sparsify", "margin", "seed"]);
            let kv = merge(file, o)?;
            let mut cfg = RunConfig::resolve("bench", &schema, &kv, &[0.5])?;
            if kv.get_str("sigma").is_none() {
                cfg.sigma = 0.3;
            }
            bench::bench(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
