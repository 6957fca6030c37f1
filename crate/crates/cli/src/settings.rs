//! Run configuration: defaults, then the `--config` file, then flags.
//!
//! Flags are folded into the same `key=value` map as the config file, so
//! both go through one parser and one per-command key schema.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gfwt::data::BandMode;
use gfwt::{BankParams, KeyValues, Sparsify};

pub const BANK_KEYS: &[&str] = &["alpha", "beta", "x1", "x2", "J", "K"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Exact,
    Fast,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: &'static str,
    schema: Vec<&'static str>,
    pub thetas: Vec<f64>,
    pub bank: BankParams,
    pub scales: Option<Vec<f64>>,
    pub order: usize,
    pub orders: Vec<usize>,
    pub margin: f64,
    pub sigma: f64,
    pub theta_w: f64,
    pub cutoff: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub backend: Backend,
    pub sparsify: Option<Sparsify>,
    pub mode: BandMode,
    pub sizes: Vec<usize>,
    pub signals: usize,
}

fn parse_sparsify(s: &str) -> Result<Option<Sparsify>> {
    let s = s.trim();
    Ok(match s.split_once(':') {
        None if s == "auto" => None,
        None if s == "dense" => Some(Sparsify::Dense),
        Some(("threshold", v)) => Some(Sparsify::Threshold(v.parse().context("threshold value")?)),
        Some(("knn", v)) => Some(Sparsify::Knn(v.parse().context("knn neighbour count")?)),
        _ => bail!("sparsify must be auto, dense, threshold:EPS or knn:K, got {s:?}"),
    })
}

fn sparsify_name(s: Option<Sparsify>) -> String {
    match s {
        None => "auto".into(),
        Some(Sparsify::Dense) => "dense".into(),
        Some(Sparsify::Threshold(e)) => format!("threshold:{e}"),
        Some(Sparsify::Knn(k)) => format!("knn:{k}"),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Resolve `kv` against the keys `schema` allows. `default_thetas` is
    /// the order list used when none is given.
    pub fn resolve(command: &'static str, schema: &[&'static str], kv: &KeyValues, default_thetas: &[f64]) -> Result<Self> {
        if let Some(bad) = kv.keys().find(|k| !schema.contains(k)) {
            bail!("option {bad:?} does not apply to {command} (accepted: {})", schema.join(", "));
        }
        let (bank, scales) = BankParams::default().from_key_values(kv)?;
        let thetas = kv.get_list("thetas")?.unwrap_or_else(|| default_thetas.to_vec());
        if let Some(bad) = thetas.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            bail!("fractional order {bad} outside [0, 1]");
        }
        let backend = match kv.get_str("backend").unwrap_or("exact") {
            "exact" => Backend::Exact,
            "fast" => Backend::Fast,
            other => bail!("backend must be exact or fast, got {other:?}"),
        };
        let mode = match kv.get_str("mode").unwrap_or("magnitude") {
            "magnitude" => BandMode::Magnitude,
            "real" => BandMode::Real,
            other => bail!("mode must be magnitude or real, got {other:?}"),
        };
        let cfg = Self {
            command,
            schema: schema.to_vec(),
            thetas,
            bank,
            scales,
            order: kv.get("M")?.unwrap_or(gfwt::fast::DEFAULT_ORDER),
            orders: kv.get_list("orders")?.unwrap_or_else(|| vec![5, 10, 20, 40]),
            margin: kv.get("margin")?.unwrap_or(gfwt::fast::DEFAULT_MARGIN),
            sigma: kv.get("sigma")?.unwrap_or(0.1),
            theta_w: kv.get("theta_w")?.unwrap_or(1.0),
            cutoff: kv.get("k")?.unwrap_or(1.0),
            tol: kv.get("tol")?.unwrap_or(1e-10),
            max_iter: kv.get("max_iter")?.unwrap_or(200),
            seed: kv.get("seed")?.unwrap_or(0),
            backend,
            sparsify: parse_sparsify(kv.get_str("sparsify").unwrap_or("auto"))?,
            mode,
            sizes: kv.get_list("sizes")?.unwrap_or_else(|| vec![128, 256, 512]),
            signals: kv.get("signals")?.unwrap_or(5),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let b = &self.bank;
        if b.alpha == 0 || b.beta == 0 || !(b.x1 > 0.0 && b.x2 > b.x1) {
            bail!("kernel needs alpha, beta >= 1 and 0 < x1 < x2");
        }
        if b.scales == 0 || !(b.k_ratio > 1.0) {
            bail!("need J >= 1 and K > 1");
        }
        if self.order == 0 || self.orders.iter().any(|&m| m == 0) {
            bail!("series order M must be positive");
        }
        if !(self.margin >= 0.0) {
            bail!("margin must be non-negative");
        }
        if !(self.sigma > 0.0 && self.theta_w > 0.0 && self.cutoff > 0.0) {
            bail!("sigma, theta_w and k must be positive");
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            bail!("tol must be positive and max_iter at least 1");
        }
        if self.sizes.iter().any(|&n| n < 3) || self.signals == 0 {
            bail!("bench sizes must be at least 3 and signals at least 1");
        }
        Ok(())
    }

    /// The single order a command runs at.
    pub fn single_theta(&self) -> Result<f64> {
        match self.thetas.as_slice() {
            [t] => Ok(*t),
            other => bail!("{} takes exactly one fractional order, got {}", self.command, other.len()),
        }
    }

    /// Resolved values of every key in this command's schema, for output
    /// headers.
    pub fn header(&self) -> Vec<String> {
        let mut out = vec![format!("command={}", self.command)];
        for &key in &self.schema {
            let value = match key {
                "alpha" => self.bank.alpha.to_string(),
                "beta" => self.bank.beta.to_string(),
                "x1" => self.bank.x1.to_string(),
                "x2" => self.bank.x2.to_string(),
                "J" => self.bank.scales.to_string(),
                "K" => self.bank.k_ratio.to_string(),
                "thetas" => join(&self.thetas),
                "scales" => match &self.scales {
                    Some(s) => join(s),
                    None => "auto".into(),
                },
                "M" => self.order.to_string(),
                "orders" => join(&self.orders),
                "margin" => self.margin.to_string(),
                "sigma" => self.sigma.to_string(),
                "theta_w" => self.theta_w.to_string(),
                "k" => self.cutoff.to_string(),
                "tol" => self.tol.to_string(),
                "max_iter" => self.max_iter.to_string(),
                "seed" => self.seed.to_string(),
                "backend" => format!("{:?}", self.backend).to_lowercase(),
                "sparsify" => sparsify_name(self.sparsify),
                "mode" => format!("{:?}", self.mode).to_lowercase(),
                "sizes" => join(&self.sizes),
                "signals" => self.signals.to_string(),
                _ => continue,
            };
            // Written as `cfg.key=value` so pyramid headers keep their own
            // `theta=` and `scales=` lines unambiguous.
            out.push(format!("cfg.{key}={value}"));
        }
        out
    }
}

/// Builder for the flag side of the key map.
#[derive(Default)]
pub struct Overrides(pub KeyValues);

impl Overrides {
    pub fn set<T: ToString>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.insert(key, v.to_string());
        }
        self
    }

    pub fn set_list<T: ToString>(&mut self, key: &str, values: &[T]) -> &mut Self {
        if !values.is_empty() {
            self.0.insert(key, join(values));
        }
        self
    }
}

fn overlay(base: &mut KeyValues, top: &KeyValues) {
    for key in top.keys() {
        base.insert(key, top.get_str(key).unwrap_or_default());
    }
}

/// Config file entries, overridden by flags.
pub fn merge(file: Option<&Path>, flags: Overrides) -> Result<KeyValues> {
    merge_onto(KeyValues::default(), file, flags)
}

/// `base`, then config file entries, then flags.
pub fn merge_onto(mut base: KeyValues, file: Option<&Path>, flags: Overrides) -> Result<KeyValues> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        overlay(&mut base, &KeyValues::parse(&text).with_context(|| format!("parsing {}", path.display()))?);
    }
    overlay(&mut base, &flags.0);
    Ok(base)
}

/// The `# cfg.key=value` lines an earlier run echoed into `path`,
/// restricted to `keys`.
pub fn recorded(path: &Path, keys: &[&str]) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut kv = KeyValues::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((key, value)) = line.trim_start_matches('#').trim().strip_prefix("cfg.").and_then(|e| e.split_once('=')) {
            if keys.contains(&key) {
                kv.insert(key, value);
            }
        }
    }
    Ok(kv)
}
