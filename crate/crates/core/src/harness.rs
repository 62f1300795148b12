//! Simulation scenarios, result tables and file formats.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::init_cluster::{m3_spectral, InitConfig, InitMethod, Initializer};
use crate::metrics::hamming_rate;
use crate::models::{
    sample_mixture_network, separation, simulation_block_matrix, Diagonal, Family, MixtureBlockParams,
};
use crate::refine::{two_stage_loo, two_stage_practical, Init, RefineOptions, RefineResult};
use crate::tensor_core::Tensor3;

/// Environment variable read when no thread count is given.
pub const THREADS_ENV: &str = "MIXCLUST_THREADS";

pub const CSV_HEADER: &str = "scenario,method,param,value,rep,seed,hamming,i_star,ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RefineRspec,
    RefineSplit,
    Rspec,
    M3sc,
    /// Leave-one-out refinement from the regularized spectral initializer.
    Loo,
}

impl Method {
    pub const BENCHMARK: [Method; 4] = [Method::RefineRspec, Method::RefineSplit, Method::Rspec, Method::M3sc];

    pub fn name(self) -> &'static str {
        match self {
            Method::RefineRspec => "refine-rspec",
            Method::RefineSplit => "refine-split",
            Method::Rspec => "rspec",
            Method::M3sc => "m3sc",
            Method::Loo => "loo",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::RefineRspec, Method::RefineSplit, Method::Rspec, Method::M3sc, Method::Loo]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown method `{s}`")))
    }
}

/// Result of running one method on a tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub layer_labels: Vec<usize>,
    pub sigma: [Vec<usize>; 2],
    pub blocks: Option<[DMatrix<f64>; 2]>,
    pub margins: Vec<f64>,
}

impl From<RefineResult> for Clustering {
    fn from(r: RefineResult) -> Self {
        Clustering { layer_labels: r.labels, sigma: r.init.sigma, blocks: Some(r.blocks.blocks), margins: r.margins }
    }
}

/// Runs one clustering method with the default initializer settings.
pub fn run_method(
    x: &Tensor3,
    method: Method,
    family: Family,
    k: usize,
    diagonal: Diagonal,
    seed: u64,
) -> Result<Clustering> {
    let opts = RefineOptions { family, k, diagonal };
    let cfg = |m| Init::Config(InitConfig::new(m));
    match method {
        Method::RefineRspec => two_stage_practical(x, &opts, cfg(InitMethod::Rspec), seed).map(Into::into),
        Method::RefineSplit => two_stage_practical(x, &opts, cfg(InitMethod::Split), seed).map(Into::into),
        Method::Loo => two_stage_loo(x, &opts, cfg(InitMethod::Rspec), seed).map(Into::into),
        Method::Rspec => {
            let r = InitConfig::new(InitMethod::Rspec).initialize(x, k, seed)?;
            Ok(Clustering { layer_labels: r.layer_labels, sigma: r.sigma, blocks: None, margins: Vec::new() })
        }
        Method::M3sc => {
            let labels = m3_spectral(x, seed)?;
            let d = x.dims()[0];
            Ok(Clustering { layer_labels: labels, sigma: [vec![0; d], vec![0; d]], blocks: None, margins: Vec::new() })
        }
    }
}

/// Parameter swept across a scenario's grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    /// Within-community edge probability.
    P,
    /// Ratio of between- to within-community probability.
    Alpha,
    Layers,
    Nodes,
}

impl GridParam {
    pub fn name(self) -> &'static str {
        match self {
            GridParam::P => "p",
            GridParam::Alpha => "alpha",
            GridParam::Layers => "layers",
            GridParam::Nodes => "nodes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub parameter: GridParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_family")]
    pub family: Family,
    pub nodes: usize,
    pub layers: usize,
    pub k: usize,
    pub p: f64,
    pub alpha: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    pub grid: Grid,
}

fn default_family() -> Family {
    Family::Bernoulli
}

fn default_replications() -> usize {
    50
}

fn default_methods() -> Vec<Method> {
    Method::BENCHMARK.to_vec()
}

/// One simulated instance: the point on the grid applied to the fixed
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellSetup {
    nodes: usize,
    layers: usize,
    p: f64,
    alpha: f64,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Built-in scenarios `sim1`..`sim4`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = |name: &str, k: usize, grid: GridParam, values: Vec<f64>| ScenarioConfig {
            name: name.to_string(),
            family: Family::Bernoulli,
            nodes: 40,
            layers: 40,
            k,
            p: 0.4,
            alpha: 0.75,
            replications: default_replications(),
            methods: default_methods(),
            seed: 0,
            output: None,
            grid: Grid { parameter: grid, values },
        };
        let tenths = |lo: u32, hi: u32| (lo..=hi).map(|i| f64::from(i) / 10.0).collect::<Vec<_>>();
        let cfg = match name {
            "sim1" => base(name, 2, GridParam::P, tenths(1, 8)),
            "sim2" => base(name, 4, GridParam::Alpha, tenths(1, 9)),
            "sim3" => base(name, 4, GridParam::Layers, (2..=8).map(|i| f64::from(i * 10)).collect()),
            "sim4" => base(name, 3, GridParam::Nodes, (1..=10).map(|i| f64::from(i * 10)).collect()),
            other => return Err(Error::arg(format!("unknown scenario `{other}` (expected sim1..sim4)"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn setup(&self, value: f64) -> CellSetup {
        let mut s = CellSetup { nodes: self.nodes, layers: self.layers, p: self.p, alpha: self.alpha };
        match self.grid.parameter {
            GridParam::P => s.p = value,
            GridParam::Alpha => s.alpha = value,
            GridParam::Layers => s.layers = value as usize,
            GridParam::Nodes => s.nodes = value as usize,
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.grid.values.is_empty() {
            return Err(Error::Config("grid has no values".into()));
        }
        for &v in &self.grid.values {
            if matches!(self.grid.parameter, GridParam::Layers | GridParam::Nodes) && (v.fract() != 0.0 || v < 0.0) {
                return Err(Error::Config(format!("{} must be a whole number, got {v}", self.grid.parameter.name())));
            }
            let s = self.setup(v);
            simulation_block_matrix(self.k, s.p, s.alpha).map_err(|e| Error::Config(e.to_string()))?;
            if s.layers < 2 {
                return Err(Error::Config(format!("need at least 2 layers, got {}", s.layers)));
            }
            if s.nodes < self.k {
                return Err(Error::Config(format!("{} nodes cannot hold K={} communities", s.nodes, self.k)));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.grid.values.len() * self.replications
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub param: String,
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    /// NaN when the method failed on this instance.
    pub hamming: f64,
    pub i_star: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall time per method. Off by default so output is
    /// reproducible byte for byte.
    pub timing: bool,
}

fn draw_labels(len: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    loop {
        let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..classes)).collect();
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            return labels;
        }
    }
}

/// Draws the instance for one cell: layer types and memberships uniform,
/// redrawn until every type and community is present.
fn draw_instance(cfg: &ScenarioConfig, setup: CellSetup, seed: u64) -> Result<MixtureBlockParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = simulation_block_matrix(cfg.k, setup.p, setup.alpha)?;
    let z_star = draw_labels(setup.layers, 2, &mut rng);
    let sigma = [draw_labels(setup.nodes, cfg.k, &mut rng), draw_labels(setup.nodes, cfg.k, &mut rng)];
    MixtureBlockParams::new(cfg.family, z_star, [b.clone(), b], sigma)
}

fn run_cell(cfg: &ScenarioConfig, cell: usize, opts: RunOptions) -> Vec<ResultRow> {
    let grid_idx = cell / cfg.replications;
    let rep = cell % cfg.replications;
    let value = cfg.grid.values[grid_idx];
    let seed = derive_seed(cfg.seed, cell as u64);
    let row = |method: Method, hamming: f64, i_star: f64, ms: f64| ResultRow {
        scenario: cfg.name.clone(),
        method: method.name().to_string(),
        param: cfg.grid.parameter.name().to_string(),
        value,
        rep,
        seed,
        hamming,
        i_star,
        ms,
    };
    let instance = draw_instance(cfg, cfg.setup(value), derive_seed(seed, 0))
        .and_then(|params| Ok((sample_mixture_network(&params, derive_seed(seed, 1))?, params)));
    let (x, params) = match instance {
        Ok(v) => v,
        Err(_) => return cfg.methods.iter().map(|&m| row(m, f64::NAN, f64::NAN, 0.0)).collect(),
    };
    let i_star = separation(&params).unwrap_or(f64::NAN);
    cfg.methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let labels = run_method(&x, m, cfg.family, cfg.k, Diagonal::Include, derive_seed(seed, 2));
            let ms = if opts.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            let h = labels.and_then(|c| hamming_rate(&c.layer_labels, &params.z_star, 2)).unwrap_or(f64::NAN);
            row(m, h, i_star, ms)
        })
        .collect()
}

/// Runs every (grid value, replication) cell in parallel on the current
/// rayon pool. Rows come out in cell order, methods in config order.
pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let rows: Vec<Vec<ResultRow>> = (0..cfg.cell_count()).into_par_iter().map(|c| run_cell(cfg, c, opts)).collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Thread count from the flag, else the environment variable.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

/// `%g`-style formatting with 9 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        format!("{}e{}", trim(mantissa), exp)
    } else {
        trim(&format!("{:.*}", (8 - exp) as usize, x))
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.method,
            r.param,
            format_float(r.value),
            r.rep,
            r.seed,
            format_float(r.hamming),
            format_float(r.i_star),
            format_float(r.ms)
        )
        .expect("writing to a string");
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") }),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 9 {
                return Err(err("expected 9 fields"));
            }
            let float = |s: &str| parse_float(s).ok_or_else(|| err(&format!("bad number `{s}`")));
            Ok(ResultRow {
                scenario: f[0].to_string(),
                method: f[1].to_string(),
                param: f[2].to_string(),
                value: float(f[3])?,
                rep: f[4].parse().map_err(|_| err("bad replication index"))?,
                seed: f[5].parse().map_err(|_| err("bad seed"))?,
                hamming: float(f[6])?,
                i_star: float(f[7])?,
                ms: float(f[8])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub value: f64,
    pub mean_hamming: f64,
    pub runs: usize,
    pub failures: usize,
}

/// Mean Hamming rate per (method, grid value), failed runs excluded, in
/// first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, f64)> = Vec::new();
    for r in rows {
        let pos = out.iter().position(|(s, _)| s.method == r.method && s.value.to_bits() == r.value.to_bits());
        let idx = pos.unwrap_or_else(|| {
            out.push((
                SummaryRow { method: r.method.clone(), value: r.value, mean_hamming: f64::NAN, runs: 0, failures: 0 },
                0.0,
            ));
            out.len() - 1
        });
        let (s, total) = &mut out[idx];
        if r.hamming.is_nan() {
            s.failures += 1;
        } else {
            s.runs += 1;
            *total += r.hamming;
        }
    }
    out.into_iter()
        .map(|(mut s, total)| {
            if s.runs > 0 {
                s.mean_hamming = total / s.runs as f64;
            }
            s
        })
        .collect()
}

/// A network read from an edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListNetwork {
    pub tensor: Tensor3,
    /// Id of index 0 in the file (0 or 1).
    pub layer_base: u64,
    pub node_base: u64,
}

/// Parses `layer src dst [weight]` lines. `#` starts a comment. Ids are
/// 0-based when the smallest is 0, else 1-based, separately for layers and
/// nodes. Edges are mirrored; a repeated pair keeps the last weight.
pub fn parse_multilayer_edge_list(text: &str, family: Family) -> Result<EdgeListNetwork> {
    let mut edges: Vec<(u64, u64, u64, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&f.len()) {
            return Err(err(format!("expected `layer src dst [weight]`, got {} fields", f.len())));
        }
        let id = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| err(format!("{what} id `{s}` is not a non-negative integer")))
        };
        let (layer, src, dst) = (id(f[0], "layer")?, id(f[1], "node")?, id(f[2], "node")?);
        let w = match f.get(3) {
            None => 1.0,
            Some(s) => s.parse::<f64>().map_err(|_| err(format!("weight `{s}` is not a number")))?,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(err(format!("weight {w} must be finite and non-negative")));
        }
        let w = match family {
            Family::Bernoulli => f64::from(u8::from(w > 0.0)),
            Family::Poisson if w.fract() != 0.0 => return Err(err(format!("Poisson weight {w} is not an integer"))),
            Family::Poisson => w,
        };
        edges.push((layer, src, dst, w));
    }
    if edges.is_empty() {
        return Err(Error::Parse { line: 0, msg: "edge list has no edges".into() });
    }
    let layer_base = u64::from(edges.iter().all(|e| e.0 >= 1));
    let node_base = u64::from(edges.iter().all(|e| e.1 >= 1 && e.2 >= 1));
    let n = (edges.iter().map(|e| e.0).max().expect("nonempty") - layer_base + 1) as usize;
    let d = (edges.iter().map(|e| e.1.max(e.2)).max().expect("nonempty") - node_base + 1) as usize;
    let mut t = Tensor3::zeros(d, d, n);
    for (layer, src, dst, w) in edges {
        let (l, a, b) = ((layer - layer_base) as usize, (src - node_base) as usize, (dst - node_base) as usize);
        t.set(a, b, l, w);
        t.set(b, a, l, w);
    }
    Ok(EdgeListNetwork { tensor: t, layer_base, node_base })
}

pub fn load_multilayer_edge_list(path: &Path, family: Family) -> Result<EdgeListNetwork> {
    parse_multilayer_edge_list(&std::fs::read_to_string(path)?, family)
}

/// Clustering written by the `cluster` command. Labels and communities are
/// 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub method: Method,
    pub family: Family,
    pub k: usize,
    pub layers: usize,
    pub nodes: usize,
    pub layer_labels: Vec<usize>,
    pub memberships: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub margins: Vec<f64>,
}

impl ClusterReport {
    pub fn new(c: &Clustering, method: Method, family: Family, k: usize) -> Self {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        ClusterReport {
            method,
            family,
            k,
            layers: c.layer_labels.len(),
            nodes: c.sigma[0].len(),
            layer_labels: c.layer_labels.iter().map(|l| l + 1).collect(),
            memberships: c.sigma.iter().map(|s| s.iter().map(|c| c + 1).collect()).collect(),
            blocks: c.blocks.as_ref().map(|b| b.iter().map(rows).collect()).unwrap_or_default(),
            margins: c.margins.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("cluster report serializes")
    }
}

/// Two block matrices with 1-based memberships, for divergence queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockPairFile {
    pub blocks1: Vec<Vec<f64>>,
    pub blocks2: Vec<Vec<f64>>,
    pub memberships1: Vec<usize>,
    pub memberships2: Vec<usize>,
}

impl BlockPairFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Mixture parameters with one layer of each type.
    pub fn params(&self, family: Family) -> Result<MixtureBlockParams> {
        let matrix = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<f64>> {
            let k = rows.len();
            if k == 0 || rows.iter().any(|r| r.len() != k) {
                return Err(Error::Config("block matrices must be square and nonempty".into()));
            }
            Ok(DMatrix::from_fn(k, k, |a, b| rows[a][b]))
        };
        let zero_based = |s: &Vec<usize>| -> Result<Vec<usize>> {
            s.iter().map(|&c| c.checked_sub(1).ok_or_else(|| Error::Config("memberships are 1-based".into()))).collect()
        };
        MixtureBlockParams::new(
            family,
            vec![0, 1],
            [matrix(&self.blocks1)?, matrix(&self.blocks2)?],
            [zero_based(&self.memberships1)?, zero_based(&self.memberships2)?],
        )
    }
}
