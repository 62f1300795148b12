//! Initial layer clustering and node community detection.
//!
//! All initializers return layer labels in `{0, 1}` and one node membership
//! vector per layer type. Labels are only defined up to permutation; use
//! [`align_labels`] to map one labeling onto another.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::tensor_core::{contract_nodes, matricize, regularize, truncated_svd, Mode, OrthoFactor, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once an iteration improves the objective by less than this
    /// fraction.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 10, max_iter: 100, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `k x p`, one center per row. Every label is the nearest center.
    pub centers: DMatrix<f64>,
    /// Within-cluster sum of squares against `centers`.
    pub objective: f64,
    /// Objective after each assignment step of the winning run.
    pub trace: Vec<f64>,
}

impl KMeansResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.nrows()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut obj = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (c, d) = nearest(p, centers);
            obj += d;
            c
        })
        .collect();
    (labels, obj)
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(
    points: &[Vec<f64>],
    mut centers: Vec<Vec<f64>>,
    cfg: &KMeansConfig,
) -> (Vec<usize>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let k = centers.len();
    let dim = points[0].len();
    let (mut labels, mut obj) = assign(points, &centers);
    let mut trace = vec![obj];
    for _ in 0..cfg.max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Empty clusters take the point farthest from its own center, drawn
        // from a cluster that can spare one.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let donor = points
                .iter()
                .enumerate()
                .filter(|(i, _)| counts[labels[*i]] > 1)
                .map(|(i, p)| (i, sq_dist(p, &centers[labels[i]])))
                .fold(None::<(usize, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((i, _)) = donor {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                centers[c] = points[i].clone();
            }
        }
        let (next, next_obj) = assign(points, &centers);
        trace.push(next_obj);
        let stable = next == labels;
        let small_gain = obj - next_obj <= cfg.tol * obj.abs();
        labels = next;
        obj = next_obj;
        if stable || small_gain {
            break;
        }
    }
    (labels, centers, obj, trace)
}

/// Lloyd's algorithm from k-means++ seeds; the best of `restarts` runs by
/// within-cluster sum of squares.
pub fn kmeans(rows: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(rows, k, &KMeansConfig { restarts, ..KMeansConfig::default() }, seed)
}

pub fn kmeans_with(rows: &DMatrix<f64>, k: usize, cfg: &KMeansConfig, seed: u64) -> Result<KMeansResult> {
    let n = rows.nrows();
    if k == 0 || k > n {
        return Err(Error::arg(format!("cannot form {k} clusters from {n} rows")));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("k-means input has non-finite entries"));
    }
    let points: Vec<Vec<f64>> = rows.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let seeds = plus_plus_seeds(&points, k, &mut rng);
        let (labels, centers, objective, trace) = lloyd(&points, seeds, cfg);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            let centers = DMatrix::from_fn(k, rows.ncols(), |c, j| centers[c][j]);
            best = Some(KMeansResult { labels, centers, objective, trace });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Permutation `perm` (with `perm[candidate_label] = reference_label`)
/// maximizing the overlap between the two labelings of the same items. Ties
/// go to the lexicographically first permutation, so the identity wins.
pub fn align_labels(reference: &[usize], candidate: &[usize], k: usize) -> Result<Vec<usize>> {
    if reference.len() != candidate.len() {
        return Err(Error::arg("labelings to align cover different index sets"));
    }
    if reference.is_empty() {
        return Err(Error::arg("cannot align labelings with an empty overlap"));
    }
    if let Some(bad) = reference.iter().chain(candidate).find(|&&l| l >= k) {
        return Err(Error::arg(format!("label {bad} out of range for k={k}")));
    }
    let mut overlap = vec![vec![0usize; k]; k];
    for (&r, &c) in reference.iter().zip(candidate) {
        overlap[c][r] += 1;
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for perm in (0..k).permutations(k) {
        let score = (0..k).map(|c| overlap[c][perm[c]]).sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, perm));
        }
    }
    Ok(best.expect("k >= 1").1)
}

pub fn relabel(labels: &[usize], perm: &[usize]) -> Vec<usize> {
    labels.iter().map(|&l| perm[l]).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitDiagnostics {
    pub delta1: f64,
    pub rank_r: usize,
    /// Spectral gaps at the truncation points: the aggregated adjacency at
    /// rank r, then the projected mode-3 unfolding at rank 2.
    pub singular_gaps: Vec<f64>,
    /// Largest row norm of the unregularized mode-1 factor.
    pub max_row_norm: f64,
    /// Set when a layer cluster came out empty.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitResult {
    pub layer_labels: Vec<usize>,
    pub sigma: [Vec<usize>; 2],
    pub diagnostics: InitDiagnostics,
}

impl InitResult {
    pub fn layer_cluster_sizes(&self) -> [usize; 2] {
        let mut s = [0; 2];
        for &l in &self.layer_labels {
            s[l] += 1;
        }
        s
    }

    /// Same result with the two layer types swapped.
    pub fn swapped(&self) -> InitResult {
        InitResult {
            layer_labels: self.layer_labels.iter().map(|l| 1 - l).collect(),
            sigma: [self.sigma[1].clone(), self.sigma[0].clone()],
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// Default regularization level `c0 · sqrt(r / d)` for a `d x r` factor.
pub fn default_delta(c0: f64, r: usize, d: usize) -> f64 {
    c0 * (r as f64 / d as f64).sqrt()
}

/// Rows of a unit-norm spectral embedding closer than this to their
/// centroid are treated as one point.
const POINT_TOL: f64 = 1e-9;

/// Two-means on the rows of the top left singular vectors of `m3`, keeping
/// only numerically nonzero singular directions. Returns labels, the rank-2
/// gap, and whether one cluster came out empty.
fn two_means_on_spectrum(m3: &DMatrix<f64>, seed: u64) -> Result<(Vec<usize>, f64, bool)> {
    let n = m3.nrows();
    if n < 2 {
        return Ok((vec![0; n], 0.0, true));
    }
    let rank = 2.min(m3.ncols());
    let svd = truncated_svd(m3, rank)?;
    let gap = svd.gap();
    let keep = svd.numerical_rank().min(rank);
    if keep == 0 {
        return Ok((vec![0; n], gap, true));
    }
    let w = svd.factor.matrix().columns(0, keep).clone_owned();
    let centroid = w.row_sum() / n as f64;
    let spread = w.row_iter().map(|r| (r - &centroid).norm()).fold(0.0, f64::max);
    if spread <= POINT_TOL {
        return Ok((vec![0; n], gap, true));
    }
    let km = kmeans(&w, 2, KMeansConfig::default().restarts, seed)?;
    let degenerate = km.cluster_sizes().contains(&0);
    Ok((km.labels, gap, degenerate))
}

/// K-means on the rows of the top-K left singular vectors of `aggregate`.
fn spectral_communities(aggregate: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let d = aggregate.nrows();
    if k == 1 {
        return Ok(vec![0; d]);
    }
    let u = truncated_svd(aggregate, k)?;
    Ok(kmeans(u.factor.matrix(), k, KMeansConfig::default().restarts, seed)?.labels)
}

/// Node memberships for both layer types from the slices carrying each label.
/// A type with no layers gets the all-zero membership and `false`.
pub fn memberships_from_labels(x: &Tensor3, labels: &[usize], k: usize, seed: u64) -> Result<([Vec<usize>; 2], bool)> {
    let d = x.dims()[0];
    if k == 0 || k > d {
        return Err(Error::arg(format!("K={k} communities for {d} nodes")));
    }
    let mut complete = true;
    let mut sigma: [Vec<usize>; 2] = [vec![0; d], vec![0; d]];
    for (m, s) in sigma.iter_mut().enumerate() {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == m).collect();
        if members.is_empty() {
            complete = false;
            continue;
        }
        *s = spectral_communities(&x.slice_sum(members), k, derive_seed(seed, 10 + m as u64))?;
    }
    Ok((sigma, complete))
}

fn check_network(x: &Tensor3, r: usize, k: usize) -> Result<usize> {
    let [d, d2, n] = x.dims();
    if d != d2 {
        return Err(Error::shape(format!("layers are {d}x{d2}, expected square")));
    }
    if n == 0 {
        return Err(Error::arg("tensor has no layers"));
    }
    if r == 0 || r > d {
        return Err(Error::arg(format!("rank {r} must be in 1..={d}")));
    }
    if k == 0 || k > d {
        return Err(Error::arg(format!("K={k} communities for {d} nodes")));
    }
    Ok(d)
}

/// Regularized spectral initialization.
///
/// The mode-1 factor is the top-r left singular basis of the summed
/// adjacency, regularized at `delta1`; each layer is projected onto it and
/// the layers are split by two-means on the leading mode-3 singular vectors.
/// Node communities come from the aggregated adjacency of each layer cluster.
pub fn rspec(x: &Tensor3, r: usize, k: usize, delta1: f64, seed: u64) -> Result<InitResult> {
    check_network(x, r, k)?;
    let n = x.layers();
    let u = truncated_svd(&x.slice_sum(0..n), r)?;
    let max_row_norm = u.factor.max_row_norm();
    let reg = regularize(&u.factor, delta1)?;
    let projected = contract_nodes(x, reg.matrix())?;
    let (labels, w_gap, degenerate) = two_means_on_spectrum(&matricize(&projected, Mode::Three), derive_seed(seed, 1))?;
    let (sigma, complete) = memberships_from_labels(x, &labels, k, seed)?;
    Ok(InitResult {
        layer_labels: labels,
        sigma,
        diagnostics: InitDiagnostics {
            delta1,
            rank_r: r,
            singular_gaps: vec![u.gap(), w_gap],
            max_row_norm,
            degenerate: degenerate || !complete,
        },
    })
}

/// Spectral clustering of the mode-3 unfolding (no projection).
pub fn m3_spectral(x: &Tensor3, seed: u64) -> Result<Vec<usize>> {
    Ok(two_means_on_spectrum(&matricize(x, Mode::Three), derive_seed(seed, 1))?.0)
}

/// Random halving of layers and nodes used by [`split_init`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub layer_halves: [Vec<usize>; 2],
    pub node_halves: [Vec<usize>; 2],
    pub seed: u64,
}

fn halve(len: usize, rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    let mut second = idx.split_off(len / 2);
    idx.sort_unstable();
    second.sort_unstable();
    [idx, second]
}

impl SplitPlan {
    pub fn new(layers: usize, nodes: usize, seed: u64) -> SplitPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let layer_halves = halve(layers, &mut rng);
        rng.set_stream(2);
        let node_halves = halve(nodes, &mut rng);
        SplitPlan { layer_halves, node_halves, seed }
    }
}

/// Initialization with node and sample switching.
///
/// Layers and nodes are halved. For each layer half, the mode-1 factor is
/// estimated from the *other* layer half on this half's nodes, so the
/// projection is independent of the layers being clustered. Node
/// communities of one node half are estimated from the layer half whose
/// labels were computed on the other node half. Half-level labels and
/// memberships are aligned to a full-data [`rspec`] reference.
pub fn split_init(x: &Tensor3, r: usize, k: usize, delta1: f64, seed: u64) -> Result<InitResult> {
    let [d, _, n] = x.dims();
    let plan = SplitPlan::new(n, d, derive_seed(seed, 2));
    split_init_with_plan(x, r, k, delta1, &plan, seed)
}

pub fn split_init_with_plan(
    x: &Tensor3,
    r: usize,
    k: usize,
    delta1: f64,
    plan: &SplitPlan,
    seed: u64,
) -> Result<InitResult> {
    let d = check_network(x, r, k)?;
    let n = x.layers();
    if n < 4 || d < 4 * k {
        return Err(Error::arg(format!("split initialization needs n >= 4 and d >= 4K (n={n}, d={d}, K={k})")));
    }
    let covers = |halves: &[Vec<usize>; 2], len: usize| {
        let mut seen = vec![false; len];
        halves.iter().flatten().all(|&i| i < len && !std::mem::replace(&mut seen[i], true)) && seen.iter().all(|&s| s)
    };
    if !covers(&plan.layer_halves, n) || !covers(&plan.node_halves, d) {
        return Err(Error::arg("split plan is not a partition of the layers and nodes"));
    }
    let reference = rspec(x, r, k, delta1, seed)?;

    let mut labels = vec![0usize; n];
    let mut local_sigma: [[Vec<usize>; 2]; 2] = Default::default();
    let mut gaps = reference.diagnostics.singular_gaps.clone();
    for h in 0..2 {
        let o = 1 - h;
        let layers_h = &plan.layer_halves[h];
        let layers_o = &plan.layer_halves[o];
        let nodes_h = &plan.node_halves[h];
        let nodes_o = &plan.node_halves[o];
        if r > nodes_h.len() || k > nodes_o.len() {
            return Err(Error::arg(format!("node half {h} is too small for rank {r} and K={k}")));
        }

        let other = x.select(nodes_h, layers_o);
        let u = truncated_svd(&other.slice_sum(0..other.layers()), r)?;
        let reg = regularize(&u.factor, delta1)?;
        let own = x.select(nodes_h, layers_h);
        let projected = contract_nodes(&own, reg.matrix())?;
        let (half_labels, w_gap, _) =
            two_means_on_spectrum(&matricize(&projected, Mode::Three), derive_seed(seed, 20 + h as u64))?;
        gaps.push(w_gap);

        let ref_sub: Vec<usize> = layers_h.iter().map(|&i| reference.layer_labels[i]).collect();
        let perm = align_labels(&ref_sub, &half_labels, 2)?;
        let half_labels = relabel(&half_labels, &perm);
        if !(half_labels.contains(&0) && half_labels.contains(&1)) {
            return Err(Error::degenerate(format!("layer half {h} lost a layer cluster")));
        }
        for (&i, &l) in layers_h.iter().zip(&half_labels) {
            labels[i] = l;
        }

        // communities of the other node half, from this layer half
        let cross = x.select(nodes_o, layers_h);
        let (sigma_o, _) = memberships_from_labels(&cross, &half_labels, k, derive_seed(seed, 30 + h as u64))?;
        local_sigma[o] = sigma_o;
    }

    let mut sigma = [vec![0usize; d], vec![0usize; d]];
    for (h, nodes) in plan.node_halves.iter().enumerate() {
        for m in 0..2 {
            let local = &local_sigma[h][m];
            if (0..k).any(|c| !local.contains(&c)) {
                return Err(Error::degenerate(format!("node half {h} lost a community of layer type {}", m + 1)));
            }
            let ref_sub: Vec<usize> = nodes.iter().map(|&j| reference.sigma[m][j]).collect();
            let perm = align_labels(&ref_sub, local, k)?;
            for (&j, &c) in nodes.iter().zip(local) {
                sigma[m][j] = perm[c];
            }
        }
    }

    Ok(InitResult {
        layer_labels: labels,
        sigma,
        diagnostics: InitDiagnostics {
            delta1,
            rank_r: r,
            singular_gaps: gaps,
            max_row_norm: reference.diagnostics.max_row_norm,
            degenerate: reference.diagnostics.degenerate,
        },
    })
}

/// Which initializer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    Rspec,
    Split,
    M3sc,
}

impl InitMethod {
    pub fn name(self) -> &'static str {
        match self {
            InitMethod::Rspec => "rspec",
            InitMethod::Split => "split",
            InitMethod::M3sc => "m3sc",
        }
    }
}

/// Tuning for the spectral initializers: rank defaults to `2K`, the
/// regularization level to `c0 · sqrt(r/d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub method: InitMethod,
    pub rank: Option<usize>,
    pub c0: f64,
}

impl InitConfig {
    pub const DEFAULT_C0: f64 = 2.0;

    pub fn new(method: InitMethod) -> Self {
        InitConfig { method, rank: None, c0: Self::DEFAULT_C0 }
    }

    pub fn rank_for(&self, k: usize, d: usize) -> usize {
        self.rank.unwrap_or((2 * k).min(d))
    }
}

/// Anything that produces labels and memberships from a layer tensor.
pub trait Initializer: Sync {
    fn initialize(&self, x: &Tensor3, k: usize, seed: u64) -> Result<InitResult>;
}

impl Initializer for InitConfig {
    fn initialize(&self, x: &Tensor3, k: usize, seed: u64) -> Result<InitResult> {
        let d = x.dims()[0];
        let r = self.rank_for(k, d);
        let delta = default_delta(self.c0, r, d);
        match self.method {
            InitMethod::Rspec => rspec(x, r, k, delta, seed),
            InitMethod::Split => {
                // halves see half the nodes
                let delta_half = default_delta(self.c0, r, d / 2);
                split_init(x, r, k, delta_half, seed)
            }
            InitMethod::M3sc => {
                let labels = m3_spectral(x, seed)?;
                let (sigma, complete) = memberships_from_labels(x, &labels, k, seed)?;
                Ok(InitResult {
                    layer_labels: labels,
                    sigma,
                    diagnostics: InitDiagnostics { degenerate: !complete, ..Default::default() },
                })
            }
        }
    }
}

impl<F> Initializer for F
where
    F: Fn(&Tensor3, usize, u64) -> Result<InitResult> + Sync,
{
    fn initialize(&self, x: &Tensor3, k: usize, seed: u64) -> Result<InitResult> {
        self(x, k, seed)
    }
}

/// Regularization level helper exposed for callers that pick `r` themselves.
pub fn regularized_factor(sum: &DMatrix<f64>, r: usize, delta: f64) -> Result<OrthoFactor> {
    regularize(&truncated_svd(sum, r)?.factor, delta)
}
