//! Likelihood refinement of layer labels.
//!
//! Given an initial clustering, block connection matrices are estimated per
//! layer type and every layer is re-assigned to the type under which its
//! adjacency matrix is more likely.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::init_cluster::{InitConfig, InitResult, Initializer};
use crate::models::{Diagonal, EdgeMatrix, Family};
use crate::tensor_core::Tensor3;

/// Probabilities and intensities are kept at least this far from the
/// boundary inside log-likelihoods.
pub const LIKELIHOOD_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimate {
    /// Clamped to `[ε, 1−ε]` (Bernoulli) or `[ε, ∞)` (Poisson).
    pub blocks: [DMatrix<f64>; 2],
    /// Layer-slot pairs behind each entry.
    pub slot_counts: [DMatrix<usize>; 2],
    /// Set when some community pair had no node slots and was filled with
    /// the layer cluster's overall mean.
    pub empty_blocks: bool,
}

impl BlockEstimate {
    /// Per-slot edge probabilities (or intensities) of both layer types.
    pub fn edge_probabilities(&self, sigma: &[Vec<usize>; 2]) -> [DMatrix<f64>; 2] {
        [0, 1].map(|m| {
            let s = &sigma[m];
            DMatrix::from_fn(s.len(), s.len(), |a, b| self.blocks[m][(s[a], s[b])])
        })
    }
}

/// Block means of each layer cluster. Both orientations of a community pair
/// are pooled, so the estimates are symmetric.
pub fn estimate_blocks(
    x: &Tensor3,
    labels: &[usize],
    sigma: &[Vec<usize>; 2],
    k: usize,
    family: Family,
    diag: Diagonal,
) -> Result<BlockEstimate> {
    let [d, _, n] = x.dims();
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} layers", labels.len())));
    }
    if sigma.iter().any(|s| s.len() != d) {
        return Err(Error::shape(format!("memberships must cover {d} nodes")));
    }
    if let Some(bad) = sigma.iter().flatten().find(|&&c| c >= k) {
        return Err(Error::arg(format!("community {bad} out of range for K={k}")));
    }
    if diag.slot_count(d) == 0 {
        return Err(Error::arg("no node pairs to estimate from"));
    }
    let mut empty_blocks = false;
    let mut blocks = [DMatrix::zeros(k, k), DMatrix::zeros(k, k)];
    let mut slot_counts = [DMatrix::zeros(k, k), DMatrix::zeros(k, k)];
    for m in 0..2 {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == m).collect();
        if members.is_empty() {
            return Err(Error::degenerate(format!("layer cluster {} is empty", m + 1)));
        }
        let total = x.slice_sum(members.iter().copied());
        let mut sums = DMatrix::<f64>::zeros(k, k);
        let mut counts = DMatrix::<usize>::zeros(k, k);
        let mut all = 0.0;
        for (j1, j2) in diag.slots(d) {
            let (a, b) = (sigma[m][j1].min(sigma[m][j2]), sigma[m][j1].max(sigma[m][j2]));
            sums[(a, b)] += total[(j1, j2)];
            counts[(a, b)] += 1;
            all += total[(j1, j2)];
        }
        let layers = members.len() as f64;
        let fallback = all / (diag.slot_count(d) as f64 * layers);
        for a in 0..k {
            for b in a..k {
                let v = if counts[(a, b)] == 0 {
                    empty_blocks = true;
                    fallback
                } else {
                    sums[(a, b)] / (counts[(a, b)] as f64 * layers)
                };
                let v = match family {
                    Family::Bernoulli => v.clamp(LIKELIHOOD_CLAMP, 1.0 - LIKELIHOOD_CLAMP),
                    Family::Poisson => v.max(LIKELIHOOD_CLAMP),
                };
                blocks[m][(a, b)] = v;
                blocks[m][(b, a)] = v;
                let c = counts[(a, b)] * members.len();
                slot_counts[m][(a, b)] = c;
                slot_counts[m][(b, a)] = c;
            }
        }
    }
    Ok(BlockEstimate { blocks, slot_counts, empty_blocks })
}

/// Log-likelihood of one symmetric layer under per-slot probabilities.
pub fn layer_log_likelihood(layer: &DMatrix<f64>, prob: &DMatrix<f64>, family: Family, diag: Diagonal) -> f64 {
    let d = layer.nrows();
    diag.slots(d)
        .map(|(j1, j2)| {
            let a = layer[(j1, j2)];
            match family {
                Family::Bernoulli => {
                    let p = prob[(j1, j2)].clamp(LIKELIHOOD_CLAMP, 1.0 - LIKELIHOOD_CLAMP);
                    a * p.ln() + (1.0 - a) * (1.0 - p).ln()
                }
                Family::Poisson => {
                    let t = prob[(j1, j2)].max(LIKELIHOOD_CLAMP);
                    a * t.ln() - t
                }
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerScore {
    pub label: usize,
    pub log_likelihood: [f64; 2],
}

impl LayerScore {
    pub fn margin(&self) -> f64 {
        (self.log_likelihood[0] - self.log_likelihood[1]).abs()
    }
}

/// Likelihood label of a single layer; ties go to the first type.
pub fn refine_label(
    layer: &DMatrix<f64>,
    prob: &[DMatrix<f64>; 2],
    family: Family,
    diag: Diagonal,
) -> Result<LayerScore> {
    let d = layer.nrows();
    if layer.ncols() != d || prob.iter().any(|p| p.shape() != (d, d)) {
        return Err(Error::shape("layer and probability matrices must be the same square size"));
    }
    let ll = [0, 1].map(|m| layer_log_likelihood(layer, &prob[m], family, diag));
    Ok(LayerScore { label: usize::from(ll[1] > ll[0]), log_likelihood: ll })
}

fn oracle_inputs(x: &DMatrix<f64>, p1: &EdgeMatrix, p2: &EdgeMatrix) -> Result<usize> {
    let d = x.nrows();
    if x.ncols() != d || p1.nodes() != d || p2.nodes() != d {
        return Err(Error::shape("layer and edge matrices must be the same square size"));
    }
    Ok(d)
}

/// Label (0 or 1) of a binary layer under known edge probabilities; ties go
/// to 0. Probabilities must lie strictly inside `(0, 1)`.
pub fn oracle_label_bernoulli(x: &DMatrix<f64>, p1: &EdgeMatrix, p2: &EdgeMatrix, diag: Diagonal) -> Result<usize> {
    let d = oracle_inputs(x, p1, p2)?;
    let mut ll = [0.0; 2];
    for (m, p) in [p1, p2].into_iter().enumerate() {
        for (j1, j2) in diag.slots(d) {
            let q = p.get(j1, j2);
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::domain(format!("edge probability {q} is not in (0,1)")));
            }
            let a = x[(j1, j2)];
            ll[m] += a * q.ln() + (1.0 - a) * (1.0 - q).ln();
        }
    }
    Ok(usize::from(ll[1] > ll[0]))
}

/// Label of a count-valued layer under known intensities; ties go to 0. A
/// zero intensity where the layer has a positive count rules that type out.
pub fn oracle_label_poisson(x: &DMatrix<f64>, p1: &EdgeMatrix, p2: &EdgeMatrix, diag: Diagonal) -> Result<usize> {
    let d = oracle_inputs(x, p1, p2)?;
    let mut ll = [0.0; 2];
    for (m, p) in [p1, p2].into_iter().enumerate() {
        for (j1, j2) in diag.slots(d) {
            let t = p.get(j1, j2);
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::domain(format!("intensity {t} is not a finite non-negative number")));
            }
            let a = x[(j1, j2)];
            ll[m] += if a == 0.0 { -t } else { a * t.ln() - t };
        }
    }
    if ll.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::domain("layer has positive counts where both intensities are zero"));
    }
    Ok(usize::from(ll[1] > ll[0]))
}

/// Source of the first-stage clustering.
#[derive(Clone, Copy)]
pub enum Init<'a> {
    Config(InitConfig),
    /// A precomputed clustering of the full tensor. Leave-one-out drops the
    /// held-out layer's label.
    Fixed(&'a InitResult),
    Custom(&'a dyn Initializer),
}

impl Init<'_> {
    fn run(&self, x: &Tensor3, k: usize, seed: u64, held_out: Option<usize>) -> Result<InitResult> {
        match self {
            Init::Config(c) => c.initialize(x, k, seed),
            Init::Custom(c) => c.initialize(x, k, seed),
            Init::Fixed(r) => {
                let mut r = (*r).clone();
                if let Some(i) = held_out {
                    r.layer_labels.remove(i);
                }
                if r.layer_labels.len() != x.layers() {
                    return Err(Error::shape("fixed initialization does not match the layer count"));
                }
                Ok(r)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefineOptions {
    pub family: Family,
    pub k: usize,
    pub diagonal: Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    pub labels: Vec<usize>,
    pub init: InitResult,
    pub blocks: BlockEstimate,
    /// `|ℓ₁ − ℓ₂|` for each layer.
    pub margins: Vec<f64>,
    /// Leave-one-out: layers whose held-out fit failed or tied exactly, and
    /// which took the full-data label.
    pub fallback_layers: Vec<usize>,
    /// Leave-one-out: layers whose held-out labeling did not map one-to-one
    /// onto the reference labeling.
    pub non_bijective: Vec<usize>,
}

fn refine_all(x: &Tensor3, init: &InitResult, opts: &RefineOptions) -> Result<(Vec<LayerScore>, BlockEstimate)> {
    let blocks = estimate_blocks(x, &init.layer_labels, &init.sigma, opts.k, opts.family, opts.diagonal)?;
    let prob = blocks.edge_probabilities(&init.sigma);
    let scores = (0..x.layers())
        .map(|i| refine_label(&x.slice(i), &prob, opts.family, opts.diagonal))
        .collect::<Result<Vec<_>>>()?;
    Ok((scores, blocks))
}

/// Initialize on all layers, estimate blocks, relabel every layer.
pub fn two_stage_practical(x: &Tensor3, opts: &RefineOptions, init: Init<'_>, seed: u64) -> Result<RefineResult> {
    let init = init.run(x, opts.k, seed, None)?;
    let (scores, blocks) = refine_all(x, &init, opts)?;
    Ok(RefineResult {
        labels: scores.iter().map(|s| s.label).collect(),
        margins: scores.iter().map(LayerScore::margin).collect(),
        init,
        blocks,
        fallback_layers: Vec::new(),
        non_bijective: Vec::new(),
    })
}

/// Held-out labeling for layer `i`: initialization labels on the other
/// layers and the likelihood label of layer `i` under their estimates. An
/// exact likelihood tie carries no orientation, so the layer takes its
/// full-data label instead (second value `true`).
fn held_out_labels(
    x: &Tensor3,
    i: usize,
    opts: &RefineOptions,
    init: Init<'_>,
    seed: u64,
    practical: &[usize],
) -> Result<(Vec<usize>, bool)> {
    let n = x.layers();
    let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let sub = x.select_layers(&rest);
    let fit = init.run(&sub, opts.k, seed, Some(i))?;
    let blocks = estimate_blocks(&sub, &fit.layer_labels, &fit.sigma, opts.k, opts.family, opts.diagonal)?;
    let prob = blocks.edge_probabilities(&fit.sigma);
    let own = refine_label(&x.slice(i), &prob, opts.family, opts.diagonal)?;
    let mut labels = fit.layer_labels;
    labels.insert(i, own.label);
    let tied = own.margin() == 0.0;
    if tied {
        labels[i] = label_in_frame(&labels, practical, i);
    }
    Ok((labels, tied))
}

/// `source[i]` expressed in the frame of `frame`, by the majority overlap of
/// `i`'s cluster in `source` over the other items. Entry `i` of `frame` is
/// ignored; a tie keeps `source[i]`.
pub fn label_in_frame(frame: &[usize], source: &[usize], i: usize) -> usize {
    let own = source[i];
    let mut overlap = [0usize; 2];
    for (j, (&f, &s)) in frame.iter().zip(source).enumerate() {
        if j != i && s == own {
            overlap[f] += 1;
        }
    }
    match overlap[0].cmp(&overlap[1]) {
        std::cmp::Ordering::Greater => 0,
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => own,
    }
}

/// Label for layer `i` in the frame of `reference`: the reference label
/// sharing the most layers with `i`'s held-out cluster. A tie keeps the
/// held-out label, so swapping both labelings swaps the result.
pub fn consensus_label(reference: &[usize], held_out: &[usize], i: usize) -> usize {
    let own = held_out[i];
    let mut overlap = [0usize; 2];
    for (&r, &h) in reference.iter().zip(held_out) {
        if h == own {
            overlap[r] += 1;
        }
    }
    match overlap[0].cmp(&overlap[1]) {
        std::cmp::Ordering::Greater => 0,
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => own,
    }
}

/// Leave-one-out two-stage clustering. Each layer is labeled by a model fit
/// without it, and the per-layer labelings are put in the frame of the first
/// layer's.
pub fn two_stage_loo(x: &Tensor3, opts: &RefineOptions, init: Init<'_>, seed: u64) -> Result<RefineResult> {
    let n = x.layers();
    if n < 3 {
        return Err(Error::arg(format!("leave-one-out needs at least 3 layers, got {n}")));
    }
    let practical = two_stage_practical(x, opts, init, seed)?;
    let held: Vec<Result<(Vec<usize>, bool)>> =
        (0..n).into_par_iter().map(|i| held_out_labels(x, i, opts, init, seed, &practical.labels)).collect();
    let reference = match &held[0] {
        Ok((r, _)) => r.clone(),
        Err(_) => practical.labels.clone(),
    };
    let mut labels = Vec::with_capacity(n);
    let mut fallback_layers = Vec::new();
    let mut non_bijective = Vec::new();
    for (i, h) in held.iter().enumerate() {
        if matches!(h, Ok((_, true))) {
            fallback_layers.push(i);
        }
        match h {
            Ok((h, _)) if i == 0 => labels.push(h[0]),
            Ok((h, _)) => {
                labels.push(consensus_label(&reference, h, i));
                let mut flipped = h.clone();
                flipped[i] = 1 - h[i];
                if consensus_label(&reference, &flipped, i) == labels[i] {
                    non_bijective.push(i);
                }
            }
            Err(_) => {
                labels.push(practical.labels[i]);
                fallback_layers.push(i);
            }
        }
    }
    Ok(RefineResult { labels, fallback_layers, non_bijective, ..practical })
}
