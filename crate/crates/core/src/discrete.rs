//! Two-component Binomial and Poisson mixtures of scalar counts.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::init_cluster::kmeans;
use crate::models::ScalarModel;
use crate::refine::{consensus_label, label_in_frame};

/// Scalar probabilities and intensities are clamped this far from the
/// boundary before taking logs.
pub const SCALAR_CLAMP: f64 = 1e-9;

/// Method-of-moments fit. `params[0] >= params[1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomEstimate {
    pub m1: f64,
    /// Second factorial moment (Binomial) or mean square root (Poisson).
    pub m2: f64,
    pub params: [f64; 2],
    pub discriminant: f64,
    /// Set when the discriminant was negative and both components collapsed
    /// to the mean.
    pub fallback_used: bool,
}

/// Binomial moments: `p = M1 ± sqrt(M2 − M1²)`, clamped into `(0, 1)`.
pub fn binomial_mom(x: &[u64], trials: u64) -> Result<MomEstimate> {
    if trials < 2 {
        return Err(Error::arg(format!("need at least 2 trials, got {trials}")));
    }
    if x.is_empty() {
        return Err(Error::arg("no observations"));
    }
    if let Some(v) = x.iter().find(|&&v| v > trials) {
        return Err(Error::arg(format!("count {v} exceeds {trials} trials")));
    }
    let n = x.len() as f64;
    let d = trials as f64;
    let m1 = x.iter().sum::<u64>() as f64 / (n * d);
    let m2 = x.iter().map(|&v| (v as f64) * (v as f64 - 1.0)).sum::<f64>() / (n * d * (d - 1.0));
    let discriminant = m2 - m1 * m1;
    let fallback_used = discriminant < 0.0;
    let spread = if fallback_used { 0.0 } else { discriminant.sqrt() };
    let clamp = |p: f64| p.clamp(SCALAR_CLAMP, 1.0 - SCALAR_CLAMP);
    Ok(MomEstimate { m1, m2, params: [clamp(m1 + spread), clamp(m1 - spread)], discriminant, fallback_used })
}

/// Poisson moments: `θ = M1 ± 2 M½ sqrt(M1 − M½²)`, negatives set to 0.
pub fn poisson_mom(x: &[u64]) -> Result<MomEstimate> {
    if x.is_empty() {
        return Err(Error::arg("no observations"));
    }
    let n = x.len() as f64;
    let m1 = x.iter().sum::<u64>() as f64 / n;
    let m_half = x.iter().map(|&v| (v as f64).sqrt()).sum::<f64>() / n;
    let discriminant = m1 - m_half * m_half;
    let fallback_used = discriminant < 0.0;
    let spread = if fallback_used { 0.0 } else { 2.0 * m_half * discriminant.sqrt() };
    Ok(MomEstimate { m1, m2: m_half, params: [m1 + spread, (m1 - spread).max(0.0)], discriminant, fallback_used })
}

fn log_likelihood(x: u64, model: ScalarModel, param: f64) -> f64 {
    let x = x as f64;
    match model {
        ScalarModel::Binomial { trials } => x * param.ln() + (trials as f64 - x) * (1.0 - param).ln(),
        ScalarModel::Poisson => x * param.ln() - param,
    }
}

/// Likelihood label of one count under known parameters; ties go to the
/// first component.
pub fn scalar_mle_label(x: u64, model: ScalarModel, params: [f64; 2]) -> Result<usize> {
    let interior = match model {
        ScalarModel::Binomial { .. } => params.iter().all(|p| *p > 0.0 && *p < 1.0),
        ScalarModel::Poisson => params.iter().all(|t| *t > 0.0 && t.is_finite()),
    };
    if !interior {
        return Err(Error::domain(format!("parameters {params:?} on the boundary of the model")));
    }
    if let ScalarModel::Binomial { trials } = model {
        if x > trials {
            return Err(Error::arg(format!("count {x} exceeds {trials} trials")));
        }
    }
    let ll = params.map(|p| log_likelihood(x, model, p));
    Ok(usize::from(ll[1] > ll[0]))
}

fn clamp_params(model: ScalarModel, params: [f64; 2]) -> [f64; 2] {
    match model {
        ScalarModel::Binomial { .. } => params.map(|p| p.clamp(SCALAR_CLAMP, 1.0 - SCALAR_CLAMP)),
        ScalarModel::Poisson => params.map(|t| t.max(SCALAR_CLAMP)),
    }
}

fn mom(x: &[u64], model: ScalarModel) -> Result<MomEstimate> {
    match model {
        ScalarModel::Binomial { trials } => binomial_mom(x, trials),
        ScalarModel::Poisson => poisson_mom(x),
    }
}

/// Per-cluster success probability (Binomial) or mean (Poisson). `None`
/// when a cluster is empty.
fn cluster_estimates(x: &[u64], labels: &[usize], model: ScalarModel) -> Option<[f64; 2]> {
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&v, &l) in x.iter().zip(labels) {
        sums[l] += v as f64;
        counts[l] += 1;
    }
    if counts.contains(&0) {
        return None;
    }
    let scale = match model {
        ScalarModel::Binomial { trials } => trials as f64,
        ScalarModel::Poisson => 1.0,
    };
    Some([0, 1].map(|k| sums[k] / (counts[k] as f64 * scale)))
}

#[derive(Debug, Clone, Copy)]
pub enum ScalarInit<'a> {
    KMeans,
    /// Labels from the likelihood rule under moment estimates.
    Mom,
    /// Labels for all observations; leave-one-out drops the held-out one.
    Fixed(&'a [usize]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMode {
    LeaveOneOut,
    Practical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarClustering {
    pub labels: Vec<usize>,
    /// Component parameters estimated from the full-data initialization.
    pub params: [f64; 2],
    /// Observations whose fit fell back to global moment estimates, or whose
    /// held-out likelihoods tied and which took the full-data label.
    pub fallback: Vec<usize>,
}

impl ScalarClustering {
    pub fn fallback_used(&self) -> bool {
        !self.fallback.is_empty()
    }
}

fn initial_labels(
    x: &[u64],
    model: ScalarModel,
    init: ScalarInit<'_>,
    held_out: Option<usize>,
    seed: u64,
) -> Result<Vec<usize>> {
    match init {
        ScalarInit::KMeans => {
            if x.len() < 2 {
                return Ok(vec![0; x.len()]);
            }
            let col = DMatrix::from_iterator(x.len(), 1, x.iter().map(|&v| v as f64));
            Ok(kmeans(&col, 2, 10, seed)?.labels)
        }
        ScalarInit::Mom => {
            let est = mom(x, model)?;
            let params = clamp_params(model, est.params);
            x.iter().map(|&v| scalar_mle_label(v, model, params)).collect()
        }
        ScalarInit::Fixed(labels) => {
            let mut labels = labels.to_vec();
            if let Some(i) = held_out {
                labels.remove(i);
            }
            if labels.len() != x.len() {
                return Err(Error::shape("fixed labels do not match the observations"));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::arg("fixed labels must be 0 or 1"));
            }
            Ok(labels)
        }
    }
}

/// Parameters from initial labels, or global moment estimates when a
/// cluster is empty (second value `true`).
fn fit(x: &[u64], model: ScalarModel, labels: &[usize]) -> Result<([f64; 2], bool)> {
    match cluster_estimates(x, labels, model) {
        Some(p) => Ok((clamp_params(model, p), false)),
        None => Ok((clamp_params(model, mom(x, model)?.params), true)),
    }
}

/// Clusters counts from a two-component mixture.
///
/// Practical mode fits once on all observations and relabels each by
/// likelihood. Leave-one-out mode labels each observation with parameters
/// fit without it and aligns the per-observation labelings to the first.
pub fn cluster_scalar_mixture(
    x: &[u64],
    model: ScalarModel,
    init: ScalarInit<'_>,
    mode: ScalarMode,
    seed: u64,
) -> Result<ScalarClustering> {
    let n = x.len();
    if n == 0 {
        return Err(Error::arg("no observations"));
    }
    if let ScalarModel::Binomial { trials } = model {
        if let Some(v) = x.iter().find(|&&v| v > trials) {
            return Err(Error::arg(format!("count {v} exceeds {trials} trials")));
        }
    }
    let full = initial_labels(x, model, init, None, seed)?;
    let (params, full_fallback) = fit(x, model, &full)?;
    let practical: Vec<usize> = x.iter().map(|&v| scalar_mle_label(v, model, params)).collect::<Result<_>>()?;
    if mode == ScalarMode::Practical {
        return Ok(ScalarClustering {
            labels: practical,
            params,
            fallback: if full_fallback { (0..n).collect() } else { Vec::new() },
        });
    }
    if n < 3 {
        return Err(Error::arg(format!("leave-one-out needs at least 3 observations, got {n}")));
    }

    let held: Vec<(Vec<usize>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rest = x.to_vec();
            let own = rest.remove(i);
            let mut labels = initial_labels(&rest, model, init, Some(i), seed)?;
            let (p, fell_back) = fit(&rest, model, &labels)?;
            labels.insert(i, scalar_mle_label(own, model, p)?);
            // equal likelihoods say nothing about orientation
            let tied = log_likelihood(own, model, p[0]) == log_likelihood(own, model, p[1]);
            if tied {
                labels[i] = label_in_frame(&labels, &practical, i);
            }
            Ok((labels, fell_back || tied))
        })
        .collect::<Result<_>>()?;

    let reference = &held[0].0;
    let labels =
        (0..n).map(|i| if i == 0 { reference[0] } else { consensus_label(reference, &held[i].0, i) }).collect();
    let fallback = (0..n).filter(|&i| held[i].1).collect();
    Ok(ScalarClustering { labels, params, fallback })
}
