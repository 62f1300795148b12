//! Ground-truth parameters, synthetic samplers and Rényi-1/2 separation
//! strengths for the four mixture families.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_core::Tensor3;

/// Edge distribution of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Binary edges, `X(ω) ~ Bern(P(ω))`.
    Bernoulli,
    /// Count-weighted edges, `X(ω) ~ Poisson(P(ω))`.
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" | "mmsbm" => Ok(Family::Bernoulli),
            "poisson" | "mmpbm" => Ok(Family::Poisson),
            other => Err(Error::arg(format!("unknown family `{other}`"))),
        }
    }
}

/// Whether self-loop slots `(j, j)` belong to the likelihood index set.
///
/// Included by default: the sampler generates self-loops and every
/// likelihood sums over the upper triangle with its diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    #[default]
    Include,
    Exclude,
}

impl Diagonal {
    /// Upper-triangle slots `(j1, j2)` with `j1 <= j2` (or `<` when excluded).
    pub fn slots(self, d: usize) -> impl Iterator<Item = (usize, usize)> {
        let offset = usize::from(self == Diagonal::Exclude);
        (0..d).flat_map(move |j2| (0..(j2 + 1).saturating_sub(offset)).map(move |j1| (j1, j2)))
    }

    pub fn slot_count(self, d: usize) -> usize {
        match self {
            Diagonal::Include => d * (d + 1) / 2,
            Diagonal::Exclude => d * d.saturating_sub(1) / 2,
        }
    }
}

/// Two-component mixture of stochastic block models (binary or Poisson).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBlockParams {
    pub family: Family,
    pub k: usize,
    /// Layer type of each layer, in `{0, 1}`.
    pub z_star: Vec<usize>,
    pub blocks: [DMatrix<f64>; 2],
    /// Community of each node under each layer type, in `0..k`.
    pub sigma: [Vec<usize>; 2],
}

impl MixtureBlockParams {
    pub fn new(family: Family, z_star: Vec<usize>, blocks: [DMatrix<f64>; 2], sigma: [Vec<usize>; 2]) -> Result<Self> {
        let k = blocks[0].nrows();
        let params = MixtureBlockParams { family, k, z_star, blocks, sigma };
        params.validate()?;
        Ok(params)
    }

    pub fn layers(&self) -> usize {
        self.z_star.len()
    }

    pub fn nodes(&self) -> usize {
        self.sigma[0].len()
    }

    fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 {
            return Err(Error::arg("block matrices must be at least 1x1"));
        }
        for (m, b) in self.blocks.iter().enumerate() {
            if b.shape() != (k, k) {
                return Err(Error::shape(format!("B{} is {:?}, expected {k}x{k}", m + 1, b.shape())));
            }
            if b != &b.transpose() {
                return Err(Error::arg(format!("B{} is not symmetric", m + 1)));
            }
            let in_range = match self.family {
                Family::Bernoulli => b.iter().all(|&p| (0.0..=1.0).contains(&p)),
                Family::Poisson => b.iter().all(|&p| p >= 0.0 && p.is_finite()),
            };
            if !in_range {
                return Err(Error::arg(format!("B{} has entries outside the family's support", m + 1)));
            }
        }
        let d = self.sigma[0].len();
        if self.sigma[1].len() != d {
            return Err(Error::shape("membership vectors differ in length"));
        }
        for (m, s) in self.sigma.iter().enumerate() {
            let mut seen = vec![false; k];
            for &c in s {
                *seen.get_mut(c).ok_or_else(|| Error::arg(format!("membership {c} out of range for K={k}")))? = true;
            }
            if let Some(empty) = seen.iter().position(|s| !s) {
                return Err(Error::arg(format!("community {empty} of type {} is empty", m + 1)));
            }
        }
        let mut types = [false; 2];
        for &z in &self.z_star {
            *types.get_mut(z).ok_or_else(|| Error::arg(format!("layer label {z} not in {{0,1}}")))? = true;
        }
        if types != [true, true] {
            return Err(Error::arg("both layer types must be present"));
        }
        Ok(())
    }

    pub fn edge_matrices(&self) -> Result<[EdgeMatrix; 2]> {
        Ok([edge_matrix(&self.blocks[0], &self.sigma[0])?, edge_matrix(&self.blocks[1], &self.sigma[1])?])
    }
}

/// Symmetric `d x d` matrix of edge probabilities or intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMatrix(DMatrix<f64>);

impl EdgeMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m != m.transpose() {
            return Err(Error::arg("edge matrix must be square and symmetric"));
        }
        Ok(EdgeMatrix(m))
    }

    pub fn constant(d: usize, value: f64) -> Self {
        EdgeMatrix(DMatrix::from_element(d, d, value))
    }

    pub fn nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    #[inline]
    pub fn get(&self, j1: usize, j2: usize) -> f64 {
        self.0[(j1, j2)]
    }
}

/// `P(j1, j2) = B(σ(j1), σ(j2))`.
pub fn edge_matrix(b: &DMatrix<f64>, sigma: &[usize]) -> Result<EdgeMatrix> {
    let k = b.nrows();
    if let Some(&bad) = sigma.iter().find(|&&s| s >= k) {
        return Err(Error::arg(format!("membership {bad} out of range for K={k}")));
    }
    let d = sigma.len();
    Ok(EdgeMatrix(DMatrix::from_fn(d, d, |i, j| b[(sigma[i], sigma[j])])))
}

fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    rng
}

fn draw(family: Family, p: f64, rng: &mut ChaCha8Rng) -> f64 {
    match family {
        Family::Bernoulli => f64::from(u8::from(rng.random::<f64>() < p)),
        Family::Poisson if p <= 0.0 => 0.0,
        Family::Poisson => Poisson::new(p).expect("positive finite intensity").sample(rng),
    }
}

/// Draws a `d x d x n` tensor. Layer `i` samples the upper triangle (with the
/// diagonal) from `P_{z*_i}` and mirrors it; each layer has its own ChaCha
/// stream so the result depends only on `(params, seed)`.
pub fn sample_mixture_network(params: &MixtureBlockParams, seed: u64) -> Result<Tensor3> {
    let [p1, p2] = params.edge_matrices()?;
    let probs = [p1, p2];
    let d = params.nodes();
    let mut t = Tensor3::zeros(d, d, params.layers());
    for (layer, &z) in params.z_star.iter().enumerate() {
        let mut rng = layer_rng(seed, layer);
        let p = &probs[z];
        for j2 in 0..d {
            for j1 in 0..=j2 {
                let x = draw(params.family, p.get(j1, j2), &mut rng);
                t.set(j1, j2, layer, x);
                t.set(j2, j1, layer, x);
            }
        }
    }
    Ok(t)
}

/// Scalar mixture distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarModel {
    Binomial { trials: u64 },
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMixtureParams {
    pub model: ScalarModel,
    /// `(p1, p2)` for Binomial, `(θ1, θ2)` for Poisson.
    pub params: [f64; 2],
    pub z_star: Vec<usize>,
}

impl ScalarMixtureParams {
    pub fn new(model: ScalarModel, params: [f64; 2], z_star: Vec<usize>) -> Result<Self> {
        let ok = match model {
            ScalarModel::Binomial { .. } => params.iter().all(|p| (0.0..=1.0).contains(p)),
            ScalarModel::Poisson => params.iter().all(|t| *t >= 0.0 && t.is_finite()),
        };
        if !ok {
            return Err(Error::arg(format!("parameters {params:?} outside the model's domain")));
        }
        if let Some(z) = z_star.iter().find(|&&z| z > 1) {
            return Err(Error::arg(format!("label {z} not in {{0,1}}")));
        }
        Ok(ScalarMixtureParams { model, params, z_star })
    }
}

pub fn sample_scalar_mixture(params: &ScalarMixtureParams, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    params
        .z_star
        .iter()
        .map(|&z| {
            let theta = params.params[z];
            match params.model {
                ScalarModel::Binomial { trials } => {
                    Binomial::new(trials, theta).expect("probability in [0, 1]").sample(&mut rng)
                }
                ScalarModel::Poisson if theta <= 0.0 => 0,
                ScalarModel::Poisson => Poisson::new(theta).expect("positive intensity").sample(&mut rng) as u64,
            }
        })
        .collect()
}

fn same_size(p1: &EdgeMatrix, p2: &EdgeMatrix) -> Result<()> {
    if p1.nodes() != p2.nodes() {
        return Err(Error::shape(format!("edge matrices are {} and {} nodes", p1.nodes(), p2.nodes())));
    }
    Ok(())
}

fn bernoulli_term(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
        return Err(Error::domain(format!("Bernoulli pair ({a}, {b}) is not in (0,1)")));
    }
    Ok(-2.0 * ((a * b).sqrt() + ((1.0 - a) * (1.0 - b)).sqrt()).ln())
}

/// `I* = −2 Σ_ω log(√(P1 P2) + √((1−P1)(1−P2)))` over the upper triangle
/// including the diagonal.
pub fn renyi_half_bernoulli(p1: &EdgeMatrix, p2: &EdgeMatrix) -> Result<f64> {
    renyi_half_bernoulli_slots(p1, p2, Diagonal::Include)
}

pub fn renyi_half_bernoulli_slots(p1: &EdgeMatrix, p2: &EdgeMatrix, diag: Diagonal) -> Result<f64> {
    same_size(p1, p2)?;
    let mut total = 0.0;
    for (j1, j2) in diag.slots(p1.nodes()) {
        total += bernoulli_term(p1.get(j1, j2), p2.get(j1, j2))?;
    }
    Ok(total.max(0.0))
}

/// `I* = Σ_ω (√P1 − √P2)²`.
pub fn renyi_half_poisson(p1: &EdgeMatrix, p2: &EdgeMatrix) -> Result<f64> {
    renyi_half_poisson_slots(p1, p2, Diagonal::Include)
}

pub fn renyi_half_poisson_slots(p1: &EdgeMatrix, p2: &EdgeMatrix, diag: Diagonal) -> Result<f64> {
    same_size(p1, p2)?;
    let mut total = 0.0;
    for (j1, j2) in diag.slots(p1.nodes()) {
        total += renyi_half_poisson_scalar(p1.get(j1, j2), p2.get(j1, j2))?;
    }
    Ok(total)
}

pub fn renyi_half_binomial(trials: u64, p1: f64, p2: f64) -> Result<f64> {
    Ok((trials as f64 * bernoulli_term(p1, p2)?).max(0.0))
}

pub fn renyi_half_poisson_scalar(theta1: f64, theta2: f64) -> Result<f64> {
    if !(theta1 >= 0.0 && theta2 >= 0.0) || !theta1.is_finite() || !theta2.is_finite() {
        return Err(Error::domain(format!("intensities ({theta1}, {theta2}) must be non-negative")));
    }
    Ok((theta1.sqrt() - theta2.sqrt()).powi(2))
}

/// Separation strength of a network mixture, using the family's divergence.
pub fn separation(params: &MixtureBlockParams) -> Result<f64> {
    let [p1, p2] = params.edge_matrices()?;
    match params.family {
        Family::Bernoulli => renyi_half_bernoulli(&p1, &p2),
        Family::Poisson => renyi_half_poisson(&p1, &p2),
    }
}

/// `B = p I_K + α p (1 1ᵀ − I_K)`.
pub fn simulation_block_matrix(k: usize, p: f64, alpha: f64) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::arg("K must be positive"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::arg(format!("within-community probability {p} not in (0,1)")));
    }
    let q = alpha * p;
    if !(alpha >= 0.0) || !(q < 1.0) {
        return Err(Error::arg(format!("out-in ratio {alpha} gives off-diagonal probability {q}")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| if i == j { p } else { q }))
}
