//! Misclustering loss and the optimal-rate helper.

use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest label alphabet accepted by the exhaustive permutation search.
pub const MAX_PERMUTATION_K: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct HammingReport {
    /// `min_π (1/n) Σ 𝕀(z_i ≠ π(z*_i))`.
    pub rate: f64,
    /// Minimizing permutation, `best_perm[true_label] = estimated label`.
    pub best_perm: Vec<usize>,
    /// Mismatch count for every permutation in lexicographic order.
    pub raw_mismatch_counts: Vec<usize>,
}

/// Hamming misclustering rate minimized over all `k!` relabelings of `z_star`.
/// Ties go to the lexicographically first permutation.
pub fn hamming(z: &[usize], z_star: &[usize], k: usize) -> Result<HammingReport> {
    if z.len() != z_star.len() {
        return Err(Error::arg(format!("label vectors differ in length ({} vs {})", z.len(), z_star.len())));
    }
    if k == 0 || k > MAX_PERMUTATION_K {
        return Err(Error::arg(format!("k={k} outside 1..={MAX_PERMUTATION_K}")));
    }
    if let Some(bad) = z.iter().chain(z_star).find(|&&l| l >= k) {
        return Err(Error::arg(format!("label {bad} out of range for k={k}")));
    }
    // counts[a][b] = #{i : z_i = a, z*_i = b}
    let mut counts = vec![vec![0usize; k]; k];
    for (&a, &b) in z.iter().zip(z_star) {
        counts[a][b] += 1;
    }
    let n = z.len();
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut raw = Vec::new();
    for perm in (0..k).permutations(k) {
        let agree: usize = (0..k).map(|b| counts[perm[b]][b]).sum();
        let mismatches = n - agree;
        raw.push(mismatches);
        if best.as_ref().is_none_or(|(m, _)| mismatches < *m) {
            best = Some((mismatches, perm));
        }
    }
    let (mismatches, best_perm) = best.expect("k >= 1 has a permutation");
    Ok(HammingReport {
        rate: if n == 0 { 0.0 } else { mismatches as f64 / n as f64 },
        best_perm,
        raw_mismatch_counts: raw,
    })
}

/// Convenience wrapper returning only the rate.
pub fn hamming_rate(z: &[usize], z_star: &[usize], k: usize) -> Result<f64> {
    hamming(z, z_star, k).map(|r| r.rate)
}

/// `exp(−I*/2)`.
pub fn theoretical_rate(i_star: f64) -> f64 {
    (-i_star / 2.0).exp()
}
