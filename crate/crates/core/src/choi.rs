//! Choi states of Kraus channels and the diagnostics derived from them:
//! purity, spectrum, fidelity.
//!
//! For a channel with Kraus operators `κ_k`, the Choi state is
//! `χ = Σ_k (κ_k ⊗ I)|Φ₊⟩⟨Φ₊|(κ_k† ⊗ I)` with
//! `|Φ₊⟩ = (1/√d) Σ_j |j⟩⊗|j⟩`; equivalently
//! `χ = (1/d) Σ_k vec(κ_k) vec(κ_k)†` with row-major vectorization.
//! Its rank equals the channel rank.

use crate::channel::{DensityMatrix, KrausStack};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec};

/// The `d²×d²` Choi state of a `d`-dimensional channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiState {
    d: usize,
    mat: CMat,
}

impl ChoiState {
    /// Checked constructor: valid density matrix of dimension `d²` whose
    /// partial trace over the first factor is `I_d/d` within `1e-8`.
    pub fn new(d: usize, mat: CMat) -> Result<Self> {
        let rho = DensityMatrix::new(mat)?;
        let mat = rho.mat().clone();
        let reduced = linalg::partial_trace_first(&mat, d)?;
        let target = CMat::identity(d, d) * cr(1.0 / d as f64);
        let drift = (reduced - target).norm();
        if drift > 1e-8 {
            return Err(Error::Validation(format!(
                "Choi partial trace differs from I/d by {drift:.3e} (not trace preserving)"
            )));
        }
        Ok(ChoiState { d, mat })
    }

    pub(crate) fn from_valid(d: usize, mat: CMat) -> Self {
        ChoiState { d, mat }
    }

    /// Channel dimension `d` (the matrix itself is `d²×d²`).
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.mat, &self.mat).re
    }
}

/// Row-major vectorization of Kraus block `k`, scaled by `1/√d`:
/// the vector `(κ_k ⊗ I)|Φ₊⟩`.
fn choi_vector(k: &KrausStack, block: usize) -> CVec {
    let d = k.d();
    let b = k.block(block);
    let scale = cr(1.0 / (d as f64).sqrt());
    CVec::from_fn(d * d, |idx, _| scale * b[(idx / d, idx % d)])
}

/// Builds the Choi state `χ` of the channel.
///
/// Independent of the Kraus representation: mixing the blocks by any
/// unitary on the block index leaves the result unchanged.
pub fn choi_state(k: &KrausStack) -> ChoiState {
    let d = k.d();
    let n = d * d;
    let mut mat = CMat::zeros(n, n);
    for block in 0..k.m() {
        let v = choi_vector(k, block);
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    ChoiState::from_valid(d, mat)
}

/// `tr χ²` without building `χ`, via the Gram identity
/// `tr χ² = (1/d²) Σ_{k,l} |tr(κ_k† κ_l)|²`. Result lies in `[1/d², 1]`.
pub fn choi_purity(k: &KrausStack) -> f64 {
    let d = k.d();
    let m = k.m();
    let mut acc = 0.0;
    for a in 0..m {
        let ba = k.block(a);
        // diagonal term
        let taa = linalg::hs_inner_re(&ba.clone_owned(), &ba.clone_owned());
        acc += taa * taa;
        for b in (a + 1)..m {
            let bb = k.block(b);
            let mut t = linalg::C_ZERO;
            for i in 0..d {
                for j in 0..d {
                    t += ba[(i, j)].conj() * bb[(i, j)];
                }
            }
            acc += 2.0 * t.norm_sqr();
        }
    }
    acc / (d * d) as f64
}

/// Eigenvalues of the Choi state, sorted descending and clamped to `[0,1]`,
/// together with their cumulative sums.
#[derive(Debug, Clone)]
pub struct ChoiSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl ChoiSpectrum {
    pub fn cumulative(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    /// Number of eigenvalues above `threshold` (effective channel rank).
    pub fn rank(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > threshold).count()
    }
}

pub fn choi_spectrum(k: &KrausStack) -> ChoiSpectrum {
    let chi = choi_state(k);
    let eigenvalues = linalg::eigh_values(chi.mat())
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    ChoiSpectrum { eigenvalues }
}

/// Uhlmann fidelity `F = tr√(√χ_a χ_b √χ_a)` between two Choi states,
/// clamped to `[0,1]`. Symmetric in its arguments.
pub fn choi_fidelity(a: &ChoiState, b: &ChoiState) -> Result<f64> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch(format!(
            "Choi states of dimension {} and {}",
            a.d(),
            b.d()
        )));
    }
    let root_a = linalg::sqrtm_psd(a.mat());
    let inner = &root_a * b.mat() * &root_a;
    let fidelity: f64 = linalg::eigh_values(&inner)
        .into_iter()
        .map(|v| if v > 0.0 { v.sqrt() } else { 0.0 })
        .sum();
    Ok(fidelity.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C_ZERO;
    use crate::sample;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn depolarizing() -> KrausStack {
        let i = linalg::CScalar::new(0.0, 1.0);
        let half = cr(0.5);
        let sx = CMat::from_row_slice(2, 2, &[C_ZERO, cr(1.0), cr(1.0), C_ZERO]) * half;
        let sy = CMat::from_row_slice(2, 2, &[C_ZERO, -i, i, C_ZERO]) * half;
        let sz = CMat::from_row_slice(2, 2, &[cr(1.0), C_ZERO, C_ZERO, cr(-1.0)]) * half;
        let id = CMat::identity(2, 2) * half;
        KrausStack::from_blocks(&[sx, sy, sz, id]).unwrap()
    }

    #[test]
    fn identity_channel_choi_is_max_entangled_projector() {
        let chi = choi_state(&KrausStack::identity(2));
        // |Φ₊⟩⟨Φ₊| with |Φ₊⟩ = (|00⟩ + |11⟩)/√2
        let mut expected = CMat::zeros(4, 4);
        for &i in &[0usize, 3] {
            for &j in &[0usize, 3] {
                expected[(i, j)] = cr(0.5);
            }
        }
        assert_abs_diff_eq!((chi.mat() - expected).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(chi.purity(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn depolarizing_choi_is_maximally_mixed() {
        let chi = choi_state(&depolarizing());
        let expected = CMat::identity(4, 4) * cr(0.25);
        assert_abs_diff_eq!((chi.mat() - expected).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(choi_purity(&depolarizing()), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn choi_state_passes_validation() {
        let mut rng = sample::Prng::seed_from_u64(21);
        for _ in 0..5 {
            let k = sample::sample_random_channel(3, 4, &mut rng).unwrap();
            let chi = choi_state(&k);
            ChoiState::new(chi.d(), chi.mat().clone()).expect("valid Choi state");
        }
    }

    #[test]
    fn sampled_rank_matches_spectrum() {
        let mut rng = sample::Prng::seed_from_u64(2);
        let k = sample::sample_random_channel(4, 3, &mut rng).unwrap();
        let spec = choi_spectrum(&k);
        assert_eq!(spec.rank(1e-10), 3);
        let sum: f64 = spec.eigenvalues.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-8);
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let cum = spec.cumulative();
        assert_abs_diff_eq!(cum[cum.len() - 1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn gram_purity_matches_dense() {
        let mut rng = sample::Prng::seed_from_u64(3);
        for _ in 0..10 {
            let k = sample::sample_random_channel(4, 16, &mut rng).unwrap();
            let dense = choi_state(&k).purity();
            assert_abs_diff_eq!(choi_purity(&k), dense, epsilon = 1e-10);
        }
    }

    #[test]
    fn representation_invariance_under_block_mixing() {
        let mut rng = sample::Prng::seed_from_u64(4);
        let k = sample::sample_random_channel(2, 3, &mut rng).unwrap();
        let mixed = sample::mix_blocks(&k, &mut rng);
        let a = choi_state(&k);
        let b = choi_state(&mixed);
        assert_abs_diff_eq!((a.mat() - b.mat()).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_extremes() {
        let id = KrausStack::identity(2);
        let chi_id = choi_state(&id);
        assert_abs_diff_eq!(choi_fidelity(&chi_id, &chi_id).unwrap(), 1.0, epsilon = 1e-10);

        // σ_x unitary channel: orthogonal pure Choi state
        let sx = CMat::from_row_slice(2, 2, &[C_ZERO, cr(1.0), cr(1.0), C_ZERO]);
        let flip = KrausStack::from_blocks(&[sx]).unwrap();
        let chi_flip = choi_state(&flip);
        assert_abs_diff_eq!(choi_fidelity(&chi_id, &chi_flip).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_matches_trace_norm_oracle() {
        // F(a, b) = ‖√χ_a √χ_b‖_tr: sum of singular values
        let mut rng = sample::Prng::seed_from_u64(6);
        for _ in 0..5 {
            let ka = sample::sample_random_channel(2, 2, &mut rng).unwrap();
            let kb = sample::sample_random_channel(2, 3, &mut rng).unwrap();
            let (ca, cb) = (choi_state(&ka), choi_state(&kb));
            let f = choi_fidelity(&ca, &cb).unwrap();
            let prod = linalg::sqrtm_psd(ca.mat()) * linalg::sqrtm_psd(cb.mat());
            let oracle: f64 = prod.svd(false, false).singular_values.iter().sum();
            // zero Choi eigenvalues turn into √roundoff noise in either formula
            assert_abs_diff_eq!(f, oracle, epsilon = 1e-8);
            // symmetry
            let f_swapped = choi_fidelity(&cb, &ca).unwrap();
            assert_abs_diff_eq!(f, f_swapped, epsilon = 1e-8);
        }
    }
}
