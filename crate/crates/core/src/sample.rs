//! Seeded random sampling: complex Gaussians, Haar unitaries, random
//! channels, and the derived-seed scheme that keeps parallel experiment
//! batches reproducible.
//!
//! All randomness flows through [`Prng`], a ChaCha8 stream cipher generator:
//! fast, seedable, and identical across platforms. Experiment drivers never
//! share one generator between runs; each run gets its own stream via
//! [`derive_seed`] so scheduling order cannot change results.

use crate::channel::{DensityMatrix, KrausStack};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CScalar};
use rand::Rng;
use rand_distr::StandardNormal;

/// The pseudo-random generator used throughout: ChaCha with 8 rounds.
pub type Prng = rand_chacha::ChaCha8Rng;

/// Derives the seed for run `index` from a master seed via two rounds of
/// SplitMix64 mixing. Depends only on `(master, index)`, never on worker
/// count or completion order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(master).wrapping_add(index))
}

/// A matrix of iid standard complex Gaussians: each entry `(n₁ + i·n₂)/√2`
/// with `n₁, n₂` independent standard normals, so `E|z|² = 1`.
pub fn complex_gaussian(rows: usize, cols: usize, rng: &mut Prng) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        CScalar::new(re * scale, im * scale)
    })
}

/// A Haar-distributed `d×d` unitary: QR of a complex Gaussian matrix with
/// the R-diagonal phase fix.
pub fn haar_unitary(d: usize, rng: &mut Prng) -> CMat {
    linalg::qr_phase_fixed(&complex_gaussian(d, d, rng))
}

/// A Haar-style random rank-`r` channel: the phase-fixed Q factor of an
/// `(r·d)×d` complex Gaussian, read as `r` stacked Kraus blocks. Requires
/// `1 ≤ r ≤ d²`; the Choi rank equals `r` with probability 1.
pub fn sample_random_channel(d: usize, r: usize, rng: &mut Prng) -> Result<KrausStack> {
    if r < 1 || r > d * d {
        return Err(Error::InvalidArgument(format!(
            "channel rank {r} outside [1, {}] for dimension {d}",
            d * d
        )));
    }
    let q = linalg::qr_phase_fixed(&complex_gaussian(r * d, d, rng));
    KrausStack::new(d, r, q)
}

/// A random *unitary* channel represented with `m` Kraus blocks:
/// `𝕂₀ = [√x₁·u, …, √x_m·u]ᵀ / √(Σᵢ xᵢ)` with one Haar unitary `u` and
/// weights `xᵢ` uniform on (0,1). The channel action is `ρ ↦ uρu†` and the
/// Choi state stays pure, but the point lives in St(m·d, d) so optimization
/// can spread weight across blocks.
pub fn sample_unitary_init(d: usize, m: usize, rng: &mut Prng) -> Result<KrausStack> {
    if m < 1 {
        return Err(Error::InvalidArgument("block count m must be ≥ 1".into()));
    }
    let u = haar_unitary(d, rng);
    let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let norm = x.iter().sum::<f64>().sqrt();
    let mut data = CMat::zeros(m * d, d);
    for (k, &xk) in x.iter().enumerate() {
        let w = cr(xk.sqrt() / norm);
        data.view_mut((k * d, 0), (d, d)).copy_from(&(&u * w));
    }
    KrausStack::new(d, m, data)
}

/// A random full-rank density matrix: `GG†/tr(GG†)` for a complex Gaussian
/// `G`. Test-support sampling; distribution details are irrelevant to callers.
pub fn random_density(d: usize, rng: &mut Prng) -> DensityMatrix {
    let g = complex_gaussian(d, d, rng);
    let mut m = &g * g.adjoint();
    let tr: f64 = (0..d).map(|j| m[(j, j)].re).sum();
    m /= cr(tr);
    // symmetrize away the last few ulps so strict validation passes
    let herm = (&m + m.adjoint()) * cr(0.5);
    DensityMatrix::from_valid(herm)
}

/// Re-mixes the Kraus blocks by a Haar-random unitary on the block index:
/// `κ'_j = Σ_k U_{jk} κ_k`. Produces a different stack representing the
/// *same* channel — the gauge freedom of the Kraus representation.
pub fn mix_blocks(k: &KrausStack, rng: &mut Prng) -> KrausStack {
    let (d, m) = (k.d(), k.m());
    let u = haar_unitary(m, rng);
    let mut data = CMat::zeros(m * d, d);
    for j in 0..m {
        let mut acc = CMat::zeros(d, d);
        for l in 0..m {
            acc += k.block(l) * u[(j, l)];
        }
        data.view_mut((j * d, 0), (d, d)).copy_from(&acc);
    }
    KrausStack::from_raw(d, m, data)
}
