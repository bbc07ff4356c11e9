//! Kraus stacks and density matrices.
//!
//! A channel on a `d`-dimensional system is represented by `m` Kraus
//! operators `κ_1..κ_m` stacked row-wise into an `(m·d)×d` matrix `K`
//! with `K†K = I_d`, i.e. a point on the complex Stiefel manifold
//! `St(m·d, d)`. Block `k` occupies rows `k·d..(k+1)·d` (zero-based
//! block index); every module shares this layout.

use nalgebra::MatrixView;
use nalgebra::{Dyn, U1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, C_ZERO};
use crate::povm::Povm;

/// Stiefel residual tolerance enforced by checked constructors.
pub const STIEFEL_TOL: f64 = 1e-8;
/// Looser residual gate applied to channels loaded from JSON.
pub const STIEFEL_LOAD_TOL: f64 = 1e-6;
/// Hermiticity / trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;

pub type Block<'a> = MatrixView<'a, linalg::CScalar, Dyn, Dyn, U1, Dyn>;

/// A stack of `m` Kraus operators of a `d`-dimensional channel; a point on
/// `St(m·d, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausStack {
    d: usize,
    m: usize,
    data: CMat,
}

impl KrausStack {
    /// Builds a stack from an `(m·d)×d` matrix, enforcing the trace
    /// preservation condition `‖K†K − I‖_F ≤ 1e-8`.
    pub fn new(d: usize, m: usize, data: CMat) -> Result<Self> {
        Self::with_tolerance(d, m, data, STIEFEL_TOL)
    }

    pub fn with_tolerance(d: usize, m: usize, data: CMat, tol: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!("d must be >= 2, got {d}")));
        }
        if m < 1 {
            return Err(Error::InvalidArgument(format!("m must be >= 1, got {m}")));
        }
        if data.nrows() != m * d || data.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Kraus stack for d={d}, m={m} must be {}x{d}, got {}x{}",
                m * d,
                data.nrows(),
                data.ncols()
            )));
        }
        if !linalg::is_finite(&data) {
            return Err(Error::Validation("Kraus stack has non-finite entries".into()));
        }
        let stack = Self::from_raw(d, m, data);
        let residual = stack.stiefel_residual();
        if residual > tol {
            return Err(Error::Validation(format!(
                "Stiefel residual {residual:.3e} exceeds tolerance {tol:.1e}"
            )));
        }
        Ok(stack)
    }

    /// Internal constructor for matrices already known to sit on the
    /// manifold (optimizer steps, samplers).
    pub(crate) fn from_raw(d: usize, m: usize, data: CMat) -> Self {
        debug_assert_eq!(data.nrows(), m * d);
        debug_assert_eq!(data.ncols(), d);
        KrausStack { d, m, data }
    }

    pub fn from_blocks(blocks: &[CMat]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("at least one Kraus block required".into()));
        }
        let d = blocks[0].nrows();
        for b in blocks {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch(
                    "all Kraus blocks must be square of equal dimension".into(),
                ));
            }
        }
        let m = blocks.len();
        let mut data = CMat::zeros(m * d, d);
        for (k, b) in blocks.iter().enumerate() {
            data.rows_mut(k * d, d).copy_from(b);
        }
        Self::new(d, m, data)
    }

    /// The identity channel.
    pub fn identity(d: usize) -> Self {
        KrausStack::from_raw(d, 1, CMat::identity(d, d))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The underlying `(m·d)×d` Stiefel matrix.
    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    /// Kraus operator `k` as a view of rows `k·d..(k+1)·d`.
    pub fn block(&self, k: usize) -> Block<'_> {
        self.data.rows(k * self.d, self.d)
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block<'_>> {
        (0..self.m).map(|k| self.block(k))
    }

    /// `‖K†K − I_d‖_F`
    pub fn stiefel_residual(&self) -> f64 {
        let gram = self.data.adjoint() * &self.data;
        (gram - CMat::identity(self.d, self.d)).norm()
    }

    pub fn to_json(&self) -> ChannelJson {
        let rows = self.m * self.d;
        let mut re = vec![vec![0.0; self.d]; rows];
        let mut im = vec![vec![0.0; self.d]; rows];
        for i in 0..rows {
            for j in 0..self.d {
                re[i][j] = self.data[(i, j)].re;
                im[i][j] = self.data[(i, j)].im;
            }
        }
        ChannelJson {
            d: self.d,
            m: self.m,
            re,
            im,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json())?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let parsed: ChannelJson = serde_json::from_str(s)?;
        parsed.into_stack()
    }
}

/// Wire format for channel serialization: row-major real/imaginary parts of
/// the `(m·d)×d` stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    pub d: usize,
    pub m: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ChannelJson {
    /// Validates shape and a Stiefel residual of at most `1e-6`.
    pub fn into_stack(self) -> Result<KrausStack> {
        let rows = self.m * self.d;
        let shape_ok = self.re.len() == rows
            && self.im.len() == rows
            && self.re.iter().all(|r| r.len() == self.d)
            && self.im.iter().all(|r| r.len() == self.d);
        if !shape_ok {
            return Err(Error::Validation(format!(
                "channel JSON: expected {}x{} re/im grids",
                rows, self.d
            )));
        }
        let data = CMat::from_fn(rows, self.d, |i, j| {
            linalg::CScalar::new(self.re[i][j], self.im[i][j])
        });
        KrausStack::with_tolerance(self.d, self.m, data, STIEFEL_LOAD_TOL)
    }
}

/// A `d×d` Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Checked constructor: Hermitian within `1e-10`, eigenvalues `≥ −1e-10`,
    /// unit trace within `1e-10`.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !linalg::is_finite(&mat) {
            return Err(Error::Validation("density matrix has non-finite entries".into()));
        }
        let herm = linalg::hermiticity_residual(&mat);
        if herm > DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian: residual {herm:.3e}"
            )));
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > DENSITY_TOL || trace.im.abs() > DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix trace {trace} differs from 1"
            )));
        }
        let min_eig = linalg::eigh_values(&mat)
            .into_iter()
            .last()
            .unwrap_or(0.0);
        if min_eig < -DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityMatrix { mat })
    }

    /// Constructor for matrices valid by construction (channel outputs,
    /// projector algebra). Invariants are checked only by tests.
    pub fn from_valid(mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        DensityMatrix { mat }
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(state: &CVec) -> Self {
        let d = state.len();
        let mat = CMat::from_fn(d, d, |i, j| state[i] * state[j].conj());
        DensityMatrix { mat }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            mat: CMat::identity(d, d) * cr(1.0 / d as f64),
        }
    }

    /// Computational basis state `|j⟩⟨j|`.
    pub fn basis_state(d: usize, j: usize) -> Self {
        let mut mat = CMat::zeros(d, d);
        mat[(j, j)] = linalg::C_ONE;
        DensityMatrix { mat }
    }

    pub fn d(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.mat, &self.mat).re
    }
}

/// Channel action `T[ρ] = Σ_k κ_k ρ κ_k†`.
pub fn apply_channel(k: &KrausStack, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if k.d() != rho.d() {
        return Err(Error::DimensionMismatch(format!(
            "channel dimension {} vs state dimension {}",
            k.d(),
            rho.d()
        )));
    }
    let d = k.d();
    let mut out = CMat::zeros(d, d);
    let mut tmp = CMat::zeros(d, d);
    for block in k.blocks() {
        block.mul_to(rho.mat(), &mut tmp);
        // out += tmp · κ†
        for i in 0..d {
            for j in 0..d {
                let mut acc = C_ZERO;
                for l in 0..d {
                    acc += tmp[(i, l)] * block[(j, l)].conj();
                }
                out[(i, j)] += acc;
            }
        }
    }
    // symmetrize away roundoff drift
    let herm = (&out + out.adjoint()) * cr(0.5);
    Ok(DensityMatrix::from_valid(herm))
}

/// Measurement statistics `p(β|α=fixed) = tr[M_β T[ρ]]`, clamped to `[0,1]`.
pub fn outcome_probabilities(k: &KrausStack, rho: &DensityMatrix, povm: &Povm) -> Result<Vec<f64>> {
    if povm.dim() != k.d() {
        return Err(Error::DimensionMismatch(format!(
            "POVM dimension {} vs channel dimension {}",
            povm.dim(),
            k.d()
        )));
    }
    let evolved = apply_channel(k, rho)?;
    Ok(povm
        .effects()
        .iter()
        .map(|m| linalg::trace_product(m, evolved.mat()).re.clamp(0.0, 1.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm;
    use crate::sample;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    pub(crate) fn pauli_kraus_depolarizing() -> KrausStack {
        // {σ_x/2, σ_y/2, σ_z/2, I/2}: the completely depolarizing qubit channel
        let i = linalg::CScalar::new(0.0, 1.0);
        let half = cr(0.5);
        let sx = CMat::from_row_slice(2, 2, &[C_ZERO, cr(1.0), cr(1.0), C_ZERO]) * half;
        let sy = CMat::from_row_slice(2, 2, &[C_ZERO, -i, i, C_ZERO]) * half;
        let sz = CMat::from_row_slice(2, 2, &[cr(1.0), C_ZERO, C_ZERO, cr(-1.0)]) * half;
        let id = CMat::identity(2, 2) * half;
        KrausStack::from_blocks(&[sx, sy, sz, id]).unwrap()
    }

    #[test]
    fn identity_channel_is_identity_map() {
        let k = KrausStack::identity(2);
        let rho = DensityMatrix::new(CMat::from_row_slice(
            2,
            2,
            &[cr(0.7), linalg::CScalar::new(0.1, 0.2), linalg::CScalar::new(0.1, -0.2), cr(0.3)],
        ))
        .unwrap();
        let out = apply_channel(&k, &rho).unwrap();
        assert_abs_diff_eq!((out.mat() - rho.mat()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn depolarizing_maps_to_maximally_mixed() {
        let k = pauli_kraus_depolarizing();
        assert!(k.stiefel_residual() < 1e-14);
        let rho = DensityMatrix::basis_state(2, 0);
        let out = apply_channel(&k, &rho).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!((out.mat() - mixed.mat()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn channel_action_matches_choi_action() {
        // T[ρ] = d · tr₂[χ (I ⊗ ρᵀ)]
        let mut rng = sample::Prng::seed_from_u64(11);
        let k = sample::sample_random_channel(4, 3, &mut rng).unwrap();
        let rho = sample::random_density(4, &mut rng);
        let direct = apply_channel(&k, &rho).unwrap();

        let chi = crate::choi::choi_state(&k);
        let eye = CMat::identity(4, 4);
        let prod = chi.mat() * eye.kronecker(&rho.mat().transpose());
        let via_choi = linalg::partial_trace_second(&prod, 4).unwrap() * cr(4.0);
        assert_abs_diff_eq!((direct.mat() - via_choi).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn outcome_probabilities_basic() {
        let k = KrausStack::identity(2);
        let rho = DensityMatrix::basis_state(2, 0);
        let computational = povm::computational_basis_povm(2);
        let p = outcome_probabilities(&k, &rho, &computational).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-14);

        let depol = pauli_kraus_depolarizing();
        let p = outcome_probabilities(&depol, &rho, &computational).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn outcome_probabilities_match_bruteforce() {
        let mut rng = sample::Prng::seed_from_u64(5);
        let k = sample::sample_random_channel(4, 5, &mut rng).unwrap();
        let rho = sample::random_density(4, &mut rng);
        let set = povm::pauli_povm(2);
        // brute force: evolve with an explicit block loop, then trace per element
        let mut evolved = CMat::zeros(4, 4);
        for b in k.blocks() {
            evolved += b * rho.mat() * b.adjoint();
        }
        let expected: Vec<f64> = set
            .effects()
            .iter()
            .map(|m| (m * &evolved).trace().re)
            .collect();
        let got = outcome_probabilities(&k, &rho, &set).unwrap();
        let sum: f64 = got.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-8);
        for (g, e) in got.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn json_roundtrip_preserves_stack() {
        let mut rng = sample::Prng::seed_from_u64(9);
        let k = sample::sample_random_channel(2, 3, &mut rng).unwrap();
        let s = k.to_json_string().unwrap();
        let back = KrausStack::from_json_str(&s).unwrap();
        assert_eq!(back.d(), 2);
        assert_eq!(back.m(), 3);
        assert_abs_diff_eq!((back.matrix() - k.matrix()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn json_rejects_off_manifold() {
        let mut j = KrausStack::identity(2).to_json();
        j.re[0][0] = 2.0;
        assert!(matches!(j.into_stack(), Err(Error::Validation(_))));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(KrausStack::new(2, 1, CMat::zeros(3, 2)).is_err());
        assert!(KrausStack::new(1, 1, CMat::identity(1, 1)).is_err());
        assert!(KrausStack::new(2, 1, CMat::identity(2, 2) * cr(2.0)).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(CMat::identity(2, 2)).is_err()); // trace 2
        let ok = DensityMatrix::new(CMat::identity(2, 2) * cr(0.5)).unwrap();
        assert_eq!(ok.d(), 2);
        let bad = CMat::from_row_slice(2, 2, &[cr(0.5), cr(0.3), cr(0.1), cr(0.5)]);
        assert!(DensityMatrix::new(bad).is_err()); // not Hermitian
    }
}
