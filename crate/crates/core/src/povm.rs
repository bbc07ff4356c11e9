//! Measurement operators (POVMs) and the Pauli input/measurement structures
//! used by process tomography on `n` qubits.
//!
//! The single-qubit Pauli eigenstates are listed in the fixed order
//! x+, x−, y+, y−, z+, z−. Multi-qubit states are tensor products of these
//! with the *last* qubit varying fastest, giving `6ⁿ` input states. The
//! informationally complete measurement assigns each of the same `6ⁿ`
//! projectors the weight `1/3ⁿ` so the effects sum to the identity.

use crate::channel::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, CScalar};

/// A validated positive operator-valued measure: Hermitian PSD effects that
/// sum to the identity within `1e-10`.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    effects: Vec<CMat>,
}

impl Povm {
    pub fn new(effects: Vec<CMat>) -> Result<Self> {
        let dim = match effects.first() {
            Some(m) => m.nrows(),
            None => return Err(Error::InvalidArgument("POVM needs at least one effect".into())),
        };
        let mut sum = CMat::zeros(dim, dim);
        for (i, e) in effects.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "effect {i} is {}x{}, expected {dim}x{dim}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            let herm = linalg::hermiticity_residual(e);
            if herm > 1e-10 {
                return Err(Error::Validation(format!(
                    "effect {i} is not Hermitian (residual {herm:.3e})"
                )));
            }
            if let Some(min) = linalg::eigh_values(e).last() {
                if *min < -1e-10 {
                    return Err(Error::Validation(format!(
                        "effect {i} has negative eigenvalue {min:.3e}"
                    )));
                }
            }
            sum += e;
        }
        let drift = (sum - CMat::identity(dim, dim)).norm();
        if drift > 1e-10 {
            return Err(Error::Validation(format!(
                "POVM effects sum differs from identity by {drift:.3e}"
            )));
        }
        Ok(Povm { dim, effects })
    }

    pub(crate) fn from_valid(effects: Vec<CMat>) -> Self {
        let dim = effects[0].nrows();
        Povm { dim, effects }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effect(&self, beta: usize) -> &CMat {
        &self.effects[beta]
    }

    pub fn effects(&self) -> &[CMat] {
        &self.effects
    }
}

/// Projectors `|0⟩⟨0|, …, |d−1⟩⟨d−1|` onto the computational basis.
pub fn computational_basis_povm(d: usize) -> Povm {
    let effects = (0..d)
        .map(|j| {
            let mut e = CMat::zeros(d, d);
            e[(j, j)] = cr(1.0);
            e
        })
        .collect();
    Povm::from_valid(effects)
}

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The six single-qubit Pauli eigenstates in the order x+, x−, y+, y−, z+, z−.
fn pauli_eigenvectors() -> [CVec; 6] {
    let i = CScalar::new(0.0, 1.0);
    let s = cr(INV_SQRT2);
    [
        CVec::from_column_slice(&[s, s]),
        CVec::from_column_slice(&[s, -s]),
        CVec::from_column_slice(&[s, s * i]),
        CVec::from_column_slice(&[s, -s * i]),
        CVec::from_column_slice(&[cr(1.0), linalg::C_ZERO]),
        CVec::from_column_slice(&[linalg::C_ZERO, cr(1.0)]),
    ]
}

/// Decomposes a flat index `alpha ∈ [0, 6ⁿ)` into per-qubit choices with the
/// last qubit varying fastest.
fn digits_base6(mut alpha: usize, n: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    for slot in (0..n).rev() {
        digits[slot] = alpha % 6;
        alpha /= 6;
    }
    digits
}

fn product_state(digits: &[usize]) -> CVec {
    let single = pauli_eigenvectors();
    let mut state = CVec::from_element(1, cr(1.0));
    for &choice in digits {
        state = state.kronecker(&single[choice]);
    }
    state
}

/// The `6ⁿ` tensor products of Pauli eigenstates as density matrices, used as
/// tomography input states.
pub fn pauli_input_states(n: usize) -> Vec<DensityMatrix> {
    let count = 6usize.pow(n as u32);
    (0..count)
        .map(|alpha| {
            let psi = product_state(&digits_base6(alpha, n));
            DensityMatrix::pure(&psi)
        })
        .collect()
}

/// The informationally complete Pauli POVM on `n` qubits: the `6ⁿ` projectors
/// onto Pauli-eigenstate products, each scaled by `1/3ⁿ`.
pub fn pauli_povm(n: usize) -> Povm {
    let scale = cr(1.0 / 3f64.powi(n as i32));
    let effects = pauli_input_states(n)
        .into_iter()
        .map(|rho| rho.mat() * scale)
        .collect();
    Povm::from_valid(effects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn computational_basis_is_valid_povm() {
        for d in [2, 3, 4] {
            let p = computational_basis_povm(d);
            assert_eq!(p.len(), d);
            Povm::new(p.effects().to_vec()).expect("valid POVM");
        }
    }

    #[test]
    fn pauli_povm_is_valid_and_sums_to_identity() {
        for n in [1usize, 2] {
            let p = pauli_povm(n);
            assert_eq!(p.len(), 6usize.pow(n as u32));
            assert_eq!(p.dim(), 1 << n);
            Povm::new(p.effects().to_vec()).expect("valid POVM");
        }
    }

    #[test]
    fn single_qubit_state_ordering() {
        let states = pauli_input_states(1);
        // z+ is |0⟩⟨0| at position 4, z− is |1⟩⟨1| at position 5
        assert_abs_diff_eq!(states[4].mat()[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(states[5].mat()[(1, 1)].re, 1.0, epsilon = 1e-14);
        // x+ has all entries 1/2
        assert_abs_diff_eq!(states[0].mat()[(0, 1)].re, 0.5, epsilon = 1e-14);
        // y+ has ⟨0|ρ|1⟩ = -i/2
        assert_abs_diff_eq!(states[2].mat()[(0, 1)].im, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn last_qubit_varies_fastest() {
        let one = pauli_input_states(1);
        let two = pauli_input_states(2);
        // alpha = 6·a + b  ⇒  ρ_alpha = ρ_a ⊗ ρ_b
        for a in [0usize, 3, 5] {
            for b in [1usize, 2, 4] {
                let expected = one[a].mat().kronecker(one[b].mat());
                let got = two[6 * a + b].mat();
                assert_abs_diff_eq!((got - expected).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pauli_states_span_full_operator_space() {
        // Gram matrix of the 6ⁿ projectors must have rank 4ⁿ = dim of
        // Hermitian operator space, i.e. the set is informationally complete.
        for n in [1usize, 2] {
            let states = pauli_input_states(n);
            let count = states.len();
            let mut gram = CMat::zeros(count, count);
            for a in 0..count {
                for b in 0..count {
                    gram[(a, b)] = linalg::trace_product(states[a].mat(), states[b].mat());
                }
            }
            let rank = linalg::eigh_values(&gram)
                .into_iter()
                .filter(|v| v.abs() > 1e-8)
                .count();
            assert_eq!(rank, 4usize.pow(n as u32));
        }
    }
}
