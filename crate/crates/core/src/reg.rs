//! Rank-reducing regularizers `𝓡(𝕂)` and their composition with a base cost
//! as `𝓛 = 𝓛_base + γ·𝓡`.
//!
//! All three terms penalize spread-out Kraus weight and push the optimizer
//! toward channels of lower Choi rank, by different mechanisms:
//! - `hs`: mean Hilbert–Schmidt norm `(1/m)Σ_k √(tr κ_k†κ_k)` — smallest
//!   when the total weight `tr 𝕂†𝕂 = d` concentrates in few blocks;
//! - `choi`: negative log-purity `−ln tr χ²` of the Choi state — zero
//!   exactly for unitary channels;
//! - `l1`: the induced 1-norm `max_j Σ_i |𝕂_{ij}|` of the stack, a Lasso-style
//!   sparsity penalty (non-smooth; optimized by subgradient).
//!
//! Gradients use the same conjugate Wirtinger convention as the optimizer.

use crate::channel::KrausStack;
use crate::choi;
use crate::error::{Error, Result};
use crate::linalg::{cr, CMat, C_ZERO};
use crate::opt::CostFunction;
use std::fmt;
use std::str::FromStr;

/// Squared-norm threshold below which a Kraus block counts as zero for the
/// `hs` gradient (the penalty is already minimal there).
const HS_ZERO_BLOCK: f64 = 1e-24;

/// Entry modulus below which the `l1` subgradient contribution is zero.
const L1_ZERO_ENTRY: f64 = 1e-12;

/// `𝓡_HS = (1/m) Σ_k √(tr κ_k†κ_k)`, value in `[√d/m, √(d/m)]`, and its
/// gradient `(1/(2m))·κ_k/√(tr κ_k†κ_k)` per block (0 for zero blocks).
pub fn r_hs(k: &KrausStack) -> (f64, CMat) {
    let (d, m) = (k.d(), k.m());
    let mut value = 0.0;
    let mut grad = CMat::zeros(m * d, d);
    for block in 0..m {
        let b = k.block(block);
        let t: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        if t <= HS_ZERO_BLOCK {
            continue;
        }
        let root = t.sqrt();
        value += root;
        let w = cr(1.0 / (2.0 * m as f64 * root));
        grad.view_mut((block * d, 0), (d, d)).copy_from(&(b * w));
    }
    (value / m as f64, grad)
}

/// `𝓡_C = −ln tr χ²`, value in `[0, 2 ln d]`, computed through the Gram
/// identity without building the Choi matrix. Gradient block `k` is
/// `−(2/(d²·trχ²))·Σ_l tr(κ_l†κ_k)·κ_l`.
pub fn r_choi(k: &KrausStack) -> (f64, CMat) {
    let (d, m) = (k.d(), k.m());
    let purity = choi::choi_purity(k);
    let value = -purity.ln();

    // Gram matrix c_{lk} = tr(κ_l†κ_k)
    let mut gram = CMat::zeros(m, m);
    for l in 0..m {
        let bl = k.block(l);
        for kk in 0..m {
            let bk = k.block(kk);
            let mut t = C_ZERO;
            for i in 0..d {
                for j in 0..d {
                    t += bl[(i, j)].conj() * bk[(i, j)];
                }
            }
            gram[(l, kk)] = t;
        }
    }
    let scale = cr(-2.0 / (purity * (d * d) as f64));
    let mut grad = CMat::zeros(m * d, d);
    for kk in 0..m {
        let mut acc = CMat::zeros(d, d);
        for l in 0..m {
            acc += k.block(l) * gram[(l, kk)];
        }
        grad.view_mut((kk * d, 0), (d, d)).copy_from(&(acc * scale));
    }
    (value, grad)
}

/// `𝓡_L = max_j Σ_i |𝕂_{ij}|` over the full `(m·d)×d` stack, with the
/// standard subgradient supported on the lowest-index maximizing column:
/// entry `(i, j*)` is `𝕂_{i,j*}/(2|𝕂_{i,j*}|)`, zero for near-zero entries.
pub fn r_l1(k: &KrausStack) -> (f64, CMat) {
    let km = k.matrix();
    let (rows, cols) = (km.nrows(), km.ncols());
    let mut best = (0usize, f64::NEG_INFINITY);
    for j in 0..cols {
        let sum: f64 = (0..rows).map(|i| km[(i, j)].norm()).sum();
        if sum > best.1 {
            best = (j, sum);
        }
    }
    let (jstar, value) = best;
    let mut grad = CMat::zeros(rows, cols);
    for i in 0..rows {
        let z = km[(i, jstar)];
        let modulus = z.norm();
        if modulus > L1_ZERO_ENTRY {
            grad[(i, jstar)] = z / cr(2.0 * modulus);
        }
    }
    (value, grad)
}

/// Which penalty term to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    None,
    Hs,
    Choi,
    L1,
}

impl RegKind {
    pub const ALL: [RegKind; 4] = [RegKind::None, RegKind::Hs, RegKind::Choi, RegKind::L1];

    pub fn as_str(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::Hs => "hs",
            RegKind::Choi => "choi",
            RegKind::L1 => "l1",
        }
    }
}

impl fmt::Display for RegKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(RegKind::None),
            "hs" => Ok(RegKind::Hs),
            "choi" => Ok(RegKind::Choi),
            "l1" => Ok(RegKind::L1),
            other => Err(Error::InvalidArgument(format!(
                "unknown regularizer '{other}' (expected none|hs|choi|l1)"
            ))),
        }
    }
}

/// A penalty kind with its strength γ ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Regularizer {
    pub kind: RegKind,
    pub gamma: f64,
}

impl Regularizer {
    pub fn new(kind: RegKind, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization strength gamma must be ≥ 0, got {gamma}"
            )));
        }
        Ok(Regularizer { kind, gamma })
    }

    pub fn none() -> Self {
        Regularizer { kind: RegKind::None, gamma: 0.0 }
    }

    /// True when the term contributes nothing (γ=0 or kind `none`).
    pub fn is_inactive(&self) -> bool {
        self.gamma == 0.0 || self.kind == RegKind::None
    }

    /// Raw `(𝓡, ∂𝓡)` of the selected term, without the γ factor.
    pub fn term(&self, k: &KrausStack) -> (f64, CMat) {
        match self.kind {
            RegKind::None => (0.0, CMat::zeros(k.m() * k.d(), k.d())),
            RegKind::Hs => r_hs(k),
            RegKind::Choi => r_choi(k),
            RegKind::L1 => r_l1(k),
        }
    }
}

/// `base + γ·𝓡` as a single [`CostFunction`]. With an inactive regularizer
/// the base passes through untouched — bit-identical values and gradients.
pub struct Regularized<C> {
    base: C,
    reg: Regularizer,
}

pub fn combine<C: CostFunction>(base: C, reg: Regularizer) -> Regularized<C> {
    Regularized { base, reg }
}

impl<C> Regularized<C> {
    pub fn regularizer(&self) -> Regularizer {
        self.reg
    }

    pub fn base(&self) -> &C {
        &self.base
    }
}

impl<C: CostFunction> CostFunction for Regularized<C> {
    fn value(&self, k: &KrausStack) -> Result<f64> {
        let base = self.base.value(k)?;
        if self.reg.is_inactive() {
            return Ok(base);
        }
        Ok(base + self.reg.gamma * self.reg.term(k).0)
    }

    fn euclidean_grad(&self, k: &KrausStack) -> Result<CMat> {
        let base = self.base.euclidean_grad(k)?;
        if self.reg.is_inactive() {
            return Ok(base);
        }
        Ok(base + self.reg.term(k).1 * cr(self.reg.gamma))
    }

    fn value_and_grad(&self, k: &KrausStack) -> Result<(f64, CMat)> {
        let (v, g) = self.base.value_and_grad(k)?;
        if self.reg.is_inactive() {
            return Ok((v, g));
        }
        let (rv, rg) = self.reg.term(k);
        Ok((v + self.reg.gamma * rv, g + rg * cr(self.reg.gamma)))
    }
}

/// The constant-zero cost: optimizing `combine(ZeroCost, reg)` descends the
/// bare regularizer.
pub struct ZeroCost;

impl CostFunction for ZeroCost {
    fn value(&self, _: &KrausStack) -> Result<f64> {
        Ok(0.0)
    }

    fn euclidean_grad(&self, k: &KrausStack) -> Result<CMat> {
        Ok(CMat::zeros(k.m() * k.d(), k.d()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, CScalar};
    use crate::opt::{grad_check, optimize, OptimizerConfig};
    use crate::sample::{self, Prng};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn hs_value_on_unitary() {
        let (v, _) = r_hs(&KrausStack::identity(2));
        assert_abs_diff_eq!(v, 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn hs_value_on_equal_weight_blocks() {
        // four blocks u/2: value (1/4)·4·√(2/4) = √2/2
        let mut rng = Prng::seed_from_u64(41);
        let u = sample::haar_unitary(2, &mut rng) * cr(0.5);
        let k = KrausStack::from_blocks(&[u.clone(), u.clone(), u.clone(), u]).unwrap();
        let (v, _) = r_hs(&k);
        assert_abs_diff_eq!(v, 2f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hs_value_within_bounds() {
        let mut rng = Prng::seed_from_u64(42);
        for (d, m) in [(2usize, 4usize), (4, 16), (3, 2)] {
            let k = sample::sample_random_channel(d, m, &mut rng).unwrap();
            let (v, _) = r_hs(&k);
            let lo = (d as f64).sqrt() / m as f64;
            let hi = (d as f64 / m as f64).sqrt();
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "value {v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn hs_gradient_zero_on_zero_block() {
        let mut rng = Prng::seed_from_u64(43);
        let u = sample::haar_unitary(2, &mut rng);
        let k = KrausStack::from_blocks(&[u, CMat::zeros(2, 2)]).unwrap();
        let (_, g) = r_hs(&k);
        assert_eq!(g.view((2, 0), (2, 2)).iter().filter(|z| z.norm() > 0.0).count(), 0);
    }

    #[test]
    fn choi_reg_is_zero_for_unitary_channel() {
        let mut rng = Prng::seed_from_u64(44);
        let k = sample::sample_unitary_init(2, 3, &mut rng).unwrap();
        let (v, _) = r_choi(&k);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn choi_reg_on_depolarizing() {
        let i = CScalar::new(0.0, 1.0);
        let half = cr(0.5);
        let sx = CMat::from_row_slice(2, 2, &[C_ZERO, cr(1.0), cr(1.0), C_ZERO]) * half;
        let sy = CMat::from_row_slice(2, 2, &[C_ZERO, -i, i, C_ZERO]) * half;
        let sz = CMat::from_row_slice(2, 2, &[cr(1.0), C_ZERO, C_ZERO, cr(-1.0)]) * half;
        let id = CMat::identity(2, 2) * half;
        let k = KrausStack::from_blocks(&[sx, sy, sz, id]).unwrap();
        let (v, _) = r_choi(&k);
        assert_abs_diff_eq!(v, 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn choi_reg_bounded_by_two_log_d() {
        let mut rng = Prng::seed_from_u64(45);
        for (d, m) in [(2usize, 4usize), (4, 16)] {
            let k = sample::sample_random_channel(d, m, &mut rng).unwrap();
            let (v, _) = r_choi(&k);
            assert!(v >= -1e-12 && v <= 2.0 * (d as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn choi_reg_invariant_under_block_mixing_but_hs_l1_are_not() {
        let mut rng = Prng::seed_from_u64(46);
        let k = sample::sample_random_channel(2, 4, &mut rng).unwrap();
        let mut saw_hs_change = false;
        let mut saw_l1_change = false;
        for _ in 0..5 {
            let mixed = sample::mix_blocks(&k, &mut rng);
            assert_abs_diff_eq!(r_choi(&mixed).0, r_choi(&k).0, epsilon = 1e-10);
            saw_hs_change |= (r_hs(&mixed).0 - r_hs(&k).0).abs() > 1e-6;
            saw_l1_change |= (r_l1(&mixed).0 - r_l1(&k).0).abs() > 1e-6;
        }
        assert!(saw_hs_change, "hs never changed under block mixing");
        assert!(saw_l1_change, "l1 never changed under block mixing");
    }

    #[test]
    fn l1_values_on_known_matrices() {
        assert_abs_diff_eq!(r_l1(&KrausStack::identity(2)).0, 1.0, epsilon = 1e-14);
        let s = cr(std::f64::consts::FRAC_1_SQRT_2);
        let hadamard = CMat::from_row_slice(2, 2, &[s, s, s, -s]);
        let k = KrausStack::from_blocks(&[hadamard]).unwrap();
        assert_abs_diff_eq!(r_l1(&k).0, 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn l1_positive_on_valid_stacks() {
        let mut rng = Prng::seed_from_u64(47);
        for _ in 0..10 {
            let k = sample::sample_random_channel(3, 2, &mut rng).unwrap();
            assert!(r_l1(&k).0 > 0.0);
        }
    }

    #[test]
    fn l1_ties_break_to_lowest_column() {
        // identity: every column sums to 1, so j* = 0
        let (_, g) = r_l1(&KrausStack::identity(3));
        assert!(g[(0, 0)].norm() > 0.0);
        for j in 1..3 {
            for i in 0..3 {
                assert_eq!(g[(i, j)], C_ZERO);
            }
        }
    }

    #[test]
    fn l1_subgradient_matches_directional_derivative() {
        let mut rng = Prng::seed_from_u64(48);
        for _ in 0..5 {
            let k = sample::sample_random_channel(2, 3, &mut rng).unwrap();
            let (_, g) = r_l1(&k);
            // perturb only within the maximizing column so the max is stable
            let jstar = (0..2)
                .max_by(|&a, &b| {
                    let col = |j: usize| (0..6).map(|i| k.matrix()[(i, j)].norm()).sum::<f64>();
                    col(a).partial_cmp(&col(b)).unwrap()
                })
                .unwrap();
            let mut dir = CMat::zeros(6, 2);
            for i in 0..6 {
                dir[(i, jstar)] = sample::complex_gaussian(1, 1, &mut rng)[(0, 0)];
            }
            let h = 1e-6;
            let probe = |data: CMat| r_l1(&KrausStack::from_raw(2, 3, data)).0;
            let fd = (probe(k.matrix() + &dir * cr(h)) - probe(k.matrix() - &dir * cr(h)))
                / (2.0 * h);
            let analytic = 2.0 * linalg::hs_inner_re(&g, &dir);
            assert_abs_diff_eq!(fd, analytic, epsilon = 1e-5);
        }
    }

    #[test]
    fn smooth_gradients_pass_finite_difference_check() {
        let mut rng = Prng::seed_from_u64(49);
        struct HsCost;
        impl CostFunction for HsCost {
            fn value(&self, k: &KrausStack) -> crate::Result<f64> {
                Ok(r_hs(k).0)
            }
            fn euclidean_grad(&self, k: &KrausStack) -> crate::Result<CMat> {
                Ok(r_hs(k).1)
            }
        }
        struct ChoiCost;
        impl CostFunction for ChoiCost {
            fn value(&self, k: &KrausStack) -> crate::Result<f64> {
                Ok(r_choi(k).0)
            }
            fn euclidean_grad(&self, k: &KrausStack) -> crate::Result<CMat> {
                Ok(r_choi(k).1)
            }
        }
        for (d, m) in [(2usize, 1usize), (2, 4), (4, 4)] {
            for _ in 0..3 {
                let k = sample::sample_random_channel(d, m, &mut rng).unwrap();
                let e_hs = grad_check(&HsCost, &k, 1e-5).unwrap();
                assert!(e_hs <= 1e-6, "hs grad error {e_hs:.3e} at d={d} m={m}");
                let e_choi = grad_check(&ChoiCost, &k, 1e-5).unwrap();
                assert!(e_choi <= 1e-6, "choi grad error {e_choi:.3e} at d={d} m={m}");
            }
        }
    }

    #[test]
    fn gamma_zero_passes_base_through_exactly() {
        struct Affine;
        impl CostFunction for Affine {
            fn value(&self, k: &KrausStack) -> crate::Result<f64> {
                Ok(k.matrix()[(0, 0)].re + 0.25)
            }
            fn euclidean_grad(&self, k: &KrausStack) -> crate::Result<CMat> {
                let mut g = CMat::zeros(k.m() * k.d(), k.d());
                g[(0, 0)] = cr(0.5);
                Ok(g)
            }
        }
        let mut rng = Prng::seed_from_u64(50);
        let k = sample::sample_random_channel(2, 2, &mut rng).unwrap();
        let plain = Affine;
        let wrapped = combine(Affine, Regularizer::new(RegKind::Hs, 0.0).unwrap());
        assert_eq!(plain.value(&k).unwrap().to_bits(), wrapped.value(&k).unwrap().to_bits());
        assert_eq!(plain.euclidean_grad(&k).unwrap(), wrapped.euclidean_grad(&k).unwrap());
    }

    #[test]
    fn combined_gradient_passes_check() {
        struct Quad(CMat);
        impl CostFunction for Quad {
            fn value(&self, k: &KrausStack) -> crate::Result<f64> {
                Ok((k.matrix() - &self.0).norm_squared())
            }
            fn euclidean_grad(&self, k: &KrausStack) -> crate::Result<CMat> {
                Ok(k.matrix() - &self.0)
            }
        }
        let mut rng = Prng::seed_from_u64(51);
        let target = sample::complex_gaussian(8, 2, &mut rng);
        let k = sample::sample_random_channel(2, 4, &mut rng).unwrap();
        for kind in [RegKind::Hs, RegKind::Choi] {
            let cost = combine(Quad(target.clone()), Regularizer::new(kind, 1e-2).unwrap());
            let err = grad_check(&cost, &k, 1e-5).unwrap();
            assert!(err <= 1e-6, "{kind} combined grad error {err:.3e}");
        }
    }

    #[test]
    fn pure_hs_descent_concentrates_weight() {
        let mut rng = Prng::seed_from_u64(52);
        let (d, m) = (2usize, 4usize);
        let k0 = sample::sample_random_channel(d, m, &mut rng).unwrap();
        let start = r_hs(&k0).0;
        let cost = combine(ZeroCost, Regularizer::new(RegKind::Hs, 1.0).unwrap());
        let cfg = OptimizerConfig {
            epsilon: 0.01,
            epochs: 2000,
            record_every: 100,
            ..OptimizerConfig::default()
        };
        let (k, trace) = optimize(&k0, &cost, &cfg, &[]).unwrap();
        let end = r_hs(&k).0;
        assert!(end < start, "no decrease: {start} -> {end}");
        // weight concentrates toward the lower bound √d/m
        let lower = (d as f64).sqrt() / m as f64;
        assert!(
            end - lower < 0.6 * (start - lower),
            "insufficient concentration: {start} -> {end} (bound {lower})"
        );
        // recorded costs trend downward (allow small bounces from the fixed step)
        let costs: Vec<f64> = trace.rows().iter().map(|r| r.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-3));
    }

    #[test]
    fn reg_kind_parses_and_displays() {
        for kind in RegKind::ALL {
            assert_eq!(kind.as_str().parse::<RegKind>().unwrap(), kind);
        }
        assert_eq!("HS".parse::<RegKind>().unwrap(), RegKind::Hs);
        assert!("lasso".parse::<RegKind>().is_err());
        assert!(Regularizer::new(RegKind::Hs, -0.1).is_err());
        assert!(Regularizer::new(RegKind::Hs, f64::NAN).is_err());
    }
}
