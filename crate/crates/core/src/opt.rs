//! Riemannian gradient descent on the Stiefel manifold of Kraus stacks.
//!
//! One descent step applies the Cayley retraction
//! `𝕂′ = 𝕂 − ε U (I + (ε/2) V†U)⁻¹ V†𝕂` with `U = [G̃, 𝕂]`, `V = [𝕂, −G̃]`
//! and the normalized Euclidean gradient `G̃ = G/‖G‖_F`. The
//! Sherman–Morrison–Woodbury form shrinks the inverse from `(m·d)²` to
//! `2d×2d`, and because `U V† = G̃𝕂† − 𝕂G̃†` is skew-Hermitian the update is
//! multiplication by a unitary — the iterate never leaves the manifold, for
//! *any* gradient matrix.
//!
//! Gradients follow the conjugate Wirtinger convention
//! `G_{ij} = (∂𝓛/∂𝕂_{ij})*`; [`grad_check`] verifies an implementation
//! against central finite differences.

use crate::channel::KrausStack;
use crate::error::{Error, Result};
use crate::linalg::{cr, CMat, CScalar};
use std::fmt::Write as _;

/// A real-valued cost over Kraus stacks with a Euclidean gradient in the
/// conjugate Wirtinger convention `G_{ij} = (∂𝓛/∂𝕂_{ij})*`.
///
/// `value` may be called on slightly off-manifold stacks (finite-difference
/// probes); implementations must not assume an exact isometry.
pub trait CostFunction {
    fn value(&self, k: &KrausStack) -> Result<f64>;

    fn euclidean_grad(&self, k: &KrausStack) -> Result<CMat>;

    /// Both at once; override when the two share intermediate work.
    fn value_and_grad(&self, k: &KrausStack) -> Result<(f64, CMat)> {
        Ok((self.value(k)?, self.euclidean_grad(k)?))
    }
}

impl<C: CostFunction + ?Sized> CostFunction for &C {
    fn value(&self, k: &KrausStack) -> Result<f64> {
        (**self).value(k)
    }

    fn euclidean_grad(&self, k: &KrausStack) -> Result<CMat> {
        (**self).euclidean_grad(k)
    }

    fn value_and_grad(&self, k: &KrausStack) -> Result<(f64, CMat)> {
        (**self).value_and_grad(k)
    }
}

/// Gradient norms at or below this are treated as converged: the normalized
/// direction G̃ would be meaningless noise, so the step becomes a no-op.
pub const GRAD_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Step size ε of the Cayley update.
    pub epsilon: f64,
    /// Number of descent steps.
    pub epochs: usize,
    /// Skip threshold on ‖G‖_F.
    pub grad_norm_floor: f64,
    /// Record cost/metrics every this many epochs (the final epoch is always
    /// recorded).
    pub record_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            epsilon: 1.0,
            epochs: 1000,
            grad_norm_floor: GRAD_NORM_FLOOR,
            record_every: 100,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One recorded point of a training run: cost and any extra metrics after
/// `epoch` completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub cost: f64,
    pub metrics: Vec<f64>,
}

/// The recorded path of an optimization run; serializes to CSV with the
/// header `epoch,cost,<metric names…>`.
#[derive(Debug, Clone, Default)]
pub struct TrainingTrace {
    metric_names: Vec<String>,
    rows: Vec<TraceRow>,
}

impl TrainingTrace {
    pub fn new<S: Into<String>>(metric_names: impl IntoIterator<Item = S>) -> Self {
        TrainingTrace {
            metric_names: metric_names.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: TraceRow) {
        debug_assert_eq!(row.metrics.len(), self.metric_names.len());
        if let Some(last) = self.rows.last() {
            assert!(row.epoch > last.epoch, "trace epochs must strictly increase");
        }
        self.rows.push(row);
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_cost(&self) -> Option<f64> {
        self.rows.last().map(|r| r.cost)
    }

    /// The recorded values of metric `name`, in epoch order.
    pub fn metric_series(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.metric_names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.metrics[idx]).collect())
    }

    /// CSV rendering with 17 significant digits per float.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,cost");
        for name in &self.metric_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{},{:.16e}", row.epoch, row.cost).unwrap();
            for v in &row.metrics {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// One Cayley/SMW descent step with the default gradient-norm floor.
pub fn cayley_step(k: &KrausStack, g: &CMat, epsilon: f64) -> Result<KrausStack> {
    cayley_step_with_floor(k, g, epsilon, GRAD_NORM_FLOOR)
}

/// One Cayley/SMW descent step. Returns `k` unchanged when `‖g‖_F ≤ floor`.
pub fn cayley_step_with_floor(
    k: &KrausStack,
    g: &CMat,
    epsilon: f64,
    floor: f64,
) -> Result<KrausStack> {
    let (d, m) = (k.d(), k.m());
    if g.nrows() != m * d || g.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "gradient is {}x{}, stack needs {}x{}",
            g.nrows(),
            g.ncols(),
            m * d,
            d
        )));
    }
    let gnorm = g.norm();
    if !gnorm.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    if gnorm <= floor {
        return Ok(k.clone());
    }
    let gt = g / cr(gnorm);
    let km = k.matrix();

    // U = [G̃ | 𝕂], V = [𝕂 | −G̃], both (m·d)×2d
    let mut u = CMat::zeros(m * d, 2 * d);
    u.view_mut((0, 0), (m * d, d)).copy_from(&gt);
    u.view_mut((0, d), (m * d, d)).copy_from(km);
    let mut v = CMat::zeros(m * d, 2 * d);
    v.view_mut((0, 0), (m * d, d)).copy_from(km);
    v.view_mut((0, d), (m * d, d)).copy_from(&(-&gt));

    // inner 2d×2d system (I + (ε/2) V†U) X = V†𝕂
    let inner = CMat::identity(2 * d, 2 * d) + v.adjoint() * &u * cr(epsilon / 2.0);
    let rhs = v.adjoint() * km;
    let x = inner.lu().solve(&rhs).ok_or_else(|| {
        Error::Numeric(format!(
            "singular {0}x{0} inner system in Cayley step (epsilon {epsilon})",
            2 * d
        ))
    })?;
    let next = km - u * x * cr(epsilon);
    Ok(KrausStack::from_raw(d, m, next))
}

/// A named metric evaluated on the current iterate at each recorded epoch.
pub type Metric<'a> = (&'a str, &'a dyn Fn(&KrausStack) -> f64);

/// Runs `cfg.epochs` Cayley steps of cost descent from `k0`.
///
/// Records the cost and every metric after each `record_every`-th step and
/// after the final one. Errors from cost evaluation or the inner solve are
/// tagged with the epoch at which they occurred.
pub fn optimize<C: CostFunction>(
    k0: &KrausStack,
    cost: &C,
    cfg: &OptimizerConfig,
    metrics: &[Metric<'_>],
) -> Result<(KrausStack, TrainingTrace)> {
    cfg.validate()?;
    let mut trace = TrainingTrace::new(metrics.iter().map(|(name, _)| *name));
    if cfg.epochs == 0 {
        return Ok((k0.clone(), trace));
    }
    let mut k = k0.clone();
    let (_, mut g) = cost.value_and_grad(&k).map_err(|e| e.at_epoch(0))?;
    for epoch in 1..=cfg.epochs {
        k = cayley_step_with_floor(&k, &g, cfg.epsilon, cfg.grad_norm_floor)
            .map_err(|e| e.at_epoch(epoch))?;
        let (c, g_next) = cost.value_and_grad(&k).map_err(|e| e.at_epoch(epoch))?;
        g = g_next;
        if epoch % cfg.record_every == 0 || epoch == cfg.epochs {
            let row = TraceRow {
                epoch,
                cost: c,
                metrics: metrics.iter().map(|(_, f)| f(&k)).collect(),
            };
            trace.push(row);
        }
    }
    Ok((k, trace))
}

/// Frobenius norm of the skew-Hermitian generator `A = G𝕂† − 𝕂G†` that
/// drives the Cayley update.
///
/// This is the manifold-aware stationarity measure: at a constrained optimum
/// the Euclidean gradient need not vanish — it can point into the normal
/// space `G = 𝕂S` with `S` Hermitian, where `A = 0` — and there the Cayley
/// step is a no-op regardless of `‖G‖`.
pub fn riemannian_direction_norm(k: &KrausStack, g: &CMat) -> f64 {
    let km = k.matrix();
    (g * km.adjoint() - km * g.adjoint()).norm()
}

/// Maximum relative deviation between `cost.euclidean_grad` and a central
/// finite-difference gradient with step `h`.
///
/// Each matrix entry is perturbed in its real and imaginary parts separately
/// (plain Euclidean perturbation, no retraction) and the two differences are
/// assembled into the conjugate Wirtinger convention
/// `(∂𝓛/∂Re + i·∂𝓛/∂Im)/2`. Deviations are normalized by the largest
/// gradient magnitude so near-zero entries do not dominate.
pub fn grad_check<C: CostFunction>(cost: &C, k: &KrausStack, h: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h:.3e} outside [1e-7, 1e-3]"
        )));
    }
    let analytic = cost.euclidean_grad(k)?;
    let (d, m) = (k.d(), k.m());
    let mut fd = CMat::zeros(m * d, d);
    let probe = |data: CMat| -> Result<f64> { cost.value(&KrausStack::from_raw(d, m, data)) };
    for i in 0..m * d {
        for j in 0..d {
            let mut re_plus = k.matrix().clone();
            re_plus[(i, j)] += cr(h);
            let mut re_minus = k.matrix().clone();
            re_minus[(i, j)] -= cr(h);
            let d_re = (probe(re_plus)? - probe(re_minus)?) / (2.0 * h);

            let ih = CScalar::new(0.0, h);
            let mut im_plus = k.matrix().clone();
            im_plus[(i, j)] += ih;
            let mut im_minus = k.matrix().clone();
            im_minus[(i, j)] -= ih;
            let d_im = (probe(im_plus)? - probe(im_minus)?) / (2.0 * h);

            fd[(i, j)] = CScalar::new(d_re / 2.0, d_im / 2.0);
        }
    }
    let scale = analytic
        .iter()
        .chain(fd.iter())
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let worst = (0..m * d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (fd[(i, j)] - analytic[(i, j)]).norm())
        .fold(0.0f64, f64::max);
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{self, Prng};
    use rand::SeedableRng;

    /// 𝓛 = ‖𝕂 − T‖²_F with conjugate Wirtinger gradient 𝕂 − T.
    struct QuadraticCost {
        target: CMat,
    }

    impl CostFunction for QuadraticCost {
        fn value(&self, k: &KrausStack) -> Result<f64> {
            Ok((k.matrix() - &self.target).norm_squared())
        }

        fn euclidean_grad(&self, k: &KrausStack) -> Result<CMat> {
            Ok(k.matrix() - &self.target)
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut rng = Prng::seed_from_u64(31);
        let k = sample::sample_random_channel(2, 2, &mut rng).unwrap();
        let g = CMat::zeros(4, 2);
        let next = cayley_step(&k, &g, 1.0).unwrap();
        assert_eq!(next.matrix(), k.matrix());
    }

    #[test]
    fn step_preserves_manifold_for_random_gradients() {
        let mut rng = Prng::seed_from_u64(32);
        for (d, m) in [(2usize, 1usize), (2, 4), (3, 2)] {
            let k = sample::sample_random_channel(d, m, &mut rng).unwrap();
            let g = sample::complex_gaussian(m * d, d, &mut rng);
            let next = cayley_step(&k, &g, 1.0).unwrap();
            assert!(next.stiefel_residual() <= 1e-10);
        }
    }

    #[test]
    fn long_run_stays_on_manifold() {
        let mut rng = Prng::seed_from_u64(33);
        let mut k = sample::sample_random_channel(2, 2, &mut rng).unwrap();
        for _ in 0..10_000 {
            let g = sample::complex_gaussian(4, 2, &mut rng);
            k = cayley_step(&k, &g, 1.0).unwrap();
        }
        assert!(k.stiefel_residual() <= 1e-8, "residual {:.3e}", k.stiefel_residual());
    }

    #[test]
    fn direction_invariant_under_gradient_scaling() {
        let mut rng = Prng::seed_from_u64(34);
        let k = sample::sample_random_channel(2, 3, &mut rng).unwrap();
        let g = sample::complex_gaussian(6, 2, &mut rng);
        let base = cayley_step(&k, &g, 1.0).unwrap();
        for c in [1e-3, 1e3] {
            let scaled = cayley_step(&k, &(&g * cr(c)), 1.0).unwrap();
            assert!((scaled.matrix() - base.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn small_step_descends_smooth_cost() {
        let mut rng = Prng::seed_from_u64(35);
        let target = sample::haar_unitary(2, &mut rng);
        let cost = QuadraticCost { target };
        let k = sample::sample_random_channel(2, 1, &mut rng).unwrap();
        let g = cost.euclidean_grad(&k).unwrap();
        let next = cayley_step(&k, &g, 1e-3).unwrap();
        assert!(cost.value(&next).unwrap() < cost.value(&k).unwrap());
    }

    #[test]
    fn zero_epochs_returns_start_and_empty_trace() {
        let mut rng = Prng::seed_from_u64(36);
        let k0 = sample::sample_random_channel(2, 2, &mut rng).unwrap();
        let cost = QuadraticCost { target: CMat::zeros(4, 2) };
        let cfg = OptimizerConfig { epochs: 0, ..OptimizerConfig::default() };
        let (k, trace) = optimize(&k0, &cost, &cfg, &[]).unwrap();
        assert_eq!(k.matrix(), k0.matrix());
        assert!(trace.is_empty());
        assert_eq!(trace.to_csv(), "epoch,cost\n");
    }

    #[test]
    fn toy_quadratic_converges_near_target() {
        // Fixed-length normalized-gradient steps cannot shrink below ~2ε, so
        // the run starts near the target and uses a small ε; the iterate then
        // settles into an O(ε) neighborhood, far below the 1e-6 cost bar.
        let mut rng = Prng::seed_from_u64(37);
        let target = sample::sample_random_channel(2, 1, &mut rng).unwrap();
        let cost = QuadraticCost { target: target.matrix().clone() };
        // start = small Cayley perturbation of the target, distance ≈ 0.05
        let dir = sample::complex_gaussian(2, 2, &mut rng);
        let k0 = cayley_step(&target, &dir, 0.025).unwrap();
        assert!(cost.value(&k0).unwrap() > 1e-4);

        let cfg = OptimizerConfig {
            epsilon: 1e-4,
            epochs: 1000,
            ..OptimizerConfig::default()
        };
        let (_, trace) = optimize(&k0, &cost, &cfg, &[]).unwrap();
        assert!(
            trace.final_cost().unwrap() < 1e-6,
            "final cost {:.3e}",
            trace.final_cost().unwrap()
        );
    }

    #[test]
    fn trace_records_metrics_at_cadence() {
        let mut rng = Prng::seed_from_u64(38);
        let k0 = sample::sample_random_channel(2, 1, &mut rng).unwrap();
        let cost = QuadraticCost { target: CMat::identity(2, 2) };
        let cfg = OptimizerConfig {
            epsilon: 0.01,
            epochs: 25,
            record_every: 10,
            ..OptimizerConfig::default()
        };
        let residual = |k: &KrausStack| k.stiefel_residual();
        let (_, trace) = optimize(&k0, &cost, &cfg, &[("residual", &residual)]).unwrap();
        let epochs: Vec<usize> = trace.rows().iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![10, 20, 25]);
        let series = trace.metric_series("residual").unwrap();
        assert!(series.iter().all(|&r| r <= 1e-10));
        let csv = trace.to_csv();
        assert!(csv.starts_with("epoch,cost,residual\n"));
        assert_eq!(csv.lines().count(), 4);
        // 17 significant digits per float
        assert!(csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().contains('e'));
    }

    #[test]
    fn quadratic_grad_check_is_exact() {
        let mut rng = Prng::seed_from_u64(39);
        let target = sample::complex_gaussian(4, 2, &mut rng);
        let cost = QuadraticCost { target };
        let k = sample::sample_random_channel(2, 2, &mut rng).unwrap();
        let err = grad_check(&cost, &k, 1e-5).unwrap();
        assert!(err <= 1e-8, "relative error {err:.3e}");
    }

    #[test]
    fn grad_check_rejects_bad_step() {
        let cost = QuadraticCost { target: CMat::zeros(2, 2) };
        let k = KrausStack::identity(2);
        assert!(grad_check(&cost, &k, 1e-2).is_err());
        assert!(grad_check(&cost, &k, 1e-8).is_err());
    }

    #[test]
    fn optimizer_config_validation() {
        let mut cfg = OptimizerConfig::default();
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = OptimizerConfig::default();
        cfg.record_every = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn error_carries_epoch_index() {
        struct FailingCost;
        impl CostFunction for FailingCost {
            fn value(&self, _: &KrausStack) -> Result<f64> {
                Err(Error::Numeric("synthetic failure".into()))
            }
            fn euclidean_grad(&self, _: &KrausStack) -> Result<CMat> {
                Err(Error::Numeric("synthetic failure".into()))
            }
        }
        let k0 = KrausStack::identity(2);
        let cfg = OptimizerConfig { epochs: 3, ..OptimizerConfig::default() };
        let err = optimize(&k0, &FailingCost, &cfg, &[]).unwrap_err();
        assert!(err.to_string().contains("epoch 0"), "got: {err}");
    }
}
