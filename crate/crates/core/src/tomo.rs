//! Quantum process tomography: measurement statistics of an unknown channel
//! on Pauli eigenstate inputs, the KL-divergence fit cost, and the γ grid
//! search over regularization strengths.
//!
//! The experiment prepares each of the `6ⁿ` Pauli product states `ρ_α`,
//! sends it through the target channel and measures the informationally
//! complete Pauli POVM, producing a table `p_m(β|α)` — exact probabilities
//! in the infinite-shot limit or multinomial frequencies for `s` shots. A
//! model channel `𝕂` is then fitted by descending
//! `𝓛_p = Σ_α p₀(α) Σ_β p_m ln(p_m/p_T)` with uniform input prior
//! `p₀ = 6⁻ⁿ` and model predictions `p_T(β|α) = tr[M_β T(ρ_α)]`.

use crate::channel::{outcome_probabilities, DensityMatrix, KrausStack};
use crate::choi::{choi_fidelity, choi_state};
use crate::error::{Error, Result};
use crate::linalg::{cr, CMat};
use crate::opt::{optimize, CostFunction, OptimizerConfig, TrainingTrace};
use crate::povm::{pauli_input_states, pauli_povm, Povm};
use crate::reg::{combine, Regularizer};
use crate::sample::{sample_random_channel, Prng};
use crate::par::map_runs;
use rand::prelude::Distribution;
use rand_distr::Binomial;

/// Model probabilities below this are clamped inside `ln` and in gradient
/// denominators, so empirical mass on model-null outcomes stays finite.
pub const P_CLAMP: f64 = 1e-12;

/// The γ grid of the reference study's appendix: 0 plus ten
/// logarithmically spaced values from 10⁻⁴ to 10⁻¹.
pub const APP_C_GRID: [f64; 11] = [
    0.0, 0.0001, 0.000215, 0.000464, 0.001, 0.002154, 0.004642, 0.01, 0.021544, 0.046416, 0.1,
];

/// One measured (or exactly computed) tomography table: rows over the `6ⁿ`
/// input states, columns over the `6ⁿ` POVM outcomes.
#[derive(Debug, Clone)]
pub struct TomographyData {
    n: usize,
    shots: u64,
    inputs: Vec<DensityMatrix>,
    povm: Povm,
    counts: Option<Vec<Vec<u64>>>,
    p_m: Vec<Vec<f64>>,
}

impl TomographyData {
    fn from_exact(n: usize, inputs: Vec<DensityMatrix>, povm: Povm, p_m: Vec<Vec<f64>>) -> Self {
        debug_assert!(p_m
            .iter()
            .all(|row| (row.iter().sum::<f64>() - 1.0).abs() <= 1e-10));
        TomographyData { n, shots: 0, inputs, povm, counts: None, p_m }
    }

    fn from_counts(
        n: usize,
        inputs: Vec<DensityMatrix>,
        povm: Povm,
        shots: u64,
        counts: Vec<Vec<u64>>,
    ) -> Self {
        debug_assert!(counts.iter().all(|row| row.iter().sum::<u64>() == shots));
        let p_m = counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / shots as f64).collect())
            .collect();
        TomographyData { n, shots, inputs, povm, counts: Some(counts), p_m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// System dimension `2ⁿ`.
    pub fn d(&self) -> usize {
        1 << self.n
    }

    /// Shots per input state; 0 denotes the infinite-shot (exact) table.
    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn is_exact(&self) -> bool {
        self.shots == 0
    }

    pub fn inputs(&self) -> &[DensityMatrix] {
        &self.inputs
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    /// Raw count table, absent for exact statistics.
    pub fn counts(&self) -> Option<&Vec<Vec<u64>>> {
        self.counts.as_ref()
    }

    /// The measured distribution `p_m(β|α)`, one row per input state.
    pub fn p_m(&self) -> &[Vec<f64>] {
        &self.p_m
    }
}

fn check_qubit_dim(target: &KrausStack, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("qubit count must be ≥ 1".into()));
    }
    if target.d() != 1 << n {
        return Err(Error::DimensionMismatch(format!(
            "channel dimension {} does not match {n} qubits (2^{n} = {})",
            target.d(),
            1 << n
        )));
    }
    Ok(())
}

/// The infinite-shot table: `p_E(β|α) = tr[M_β E(ρ_α)]` exactly.
pub fn exact_statistics(target: &KrausStack, n: usize) -> Result<TomographyData> {
    check_qubit_dim(target, n)?;
    let inputs = pauli_input_states(n);
    let povm = pauli_povm(n);
    let p_m = inputs
        .iter()
        .map(|rho| outcome_probabilities(target, rho, &povm))
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyData::from_exact(n, inputs, povm, p_m))
}

/// One multinomial draw of `shots` samples from the probability row `p`.
fn multinomial_row(p: &[f64], shots: u64, rng: &mut Prng) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; p.len()];
    let mut left_shots = shots;
    let mut left_prob = 1.0f64;
    for beta in 0..p.len() - 1 {
        if left_shots == 0 {
            break;
        }
        let cond = if left_prob > 0.0 { (p[beta] / left_prob).clamp(0.0, 1.0) } else { 1.0 };
        let draw = if cond >= 1.0 {
            left_shots
        } else {
            Binomial::new(left_shots, cond)
                .map_err(|e| Error::Numeric(format!("binomial draw failed: {e}")))?
                .sample(rng)
        };
        counts[beta] = draw;
        left_shots -= draw;
        left_prob = (left_prob - p[beta]).max(0.0);
    }
    *counts.last_mut().unwrap() += left_shots;
    Ok(counts)
}

/// Samples the `s`-shot table: each row is a multinomial draw from the exact
/// distribution. Deterministic for a fixed generator state.
pub fn simulate_shots(target: &KrausStack, n: usize, s: u64, rng: &mut Prng) -> Result<TomographyData> {
    if s == 0 {
        return Err(Error::InvalidArgument(
            "shot count must be ≥ 1; use exact_statistics for the infinite-shot table".into(),
        ));
    }
    let exact = exact_statistics(target, n)?;
    let counts = exact
        .p_m
        .iter()
        .map(|row| multinomial_row(row, s, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyData::from_counts(n, exact.inputs, exact.povm, s, counts))
}

/// Independent train/test tables with `⌊fraction·s⌋` and the remaining
/// shots per input state. Requires `s ≥ 5` and `fraction ∈ (0, 1)`.
pub fn split_train_test(
    target: &KrausStack,
    n: usize,
    s: u64,
    fraction: f64,
    rng: &mut Prng,
) -> Result<(TomographyData, TomographyData)> {
    if s < 5 {
        return Err(Error::InvalidArgument(format!(
            "need at least 5 shots to split, got {s}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let s_train = (fraction * s as f64).floor() as u64;
    let s_test = s - s_train;
    if s_train == 0 || s_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "split {s_train}/{s_test} leaves an empty table (s={s}, fraction={fraction})"
        )));
    }
    let train = simulate_shots(target, n, s_train, rng)?;
    let test = simulate_shots(target, n, s_test, rng)?;
    Ok((train, test))
}

/// The KL-divergence fit cost `𝓛_p(𝕂)` against a fixed measurement table,
/// with the analytic conjugate Wirtinger gradient
/// `G_k = Σ_α p₀ W_α κ_k ρ_α`, `W_α = −Σ_β (p_m/p_T) M_β`.
pub struct KlCost {
    d: usize,
    prior: f64,
    inputs: Vec<CMat>,
    effects: Vec<CMat>,
    /// Per row: the outcomes with `p_m > 0` (zero-mass terms contribute
    /// nothing to value or gradient).
    support: Vec<Vec<(usize, f64)>>,
}

impl KlCost {
    pub fn new(data: &TomographyData) -> Self {
        let support = data
            .p_m()
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(beta, &p)| (beta, p))
                    .collect()
            })
            .collect();
        KlCost {
            d: data.d(),
            prior: 1.0 / data.p_m().len() as f64,
            inputs: data.inputs().iter().map(|r| r.mat().clone()).collect(),
            effects: data.povm().effects().to_vec(),
            support,
        }
    }

    fn check_dims(&self, k: &KrausStack) -> Result<()> {
        if k.d() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "model dimension {} vs data dimension {}",
                k.d(),
                self.d
            )));
        }
        Ok(())
    }

    /// Predicted probability of outcome β given the channel output `sigma`.
    fn predict(&self, sigma: &CMat, beta: usize) -> f64 {
        let e = &self.effects[beta];
        let mut p = 0.0;
        for j in 0..self.d {
            for i in 0..self.d {
                let t = e[(i, j)].conj() * sigma[(i, j)];
                p += t.re;
            }
        }
        p
    }

    /// Channel output `Σ_k κ_k ρ κ_k†` reusing the per-block products.
    fn output(&self, k: &KrausStack, rho: &CMat, kr: &mut Vec<CMat>) -> CMat {
        let d = self.d;
        kr.clear();
        let mut sigma = CMat::zeros(d, d);
        for block in 0..k.m() {
            let prod = k.block(block) * rho;
            sigma += &prod * k.block(block).adjoint();
            kr.push(prod);
        }
        sigma
    }
}

impl CostFunction for KlCost {
    fn value(&self, k: &KrausStack) -> Result<f64> {
        self.check_dims(k)?;
        let mut cost = 0.0;
        let mut kr = Vec::with_capacity(k.m());
        for (alpha, rho) in self.inputs.iter().enumerate() {
            let sigma = self.output(k, rho, &mut kr);
            for &(beta, pm) in &self.support[alpha] {
                let pt = self.predict(&sigma, beta).max(P_CLAMP);
                cost += self.prior * pm * (pm / pt).ln();
            }
        }
        Ok(cost)
    }

    fn euclidean_grad(&self, k: &KrausStack) -> Result<CMat> {
        Ok(self.value_and_grad(k)?.1)
    }

    fn value_and_grad(&self, k: &KrausStack) -> Result<(f64, CMat)> {
        self.check_dims(k)?;
        let (d, m) = (self.d, k.m());
        let mut cost = 0.0;
        let mut grad = CMat::zeros(m * d, d);
        let mut kr = Vec::with_capacity(m);
        for (alpha, rho) in self.inputs.iter().enumerate() {
            let sigma = self.output(k, rho, &mut kr);
            // W_α = −Σ_β (p_m/p_T) M_β over the measured support
            let mut w = CMat::zeros(d, d);
            for &(beta, pm) in &self.support[alpha] {
                let pt = self.predict(&sigma, beta).max(P_CLAMP);
                cost += self.prior * pm * (pm / pt).ln();
                w += &self.effects[beta] * cr(-pm / pt);
            }
            // G_k += p₀ W_α (κ_k ρ_α)
            let w_scaled = w * cr(self.prior);
            for block in 0..m {
                let add = &w_scaled * &kr[block];
                let mut view = grad.view_mut((block * d, 0), (d, d));
                view += add;
            }
        }
        Ok((cost, grad))
    }
}

/// `1 − F(χ_model, χ_target)`, clamped to `[0, 1]`.
pub fn infidelity(model: &KrausStack, target: &KrausStack) -> Result<f64> {
    let f = choi_fidelity(&choi_state(model), &choi_state(target))?;
    Ok((1.0 - f).clamp(0.0, 1.0))
}

/// Fits a fresh random full-rank-style model of `m_model` Kraus operators to
/// the table, descending the regularized KL cost. The trace records the cost
/// and the infidelity to `target` at the configured cadence.
pub fn run_tomography(
    target: &KrausStack,
    m_model: usize,
    reg: Regularizer,
    data: &TomographyData,
    cfg: &OptimizerConfig,
    rng: &mut Prng,
) -> Result<(KrausStack, TrainingTrace)> {
    let d = target.d();
    if data.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {} vs target dimension {d}",
            data.d()
        )));
    }
    let init = sample_random_channel(d, m_model, rng)?;
    let cost = combine(KlCost::new(data), reg);
    let target_chi = choi_state(target);
    let infid = |k: &KrausStack| {
        choi_fidelity(&choi_state(k), &target_chi)
            .map(|f| (1.0 - f).clamp(0.0, 1.0))
            .unwrap_or(f64::NAN)
    };
    optimize(&init, &cost, cfg, &[("infidelity", &infid)])
}

/// Outcome of a γ grid search: per-γ test costs for the values that
/// trained successfully, the selected γ*, and its trained model.
#[derive(Debug, Clone)]
pub struct GridSearchReport {
    pub gamma_values: Vec<f64>,
    pub test_costs: Vec<f64>,
    /// Final fidelity to the known target per γ, when one was supplied.
    pub fidelities: Option<Vec<f64>>,
    pub chosen_gamma: f64,
    pub chosen_test_cost: f64,
    pub chosen_model: KrausStack,
    /// γ values whose training failed, with the error text.
    pub failures: Vec<(f64, String)>,
}

/// Trains one model per γ on the train table — all from the same random
/// initial stack, isolating the γ effect — and selects the γ minimizing the
/// *unregularized* KL cost on the test table. Ties go to the smaller γ.
///
/// Per-γ runs are independent and execute through [`map_runs`].
pub fn grid_search_gamma(
    train: &TomographyData,
    test: &TomographyData,
    m_model: usize,
    kind: crate::reg::RegKind,
    gammas: &[f64],
    cfg: &OptimizerConfig,
    rng: &mut Prng,
    target: Option<&KrausStack>,
) -> Result<GridSearchReport> {
    if gammas.is_empty() {
        return Err(Error::InvalidArgument("gamma grid must be nonempty".into()));
    }
    if train.d() != test.d() {
        return Err(Error::DimensionMismatch(format!(
            "train dimension {} vs test dimension {}",
            train.d(),
            test.d()
        )));
    }
    let init = sample_random_channel(train.d(), m_model, rng)?;
    let train_cost = KlCost::new(train);
    let test_cost = KlCost::new(test);
    let target_chi = target.map(choi_state);

    type GammaOutcome = std::result::Result<(f64, f64, Option<f64>, KrausStack), (f64, String)>;
    let outcomes: Vec<GammaOutcome> = map_runs(gammas.to_vec(), |gamma| {
        let reg = Regularizer::new(kind, gamma).map_err(|e| (gamma, e.to_string()))?;
        let cost = combine(&train_cost, reg);
        let (model, _) = optimize(&init, &cost, cfg, &[]).map_err(|e| (gamma, e.to_string()))?;
        let on_test = test_cost.value(&model).map_err(|e| (gamma, e.to_string()))?;
        let fid = target_chi
            .as_ref()
            .map(|chi| choi_fidelity(&choi_state(&model), chi).unwrap_or(f64::NAN));
        Ok((gamma, on_test, fid, model))
    });

    let mut gamma_values = Vec::new();
    let mut test_costs = Vec::new();
    let mut fidelities = Vec::new();
    let mut models = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((gamma, cost, fid, model)) => {
                gamma_values.push(gamma);
                test_costs.push(cost);
                if let Some(f) = fid {
                    fidelities.push(f);
                }
                models.push(model);
            }
            Err(failure) => failures.push(failure),
        }
    }
    if gamma_values.is_empty() {
        let detail = failures
            .iter()
            .map(|(g, e)| format!("γ={g}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Numeric(format!("every gamma failed ({detail})")));
    }

    let mut best = 0usize;
    for i in 1..gamma_values.len() {
        let better = test_costs[i] < test_costs[best]
            || (test_costs[i] == test_costs[best] && gamma_values[i] < gamma_values[best]);
        if better {
            best = i;
        }
    }
    Ok(GridSearchReport {
        chosen_gamma: gamma_values[best],
        chosen_test_cost: test_costs[best],
        chosen_model: models.swap_remove(best),
        fidelities: target.map(|_| fidelities),
        gamma_values,
        test_costs,
        failures,
    })
}
