//! Quantum classification of tabular data with a trained channel.
//!
//! Feature vectors are min-max scaled to `[0,1]` (optionally after PCA),
//! dense-angle encoded into pure product states
//! `|ψ_x⟩ = ⊗_i [cos(π/2·x_{2i−1})|0⟩ + e^{i2πx_{2i}} sin(π/2·x_{2i−1})|1⟩]`,
//! pushed through a Kraus channel, and classified by the largest population
//! among the first `c` computational-basis states. Training descends the
//! cross entropy `−Σᵢ ln p(yᵢ|xᵢ)` (plus a regularizer) over the Stiefel
//! manifold, starting from a random unitary channel.
//!
//! Two classic datasets ship with the crate as CSV (header row, label in the
//! last column): Iris (150×4, three species) and Wine (178×13, three
//! cultivars; reduced to its six leading principal components by default).

use crate::channel::{DensityMatrix, KrausStack};
use crate::choi::{choi_spectrum, ChoiSpectrum};
use crate::error::{Error, Result};
use crate::linalg;
use crate::linalg::{cr, CMat, CScalar, CVec};
use crate::opt::{optimize, CostFunction, OptimizerConfig, TrainingTrace};
use crate::reg::{combine, Regularizer};
use crate::sample::{sample_unitary_init, Prng};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use std::f64::consts::PI;

/// Class probabilities below this are clamped inside the log.
pub const P_CLAMP: f64 = 1e-12;

/// Tolerance for feature coordinates straying outside `[0,1]` before
/// encoding rejects them.
const RANGE_TOL: f64 = 1e-9;

const IRIS_CSV: &str = include_str!("../data/iris.csv");
const WINE_CSV: &str = include_str!("../data/wine.csv");

/// A labeled tabular dataset with integer classes `0..class_count`.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(name: &str, features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{name}: {} feature rows vs {} labels",
                features.len(),
                labels.len()
            )));
        }
        let width = features[0].len();
        if width == 0 || features.iter().any(|row| row.len() != width) {
            return Err(Error::Dataset(format!("{name}: ragged or empty feature rows")));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("{name}: non-finite feature value")));
        }
        let class_count = labels.iter().max().unwrap() + 1;
        Ok(Dataset { name: name.to_string(), features, labels, class_count })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features[0].len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let rows = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (rows, labels)
    }

    /// The conventional PCA setting for the bundled datasets: none for Iris,
    /// the six leading components for Wine (three qubits either way).
    pub fn default_pca(&self) -> Option<usize> {
        match self.name.as_str() {
            "wine" => Some(6),
            _ => None,
        }
    }
}

fn parse_csv(name: &str, text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Dataset(format!("{name}: empty CSV")))?;
    let columns = header.split(',').count();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns {
            return Err(Error::Dataset(format!(
                "{name}: row {} has {} cells, expected {columns}",
                lineno + 2,
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(columns - 1);
        for cell in &cells[..columns - 1] {
            row.push(cell.trim().parse::<f64>().map_err(|e| {
                Error::Dataset(format!("{name}: row {}: {e}", lineno + 2))
            })?);
        }
        let label = cells[columns - 1].trim().parse::<usize>().map_err(|e| {
            Error::Dataset(format!("{name}: row {} label: {e}", lineno + 2))
        })?;
        features.push(row);
        labels.push(label);
    }
    Dataset::new(name, features, labels)
}

/// Loads a bundled dataset: `"iris"` (150×4) or `"wine"` (178×13).
pub fn load_dataset(name: &str) -> Result<Dataset> {
    match name.to_ascii_lowercase().as_str() {
        "iris" => parse_csv("iris", IRIS_CSV),
        "wine" => parse_csv("wine", WINE_CSV),
        other => Err(Error::Dataset(format!(
            "unknown dataset '{other}' (bundled: iris, wine)"
        ))),
    }
}

/// Principal-component basis fitted on training rows.
#[derive(Debug, Clone)]
struct Pca {
    mean: Vec<f64>,
    /// Component vectors as rows, ordered by descending explained variance.
    components: Vec<Vec<f64>>,
    explained: Vec<f64>,
}

/// Feature pipeline fitted on the training split only: optional PCA
/// projection, then per-coordinate min-max scaling into `[0,1]`.
///
/// Out-of-range test coordinates clamp to `[0,1]`; coordinates whose
/// training range is zero map to 0 (flagged in [`zero_range_coords`]).
///
/// [`zero_range_coords`]: Preprocessor::zero_range_coords
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pca: Option<Pca>,
    min: Vec<f64>,
    max: Vec<f64>,
    zero_range: Vec<usize>,
}

impl Preprocessor {
    pub fn output_dim(&self) -> usize {
        self.min.len()
    }

    /// Explained variances of the PCA components, descending; `None` without
    /// PCA.
    pub fn explained_variances(&self) -> Option<&[f64]> {
        self.pca.as_ref().map(|p| p.explained.as_slice())
    }

    /// Coordinates (post-PCA indices) whose training min and max coincide.
    pub fn zero_range_coords(&self) -> &[usize] {
        &self.zero_range
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        match &self.pca {
            None => x.to_vec(),
            Some(pca) => pca
                .components
                .iter()
                .map(|comp| {
                    comp.iter()
                        .zip(x)
                        .zip(&pca.mean)
                        .map(|((c, v), m)| c * (v - m))
                        .sum()
                })
                .collect(),
        }
    }

    /// Maps a raw feature vector into `[0,1]^output_dim`.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let projected = self.project(x);
        projected
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range <= 0.0 {
                    0.0
                } else {
                    ((v - self.min[j]) / range).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

/// Fits min-max statistics (and optionally a PCA basis) on training rows.
pub fn fit_preprocessor(rows: &[Vec<f64>], pca_components: Option<usize>) -> Result<Preprocessor> {
    if rows.is_empty() {
        return Err(Error::Dataset("cannot fit preprocessor on an empty set".into()));
    }
    let width = rows[0].len();
    let pca = match pca_components {
        None => None,
        Some(count) => {
            if count == 0 || count > width {
                return Err(Error::InvalidArgument(format!(
                    "PCA component count {count} outside [1, {width}]"
                )));
            }
            Some(fit_pca(rows, count))
        }
    };
    let scratch = Preprocessor {
        pca,
        min: vec![0.0; 0],
        max: vec![0.0; 0],
        zero_range: vec![],
    };
    let projected: Vec<Vec<f64>> = rows.iter().map(|r| scratch.project(r)).collect();
    let dim = projected[0].len();
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for row in &projected {
        for j in 0..dim {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    let zero_range = (0..dim).filter(|&j| max[j] - min[j] <= 0.0).collect();
    Ok(Preprocessor { pca: scratch.pca, min, max, zero_range })
}

fn fit_pca(rows: &[Vec<f64>], count: usize) -> Pca {
    let (n, width) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..width)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(width, width);
    for row in rows {
        for a in 0..width {
            let da = row[a] - mean[a];
            for b in a..width {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for a in 0..width {
        for b in a..width {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let (eigenvalues, eigenvectors) = linalg::eigh_real(&cov);
    let mut components = Vec::with_capacity(count);
    let mut explained = Vec::with_capacity(count);
    for idx in 0..count.min(width) {
        let col = eigenvectors.column(idx);
        let mut comp: Vec<f64> = col.iter().copied().collect();
        // deterministic orientation: largest-magnitude loading is positive
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if comp[lead] < 0.0 {
            comp.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(comp);
        explained.push(eigenvalues[idx].max(0.0));
    }
    Pca { mean, components, explained }
}

/// Dense-angle encoding of `x ∈ [0,1]^N` into a pure state of `⌈N/2⌉`
/// qubits (odd `N` pads a trailing 0). Qubit `i` carries the feature pair
/// `(x_{2i−1}, x_{2i})` as polar and phase angle.
pub fn dense_angle_state(x: &[f64]) -> Result<CVec> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("cannot encode an empty vector".into()));
    }
    if let Some(bad) = x.iter().find(|v| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(*v)) {
        return Err(Error::InvalidArgument(format!(
            "encoding input {bad} outside [0,1]"
        )));
    }
    let mut padded: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if padded.len() % 2 == 1 {
        padded.push(0.0);
    }
    let mut state = CVec::from_element(1, cr(1.0));
    for pair in padded.chunks(2) {
        let theta = 0.5 * PI * pair[0];
        let phase = CScalar::new(0.0, 2.0 * PI * pair[1]).exp();
        let qubit = CVec::from_column_slice(&[cr(theta.cos()), phase * cr(theta.sin())]);
        state = state.kronecker(&qubit);
    }
    Ok(state)
}

/// [`dense_angle_state`] as a density matrix `|ψ_x⟩⟨ψ_x|`.
pub fn dense_angle_encode(x: &[f64]) -> Result<DensityMatrix> {
    Ok(DensityMatrix::pure(&dense_angle_state(x)?))
}

/// Cross entropy `−Σᵢ ln p(yᵢ|xᵢ)` over encoded samples, with
/// `p(y|x) = ⟨y|T[|ψ_x⟩⟨ψ_x|]|y⟩ = Σ_k |(κ_k ψ_x)_y|²` and the rank-1
/// analytic gradient `∂p/∂κ_k* = |y⟩⟨y| κ_k ψψ†`.
pub struct CrossEntropyCost {
    d: usize,
    states: Vec<CVec>,
    labels: Vec<usize>,
}

impl CrossEntropyCost {
    pub fn new(states: Vec<CVec>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if states.is_empty() || states.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} states vs {} labels",
                states.len(),
                labels.len()
            )));
        }
        let d = states[0].len();
        if class_count > d {
            return Err(Error::InvalidArgument(format!(
                "{class_count} classes exceed system dimension {d}"
            )));
        }
        if states.iter().any(|s| s.len() != d) {
            return Err(Error::DimensionMismatch("mixed state dimensions".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 0..{class_count}"
            )));
        }
        Ok(CrossEntropyCost { d, states, labels })
    }

    fn check_dims(&self, k: &KrausStack) -> Result<()> {
        if k.d() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "model dimension {} vs encoded dimension {}",
                k.d(),
                self.d
            )));
        }
        Ok(())
    }
}

impl CostFunction for CrossEntropyCost {
    fn value(&self, k: &KrausStack) -> Result<f64> {
        self.check_dims(k)?;
        let mut cost = 0.0;
        for (psi, &y) in self.states.iter().zip(&self.labels) {
            let mut p = 0.0;
            for block in 0..k.m() {
                let amp = k.block(block).row(y).iter().zip(psi.iter())
                    .map(|(a, b)| a * b)
                    .sum::<CScalar>();
                p += amp.norm_sqr();
            }
            cost -= p.max(P_CLAMP).ln();
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
        let mut amps = vec![CScalar::default(); m];
        for (psi, &y) in self.states.iter().zip(&self.labels) {
            // only row y of each κ_k ψ enters the probability and gradient
            for (block, amp) in amps.iter_mut().enumerate() {
                *amp = k
                    .block(block)
                    .row(y)
                    .iter()
                    .zip(psi.iter())
                    .map(|(a, b)| a * b)
                    .sum();
            }
            let p = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().max(P_CLAMP);
            cost -= p.ln();
            let w = -1.0 / p;
            for (block, amp) in amps.iter().enumerate() {
                let scale = cr(w) * amp;
                let row = block * d + y;
                for col in 0..d {
                    grad[(row, col)] += scale * psi[col].conj();
                }
            }
        }
        Ok((cost, grad))
    }
}

/// A trained channel read out over the first `class_count` basis states.
#[derive(Debug, Clone)]
pub struct Classifier {
    stack: KrausStack,
    class_count: usize,
}

impl Classifier {
    pub fn new(stack: KrausStack, class_count: usize) -> Result<Self> {
        if class_count == 0 || class_count > stack.d() {
            return Err(Error::InvalidArgument(format!(
                "class count {class_count} outside [1, {}]",
                stack.d()
            )));
        }
        Ok(Classifier { stack, class_count })
    }

    pub fn stack(&self) -> &KrausStack {
        &self.stack
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Class populations `⟨β|T[|ψ⟩⟨ψ|]|β⟩` for β over all basis states.
    pub fn populations(&self, psi: &CVec) -> Vec<f64> {
        let d = self.stack.d();
        let mut pops = vec![0.0; d];
        for block in 0..self.stack.m() {
            let v = self.stack.block(block) * psi;
            for beta in 0..d {
                pops[beta] += v[beta].norm_sqr();
            }
        }
        pops
    }

    /// `argmax_β p(β|x)` over the class labels only; ties go to the
    /// smallest label.
    pub fn classify(&self, psi: &CVec) -> usize {
        let pops = self.populations(psi);
        let mut best = 0;
        for beta in 1..self.class_count {
            if pops[beta] > pops[best] {
                best = beta;
            }
        }
        best
    }

    /// Fraction of correctly classified samples.
    pub fn accuracy(&self, states: &[CVec], labels: &[usize]) -> Result<f64> {
        if states.is_empty() || states.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "accuracy over {} states vs {} labels",
                states.len(),
                labels.len()
            )));
        }
        let correct = states
            .iter()
            .zip(labels)
            .filter(|(psi, &y)| self.classify(psi) == y)
            .count();
        Ok(correct as f64 / states.len() as f64)
    }
}

/// Settings of one classification run.
#[derive(Debug, Clone)]
pub struct ClassificationConfig {
    /// Kraus operators of the model channel.
    pub m_model: usize,
    pub reg: Regularizer,
    /// Train fraction of the random split, strictly between 0 and 1.
    pub split_fraction: f64,
    /// `None` disables PCA; `Some(c)` keeps the `c` leading components.
    pub pca_components: Option<usize>,
    pub opt: OptimizerConfig,
}

impl ClassificationConfig {
    /// The study defaults for a bundled dataset: m=16, 80/20 split, its
    /// conventional PCA setting, and the dataset's epoch budget
    /// (1500 for Iris, 750 for Wine).
    pub fn for_dataset(data: &Dataset) -> Self {
        let epochs = match data.name() {
            "wine" => 750,
            _ => 1500,
        };
        ClassificationConfig {
            m_model: 16,
            reg: Regularizer::none(),
            split_fraction: 0.8,
            pca_components: data.default_pca(),
            opt: OptimizerConfig { epochs, ..OptimizerConfig::default() },
        }
    }
}

/// Everything reported from one random-split training run.
#[derive(Debug, Clone)]
pub struct SplitReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_cost: f64,
    pub choi_spectrum: ChoiSpectrum,
    pub cumulative: Vec<f64>,
    pub trace: TrainingTrace,
    pub model: KrausStack,
}

/// One full experiment: random 80/20-style split, preprocessor fitted on the
/// train rows only, dense-angle encoding, random-unitary initialization, and
/// cross-entropy descent. The generator drives split, init and nothing else.
pub fn run_classification(
    data: &Dataset,
    cfg: &ClassificationConfig,
    rng: &mut Prng,
) -> Result<SplitReport> {
    if !(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie strictly between 0 and 1, got {}",
            cfg.split_fraction
        )));
    }
    let mut indices: Vec<usize> = (0..data.len()).collect();
    indices.shuffle(rng);
    let train_len = ((data.len() as f64) * cfg.split_fraction).floor() as usize;
    if train_len == 0 || train_len == data.len() {
        return Err(Error::InvalidArgument(format!(
            "split {train_len}/{} leaves an empty side",
            data.len() - train_len
        )));
    }
    let (train_rows, train_labels) = data.select(&indices[..train_len]);
    let (test_rows, test_labels) = data.select(&indices[train_len..]);

    let prep = fit_preprocessor(&train_rows, cfg.pca_components)?;
    let encode = |rows: &[Vec<f64>]| -> Result<Vec<CVec>> {
        rows.iter().map(|r| dense_angle_state(&prep.transform(r))).collect()
    };
    let train_states = encode(&train_rows)?;
    let test_states = encode(&test_rows)?;

    let d = train_states[0].len();
    let cost = combine(
        CrossEntropyCost::new(train_states.clone(), train_labels.clone(), data.class_count())?,
        cfg.reg,
    );
    let init = sample_unitary_init(d, cfg.m_model, rng)?;
    let (model, trace) = optimize(&init, &cost, &cfg.opt, &[])?;

    let classifier = Classifier::new(model.clone(), data.class_count())?;
    let spectrum = choi_spectrum(&model);
    Ok(SplitReport {
        train_accuracy: classifier.accuracy(&train_states, &train_labels)?,
        test_accuracy: classifier.accuracy(&test_states, &test_labels)?,
        final_cost: trace.final_cost().unwrap_or(f64::NAN),
        cumulative: spectrum.cumulative(),
        choi_spectrum: spectrum,
        trace,
        model,
    })
}
