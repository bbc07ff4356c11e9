//! Executes validated experiments: derives one seed per independent run,
//! dispatches the runs through the worker pool, and writes all artifacts in
//! run order so identical (binary, config, seed) triples produce identical
//! bytes regardless of worker count.

use crate::config::{ClassifyConfig, ExperimentConfig, GradCheckConfig, TomoConfig};
use crate::manifest::RunManifest;
use krausopt::choi::choi_spectrum;
use krausopt::opt::{grad_check, CostFunction, OptimizerConfig};
use krausopt::par::map_runs;
use krausopt::qml::{dense_angle_state, load_dataset, ClassificationConfig, CrossEntropyCost};
use krausopt::reg::{combine, RegKind, Regularizer, ZeroCost};
use krausopt::sample::{derive_seed, sample_random_channel, Prng};
use krausopt::tomo::{
    exact_statistics, grid_search_gamma, infidelity, run_tomography, simulate_shots,
    split_train_test, KlCost,
};
use krausopt::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Effective-rank reporting threshold on Choi eigenvalues.
const RANK_THRESHOLD: f64 = 1e-2;
/// Gradient-check pass threshold on the relative error.
const GRAD_CHECK_TOL: f64 = 1e-6;

pub fn execute(config: &ExperimentConfig) -> Result<()> {
    match config {
        ExperimentConfig::Tomo(c) | ExperimentConfig::GridSearch(c) => run_tomo_experiment(config, c),
        ExperimentConfig::Classify(c) => run_classify_experiment(config, c),
        ExperimentConfig::GradCheck(c) => run_grad_check(config, c),
    }
}

fn init_workers(count: usize) {
    #[cfg(feature = "parallel")]
    {
        // A second initialization in the same process is a no-op.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = count;
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn prepare_out(config: &ExperimentConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), config)
}

fn run_dir(out: &Path, index: usize) -> Result<PathBuf> {
    let dir = out.join(format!("run_{index:03}"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Serialize)]
struct TomoReport {
    kind: &'static str,
    condition: String,
    run_index: usize,
    seed: u64,
    qubits: usize,
    target_rank: usize,
    model_kraus: usize,
    shots: u64,
    reg: String,
    /// Absent for grid-search runs, whose γ comes from the search itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    epochs: usize,
    final_cost: f64,
    infidelity: f64,
    fidelity: f64,
    effective_rank: usize,
    choi_eigs: Vec<f64>,
    cumulative: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chosen_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_test_costs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_fidelities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_failures: Option<Vec<(f64, String)>>,
}

struct TomoRunOut {
    report: TomoReport,
    trace_csv: Option<String>,
    grid_csv: Option<String>,
    model_json: String,
}

fn tomo_condition(c: &TomoConfig) -> String {
    if c.grid_search {
        format!(
            "grid-n{}-r{}-m{}-s{}-{}",
            c.qubits, c.target_rank, c.model_kraus, c.shots, c.reg
        )
    } else {
        format!(
            "tomo-n{}-r{}-m{}-s{}-{}-g{}",
            c.qubits, c.target_rank, c.model_kraus, c.shots, c.reg, c.gamma
        )
    }
}

fn opt_config(epochs: usize, epsilon: f64, record_every: usize) -> OptimizerConfig {
    OptimizerConfig {
        epsilon,
        epochs,
        record_every,
        ..OptimizerConfig::default()
    }
}

fn run_tomo_experiment(config: &ExperimentConfig, c: &TomoConfig) -> Result<()> {
    init_workers(c.workers);
    prepare_out(config, &c.out)?;
    let seeds: Vec<u64> = (0..c.runs as u64).map(|i| derive_seed(c.seed, i)).collect();
    let manifest = RunManifest::begin(config.clone(), seeds.clone());
    manifest.write(&c.out)?;

    let jobs: Vec<(usize, u64)> = seeds.iter().copied().enumerate().collect();
    let cfg = c.clone();
    let outcomes: Vec<Result<TomoRunOut>> =
        map_runs(jobs, move |(index, seed)| one_tomo_run(&cfg, index, seed));

    finalize(manifest, &c.out, outcomes, |outs| {
        let condition = tomo_condition(c);
        if c.grid_search {
            let deltas: Vec<f64> =
                outs.iter().filter_map(|o| o.report.delta_f).collect();
            println!(
                "{condition}: {} run(s) complete, mean ΔF = {:.6e} → {}",
                outs.len(),
                mean(&deltas),
                c.out.display()
            );
        } else {
            let infids: Vec<f64> = outs.iter().map(|o| o.report.infidelity).collect();
            println!(
                "{condition}: {} run(s) complete, mean infidelity = {:.6e} → {}",
                outs.len(),
                mean(&infids),
                c.out.display()
            );
        }
    })
}

fn one_tomo_run(c: &TomoConfig, index: usize, seed: u64) -> Result<TomoRunOut> {
    let mut rng = Prng::seed_from_u64(seed);
    let d = 1usize << c.qubits;
    let target = sample_random_channel(d, c.target_rank, &mut rng)?;
    let opt = opt_config(c.epochs, c.epsilon, c.record_every);
    let mut report = TomoReport {
        kind: if c.grid_search { "grid-search" } else { "tomo" },
        condition: tomo_condition(c),
        run_index: index,
        seed,
        qubits: c.qubits,
        target_rank: c.target_rank,
        model_kraus: c.model_kraus,
        shots: c.shots,
        reg: c.reg.to_string(),
        gamma: if c.grid_search { None } else { Some(c.gamma) },
        epochs: c.epochs,
        final_cost: f64::NAN,
        infidelity: f64::NAN,
        fidelity: f64::NAN,
        effective_rank: 0,
        choi_eigs: Vec::new(),
        cumulative: Vec::new(),
        chosen_gamma: None,
        delta_f: None,
        grid_gammas: None,
        grid_test_costs: None,
        grid_fidelities: None,
        grid_failures: None,
    };

    let (model, trace_csv, grid_csv) = if c.grid_search {
        let (train, test) =
            split_train_test(&target, c.qubits, c.shots, c.split_fraction, &mut rng)?;
        let grid = grid_search_gamma(
            &train,
            &test,
            c.model_kraus,
            c.reg,
            &c.grid_gammas,
            &opt,
            &mut rng,
            Some(&target),
        )?;
        report.chosen_gamma = Some(grid.chosen_gamma);
        report.final_cost = grid.chosen_test_cost;
        if let Some(fids) = &grid.fidelities {
            let chosen = grid
                .gamma_values
                .iter()
                .position(|&g| g == grid.chosen_gamma)
                .map(|i| fids[i]);
            let baseline = grid
                .gamma_values
                .iter()
                .position(|&g| g == 0.0)
                .map(|i| fids[i]);
            if let (Some(chosen), Some(baseline)) = (chosen, baseline) {
                report.delta_f = Some(chosen - baseline);
            }
        }
        let mut csv = String::from(if grid.fidelities.is_some() {
            "gamma,test_cost,fidelity\n"
        } else {
            "gamma,test_cost\n"
        });
        for (i, &g) in grid.gamma_values.iter().enumerate() {
            write!(csv, "{g:.16e},{:.16e}", grid.test_costs[i]).unwrap();
            if let Some(fids) = &grid.fidelities {
                write!(csv, ",{:.16e}", fids[i]).unwrap();
            }
            csv.push('\n');
        }
        report.grid_gammas = Some(grid.gamma_values);
        report.grid_test_costs = Some(grid.test_costs);
        report.grid_fidelities = grid.fidelities;
        if !grid.failures.is_empty() {
            report.grid_failures = Some(grid.failures);
        }
        (grid.chosen_model, None, Some(csv))
    } else {
        let data = if c.shots == 0 {
            exact_statistics(&target, c.qubits)?
        } else {
            simulate_shots(&target, c.qubits, c.shots, &mut rng)?
        };
        let reg = Regularizer::new(c.reg, c.gamma)?;
        let (model, trace) = run_tomography(&target, c.model_kraus, reg, &data, &opt, &mut rng)?;
        report.final_cost = trace.final_cost().unwrap_or(f64::NAN);
        (model, Some(trace.to_csv()), None)
    };

    report.infidelity = infidelity(&model, &target)?;
    report.fidelity = 1.0 - report.infidelity;
    let spectrum = choi_spectrum(&model);
    report.effective_rank = spectrum.rank(RANK_THRESHOLD);
    report.cumulative = spectrum.cumulative();
    report.choi_eigs = spectrum.eigenvalues;
    let model_json = model.to_json_string()?;
    Ok(TomoRunOut { report, trace_csv, grid_csv, model_json })
}

/// Writes per-run artifacts in index order, then finalizes the manifest.
/// Any run error flips the manifest to "failed" before propagating.
fn finalize<O, F>(
    mut manifest: RunManifest,
    out: &Path,
    outcomes: Vec<Result<O>>,
    on_success: F,
) -> Result<()>
where
    O: RunArtifacts,
    F: FnOnce(&[O]),
{
    let mut outs = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        match outcome {
            Ok(o) => outs.push(o),
            Err(e) => {
                manifest.fail(&e);
                manifest.write(out)?;
                return Err(e);
            }
        }
    }
    let mut outputs = vec!["config.json".to_string()];
    for (index, o) in outs.iter().enumerate() {
        let dir = run_dir(out, index)?;
        let rel = |name: &str| format!("run_{index:03}/{name}");
        std::fs::write(dir.join("report.json"), o.report_json()? + "\n")?;
        outputs.push(rel("report.json"));
        if let Some(csv) = o.trace_csv() {
            std::fs::write(dir.join("trace.csv"), csv)?;
            outputs.push(rel("trace.csv"));
        }
        if let Some(csv) = o.grid_csv() {
            std::fs::write(dir.join("grid.csv"), csv)?;
            outputs.push(rel("grid.csv"));
        }
        std::fs::write(dir.join("model.json"), o.model_json())?;
        outputs.push(rel("model.json"));
    }
    on_success(&outs);
    manifest.complete(outputs);
    manifest.write(out)
}

/// What each finished run hands back for writing.
trait RunArtifacts: Send {
    fn report_json(&self) -> Result<String>;
    fn trace_csv(&self) -> Option<&str>;
    fn grid_csv(&self) -> Option<&str>;
    fn model_json(&self) -> &str;
}

impl RunArtifacts for TomoRunOut {
    fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)?)
    }
    fn trace_csv(&self) -> Option<&str> {
        self.trace_csv.as_deref()
    }
    fn grid_csv(&self) -> Option<&str> {
        self.grid_csv.as_deref()
    }
    fn model_json(&self) -> &str {
        &self.model_json
    }
}

#[derive(Serialize)]
struct ClassifyReport {
    kind: &'static str,
    condition: String,
    split_index: usize,
    seed: u64,
    dataset: String,
    model_kraus: usize,
    reg: String,
    gamma: f64,
    epochs: usize,
    split_fraction: f64,
    pca_components: usize,
    train_accuracy: f64,
    test_accuracy: f64,
    final_cost: f64,
    effective_rank: usize,
    choi_eigs: Vec<f64>,
    cumulative: Vec<f64>,
}

struct ClassifyRunOut {
    report: ClassifyReport,
    trace_csv: String,
    model_json: String,
}

impl RunArtifacts for ClassifyRunOut {
    fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)?)
    }
    fn trace_csv(&self) -> Option<&str> {
        Some(&self.trace_csv)
    }
    fn grid_csv(&self) -> Option<&str> {
        None
    }
    fn model_json(&self) -> &str {
        &self.model_json
    }
}

fn run_classify_experiment(config: &ExperimentConfig, c: &ClassifyConfig) -> Result<()> {
    init_workers(c.workers);
    prepare_out(config, &c.out)?;
    let data = load_dataset(&c.dataset)?;
    let pca = c.pca_components.unwrap_or(0);
    let run_cfg = ClassificationConfig {
        m_model: c.model_kraus,
        reg: Regularizer::new(c.reg, c.gamma)?,
        split_fraction: c.split_fraction,
        pca_components: if pca == 0 { None } else { Some(pca) },
        opt: opt_config(c.epochs, c.epsilon, c.record_every),
    };
    let seeds: Vec<u64> = (0..c.splits as u64).map(|i| derive_seed(c.seed, i)).collect();
    let manifest = RunManifest::begin(config.clone(), seeds.clone());
    manifest.write(&c.out)?;

    let condition = format!("classify-{}-m{}-{}-g{}", c.dataset, c.model_kraus, c.reg, c.gamma);
    let jobs: Vec<(usize, u64)> = seeds.iter().copied().enumerate().collect();
    let cfg = c.clone();
    let cond = condition.clone();
    let outcomes: Vec<Result<ClassifyRunOut>> = map_runs(jobs, move |(index, seed)| {
        let mut rng = Prng::seed_from_u64(seed);
        let split = krausopt::qml::run_classification(&data, &run_cfg, &mut rng)?;
        let spectrum = split.choi_spectrum;
        Ok(ClassifyRunOut {
            report: ClassifyReport {
                kind: "classify",
                condition: cond.clone(),
                split_index: index,
                seed,
                dataset: cfg.dataset.clone(),
                model_kraus: cfg.model_kraus,
                reg: cfg.reg.to_string(),
                gamma: cfg.gamma,
                epochs: cfg.epochs,
                split_fraction: cfg.split_fraction,
                pca_components: pca,
                train_accuracy: split.train_accuracy,
                test_accuracy: split.test_accuracy,
                final_cost: split.final_cost,
                effective_rank: spectrum.rank(RANK_THRESHOLD),
                cumulative: split.cumulative,
                choi_eigs: spectrum.eigenvalues,
            },
            trace_csv: split.trace.to_csv(),
            model_json: split.model.to_json_string()?,
        })
    });

    finalize(manifest, &c.out, outcomes, |outs| {
        let accs: Vec<f64> = outs.iter().map(|o| o.report.test_accuracy).collect();
        println!(
            "{condition}: {} split(s) complete, mean test accuracy = {:.4} → {}",
            outs.len(),
            mean(&accs),
            c.out.display()
        );
    })
}

#[derive(Serialize)]
struct GradCheckRow {
    cost: &'static str,
    points: usize,
    max_rel_err: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GradCheckReport {
    kind: &'static str,
    condition: String,
    dim: usize,
    model_kraus: usize,
    step: f64,
    seed: u64,
    tolerance: f64,
    rows: Vec<GradCheckRow>,
    worst: f64,
}

fn max_rel_err<C: CostFunction>(
    cost: &C,
    d: usize,
    m: usize,
    points: usize,
    step: f64,
    rng: &mut Prng,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..points {
        let k = sample_random_channel(d, m, rng)?;
        worst = worst.max(grad_check(cost, &k, step)?);
    }
    Ok(worst)
}

fn run_grad_check(config: &ExperimentConfig, c: &GradCheckConfig) -> Result<()> {
    let d = c.dim;
    let n = d.trailing_zeros() as usize;
    let mut rng = Prng::seed_from_u64(c.seed);

    let target = sample_random_channel(d, d, &mut rng)?;
    let kl = KlCost::new(&exact_statistics(&target, n)?);

    let features = 2 * n;
    let states = (0..24)
        .map(|_| {
            let x: Vec<f64> = (0..features).map(|_| rng.random::<f64>()).collect();
            dense_angle_state(&x)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = (0..24).map(|_| rng.random_range(0..d)).collect();
    let ce = CrossEntropyCost::new(states, labels, d)?;

    let hs = combine(ZeroCost, Regularizer::new(RegKind::Hs, 1.0)?);
    let choi = combine(ZeroCost, Regularizer::new(RegKind::Choi, 1.0)?);

    let mut rows = Vec::new();
    let push = |cost: &'static str, err: f64, rows: &mut Vec<GradCheckRow>| {
        let pass = err <= GRAD_CHECK_TOL;
        println!(
            "grad-check {cost:>4}: max relative error {err:.3e} over {} points — {}",
            c.points,
            if pass { "PASS" } else { "FAIL" }
        );
        rows.push(GradCheckRow { cost, points: c.points, max_rel_err: err, pass });
    };
    let err = max_rel_err(&kl, d, c.model_kraus, c.points, c.step, &mut rng)?;
    push("kl", err, &mut rows);
    let err = max_rel_err(&ce, d, c.model_kraus, c.points, c.step, &mut rng)?;
    push("ce", err, &mut rows);
    let err = max_rel_err(&hs, d, c.model_kraus, c.points, c.step, &mut rng)?;
    push("hs", err, &mut rows);
    let err = max_rel_err(&choi, d, c.model_kraus, c.points, c.step, &mut rng)?;
    push("choi", err, &mut rows);

    let worst = rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    let report = GradCheckReport {
        kind: "grad-check",
        condition: format!("grad-check-d{}-m{}", d, c.model_kraus),
        dim: d,
        model_kraus: c.model_kraus,
        step: c.step,
        seed: c.seed,
        tolerance: GRAD_CHECK_TOL,
        rows,
        worst,
    };

    let failed = worst > GRAD_CHECK_TOL;
    if let Some(out) = &c.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("config.json"), config)?;
        let mut manifest = RunManifest::begin(config.clone(), vec![c.seed]);
        manifest.write(out)?;
        write_json(&out.join("report.json"), &report)?;
        if failed {
            manifest.fail(&Error::Numeric(format!(
                "gradient check exceeded {GRAD_CHECK_TOL:.1e}: worst relative error {worst:.3e}"
            )));
        } else {
            manifest.complete(vec!["config.json".into(), "report.json".into()]);
        }
        manifest.write(out)?;
    }
    if failed {
        return Err(Error::Numeric(format!(
            "gradient check exceeded {GRAD_CHECK_TOL:.1e}: worst relative error {worst:.3e}"
        )));
    }
    Ok(())
}
