//! End-to-end audit: load or generate a cohort, fit the baseline and mitigated
//! ensembles under shared outer folds, evaluate every (attribute, task,
//! mitigation) cell and write the report, tables and charts.

mod config;
mod render;
mod report;

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

pub use config::{
    AdversarialSettings, AuditConfig, CounterfactualSettings, DataSource, Mitigation, ProxySettings,
    RejectOptionSettings, OUTPUT_DIR_ENV,
};
pub use render::{attribute_csv, attribute_svg, render_from_report, render_tables, TABLE_METRICS};
pub use report::{AttributeReport, AuditReport, Cell, MitigationRun, Provenance, Selection, Utility};

use crate::adversarial::{adv_tune, AdvLearner};
use crate::cohort::{binarize, generate_synthetic, load_csv, Cohort, Diagnosis, Folds, Group, SensitiveSpec};
use crate::covariate::{fit_covariates, residualize_inputs};
use crate::ensemble::{
    balanced_accuracy, default_grid, fit_fold, outer_folds, task_prediction, task_probability, weighted_f1,
    BinaryTask, CvData, FoldOutput, HyperParams, MemberLearner, SvmLearner,
};
use crate::error::{Error, Result};
use crate::fairness::{
    aggregate_folds, confusion_by_group_binary, counterfactual_consistency, parity_report, Aggregate, Consistency,
    ConsistencySummary, CounterfactualMode, ParityReport,
};
use crate::linalg::Matrix;
use crate::proxy_shap::proxy_analysis;
use crate::reject_option::{roc_apply, roc_bounds_cv, roc_fit, RocConfig};
use crate::rng::derive_seed;

const KEY_TUNE: u64 = 0x71;
const KEY_ROC: u64 = 0x72;
const KEY_PROXY: u64 = 0x73;

pub const REPORT_FILE: &str = "report.json";
pub const ERROR_LOG: &str = "error.log";

/// Loads the configured cohort.
pub fn load_cohort(config: &AuditConfig) -> Result<Cohort> {
    match &config.data {
        DataSource::Preset(p) => generate_synthetic(&p.config()),
        DataSource::Synthetic(s) => generate_synthetic(s),
        DataSource::Csv { path, schema } => {
            let loaded = load_csv(path, schema)?;
            if loaded.dropped_rows > 0 {
                info!("{}: dropped {} rows by race filter", path.display(), loaded.dropped_rows);
            }
            Ok(loaded.cohort)
        }
    }
}

/// Runs the audit on a dedicated pool of `jobs` workers (`None`: rayon's default).
/// Results do not depend on the worker count.
pub fn run_audit_with_jobs(config: &AuditConfig, jobs: Option<usize>) -> Result<AuditReport> {
    match jobs {
        None => run_audit(config),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(|| run_audit(config)),
    }
}

/// Computes the full report in memory; writes nothing.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let cohort = load_cohort(config)?;
    audit_cohort(config, &cohort)
}

/// Runs the audit and writes `report.json`, tables and charts into `dir`.
/// On failure, files written by this call are removed and the error is
/// recorded in `error.log`.
pub fn audit_to_dir(config: &AuditConfig, jobs: Option<usize>, dir: &Path) -> Result<(AuditReport, Vec<PathBuf>)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let log_path = dir.join(ERROR_LOG);
    let result = run_audit_with_jobs(config, jobs).and_then(|report| {
        let written = write_outputs(&report, dir)?;
        Ok((report, written))
    });
    match &result {
        Ok(_) => {
            let _ = std::fs::remove_file(&log_path);
        }
        Err(e) => {
            let _ = std::fs::write(&log_path, format!("audit failed: {e}\n"));
        }
    }
    result
}

/// Writes `report.json` and the per-attribute artifacts; all-or-nothing.
pub fn write_outputs(report: &AuditReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let path = dir.join(REPORT_FILE);
    std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    match render_tables(report, dir) {
        Ok(mut written) => {
            written.insert(0, path);
            Ok(written)
        }
        Err(e) => {
            render::remove_all(&[path]);
            Err(e)
        }
    }
}

/// Binary predictions of one task on the task's test records.
#[derive(Debug, Clone, Default)]
struct TaskPreds {
    rows: Vec<usize>,
    predicted: Vec<bool>,
}

type FoldPreds = [TaskPreds; 3];

struct Outcome {
    run: MitigationRun,
    folds: Vec<FoldPreds>,
    /// Per task, per fold.
    counterfactual: Option<[Vec<Consistency>; 3]>,
}

fn append_column(x: &Matrix<f64>, col: &[f64]) -> Matrix<f64> {
    let rows: Vec<Vec<f64>> = x
        .iter_rows()
        .zip(col)
        .map(|(r, &v)| {
            let mut r = r.to_vec();
            r.push(v);
            r
        })
        .collect();
    Matrix::from_rows(&rows)
}

fn indicator(groups: &[Group]) -> Vec<f64> {
    groups.iter().map(|g| g.indicator()).collect()
}

fn flipped(groups: &[Group]) -> Vec<Group> {
    groups.iter().map(|g| g.flipped()).collect()
}

fn task_rows(labels: &[Diagnosis], rows: &[usize], task: BinaryTask) -> Vec<usize> {
    rows.iter().copied().filter(|&r| task.involves(labels[r])).collect()
}

/// Per-task predictions from class scores aligned with `rows`.
fn score_preds(labels: &[Diagnosis], rows: &[usize], scores: &[[f64; 3]]) -> FoldPreds {
    BinaryTask::ALL.map(|task| {
        let mut t = TaskPreds::default();
        for (&r, s) in rows.iter().zip(scores) {
            if task.involves(labels[r]) {
                t.rows.push(r);
                t.predicted.push(task_prediction(s, task));
            }
        }
        t
    })
}

fn three_class_utility<L: MemberLearner>(labels: &[Diagnosis], folds: &[FoldOutput<L>]) -> Utility {
    let (mut f1, mut ba) = (Vec::new(), Vec::new());
    for f in folds {
        let pred: Vec<Diagnosis> = f.test_scores.iter().map(crate::ensemble::argmax_class).collect();
        let actual: Vec<Diagnosis> = f.test.iter().map(|&r| labels[r]).collect();
        f1.push(weighted_f1(&pred, &actual));
        ba.push(balanced_accuracy(&pred, &actual));
    }
    Utility { weighted_f1: Aggregate::of(&f1), balanced_accuracy: Aggregate::of(&ba) }
}

/// Shared state of one audit.
struct Audit<'a> {
    config: &'a AuditConfig,
    cohort: &'a Cohort,
    labels: Vec<Diagnosis>,
    strata: Vec<usize>,
    inputs: Matrix<f64>,
    outer: Folds,
    grid: Vec<HyperParams>,
    svm: SvmLearner,
    seed: u64,
}

impl<'a> Audit<'a> {
    fn data(&self, x: Matrix<f64>, groups: &[Group]) -> CvData {
        CvData { x, labels: self.labels.clone(), strata: self.strata.clone(), groups: groups.to_vec() }
    }

    /// One nested-CV fit per outer fold, folds in parallel. `grids[f]` is fold `f`'s grid.
    fn fit<L: MemberLearner>(
        &self,
        learner: &L,
        inputs: &[Matrix<f64>],
        groups: &[Group],
        grids: &[Vec<L::Params>],
    ) -> Result<Vec<FoldOutput<L>>> {
        (0..self.outer.k())
            .into_par_iter()
            .map(|f| {
                let data = self.data(inputs[f].clone(), groups);
                let train = self.outer.train(f);
                fit_fold(&data, f, &train, self.outer.test(f), &grids[f], learner, self.config.cv.inner_k, self.seed)
            })
            .collect()
    }

    fn per_fold(&self, x: &Matrix<f64>) -> Vec<Matrix<f64>> {
        vec![x.clone(); self.outer.k()]
    }

    fn shared_grid<P: Clone>(&self, grid: &[P]) -> Vec<Vec<P>> {
        vec![grid.to_vec(); self.outer.k()]
    }

    /// Reject-option configs per task, fit on the fold's inner validation scores.
    fn fit_roc(&self, fold: &FoldOutput<SvmLearner>, groups: &[Group], key: u64) -> Result<[RocConfig; 3]> {
        let val = fold
            .validation_scores
            .as_ref()
            .ok_or_else(|| Error::Contract("reject option needs inner validation scores".into()))?;
        let settings = &self.config.reject_option;
        let mut out = Vec::with_capacity(3);
        for task in BinaryTask::ALL {
            let (mut pred, mut prob, mut actual, mut g) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (&r, s) in fold.train.iter().zip(val) {
                if let Some(y) = task.target(self.labels[r]) {
                    pred.push(task_prediction(s, task));
                    prob.push(task_probability(s, task));
                    actual.push(y);
                    g.push(groups[r]);
                }
            }
            let seed = derive_seed(self.seed, &[KEY_ROC, key, fold.fold as u64, task.index() as u64]);
            let bounds = roc_bounds_cv(&pred, &prob, &actual, &g, settings.bounds_folds, settings.candidates, seed)?;
            let fit = roc_fit(&pred, &prob, &actual, &g, (bounds.lower, bounds.upper), settings.candidates)?;
            out.push(fit.config);
        }
        Ok(out.try_into().expect("three tasks"))
    }

    /// Applies per-task reject-option configs to class scores aligned with `rows`.
    fn roc_preds(&self, rows: &[usize], scores: &[[f64; 3]], groups: &[Group], cfgs: &[RocConfig; 3]) -> FoldPreds {
        BinaryTask::ALL.map(|task| {
            let (mut t, mut prob, mut g) = (TaskPreds::default(), Vec::new(), Vec::new());
            for (&r, s) in rows.iter().zip(scores) {
                if task.involves(self.labels[r]) {
                    t.rows.push(r);
                    t.predicted.push(task_prediction(s, task));
                    prob.push(task_probability(s, task));
                    g.push(groups[r]);
                }
            }
            t.predicted = roc_apply(&t.predicted, &prob, &g, &cfgs[task.index()]);
            t
        })
    }

    fn consistency(&self, original: &[FoldPreds], perturbed: &[FoldPreds], groups: &[Group]) -> [Vec<Consistency>; 3] {
        BinaryTask::ALL.map(|task| {
            original
                .iter()
                .zip(perturbed)
                .map(|(o, p)| {
                    let (o, p) = (&o[task.index()], &p[task.index()]);
                    debug_assert_eq!(o.rows, p.rows);
                    let g: Vec<Group> = o.rows.iter().map(|&r| groups[r]).collect();
                    counterfactual_consistency(&o.predicted, &p.predicted, &g)
                })
                .collect()
        })
    }

    /// Original and perturbed test scores for counterfactual evaluation.
    /// `orig` holds each fold's inputs with the attribute column as observed,
    /// `flip` the same with it flipped. `reuse` supplies already fitted
    /// original models.
    #[allow(clippy::too_many_arguments)]
    fn counterfactual_models<L: MemberLearner>(
        &self,
        learner: &L,
        orig: &[Matrix<f64>],
        flip: &[Matrix<f64>],
        groups: &[Group],
        grids: &[Vec<L::Params>],
        reuse: Option<Vec<FoldOutput<L>>>,
    ) -> Result<CfModels<L>> {
        let original = match reuse {
            Some(r) => r,
            None => self.fit(learner, orig, groups, grids)?,
        };
        let (perturbed, flipped_models) = match self.config.counterfactual.mode {
            CounterfactualMode::RetrainFlipped => {
                let fm = self.fit(learner, flip, &flipped(groups), grids)?;
                let scores = fm
                    .iter()
                    .map(|m| m.test.iter().map(|&r| m.model.scores(orig[m.fold].row(r))).collect())
                    .collect::<Result<Vec<Vec<_>>>>()?;
                (scores, Some(fm))
            }
            CounterfactualMode::FlipAtInference => {
                let scores = original
                    .iter()
                    .map(|m| m.test.iter().map(|&r| m.model.scores(flip[m.fold].row(r))).collect())
                    .collect::<Result<Vec<Vec<_>>>>()?;
                (scores, None)
            }
        };
        Ok(CfModels { original, perturbed, flipped: flipped_models })
    }

    fn score_consistency<L: MemberLearner>(&self, cf: &CfModels<L>, groups: &[Group]) -> [Vec<Consistency>; 3] {
        let o: Vec<FoldPreds> = cf.original.iter().map(|m| score_preds(&self.labels, &m.test, &m.test_scores)).collect();
        let p: Vec<FoldPreds> =
            cf.original.iter().zip(&cf.perturbed).map(|(m, s)| score_preds(&self.labels, &m.test, s)).collect();
        self.consistency(&o, &p, groups)
    }

    fn svm_outcome(&self, mitigation: Mitigation, folds: &[FoldOutput<SvmLearner>]) -> Outcome {
        Outcome {
            run: MitigationRun {
                mitigation,
                title: String::new(),
                utility: Some(three_class_utility(&self.labels, folds)),
                selection: Selection::Svm { fold_params: folds.iter().map(|f| f.selected).collect() },
            },
            folds: folds.iter().map(|f| score_preds(&self.labels, &f.test, &f.test_scores)).collect(),
            counterfactual: None,
        }
    }

    fn selected_grids(folds: &[FoldOutput<SvmLearner>]) -> Vec<Vec<HyperParams>> {
        folds.iter().map(|f| vec![f.selected]).collect()
    }

    /// Baseline (`none`) and reject-option outcomes, sharing the baseline fits.
    fn baseline_and_post(
        &self,
        spec: &SensitiveSpec,
        groups: &[Group],
        baseline: &[FoldOutput<SvmLearner>],
        want_none: bool,
        want_post: bool,
    ) -> Result<Vec<Outcome>> {
        let mut out = Vec::new();
        let key = spec.attribute as u64;
        let mut none = self.svm_outcome(Mitigation::None, baseline);
        let mut post = if want_post {
            let cfgs = baseline.iter().map(|f| self.fit_roc(f, groups, key)).collect::<Result<Vec<_>>>()?;
            let folds = baseline
                .iter()
                .zip(&cfgs)
                .map(|(f, c)| self.roc_preds(&f.test, &f.test_scores, groups, c))
                .collect();
            Some(Outcome {
                run: MitigationRun {
                    mitigation: Mitigation::Post,
                    title: String::new(),
                    utility: None,
                    selection: Selection::RejectOption {
                        fold_params: baseline.iter().map(|f| f.selected).collect(),
                        fold_configs: cfgs.iter().map(|c| BinaryTask::ALL.into_iter().zip(*c).collect()).collect(),
                    },
                },
                folds,
                counterfactual: None,
            })
        } else {
            None
        };
        if self.config.counterfactual.enabled {
            let s = indicator(groups);
            let orig = self.per_fold(&append_column(&self.inputs, &s));
            let flip_col: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
            let flip = self.per_fold(&append_column(&self.inputs, &flip_col));
            let cf = self.counterfactual_models(&self.svm, &orig, &flip, groups, &Self::selected_grids(baseline), None)?;
            if want_none {
                none.counterfactual = Some(self.score_consistency(&cf, groups));
            }
            if let Some(post) = post.as_mut() {
                let key = key + 0x10;
                let mut o = Vec::new();
                let mut p = Vec::new();
                for (f, m) in cf.original.iter().enumerate() {
                    let c = self.fit_roc(m, groups, key)?;
                    o.push(self.roc_preds(&m.test, &m.test_scores, groups, &c));
                    p.push(match &cf.flipped {
                        Some(fm) => {
                            let fc = self.fit_roc(&fm[f], &flipped(groups), key + 0x10)?;
                            self.roc_preds(&m.test, &cf.perturbed[f], groups, &fc)
                        }
                        None => self.roc_preds(&m.test, &cf.perturbed[f], &flipped(groups), &c),
                    });
                }
                post.counterfactual = Some(self.consistency(&o, &p, groups));
            }
        }
        if want_none {
            out.push(none);
        }
        out.extend(post);
        Ok(out)
    }

    /// Covariate residualization refit on each outer-train split.
    fn pre(&self, spec: &SensitiveSpec, groups: &[Group], include_proxy: bool) -> Result<Outcome> {
        let mitigation = if include_proxy { Mitigation::PreProxy } else { Mitigation::Pre };
        let inputs = (0..self.outer.k())
            .map(|f| {
                let set = fit_covariates(
                    self.cohort,
                    &self.outer.train(f),
                    spec,
                    include_proxy,
                    self.config.covariate_encoding,
                )?;
                residualize_inputs(self.cohort, &set)
            })
            .collect::<Result<Vec<_>>>()?;
        let folds = self.fit(&self.svm, &inputs, groups, &self.shared_grid(&self.grid))?;
        let mut outcome = self.svm_outcome(mitigation, &folds);
        if self.config.counterfactual.enabled {
            let s = indicator(groups);
            let flip_col: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
            let orig: Vec<_> = inputs.iter().map(|x| append_column(x, &s)).collect();
            let flip: Vec<_> = inputs.iter().map(|x| append_column(x, &flip_col)).collect();
            let cf = self.counterfactual_models(&self.svm, &orig, &flip, groups, &Self::selected_grids(&folds), None)?;
            outcome.counterfactual = Some(self.score_consistency(&cf, groups));
        }
        Ok(outcome)
    }

    /// Adversarial debiasing: one tuned configuration per task, inputs include the attribute.
    fn adversarial(&self, spec: &SensitiveSpec, groups: &[Group]) -> Result<Outcome> {
        let s = indicator(groups);
        let x = append_column(&self.inputs, &s);
        let settings = &self.config.adversarial;
        let key = spec.attribute as u64;
        let tuned = BinaryTask::ALL
            .par_iter()
            .map(|&task| {
                let rows: Vec<usize> = task_rows(&self.labels, &(0..self.labels.len()).collect::<Vec<_>>(), task);
                let xt = x.select_rows(&rows);
                let y: Vec<bool> = rows.iter().map(|&r| task.target(self.labels[r]).unwrap_or(false)).collect();
                let a: Vec<Group> = rows.iter().map(|&r| groups[r]).collect();
                let seed = derive_seed(self.seed, &[KEY_TUNE, key, task.index() as u64]);
                adv_tune(&xt, &y, &a, &settings.grid, settings.tune_folds, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let best_score = |t: &crate::adversarial::AdvTuning| {
            t.scores.iter().find(|s| s.config == t.best).and_then(|s| s.harmonic_mean)
        };
        let learner = AdvLearner { configs: [tuned[0].best, tuned[1].best, tuned[2].best] };
        let inputs = self.per_fold(&x);
        let grids = self.shared_grid(&[()]);
        let folds = self.fit(&learner, &inputs, groups, &grids)?;
        let mut outcome = Outcome {
            run: MitigationRun {
                mitigation: Mitigation::In,
                title: String::new(),
                utility: Some(three_class_utility(&self.labels, &folds)),
                selection: Selection::Adversarial {
                    task_configs: BinaryTask::ALL.into_iter().zip(learner.configs).collect(),
                    tuned_harmonic_mean: tuned.iter().map(best_score).collect(),
                },
            },
            folds: folds.iter().map(|f| score_preds(&self.labels, &f.test, &f.test_scores)).collect(),
            counterfactual: None,
        };
        if self.config.counterfactual.enabled {
            let flip_col: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
            let flip = self.per_fold(&append_column(&self.inputs, &flip_col));
            let cf = self.counterfactual_models(&learner, &inputs, &flip, groups, &grids, Some(folds))?;
            outcome.counterfactual = Some(self.score_consistency(&cf, groups));
        }
        Ok(outcome)
    }

    fn cells(&self, outcome: &Outcome, groups: &[Group]) -> Vec<(BinaryTask, Cell)> {
        BinaryTask::ALL
            .into_iter()
            .map(|task| {
                let folds: Vec<ParityReport> = outcome
                    .folds
                    .iter()
                    .map(|fp| {
                        let t = &fp[task.index()];
                        let actual: Vec<bool> =
                            t.rows.iter().map(|&r| task.target(self.labels[r]).expect("task row")).collect();
                        let g: Vec<Group> = t.rows.iter().map(|&r| groups[r]).collect();
                        parity_report(&confusion_by_group_binary(&t.predicted, &actual, &g))
                    })
                    .collect();
                let cell = Cell {
                    task,
                    mitigation: outcome.run.mitigation,
                    summary: aggregate_folds(&folds),
                    folds,
                    counterfactual: outcome.counterfactual.as_ref().map(|c| ConsistencySummary::of(&c[task.index()])),
                };
                (task, cell)
            })
            .collect()
    }
}

struct CfModels<L: MemberLearner> {
    original: Vec<FoldOutput<L>>,
    /// Perturbed-world scores of each fold's test rows.
    perturbed: Vec<Vec<[f64; 3]>>,
    flipped: Option<Vec<FoldOutput<L>>>,
}

/// Audits an already loaded cohort.
pub fn audit_cohort(config: &AuditConfig, cohort: &Cohort) -> Result<AuditReport> {
    config.validate()?;
    if cohort.is_empty() {
        return Err(Error::Config("cohort is empty".into()));
    }
    let specs: Vec<SensitiveSpec> = config
        .attributes
        .iter()
        .map(|&attribute| SensitiveSpec { attribute, age_threshold: config.age_threshold })
        .collect();
    let inputs = Matrix::from_rows(&cohort.records().iter().map(|r| r.input_row()).collect::<Vec<_>>());
    let grid = config.grid.clone().unwrap_or_else(|| default_grid(inputs.cols()));
    let labels = cohort.labels();
    let strata = cohort.strata(&specs);
    let first_groups = binarize(cohort, &specs[0]);
    let seed = config.seed;
    let probe = CvData { x: Matrix::zeros(0, 0), labels: labels.clone(), strata: strata.clone(), groups: first_groups };
    let outer = outer_folds(&probe, &config.cv, seed)?;
    let audit = Audit { config, cohort, labels, strata, inputs, outer, grid, svm: SvmLearner::default(), seed };

    let want = |m| config.mitigations.contains(&m);
    let baseline = if want(Mitigation::None) || want(Mitigation::Post) {
        info!("fitting baseline ensemble");
        Some(audit.fit(&audit.svm, &audit.per_fold(&audit.inputs), &probe.groups, &audit.shared_grid(&audit.grid))?)
    } else {
        None
    };

    let mut attributes = Vec::with_capacity(specs.len());
    for spec in &specs {
        info!("auditing {}", spec.attribute);
        let groups = binarize(cohort, spec);
        let mut outcomes = Vec::new();
        if let Some(b) = &baseline {
            outcomes.extend(audit.baseline_and_post(spec, &groups, b, want(Mitigation::None), want(Mitigation::Post))?);
        }
        if want(Mitigation::Pre) {
            outcomes.push(audit.pre(spec, &groups, false)?);
        }
        if want(Mitigation::PreProxy) {
            outcomes.push(audit.pre(spec, &groups, true)?);
        }
        if want(Mitigation::In) {
            outcomes.push(audit.adversarial(spec, &groups)?);
        }
        // configured order
        outcomes.sort_by_key(|o| config.mitigations.iter().position(|&m| m == o.run.mitigation));

        let mut cells: Vec<(BinaryTask, usize, Cell)> = Vec::new();
        for (k, o) in outcomes.iter().enumerate() {
            cells.extend(audit.cells(o, &groups).into_iter().map(|(t, c)| (t, k, c)));
        }
        cells.sort_by_key(|(t, k, _)| (*t, *k));
        let proxy = if config.proxy.enabled {
            let seed = derive_seed(seed, &[KEY_PROXY, spec.attribute as u64]);
            Some(proxy_analysis(cohort, spec, &config.proxy.analysis, seed)?)
        } else {
            None
        };
        let n_b = groups.iter().filter(|&&g| g == Group::B).count();
        attributes.push(AttributeReport {
            attribute: spec.attribute,
            groups: spec.group_labels(),
            group_sizes: (groups.len() - n_b, n_b),
            mitigations: outcomes
                .into_iter()
                .map(|o| MitigationRun { title: o.run.mitigation.title(spec.attribute), ..o.run })
                .collect(),
            cells: cells.into_iter().map(|(_, _, c)| c).collect(),
            proxy,
        });
    }

    Ok(AuditReport {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.hash(),
            seed,
            n_records: cohort.len(),
            class_counts: cohort.class_counts(),
            input_names: cohort.input_names(),
        },
        config: config.canonical(),
        attributes,
    })
}
