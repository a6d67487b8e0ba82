//! The three prognostic recipes.
//!
//! * `conventional`: univariate C-index filter, correlation pruning, Cox.
//! * `radiomics-combat`: ComBat on radiomics, then the same filters, Lasso-Cox
//!   and an unpenalised Cox refit.
//! * `combined`: the radiomics selection without ComBat, joined with the
//!   conventional selection, then one multivariate Cox model.

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::folds::FoldAssignment;
use super::table::{ArtifactMeta, ClinicalRecord, FeatureTable};
use crate::combat::{self, CombatFit, CombatOptions, FeatureMatrix, HarmonizeMode};
use crate::conventional::FEATURE_NAMES;
use crate::error::{Error, Result};
use crate::survival::{
    concordance_index, correlation_prune, cox_fit_with, lasso_cox, univariate_filter, CoxModel, CoxOptions,
    LassoConfig, SelectionReport, SelectionThresholds, SurvivalRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    Conventional,
    RadiomicsCombat,
    Combined,
}

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::Conventional => "conventional",
            Recipe::RadiomicsCombat => "radiomics-combat",
            Recipe::Combined => "combined",
        }
    }
}

/// Treatment of missing feature values in training rows. Scored rows are
/// always filled with training medians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Exclude incomplete training rows.
    Drop,
    /// Fill with the training median.
    #[default]
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub selection: SelectionThresholds,
    pub lasso: LassoConfig,
    pub combat_mode: HarmonizeMode,
    pub combat: CombatOptions,
    pub cox: CoxOptions,
    pub missing: MissingPolicy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            selection: SelectionThresholds::default(),
            lasso: LassoConfig::default(),
            combat_mode: HarmonizeMode::Joint,
            combat: CombatOptions::default(),
            cox: CoxOptions::default(),
            missing: MissingPolicy::Median,
        }
    }
}

/// Clinical rows and feature rows for the same patients, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub clinical: Vec<ClinicalRecord>,
    pub features: FeatureTable,
}

impl Cohort {
    /// Patients of `features`, in its order, with their clinical rows.
    pub fn new(clinical: &[ClinicalRecord], features: &FeatureTable) -> Result<Self> {
        let rows = features
            .patient_ids
            .iter()
            .map(|id| {
                clinical
                    .iter()
                    .find(|c| &c.patient_id == id)
                    .cloned()
                    .ok_or_else(|| Error::Schema(format!("patient {id} has no clinical row")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            clinical: rows,
            features: features.clone(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.features.patient_ids
    }

    pub fn len(&self) -> usize {
        self.clinical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clinical.is_empty()
    }

    pub fn subset(&self, ids: &[String]) -> Result<Cohort> {
        let features = self.features.rows_for(ids)?;
        Cohort::new(&self.clinical, &features)
    }

    pub fn without_survival(&self) -> Cohort {
        let mut c = self.clone();
        for r in &mut c.clinical {
            r.survival = None;
        }
        c
    }
}

/// Conventional columns present in `table`.
pub fn conventional_names(table: &FeatureTable) -> Vec<String> {
    FEATURE_NAMES
        .iter()
        .filter(|n| table.column_index(n).is_some())
        .map(|n| n.to_string())
        .collect()
}

/// Columns named `PET-…` or `CT-…`.
pub fn radiomics_names(table: &FeatureTable) -> Vec<String> {
    table
        .names
        .iter()
        .filter(|n| n.starts_with("PET-") || n.starts_with("CT-"))
        .cloned()
        .collect()
}

/// Fitted recipe with everything needed to score new patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub recipe: Recipe,
    pub meta: ArtifactMeta,
    pub model: CoxModel,
    /// Selection trace of the recipe's main feature group.
    pub selection: SelectionReport,
    /// Conventional selection joined in by the combined recipe.
    pub conventional_selection: Option<SelectionReport>,
    /// Training medians used to fill missing inputs.
    pub medians: Vec<(String, f64)>,
    /// Columns removed before selection (no values or no variance).
    pub dropped: Vec<String>,
    pub combat: Option<CombatFit>,
    /// Test patients whose centre had no ComBat estimates.
    #[serde(default)]
    pub unharmonized: Vec<String>,
    pub training_patients: usize,
    pub cv_cindex: Option<Vec<Option<f64>>>,
    pub test_cindex: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub trained: TrainedModel,
    pub train_risks: Vec<(String, f64)>,
    pub test_risks: Vec<(String, f64)>,
}

fn stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Pipeline { .. } => e,
        other => Error::Pipeline {
            stage: stage.to_string(),
            message: other.to_string(),
        },
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Dense block of one feature group.
struct Block {
    names: Vec<String>,
    /// Rows aligned with the cohort.
    rows: Vec<Vec<f64>>,
    /// Whether the row had no missing value before filling.
    complete: Vec<bool>,
}

/// Medians over `train` for `names`; columns without any value are dropped.
fn group_medians(train: &Cohort, names: &[String], dropped: &mut Vec<String>) -> Result<Vec<(String, f64)>> {
    let t = train.features.select(names)?;
    let mut out = Vec::new();
    for (j, n) in names.iter().enumerate() {
        match median(t.column(j).into_iter().flatten().collect()) {
            Some(m) => out.push((n.clone(), m)),
            None => dropped.push(n.clone()),
        }
    }
    Ok(out)
}

fn fill(cohort: &Cohort, medians: &[(String, f64)]) -> Result<Block> {
    let names: Vec<String> = medians.iter().map(|(n, _)| n.clone()).collect();
    let t = cohort.features.select(&names)?;
    let mut complete = Vec::with_capacity(t.len());
    let rows = t
        .values
        .iter()
        .map(|r| {
            complete.push(r.iter().all(Option::is_some));
            r.iter().zip(medians).map(|(v, (_, m))| v.unwrap_or(*m)).collect()
        })
        .collect();
    Ok(Block { names, rows, complete })
}

/// Training rows usable for fitting: outcome present and, under `Drop`,
/// complete.
fn fit_rows(cohort: &Cohort, complete: &[bool], policy: MissingPolicy) -> Vec<usize> {
    (0..cohort.len())
        .filter(|&i| cohort.clinical[i].survival.is_some())
        .filter(|&i| policy == MissingPolicy::Median || complete[i])
        .collect()
}

fn pick(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

fn records(cohort: &Cohort, idx: &[usize]) -> Vec<SurvivalRecord> {
    idx.iter()
        .map(|&i| cohort.clinical[i].survival.expect("fit rows carry survival"))
        .collect()
}

fn drop_constant(names: &mut Vec<String>, rows: &mut [Vec<f64>], dropped: &mut Vec<String>) {
    let keep: Vec<usize> = (0..names.len())
        .filter(|&j| {
            let first = rows.first().map_or(0.0, |r| r[j]);
            rows.iter().any(|r| r[j] != first)
        })
        .collect();
    for j in (0..names.len()).filter(|j| !keep.contains(j)) {
        dropped.push(names[j].clone());
    }
    *names = keep.iter().map(|&j| names[j].clone()).collect();
    for r in rows.iter_mut() {
        *r = keep.iter().map(|&j| r[j]).collect();
    }
}

/// Univariate filter then correlation pruning, optionally followed by
/// Lasso-Cox. Returns the report and, with Lasso, the refitted model.
fn select(
    names: &[String],
    rows: &[Vec<f64>],
    rec: &[SurvivalRecord],
    cfg: &PipelineConfig,
    with_lasso: bool,
) -> Result<(SelectionReport, Option<CoxModel>)> {
    let th = cfg.model.selection;
    let (scores, kept) = univariate_filter(names, rows, rec, th.min_cindex);
    if kept.is_empty() {
        return Err(Error::Pipeline {
            stage: "univariate".into(),
            message: format!("no feature has training C-index above {}", th.min_cindex),
        });
    }
    let cols: Vec<Vec<f64>> = (0..names.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let col = |n: &str| -> &[f64] {
        let j = names.iter().position(|x| x == n).expect("known feature");
        &cols[j]
    };
    let ranked: Vec<(String, f64)> = scores.iter().filter(|(n, _)| kept.contains(n)).cloned().collect();
    let pruned = correlation_prune(&ranked, col, th.max_abs_correlation);
    // keep input order for readability
    let pruned: Vec<String> = names.iter().filter(|n| pruned.contains(n)).cloned().collect();
    let mut report = SelectionReport {
        univariate: scores,
        kept_after_univariate: kept,
        kept_after_correlation: pruned.clone(),
        kept_after_lasso: None,
        thresholds: th,
        lambda: None,
    };
    if !with_lasso {
        return Ok((report, None));
    }
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            pruned
                .iter()
                .map(|n| r[names.iter().position(|x| x == n).unwrap()])
                .collect()
        })
        .collect();
    let lasso_cfg = LassoConfig {
        seed: cfg.seed,
        ties: cfg.model.cox.ties,
        ..cfg.model.lasso
    };
    let res = lasso_cox(&pruned, &sub, rec, &lasso_cfg).map_err(|e| stage("lasso", e))?;
    report.kept_after_lasso = Some(res.selected.clone());
    report.lambda = Some(res.lambda);
    Ok((report, Some(res.model)))
}

fn cindex_of(cohort: &Cohort, risks: &[(String, f64)]) -> Option<f64> {
    let (r, rec): (Vec<f64>, Vec<SurvivalRecord>) = cohort
        .clinical
        .iter()
        .zip(risks)
        .filter_map(|(c, (_, r))| c.survival.map(|s| (*r, s)))
        .unzip();
    concordance_index(&r, &rec).ok()
}

fn combat_matrix(cohort: &Cohort, block: &Block, names: &[String], idx: &[usize]) -> FeatureMatrix {
    let cols: Vec<usize> = names
        .iter()
        .map(|n| block.names.iter().position(|x| x == n).expect("known feature"))
        .collect();
    FeatureMatrix {
        patient_ids: idx.iter().map(|&i| cohort.ids()[i].clone()).collect(),
        feature_names: names.to_vec(),
        values: idx
            .iter()
            .map(|&i| cols.iter().map(|&j| block.rows[i][j]).collect())
            .collect(),
        center: idx.iter().map(|&i| cohort.clinical[i].center.clone()).collect(),
        covariates: idx.iter().map(|&i| cohort.clinical[i].covariates).collect(),
    }
}

impl TrainedModel {
    /// Risk score per patient of `cohort`, in its order.
    pub fn predict(&self, cohort: &Cohort) -> Result<Vec<(String, f64)>> {
        let scored = self.prepare(cohort)?;
        scored
            .rows
            .iter()
            .zip(cohort.ids())
            .map(|(r, id)| Ok((id.clone(), self.model.risk_score(&scored.names, r)?)))
            .collect()
    }

    /// Fills medians and applies the frozen harmonisation.
    fn prepare(&self, cohort: &Cohort) -> Result<Block> {
        let mut block = fill(cohort, &self.medians)?;
        if let Some(fit) = &self.combat {
            let all: Vec<usize> = (0..cohort.len()).collect();
            let m = combat_matrix(cohort, &block, &fit.feature_names, &all);
            let (h, unseen) = fit.transform(&m)?;
            if !unseen.is_empty() {
                log::warn!("{} patient(s) from centres without ComBat estimates", unseen.len());
            }
            block = Block {
                names: h.feature_names,
                complete: block.complete,
                rows: h.values,
            };
        }
        Ok(block)
    }
}

/// Fits `recipe` on the patients of `train` that have outcomes and scores
/// `test`. Test outcomes are used only for the reported C-index.
pub fn run_model(recipe: Recipe, train: &Cohort, test: Option<&Cohort>, cfg: &PipelineConfig) -> Result<ModelRun> {
    let policy = cfg.model.missing;
    let empty_test;
    let test = match test {
        Some(t) => t,
        None => {
            empty_test = Cohort {
                clinical: Vec::new(),
                features: FeatureTable::new(train.features.names.clone()),
            };
            &empty_test
        }
    };
    let mut dropped = Vec::new();
    let conv_names = conventional_names(&train.features);
    let rad_names = radiomics_names(&train.features);
    let need = |names: &[String], what: &str| -> Result<()> {
        if names.is_empty() {
            Err(Error::Pipeline {
                stage: "features".into(),
                message: format!("no {what} columns in the feature table"),
            })
        } else {
            Ok(())
        }
    };

    let mut medians: Vec<(String, f64)>;
    let mut combat_fit = None;
    let mut unharmonized = Vec::new();
    let mut conventional_selection = None;
    let (selection, model) = match recipe {
        Recipe::Conventional => {
            need(&conv_names, "conventional")?;
            medians = group_medians(train, &conv_names, &mut dropped)?;
            let b = fill(train, &medians)?;
            let idx = fit_rows(train, &b.complete, policy);
            let (mut names, mut rows) = (b.names.clone(), pick(&b.rows, &idx));
            drop_constant(&mut names, &mut rows, &mut dropped);
            let rec = records(train, &idx);
            let (report, _) = select(&names, &rows, &rec, cfg, false)?;
            let model = fit_on(&report.kept_after_correlation, &names, &rows, &rec, &cfg.model.cox)?;
            (report, model)
        }
        Recipe::RadiomicsCombat => {
            need(&rad_names, "radiomics")?;
            medians = group_medians(train, &rad_names, &mut dropped)?;
            let btr = fill(train, &medians)?;
            let bte = fill(test, &medians)?;
            let idx = fit_rows(train, &btr.complete, policy);
            let tr_m = combat_matrix(train, &btr, &btr.names, &idx);
            let te_all: Vec<usize> = (0..test.len()).collect();
            let te_m = combat_matrix(test, &bte, &bte.names, &te_all);
            // harmonisation needs variance in every column
            let pool = match cfg.model.combat_mode {
                HarmonizeMode::Joint => tr_m.concat(&te_m).map_err(|e| stage("combat", e))?,
                HarmonizeMode::TrainOnly => tr_m.clone(),
            };
            let mut names = pool.feature_names.clone();
            let mut pool_rows = pool.values.clone();
            drop_constant(&mut names, &mut pool_rows, &mut dropped);
            medians.retain(|(n, _)| names.contains(n));
            let tr_m = combat_matrix(train, &fill(train, &medians)?, &names, &idx);
            let te_m = combat_matrix(test, &fill(test, &medians)?, &names, &te_all);
            let opts: CombatOptions = cfg.model.combat;
            let (h_tr, fit) = match cfg.model.combat_mode {
                HarmonizeMode::Joint => {
                    let (a, _, f) = combat::joint_fit_transform(&tr_m, &te_m, &opts).map_err(|e| stage("combat", e))?;
                    (a, f)
                }
                HarmonizeMode::TrainOnly => {
                    let (a, _, f, unseen) =
                        combat::train_only_fit_transform(&tr_m, &te_m, &opts).map_err(|e| stage("combat", e))?;
                    unharmonized = unseen;
                    (a, f)
                }
            };
            combat_fit = Some(fit);
            let rec = records(train, &idx);
            let (report, model) = select(&names, &h_tr.values, &rec, cfg, true)?;
            (report, model.expect("lasso returns a model"))
        }
        Recipe::Combined => {
            need(&conv_names, "conventional")?;
            need(&rad_names, "radiomics")?;
            let all_names: Vec<String> = conv_names.iter().chain(&rad_names).cloned().collect();
            medians = group_medians(train, &all_names, &mut dropped)?;
            let b = fill(train, &medians)?;
            let idx = fit_rows(train, &b.complete, policy);
            let (mut names, mut rows) = (b.names.clone(), pick(&b.rows, &idx));
            drop_constant(&mut names, &mut rows, &mut dropped);
            let rec = records(train, &idx);
            let split = |keep_conv: bool| -> (Vec<String>, Vec<Vec<f64>>) {
                let cols: Vec<usize> = (0..names.len())
                    .filter(|&j| conv_names.contains(&names[j]) == keep_conv)
                    .collect();
                (
                    cols.iter().map(|&j| names[j].clone()).collect(),
                    rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect(),
                )
            };
            let (cn, cr) = split(true);
            let (rn, rr) = split(false);
            let (conv_report, _) =
                select(&cn, &cr, &rec, cfg, false).map_err(|e| stage("conventional selection", e))?;
            let (rad_report, _) = select(&rn, &rr, &rec, cfg, true).map_err(|e| stage("radiomics selection", e))?;
            let union: Vec<String> = conv_report
                .kept_after_correlation
                .iter()
                .chain(rad_report.kept_after_lasso.iter().flatten())
                .cloned()
                .collect();
            let model = fit_on(&union, &names, &rows, &rec, &cfg.model.cox)?;
            conventional_selection = Some(conv_report);
            (rad_report, model)
        }
    };
    if !model.converged {
        log::warn!("{}: final Cox model did not converge", recipe.name());
    }
    let training_patients = train.clinical.iter().filter(|c| c.survival.is_some()).count();
    let mut trained = TrainedModel {
        recipe,
        meta: cfg.meta(),
        model,
        selection,
        conventional_selection,
        medians,
        dropped,
        combat: combat_fit,
        unharmonized,
        training_patients,
        cv_cindex: None,
        test_cindex: None,
    };
    let train_risks = trained.predict(train)?;
    let test_risks = trained.predict(test)?;
    trained.test_cindex = cindex_of(test, &test_risks);
    Ok(ModelRun {
        trained,
        train_risks,
        test_risks,
    })
}

fn fit_on(
    chosen: &[String],
    names: &[String],
    rows: &[Vec<f64>],
    rec: &[SurvivalRecord],
    opts: &CoxOptions,
) -> Result<CoxModel> {
    if chosen.is_empty() {
        return Err(Error::Pipeline {
            stage: "multivariate".into(),
            message: "no features left for the Cox model".into(),
        });
    }
    let cols: Vec<usize> = chosen
        .iter()
        .map(|n| names.iter().position(|x| x == n).expect("known feature"))
        .collect();
    let sub: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
    cox_fit_with(chosen, &sub, rec, opts).map_err(|e| stage("multivariate", e))
}

/// Held-out C-index per fold: each fold is scored by a model fitted on the
/// other folds. Folds that cannot be fitted or scored give `None`.
pub fn cross_validate(
    recipe: Recipe,
    train: &Cohort,
    folds: &FoldAssignment,
    cfg: &PipelineConfig,
) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::new();
    for f in 1..=folds.n_folds() {
        let held: Vec<String> = train
            .ids()
            .iter()
            .filter(|id| folds.fold_of(id) == Some(f))
            .cloned()
            .collect();
        let rest: Vec<String> = train
            .ids()
            .iter()
            .filter(|id| folds.fold_of(id).is_some_and(|g| g != f))
            .cloned()
            .collect();
        let run = run_model(recipe, &train.subset(&rest)?, Some(&train.subset(&held)?), cfg);
        match run {
            Ok(r) => out.push(r.trained.test_cindex),
            Err(e) => {
                log::warn!("{} fold {f}: {e}", recipe.name());
                out.push(None);
            }
        }
    }
    Ok(out)
}

/// Mean of the scored folds.
pub fn mean_cindex(scores: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = scores.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
