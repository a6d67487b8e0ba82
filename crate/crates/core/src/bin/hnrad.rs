//! Command-line front end. `--config file.toml` supplies the pipeline
//! settings plus per-subcommand defaults under `[args.<subcommand>]`;
//! explicit flags win.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hn_radiomics::combat::{self, FeatureMatrix, HarmonizeMode};
use hn_radiomics::conventional::{extract_conventional, FEATURE_NAMES};
use hn_radiomics::locator::{locate, override_box, LocatorResult};
use hn_radiomics::metrics::aggregated_dice;
use hn_radiomics::pipeline::{
    assign_folds, batch_extract, crop_patient, cross_validate, mean_cindex, read_clinical, read_risks, run_model,
    write_risks, ArtifactMeta, Cohort, FeatureTable, FoldAssignment, PatientManifest, PipelineConfig, Recipe,
    TrainedModel,
};
use hn_radiomics::radiomics::extract_all;
use hn_radiomics::survival::concordance_index;
use hn_radiomics::volume::{labels, load_mask, load_volume, save_mask, save_volume, LabelMask};
use hn_radiomics::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hnrad",
    version,
    about = "Head-and-neck PET/CT radiomics and survival modelling"
)]
struct Cli {
    /// TOML configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch extraction (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place the head-and-neck box from the PET brain.
    Locate(LocateArgs),
    /// Resample PET, CT and mask onto a box.
    Crop(CropArgs),
    /// Ten conventional PET features per patient.
    ExtractConventional(ExtractArgs),
    /// PET and CT radiomics per patient.
    ExtractRadiomics(ExtractArgs),
    /// ComBat across centres.
    Harmonize(HarmonizeArgs),
    /// Seeded cross-validation folds.
    Folds(FoldsArgs),
    /// Fit a prognostic recipe.
    Fit(FitArgs),
    /// Score patients with a fitted model.
    Predict(PredictArgs),
    /// Per-case and aggregated Dice.
    EvaluateSeg(EvalSegArgs),
    /// C-index of a risk file.
    EvaluatePrognosis(EvalPrognosisArgs),
    /// Print the full default configuration.
    DefaultConfig,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct LocateArgs {
    #[arg(long)]
    pet: PathBuf,
    #[arg(long)]
    ct: PathBuf,
    /// Ground truth for the containment check.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Manual box centre `x,y,z` in mm; skips detection.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    center: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CropArgs {
    #[arg(long)]
    pet: PathBuf,
    #[arg(long)]
    ct: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Output of `locate`.
    #[arg(long = "box")]
    bbox: PathBuf,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ExtractArgs {
    /// Batch mode: CSV with patient_id, center, pet, ct, mask[, truth].
    #[arg(long, conflicts_with_all = ["pet", "ct", "mask"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    pet: Option<PathBuf>,
    #[arg(long)]
    ct: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = "patient")]
    patient_id: String,
    #[arg(long)]
    out: PathBuf,
    /// JSON list of patients that failed (batch mode).
    #[arg(long)]
    failures: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct HarmonizeArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    clinical: PathBuf,
    #[arg(long)]
    test_features: Option<PathBuf>,
    #[arg(long)]
    test_clinical: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_test: Option<PathBuf>,
    /// Fitted estimates as JSON.
    #[arg(long)]
    out_fit: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Joint,
    TrainOnly,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct FoldsArgs {
    #[arg(long)]
    clinical: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecipeArg {
    Conventional,
    RadiomicsCombat,
    Combined,
}

impl From<RecipeArg> for Recipe {
    fn from(r: RecipeArg) -> Self {
        match r {
            RecipeArg::Conventional => Recipe::Conventional,
            RecipeArg::RadiomicsCombat => Recipe::RadiomicsCombat,
            RecipeArg::Combined => Recipe::Combined,
        }
    }
}

#[derive(Args)]
#[command(args_override_self = true)]
struct FitArgs {
    #[arg(long, value_enum)]
    recipe: RecipeArg,
    /// Feature CSVs, joined on patient_id.
    #[arg(long, required = true, num_args = 1..)]
    features: Vec<PathBuf>,
    #[arg(long)]
    clinical: PathBuf,
    /// Unlabelled patients; used by joint ComBat and scored.
    #[arg(long, num_args = 1..)]
    test_features: Vec<PathBuf>,
    #[arg(long)]
    test_clinical: Option<PathBuf>,
    /// Fold CSV for the cross-validated C-index.
    #[arg(long)]
    folds: Option<PathBuf>,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_risks: Option<PathBuf>,
    #[arg(long)]
    out_test_risks: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    features: Vec<PathBuf>,
    #[arg(long)]
    clinical: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EvalSegArgs {
    /// Manifest whose rows have a truth path.
    #[arg(long, conflicts_with_all = ["pred", "truth", "pred_dir", "truth_dir"])]
    manifest: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["pred_dir", "truth_dir"])]
    pred: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Predicted masks, paired with `--truth-dir` by file name.
    #[arg(long, requires = "truth_dir")]
    pred_dir: Option<PathBuf>,
    #[arg(long, requires = "pred_dir")]
    truth_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EvalPrognosisArgs {
    #[arg(long)]
    risks: PathBuf,
    #[arg(long)]
    clinical: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `--config` has to be known before the full parse, which may depend on it.
fn config_path(raw: &[String]) -> Option<PathBuf> {
    raw.iter()
        .enumerate()
        .find_map(|(i, a)| match a.strip_prefix("--config") {
            Some("") => raw.get(i + 1).map(PathBuf::from),
            Some(rest) => rest.strip_prefix('=').map(PathBuf::from),
            None => None,
        })
}

/// Splits the config file into pipeline settings and the argument table.
fn load_config(path: Option<&Path>) -> Result<(PipelineConfig, Option<toml::Table>)> {
    let Some(path) = path else {
        return Ok((PipelineConfig::default(), None));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let args = match table.remove("args") {
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => return Err(Error::Config("`args` must be a table".into())),
        None => None,
    };
    let cfg = PipelineConfig::from_toml_str(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)?;
    Ok((cfg, args))
}

fn value_to_args(key: &str, v: &toml::Value, out: &mut Vec<String>) -> Result<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    match v {
        toml::Value::Boolean(true) => out.push(flag),
        toml::Value::Boolean(false) => {}
        toml::Value::String(s) => out.extend([flag, s.clone()]),
        toml::Value::Integer(i) => out.extend([flag, i.to_string()]),
        toml::Value::Float(f) => out.extend([flag, f.to_string()]),
        toml::Value::Array(items) => {
            out.push(flag);
            for item in items {
                match item {
                    toml::Value::String(s) => out.push(s.clone()),
                    other => out.push(other.to_string()),
                }
            }
        }
        other => return Err(Error::Config(format!("unsupported value for {key}: {other}"))),
    }
    Ok(())
}

/// Inserts config-file arguments right after the subcommand. Flags given
/// explicitly are left out of the inserted set.
fn with_config_args(raw: Vec<String>, args: &toml::Table) -> Result<Vec<String>> {
    let sub_names = [
        "locate",
        "crop",
        "extract-conventional",
        "extract-radiomics",
        "harmonize",
        "folds",
        "fit",
        "predict",
        "evaluate-seg",
        "evaluate-prognosis",
    ];
    let Some(pos) = raw.iter().position(|a| sub_names.contains(&a.as_str())) else {
        return Ok(raw);
    };
    let key = raw[pos].clone();
    let Some(section) = args.get(&key).or_else(|| args.get(&key.replace('-', "_"))) else {
        return Ok(raw);
    };
    let toml::Value::Table(section) = section else {
        return Err(Error::Config(format!("args.{key} must be a table")));
    };
    let given = |flag: &str| {
        raw[pos + 1..]
            .iter()
            .any(|a| a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut extra = Vec::new();
    for (k, v) in section {
        if !given(&format!("--{}", k.replace('_', "-"))) {
            value_to_args(k, v, &mut extra)?;
        }
    }
    let mut out = raw[..=pos].to_vec();
    out.extend(extra);
    out.extend(raw[pos + 1..].iter().cloned());
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_features(paths: &[PathBuf]) -> Result<FeatureTable> {
    let mut it = paths.iter();
    let first = it.next().ok_or_else(|| Error::Invalid("no feature file".into()))?;
    let mut t = FeatureTable::read_csv(first)?;
    for p in it {
        t = t.join(&FeatureTable::read_csv(p)?)?;
    }
    Ok(t)
}

fn cohort(features: &[PathBuf], clinical: &Path) -> Result<Cohort> {
    Cohort::new(&read_clinical(clinical)?, &read_features(features)?)
}

#[derive(Serialize)]
struct Located {
    meta: ArtifactMeta,
    #[serde(flatten)]
    result: LocatorResult,
}

#[derive(Serialize)]
struct ModelArtifact<'a> {
    meta: ArtifactMeta,
    model: &'a TrainedModel,
}

fn run(cli: Cli, cfg: PipelineConfig) -> Result<()> {
    let meta = cfg.meta();
    let conventional = cli.command_name() == "extract-conventional";
    match cli.command {
        Command::DefaultConfig => print!("{}", cfg.to_toml_string()?),
        Command::Locate(a) => {
            let pet = load_volume(&a.pet)?;
            let result = match a.center {
                Some(c) => override_box([c[0], c[1], c[2]], &cfg.locator),
                None => {
                    let ct = load_volume(&a.ct)?;
                    let mask = a.mask.as_ref().map(load_mask).transpose()?;
                    locate(&pet, &ct, mask.as_ref(), &cfg.locator)
                }
            };
            if result.needs_review() {
                log::warn!("box needs review: {:?}", result.message);
            }
            write_json(&a.out, &Located { meta, result })?;
        }
        Command::Crop(a) => {
            let text = std::fs::read_to_string(&a.bbox).map_err(|e| Error::Config(e.to_string()))?;
            let loc: serde_json::Value = serde_json::from_str(&text)?;
            let bbox = serde_json::from_value(loc["box"].clone())
                .map_err(|_| Error::Schema(format!("{} has no box", a.bbox.display())))?;
            let c = crop_patient(
                &load_volume(&a.pet)?,
                &load_volume(&a.ct)?,
                &load_mask(&a.mask)?,
                &bbox,
                a.spacing.unwrap_or(cfg.extract.crop_spacing_mm),
            )?;
            std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Config(e.to_string()))?;
            save_volume(&c.pet, a.out_dir.join("pet.nii.gz"))?;
            save_volume(&c.ct, a.out_dir.join("ct.nii.gz"))?;
            save_mask(&c.mask, a.out_dir.join("mask.nii.gz"))?;
        }
        Command::ExtractConventional(a) | Command::ExtractRadiomics(a) if a.manifest.is_some() => {
            let manifest = PatientManifest::read_csv(a.manifest.as_ref().expect("checked"))?;
            manifest.check_files()?;
            if manifest.entries.is_empty() {
                return Err(Error::Invalid("empty manifest".into()));
            }
            let batch = batch_extract(&manifest.entries, &cfg)?;
            if batch.features.is_empty() {
                return Err(Error::Pipeline {
                    stage: "extract".into(),
                    message: "every patient failed".into(),
                });
            }
            let table = if conventional {
                batch.conventional_table()?
            } else {
                batch.radiomics_table()?
            };
            table.write_csv(&a.out, Some(&meta))?;
            if let Some(p) = &a.failures {
                write_json(p, &batch.failures)?;
            }
            eprintln!("{} rows, {} failures", table.len(), batch.failures.len());
        }
        Command::ExtractConventional(a) => {
            let need =
                |p: &Option<PathBuf>, n: &str| p.clone().ok_or_else(|| Error::Invalid(format!("--{n} is required")));
            let pet = load_volume(need(&a.pet, "pet")?)?;
            let mask = load_mask(need(&a.mask, "mask")?)?;
            let f = extract_conventional(&pet, &mask, &cfg.conventional)?;
            let mut t = FeatureTable::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect());
            t.push_row(&a.patient_id, f.values().to_vec())?;
            t.write_csv(&a.out, Some(&meta))?;
        }
        Command::ExtractRadiomics(a) => {
            let need =
                |p: &Option<PathBuf>, n: &str| p.clone().ok_or_else(|| Error::Invalid(format!("--{n} is required")));
            let pet = load_volume(need(&a.pet, "pet")?)?;
            let ct = load_volume(need(&a.ct, "ct")?)?;
            let mask = load_mask(need(&a.mask, "mask")?)?;
            let v = extract_all(&pet, &ct, &mask, &cfg.radiomics)?;
            let mut t = FeatureTable::new(v.names().map(str::to_string).collect());
            t.push_row(&a.patient_id, v.features.iter().map(|(_, x)| Some(*x)).collect())?;
            t.write_csv(&a.out, Some(&meta))?;
        }
        Command::Harmonize(a) => {
            let mode = match a.mode {
                Some(Mode::Joint) => HarmonizeMode::Joint,
                Some(Mode::TrainOnly) => HarmonizeMode::TrainOnly,
                None => cfg.model.combat_mode,
            };
            let to_matrix = |features: &Path, clinical: &Path| -> Result<FeatureMatrix> {
                let c = cohort(&[features.to_path_buf()], clinical)?;
                let values = c
                    .features
                    .values
                    .iter()
                    .zip(c.ids())
                    .map(|(r, id)| {
                        r.iter()
                            .map(|v| v.ok_or_else(|| Error::Schema(format!("{id} has missing values"))))
                            .collect()
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                Ok(FeatureMatrix {
                    patient_ids: c.ids().to_vec(),
                    feature_names: c.features.names.clone(),
                    values,
                    center: c.clinical.iter().map(|r| r.center.clone()).collect(),
                    covariates: c.clinical.iter().map(|r| r.covariates).collect(),
                })
            };
            let train = to_matrix(&a.features, &a.clinical)?;
            let test = match (&a.test_features, &a.test_clinical) {
                (Some(f), Some(c)) => Some(to_matrix(f, c)?),
                (None, None) => None,
                _ => return Err(Error::Invalid("--test-features and --test-clinical go together".into())),
            };
            let save = |m: &FeatureMatrix, p: &Path| -> Result<()> {
                let mut t = FeatureTable::new(m.feature_names.clone());
                for (id, r) in m.patient_ids.iter().zip(&m.values) {
                    t.push_row(id, r.iter().map(|&v| Some(v)).collect())?;
                }
                t.write_csv(p, Some(&meta))
            };
            let (tr, te, fit) = match (test, mode) {
                (None, _) => {
                    let fit = combat::fit(&train, &cfg.model.combat)?;
                    (fit.transform(&train)?.0, None, fit)
                }
                (Some(te), HarmonizeMode::Joint) => {
                    let (a, b, f) = combat::joint_fit_transform(&train, &te, &cfg.model.combat)?;
                    (a, Some(b), f)
                }
                (Some(te), HarmonizeMode::TrainOnly) => {
                    let (a, b, f, unseen) = combat::train_only_fit_transform(&train, &te, &cfg.model.combat)?;
                    if !unseen.is_empty() {
                        log::warn!("{} test patient(s) from unseen centres left unchanged", unseen.len());
                    }
                    (a, Some(b), f)
                }
            };
            save(&tr, &a.out)?;
            if let (Some(te), Some(p)) = (te, &a.out_test) {
                save(&te, p)?;
            }
            if let Some(p) = &a.out_fit {
                write_json(p, &serde_json::json!({ "meta": meta, "fit": fit }))?;
            }
        }
        Command::Folds(a) => {
            let clinical = read_clinical(&a.clinical)?;
            let pairs: Vec<(String, String)> = clinical
                .iter()
                .map(|c| (c.patient_id.clone(), c.center.clone()))
                .collect();
            let folds = assign_folds(&pairs, cfg.seed, &cfg.folds)?;
            folds.write_csv(&a.out)?;
            meta.write_sidecar(&a.out)?;
            eprintln!("fold sizes {:?}", folds.sizes());
        }
        Command::Fit(a) => {
            let recipe = Recipe::from(a.recipe);
            let train = cohort(&a.features, &a.clinical)?;
            let test = match (a.test_features.is_empty(), &a.test_clinical) {
                (true, None) => None,
                (false, Some(c)) => Some(cohort(&a.test_features, c)?),
                _ => return Err(Error::Invalid("--test-features and --test-clinical go together".into())),
            };
            let mut run = run_model(recipe, &train, test.as_ref(), &cfg)?;
            if let Some(p) = &a.folds {
                let folds = FoldAssignment::read_csv(p, cfg.seed)?;
                let cv = cross_validate(recipe, &train, &folds, &cfg)?;
                eprintln!("mean fold C-index {:?}", mean_cindex(&cv));
                run.trained.cv_cindex = Some(cv);
            }
            write_json(
                &a.out_model,
                &ModelArtifact {
                    meta: meta.clone(),
                    model: &run.trained,
                },
            )?;
            if let Some(p) = &a.out_risks {
                write_risks(p, &run.train_risks, Some(&meta))?;
            }
            if let Some(p) = &a.out_test_risks {
                write_risks(p, &run.test_risks, Some(&meta))?;
            }
            eprintln!(
                "features {:?}; test C-index {:?}",
                run.trained.model.feature_names, run.trained.test_cindex
            );
        }
        Command::Predict(a) => {
            let text = std::fs::read_to_string(&a.model).map_err(|e| Error::Config(e.to_string()))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let model: TrainedModel = serde_json::from_value(v["model"].clone())?;
            let c = cohort(&a.features, &a.clinical)?.without_survival();
            let risks = model.predict(&c)?;
            write_risks(&a.out, &risks, Some(&meta))?;
        }
        Command::EvaluateSeg(a) => {
            let cases = match &a.manifest {
                Some(m) => PatientManifest::read_csv(m)?
                    .entries
                    .into_iter()
                    .filter_map(|e| e.truth.clone().map(|t| (e, t)))
                    .map(|(e, t)| Ok((e.patient_id, load_mask(&e.mask)?, load_mask(t)?)))
                    .collect::<Result<Vec<_>>>()?,
                None => match (&a.pred_dir, &a.truth_dir, &a.pred, &a.truth) {
                    (Some(pd), Some(td), _, _) => paired_masks(pd, td)?,
                    (_, _, Some(p), Some(t)) => vec![("case".to_string(), load_mask(p)?, load_mask(t)?)],
                    _ => {
                        return Err(Error::Invalid(
                            "evaluate-seg needs --manifest, --pred-dir/--truth-dir or --pred/--truth".into(),
                        ))
                    }
                },
            };
            let report = aggregated_dice(&cases, &[labels::GTVP, labels::GTVN])?;
            write_json(&a.out, &serde_json::json!({ "meta": meta, "report": report }))?;
            eprintln!("aggregated Dice {:?}", report.aggregated);
        }
        Command::EvaluatePrognosis(a) => {
            let risks = read_risks(&a.risks)?;
            let clinical = read_clinical(&a.clinical)?;
            let (r, rec): (Vec<f64>, Vec<_>) = risks
                .iter()
                .filter_map(|(id, r)| {
                    clinical
                        .iter()
                        .find(|c| &c.patient_id == id)
                        .and_then(|c| c.survival)
                        .map(|s| (*r, s))
                })
                .unzip();
            let c = concordance_index(&r, &rec)?;
            println!("C-index {c:.4} over {} patients", r.len());
            if let Some(p) = &a.out {
                write_json(p, &serde_json::json!({ "meta": meta, "c_index": c, "n": r.len() }))?;
            }
        }
    }
    Ok(())
}

/// Masks in `pred_dir` matched to the same file name in `truth_dir`.
fn paired_masks(pred_dir: &Path, truth_dir: &Path) -> Result<Vec<(String, LabelMask, LabelMask)>> {
    let read = |d: &Path| std::fs::read_dir(d).map_err(|e| Error::io(d, e));
    let mut names: Vec<String> = read(pred_dir)?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".nii") || n.ends_with(".nii.gz"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Invalid(format!("no NIfTI masks in {}", pred_dir.display())));
    }
    names
        .into_iter()
        .map(|n| {
            let truth = truth_dir.join(&n);
            if !truth.exists() {
                return Err(Error::Invalid(format!("no ground truth {} for {n}", truth.display())));
            }
            let id = n.trim_end_matches(".gz").trim_end_matches(".nii").to_string();
            Ok((id, load_mask(pred_dir.join(&n))?, load_mask(&truth)?))
        })
        .collect()
}

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Command::ExtractConventional(_) => "extract-conventional",
            Command::ExtractRadiomics(_) => "extract-radiomics",
            _ => "",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let raw: Vec<String> = std::env::args().collect();
    let result = (|| {
        let (mut cfg, args) = load_config(config_path(&raw).as_deref())?;
        let cli = match args {
            Some(t) => Cli::parse_from(with_config_args(raw.clone(), &t)?),
            None => Cli::parse_from(&raw),
        };
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(w) = cli.workers {
            cfg.extract.workers = w;
        }
        run(cli, cfg)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
