use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clarifuse::eval::{
    corrupt_labeled, corrupt_scores, evaluate_mode, generate_synthetic, learn_all,
    mean_average_precision, average_precision, rank_instances, select_alpha, AlphaCriterion,
    ClassProfile, CorruptionSpec, FusionMode, SynthSpec, DEFAULT_ALPHA_GRID,
};
use clarifuse::{
    build_bank, ClaritySolution64, LabeledInstance64, OptimizerConfig64, Sharpness, TrainingBank64,
};
use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::*;
use crate::manifest::RunManifest;
use crate::table::{
    read_label_columns, read_ranking, read_solutions, write_ranking, write_solutions, ScoreTable,
};
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn optimizer(alpha: f64, opt: &OptimizerArgs) -> Result<OptimizerConfig64> {
    let mut cfg = OptimizerConfig64::new(Sharpness::new(alpha)?);
    cfg.eta = opt.eta;
    cfg.tol = opt.tol;
    cfg.max_iters = opt.max_iters as usize;
    cfg.validate()?;
    Ok(cfg)
}

fn record_optimizer(manifest: &mut RunManifest, opt: &OptimizerArgs) {
    manifest
        .param("eta", opt.eta)
        .param("tol", opt.tol)
        .param("max_iters", opt.max_iters);
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn broadcast(name: &str, values: &[f64], m: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; m]),
        n if n == m => Ok(values.to_vec()),
        n => Err(usage(format!("--{name} takes 1 or {m} values, got {n}"))),
    }
}

fn synth_spec(a: &SynthArgs, n_test: usize, seed: u64) -> Result<SynthSpec> {
    let m = a.m as usize;
    let pm = broadcast("pos-mean", &a.pos_mean, m)?;
    let nm = broadcast("neg-mean", &a.neg_mean, m)?;
    let ps = broadcast("pos-std", &a.pos_std, m)?;
    let ns = broadcast("neg-std", &a.neg_std, m)?;
    Ok(SynthSpec {
        classifiers: (0..m)
            .map(|k| ClassProfile {
                pos_mean: pm[k],
                pos_std: ps[k],
                neg_mean: nm[k],
                neg_std: ns[k],
            })
            .collect(),
        n_train_pos: a.n_train_pos,
        n_train_neg: a.n_train_neg,
        n_test,
        test_positive_fraction: a.test_pos_fraction,
        seed,
    })
}

fn record_synth(manifest: &mut RunManifest, a: &SynthArgs) {
    manifest
        .param("m", a.m)
        .param("n_train_pos", a.n_train_pos)
        .param("n_train_neg", a.n_train_neg)
        .param("n_test", a.n_test)
        .param("test_pos_fraction", a.test_pos_fraction)
        .param("pos_mean", join(&a.pos_mean))
        .param("neg_mean", join(&a.neg_mean))
        .param("pos_std", join(&a.pos_std))
        .param("neg_std", join(&a.neg_std));
}

fn bank_rows(bank: &TrainingBank64) -> Vec<LabeledInstance64> {
    let pos = bank.positives().iter().map(|s| LabeledInstance64::new(s.clone(), true.into()));
    let neg = bank.negatives().iter().map(|s| LabeledInstance64::new(s.clone(), false.into()));
    pos.chain(neg).collect()
}

pub fn synth(cmd: &SynthCmd, out: &mut dyn Write) -> Result<()> {
    let spec = synth_spec(&cmd.synth, cmd.synth.n_test, cmd.seed)?;
    let (bank, test) = generate_synthetic::<f64>(&spec)?;
    fs::create_dir_all(&cmd.out)
        .with_context(|| format!("cannot create {}", cmd.out.display()))?;
    let mut manifest = RunManifest::new("synth");
    record_synth(&mut manifest, &cmd.synth);
    manifest.param("seed", cmd.seed);

    let train_path = cmd.out.join("train.csv");
    let test_path = cmd.out.join("test.csv");
    ScoreTable::labeled(&bank_rows(&bank)).write(&train_path)?;
    ScoreTable::labeled(&test).write(&test_path)?;
    manifest.write_sidecar(&train_path)?;
    manifest.write_sidecar(&test_path)?;

    writeln!(out, "[synth]")?;
    writeln!(out, "train = {} ({} rows)", train_path.display(), bank.positives().len() + bank.negatives().len())?;
    writeln!(out, "test = {} ({} rows)", test_path.display(), test.len())?;
    write!(out, "{}", manifest.to_text())?;
    Ok(())
}

fn read_bank(path: &Path) -> Result<TrainingBank64> {
    let source = path.display().to_string();
    let rows = ScoreTable::read(path)?.require_labels(&source)?;
    build_bank(&rows).with_context(|| format!("{source}: unusable training bank"))
}

pub fn learn(cmd: &LearnCmd, out: &mut dyn Write) -> Result<()> {
    let bank = read_bank(&cmd.train)?;
    let test = ScoreTable::read(&cmd.test)?;
    if test.dim() != bank.dim() {
        bail!(
            "{} has {} classifiers but {} has {}",
            cmd.test.display(),
            test.dim(),
            cmd.train.display(),
            bank.dim()
        );
    }
    let cfg = optimizer(cmd.alpha, &cmd.opt)?;
    let solutions = learn_all(&test.rows, &bank, &cfg)?;
    let named: Vec<(String, ClaritySolution64)> = test
        .rows
        .iter()
        .map(|r| r.id().to_string())
        .zip(solutions)
        .collect();
    write_solutions(create(&cmd.out)?, &named)?;

    let mut manifest = RunManifest::new("learn");
    manifest.param("alpha", cmd.alpha);
    record_optimizer(&mut manifest, &cmd.opt);
    manifest.input("train", &cmd.train)?.input("test", &cmd.test)?;
    manifest.write_sidecar(&cmd.out)?;

    let maximized = named.iter().filter(|s| s.1.direction == clarifuse::Direction::Maximized).count();
    writeln!(out, "[learn]")?;
    writeln!(out, "instances = {}", named.len())?;
    writeln!(out, "maximized = {maximized}")?;
    writeln!(out, "minimized = {}", named.len() - maximized)?;
    writeln!(out, "same_sign = {}", named.iter().filter(|s| s.1.same_sign).count())?;
    writeln!(out, "output = {}", cmd.out.display())?;
    write!(out, "{}", manifest.to_text())?;
    Ok(())
}

fn fusion_mode(c: CriterionArg, n: Option<u64>) -> Result<FusionMode> {
    let need_n = || {
        n.map(|n| n as usize)
            .ok_or_else(|| usage("--n-best is required for N-best criteria"))
    };
    Ok(match c {
        CriterionArg::Average => FusionMode::Average,
        CriterionArg::Weighted => FusionMode::WeightedScore,
        CriterionArg::RawClarity => FusionMode::RawClarity,
        CriterionArg::NbestAvg => FusionMode::NBestAverage(need_n()?),
        CriterionArg::NbestWeighted => FusionMode::NBestWeighted(need_n()?),
    })
}

/// Reorders `solutions` to follow `ids`, failing with every orphan listed.
fn align_solutions(
    ids: &[&str],
    solutions: Vec<(String, ClaritySolution64)>,
) -> Result<Vec<ClaritySolution64>> {
    let mut by_id: HashMap<String, ClaritySolution64> = HashMap::with_capacity(solutions.len());
    for (id, s) in solutions {
        if by_id.insert(id.clone(), s).is_some() {
            bail!("solutions: duplicate id '{id}'");
        }
    }
    let missing: Vec<&str> = ids.iter().copied().filter(|id| !by_id.contains_key(*id)).collect();
    let known: BTreeSet<&str> = ids.iter().copied().collect();
    let mut extra: Vec<&String> = by_id.keys().filter(|id| !known.contains(id.as_str())).collect();
    extra.sort();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("test and solutions ids do not correspond");
        if !missing.is_empty() {
            msg.push_str(&format!("; test ids without a solution: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            let extra: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();
            msg.push_str(&format!("; solution ids not in test: {}", extra.join(", ")));
        }
        bail!(msg);
    }
    Ok(ids.iter().map(|id| by_id.remove(*id).expect("checked")).collect())
}

pub fn rank(cmd: &RankCmd, out: &mut dyn Write) -> Result<()> {
    let mode = fusion_mode(cmd.criterion, cmd.n_best)?;
    let test = ScoreTable::read(&cmd.test)?;
    let mut manifest = RunManifest::new("rank");
    manifest.param("criterion", mode.label()).param("renormalize", cmd.renormalize);
    manifest.input("test", &cmd.test)?;

    let solutions = if mode.needs_weights() {
        let path = cmd
            .solutions
            .as_ref()
            .ok_or_else(|| usage(format!("--solutions is required for --criterion {}", mode.label())))?;
        manifest.input("solutions", path)?;
        let ids: Vec<&str> = test.rows.iter().map(|r| r.id()).collect();
        align_solutions(&ids, read_solutions(path)?)?
    } else {
        Vec::new()
    };
    let (ranking, _) = rank_instances(&test.rows, &solutions, mode, cmd.renormalize)?;
    let ranked: Vec<(String, f64)> = ranking
        .entries
        .iter()
        .map(|e| (e.instance_id.clone(), e.score))
        .collect();
    write_ranking(create(&cmd.out)?, &mode.label(), &ranked)?;
    manifest.write_sidecar(&cmd.out)?;

    writeln!(out, "[rank]")?;
    writeln!(out, "criterion = {}", mode.label())?;
    writeln!(out, "instances = {}", ranked.len())?;
    if let Some((id, score)) = ranked.first() {
        writeln!(out, "top = {id} ({score})")?;
    }
    writeln!(out, "output = {}", cmd.out.display())?;
    write!(out, "{}", manifest.to_text())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalRow {
    ranking: String,
    label: String,
    average_precision: f64,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    rows: Vec<EvalRow>,
    mean_average_precision: Option<f64>,
    manifest: RunManifest,
}

pub fn eval(cmd: &EvalCmd, out: &mut dyn Write) -> Result<()> {
    let (ids, columns) = read_label_columns(&cmd.labels)?;
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let pairs: Vec<(usize, usize)> = if cmd.ranking.len() == 1 {
        (0..columns.len()).map(|c| (0, c)).collect()
    } else if cmd.ranking.len() == columns.len() {
        (0..columns.len()).map(|c| (c, c)).collect()
    } else {
        return Err(usage(format!(
            "{} rankings for {} label columns; pass one ranking or one per column",
            cmd.ranking.len(),
            columns.len()
        )));
    };

    let mut manifest = RunManifest::new("eval");
    manifest.input("labels", &cmd.labels)?;
    let mut orders = Vec::with_capacity(cmd.ranking.len());
    for path in &cmd.ranking {
        manifest.input("ranking", path)?;
        let order = read_ranking(path)?;
        let unlabeled: Vec<&str> = order
            .iter()
            .filter(|id| !index.contains_key(id.as_str()))
            .map(|s| s.as_str())
            .collect();
        if !unlabeled.is_empty() {
            bail!("{}: ids without a label: {}", path.display(), unlabeled.join(", "));
        }
        orders.push(order);
    }

    let mut rows = Vec::with_capacity(pairs.len());
    for (r, c) in pairs {
        let (name, labels) = &columns[c];
        let ranked: Vec<bool> = orders[r].iter().map(|id| labels[index[id.as_str()]]).collect();
        let ap: f64 = average_precision(&ranked).with_context(|| {
            format!("{} against column '{name}'", cmd.ranking[r].display())
        })?;
        rows.push(EvalRow {
            ranking: cmd.ranking[r].display().to_string(),
            label: name.clone(),
            average_precision: ap,
        });
    }
    let map = if rows.len() > 1 {
        let aps: Vec<f64> = rows.iter().map(|r| r.average_precision).collect();
        Some(mean_average_precision(&aps)?)
    } else {
        None
    };

    writeln!(out, "[eval]")?;
    for row in &rows {
        writeln!(out, "ap.{} = {}", row.label, row.average_precision)?;
    }
    if let Some(map) = map {
        writeln!(out, "map = {map}")?;
    }
    write!(out, "{}", manifest.to_text())?;
    if let Some(path) = &cmd.out {
        let report = EvalOutput {
            rows,
            mean_average_precision: map,
            manifest,
        };
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn corrupt(cmd: &CorruptCmd, out: &mut dyn Write) -> Result<()> {
    let table = ScoreTable::read(&cmd.test)?;
    let mut spec = CorruptionSpec::new(cmd.classifiers.clone(), cmd.sigma, cmd.seed);
    spec.fraction = cmd.fraction;
    let rows = corrupt_scores(&table.rows, &spec)
        .with_context(|| format!("cannot corrupt {}", cmd.test.display()))?;
    let corrupted = ScoreTable {
        rows,
        labels: table.labels.clone(),
    };
    corrupted.write(&cmd.out)?;

    let mut manifest = RunManifest::new("corrupt");
    manifest
        .param("classifiers", join(&cmd.classifiers))
        .param("fraction", cmd.fraction)
        .param("sigma", cmd.sigma)
        .param("seed", cmd.seed);
    manifest.input("test", &cmd.test)?;
    manifest.write_sidecar(&cmd.out)?;

    writeln!(out, "[corrupt]")?;
    writeln!(out, "rows = {}", table.rows.len())?;
    writeln!(out, "rows_per_classifier = {}", spec.rows_per_classifier(table.rows.len()))?;
    writeln!(out, "output = {}", cmd.out.display())?;
    write!(out, "{}", manifest.to_text())?;
    Ok(())
}

fn alpha_criterion(c: AlphaCriterionArg) -> AlphaCriterion {
    match c {
        AlphaCriterionArg::Weighted => AlphaCriterion::WeightedScore,
        AlphaCriterionArg::RawClarity => AlphaCriterion::RawClarity,
    }
}

#[derive(Debug, Serialize)]
struct AlphaOutput {
    alpha: f64,
    average_precision: f64,
    table: Vec<(f64, f64)>,
    manifest: RunManifest,
}

pub fn alpha(cmd: &AlphaCmd, out: &mut dyn Write) -> Result<()> {
    let bank = read_bank(&cmd.train)?;
    let source = cmd.validation.display().to_string();
    let validation = ScoreTable::read(&cmd.validation)?.require_labels(&source)?;
    let template = optimizer(cmd.alpha_grid[0], &cmd.opt)?;
    let sel = select_alpha(
        &cmd.alpha_grid,
        &validation,
        &bank,
        &template,
        alpha_criterion(cmd.criterion),
    )?;

    let mut manifest = RunManifest::new("alpha");
    manifest
        .param("alpha_grid", join(&cmd.alpha_grid))
        .param("criterion", FusionMode::from(alpha_criterion(cmd.criterion)).label());
    record_optimizer(&mut manifest, &cmd.opt);
    manifest.input("train", &cmd.train)?.input("validation", &cmd.validation)?;

    writeln!(out, "[alpha]")?;
    writeln!(out, "{:>12}  {:>10}", "alpha", "ap")?;
    for (a, ap) in &sel.table {
        writeln!(out, "{a:>12}  {ap:>10.6}")?;
    }
    writeln!(out, "selected = {}", sel.alpha)?;
    writeln!(out, "selected_ap = {}", sel.average_precision)?;
    write!(out, "{}", manifest.to_text())?;
    if let Some(path) = &cmd.out {
        let report = AlphaOutput {
            alpha: sel.alpha,
            average_precision: sel.average_precision,
            table: sel.table,
            manifest,
        };
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

/// One one-vs-rest problem of an experiment.
struct ClassProblem {
    name: String,
    bank: TrainingBank64,
    test: Vec<LabeledInstance64>,
    validation: Option<Vec<LabeledInstance64>>,
    corrupted: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub name: String,
    pub alpha: f64,
    /// `(alpha, validation AP)` when the sharpness was selected.
    pub alpha_table: Option<Vec<(f64, f64)>>,
    pub corrupted: Vec<usize>,
    pub n_test: usize,
    pub n_test_positive: usize,
    pub same_sign: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeRow {
    pub mode: String,
    /// Per class, in class order.
    pub average_precision: Vec<f64>,
    pub mean_average_precision: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub classes: Vec<ClassSummary>,
    pub modes: Vec<ModeRow>,
    pub manifest: RunManifest,
}

impl ExperimentOutput {
    pub fn row(&self, mode: FusionMode) -> Option<&ModeRow> {
        let label = mode.label();
        self.modes.iter().find(|r| r.mode == label)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[experiment]\n");
        s.push_str(&format!("classes = {}\n", self.classes.len()));
        for c in &self.classes {
            s.push_str(&format!(
                "class.{} = alpha {} | corrupted [{}] | test {} ({} positive) | same_sign {} | degenerate {}\n",
                c.name,
                c.alpha,
                join(&c.corrupted),
                c.n_test,
                c.n_test_positive,
                c.same_sign,
                c.degenerate
            ));
        }
        s.push_str("\n[results]\n");
        let width = self.modes.iter().map(|r| r.mode.len()).max().unwrap_or(4).max(4);
        s.push_str(&format!("{:<width$}", "mode"));
        for c in &self.classes {
            s.push_str(&format!("  {:>10}", c.name));
        }
        s.push_str(&format!("  {:>10}\n", "MAP"));
        for r in &self.modes {
            s.push_str(&format!("{:<width$}", r.mode));
            for ap in &r.average_precision {
                s.push_str(&format!("  {ap:>10.6}"));
            }
            s.push_str(&format!("  {:>10.6}\n", r.mean_average_precision));
        }
        s.push('\n');
        s.push_str(&self.manifest.to_text());
        s
    }
}

fn experiment_problems(
    cmd: &ExperimentCmd,
    manifest: &mut RunManifest,
) -> Result<Vec<ClassProblem>> {
    let m = cmd.synth.m as usize;
    let mut seeder = ChaCha8Rng::seed_from_u64(cmd.seed);
    let corrupting = cmd.classifiers.is_some() || cmd.corrupt_count.is_some();
    let sigma = match (corrupting, cmd.sigma) {
        (true, None) => return Err(usage("--sigma is required when corrupting classifiers")),
        (_, s) => s.unwrap_or(0.0),
    };
    let wants_validation = cmd.alpha.is_none();

    let mut problems = Vec::new();
    if let (Some(train), Some(test)) = (&cmd.train, &cmd.test) {
        if cmd.classes != 1 {
            return Err(usage("--classes applies to synthetic data only"));
        }
        manifest.param("data", "files");
        manifest.input("train", train)?.input("test", test)?;
        let bank = read_bank(train)?;
        let test_rows = ScoreTable::read(test)?.require_labels(&test.display().to_string())?;
        let validation = match &cmd.validation {
            Some(path) => {
                manifest.input("validation", path)?;
                Some(ScoreTable::read(path)?.require_labels(&path.display().to_string())?)
            }
            None if wants_validation => {
                return Err(usage("file input needs --alpha or a --validation table"))
            }
            None => None,
        };
        problems.push(ClassProblem {
            name: "class0".into(),
            bank,
            test: test_rows,
            validation,
            corrupted: Vec::new(),
        });
    } else {
        manifest.param("data", "synthetic").param("classes", cmd.classes);
        record_synth(manifest, &cmd.synth);
        if wants_validation {
            manifest.param("n_validation", cmd.n_validation);
        }
        for k in 0..cmd.classes {
            let data_seed = seeder.next_u64();
            let val_seed = seeder.next_u64();
            let spec = synth_spec(&cmd.synth, cmd.synth.n_test, data_seed)?;
            let (bank, test) = generate_synthetic::<f64>(&spec)?;
            let validation = if wants_validation {
                let vspec = synth_spec(&cmd.synth, cmd.n_validation, val_seed)?;
                Some(generate_synthetic::<f64>(&vspec)?.1)
            } else {
                None
            };
            problems.push(ClassProblem {
                name: format!("class{k}"),
                bank,
                test,
                validation,
                corrupted: Vec::new(),
            });
        }
    }

    if corrupting {
        manifest.param("fraction", cmd.fraction).param("sigma", sigma);
        if let Some(list) = &cmd.classifiers {
            manifest.param("classifiers", join(list));
        }
        if let Some(c) = cmd.corrupt_count {
            if c > m {
                return Err(usage(format!("--corrupt-count {c} exceeds m = {m}")));
            }
            manifest.param("corrupt_count", c);
        }
        for p in &mut problems {
            let dim = p.bank.dim();
            let mut indices = match (&cmd.classifiers, cmd.corrupt_count) {
                (Some(list), _) => list.clone(),
                (None, Some(c)) => sample(&mut seeder, dim, c.min(dim)).into_vec(),
                (None, None) => unreachable!(),
            };
            indices.sort_unstable();
            let test_seed = seeder.next_u64();
            let val_seed = seeder.next_u64();
            let spec = CorruptionSpec {
                classifier_indices: indices.clone(),
                fraction: cmd.fraction,
                sigma,
                seed: test_seed,
            };
            p.test = corrupt_labeled(&p.test, &spec)?;
            if let Some(v) = &p.validation {
                p.validation = Some(corrupt_labeled(v, &CorruptionSpec { seed: val_seed, ..spec })?);
            }
            p.corrupted = indices;
        }
    }
    Ok(problems)
}

/// Runs every fusion mode on every class and collects the comparison
/// table. Deterministic for fixed flags and seed.
pub fn run_experiment(cmd: &ExperimentCmd) -> Result<ExperimentOutput> {
    let mut manifest = RunManifest::new("experiment");
    manifest.param("seed", cmd.seed).param("renormalize", cmd.renormalize);
    record_optimizer(&mut manifest, &cmd.opt);
    let grid: Vec<f64> = match (&cmd.alpha, &cmd.alpha_grid) {
        (Some(a), _) => {
            manifest.param("alpha", a);
            vec![*a]
        }
        (None, Some(g)) => g.clone(),
        (None, None) => DEFAULT_ALPHA_GRID.to_vec(),
    };
    if cmd.alpha.is_none() {
        manifest
            .param("alpha_grid", join(&grid))
            .param("alpha_criterion", FusionMode::from(alpha_criterion(cmd.alpha_criterion)).label());
    }
    let problems = experiment_problems(cmd, &mut manifest)?;
    let m = problems[0].bank.dim();
    if problems.iter().any(|p| p.bank.dim() != m || p.test.iter().any(|t| t.scores.dim() != m)) {
        bail!("training and test tables disagree on the number of classifiers");
    }

    let mut modes = vec![FusionMode::Average, FusionMode::WeightedScore, FusionMode::RawClarity];
    modes.extend((1..=m).map(FusionMode::NBestAverage));
    modes.extend((1..=m).map(FusionMode::NBestWeighted));

    let mut classes = Vec::with_capacity(problems.len());
    let mut aps: Vec<Vec<f64>> = vec![Vec::new(); modes.len()];
    for p in &problems {
        let template = optimizer(grid[0], &cmd.opt)?;
        let (alpha, alpha_table) = match &p.validation {
            Some(v) if cmd.alpha.is_none() => {
                let sel = select_alpha(&grid, v, &p.bank, &template, alpha_criterion(cmd.alpha_criterion))
                    .with_context(|| format!("{}: alpha selection", p.name))?;
                (sel.alpha, Some(sel.table))
            }
            _ => (grid[0], None),
        };
        let cfg = template.with_alpha(Sharpness::new(alpha)?);
        let xs: Vec<_> = p.test.iter().map(|t| t.scores.clone()).collect();
        let solutions = learn_all(&xs, &p.bank, &cfg)?;
        for (slot, &mode) in aps.iter_mut().zip(&modes) {
            let report = evaluate_mode(&p.test, &solutions, mode, cmd.renormalize)
                .with_context(|| format!("{}: {}", p.name, mode.label()))?;
            slot.push(report.average_precision);
        }
        classes.push(ClassSummary {
            name: p.name.clone(),
            alpha,
            alpha_table,
            corrupted: p.corrupted.clone(),
            n_test: p.test.len(),
            n_test_positive: p.test.iter().filter(|t| t.label.is_positive()).count(),
            same_sign: solutions.iter().filter(|s| s.same_sign).count(),
            degenerate: solutions.iter().filter(|s| s.degenerate_projection).count(),
        });
    }

    let modes = modes
        .iter()
        .zip(aps)
        .map(|(mode, ap)| {
            Ok(ModeRow {
                mode: mode.label(),
                mean_average_precision: mean_average_precision(&ap)?,
                average_precision: ap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        classes,
        modes,
        manifest,
    })
}

pub fn experiment(cmd: &ExperimentCmd, out: &mut dyn Write) -> Result<()> {
    let report = run_experiment(cmd)?;
    write!(out, "{}", report.to_text())?;
    if let Some(path) = &cmd.out {
        let json = serde_json::to_string_pretty(&report).map_err(|e| anyhow!(e))?;
        fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}
