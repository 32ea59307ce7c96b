//! The `ilens` subcommands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ilens_core::distribution::{compute_z, mean_distribution, normalize, order_distribution, OrderDistribution};
use ilens_core::experiments::{jaccard_report, noise_trend, perturbation_sweep, two_stage_on, NoiseTrendConfig, PerturbMode, PerturbRow, TwoStageConfig};
use ilens_core::generalization::jaccard_csv;
use ilens_core::parametric::{disentangle_population, logspace, DisentangleResult, FitGrid};
use ilens_core::zoo::SyntheticDataset;
use ilens_core::{extract, ExtractConfig, InteractionSet, TinyNet, ValueTable};
use rayon::prelude::*;
use serde_json::Value;

use crate::config;
use crate::exit::{DataError, UsageError};
use crate::output::OutputDir;
use crate::svg::{figure, Panel, Series};

/// Flags shared by every command.
pub struct Common {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub timestamps: bool,
    pub config: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

impl Common {
    fn settings<T: serde::Serialize + serde::de::DeserializeOwned>(&self, defaults: &T) -> anyhow::Result<T> {
        config::load(defaults, self.config.as_deref(), &self.overrides)
    }

    fn no_settings(&self, command: &str) -> anyhow::Result<()> {
        if self.config.is_some() || !self.overrides.is_empty() {
            return Err(UsageError(format!("{command} takes no config settings")).into());
        }
        Ok(())
    }

    fn config_inputs(&self) -> Vec<PathBuf> {
        self.config.iter().cloned().collect()
    }
}

/// Files named on the command line, with directories expanded to their JSON
/// files (manifests excluded) in name order.
fn expand(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "json"))
                .filter(|f| f.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(DataError(format!("no JSON files in {}", p.display())).into());
            }
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(DataError(format!("input {} does not exist", p.display())).into());
        }
    }
    if files.is_empty() {
        return Err(UsageError("no inputs given".into()).into());
    }
    Ok(files)
}

/// File name without its directory, `.json` and any `.interactions` suffix.
fn stem(path: &Path) -> String {
    let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let name = name.strip_suffix(".json").unwrap_or(&name);
    name.strip_suffix(".interactions").unwrap_or(name).to_string()
}

fn unique_stems(files: &[PathBuf]) -> anyhow::Result<Vec<String>> {
    let stems: Vec<String> = files.iter().map(|f| stem(f)).collect();
    let distinct: BTreeSet<&String> = stems.iter().collect();
    if distinct.len() != stems.len() {
        return Err(UsageError("inputs share a file name; outputs would collide".into()).into());
    }
    Ok(stems)
}

fn load_sets(files: &[PathBuf]) -> anyhow::Result<Vec<InteractionSet>> {
    Ok(files.iter().map(InteractionSet::load).collect::<Result<Vec<_>, _>>()?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("settings serialize")
}

fn order_series(name: &str, values: &[f64], from: usize) -> Series {
    Series::new(name, values.iter().enumerate().skip(from).map(|(m, &v)| (m as f64, v)).collect())
}

fn distribution_panel(title: &str, d: &OrderDistribution) -> Panel {
    Panel {
        title: title.into(),
        x_label: "order m".into(),
        y_label: "strength".into(),
        series: vec![order_series("positive", &d.pos, 0), order_series("negative", &d.neg, 0)],
    }
}

pub fn extract_cmd(common: &Common, inputs: &[PathBuf]) -> anyhow::Result<()> {
    let mut cfg = common.settings(&ExtractConfig::default())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let files = expand(inputs)?;
    let stems = unique_stems(&files)?;
    let tables = files.iter().map(ValueTable::load).collect::<Result<Vec<_>, _>>()?;
    let results = tables
        .par_iter()
        .map(|t| extract(t, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = OutputDir::create(&common.out, common.timestamps)?;
    for (s, ex) in stems.iter().zip(&results) {
        log::info!("{s}: L1 {:.6}, {} salient", ex.interactions.l1_norm(), ex.interactions.salient_count());
        out.write(&format!("{s}.interactions.json"), &ex.interactions.to_json())?;
        out.write(&format!("{s}.trace.csv"), &ex.trace.to_csv())?;
    }
    let mut all = files.clone();
    all.extend(common.config_inputs());
    out.finish("extract", Some(cfg.seed), &to_value(&cfg), &all)
}

pub fn distribution_cmd(common: &Common, inputs: &[PathBuf], salient_only: bool, normalize_z: bool) -> anyhow::Result<()> {
    common.no_settings("distribution")?;
    let files = expand(inputs)?;
    let stems = unique_stems(&files)?;
    let sets = load_sets(&files)?;
    let z = if normalize_z { Some(compute_z(&sets)?) } else { None };
    let dists = sets
        .iter()
        .map(|s| {
            let d = order_distribution(s, salient_only);
            match z {
                Some(z) => normalize(&d, z),
                None => Ok(d),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = if dists.len() > 1 { Some(mean_distribution(&dists)?) } else { None };
    let mut out = OutputDir::create(&common.out, common.timestamps)?;
    for (s, d) in stems.iter().zip(&dists) {
        out.write(&format!("{s}.distribution.csv"), &d.to_csv())?;
    }
    let shown = match mean {
        Some(mean) => {
            out.write("mean.distribution.csv", &mean.to_csv())?;
            ("mean distribution", mean)
        }
        None => ("distribution", dists[0].clone()),
    };
    out.write("distribution.svg", &figure(&[distribution_panel(shown.0, &shown.1)], out.stamp().as_deref()))?;
    let settings = serde_json::json!({ "salient_only": salient_only, "normalize": normalize_z, "z": z });
    out.finish("distribution", None, &settings, &files)
}

pub struct GridFlags {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_count: usize,
    pub per_sign: bool,
}

impl GridFlags {
    fn grid(&self) -> anyhow::Result<FitGrid> {
        if !(self.alpha_step > 0.0 && self.alpha_min > 0.0 && self.alpha_max >= self.alpha_min) {
            return Err(UsageError("need 0 < alpha-min <= alpha-max and alpha-step > 0".into()).into());
        }
        if !(self.delta_min > 0.0 && self.delta_max >= self.delta_min && self.delta_count > 0) {
            return Err(UsageError("need 0 < delta-min <= delta-max and delta-count > 0".into()).into());
        }
        let steps = ((self.alpha_max - self.alpha_min) / self.alpha_step + 1e-9).floor() as usize;
        Ok(FitGrid {
            alphas: (0..=steps)
                .map(|k| ((self.alpha_min + k as f64 * self.alpha_step) * 1e12).round() / 1e12)
                .collect(),
            deltas: logspace(self.delta_min, self.delta_max, self.delta_count),
            per_sign: self.per_sign,
        })
    }
}

fn fit_panels(a: &OrderDistribution, fit: &DisentangleResult) -> Vec<Panel> {
    let sign = |title: &str, measured: &[f64], spindle: &[f64], decay: &[f64], residual: &[f64]| Panel {
        title: title.into(),
        x_label: "order m".into(),
        y_label: "strength".into(),
        series: vec![
            order_series("measured", measured, 1),
            order_series("spindle", spindle, 1).dashed(),
            order_series("decay", decay, 1).dashed(),
            order_series("residual", residual, 1),
        ],
    };
    vec![
        sign("positive", &a.pos, &fit.spindle_pos, &fit.decay_pos, &fit.residual_pos),
        sign("negative", &a.neg, &fit.spindle_neg, &fit.decay_neg, &fit.residual_neg),
    ]
}

pub fn disentangle_cmd(common: &Common, distribution: &Path, interactions: &Path, flags: &GridFlags) -> anyhow::Result<()> {
    let grid = common.settings(&flags.grid()?)?;
    if !distribution.is_file() {
        return Err(DataError(format!("input {} does not exist", distribution.display())).into());
    }
    let a = OrderDistribution::load(distribution)?;
    let files = expand(&[interactions.to_path_buf()])?;
    let sets = load_sets(&files)?;
    let fit = disentangle_population(&a, &sets, &grid)?;
    log::info!(
        "alpha {} beta {:.4} delta {:.3e} decay_scale {:.4} objective {:.4e}",
        fit.alpha,
        fit.beta,
        fit.delta,
        fit.decay_scale,
        fit.objective
    );
    let mut out = OutputDir::create(&common.out, common.timestamps)?;
    out.write("fit.json", &(fit.to_json() + "\n"))?;
    out.write("fit.svg", &figure(&fit_panels(&a, &fit), out.stamp().as_deref()))?;
    let mut all = vec![distribution.to_path_buf()];
    all.extend(files);
    all.extend(common.config_inputs());
    out.finish("disentangle", None, &to_value(&grid), &all)
}

pub fn jaccard_cmd(common: &Common, train: &Path, test: &Path) -> anyhow::Result<()> {
    common.no_settings("jaccard")?;
    let train_files = expand(&[train.to_path_buf()])?;
    let test_files = expand(&[test.to_path_buf()])?;
    let report = jaccard_report(&load_sets(&train_files)?, &load_sets(&test_files)?)?;
    let mut rows = report.orders.clone();
    rows.push(report.overall.clone());
    let mut out = OutputDir::create(&common.out, common.timestamps)?;
    out.write("jaccard.csv", &jaccard_csv(&rows))?;
    let points = report.orders.iter().filter_map(|r| Some((r.m? as f64, r.sim?))).collect();
    let panel = Panel {
        title: "train/test similarity".into(),
        x_label: "order m".into(),
        y_label: "Jaccard".into(),
        series: vec![Series::new("similarity", points)],
    };
    out.write("jaccard.svg", &figure(&[panel], out.stamp().as_deref()))?;
    match report.spearman {
        Some(r) => println!("spearman(order, similarity) = {r:.4}"),
        None => println!("spearman(order, similarity) undefined"),
    }
    let mut all = train_files;
    all.extend(test_files);
    out.finish("jaccard", None, &serde_json::json!({ "spearman": report.spearman }), &all)
}

pub fn simulate_cmd(common: &Common) -> anyhow::Result<()> {
    let mut cfg = common.settings(&TwoStageConfig::default())?;
    if let Some(seed) = common.seed {
        cfg.setup = cfg.setup.with_seed(seed);
    }
    cfg.extract.validate()?;
    let (data, checkpoints) = cfg.setup.run()?;
    let report = two_stage_on(&cfg, &data, &checkpoints)?;
    let mut out = OutputDir::create(&common.out, common.timestamps)?;
    out.write("dataset.csv", &data.to_csv())?;
    if let Some(last) = checkpoints.last() {
        out.write("net.json", &(last.net.to_json() + "\n"))?;
    }

    let mut timeline = String::from(
        "epoch,train_loss,test_loss,loss_gap,alpha,beta,delta,decay_scale,objective,spindle_mass,decay_mass,decay_fraction\n",
    );
    let mut dists = String::from("epoch,m,pos,neg\n");
    for r in &report.rows {
        let f = &r.fit;
        let _ = writeln!(
            timeline,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.test_loss,
            r.loss_gap,
            f.alpha,
            f.beta,
            f.delta,
            f.decay_scale,
            f.objective,
            f.spindle_mass(),
            f.decay_mass(),
            f.decay_fraction()
        );
        for m in 0..r.distribution.pos.len() {
            let _ = writeln!(dists, "{},{m},{},{}", r.epoch, r.distribution.pos[m], r.distribution.neg[m]);
        }
        out.write(&format!("fit_epoch{}.json", r.epoch), &(f.to_json() + "\n"))?;
    }
    out.write("timeline.csv", &timeline)?;
    out.write("distributions.csv", &dists)?;

    let epochs = |g: &dyn Fn(usize) -> f64| report.rows.iter().enumerate().map(|(i, r)| (r.epoch as f64, g(i))).collect();
    let losses = Panel {
        title: "losses".into(),
        x_label: "epoch".into(),
        y_label: "loss".into(),
        series: vec![
            Series::new("train", epochs(&|i| report.rows[i].train_loss)),
            Series::new("test", epochs(&|i| report.rows[i].test_loss)),
            Series::new("gap", epochs(&|i| report.rows[i].loss_gap)).dashed(),
        ],
    };
    let fraction = Panel {
        title: "fitted decay share".into(),
        x_label: "epoch".into(),
        y_label: "decay / (decay + spindle)".into(),
        series: vec![Series::new("decay share", epochs(&|i| report.rows[i].fit.decay_fraction()))],
    };
    out.write("timeline.svg", &figure(&[losses, fraction], out.stamp().as_deref()))?;
    let panels: Vec<Panel> = report
        .rows
        .iter()
        .map(|r| distribution_panel(&format!("A at epoch {}", r.epoch), &r.distribution))
        .collect();
    out.write("panels.svg", &figure(&panels, out.stamp().as_deref()))?;

    let stage1_epoch = report.rows[report.stage1_end].epoch;
    let mut summary = serde_json::json!({
        "stage1_end_epoch": stage1_epoch,
        "early_epoch": report.early.map(|i| report.rows[i].epoch),
        "early_decay_fraction": report.early_decay_fraction(),
    });
    if report.rows.len() > 1 {
        out.write("overfit_delta.csv", &report.overfit_delta.to_csv())?;
        let last = report.rows.last().map_or(0, |r| r.epoch);
        let title = format!("ΔA between epoch {last} and epoch {stage1_epoch}");
        out.write("overfit_delta.svg", &figure(&[distribution_panel(&title, &report.overfit_delta)], out.stamp().as_deref()))?;
        summary["overfit_argmax"] = serde_json::json!(report.overfit_argmax());
    }
    out.write("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    out.finish("simulate", Some(cfg.setup.train.seed), &to_value(&cfg), &common.config_inputs())
}

pub struct PerturbFlags {
    pub net: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub features_per_variable: usize,
    pub mode: Option<PerturbMode>,
    pub sigmas: Option<Vec<f64>>,
}

fn perturb_outputs(out: &mut OutputDir, rows: &[PerturbRow]) -> anyhow::Result<()> {
    let mut summary = String::from("sigma,mass,alpha,beta,objective,relative_residual,argmax\n");
    let mut deltas = String::from("sigma,m,pos,neg\n");
    for r in rows {
        let argmax = r.delta.argmax_order().map_or_else(String::new, |m| m.to_string());
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{argmax}",
            r.sigma, r.mass, r.spindle.params.alpha, r.spindle.params.beta, r.spindle.objective, r.relative_residual
        );
        for m in 0..r.delta.pos.len() {
            let _ = writeln!(deltas, "{},{m},{},{}", r.sigma, r.delta.pos[m], r.delta.neg[m]);
        }
    }
    out.write("perturb.csv", &summary)?;
    out.write("delta.csv", &deltas)?;
    let panels: Vec<Panel> = rows
        .iter()
        .map(|r| {
            let total: Vec<f64> = r.delta.pos.iter().zip(&r.delta.neg).map(|(p, n)| p + n).collect();
            let fit: Vec<f64> = r.spindle.curve.iter().map(|c| 2.0 * c).collect();
            Panel {
                title: format!("ΔA at σ = {}", r.sigma),
                x_label: "order m".into(),
                y_label: "strength (+ and −)".into(),
                series: vec![order_series("ΔA", &total, 1), order_series("spindle fit", &fit, 1).dashed()],
            }
        })
        .collect();
    out.write("perturb.svg", &figure(&panels, out.stamp().as_deref()))
}

pub fn perturb_cmd(common: &Common, flags: &PerturbFlags) -> anyhow::Result<()> {
    let mut cfg = common.settings(&NoiseTrendConfig::default())?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(mode) = flags.mode {
        cfg.perturb.mode = mode;
    }
    if let Some(s) = &flags.sigmas {
        cfg.perturb.sigmas = s.clone();
    }
    cfg.perturb.extract.validate()?;
    let mut out;
    let mut inputs = common.config_inputs();
    let rows = match (&flags.net, &flags.data) {
        (Some(net_path), Some(data_path)) => {
            for p in [net_path, data_path] {
                if !p.is_file() {
                    return Err(DataError(format!("input {} does not exist", p.display())).into());
                }
            }
            let net = TinyNet::load(net_path)?;
            let text = fs::read_to_string(data_path).with_context(|| format!("cannot read {}", data_path.display()))?;
            let data = SyntheticDataset::from_csv(&text, flags.features_per_variable, data_path)?;
            if data.n_features() != net.n_features() {
                return Err(DataError(format!(
                    "network expects {} features, dataset has {}",
                    net.n_features(),
                    data.n_features()
                ))
                .into());
            }
            let samples: Vec<&[f64]> = data.test.iter().take(cfg.samples).map(|&i| data.features[i].as_slice()).collect();
            let rows = perturbation_sweep(&net, &samples, &data.groups, &cfg.perturb)?;
            inputs.extend([net_path.clone(), data_path.clone()]);
            out = OutputDir::create(&common.out, common.timestamps)?;
            rows
        }
        (None, None) => {
            let rows = noise_trend(&cfg)?;
            out = OutputDir::create(&common.out, common.timestamps)?;
            rows
        }
        _ => return Err(UsageError("--net and --data must be given together".into()).into()),
    };
    perturb_outputs(&mut out, &rows)?;
    out.finish("perturb", Some(cfg.perturb.seed), &to_value(&cfg), &inputs)
}
