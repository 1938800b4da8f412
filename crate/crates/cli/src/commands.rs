use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pcgscreen::dataio::Label;
use pcgscreen::evaluate::{
    all_channel_subsets, channel_combination_search, evaluate_channels, train_full_and_predict, CvConfig, FusionMode,
    REPORT_SCHEMA_VERSION,
};
use pcgscreen::learn::{Metrics, wilcoxon_rank_sum};
use pcgscreen::pipeline::FeatureSpec;
use pcgscreen::preprocess::TARGET_FS_HZ;
use pcgscreen::selection::FeatureMatrix;
use pcgscreen::spectral::{welch_psd, WELCH_WINDOW};
use pcgscreen::synth::synth_dataset_with_heldout;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::{self, TOOL_VERSION};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::svg::{self, BoxGroup, Series, CAD_COLOR, NORMAL_COLOR};

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct Resolved {
    channel_specs: BTreeMap<usize, FeatureSpec>,
    cv: CvConfig,
}

/// Every artifact carries the tool version and the full resolved config.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool: Tool,
    command: &'a str,
    config: &'a PipelineConfig,
    resolved: Resolved,
    result: T,
}

fn write_artifact<T: Serialize>(cfg: &PipelineConfig, command: &str, file: &str, result: T) -> Result<PathBuf, CliError> {
    let env = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: Tool {
            name: "pcgscreen",
            version: TOOL_VERSION,
        },
        command,
        config: cfg,
        resolved: Resolved {
            channel_specs: cfg.channel_specs()?,
            cv: cfg.cv_config(),
        },
        result,
    };
    fs::create_dir_all(&cfg.paths.output_dir)?;
    let path = cfg.paths.output_dir.join(file);
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::data(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn summary(command: &str, outputs: &[PathBuf], extra: Value) -> Value {
    json!({
        "command": command,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "details": extra,
    })
}

pub fn synth(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let s = &cfg.synth;
    if s.n_per_class == 0 {
        return Err(CliError::config("synth.n_per_class must be positive"));
    }
    let ds = synth_dataset_with_heldout(s.n_per_class, s.n_heldout_per_class, &s.params, cfg.seed)?;
    let dir = cfg
        .paths
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let (m, a) = ds.write(&dir)?;
    if m != cfg.paths.manifest {
        fs::rename(&m, &cfg.paths.manifest)?;
    }
    if a != cfg.paths.annotations {
        if let Some(p) = cfg.paths.annotations.parent() {
            fs::create_dir_all(p)?;
        }
        fs::rename(&a, &cfg.paths.annotations)?;
    }
    Ok(summary(
        "synth",
        &[cfg.paths.manifest.clone(), cfg.paths.annotations.clone()],
        json!({ "subjects": ds.manifest.entries.len(), "recording_dir": dir.display().to_string() }),
    ))
}

pub fn preprocess(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let (ep, status) = cache::epochs(cfg)?;
    let lengths: Vec<usize> = ep.train.iter().chain(&ep.heldout).flat_map(|s| s.epochs.iter().map(|e| e.len())).collect();
    let result = json!({
        "cache_key": ep.key,
        "n_train_subjects": ep.train.len(),
        "n_heldout_subjects": ep.heldout.len(),
        "n_epochs": lengths.len(),
        "epoch_samples_min": lengths.iter().min(),
        "epoch_samples_max": lengths.iter().max(),
        "fs_hz": TARGET_FS_HZ,
    });
    let out = write_artifact(cfg, "preprocess", "preprocess.json", &result)?;
    Ok(summary("preprocess", &[out], json!({ "cache": status })))
}

fn write_matrix_csv(path: &Path, fm: &FeatureMatrix) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::data(e.to_string()))?;
    let mut header = vec!["subject_id".to_string(), "epoch_idx".into(), "label".into()];
    header.extend(fm.columns.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(|e| CliError::data(e.to_string()))?;
    for (i, row) in fm.rows().enumerate() {
        let mut rec = vec![fm.subject_ids[i].clone(), fm.epoch_idx[i].to_string(), fm.labels[i].to_string()];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(|e| CliError::data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn extract(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let (fc, status) = cache::features(cfg)?;
    let specs = cfg.channel_specs()?;
    let dir = cfg.paths.output_dir.join("features");
    fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    let mut channels = BTreeMap::new();
    for (cohort, mats) in [("train", &fc.train), ("heldout", &fc.heldout)] {
        for (ch, fm) in mats {
            let p = dir.join(format!("{cohort}_ch{ch}.csv"));
            write_matrix_csv(&p, fm)?;
            outputs.push(p);
        }
    }
    for (ch, fm) in &fc.train {
        channels.insert(
            ch.to_string(),
            json!({ "family": specs[ch].name(), "n_features": fm.n_cols(), "n_epochs": fm.n_rows() }),
        );
    }
    let fused: usize = fc.train.values().map(FeatureMatrix::n_cols).sum();
    let result = json!({ "cache_key": fc.key, "channels": channels, "fused_features": fused });
    outputs.insert(0, write_artifact(cfg, "extract", "features.json", &result)?);
    Ok(summary("extract", &outputs, json!({ "cache": status })))
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let (fc, _) = cache::features(cfg)?;
    let channels = cfg.fusion_channels();
    let report = evaluate_channels(&fc.train, &channels, cfg.fusion.mode, &cfg.cv_config())?;
    let details = json!({
        "subject_acc": report.subject_metrics.acc,
        "subject_sens_spec": report.subject_metrics.sens_spec,
        "epoch_acc": report.epoch_metrics.acc,
    });
    let out = write_artifact(cfg, "evaluate", "evaluate.json", json!({ "channels": channels, "report": report }))?;
    Ok(summary("evaluate", &[out], details))
}

pub fn search(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let (fc, _) = cache::features(cfg)?;
    let max = cfg.search.max_size.unwrap_or(usize::MAX);
    let subsets: Vec<Vec<usize>> = all_channel_subsets(&cfg.search_channels())
        .into_iter()
        .filter(|s| s.len() <= max)
        .collect();
    let table = channel_combination_search(&fc.train, &subsets, cfg.fusion.mode, &cfg.cv_config())?;
    let details = json!({
        "subsets": table.rows.len(),
        "best": table.best_per_cardinality.iter().map(|r| json!({ "channels": r.channels, "subject_acc": r.subject.acc })).collect::<Vec<_>>(),
    });
    let out = write_artifact(cfg, "search", "search.json", &table)?;
    Ok(summary("search", &[out], details))
}

#[derive(Serialize)]
struct HeldoutPrediction {
    subject_id: String,
    truth: Label,
    predicted: Label,
    mean_probability: f64,
    epochs: BTreeMap<String, Vec<Label>>,
}

pub fn predict(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let (fc, _) = cache::features(cfg)?;
    if fc.heldout.is_empty() {
        return Err(CliError::data("manifest has no heldout subjects"));
    }
    let channels = cfg.fusion_channels();
    let pick = |m: &BTreeMap<usize, FeatureMatrix>| -> Vec<FeatureMatrix> { channels.iter().map(|c| m[c].clone()).collect() };
    let (train, held) = (pick(&fc.train), pick(&fc.heldout));
    let cv = cfg.cv_config();
    let groups: Vec<(String, FeatureMatrix, FeatureMatrix)> = match cfg.fusion.mode {
        FusionMode::FeatureLevel => {
            let fuse = |v: &[FeatureMatrix]| FeatureMatrix::hconcat(&v.iter().collect::<Vec<_>>());
            let name = channels.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
            vec![(name, fuse(&train)?, fuse(&held)?)]
        }
        FusionMode::ScoreLevel => channels
            .iter()
            .zip(train.into_iter().zip(held))
            .map(|(c, (t, h))| (c.to_string(), t, h))
            .collect(),
    };
    let truth: BTreeMap<&str, Label> = fc.heldout[&channels[0]]
        .subject_ids
        .iter()
        .zip(&fc.heldout[&channels[0]].labels)
        .map(|(s, l)| (s.as_str(), *l))
        .collect();
    let mut fused: BTreeMap<String, HeldoutPrediction> = BTreeMap::new();
    let mut order = Vec::new();
    for (name, t, h) in &groups {
        for p in train_full_and_predict(t, h, &cv)? {
            let entry = fused.entry(p.subject_id.clone()).or_insert_with(|| {
                order.push(p.subject_id.clone());
                HeldoutPrediction {
                    subject_id: p.subject_id.clone(),
                    truth: truth[p.subject_id.as_str()],
                    predicted: p.predicted,
                    mean_probability: 0.0,
                    epochs: BTreeMap::new(),
                }
            });
            entry.mean_probability += p.mean_probability / groups.len() as f64;
            entry.epochs.insert(name.clone(), p.epochs);
            if groups.len() == 1 {
                entry.predicted = p.predicted;
            }
        }
    }
    let preds: Vec<HeldoutPrediction> = order
        .iter()
        .map(|s| {
            let mut p = fused.remove(s).expect("subject recorded");
            if groups.len() > 1 {
                p.predicted = if p.mean_probability >= 0.5 { Label::Cad } else { Label::Normal };
            }
            p
        })
        .collect();
    let metrics = Metrics::from_predictions(
        &preds.iter().map(|p| p.truth).collect::<Vec<_>>(),
        &preds.iter().map(|p| p.predicted).collect::<Vec<_>>(),
    )?;
    let details = json!({ "subjects": preds.len(), "acc": metrics.acc });
    let out = write_artifact(
        cfg,
        "predict",
        "predict.json",
        json!({ "channels": channels, "mode": cfg.fusion.mode, "subject_metrics": metrics, "predictions": preds }),
    )?;
    Ok(summary("predict", &[out], details))
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn split_by_label(fm: &FeatureMatrix, j: usize) -> (Vec<f64>, Vec<f64>) {
    let col = fm.column(j);
    let cad = col.iter().zip(&fm.labels).filter(|(_, l)| l.is_cad()).map(|(v, _)| *v).collect();
    let normal = col.iter().zip(&fm.labels).filter(|(_, l)| !l.is_cad()).map(|(v, _)| *v).collect();
    (cad, normal)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn read_json(path: &Path) -> Option<Value> {
    serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
}

fn metric_row(label: &str, m: &Value) -> String {
    let g = |k: &str| m.get(k).and_then(Value::as_f64).unwrap_or(f64::NAN);
    let sens_spec = m
        .get("sens_spec")
        .and_then(Value::as_f64)
        .unwrap_or((g("sens") + g("spec")) / 2.0);
    format!(
        "| {label} | {:.4} | {:.4} | {:.4} | {:.4} | {sens_spec:.4} |\n",
        g("acc"),
        g("sens"),
        g("spec"),
        g("f1"),
    )
}

const METRIC_HEADER: &str = "| | Acc | Sens | Spec | F1 | Sens-Spec |\n|---|---|---|---|---|---|\n";

pub fn report(cfg: &PipelineConfig) -> Result<Value, CliError> {
    let (ep, _) = cache::epochs(cfg)?;
    let (fc, _) = cache::features(cfg)?;
    let specs = cfg.channel_specs()?;
    let dir = cfg.paths.output_dir.join("report");
    fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    let mut md = String::from("# Screening report\n\n");
    md.push_str(&format!(
        "pcgscreen {TOOL_VERSION}, seed {}, {} training subjects, {} held-out subjects.\n\n",
        cfg.seed,
        ep.train.len(),
        ep.heldout.len()
    ));

    if let Some(v) = read_json(&cfg.paths.output_dir.join("evaluate.json")) {
        let r = &v["result"]["report"];
        md.push_str(&format!("## Cross-validation (channels {})\n\n", v["result"]["channels"]));
        md.push_str(METRIC_HEADER);
        md.push_str(&metric_row("epoch", &r["epoch_metrics"]));
        md.push_str(&metric_row("subject", &r["subject_metrics"]));
        md.push('\n');
    }
    if let Some(v) = read_json(&cfg.paths.output_dir.join("search.json")) {
        md.push_str("## Best channel subset per size\n\n");
        md.push_str("| channels | features | Acc | Sens | Spec | F1 | Sens-Spec |\n|---|---|---|---|---|---|---|\n");
        for r in v["result"]["best_per_cardinality"].as_array().into_iter().flatten() {
            let chans: Vec<String> = r["channels"].as_array().into_iter().flatten().map(|c| c.to_string()).collect();
            let row = metric_row(&chans.join("-"), &r["subject"]);
            md.push_str(&row.replacen(" | ", &format!(" | {} | ", r["n_features"]), 1));
        }
        md.push('\n');
    }
    if let Some(v) = read_json(&cfg.paths.output_dir.join("predict.json")) {
        md.push_str("## Held-out cohort\n\n");
        md.push_str(METRIC_HEADER);
        md.push_str(&metric_row("subject", &v["result"]["subject_metrics"]));
        md.push('\n');
    }

    let mut stats = BTreeMap::new();
    md.push_str("## Feature significance (Wilcoxon rank sum, epochs)\n\n| channel | family | features | p < 0.05 | best feature | p |\n|---|---|---|---|---|---|\n");
    for (&ch, fm) in &fc.train {
        let spec = &specs[&ch];

        // PSD mean and spread per class
        let mut psd: BTreeMap<Label, Vec<Vec<f64>>> = BTreeMap::new();
        let mut freqs = Vec::new();
        for s in &ep.train {
            for e in s.channel(ch) {
                let est = welch_psd(&e.samples, TARGET_FS_HZ, WELCH_WINDOW, 0.5)?;
                freqs = est.freqs_hz.clone();
                psd.entry(s.label).or_default().push(est.density.iter().map(|d| 10.0 * d.max(1e-20).log10()).collect());
            }
        }
        let mut curves = Vec::new();
        for (label, rows) in &psd {
            let stats: Vec<(f64, f64)> = (0..freqs.len())
                .map(|b| mean_std(&rows.iter().map(|r| r[b]).collect::<Vec<_>>()))
                .collect();
            let mean: Vec<f64> = stats.iter().map(|s| s.0).collect();
            let lo: Vec<f64> = stats.iter().map(|s| s.0 - s.1).collect();
            let hi: Vec<f64> = stats.iter().map(|s| s.0 + s.1).collect();
            curves.push((*label, mean, lo, hi));
        }
        let series: Vec<Series> = curves
            .iter()
            .map(|(l, m, lo, hi)| Series {
                name: if l.is_cad() { "CAD" } else { "Normal" },
                color: if l.is_cad() { CAD_COLOR } else { NORMAL_COLOR },
                x: &freqs,
                y: m,
                band: Some((lo, hi)),
            })
            .collect();
        let p = dir.join(format!("psd_ch{ch}.svg"));
        fs::write(
            &p,
            svg::line_chart(&format!("Channel {ch}: Welch PSD, mean ± std"), "Frequency (Hz)", "PSD (dB/Hz)", &series),
        )?;
        outputs.push(p);

        // per-feature rank-sum tests
        let tests: Vec<(usize, f64)> = (0..fm.n_cols())
            .map(|j| {
                let (cad, normal) = split_by_label(fm, j);
                Ok((j, wilcoxon_rank_sum(&cad, &normal)?))
            })
            .collect::<Result<_, pcgscreen::Error>>()?;
        let mut ranked = tests.clone();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let significant = tests.iter().filter(|t| t.1 < 0.05).count();
        let top: Vec<(usize, f64)> = ranked.iter().take(cfg.report.top_features).copied().collect();
        let groups: Vec<BoxGroup> = top
            .iter()
            .map(|&(j, pv)| {
                let (cad, normal) = split_by_label(fm, j);
                BoxGroup {
                    label: fm.columns[j].name.clone(),
                    cad,
                    normal,
                    stars: stars(pv),
                }
            })
            .collect();
        let p = dir.join(format!("box_ch{ch}.svg"));
        fs::write(&p, svg::box_plot(&format!("Channel {ch}: most separating features"), "value", &groups))?;
        outputs.push(p);
        if let Some(&(j, pv)) = top.first() {
            md.push_str(&format!(
                "| {ch} | {} | {} | {significant} | {} | {pv:.2e} |\n",
                spec.name(),
                fm.n_cols(),
                fm.columns[j].name
            ));
        }

        // standardized CAD - Normal difference over frames and coefficients
        if let FeatureSpec::Cepstral(c) = spec {
            let per = c.coeffs_per_frame();
            let effect: Vec<f64> = (0..fm.n_cols())
                .map(|j| {
                    let (cad, normal) = split_by_label(fm, j);
                    let (mc, sc) = mean_std(&cad);
                    let (mn, sn) = mean_std(&normal);
                    let pooled = ((sc * sc + sn * sn) / 2.0).sqrt();
                    if pooled > 0.0 {
                        (mc - mn) / pooled
                    } else {
                        0.0
                    }
                })
                .collect();
            let grid: Vec<Vec<f64>> = (0..per)
                .map(|k| (0..c.num_frames).map(|f| effect[f * per + k]).collect())
                .collect();
            let labels: Vec<String> = (c.coeff_lo..=c.coeff_hi).map(|k| format!("c{k}")).collect();
            let p = dir.join(format!("cepstral_ch{ch}.svg"));
            fs::write(
                &p,
                svg::heatmap(
                    &format!("Channel {ch}: {} effect size (CAD - Normal)", spec.name().to_uppercase()),
                    "Frame",
                    "Coefficient",
                    &grid,
                    &labels,
                ),
            )?;
            outputs.push(p);
        }

        stats.insert(
            ch.to_string(),
            json!({
                "family": spec.name(),
                "n_features": fm.n_cols(),
                "n_significant": significant,
                "top": top.iter().map(|&(j, pv)| json!({ "feature": fm.columns[j].name, "p_value": pv })).collect::<Vec<_>>(),
            }),
        );
    }
    md.push_str("\nPlots: `psd_ch*.svg` (class PSD mean ± std), `cepstral_ch*.svg` (effect-size heatmaps), `box_ch*.svg` (top features; * p < 0.05, ** p < 0.01, *** p < 0.001).\n");
    let p = dir.join("report.md");
    fs::write(&p, md)?;
    outputs.insert(0, p);
    let stats_path = write_artifact(cfg, "report", "report/stats.json", &stats)?;
    outputs.insert(1, stats_path);
    Ok(summary("report", &outputs, json!({ "channels": fc.train.len() })))
}
