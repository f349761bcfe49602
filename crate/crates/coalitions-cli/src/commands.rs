//! Subcommand bodies. Every successful run writes its primary outputs plus
//! exactly one manifest (`<out>.manifest.json`) recording inputs, parameters,
//! outputs, and wall-clock time; main maps errors to exit codes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use coalitions::error::{Error, Result};
use coalitions::generator::{generate, measure_mixing, GeneratorConfig, GroundTruth};
use coalitions::graph::Graph;
use coalitions::lse::{run_lse, LseConfig};
use coalitions::metrics::{bridge_confusion, omega_index, overlapping_nmi, MetricsReport};
use coalitions::milp::{build_f_sh_jk, build_f_sh_mod, export_lp, import_solution, MilpModel};
use coalitions::stability::{
    shapley_sum_objective, structure_objective, validate_structure, CommunityStructure,
};
use coalitions::weights::{
    approx_modular_weights, exact_modular_weights, raw_weights, WeightMatrix,
};

use crate::fileio;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Raw,
    Approx,
    Exact,
}

impl WeightArg {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightArg::Raw => "raw",
            WeightArg::Approx => "approx",
            WeightArg::Exact => "exact",
        }
    }

    pub fn compute(self, g: &Graph) -> Result<WeightMatrix> {
        match self {
            WeightArg::Raw => Ok(raw_weights(g)),
            WeightArg::Approx => approx_modular_weights(g, &raw_weights(g)),
            WeightArg::Exact => exact_modular_weights(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    FShJk,
    FShMod,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    inputs: Vec<String>,
    parameters: serde_json::Value,
    outputs: Vec<String>,
    wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn write_manifest(anchor: &Path, manifest: &RunManifest) -> Result<()> {
    let path = fileio::with_suffix(anchor, ".manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fileio::write_string(&path, &(text + "\n"))
}

pub fn cmd_weights(graph: &Path, weights: WeightArg, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let g = fileio::read_graph(graph)?;
    let w = weights.compute(&g)?;
    let mut text = String::new();
    for i in 0..w.n() {
        for j in i + 1..w.n() {
            let v = w.get(i, j);
            if v != 0.0 {
                let _ = writeln!(text, "{} {} {}", g.label(i), g.label(j), v);
            }
        }
    }
    fileio::write_string(out, &text)?;
    write_manifest(
        out,
        &RunManifest {
            command: "weights",
            inputs: vec![display(graph)],
            parameters: json!({ "weights": weights.as_str() }),
            outputs: vec![display(out)],
            wall_seconds: started.elapsed().as_secs_f64(),
            objective: None,
        },
    )?;
    Ok(())
}

pub struct DetectParams<'a> {
    pub graph: &'a Path,
    pub n_c: usize,
    pub p: usize,
    pub weights: WeightArg,
    pub t_max: usize,
    pub seed: u64,
    pub out: &'a Path,
}

pub fn cmd_detect(args: &DetectParams<'_>) -> CliResult<()> {
    let started = Instant::now();
    let g = fileio::read_graph(args.graph)?;
    let w = args.weights.compute(&g)?;
    let cfg = LseConfig::new(args.t_max, args.seed)?;
    let res = run_lse(&w, &g, args.n_c, args.p, &cfg)?;
    fileio::write_string(args.out, &res.structure.to_text(&g))?;

    let violations = validate_structure(&w, &res.structure);
    let communities: Vec<Vec<u64>> = res
        .structure
        .communities()
        .iter()
        .map(|c| c.iter().map(|&i| g.label(i)).collect())
        .collect();
    let report = json!({
        "objective": res.objective,
        "weights": args.weights.as_str(),
        "n_c": args.n_c,
        "p": args.p,
        "t_max": args.t_max,
        "seed": args.seed,
        "communities": communities,
        "validation": {
            "feasible": violations.is_empty(),
            "violations": violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        },
        "starts": res.reports,
    });
    let report_path = fileio::with_suffix(args.out, ".report.json");
    fileio::write_string(&report_path, &(serde_json::to_string_pretty(&report).unwrap() + "\n"))?;

    write_manifest(
        args.out,
        &RunManifest {
            command: "detect",
            inputs: vec![display(args.graph)],
            parameters: json!({
                "n_c": args.n_c,
                "p": args.p,
                "weights": args.weights.as_str(),
                "t_max": args.t_max,
                "seed": args.seed,
            }),
            outputs: vec![display(args.out), display(&report_path)],
            wall_seconds: started.elapsed().as_secs_f64(),
            objective: Some(res.objective),
        },
    )?;
    Ok(())
}

pub struct ModelParams<'a> {
    pub graph: &'a Path,
    pub formulation: FormulationArg,
    pub weights: Option<WeightArg>,
    pub n_c: usize,
    pub p: Option<usize>,
}

/// Resolves formulation + weight flags into a model. `f-sh-jk` is defined on
/// raw weights and takes no membership limit; `f-sh-mod` needs `--p` and one
/// of the two corrected weight systems.
fn build_model(g: &Graph, args: &ModelParams<'_>) -> CliResult<(WeightMatrix, MilpModel, &'static str)> {
    match args.formulation {
        FormulationArg::FShJk => {
            if !matches!(args.weights, None | Some(WeightArg::Raw)) {
                return Err(CliError::Usage(
                    "f-sh-jk is defined on raw weights; drop --weights or pass raw".into(),
                ));
            }
            if args.p.is_some() {
                return Err(CliError::Usage("--p applies only to f-sh-mod".into()));
            }
            let w = raw_weights(g);
            let m = build_f_sh_jk(&w, args.n_c)?;
            Ok((w, m, "F_Sh-JK"))
        }
        FormulationArg::FShMod => {
            let p = args
                .p
                .ok_or_else(|| CliError::Usage("f-sh-mod requires --p".into()))?;
            let (w, name) = match args.weights {
                Some(WeightArg::Exact) => (exact_modular_weights(g)?, "F*_Sh-Mod"),
                Some(WeightArg::Approx) => {
                    (approx_modular_weights(g, &raw_weights(g))?, "F'_Sh-Mod")
                }
                _ => {
                    return Err(CliError::Usage(
                        "f-sh-mod requires --weights exact or --weights approx".into(),
                    ))
                }
            };
            let m = build_f_sh_mod(&w, args.n_c, p)?;
            Ok((w, m, name))
        }
    }
}

pub fn cmd_export_milp(args: &ModelParams<'_>, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let g = fileio::read_graph(args.graph)?;
    let (_, model, name) = build_model(&g, args)?;
    fileio::write_string(out, &export_lp(&model))?;
    write_manifest(
        out,
        &RunManifest {
            command: "export-milp",
            inputs: vec![display(args.graph)],
            parameters: json!({
                "formulation": name,
                "weights": args.weights.map(WeightArg::as_str),
                "n_c": args.n_c,
                "p": args.p,
            }),
            outputs: vec![display(out)],
            wall_seconds: started.elapsed().as_secs_f64(),
            objective: None,
        },
    )?;
    Ok(())
}

pub fn cmd_import_solution(args: &ModelParams<'_>, solution: &Path, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let g = fileio::read_graph(args.graph)?;
    let (w, model, name) = build_model(&g, args)?;
    let text = fileio::read_to_string(solution)?;
    let imported = import_solution(&w, &model, &text)?;
    let objective = match args.formulation {
        FormulationArg::FShJk => shapley_sum_objective(&w, &imported.structure),
        FormulationArg::FShMod => structure_objective(&w, &imported.structure),
    };
    fileio::write_string(out, &imported.structure.to_text(&g))?;
    let report = json!({
        "objective": objective,
        "formulation": name,
        "feasible": imported.violations.is_empty(),
        "violations": imported.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "warnings": imported.warnings,
    });
    let report_path = fileio::with_suffix(out, ".report.json");
    fileio::write_string(&report_path, &(serde_json::to_string_pretty(&report).unwrap() + "\n"))?;
    write_manifest(
        out,
        &RunManifest {
            command: "import-solution",
            inputs: vec![display(args.graph), display(solution)],
            parameters: json!({
                "formulation": name,
                "weights": args.weights.map(WeightArg::as_str),
                "n_c": args.n_c,
                "p": args.p,
            }),
            outputs: vec![display(out), display(&report_path)],
            wall_seconds: started.elapsed().as_secs_f64(),
            objective: Some(objective),
        },
    )?;
    Ok(())
}

pub struct GenerateParams<'a> {
    pub config: Option<&'a Path>,
    pub n: Option<usize>,
    pub n_o: usize,
    pub p: usize,
    pub n_c: Option<usize>,
    pub mu: Option<f64>,
    pub mu_o: f64,
    pub gamma: f64,
    pub beta: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub seed: Option<u64>,
    pub count: usize,
    pub out: &'a Path,
}

fn base_config(args: &GenerateParams<'_>) -> CliResult<GeneratorConfig> {
    if let Some(path) = args.config {
        let text = fileio::read_to_string(path)?;
        let mut cfg: GeneratorConfig = serde_json::from_str(&text).map_err(|e| {
            Error::Parse { line: e.line(), msg: format!("config file: {}", e) }
        })?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        return Ok(cfg);
    }
    Ok(GeneratorConfig {
        n: args.n.ok_or_else(|| CliError::Usage("--n is required without --config".into()))?,
        n_o: args.n_o,
        p: args.p,
        n_c: args
            .n_c
            .ok_or_else(|| CliError::Usage("--nc is required without --config".into()))?,
        mu: args.mu.ok_or_else(|| CliError::Usage("--mu is required without --config".into()))?,
        mu_o: args.mu_o,
        gamma: args.gamma,
        beta: args.beta,
        k_min: args.k_min,
        k_max: args.k_max,
        s_min: args.s_min,
        s_max: args.s_max,
        seed: args.seed.unwrap_or(0),
    })
}

fn instance_prefix(out: &Path, count: usize, index: usize) -> PathBuf {
    if count == 1 {
        return out.to_path_buf();
    }
    let width = (count - 1).to_string().len().max(3);
    fileio::with_suffix(out, &format!("_{:0width$}", index))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn write_instance(cfg: &GeneratorConfig, prefix: &Path) -> Result<Vec<PathBuf>> {
    let (g, gt) = generate(cfg)?;
    let edges_path = fileio::with_suffix(prefix, ".edges");
    let truth_path = fileio::with_suffix(prefix, ".truth");
    let bridges_path = fileio::with_suffix(prefix, ".bridges");
    let sidecar_path = fileio::with_suffix(prefix, ".json");

    fileio::write_string(&edges_path, &g.to_edge_list_text())?;
    let truth: Vec<Vec<u64>> = gt
        .communities
        .iter()
        .map(|c| c.iter().map(|&i| g.label(i)).collect())
        .collect();
    fileio::write_string(&truth_path, &fileio::cover_text(&truth))?;
    let bridges: Vec<String> = gt.bridge_nodes.iter().map(|&i| g.label(i).to_string()).collect();
    let mut bridge_text = bridges.join("\n");
    if !bridge_text.is_empty() {
        bridge_text.push('\n');
    }
    fileio::write_string(&bridges_path, &bridge_text)?;

    let (mu_hat, mu_o_hat) = measure_mixing(&g, &gt);
    let sizes: Vec<usize> = gt.communities.iter().map(Vec::len).collect();
    let sidecar = json!({
        "config": cfg,
        "realized": {
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "community_sizes": sizes,
            "community_size_sum": sizes.iter().sum::<usize>(),
            "bridge_count": gt.bridge_nodes.len(),
            "mu_hat": finite(mu_hat),
            "mu_o_hat": finite(mu_o_hat),
        },
    });
    fileio::write_string(&sidecar_path, &(serde_json::to_string_pretty(&sidecar).unwrap() + "\n"))?;
    Ok(vec![edges_path, truth_path, bridges_path, sidecar_path])
}

pub fn cmd_generate(args: &GenerateParams<'_>) -> CliResult<()> {
    let started = Instant::now();
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let base = base_config(args)?;
    base.validate()?;

    let written: Vec<Vec<PathBuf>> = (0..args.count)
        .into_par_iter()
        .map(|index| {
            let cfg =
                GeneratorConfig { seed: base.seed.wrapping_add(index as u64), ..base.clone() };
            write_instance(&cfg, &instance_prefix(args.out, args.count, index))
        })
        .collect::<Result<_>>()?;

    write_manifest(
        args.out,
        &RunManifest {
            command: "generate",
            inputs: args.config.map(display).into_iter().collect(),
            parameters: json!({ "config": base, "count": args.count }),
            outputs: written.iter().flatten().map(|p| display(p)).collect(),
            wall_seconds: started.elapsed().as_secs_f64(),
            objective: None,
        },
    )?;
    Ok(())
}

pub struct EvaluateParams<'a> {
    pub pred: &'a Path,
    pub truth: &'a Path,
    pub bridges: &'a Path,
    pub out: &'a Path,
    pub tsv: Option<&'a Path>,
}

/// One evaluation instance: label covers plus the true bridge list.
fn evaluate_one(pred: &Path, truth: &Path, bridges: &Path) -> CliResult<MetricsReport> {
    let pred_cover = fileio::parse_cover(&fileio::read_to_string(pred)?)?;
    let truth_cover = fileio::parse_cover(&fileio::read_to_string(truth)?)?;
    let bridge_labels = fileio::parse_label_list(&fileio::read_to_string(bridges)?)?;

    let universe: BTreeSet<u64> = truth_cover.iter().flatten().copied().collect();
    let pred_nodes: BTreeSet<u64> = pred_cover.iter().flatten().copied().collect();
    if pred_nodes != universe {
        let missing: Vec<u64> = universe.difference(&pred_nodes).take(5).copied().collect();
        let extra: Vec<u64> = pred_nodes.difference(&universe).take(5).copied().collect();
        return Err(Error::Validation(format!(
            "prediction and ground truth cover different node sets (missing {:?}, extra {:?})",
            missing, extra
        ))
        .into());
    }
    if let Some(&b) = bridge_labels.iter().find(|b| !universe.contains(b)) {
        return Err(Error::Validation(format!(
            "bridge node {} does not occur in the ground truth",
            b
        ))
        .into());
    }

    let ids: BTreeMap<u64, usize> =
        universe.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let to_ids = |cover: &[Vec<u64>]| -> Vec<Vec<usize>> {
        cover
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(|l| ids[l]).collect();
                v.sort_unstable();
                v
            })
            .collect()
    };
    let pred_ids = to_ids(&pred_cover);
    let truth_ids = to_ids(&truth_cover);
    let n = universe.len();

    let nmi = overlapping_nmi(&pred_ids, &truth_ids, n)?;
    let omega = omega_index(&pred_ids, &truth_ids, n)?;

    let max_membership = (0..n)
        .map(|i| pred_ids.iter().filter(|c| c.binary_search(&i).is_ok()).count())
        .max()
        .unwrap_or(1)
        .max(1);
    let pred_structure =
        CommunityStructure::new(n, pred_ids.len(), max_membership, pred_ids.clone())?;
    let mut bridge_nodes: Vec<usize> = bridge_labels.iter().map(|l| ids[l]).collect();
    bridge_nodes.sort_unstable();
    bridge_nodes.dedup();
    let gt = GroundTruth { communities: truth_ids, bridge_nodes };
    let bridge = bridge_confusion(&pred_structure, &gt)?;
    Ok(MetricsReport::assemble(nmi, omega, &bridge))
}

/// Batch instances are `<stem>.truth` files in the truth directory, matched
/// with `<stem>.cover` and `<stem>.bridges` in the other two.
fn batch_instances(args: &EvaluateParams<'_>) -> CliResult<Vec<(String, PathBuf, PathBuf, PathBuf)>> {
    if !args.pred.is_dir() || !args.bridges.is_dir() {
        return Err(CliError::Usage(
            "batch mode needs --pred, --truth, and --bridges to all be directories".into(),
        ));
    }
    let mut stems = Vec::new();
    let entries = std::fs::read_dir(args.truth)
        .map_err(|source| Error::Io { path: args.truth.to_path_buf(), source })?;
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io { path: args.truth.to_path_buf(), source })?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "truth") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        return Err(Error::Validation(format!(
            "no .truth files found in {}",
            args.truth.display()
        ))
        .into());
    }
    Ok(stems
        .into_iter()
        .map(|stem| {
            let pred = args.pred.join(format!("{}.cover", stem));
            let truth = args.truth.join(format!("{}.truth", stem));
            let bridges = args.bridges.join(format!("{}.bridges", stem));
            (stem, pred, truth, bridges)
        })
        .collect())
}

fn mean_of(rows: &[MetricsReport]) -> serde_json::Value {
    let k = rows.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| rows.iter().map(f).sum::<f64>() / k;
    json!({
        "nmi": mean(|r| r.nmi),
        "omega": mean(|r| r.omega),
        "accuracy": mean(|r| r.accuracy),
        "tpr": mean(|r| r.tpr),
        "fpr": mean(|r| r.fpr),
        "auc": mean(|r| r.auc),
        "precision": mean(|r| r.precision),
        "f1": mean(|r| r.f1),
        "tp": mean(|r| r.tp as f64),
        "tn": mean(|r| r.tn as f64),
        "fp": mean(|r| r.fp as f64),
        "fn": mean(|r| r.fn_ as f64),
    })
}

fn tsv_row(name: &str, r: &MetricsReport) -> String {
    format!(
        "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\n",
        name, r.nmi, r.omega, r.accuracy, r.tpr, r.fpr, r.auc, r.precision, r.f1, r.tp, r.tn,
        r.fp, r.fn_
    )
}

pub fn cmd_evaluate(args: &EvaluateParams<'_>) -> CliResult<()> {
    let started = Instant::now();
    let instances: Vec<(String, PathBuf, PathBuf, PathBuf)> = if args.truth.is_dir() {
        batch_instances(args)?
    } else {
        let name = args
            .pred
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "instance".into());
        vec![(name, args.pred.to_path_buf(), args.truth.to_path_buf(), args.bridges.to_path_buf())]
    };

    let rows: Vec<(String, MetricsReport)> = instances
        .par_iter()
        .map(|(name, pred, truth, bridges)| {
            evaluate_one(pred, truth, bridges).map(|r| (name.clone(), r))
        })
        .collect::<CliResult<_>>()?;

    let reports: Vec<MetricsReport> = rows.iter().map(|(_, r)| r.clone()).collect();
    let mean = mean_of(&reports);
    let out_json = json!({
        "instances": rows
            .iter()
            .map(|(name, r)| json!({ "instance": name, "metrics": r }))
            .collect::<Vec<_>>(),
        "mean": mean,
    });
    fileio::write_string(args.out, &(serde_json::to_string_pretty(&out_json).unwrap() + "\n"))?;

    let tsv_path = match args.tsv {
        Some(p) => p.to_path_buf(),
        None => args.out.with_extension("tsv"),
    };
    let mut tsv = String::from(
        "instance\tnmi\tomega\taccuracy\ttpr\tfpr\tauc\tprecision\tf1\ttp\ttn\tfp\tfn\n",
    );
    for (name, r) in &rows {
        tsv.push_str(&tsv_row(name, r));
    }
    let k = reports.len() as f64;
    let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    // Counts have no meaningful mean; the mean row carries rates only.
    tsv.push_str(&format!(
        "mean\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t-\t-\t-\t-\n",
        avg(|r| r.nmi),
        avg(|r| r.omega),
        avg(|r| r.accuracy),
        avg(|r| r.tpr),
        avg(|r| r.fpr),
        avg(|r| r.auc),
        avg(|r| r.precision),
        avg(|r| r.f1)
    ));
    fileio::write_string(&tsv_path, &tsv)?;

    write_manifest(
        args.out,
        &RunManifest {
            command: "evaluate",
            inputs: vec![display(args.pred), display(args.truth), display(args.bridges)],
            parameters: json!({ "instances": rows.len() }),
            outputs: vec![display(args.out), display(&tsv_path)],
            wall_seconds: started.elapsed().as_secs_f64(),
            objective: None,
        },
    )?;
    Ok(())
}
