//! Subcommand implementations: each one runs the corresponding experiment
//! and writes deterministic CSV files (and optional SVG plots) into the
//! output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use uniondet_core::bounds::BoundReport;
use uniondet_core::detect::{glrt, PreparedUnion};
use uniondet_core::error::{Error, Result};
use uniondet_core::geometry::{learn_basis_svd, Subspace, UnionModel};
use uniondet_core::io;
use uniondet_core::noise::{NoiseModel, Regime};
use uniondet_core::sim::{
    angle_sweep, calibrate_threshold, gap_experiment, n0_sweep, noise_geometry_experiment,
    roc_sweep, AnglePoint, CurvePoint, NoiseGeometryReport,
};

use crate::config::{check_target_pfa, RunConfig};
use crate::svg::Plot;

/// Everything a config-driven command needs.
pub struct CommandContext {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub plot: bool,
}

impl CommandContext {
    fn ensure_output_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::Io {
            what: format!("cannot create {}: {e}", self.output_dir.display()),
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.output_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| Error::Io { what: format!("{}: {e}", path.display()) })?;
        Ok(path)
    }

    fn write_plot(&self, name: &str, plot: &Plot) -> Result<()> {
        if self.plot {
            self.write(name, &plot.render())?;
        }
        Ok(())
    }
}

fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CurvePoint::CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

fn bounds_csv(points: &[CurvePoint], k0: usize, scenario_prefix: &str) -> String {
    let mut out = BoundReport::csv_header(k0);
    out.push('\n');
    for p in points {
        out.push_str(&p.report.csv_row(&format!("{scenario_prefix}@{}", p.target_pfa)));
        out.push('\n');
    }
    out
}

pub fn cmd_calibrate(ctx: &CommandContext, target_pfa: Option<f64>) -> Result<()> {
    let scenario = ctx.config.build_scenario(&ctx.base_dir, ctx.seed_override)?;
    let targets: Vec<f64> = match target_pfa {
        Some(p) => vec![check_target_pfa(p)?],
        None => {
            let roc = ctx.config.roc.as_ref().ok_or_else(|| Error::InvalidConfig {
                what: "no --target-pfa flag and no [roc] section in the config".into(),
            })?;
            roc.target_pfa.clone()
        }
    };
    for &p in &targets {
        check_target_pfa(p)?;
    }
    ctx.ensure_output_dir()?;
    let mut csv = String::from("target_pfa,gamma_bar\n");
    for &p in &targets {
        let gamma = calibrate_threshold(&scenario, p, ctx.config.trials.calibration)?;
        println!("target_pfa {p}: gamma_bar {gamma}");
        csv.push_str(&format!("{p},{gamma}\n"));
    }
    let path = ctx.write("calibration.csv", &csv)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_roc(ctx: &CommandContext) -> Result<()> {
    let scenario = ctx.config.build_scenario(&ctx.base_dir, ctx.seed_override)?;
    let roc = ctx.config.roc.as_ref().ok_or_else(|| Error::InvalidConfig {
        what: "config has no [roc] section".into(),
    })?;
    for &p in &roc.target_pfa {
        check_target_pfa(p)?;
    }
    let points = roc_sweep(&scenario, &roc.target_pfa, ctx.config.trials.calibration)?;
    ctx.ensure_output_dir()?;
    let path = ctx.write("roc.csv", &curve_csv(&points))?;
    ctx.write("bounds.csv", &bounds_csv(&points, scenario.union.count(), "roc"))?;

    let mut plot = Plot::new("ROC", "P_FA", "probability");
    plot.add_series("P_D", points.iter().map(|p| (p.summary.pfa, p.summary.pd)).collect());
    plot.add_series("P_C", points.iter().map(|p| (p.summary.pfa, p.summary.pc)).collect());
    plot.add_series("P_D upper", points.iter().map(|p| (p.summary.pfa, p.report.pd_upper)).collect());
    plot.add_series("P_D lower", points.iter().map(|p| (p.summary.pfa, p.report.pd_lower)).collect());
    ctx.write_plot("roc.svg", &plot)?;

    for p in &points {
        println!(
            "target_pfa {}: gamma_bar {:.6} pfa {:.4} pd {:.4} pc {:.4}",
            p.target_pfa, p.gamma_bar, p.summary.pfa, p.summary.pd, p.summary.pc
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_angle_sweep(ctx: &CommandContext) -> Result<()> {
    let sweep_config = ctx.config.build_angle_sweep(&ctx.base_dir, ctx.seed_override)?;
    check_target_pfa(sweep_config.target_pfa)?;
    let n = sweep_config.scenario.union.subspace_dim();
    let k0 = sweep_config.scenario.union.count();
    let points = angle_sweep(&sweep_config)?;
    ctx.ensure_output_dir()?;
    let mut csv = AnglePoint::csv_header(n, k0);
    csv.push('\n');
    for p in &points {
        csv.push_str(&p.csv_row());
        csv.push('\n');
        if p.duplicate_flag {
            eprintln!(
                "warning: grid point {:?} makes two subspaces effectively identical",
                p.requested_angles
            );
        }
    }
    let path = ctx.write("angle_sweep.csv", &csv)?;

    let mut plot = Plot::new("Angle sweep", "whitened min angle (rad)", "probability");
    plot.add_series("P_D", points.iter().map(|p| (p.whitened_angle_min, p.point.summary.pd)).collect());
    for k in 0..k0 {
        plot.add_series(
            &format!("P_C class {}", k + 1),
            points
                .iter()
                .map(|p| (p.whitened_angle_min, p.point.summary.per_class[k].pc))
                .collect(),
        );
    }
    ctx.write_plot("angle_sweep.svg", &plot)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_noise_geometry(ctx: &CommandContext) -> Result<()> {
    let config = ctx.config.build_noise_geometry(ctx.seed_override)?;
    check_target_pfa(config.target_pfa)?;
    let report = noise_geometry_experiment(&config)?;
    ctx.ensure_output_dir()?;
    let mut csv = String::from(NoiseGeometryReport::CSV_HEADER);
    csv.push('\n');
    for row in report.csv_rows() {
        csv.push_str(&row);
        csv.push('\n');
    }
    let path = ctx.write("noise_geometry.csv", &csv)?;

    let mut plot = Plot::new("Noise geometry", "mean whitened signal norm", "P_D");
    let mut pairs: Vec<(f64, f64)> = report
        .per_subspace
        .iter()
        .map(|s| (s.mean_whitened_norm, s.pd))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite norms"));
    plot.add_series("P_D", pairs);
    ctx.write_plot("noise_geometry.svg", &plot)?;

    for (k, s) in report.per_subspace.iter().enumerate() {
        println!(
            "subspace {}: mean |x_bar| {:.4} pd {:.4} pc {:.4}",
            k + 1,
            s.mean_whitened_norm,
            s.pd,
            s.pc
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_gap(ctx: &CommandContext) -> Result<()> {
    let scenario = ctx.config.build_scenario(&ctx.base_dir, ctx.seed_override)?;
    let section = ctx.config.gap.as_ref().ok_or_else(|| Error::InvalidConfig {
        what: "config has no [gap] section".into(),
    })?;
    for &p in &section.target_pfa {
        check_target_pfa(p)?;
    }
    let curves = gap_experiment(
        &scenario,
        &section.snr_db,
        &section.target_pfa,
        ctx.config.trials.calibration,
    )?;
    ctx.ensure_output_dir()?;
    let mut csv = format!("snr_db,{},gap\n", CurvePoint::CSV_HEADER);
    let mut plot = Plot::new("Detection-classification gap", "target P_FA", "P_D - P_C");
    for curve in &curves {
        for p in &curve.points {
            csv.push_str(&format!("{},{},{}\n", curve.snr_db, p.csv_row(), p.gap()));
        }
        plot.add_series(
            &format!("{} dB", curve.snr_db),
            curve.points.iter().map(|p| (p.target_pfa, p.gap())).collect(),
        );
        println!("snr {} dB: mean gap {:.4}", curve.snr_db, curve.mean_gap());
    }
    let path = ctx.write("gap.csv", &csv)?;
    ctx.write_plot("gap.svg", &plot)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_n0_sweep(ctx: &CommandContext, n0_override: Option<Vec<usize>>) -> Result<()> {
    let scenario = ctx.config.build_scenario(&ctx.base_dir, ctx.seed_override)?;
    let section = ctx.config.n0_sweep.as_ref();
    let n0_grid = match (n0_override, section) {
        (Some(list), _) => list,
        (None, Some(s)) => s.n0.clone(),
        (None, None) => {
            return Err(Error::InvalidConfig {
                what: "no --n0 flag and no [n0_sweep] section in the config".into(),
            })
        }
    };
    let targets = section
        .map(|s| s.target_pfa.clone())
        .or_else(|| ctx.config.roc.as_ref().map(|r| r.target_pfa.clone()))
        .ok_or_else(|| Error::InvalidConfig {
            what: "n0-sweep needs target_pfa from [n0_sweep] or [roc]".into(),
        })?;
    for &p in &targets {
        check_target_pfa(p)?;
    }
    let sweep = n0_sweep(&scenario, &n0_grid, &targets, ctx.config.trials.calibration)?;
    ctx.ensure_output_dir()?;
    let mut csv = format!("regime,n0,{}\n", CurvePoint::CSV_HEADER);
    for p in &sweep.known {
        csv.push_str(&format!("known,0,{}\n", p.csv_row()));
    }
    let mut plot = Plot::new("Training-budget sweep", "target P_FA", "P_D");
    plot.add_series("known", sweep.known.iter().map(|p| (p.target_pfa, p.summary.pd)).collect());
    for (i, (n0, curve)) in sweep.per_n0.iter().enumerate() {
        for p in curve {
            csv.push_str(&format!("unknown-cov,{n0},{}\n", p.csv_row()));
        }
        plot.add_series(
            &format!("N0 = {n0}"),
            curve.iter().map(|p| (p.target_pfa, p.summary.pd)).collect(),
        );
        println!("n0 {n0}: mean |pd - known| {:.4}", sweep.mean_abs_gap(i));
    }
    let path = ctx.write("n0_sweep.csv", &csv)?;
    ctx.write_plot("n0_sweep.svg", &plot)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Learns one orthonormal basis per class label from labeled samples
/// (columns of the data matrix) and writes each as a matrix CSV.
pub fn cmd_learn_bases(
    data_path: &Path,
    labels_path: &Path,
    dim: usize,
    output_dir: &Path,
) -> Result<()> {
    let data = io::read_matrix(data_path)?;
    let labels = io::read_labels(labels_path)?;
    if labels.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} labels (one per data column)", data.ncols()),
            got: format!("{}", labels.len()),
        });
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (col, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(col);
    }
    fs::create_dir_all(output_dir)
        .map_err(|e| Error::Io { what: format!("cannot create {}: {e}", output_dir.display()) })?;

    let mut failures = Vec::new();
    for (label, cols) in &by_class {
        let mut samples = DMatrix::zeros(data.nrows(), cols.len());
        for (j, &col) in cols.iter().enumerate() {
            samples.set_column(j, &data.column(col));
        }
        match learn_basis_svd(&samples, dim) {
            Ok(subspace) => {
                let path = output_dir.join(format!("basis_class_{label}.csv"));
                io::write_matrix(&path, subspace.basis())?;
                println!("class {label}: {} samples -> {}", cols.len(), path.display());
            }
            Err(e) => {
                eprintln!("class {label}: {e}");
                failures.push(*label);
            }
        }
    }
    if !failures.is_empty() {
        return Err(Error::RankDeficient { rank_bound: 0, needed: failures.len() });
    }
    Ok(())
}

pub struct DetectBatchArgs {
    pub bases_dir: PathBuf,
    pub data: PathBuf,
    pub regime: Regime,
    pub sigma2: Option<f64>,
    pub covariance: Option<PathBuf>,
    pub training: Option<PathBuf>,
    pub gamma_bar: f64,
    pub output: PathBuf,
}

fn load_bases(dir: &Path) -> Result<(Vec<usize>, Vec<Subspace>)> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Error::Io { what: format!("{}: {e}", dir.display()) })?;
    let mut by_label: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io { what: e.to_string() })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix("basis_class_").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(label) = rest.parse::<usize>() {
                by_label.insert(label, entry.path());
            }
        }
    }
    if by_label.is_empty() {
        return Err(Error::InvalidConfig {
            what: format!("no basis_class_<label>.csv files in {}", dir.display()),
        });
    }
    let mut labels = Vec::new();
    let mut subspaces = Vec::new();
    for (label, path) in by_label {
        let mat = io::read_matrix(&path)?;
        subspaces.push(Subspace::orthonormalize(&mat)?);
        labels.push(label);
    }
    Ok((labels, subspaces))
}

/// Classifies each observation (column of the data matrix) against the
/// learned bases and writes one decision row per observation.
pub fn cmd_detect_batch(args: &DetectBatchArgs) -> Result<()> {
    let (labels, subspaces) = load_bases(&args.bases_dir)?;
    let union = UnionModel::new(subspaces)?;
    let observations = io::read_matrix(&args.data)?;
    if observations.nrows() != union.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows (columns are observations)", union.ambient_dim()),
            got: format!("{}", observations.nrows()),
        });
    }

    let noise_model = match args.regime {
        Regime::Known => {
            let sigma2 = args.sigma2.ok_or_else(|| Error::InvalidConfig {
                what: "known regime needs --sigma2".into(),
            })?;
            let cov_path = args.covariance.as_ref().ok_or_else(|| Error::InvalidConfig {
                what: "known regime needs --covariance".into(),
            })?;
            NoiseModel::Known { sigma2, covariance: io::read_matrix(cov_path)? }
        }
        Regime::UnknownCovariance => {
            let sigma2 = args.sigma2.ok_or_else(|| Error::InvalidConfig {
                what: "unknown-cov regime needs --sigma2".into(),
            })?;
            let training_path = args.training.as_ref().ok_or_else(|| Error::InvalidConfig {
                what: "unknown-cov regime needs --training".into(),
            })?;
            NoiseModel::UnknownCovariance {
                sigma2,
                training_samples: io::read_matrix(training_path)?,
            }
        }
        Regime::UnknownStatistics => {
            let training_path = args.training.as_ref().ok_or_else(|| Error::InvalidConfig {
                what: "unknown-stats regime needs --training".into(),
            })?;
            NoiseModel::UnknownStatistics { training_samples: io::read_matrix(training_path)? }
        }
    };
    let prep = PreparedUnion::prepare(&union, &noise_model)?;

    let mut csv = String::from("index,khat,statistic,detected\n");
    let mut detected = 0usize;
    let mut class_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for col in 0..observations.ncols() {
        let y = observations.column(col).into_owned();
        let outcome = glrt(&prep, &y, args.gamma_bar)?;
        let flag = outcome.signal_detected as u8;
        if outcome.signal_detected {
            detected += 1;
            *class_counts.entry(labels[outcome.khat]).or_default() += 1;
        }
        csv.push_str(&format!("{},{},{},{}\n", col, labels[outcome.khat], outcome.statistic, flag));
    }
    if let Some(parent) = args.output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Io { what: format!("cannot create {}: {e}", parent.display()) })?;
        }
    }
    fs::write(&args.output, &csv)
        .map_err(|e| Error::Io { what: format!("{}: {e}", args.output.display()) })?;

    let per_class: Vec<String> =
        class_counts.iter().map(|(label, n)| format!("class {label}: {n}")).collect();
    println!(
        "detected {detected}/{} observations ({})",
        observations.ncols(),
        if per_class.is_empty() { "none".to_string() } else { per_class.join(", ") }
    );
    eprintln!("wrote {}", args.output.display());
    Ok(())
}
