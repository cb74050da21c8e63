//! One function per CLI verb. Human-readable output goes to `out`; artifacts
//! are written below the output directory.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use qsurrogate::clustering::{k_sweep, KSelectionReport};
use qsurrogate::femgen::{
    build_frame, conditioning_diagnostic, sample_dataset, ConditioningReport, Dataset,
};
use qsurrogate::nn::{build_variant, Checkpoint, EpochRecord, VariantTag};
use serde::Serialize;

use crate::compare::{ComparisonRow, ComparisonTable};
use crate::complexity::{complexity, round_sig, ComplexityReport, Dims};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::infer::{infer_stream, InferOptions, InferSummary};
use crate::pipeline::{dataset_hash, fit_variant, score, Prepared, Scores};

/// Resolved configuration plus the directory artifacts go to.
pub struct Context {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: ExperimentConfig, out_dir: PathBuf) -> CliResult<Self> {
        config.validate()?;
        Ok(Self { config, out_dir })
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.config
            .resolve(&self.out_dir, &self.config.paths.dataset)
    }

    pub fn checkpoint_path(&self, tag: VariantTag) -> PathBuf {
        self.config
            .resolve(&self.out_dir, &self.config.paths.checkpoints)
            .join(format!("{tag}.json"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.config
            .resolve(&self.out_dir, &self.config.paths.reports)
            .join(name)
    }

    /// Writes the effective configuration next to the artifacts.
    pub fn write_effective_config(&self) -> CliResult<()> {
        fs::create_dir_all(&self.out_dir)?;
        fs::write(
            self.out_dir.join("effective_config.toml"),
            self.config.effective_toml()?,
        )?;
        Ok(())
    }

    fn load_dataset(&self, path: Option<&Path>) -> CliResult<Dataset> {
        let path = path
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.dataset_path());
        if !path.exists() {
            return Err(CliError::Data(format!(
                "dataset {} not found",
                path.display()
            )));
        }
        Ok(Dataset::load(&path)?)
    }

    fn prepare(&self, ds: &Dataset) -> CliResult<Prepared> {
        let prep = Prepared::new(ds, self.config.nn.test_fraction, self.config.seed)?;
        let expected = self.config.sensor_spec().len();
        if prep.input_dim() != expected {
            return Err(CliError::Data(format!(
                "dataset has {} sensor columns, configuration expects {expected}",
                prep.input_dim()
            )));
        }
        Ok(prep)
    }
}

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    create_parent(path)?;
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GenDataSummary {
    pub path: PathBuf,
    pub samples: usize,
    pub outputs: usize,
    pub displacement_min: f64,
    pub displacement_max: f64,
    pub sensor_max_abs: f64,
    pub conditioning: ConditioningReport,
}

pub fn gen_data(
    ctx: &Context,
    samples: Option<usize>,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<GenDataSummary> {
    let cfg = &ctx.config;
    let n = samples.unwrap_or(cfg.femgen.samples);
    let model = build_frame(&cfg.femgen.frame)?;
    let spec = cfg.sensor_spec();
    let ds = sample_dataset(&model, &spec, &cfg.femgen.loads, n, cfg.seed)?;
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.dataset_path());
    create_parent(&path)?;
    ds.save(&path)?;
    ctx.write_effective_config()?;

    let (mut lo, mut hi, mut smax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for p in &ds.pairs {
        for &v in &p.displacements {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for &v in &p.sensors {
            smax = smax.max(v.abs());
        }
    }
    let conditioning = conditioning_diagnostic(&model, &spec)?;
    let summary = GenDataSummary {
        path,
        samples: ds.len(),
        outputs: ds.n_outputs(),
        displacement_min: lo,
        displacement_max: hi,
        sensor_max_abs: smax,
        conditioning,
    };
    writeln!(
        out,
        "wrote {} samples to {}",
        summary.samples,
        summary.path.display()
    )?;
    writeln!(
        out,
        "frame: {} nodes, {} outputs, sensors {}",
        model.n_nodes(),
        summary.outputs,
        spec.describe()
    )?;
    writeln!(
        out,
        "displacements: [{:.4e}, {:.4e}] m; max |tilt| {:.4e} rad",
        lo, hi, smax
    )?;
    let c = &summary.conditioning;
    writeln!(
        out,
        "conditioning of AᵀA: rank {} of {} outputs, null-space dim {}, κ over nonzero spectrum {:.4e}",
        c.rank, c.n_outputs, c.null_space_dim, c.condition_number
    )?;
    writeln!(
        out,
        "the sensor map cannot be inverted directly: {} readings cannot pin down {} unknowns",
        spec.len(),
        c.n_outputs
    )?;
    Ok(summary)
}

pub fn cluster_analyze(
    ctx: &Context,
    dataset: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<KSelectionReport> {
    let cfg = &ctx.config;
    let ds = ctx.load_dataset(dataset)?;
    let prep = ctx.prepare(&ds)?;
    let data = prep.input_scaler.transform_all(&prep.train_x);
    let hash = dataset_hash(&ds);
    let mut train = cfg.train_config();
    train.max_epochs = cfg.clustering.sweep_epochs;
    let c = &cfg.clustering;
    let report = k_sweep(&data, c.k_min..=c.k_max, cfg.seed, &c.kmeans, |k| {
        let mut arch = cfg.arch();
        arch.cluster_k = k;
        let fitted = fit_variant(
            &prep,
            VariantTag::ClusteredMlp,
            &arch,
            &train,
            &hash,
            |_| {},
        )
        .map_err(|e| qsurrogate::Error::InvalidArgument(e.to_string()))?;
        let m = fitted.scores.standardized;
        Ok((m.nrmse_range, m.r2))
    })?;
    let path = ctx.report_path("k_sweep.csv");
    create_parent(&path)?;
    report.write_csv(BufWriter::new(File::create(&path)?))?;
    ctx.write_effective_config()?;

    writeln!(
        out,
        "{:>3}  {:>12}  {:>10}  {:>14}  {:>12}  {:>8}",
        "k", "wcss", "silhouette", "davies_bouldin", "nrmse", "r2"
    )?;
    for r in &report.rows {
        let opt =
            |v: Option<f64>, p: usize| v.map(|x| format!("{x:.p$}")).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:>3}  {:>12.4}  {:>10.4}  {:>14.4}  {:>12}  {:>8}",
            r.k,
            r.wcss,
            r.silhouette,
            r.davies_bouldin,
            opt(r.nrmse, 6),
            opt(r.r2, 4)
        )?;
        if let Some(n) = &r.note {
            writeln!(out, "     note: {n}")?;
        }
    }
    if let Some(k) = report.best_by(|r| r.silhouette, true) {
        writeln!(out, "highest silhouette at k={k}")?;
    }
    if let Some(k) = report.best_by(|r| r.davies_bouldin, false) {
        writeln!(out, "lowest Davies–Bouldin at k={k}")?;
    }
    writeln!(
        out,
        "read the elbow from the wcss column; report written to {}",
        path.display()
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub variant: VariantTag,
    pub checkpoint: PathBuf,
    pub params: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub scores: Scores,
}

fn write_history(path: &Path, history: &[EpochRecord]) -> CliResult<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            format!("{:e}", r.train_loss),
            format!("{:e}", r.val_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_predictions(path: &Path, rows: &[usize], preds: &[Vec<f64>]) -> CliResult<()> {
    create_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    for (r, p) in rows.iter().zip(preds) {
        let cells: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{r},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn print_scores(out: &mut dyn Write, s: &Scores) -> CliResult<()> {
    let m = &s.standardized;
    writeln!(
        out,
        "test (standardised): mse {:.6e}  rmse {:.6e}  r2 {:.6}  nrmse_range {:.6e}  nrmse_std {:.6e}",
        m.mse, m.rmse, m.r2, m.nrmse_range, m.nrmse_std
    )?;
    let r = &s.raw;
    writeln!(
        out,
        "test (metres):       mse {:.6e}  rmse {:.6e}  r2 {:.6}  nrmse_range {:.6e}  nrmse_std {:.6e}",
        r.mse, r.rmse, r.r2, r.nrmse_range, r.nrmse_std
    )?;
    Ok(())
}

pub fn train(
    ctx: &Context,
    tag: VariantTag,
    dataset: Option<&Path>,
    epochs: Option<usize>,
    out: &mut dyn Write,
) -> CliResult<TrainSummary> {
    let cfg = &ctx.config;
    let ds = ctx.load_dataset(dataset)?;
    let prep = ctx.prepare(&ds)?;
    let arch = cfg.arch();
    let mut train = cfg.train_config();
    if let Some(e) = epochs {
        train.max_epochs = e;
    }
    let hash = dataset_hash(&ds);
    writeln!(
        out,
        "training {tag} on {} samples ({} held out)",
        prep.train_x.len(),
        prep.test_x.len()
    )?;
    let mut progress = Vec::new();
    let fitted = fit_variant(&prep, tag, &arch, &train, &hash, |r| {
        if r.epoch % 10 == 0 {
            progress.push(format!(
                "epoch {:>4}  train {:.6e}  val {:.6e}",
                r.epoch, r.train_loss, r.val_loss
            ));
        }
    })
    .map_err(|e| match e {
        CliError::Numerical(m) => CliError::Numerical(format!("{tag}: {m}")),
        other => other,
    })?;
    for line in progress {
        writeln!(out, "{line}")?;
    }
    let ck_path = ctx.checkpoint_path(tag);
    create_parent(&ck_path)?;
    fitted.checkpoint.save(&ck_path)?;
    write_history(
        &ctx.report_path(&format!("{tag}_history.csv")),
        &fitted.outcome.history,
    )?;
    write_json(
        &ctx.report_path(&format!("{tag}_metrics.json")),
        &fitted.scores,
    )?;
    write_predictions(
        &ctx.report_path(&format!("{tag}_predictions.csv")),
        &prep.test_rows,
        &fitted.predictions,
    )?;
    ctx.write_effective_config()?;
    let summary = TrainSummary {
        variant: tag,
        checkpoint: ck_path,
        params: fitted.checkpoint.model.param_count(),
        epochs_run: fitted.outcome.history.len(),
        best_epoch: fitted.outcome.best_epoch,
        scores: fitted.scores,
    };
    writeln!(
        out,
        "{tag}: {} parameters, {} epochs, best epoch {}, {:.1} s",
        summary.params, summary.epochs_run, summary.best_epoch, fitted.train_seconds
    )?;
    print_scores(out, &summary.scores)?;
    writeln!(
        out,
        "checkpoint written to {}",
        summary.checkpoint.display()
    )?;
    Ok(summary)
}

pub fn evaluate(
    ctx: &Context,
    checkpoint: &Path,
    dataset: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<Scores> {
    let ck = Checkpoint::load(checkpoint)?;
    let ds = ctx.load_dataset(dataset)?;
    let prep = ctx.prepare(&ds)?;
    if ck.model.variant.output_dim != prep.output_dim() {
        return Err(CliError::Data(format!(
            "checkpoint predicts {} values, dataset has {}",
            ck.model.variant.output_dim,
            prep.output_dim()
        )));
    }
    let (scores, _) = score(&ck, &prep.test_x, &prep.test_y)?;
    writeln!(
        out,
        "{} on {} test samples",
        ck.model.variant.tag,
        prep.test_x.len()
    )?;
    print_scores(out, &scores)?;
    Ok(scores)
}

pub fn compare(
    ctx: &Context,
    variants: Option<&[VariantTag]>,
    dataset: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<ComparisonTable> {
    let cfg = &ctx.config;
    let ds = ctx.load_dataset(dataset)?;
    let prep = ctx.prepare(&ds)?;
    let arch = cfg.arch();
    let train = cfg.train_config();
    let hash = dataset_hash(&ds);
    let tags = variants.unwrap_or(&cfg.nn.variants);
    let mut table = ComparisonTable::default();
    for &tag in tags {
        let params = build_variant(tag, prep.input_dim(), prep.output_dim(), &arch)
            .map(|v| v.param_count())
            .unwrap_or(0);
        let row = match fit_variant(&prep, tag, &arch, &train, &hash, |_| {}) {
            Ok(f) => {
                write_predictions(
                    &ctx.report_path(&format!("{tag}_predictions.csv")),
                    &prep.test_rows,
                    &f.predictions,
                )?;
                ComparisonRow {
                    variant: tag,
                    params,
                    scores: Some(f.scores),
                    train_seconds: f.train_seconds,
                    infer_ms: f.infer_ms,
                    note: None,
                }
            }
            Err(e) => ComparisonRow {
                variant: tag,
                params,
                scores: None,
                train_seconds: 0.0,
                infer_ms: 0.0,
                note: Some(e.to_string()),
            },
        };
        writeln!(out, "finished {tag}")?;
        table.rows.push(row);
    }
    let csv_path = ctx.report_path("comparison.csv");
    create_parent(&csv_path)?;
    table.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    table.write_timings(BufWriter::new(File::create(
        ctx.report_path("timings.csv"),
    )?))?;
    ctx.write_effective_config()?;
    writeln!(out)?;
    write!(out, "{}", table.render())?;
    writeln!(
        out,
        "metrics in standardised displacement units; table written to {}",
        csv_path.display()
    )?;
    Ok(table)
}

pub fn infer(
    checkpoint: &Path,
    input: &Path,
    output: Option<&Path>,
    opts: &InferOptions,
    out: &mut dyn Write,
) -> CliResult<InferSummary> {
    let ck = Checkpoint::load(checkpoint)?;
    let reader: Box<dyn BufRead> = if input == Path::new("-") {
        Box::new(std::io::stdin().lock())
    } else {
        Box::new(BufReader::new(File::open(input).map_err(|e| {
            CliError::Data(format!("{}: {e}", input.display()))
        })?))
    };
    let summary = match output {
        Some(p) => {
            create_parent(p)?;
            infer_stream(
                &ck,
                reader,
                BufWriter::new(File::create(p)?),
                std::io::stderr(),
                opts,
            )?
        }
        None => infer_stream(
            &ck,
            reader,
            std::io::stdout().lock(),
            std::io::stderr(),
            opts,
        )?,
    };
    writeln!(
        out,
        "processed {} rows, skipped {} malformed; latency median {:.4} ms, p95 {:.4} ms",
        summary.processed, summary.skipped, summary.median_ms, summary.p95_ms
    )?;
    Ok(summary)
}

pub fn complexity_report(dims: Dims, out: &mut dyn Write) -> CliResult<ComplexityReport> {
    let r = complexity(dims)?;
    let d = &r.dims;
    writeln!(
        out,
        "dims: d_in {} h1 {} h2 {} d_out {} d' {} L {} n {} h3 {}",
        d.d_in, d.h1, d.h2, d.d_out, d.d_prime, d.layers, d.qubits, d.h3
    )?;
    writeln!(
        out,
        "C_classical = {}·{} + {}·{} + {}·{} = {} ≈ {:.1e}",
        d.d_in,
        d.h1,
        d.h1,
        d.h2,
        d.h2,
        d.d_out,
        r.c_classical,
        round_sig(r.c_classical as f64, 2)
    )?;
    writeln!(
        out,
        "C_QMLP      = {}³ + {}·{} + {}·{} + {}·{} = {} ≈ {:.1e}",
        d.d_prime,
        d.layers,
        d.qubits,
        d.qubits,
        d.h3,
        d.h3,
        d.d_out,
        r.c_qmlp,
        round_sig(r.c_qmlp as f64, 2)
    )?;
    writeln!(
        out,
        "R = C_QMLP / C_classical = {:.4} ≈ {}",
        r.ratio,
        round_sig(r.ratio, 2)
    )?;
    let b = &r.baseline_model;
    writeln!(out, "built BaselineMLP: dense {} MACs", b.dense)?;
    match &r.qmlp_model {
        Some(q) => writeln!(
            out,
            "built PolySPD_HC model: embedding {} + circuit {} + dense {} = {} MACs",
            q.embedding,
            q.circuit,
            q.dense,
            q.total()
        )?,
        None => writeln!(
            out,
            "no polynomial expansion of {} inputs has {} terms; hybrid model not built",
            d.d_in, d.d_prime
        )?,
    }
    Ok(r)
}
