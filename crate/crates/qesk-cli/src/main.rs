//! Command-line front-end tying dataset ingestion, kernel computation, and
//! SVM evaluation into reproducible runs.
//!
//! Every command writes its primary output plus a `<output>.manifest`
//! sidecar recording the full configuration, the per-iteration codebook
//! sizes, and (for kernel/evaluate) the positive-definiteness check, so a
//! run can be reproduced exactly. Exit codes: 0 on success, 3 when the
//! Gram matrix fails the PSD check, 1 for any other failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qesk::error::Error;
use qesk::eval::{cross_validate, CvConfig};
use qesk::graphio::{adjacency, parse_tu_dataset, DatasetBundle};
use qesk::kernel::{
    load_gram_file, psd_check, write_gram_file, GramMatrix, KernelKind, PsdReport,
};
use qesk::pipeline::{compute_features, compute_gram, DatasetFeatures, PipelineConfig};
use qesk::spectral::{average_mixing_matrix, eigendecompose_symmetric, vertex_entropies};
use qesk::wlrefine::{run_wl, LabelPolicy};

const PSD_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "qesk", version, about = "Entropic subtree graph kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Gram matrix over a dataset and write it as text.
    Kernel(KernelArgs),
    /// Cross-validate a C-SVM on a computed (or loaded) Gram matrix.
    Evaluate(EvaluateArgs),
    /// Dump one graph's mixing matrix, entropies, labels, and features.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Root directory holding one subdirectory per dataset.
    #[arg(long, env = "QESK_DATA_DIR")]
    dataset_dir: PathBuf,

    /// Dataset name (subdirectory and file prefix).
    #[arg(long)]
    dataset: String,

    /// Number of refinement iterations summed by the kernels.
    #[arg(long, default_value_t = 10)]
    imax: usize,

    /// Initial attribute policy: auto, given-attributes, degree, constant.
    /// `auto` resolves to given-attributes when the dataset carries vertex
    /// attributes and to degree otherwise.
    #[arg(long, default_value = "auto")]
    label_policy: String,

    /// Relative tolerance for grouping near-equal eigenvalues.
    #[arg(long, default_value_t = 1e-8)]
    eig_group_tol: f64,

    /// Scale on the distance inside exp(-gamma d); 1 is the defining form.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,

    /// Worker threads; 0 uses all available cores. Results are identical
    /// for every worker count.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct KernelSelection {
    /// Kernel kind: qesk, wlsk, or wlsk-normalized.
    #[arg(long, default_value = "qesk")]
    kind: String,

    /// Normalize the baseline kernel to unit self-similarity
    /// (equivalent to --kind wlsk-normalized; invalid with qesk).
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    kernel: KernelSelection,

    /// Output path for the Gram matrix text file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    kernel: KernelSelection,

    /// Reuse a previously written Gram matrix instead of recomputing.
    #[arg(long)]
    gram_file: Option<PathBuf>,

    /// Regularization grid, comma-separated.
    #[arg(long, default_value = "0.001,0.01,0.1,1,10,100,1000")]
    c_grid: String,

    #[arg(long, default_value_t = 10)]
    folds: usize,

    #[arg(long, default_value_t = 10)]
    repetitions: usize,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Output path for the cross-validation report.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Index of the graph to dump (0-based).
    #[arg(long)]
    graph_index: usize,

    /// Output path for the text dump.
    #[arg(short, long)]
    output: PathBuf,
}

enum CliOutcome {
    Success,
    PsdFailure,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kernel(args) => in_pool(args.common.workers, || cmd_kernel(&args)),
        Command::Evaluate(args) => in_pool(args.common.workers, || cmd_evaluate(&args)),
        Command::Inspect(args) => in_pool(args.common.workers, || cmd_inspect(&args)),
    };
    match result {
        Ok(CliOutcome::Success) => ExitCode::SUCCESS,
        Ok(CliOutcome::PsdFailure) => {
            eprintln!("error: gram matrix failed the positive-definiteness check");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn in_pool<T>(
    workers: usize,
    f: impl FnOnce() -> qesk::Result<T> + Send,
) -> qesk::Result<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}

fn resolve_policy(requested: &str, bundle: &DatasetBundle) -> qesk::Result<LabelPolicy> {
    if requested == "auto" {
        return Ok(if bundle.has_vertex_attributes {
            LabelPolicy::GivenAttributes
        } else {
            LabelPolicy::Degree
        });
    }
    requested.parse()
}

fn resolve_kind(selection: &KernelSelection) -> qesk::Result<KernelKind> {
    let kind: KernelKind = selection.kind.parse()?;
    match (kind, selection.normalize) {
        (KernelKind::Qesk, true) => Err(Error::Config(
            "--normalize applies to the baseline kernel only".into(),
        )),
        (KernelKind::Wlsk, true) => Ok(KernelKind::WlskNormalized),
        (k, _) => Ok(k),
    }
}

fn load_bundle(common: &CommonArgs) -> qesk::Result<DatasetBundle> {
    parse_tu_dataset(&common.dataset_dir.join(&common.dataset), &common.dataset)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Manifest {
    lines: String,
}

impl Manifest {
    fn new(command: &str, common: &CommonArgs) -> Self {
        let mut lines = String::new();
        let _ = writeln!(lines, "tool: qesk {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(lines, "command: {command}");
        let _ = writeln!(lines, "dataset_dir: {}", common.dataset_dir.display());
        let _ = writeln!(lines, "dataset: {}", common.dataset);
        let _ = writeln!(lines, "i_max: {}", common.imax);
        let _ = writeln!(lines, "eig_group_tol: {}", fmt_f64(common.eig_group_tol));
        let _ = writeln!(lines, "gamma: {}", fmt_f64(common.gamma));
        let _ = writeln!(lines, "workers: {}", common.workers);
        Manifest { lines }
    }

    fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.lines, "{key}: {value}");
    }

    fn psd(&mut self, report: &PsdReport) {
        self.field("psd_min_eigenvalue", fmt_f64(report.min_eigenvalue));
        self.field("psd_max_eigenvalue", fmt_f64(report.max_eigenvalue));
        self.field("psd_pass", report.pass);
    }

    fn write(&self, output: &Path) -> qesk::Result<()> {
        let path = manifest_path(output);
        std::fs::write(&path, &self.lines).map_err(|e| Error::Io {
            path,
            source: e,
        })
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    output.with_file_name(name)
}

fn pipeline_config(common: &CommonArgs, policy: LabelPolicy) -> PipelineConfig {
    PipelineConfig {
        i_max: common.imax,
        label_policy: policy,
        eig_group_tol: common.eig_group_tol,
        gamma: common.gamma,
    }
}

/// parse -> spectral -> refinement -> features -> gram -> psd check.
fn build_gram(
    common: &CommonArgs,
    kind: KernelKind,
) -> qesk::Result<(DatasetBundle, DatasetFeatures, GramMatrix, PsdReport)> {
    let bundle = load_bundle(common)?;
    let policy = resolve_policy(&common.label_policy, &bundle)?;
    let features = compute_features(&bundle, &pipeline_config(common, policy))?;
    let gram = compute_gram(&features, kind, common.gamma)?;
    let psd = psd_check(&gram, PSD_TOL)?;
    Ok((bundle, features, gram, psd))
}

fn describe_policy(common: &CommonArgs, bundle: &DatasetBundle) -> qesk::Result<String> {
    let resolved = resolve_policy(&common.label_policy, bundle)?;
    Ok(if common.label_policy == "auto" {
        format!("{resolved} (auto)")
    } else {
        resolved.to_string()
    })
}

fn cmd_kernel(args: &KernelArgs) -> qesk::Result<CliOutcome> {
    let kind = resolve_kind(&args.kernel)?;
    let (bundle, features, gram, psd) = build_gram(&args.common, kind)?;
    write_gram_file(&gram, &args.output)?;

    let mut manifest = Manifest::new("kernel", &args.common);
    manifest.field("kernel", kind);
    manifest.field("label_policy", describe_policy(&args.common, &bundle)?);
    manifest.field("output", args.output.display());
    manifest.field("codebook_sizes", join_usize(&features.codebook_sizes));
    manifest.psd(&psd);
    manifest.write(&args.output)?;

    Ok(if psd.pass {
        CliOutcome::Success
    } else {
        CliOutcome::PsdFailure
    })
}

fn cmd_evaluate(args: &EvaluateArgs) -> qesk::Result<CliOutcome> {
    let kind = resolve_kind(&args.kernel)?;
    let c_grid = parse_c_grid(&args.c_grid)?;

    let mut manifest = Manifest::new("evaluate", &args.common);
    manifest.field("kernel", kind);

    let (bundle, gram, psd) = match &args.gram_file {
        Some(path) => {
            let bundle = load_bundle(&args.common)?;
            let gram = load_gram_file(path)?;
            if gram.len() != bundle.len() {
                return Err(Error::Config(format!(
                    "gram file covers {} graphs but dataset {} has {}",
                    gram.len(),
                    bundle.name,
                    bundle.len()
                )));
            }
            manifest.field("label_policy", describe_policy(&args.common, &bundle)?);
            manifest.field("gram_file", path.display());
            let psd = psd_check(&gram, PSD_TOL)?;
            (bundle, gram, psd)
        }
        None => {
            let (bundle, features, gram, psd) = build_gram(&args.common, kind)?;
            manifest.field("label_policy", describe_policy(&args.common, &bundle)?);
            manifest.field("codebook_sizes", join_usize(&features.codebook_sizes));
            (bundle, gram, psd)
        }
    };

    manifest.field("c_grid", &args.c_grid);
    manifest.field("folds", args.folds);
    manifest.field("repetitions", args.repetitions);
    manifest.field("seed", args.seed);
    manifest.field("output", args.output.display());
    manifest.psd(&psd);

    if !psd.pass {
        manifest.write(&args.output)?;
        return Ok(CliOutcome::PsdFailure);
    }

    let cfg = CvConfig {
        folds: args.folds,
        repetitions: args.repetitions,
        c_grid,
        seed: args.seed,
        ..CvConfig::default()
    };
    let report = cross_validate(&bundle.name, &gram, &bundle.class_labels, &cfg)?;
    std::fs::write(&args.output, report.to_text()).map_err(|e| Error::Io {
        path: args.output.clone(),
        source: e,
    })?;
    manifest.field("mean_accuracy", fmt_f64(report.mean_accuracy));
    manifest.field("std_error", fmt_f64(report.std_error));
    manifest.write(&args.output)?;
    Ok(CliOutcome::Success)
}

fn cmd_inspect(args: &InspectArgs) -> qesk::Result<CliOutcome> {
    let bundle = load_bundle(&args.common)?;
    if args.graph_index >= bundle.len() {
        return Err(Error::Config(format!(
            "graph index {} out of range for {} graphs",
            args.graph_index,
            bundle.len()
        )));
    }
    let policy = resolve_policy(&args.common.label_policy, &bundle)?;
    let g = args.graph_index;
    let graph = &bundle.graphs[g];

    let spec = eigendecompose_symmetric(&adjacency(graph), args.common.eig_group_tol)?;
    let q = average_mixing_matrix(&spec);
    let entropies = vertex_entropies(&q);
    let (labels, _) = run_wl(&bundle, args.common.imax, policy)?;
    let features = compute_features(&bundle, &pipeline_config(&args.common, policy))?;

    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", bundle.name);
    let _ = writeln!(out, "graph: {g}");
    let _ = writeln!(out, "vertex_count: {}", graph.vertex_count());
    let _ = writeln!(out, "mixing_matrix:");
    for v in 0..q.dim() {
        let row: Vec<String> = q.row(v).iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{}", row.join(", "));
    }
    let _ = writeln!(out, "entropies:");
    let h: Vec<String> = entropies.values().iter().map(|&x| fmt_f64(x)).collect();
    let _ = writeln!(out, "{}", h.join(", "));
    for it in 1..=args.common.imax {
        let codes: Vec<String> = labels.codes(g, it).iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "labels {it}: {}", codes.join(", "));
    }
    let _ = writeln!(out, "entropic_features:");
    for it in 1..=args.common.imax {
        for &(code, weight) in features.entropic[g].level(it) {
            let _ = writeln!(out, "{g}, {it}, {code}, {}", fmt_f64(weight));
        }
    }
    let _ = writeln!(out, "count_features:");
    for it in 1..=args.common.imax {
        for &(code, count) in features.counts[g].level(it) {
            let _ = writeln!(out, "{g}, {it}, {code}, {count}");
        }
    }
    std::fs::write(&args.output, out).map_err(|e| Error::Io {
        path: args.output.clone(),
        source: e,
    })?;

    let mut manifest = Manifest::new("inspect", &args.common);
    manifest.field("label_policy", describe_policy(&args.common, &bundle)?);
    manifest.field("graph_index", args.graph_index);
    manifest.field("output", args.output.display());
    manifest.write(&args.output)?;
    Ok(CliOutcome::Success)
}

fn parse_c_grid(text: &str) -> qesk::Result<Vec<f64>> {
    let grid: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad C value {:?}", s.trim())))
        })
        .collect::<qesk::Result<_>>()?;
    if grid.is_empty() || grid.iter().any(|&c| c <= 0.0) {
        return Err(Error::Config("C grid must be positive and nonempty".into()));
    }
    Ok(grid)
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
