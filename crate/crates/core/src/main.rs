// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use modalprobe::archive::{
    read_archive, read_archive_for, read_ratings, read_responses, read_stimuli, validate_stimuli,
    write_archive, write_ratings, write_responses, ActivationArchive, StimulusSet, MANIFEST_FILE,
};
use modalprobe::baselines::{
    compare_methods, fit_reference_pcs, read_reference, write_reference, Method, ReferenceDirections,
};
use modalprobe::behavior::{build_feature_space, evaluate, loo_predict, BehaviorConfig};
use modalprobe::develop::{run_sweep, SweepSpec};
use modalprobe::diffvec::{fit_vector, read_vector, write_vector, CvReport, DifferenceVector};
use modalprobe::interpret::{aggregate_grids, correlate_projections, CorrelationGrid};
use modalprobe::plot::{bar_chart_svg, heatmap_svg, line_plot_svg};
use modalprobe::synth::{generate, generate_reference, planted_human, ReferenceSpec, SynthSpec};
use modalprobe::{CategoryPair, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "modalprobe", version, about = "Modal difference vectors over activation archives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase", tag = "subcommand")]
enum Command {
    /// Cross-validated layer selection per category pair.
    Cv(CvArgs),
    /// Paired accuracy table across classification methods.
    Classify(ClassifyArgs),
    /// Accuracy across checkpoints, layers or model scale.
    Sweep(SweepArgs),
    /// Leave-one-out model of human category distributions.
    Human(HumanArgs),
    /// Correlate projections with human feature ratings.
    Interpret(InterpretArgs),
    /// Generate a synthetic archive with planted structure.
    Synth(SynthArgs),
    /// Refit and serialize difference vectors.
    Vectors(VectorsArgs),
}

#[derive(Args, Debug, Serialize)]
struct Inputs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    stimuli: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CvOptions {
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct CvArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Category pair such as probable:impossible; repeatable, default all six.
    #[arg(long = "pair")]
    pairs: Vec<CategoryPair>,
    #[command(flatten)]
    cv: CvOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long = "pair")]
    pairs: Vec<CategoryPair>,
    /// diffvec, logprob, pc, random or all.
    #[arg(long, default_value = "all")]
    method: String,
    /// Reference archive, or reference directions written by an earlier run.
    /// Required for the pc method.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    cv: CvOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// JSON sweep description.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AxisOptions {
    /// Directory of vectors written by `vectors`; fit from the archive when absent.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Fixed layer, either `N` for every pair or `pair=N`; repeatable.
    #[arg(long = "layer")]
    layers: Vec<String>,
}

#[derive(Args, Debug, Serialize)]
struct HumanArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    responses: PathBuf,
    #[command(flatten)]
    axes: AxisOptions,
    #[command(flatten)]
    cv: CvOptions,
    /// Z-score features on each training fold.
    #[arg(long, overrides_with = "no_standardize", default_value_t = true)]
    standardize: bool,
    #[arg(long = "no-standardize")]
    no_standardize: bool,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct InterpretArgs {
    /// One archive per model; grids are averaged when repeated.
    #[arg(long = "archive", required = true)]
    archives: Vec<PathBuf>,
    #[arg(long)]
    stimuli: PathBuf,
    #[arg(long)]
    ratings: PathBuf,
    #[command(flatten)]
    axes: AxisOptions,
    #[command(flatten)]
    cv: CvOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 100)]
    per_category: usize,
    #[arg(long, default_value_t = 3)]
    planted_layer: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 2.0)]
    logprob_gap: f64,
    #[arg(long, default_value_t = 1.0)]
    logprob_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write responses.csv and ratings.csv from a planted softmax model.
    #[arg(long)]
    human: bool,
    /// Folds used to fit the feature axes for --human.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 2.0)]
    weight_scale: f64,
    /// Also write reference/, a corpus whose first principal component at the
    /// planted layer is this pair's planted direction.
    #[arg(long)]
    reference_pair: Option<CategoryPair>,
    #[arg(long, default_value_t = 2000)]
    reference_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct VectorsArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long = "pair")]
    pairs: Vec<CategoryPair>,
    #[command(flatten)]
    axes: AxisOptions,
    #[command(flatten)]
    cv: CvOptions,
    /// Steering multiplier recorded in each vector manifest.
    #[arg(long, default_value_t = 5.0)]
    multiplier: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: Vec<String>,
    threads: usize,
    config: &'a Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("MODALPROBE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Validation(format!("MODALPROBE_THREADS must be a positive integer, got `{value}`")))?;
    // A second build_global in the same process fails; the first one wins.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(command: &Command) -> Result<()> {
    configure_threads()?;
    let out = match command {
        Command::Cv(a) => &a.out,
        Command::Classify(a) => &a.out,
        Command::Sweep(a) => &a.out,
        Command::Human(a) => &a.out,
        Command::Interpret(a) => &a.out,
        Command::Synth(a) => &a.out,
        Command::Vectors(a) => &a.out,
    };
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_json(
        &out.join("run_manifest.json"),
        &RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            threads: rayon::current_num_threads(),
            config: command,
        },
    )?;
    match command {
        Command::Cv(a) => cmd_cv(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Human(a) => cmd_human(a),
        Command::Interpret(a) => cmd_interpret(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Vectors(a) => cmd_vectors(a),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn csv_row<I, T>(w: &mut csv::Writer<fs::File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load(inputs: &Inputs) -> Result<(ActivationArchive, StimulusSet)> {
    let stimuli = read_stimuli(&inputs.stimuli)?;
    let archive = read_archive_for(&inputs.archive, &stimuli)?;
    Ok((archive, stimuli))
}

fn pairs_or_all(pairs: &[CategoryPair]) -> Vec<CategoryPair> {
    if pairs.is_empty() {
        CategoryPair::all()
    } else {
        pairs.to_vec()
    }
}

fn cmd_cv(a: &CvArgs) -> Result<()> {
    let (archive, stimuli) = load(&a.inputs)?;
    let mut reports = Vec::new();
    let path = a.out.join("cv.csv");
    let mut w = csv_writer(&path)?;
    csv_row(&mut w, &path, ["category_pair", "layer", "mean_accuracy", "fold_accuracies", "selected"])?;
    for pair in pairs_or_all(&a.pairs) {
        let r = modalprobe::diffvec::crossval_select_layer(
            &archive,
            &stimuli.pair_set(pair),
            a.cv.folds,
            a.cv.seed,
        )?;
        for (layer, accs) in r.fold_accuracies.iter().enumerate() {
            let folds: Vec<String> = accs.iter().map(f64::to_string).collect();
            csv_row(
                &mut w,
                &path,
                [
                    pair.to_string(),
                    layer.to_string(),
                    r.mean_accuracy[layer].to_string(),
                    folds.join(";"),
                    (layer == r.best_layer).to_string(),
                ],
            )?;
        }
        println!(
            "{pair}: layer {} accuracy {:.4}",
            r.best_layer,
            r.best_accuracy()
        );
        reports.push(r);
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    write_json(&a.out.join("cv.json"), &reports)?;
    let x: Vec<String> = (0..archive.layer_count()).map(|l| l.to_string()).collect();
    let series: Vec<(String, Vec<f64>)> = reports
        .iter()
        .map(|r| (r.category_pair.to_string(), r.mean_accuracy.clone()))
        .collect();
    line_plot_svg(a.out.join("cv_by_layer.svg"), "held-out accuracy by layer", &x, &series)
}

fn load_reference(path: &Path, out: &Path) -> Result<ReferenceDirections> {
    let text = fs::read_to_string(path.join(MANIFEST_FILE)).map_err(|e| io_err(path, e))?;
    if text.contains("modalprobe-reference-pcs") {
        return read_reference(path);
    }
    let dirs = fit_reference_pcs(&read_archive(path)?)?;
    write_reference(&dirs, out.join("reference_pcs"))?;
    Ok(dirs)
}

fn cmd_classify(a: &ClassifyArgs) -> Result<()> {
    let (archive, stimuli) = load(&a.inputs)?;
    let methods: Vec<Method> = if a.method == "all" {
        Method::ALL.to_vec()
    } else {
        vec![a.method.parse()?]
    };
    let reference = match &a.reference {
        Some(p) => Some(load_reference(p, &a.out)?),
        None if methods.contains(&Method::Pc) && a.method != "all" => {
            return Err(Error::Precondition("the pc method needs --reference".into()))
        }
        None => None,
    };
    if reference.is_none() && methods.contains(&Method::Pc) {
        eprintln!("note: no --reference given, skipping the pc method");
    }
    let pairs = pairs_or_all(&a.pairs);
    let mut results = Vec::new();
    for &pair in &pairs {
        results.extend(compare_methods(
            &archive,
            &stimuli.pair_set(pair),
            reference.as_ref(),
            &methods,
            a.cv.folds,
            a.cv.seed,
        )?);
    }
    let path = a.out.join("classify.csv");
    let mut w = csv_writer(&path)?;
    csv_row(
        &mut w,
        &path,
        ["category_pair", "method", "accuracy", "selection_accuracy", "layer", "index"],
    )?;
    for r in &results {
        let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
        csv_row(
            &mut w,
            &path,
            [
                r.category_pair.to_string(),
                r.method.as_str().to_string(),
                r.accuracy.to_string(),
                r.selection_accuracy.to_string(),
                opt(r.layer),
                opt(r.index),
            ],
        )?;
        println!("{} {:>8} {:.4}", r.category_pair, r.method.as_str(), r.accuracy);
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    write_json(&a.out.join("classify.json"), &results)?;
    let used: Vec<Method> = methods
        .into_iter()
        .filter(|m| results.iter().any(|r| r.method == *m))
        .collect();
    let values: Vec<Vec<Option<f64>>> = pairs
        .iter()
        .map(|p| {
            used.iter()
                .map(|m| {
                    results
                        .iter()
                        .find(|r| r.category_pair == *p && r.method == *m)
                        .map(|r| r.accuracy)
                })
                .collect()
        })
        .collect();
    bar_chart_svg(
        a.out.join("classify.svg"),
        "held-out pair accuracy",
        &pairs.iter().map(ToString::to_string).collect::<Vec<_>>(),
        &used.iter().map(|m| m.as_str().to_string()).collect::<Vec<_>>(),
        &values,
    )
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let spec = SweepSpec::read(&a.spec)?;
    let result = run_sweep(&spec)?;
    result.write(&a.out)?;
    let mut x: Vec<String> = Vec::new();
    for r in &result.rows {
        if !x.contains(&r.label) {
            x.push(r.label.clone());
        }
    }
    let series: Vec<(String, Vec<f64>)> = spec
        .pairs
        .iter()
        .map(|p| (p.to_string(), result.curve(*p)))
        .collect();
    for e in &result.emergence {
        match &e.label {
            Some(l) => println!("{}: reaches 0.9 at {l}", e.category_pair),
            None => println!("{}: never reaches 0.9", e.category_pair),
        }
    }
    line_plot_svg(
        a.out.join("sweep.svg"),
        &format!("best-layer accuracy by {}", result.axis.as_str()),
        &x,
        &series,
    )
}

/// `N` applies to every pair, `pair=N` to one pair.
fn layer_overrides(specs: &[String]) -> Result<(Option<usize>, BTreeMap<CategoryPair, usize>)> {
    let mut all = None;
    let mut per = BTreeMap::new();
    for s in specs {
        let bad = || Error::Validation(format!("bad --layer value `{s}`, expected N or pair=N"));
        match s.split_once('=') {
            Some((p, l)) => {
                per.insert(p.parse::<CategoryPair>()?, l.trim().parse().map_err(|_| bad())?);
            }
            None => all = Some(s.trim().parse().map_err(|_| bad())?),
        }
    }
    Ok((all, per))
}

fn fit_axes(
    archive: &ActivationArchive,
    stimuli: &StimulusSet,
    pairs: &[CategoryPair],
    axes: &AxisOptions,
    cv: &CvOptions,
) -> Result<(Vec<DifferenceVector>, Vec<CvReport>)> {
    let (all, per) = layer_overrides(&axes.layers)?;
    let mut vectors = Vec::new();
    let mut reports = Vec::new();
    for &pair in pairs {
        if let Some(dir) = &axes.vectors {
            let v = read_vector(dir.join(pair.slug()))?;
            if v.model_id != archive.model_id() || v.vector.len() != archive.hidden_dim() {
                return Err(Error::Precondition(format!(
                    "{pair} vector in {} does not match the archive model",
                    dir.display()
                )));
            }
            vectors.push(v);
            continue;
        }
        let layer = per.get(&pair).copied().or(all);
        let (v, r) = fit_vector(archive, &stimuli.pair_set(pair), cv.folds, cv.seed, layer)?;
        vectors.push(v);
        reports.extend(r);
    }
    Ok((vectors, reports))
}

fn feature_vectors(v: Vec<DifferenceVector>) -> [DifferenceVector; 3] {
    v.try_into().expect("three feature axes")
}

fn cmd_human(a: &HumanArgs) -> Result<()> {
    let (archive, stimuli) = load(&a.inputs)?;
    let responses = read_responses(&a.responses)?;
    let report = validate_stimuli(&stimuli, Some(&responses));
    if !report.is_clean() {
        write_json(&a.out.join("validation.json"), &report)?;
        for issue in &report.issues {
            eprintln!("warning: {}: {}", issue.id, issue.message);
        }
    }
    let responses = if report.excluded.is_empty() {
        responses
    } else {
        let keep = responses
            .rows
            .iter()
            .map(|r| r.stimulus_id.clone())
            .filter(|id| !report.excluded.contains(id))
            .collect();
        responses.retain_ids(&keep)
    };
    let (vectors, reports) = fit_axes(&archive, &stimuli, &CategoryPair::feature_axes(), &a.axes, &a.cv)?;
    let full = build_feature_space(&archive, &feature_vectors(vectors), false)?;
    let keep: Vec<usize> = full
        .stimulus_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| responses.get(id).is_some())
        .map(|(i, _)| i)
        .collect();
    let features = modalprobe::behavior::FeatureSpace::new(
        keep.iter().map(|&i| full.stimulus_ids[i].clone()).collect(),
        full.columns.clone(),
        keep.iter().map(|&i| full.features[i].clone()).collect(),
    )?;
    let config = BehaviorConfig {
        adam: modalprobe::numerics::AdamConfig {
            learning_rate: a.lr,
            epochs: a.epochs,
            ..Default::default()
        },
        standardize: a.standardize && !a.no_standardize,
    };
    let predictions = loo_predict(&features, &responses, &config)?;
    let result = evaluate(&predictions, &responses)?;
    result.write(&a.out)?;
    write_json(&a.out.join("axes_cv.json"), &reports)?;
    println!(
        "pearson_nminus1 {:.4} mse {:.6} entropy_pearson {:.4}",
        result.pearson_nminus1, result.mse, result.entropy_pearson
    );
    Ok(())
}

fn write_grid(grid: &CorrelationGrid, dir: &Path, title: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    grid.write_matrix_csv(dir.join("grid.csv"))?;
    grid.write_long_csv(dir.join("grid_long.csv"))?;
    write_json(&dir.join("grid.json"), grid)?;
    let values: Vec<Vec<Option<f64>>> = grid
        .cells
        .iter()
        .map(|row| row.iter().map(|c| c.value).collect())
        .collect();
    heatmap_svg(dir.join("heatmap.svg"), title, &grid.rows, &grid.columns, &values)
}

fn cmd_interpret(a: &InterpretArgs) -> Result<()> {
    let stimuli = read_stimuli(&a.stimuli)?;
    let ratings = read_ratings(&a.ratings)?;
    let mut grids = Vec::new();
    for path in &a.archives {
        let archive = read_archive_for(path, &stimuli)?;
        let (vectors, _) = fit_axes(&archive, &stimuli, &CategoryPair::feature_axes(), &a.axes, &a.cv)?;
        let features = build_feature_space(&archive, &feature_vectors(vectors), false)?;
        let grid = correlate_projections(&features, &ratings)?;
        if a.archives.len() > 1 {
            let name = format!("{}@{}", archive.model_id(), archive.checkpoint_id());
            write_grid(&grid, &a.out.join("models").join(name.replace(['/', '\\'], "_")), &name)?;
        }
        grids.push(grid);
    }
    let grid = aggregate_grids(&grids)?;
    write_grid(&grid, &a.out, "|pearson| of projections with ratings")?;
    for (name, row) in grid.rows.iter().zip(&grid.cells) {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.value.map_or("n/a".into(), |v| format!("{v:.3}")))
            .collect();
        println!("{name}: {}", cells.join(" "));
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        layers: a.layers,
        hidden_dim: a.hidden_dim,
        per_category: a.per_category,
        planted_layer: a.planted_layer,
        separation: a.separation,
        noise_sd: a.noise,
        logprob_gap: a.logprob_gap,
        logprob_noise: a.logprob_noise,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let out = generate(&spec)?;
    out.write(&a.out)?;
    if let Some(pair) = a.reference_pair {
        let mut dominant = vec![None; spec.layers];
        dominant[spec.planted_layer] = Some(out.truth.pair_direction(pair));
        let reference = generate_reference(&ReferenceSpec {
            hidden_dim: spec.hidden_dim,
            n: a.reference_size,
            noise_sd: spec.noise_sd,
            dominant,
            dominant_sd: 5.0 * spec.noise_sd,
            seed: a.seed,
        })?;
        write_archive(&reference, a.out.join("reference"))?;
    }
    if a.human {
        let human = planted_human(&out, a.folds, a.seed, a.weight_scale)?;
        write_responses(&human.responses, a.out.join("responses.csv"))?;
        write_ratings(&human.ratings, a.out.join("ratings.csv"))?;
        #[derive(Serialize)]
        struct Generator<'a> {
            columns: Vec<String>,
            weights: &'a [Vec<f64>],
            bias: &'a [f64],
            layers: Vec<usize>,
        }
        write_json(
            &a.out.join("human_generator.json"),
            &Generator {
                columns: CategoryPair::feature_axes().iter().map(|p| p.slug()).collect(),
                weights: &human.weights,
                bias: &human.bias,
                layers: human.vectors.iter().map(|v| v.layer).collect(),
            },
        )?;
    }
    println!(
        "wrote {} stimuli, {} layers, planted layer {} to {}",
        out.archive.len(),
        out.archive.layer_count(),
        spec.planted_layer,
        a.out.display()
    );
    Ok(())
}

fn cmd_vectors(a: &VectorsArgs) -> Result<()> {
    if a.axes.vectors.is_some() {
        return Err(Error::Validation("`vectors` fits vectors; --vectors is not accepted".into()));
    }
    if !a.multiplier.is_finite() {
        return Err(Error::Validation("--multiplier must be finite".into()));
    }
    let (archive, stimuli) = load(&a.inputs)?;
    let pairs = pairs_or_all(&a.pairs);
    let (vectors, reports) = fit_axes(&archive, &stimuli, &pairs, &a.axes, &a.cv)?;
    for v in &vectors {
        write_vector(v, a.out.join(v.category_pair.slug()), Some(a.multiplier))?;
        println!(
            "{}: layer {} norm {:.4}",
            v.category_pair,
            v.layer,
            modalprobe::numerics::norm(&v.vector)
        );
    }
    write_json(&a.out.join("cv.json"), &reports)
}
