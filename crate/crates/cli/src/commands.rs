use std::fs;
use std::path::Path;

use condmode::experiments::{
    branch_offset, gen_ambiguous_dataset, gen_sine_dataset, run_ambiguous_experiment,
    run_sine_experiment, ExperimentConfig, ExperimentReport, GeneratorParams, QueryRecord, Summary,
};
use condmode::{
    condition, find_mode, fit_kde, loo_scores, predict_mode_batch, Bandwidth, Dataset, Error,
    JointKernelModel, Point, PruneConfig, SearchConfig, Seed,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    BenchmarkArgs, Command, Experiment, FitArgs, GenArgs, Method, ModeArgs, PredictArgs,
};
use crate::error::{CliError, CliResult};
use crate::formats::{
    column_names, csv_text, fmt_real, load_dataset, read_real_csv, save_dataset, to_json,
    write_text, FitMetadata, MixtureFile, ModelFile,
};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Mode(a) => mode(a),
        Command::Benchmark(a) => benchmark(a),
    }
}

fn gen(a: GenArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let data = match a.kind {
        Experiment::Sine => gen_sine_dataset(a.n, a.sigma.unwrap_or(0.2), Seed(a.seed))?,
        Experiment::Ambiguous => {
            if a.sigma.is_some() {
                return Err(CliError::usage(
                    "--sigma applies to the sine generator only",
                ));
            }
            gen_ambiguous_dataset(a.n, Seed(a.seed))?.data
        }
    };
    save_dataset(&data, &a.out)
}

fn fit(a: FitArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let dims = data.dx() + data.dy();
    let (bandwidth, metadata) = match (a.bandwidth, a.loo_grid) {
        (Some(values), _) => {
            let bw = joint_bandwidth(&values, dims)?;
            let meta = FitMetadata {
                bandwidth: bw.scales().to_vec(),
                selection: "fixed".into(),
                loo_grid: None,
                loo_scores: None,
            };
            (bw, meta)
        }
        (None, Some(grid)) => {
            if grid.is_empty() {
                return Err(CliError::usage("--loo-grid is empty"));
            }
            let candidates = grid
                .iter()
                .map(|&s| Bandwidth::isotropic(dims, s))
                .collect::<condmode::Result<Vec<_>>>()?;
            let scores = loo_scores(&data, &candidates)?;
            let best = condmode::select_bandwidth_loo(&data, &candidates)?;
            let meta = FitMetadata {
                bandwidth: best.scales().to_vec(),
                selection: "loo".into(),
                loo_grid: Some(grid),
                loo_scores: Some(scores.iter().map(|&s| s.is_finite().then_some(s)).collect()),
            };
            (best, meta)
        }
        (None, None) => {
            return Err(CliError::usage(
                "one of --bandwidth or --loo-grid is required",
            ))
        }
    };
    let model = fit_kde(&data, &bandwidth)?;
    ModelFile::from_model(&model, Some(metadata)).save(&a.out)
}

fn joint_bandwidth(values: &[f64], dims: usize) -> CliResult<Bandwidth<f64>> {
    match values.len() {
        1 => Ok(Bandwidth::isotropic(dims, values[0])?),
        n if n == dims => Ok(Bandwidth::new(values.to_vec())?),
        n => Err(CliError::usage(format!(
            "--bandwidth takes 1 or {dims} values, got {n}"
        ))),
    }
}

fn parse_components(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("--x: not a number: {c:?}")))
        })
        .collect()
}

fn load_queries(a: &PredictArgs, dx: usize) -> CliResult<Vec<Point<f64>>> {
    let rows = match &a.queries {
        Some(path) => {
            let (header, rows) = read_real_csv(path)?;
            if header.len() != dx {
                return Err(CliError::usage(format!(
                    "model expects {dx} input columns, {} has {}",
                    path.display(),
                    header.len()
                )));
            }
            if header != column_names("x", dx) {
                return Err(CliError::format(path, Some(1), "header must be x1..x<dx>"));
            }
            rows
        }
        None => {
            a.x.iter()
                .map(|t| parse_components(t))
                .collect::<CliResult<_>>()?
        }
    };
    rows.into_iter()
        .map(|r| {
            if r.len() != dx {
                return Err(CliError::usage(format!(
                    "query has {} components, model expects {dx}",
                    r.len()
                )));
            }
            Ok(Point::new(r)?)
        })
        .collect()
}

/// Prediction and conditional density, or `None` outside the support.
type Prediction = Option<(Vec<f64>, f64)>;

fn predict(a: PredictArgs) -> CliResult<()> {
    let (_, model) = ModelFile::load(&a.model)?;
    let queries = load_queries(&a, model.dx())?;
    let prune = PruneConfig::new(a.prune)?;
    let preds: Vec<condmode::Result<Prediction>> = match a.method {
        Method::Mode => {
            let search = SearchConfig {
                q: a.q,
                refine: !a.no_refine,
                ..SearchConfig::default()
            };
            search.validate()?;
            predict_mode_batch(&model, &queries, &search, &prune, Seed(a.seed))
                .into_iter()
                .map(|r| r.map(|m| Some((m.argmax.into_vec(), m.density))))
                .collect()
        }
        Method::Nw => queries
            .par_iter()
            .map(|x| nw_with_density(&model, x, &prune))
            .collect(),
    };

    let mut missing = 0;
    let mut rows = Vec::with_capacity(queries.len());
    for (x, p) in queries.iter().zip(preds) {
        let mut row: Vec<String> = x.iter().map(|&v| fmt_real(v)).collect();
        match p {
            Ok(Some((y, density))) => {
                row.extend(y.iter().map(|&v| fmt_real(v)));
                row.push(fmt_real(density));
                row.push("ok".into());
            }
            Ok(None) | Err(Error::OutsideSupport) => {
                missing += 1;
                row.extend(std::iter::repeat_n(String::new(), model.dy() + 1));
                row.push("outside_support".into());
            }
            Err(e) => return Err(e.into()),
        }
        rows.push(row);
    }
    if missing > 0 {
        log::warn!(
            "{missing} of {} queries outside model support",
            queries.len()
        );
    }
    let mut header = column_names("x", model.dx());
    header.extend(column_names("y", model.dy()));
    header.extend(["density".to_string(), "status".to_string()]);
    emit(a.out.as_deref(), &csv_text(&header, rows))
}

fn nw_with_density(
    model: &JointKernelModel<f64>,
    x: &[f64],
    prune: &PruneConfig<f64>,
) -> condmode::Result<Prediction> {
    let c = condition(model, x, prune)?;
    let y = c.mean();
    let density = c.mixture().density(&y)?;
    Ok(Some((y, density)))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn mode(a: ModeArgs) -> CliResult<()> {
    let mix = MixtureFile::load(&a.mixture)?;
    if a.runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let cfg = SearchConfig {
        q: a.q,
        refine: !a.no_refine,
        ..SearchConfig::default()
    };
    cfg.validate()?;
    let seed = Seed(a.seed);
    let results = (0..a.runs)
        .into_par_iter()
        .map(|r| {
            let run_seed = if a.runs == 1 {
                seed
            } else {
                seed.derive(r as u64)
            };
            find_mode(&mix, &cfg, run_seed)
        })
        .collect::<condmode::Result<Vec<_>>>()?;
    let mut header = vec!["run".to_string()];
    header.extend(column_names("y", mix.dim()));
    header.push("density".into());
    let rows = results.iter().enumerate().map(|(r, m)| {
        let mut row = vec![r.to_string()];
        row.extend(m.argmax.iter().map(|&v| fmt_real(v)));
        row.push(fmt_real(m.density));
        row
    });
    emit(a.out.as_deref(), &csv_text(&header, rows))
}

/// Report without the per-query records.
#[derive(Serialize)]
struct SummaryFile<'a> {
    experiment: Experiment,
    config: &'a ExperimentConfig,
    generator: &'a Option<GeneratorParams>,
    summary: &'a Summary,
}

impl Serialize for Experiment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Sine => "sine",
            Experiment::Ambiguous => "ambiguous",
        }
    }
}

fn benchmark_config(a: &BenchmarkArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match a.kind {
        Experiment::Sine => ExperimentConfig::sine_default(),
        Experiment::Ambiguous => {
            if a.sigma.is_some() {
                return Err(CliError::usage(
                    "--sigma applies to the sine benchmark only",
                ));
            }
            ExperimentConfig::ambiguous_default()
        }
    };
    if let Some(bw) = &a.bandwidth {
        cfg.bandwidth = match bw[..] {
            [s] => [s, s],
            [sx, sy] => [sx, sy],
            _ => return Err(CliError::usage("--bandwidth takes 1 or 2 values")),
        };
    }
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.q = a.q.unwrap_or(cfg.q);
    cfg.noise_sigma = a.sigma.unwrap_or(cfg.noise_sigma);
    cfg.data_seed = a.data_seed.unwrap_or(cfg.data_seed);
    cfg.search_seed = a.search_seed.unwrap_or(cfg.search_seed);
    cfg.queries = a.queries.unwrap_or(cfg.queries);
    cfg.refine = !a.no_refine;
    Ok(cfg)
}

fn opt_cell<V: ToString>(v: Option<V>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn records_csv(records: &[QueryRecord]) -> String {
    let header: Vec<String> = [
        "x",
        "y_true",
        "branch",
        "y_mode",
        "mode_density",
        "y_nw",
        "mode_error",
        "nw_error",
        "mode_in_dead_zone",
        "nw_in_dead_zone",
    ]
    .map(String::from)
    .to_vec();
    csv_text(
        &header,
        records.iter().map(|r| {
            vec![
                fmt_real(r.x),
                opt_real(r.y_true),
                opt_real(r.branch),
                opt_real(r.y_mode),
                opt_real(r.mode_density),
                opt_real(r.y_nw),
                opt_real(r.mode_error),
                opt_real(r.nw_error),
                opt_cell(r.mode_in_dead_zone),
                opt_cell(r.nw_in_dead_zone),
            ]
        }),
    )
}

fn plot_csv(kind: Experiment, records: &[QueryRecord]) -> String {
    let mut header: Vec<String> = vec!["x".into(), "y_mode".into(), "y_nw".into()];
    match kind {
        Experiment::Sine => header.push("y_true".into()),
        Experiment::Ambiguous => header.extend(["y_upper".into(), "y_lower".into()]),
    }
    csv_text(
        &header,
        records.iter().map(|r| {
            let mut row = vec![fmt_real(r.x), opt_real(r.y_mode), opt_real(r.y_nw)];
            match kind {
                Experiment::Sine => row.push(opt_real(r.y_true)),
                Experiment::Ambiguous => {
                    let b = branch_offset(r.x);
                    row.extend([fmt_real(b), fmt_real(-b)]);
                }
            }
            row
        }),
    )
}

fn benchmark(a: BenchmarkArgs) -> CliResult<()> {
    let cfg = benchmark_config(&a)?;
    let report: ExperimentReport = match a.kind {
        Experiment::Sine => run_sine_experiment(&cfg)?,
        Experiment::Ambiguous => run_ambiguous_experiment(&cfg)?,
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let name = a.kind.name();
    let path = |suffix: &str| a.out.join(format!("{name}_{suffix}"));

    write_text(&path("records.csv"), &records_csv(&report.records))?;
    write_text(&path("plot.csv"), &plot_csv(a.kind, &report.records))?;
    let summary = SummaryFile {
        experiment: a.kind,
        config: &report.config,
        generator: &report.generator,
        summary: &report.summary,
    };
    write_text(&path("summary.json"), &to_json(&summary))?;
    if a.write_data {
        let data: Dataset<f64> = match a.kind {
            Experiment::Sine => gen_sine_dataset(cfg.n, cfg.noise_sigma, Seed(cfg.data_seed))?,
            Experiment::Ambiguous => gen_ambiguous_dataset(cfg.n, Seed(cfg.data_seed))?.data,
        };
        save_dataset(&data, &path("data.csv"))?;
    }

    let s = &report.summary;
    println!(
        "{name}: {} queries, mode_rmse={} nw_rmse={}",
        s.query_count,
        opt_cell(s.mode_rmse.map(|v| format!("{v:.4}"))),
        opt_cell(s.nw_rmse.map(|v| format!("{v:.4}"))),
    );
    if let (Some(m), Some(n)) = (s.mode_dead_zone_rate, s.nw_dead_zone_rate) {
        println!("{name}: dead-zone rate mode={m:.3} nw={n:.3}");
    }
    Ok(())
}
