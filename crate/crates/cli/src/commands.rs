use std::fs;
use std::path::Path;

use pmim::detector::{self, DetectorConfig, RootCauseEntry, TrainCentering};
use pmim::eval::{self, SweepGrid};
use pmim::synth::{self, FaultKind, FaultSpec, ScenarioSize, SynthConfig};
use pmim::{KernelConfig, MatrixSource, NormP, SeriesMatrix};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_f64};
use crate::manifest::ManifestBuilder;
use crate::{
    CenteringArg, DetectArgs, DetectorArgs, MatrixArg, NormArg, Preset, RootCauseMode, Scale,
    SimulateArgs, SweepArgs, TrainArgs,
};

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))
}

fn preset_defaults(preset: Preset) -> (f64, NormP) {
    match preset {
        Preset::Synthetic => (0.05, NormP::L2),
        Preset::Tep => (0.02, NormP::Linf),
    }
}

fn norm_of(arg: Option<NormArg>, preset: Preset) -> NormP {
    match arg {
        Some(NormArg::L2) => NormP::L2,
        Some(NormArg::Linf) => NormP::Linf,
        None => preset_defaults(preset).1,
    }
}

fn matrix_of(arg: MatrixArg) -> MatrixSource {
    match arg {
        MatrixArg::Renyi => MatrixSource::Renyi,
        MatrixArg::Covariance => MatrixSource::Covariance,
    }
}

pub fn detector_config(a: &DetectorArgs) -> CliResult<DetectorConfig> {
    let cfg = DetectorConfig {
        kernel: KernelConfig::new(a.sigma, a.alpha)?,
        window: a.window,
        eta: a.eta.unwrap_or(preset_defaults(a.preset).0),
        norm_p: norm_of(a.norm, a.preset),
        matrix_source: matrix_of(a.matrix),
        train_stride: a.stride,
        train_centering: match a.centering {
            CenteringArg::MuStar => TrainCentering::MuStar,
            CenteringArg::WindowMean => TrainCentering::WindowMean,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn config_json(cfg: &DetectorConfig) -> serde_json::Value {
    json!({
        "alpha": cfg.kernel.alpha(),
        "sigma": cfg.kernel.sigma(),
        "window": cfg.window,
        "eta": cfg.eta,
        "norm": cfg.norm_p.to_string(),
        "matrix": cfg.matrix_source,
        "train_stride": cfg.train_stride,
        "train_centering": cfg.train_centering,
    })
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let kind = FaultKind::from_name(&a.fault).map_err(|e| CliError::Usage(e.to_string()))?;
    let base = match a.scale {
        Scale::Desk => ScenarioSize::DESK,
        Scale::Full => ScenarioSize::FULL,
    };
    let size = ScenarioSize {
        n_train: a.n_train.unwrap_or(base.n_train),
        n_test: a.n_test.unwrap_or(base.n_test),
        onset: a.onset.unwrap_or(base.onset),
    };
    if size.onset < 1 || size.onset > size.n_test {
        return Err(CliError::Usage(format!(
            "onset {} must lie within the test series (1..={})",
            size.onset, size.n_test
        )));
    }
    let cfg = SynthConfig::with_seed(a.seed);
    let scenario = synth::scenario(&cfg, size, kind)?;
    ensure_dir(&a.output_dir)?;
    let manifest = ManifestBuilder::start(
        "simulate",
        json!({ "fault": scenario.fault, "size": size, "synth": cfg }),
        vec![],
        Some(a.seed),
    );

    #[derive(Serialize)]
    struct ScenarioFile<'a> {
        seed: u64,
        n_train: usize,
        n_test: usize,
        onset: usize,
        fault: &'a FaultSpec,
        synth: &'a SynthConfig,
    }
    let meta = ScenarioFile {
        seed: a.seed,
        n_train: size.n_train,
        n_test: size.n_test,
        onset: scenario.onset,
        fault: &scenario.fault,
        synth: &cfg,
    };
    let outputs = vec![
        io::write_output(&a.output_dir, "train.csv", &io::series_to_csv(&scenario.train))?,
        io::write_output(&a.output_dir, "test.csv", &io::series_to_csv(&scenario.test))?,
        io::write_output(&a.output_dir, "scenario.json", &serde_json::to_string_pretty(&meta)?)?,
    ];
    manifest.finish(&a.output_dir, &outputs)?;
    println!(
        "simulated {} ({} train, {} test, onset {}) -> {}",
        scenario.fault.kind.label(),
        size.n_train,
        size.n_test,
        scenario.onset,
        a.output_dir.display()
    );
    Ok(())
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let cfg = detector_config(&a.detector)?;
    let series = io::read_series(&a.train)?;
    ensure_dir(&a.output_dir)?;
    let manifest = ManifestBuilder::start("train", config_json(&cfg), vec![a.train.clone()], None);
    let (model, report) = detector::train_with_report(&series, &cfg)?;
    let model_path = io::write_output(&a.output_dir, "model.json", &model.to_json()?)?;
    manifest.finish(&a.output_dir, &[model_path])?;
    println!(
        "trained on {} windows: D_cl = {:.6}, training alarm fraction = {:.4}",
        report.windows, model.calibration.d_cl, report.train_alarm_fraction
    );
    let constant = model.normalizer.constant_variables();
    if !constant.is_empty() {
        let names: Vec<&str> = constant.iter().map(|&j| series.names()[j].as_str()).collect();
        eprintln!("warning: constant training variables: {}", names.join(", "));
    }
    Ok(())
}

fn trace_csv(trace: &detector::DetectionTrace, names: &[String]) -> String {
    let mut out = String::from("index,D,alarm,root_cause_1,root_cause_2,root_cause_3\n");
    for p in &trace.points {
        let mut causes = vec![String::new(); 3];
        if let Some(rc) = &p.root_cause {
            for (slot, entry) in causes.iter_mut().zip(rc) {
                *slot = names[entry.variable].clone();
            }
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.index,
            fmt_f64(p.d),
            u8::from(p.alarm),
            causes.join(",")
        ));
    }
    out
}

#[derive(Serialize)]
struct NamedCause<'a> {
    variable: &'a str,
    index: usize,
    score: f64,
    outlier: bool,
}

fn named<'a>(entries: &[RootCauseEntry], names: &'a [String]) -> Vec<NamedCause<'a>> {
    entries
        .iter()
        .map(|e| NamedCause {
            variable: names[e.variable].as_str(),
            index: e.variable + 1,
            score: e.score,
            outlier: e.outlier,
        })
        .collect()
}

pub fn detect(a: &DetectArgs) -> CliResult<()> {
    io::require_file(&a.model)?;
    let model = detector::load_model(&a.model)?;
    let test: SeriesMatrix = io::read_series(&a.test)?;
    if test.n_vars() != model.n_vars() {
        return Err(CliError::Data(format!(
            "model expects {} variables but {} has {}",
            model.n_vars(),
            a.test.display(),
            test.n_vars()
        )));
    }
    ensure_dir(&a.output_dir)?;
    let manifest = ManifestBuilder::start(
        "detect",
        json!({ "model": config_json(&model.config), "onset": a.onset, "root_cause": format!("{:?}", a.root_cause).to_lowercase() }),
        vec![a.model.clone(), a.test.clone()],
        None,
    );
    let trace = detector::detect(&model, &test)?;
    let mut outputs = vec![io::write_output(&a.output_dir, "trace.csv", &trace_csv(&trace, test.names()))?];
    let alarms = trace.points.iter().filter(|p| p.alarm).count();
    println!("{} windows, {alarms} alarms (D_cl = {:.6})", trace.points.len(), trace.d_cl);

    if let Some(onset) = a.onset {
        let metrics = eval::score(&trace, onset, model.config.window)?;
        outputs.push(io::write_output(
            &a.output_dir,
            "metrics.json",
            &serde_json::to_string_pretty(&metrics)?,
        )?);
        println!(
            "FDR = {:.4}, FAR = {:.4}, delay = {}",
            metrics.fdr,
            metrics.far,
            metrics.detection_delay.map_or("none".to_owned(), |d| d.to_string())
        );
    }
    if let RootCauseMode::Segment = a.root_cause {
        if alarms == 0 {
            eprintln!("warning: no alarms, segment root cause skipped");
        } else {
            let ranked = detector::segment_root_cause(&model, &test, &trace, a.onset.unwrap_or(1))
                .or_else(|e| match e {
                    pmim::PmimError::InvalidParameter(_) => Ok(Vec::new()),
                    other => Err(other),
                })?;
            if ranked.is_empty() {
                eprintln!("warning: no alarms after the onset, segment root cause skipped");
            } else {
                let outliers: Vec<&str> = ranked
                    .iter()
                    .filter(|e| e.outlier)
                    .map(|e| test.names()[e.variable].as_str())
                    .collect();
                println!("segment outliers: {}", outliers.join(", "));
                outputs.push(io::write_output(
                    &a.output_dir,
                    "root_cause.json",
                    &serde_json::to_string_pretty(&named(&ranked, test.names()))?,
                )?);
            }
        }
    }
    manifest.finish(&a.output_dir, &outputs)?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(raw: &str, flag: &str, preset: impl FnOnce() -> Vec<T>) -> CliResult<Vec<T>> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("preset") {
        return Ok(preset());
    }
    let values = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse '{s}'")))
        })
        .collect::<CliResult<Vec<T>>>()?;
    if values.is_empty() {
        return Err(CliError::Usage(format!("--{flag}: empty grid")));
    }
    Ok(values)
}

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    let grid = SweepGrid {
        alphas: parse_list(&a.alphas, "alphas", SweepGrid::alpha_preset)?,
        sigmas: parse_list(&a.sigmas, "sigmas", SweepGrid::sigma_preset)?,
        windows: parse_list(&a.windows, "windows", SweepGrid::window_preset)?,
    };
    let base = DetectorConfig {
        eta: a.eta.unwrap_or(preset_defaults(a.preset).0),
        norm_p: norm_of(a.norm, a.preset),
        matrix_source: matrix_of(a.matrix),
        train_stride: a.stride,
        ..DetectorConfig::default()
    };
    let train = io::read_series(&a.train)?;
    let test = io::read_series(&a.test)?;
    ensure_dir(&a.output_dir)?;
    let manifest = ManifestBuilder::start(
        "sweep",
        json!({ "grid": grid, "base": config_json(&base), "onset": a.onset }),
        vec![a.train.clone(), a.test.clone()],
        None,
    );
    let result = eval::sweep(&train, &test, a.onset, &grid, &base)?;
    let outputs = vec![
        io::write_output(&a.output_dir, "sweep.csv", &result.to_csv())?,
        io::write_output(&a.output_dir, "sweep.json", &serde_json::to_string_pretty(&result)?)?,
    ];
    manifest.finish(&a.output_dir, &outputs)?;
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    println!("{} cells, {failed} failed", result.cells.len());
    if failed == result.cells.len() {
        return Err(CliError::Data(format!(
            "every sweep cell failed; first error: {}",
            result.cells[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(())
}
