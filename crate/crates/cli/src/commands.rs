use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rics::analog::{apply_operator, OperatorSpec};
use rics::config::{parse_config, Config};
use rics::num_complex::Complex64;
use rics::onn::{self, Evaluation};
use rics::rng::{self, Domain};
use rics::secrecy;
use rics::signal::ComplexSignal;
use rics::synth::{self, Dataset};
use rics::throughput::{self, Inference, ThroughputExperiment};

use crate::{Cli, Command, GlobalArgs};

/// A comma-separated (or, for counts, ranged) list given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T>(pub Vec<T>);

/// `a,b,c` or `start:stop:step` (inclusive).
pub fn parse_usize_grid(s: &str) -> Result<Grid<usize>, String> {
    let grid: Vec<usize> = if let Some((start, rest)) = s.split_once(':') {
        let (stop, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
        let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
        if step == 0 {
            return Err("range step must be positive".into());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(Grid(grid))
}

pub fn parse_f64_grid(s: &str) -> Result<Grid<f64>, String> {
    let grid: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()?;
    if grid.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(Grid(grid))
}

fn load_config(global: &GlobalArgs) -> Result<Config> {
    let mut config = match global.config.as_deref() {
        None | Some("default") => Config::default(),
        Some(path) => parse_config(Path::new(path))?,
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(out) = &global.out {
        config.output = out.clone();
    }
    Ok(config)
}

fn configure_workers(workers: Option<usize>) -> Result<()> {
    let Some(n) = workers else { return Ok(()) };
    if n == 0 {
        bail!("--workers must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_workers(cli.global.workers)?;
    let mut config = load_config(&cli.global)?;
    match &cli.command {
        Command::Train { layers: Some(l), .. } | Command::Eval { layers: Some(l), .. } => config.onn.layers = *l,
        Command::Throughput { elements, trials, .. } => {
            if let Some(grid) = elements {
                config.surface.n_elements = grid.0.clone();
            }
            if let Some(t) = trials {
                config.experiment.frames = *t;
            }
        }
        Command::Secrecy { alpha, elements } => {
            if let Some(grid) = alpha {
                config.surface.alpha = grid.0.clone();
            }
            if let Some(grid) = elements {
                config.surface.n_elements = grid.0.clone();
            }
        }
        Command::OptimizeAlpha { elements, step } => {
            if let Some(grid) = elements {
                config.surface.n_elements = grid.0.clone();
            }
            if let Some(step) = step {
                config.secrecy.alpha_step = *step;
            }
        }
        _ => {}
    }
    config.validate()?;
    fs::create_dir_all(&config.output).with_context(|| format!("creating {}", config.output.display()))?;

    match cli.command {
        Command::Synth => synth_cmd(&config),
        Command::Train { data, .. } => train_cmd(&config, data.as_deref()),
        Command::Eval { model, data, .. } => eval_cmd(&config, model, data.as_deref()),
        Command::Throughput {
            emulate_accuracy,
            model_2layer,
            model_4layer,
            ..
        } => throughput_cmd(&config, emulate_accuracy, model_2layer, model_4layer),
        Command::Secrecy { .. } => secrecy_cmd(&config),
        Command::OptimizeAlpha { .. } => optimize_alpha_cmd(&config),
        Command::Operators {
            input,
            op,
            shift_hz,
            kernel,
        } => operators_cmd(&config, &input, &op, shift_hz, kernel),
    }
}

fn checkpoint_path(config: &Config, layers: usize) -> PathBuf {
    config.output.join(format!("model_{layers}layer.ckpt"))
}

fn train_set(config: &Config) -> Result<Dataset> {
    let setup = config.capture_setup()?;
    Ok(synth::make_dataset(
        config.onn.train_per_class,
        &setup,
        rng::derive(config.seed, Domain::TrainSet),
    )?)
}

fn test_set(config: &Config) -> Result<Dataset> {
    let setup = config.capture_setup()?;
    Ok(synth::make_dataset(
        config.onn.test_per_class,
        &setup,
        rng::derive(config.seed, Domain::TestSet),
    )?)
}

fn synth_cmd(config: &Config) -> Result<()> {
    let setup = config.capture_setup()?;
    for (name, per_class, domain) in [
        ("train", config.onn.train_per_class, Domain::TrainSet),
        ("test", config.onn.test_per_class, Domain::TestSet),
    ] {
        let captures = synth::make_captures(per_class, &setup, rng::derive(config.seed, domain))?;
        let dir = config.output.join(name);
        synth::write_dataset_dir(&dir, &captures)?;
        println!("{name}: {} captures -> {}", captures.len(), dir.display());
    }
    Ok(())
}

fn print_evaluation(eval: &Evaluation) {
    println!("accuracy {:?}", eval.accuracy);
    println!("confusion (rows: true class, columns: predicted)");
    for (class, row) in synth::SpectrumClass::ALL.iter().zip(&eval.confusion) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {:<7}{}", class.name(), cells.join(" "));
    }
}

fn train_cmd(config: &Config, data: Option<&Path>) -> Result<()> {
    let layers = config.onn.layers;
    let train_data = match data {
        Some(dir) => synth::read_dataset_dir(dir)?,
        None => train_set(config)?,
    };
    let model = onn::init_model(layers, &mut rng::substream(config.seed, Domain::ModelInit, layers as u64))?;
    let (model, history) = onn::train(&model, &train_data, &config.train_params(), config.seed)?;
    let eval = onn::evaluate(&model, &test_set(config)?)?;

    let ckpt = checkpoint_path(config, layers);
    onn::save_checkpoint(&model, &ckpt)?;
    onn::save_confusion(&eval, &onn::confusion_sidecar(&ckpt))?;
    let mut losses = String::from("epoch,loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        losses.push_str(&format!("{epoch},{loss:?}\n"));
    }
    let loss_path = ckpt.with_extension("loss.csv");
    fs::write(&loss_path, losses).with_context(|| format!("writing {}", loss_path.display()))?;

    println!("layers {layers}");
    println!(
        "loss {:?} -> {:?} over {} epochs",
        history.first().copied().unwrap_or(f64::NAN),
        history.last().copied().unwrap_or(f64::NAN),
        history.len()
    );
    print_evaluation(&eval);
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

fn eval_cmd(config: &Config, model: Option<PathBuf>, data: Option<&Path>) -> Result<()> {
    let path = model.unwrap_or_else(|| checkpoint_path(config, config.onn.layers));
    let model = onn::load_checkpoint(&path)?;
    let test_data = match data {
        Some(dir) => synth::read_dataset_dir(dir)?,
        None => test_set(config)?,
    };
    let eval = onn::evaluate(&model, &test_data)?;
    let out = config.output.join(format!("eval_{}layer.confusion.csv", model.n_layers()));
    onn::save_confusion(&eval, &out)?;
    print_evaluation(&eval);
    println!("confusion {}", out.display());
    Ok(())
}

fn scheme_inference(
    config: &Config,
    emulate: bool,
    layers: usize,
    explicit: Option<PathBuf>,
    accuracy: f64,
) -> Result<Inference> {
    if emulate {
        return Ok(match explicit {
            Some(ckpt) => Inference::Emulated(Box::new(onn::load_confusion(&onn::confusion_sidecar(&ckpt))?)),
            None => Inference::Emulated(Box::new(throughput::uniform_confusion(accuracy)?)),
        });
    }
    let ckpt = explicit.unwrap_or_else(|| checkpoint_path(config, layers));
    if !ckpt.exists() {
        bail!(rics::Error::Configuration(format!(
            "model checkpoint {} not found; run `train --layers {layers}` or pass --emulate-accuracy",
            ckpt.display()
        )));
    }
    Ok(Inference::Model(Box::new(onn::load_checkpoint(&ckpt)?)))
}

fn throughput_cmd(config: &Config, emulate: bool, model_2layer: Option<PathBuf>, model_4layer: Option<PathBuf>) -> Result<()> {
    let e = &config.experiment;
    let schemes = throughput::standard_schemes(
        scheme_inference(config, emulate, 2, model_2layer, e.emulated_accuracy_2layer)?,
        scheme_inference(config, emulate, 4, model_4layer, e.emulated_accuracy_4layer)?,
    );
    let experiment = ThroughputExperiment {
        scenario: config.scenario()?,
        n_elements: config.surface.n_elements.clone(),
        n_absorb: config.surface.n_absorb,
        frame: config.frame_params(),
        frames: e.frames,
        capture: (!emulate).then(|| config.capture_setup()).transpose()?,
    };
    let points = experiment.run(&schemes, config.seed)?;
    let path = config.output.join("throughput.csv");
    throughput::write_csv(&points, &path)?;
    print!("{}", throughput::to_csv(&points));
    Ok(())
}

fn secrecy_cmd(config: &Config) -> Result<()> {
    let rows = secrecy::run_secrecy_experiment(
        &config.secrecy_scenario()?,
        &config.surface.alpha,
        &config.surface.n_elements,
        &config.operator()?,
    )?;
    let path = config.output.join("secrecy.csv");
    secrecy::write_csv(&rows, &path)?;
    print!("{}", secrecy::to_csv(&rows));
    Ok(())
}

fn optimize_alpha_cmd(config: &Config) -> Result<()> {
    let scenario = config.secrecy_scenario()?;
    let operator = config.operator()?;
    let mut csv = String::from("n_elements,alpha_star,secrecy_star\n");
    for &n in &config.surface.n_elements {
        let (alpha, best) = secrecy::optimize_alpha(&scenario, n, config.secrecy.alpha_step, &operator)?;
        csv.push_str(&format!("{n},{alpha:?},{best:?}\n"));
    }
    let path = config.output.join("optimize_alpha.csv");
    fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
    print!("{csv}");
    Ok(())
}

fn operators_cmd(config: &Config, input: &Path, op: &str, shift_hz: Option<f64>, kernel: Option<Grid<f64>>) -> Result<()> {
    let signal = ComplexSignal::load(input)?;
    let kernel = kernel.map(|taps| taps.0.into_iter().map(|t| Complex64::new(t, 0.0)).collect());
    let spec = OperatorSpec::from_kind(op, kernel, shift_hz.or(Some(config.secrecy.shift_hz)))?;
    let output = apply_operator(&spec, &signal)?;
    let path = config.output.join(format!("{}.iq", spec.kind()));
    output.save(&path)?;
    println!("operator {}", spec.kind());
    println!("input_power {:?}", signal.power());
    println!("output_power {:?}", output.power());
    println!("output {}", path.display());
    Ok(())
}
