mod args;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use args::{apply_overrides, Cli, Command, GenArgs, RunArgs, StatsArgs};
use streamal::experiment::{emit_results, read_runs, summarize, RUNS_FILE};
use streamal::generators::write_csv_stream;
use streamal::{run_experiment, ExperimentConfig, StreamSpec};

/// Failure classes with their exit codes.
enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<streamal::Error> for Failure {
    fn from(e: streamal::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(&a),
        Command::Stats(a) => stats(&a),
        Command::Gen(a) => gen(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Io(m) => eprintln!("i/o error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(a: &RunArgs) -> Result<(), Failure> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, a).map_err(Failure::Config)?;
    cfg.validate()?;
    eprintln!("running {} runs over {} cells", cfg.run_count(), cfg.cells().len());
    let runs = run_experiment(&cfg)?;
    emit_results(&runs, &a.out, cfg.write_steps)?;
    let config_path = a.out.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml()?).map_err(|e| Failure::Io(format!("{}: {e}", config_path.display())))?;

    println!("run_id\truns\taccuracy\tstd\tquery_rate\tdetections\th_score");
    for s in summarize(&runs) {
        let h = s.h_score_mean.map_or("-".to_string(), |h| format!("{h:.3}"));
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.2}\t{h}",
            s.run_id, s.runs, s.accuracy_mean, s.accuracy_std, s.query_rate_mean, s.detections_mean
        );
    }
    eprintln!("results written to {}", a.out.display());
    Ok(())
}

fn runs_file(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(RUNS_FILE)
    } else {
        input.to_path_buf()
    }
}

fn stats(a: &StatsArgs) -> Result<(), Failure> {
    report::factor_index(&a.by).map_err(Failure::Config)?;
    let mut rows = Vec::new();
    for input in &a.inputs {
        rows.extend(read_runs(runs_file(input))?);
    }
    if rows.is_empty() {
        return Err(Failure::Config("no runs in the given files".into()));
    }
    print!("{}", report::render(&rows, &a.by, &a.metric).map_err(Failure::Config)?);
    Ok(())
}

fn gen(a: &GenArgs) -> Result<(), Failure> {
    let mut spec = StreamSpec::preset(&a.stream)?.with_seed(a.seed);
    if let Some(n) = a.n {
        spec.n = n;
    }
    if a.no_drift {
        spec = spec.with_drift(None);
    }
    let stream = spec.build()?;
    write_csv_stream(&stream, &a.out)?;
    match &stream.drift {
        Some(d) => eprintln!(
            "wrote {} samples to {} (drift from t={} on features {:?})",
            stream.len(),
            a.out.display(),
            d.start_t,
            d.features
        ),
        None => eprintln!("wrote {} samples to {}", stream.len(), a.out.display()),
    }
    Ok(())
}
