use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use eqvit::group::GroupSpec;
use eqvit::models::{ImageModel, ParamCategory, ParamLedger};
use eqvit::nn::{Ctx, Init, Module};
use eqvit::tensor::{Precision, Tensor};
use eqvit::verify::{
    audit, degeneration_gaps, grad_audit, linear_shapes, orbit_oracle, write_reports_csv, AuditTarget,
    EquivarianceReport, AUDIT_SEEDS,
};
use eqvit_cli::config::{Orientation, RunConfig, TaskKind};
use eqvit_cli::experiments::{run_data_efficiency, run_toy_sr};
use eqvit_cli::synthetic::{gen_shapes, gen_sr, Split};
use eqvit_cli::train::{accuracy, load_checkpoint, psnr, save_checkpoint, train_classifier, train_regressor};
use serde_json::json;

#[derive(Parser)]
#[command(name = "eqvit", version, about = "Equivariant ViT toolkit: audits, toy training and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Equivariance,
    Gradients,
    Orbits,
    Params,
    Degeneration,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Shapes,
    Sr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    DataEfficiency,
    Sr,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites; exits 1 if any check misses its threshold.
    Audit {
        /// Group name: c1, c2, c4, d1, d2 or d4.
        #[arg(long, default_value = "d4")]
        group: String,
        #[arg(long, default_value = "f64")]
        precision: String,
        /// Write the equivariance reports as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Equivariance targets (default: every shipped layer and model).
        #[arg(long = "target")]
        targets: Vec<String>,
        #[arg(long, value_enum, default_value = "equivariance")]
        suite: Suite,
        /// Use only the first N fixed seeds.
        #[arg(long, default_value_t = AUDIT_SEEDS.len())]
        seeds: usize,
    },
    /// Train a model from a run configuration and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split of its task.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the configuration saved next to the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
    },
    /// Parameter ledger and forward throughput of a configured model.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 16)]
        iters: usize,
    },
    /// Merge JSON equivariance reports into one CSV table.
    Report {
        #[arg(long)]
        out: PathBuf,
        inputs: Vec<PathBuf>,
    },
    /// Run a desk-scale experiment and print its JSON report.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        #[arg(long)]
        config: PathBuf,
        /// Seeds for the data-efficiency runs.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Audit { group, precision, report, targets, suite, seeds } => {
            let spec = GroupSpec::parse(&group)?;
            let precision = Precision::parse(&precision)?;
            let targets = if targets.is_empty() {
                AuditTarget::SHIPPED.to_vec()
            } else {
                targets.iter().map(|t| t.parse()).collect::<eqvit::Result<Vec<AuditTarget>>>()?
            };
            if seeds == 0 || seeds > AUDIT_SEEDS.len() {
                bail!("--seeds must be in 1..={}", AUDIT_SEEDS.len());
            }
            run_audit(spec, precision, report.as_deref(), &targets, suite, &AUDIT_SEEDS[..seeds])
        }
        Command::Train { config, task, out } => {
            let cfg = load(&config, task)?;
            train(&cfg, &out)
        }
        Command::Eval { checkpoint, config, task } => {
            let path = config.unwrap_or_else(|| sidecar(&checkpoint));
            let cfg = load(&path, task)?;
            eval(&cfg, &checkpoint)
        }
        Command::Bench { config, iters } => bench(&RunConfig::load(&config)?, iters),
        Command::Report { out, inputs } => {
            let mut reports = Vec::new();
            for path in &inputs {
                reports.extend(read_reports(path)?);
            }
            write_reports_csv(&reports, BufWriter::new(File::create(&out)?))?;
            println!("wrote {} rows to {}", reports.iter().map(|r| r.cells.len()).sum::<usize>(), out.display());
            Ok(true)
        }
        Command::Experiment { which, config, seeds, json } => {
            let cfg = RunConfig::load(&config)?;
            let (value, ok) = match which {
                Experiment::DataEfficiency => {
                    let r = run_data_efficiency(&cfg, &seeds)?;
                    (serde_json::to_value(&r)?, r.passes())
                }
                Experiment::Sr => {
                    let r = run_toy_sr(&cfg)?;
                    (serde_json::to_value(&r)?, r.passes())
                }
            };
            let text = serde_json::to_string_pretty(&value)?;
            println!("{text}");
            if let Some(path) = json {
                std::fs::write(path, text)?;
            }
            Ok(ok)
        }
    }
}

fn load(path: &Path, task: Option<TaskArg>) -> Result<RunConfig> {
    let cfg = RunConfig::load(path)?;
    let want = match task {
        None => return Ok(cfg),
        Some(TaskArg::Shapes) => TaskKind::Shapes,
        Some(TaskArg::Sr) => TaskKind::Sr,
    };
    if cfg.task.task != want {
        bail!("--task {want:?} does not match the {:?} task in {}", cfg.task.task, path.display());
    }
    Ok(cfg)
}

fn sidecar(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".toml");
    PathBuf::from(name)
}

fn read_reports(path: &Path) -> Result<Vec<EquivarianceReport>> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))?;
    let reports = if value.is_array() { serde_json::from_value(value)? } else { vec![serde_json::from_value(value)?] };
    Ok(reports)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run_audit(
    spec: GroupSpec,
    precision: Precision,
    report: Option<&Path>,
    targets: &[AuditTarget],
    suite: Suite,
    seeds: &[u64],
) -> Result<bool> {
    let mut ok = true;
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Equivariance) {
        let mut reports = Vec::new();
        for &target in targets {
            let start = Instant::now();
            let r = audit(target, spec, precision, seeds)?;
            let threshold = target.threshold(precision);
            let pass = r.passes(threshold);
            ok &= pass;
            println!(
                "{} equivariance {target:<18} group {} {precision} max_abs {:.3e} max_rel {:.3e} threshold {threshold:.0e} ({:.2?})",
                verdict(pass),
                spec.name(),
                r.max_abs(),
                r.max_rel(),
                start.elapsed()
            );
            reports.push(r);
        }
        if let Some(path) = report {
            let file = BufWriter::new(File::create(path)?);
            if reports.len() == 1 {
                reports[0].write_json(file)?;
            } else {
                serde_json::to_writer_pretty(file, &reports)?;
            }
        }
    }
    if wants(Suite::Gradients) {
        for r in grad_audit(0)? {
            ok &= r.passes();
            println!(
                "{} gradient {:<24} rel_err {:.3e} tol {:.0e}",
                verdict(r.passes()),
                r.name,
                r.max_rel_err,
                r.tolerance()
            );
        }
    }
    if wants(Suite::Orbits) {
        let r = orbit_oracle(16, 8)?;
        ok &= r.exact();
        println!(
            "{} orbits positions {}/{} pairs {}/{}",
            verdict(r.exact()),
            r.positions_checked - r.position_mismatches,
            r.positions_checked,
            r.pairs_checked - r.pair_mismatches,
            r.pairs_checked
        );
    }
    if wants(Suite::Params) {
        let cfg = eqvit::verify::toy_vit(spec);
        let model = eqvit::models::EqViT::<f64>::new(&cfg, 0)?;
        for s in linear_shapes(&model)? {
            let pass = s.sharing_factor() == (spec.order(), 1);
            ok &= pass;
            println!(
                "{} sharing {:<22} factor {}/{}",
                verdict(pass),
                s.name,
                s.sharing_factor().0,
                s.sharing_factor().1
            );
        }
    }
    if wants(Suite::Degeneration) {
        for g in degeneration_gaps(0)? {
            let pass = g.max_abs <= 1e-12;
            ok &= pass;
            println!("{} degeneration {:<16} max_abs {:.3e}", verdict(pass), g.name, g.max_abs);
        }
    }
    if !ok {
        eprintln!("one or more checks missed their threshold");
    }
    Ok(ok)
}

fn train(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mut model = cfg.model.build::<f64>(cfg.optimizer.seed)?;
    let log = match cfg.task.task {
        TaskKind::Shapes => train_classifier(&mut model, &gen_shapes(&cfg.task, Split::Train), &cfg.optimizer)?,
        TaskKind::Sr => train_regressor(&mut model, &gen_sr(&cfg.task, Split::Train), &cfg.optimizer)?,
    };
    for (i, l) in log.epoch_loss.iter().enumerate() {
        println!("epoch {:>3} loss {l:.5}", i + 1);
    }
    save_checkpoint(&model, out)?;
    std::fs::write(sidecar(out), cfg.to_toml()?)?;
    println!("saved {} ({} parameters)", out.display(), model.param_count());
    Ok(true)
}

fn eval(cfg: &RunConfig, checkpoint: &Path) -> Result<bool> {
    let mut model = cfg.model.build::<f64>(0)?;
    load_checkpoint(&mut model, checkpoint)?;
    let value = match cfg.task.task {
        TaskKind::Shapes => {
            let canonical = eqvit_cli::config::SyntheticTaskSpec {
                test_orientation: Orientation::CanonicalOnly,
                ..cfg.task.clone()
            };
            let rotated = eqvit_cli::config::SyntheticTaskSpec {
                test_orientation: Orientation::AllOrientations,
                ..cfg.task.clone()
            };
            json!({
                "accuracy_canonical": accuracy(&model, &gen_shapes(&canonical, Split::Test))?,
                "accuracy_all_orientations": accuracy(&model, &gen_shapes(&rotated, Split::Test))?,
            })
        }
        TaskKind::Sr => {
            let test = gen_sr(&cfg.task, Split::Test);
            let rotated = test.transformed(&GroupSpec::c4(), eqvit::group::GroupElement::new(1, 0));
            json!({ "psnr": psnr(&model, &test)?, "psnr_rotated": psnr(&model, &rotated)? })
        }
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(true)
}

fn bench(cfg: &RunConfig, iters: usize) -> Result<bool> {
    let model = cfg.model.build::<f64>(cfg.optimizer.seed)?;
    let ledger = ParamLedger::of(&model);
    let categories = [
        ParamCategory::Embedding,
        ParamCategory::PositionEncoding,
        ParamCategory::AttentionLinear,
        ParamCategory::MlpLinear,
        ParamCategory::Norm,
        ParamCategory::Merge,
        ParamCategory::Head,
    ];
    for c in categories {
        println!("{:<18} {:>9}", format!("{c:?}"), ledger.category(c));
    }
    println!("{:<18} {:>9}", "total", ledger.total());
    for s in linear_shapes(&model)? {
        println!(
            "linear {:<24} {}x{} x{} blocks, sharing {}/{}",
            s.name,
            s.c_in,
            s.c_out,
            s.blocks,
            s.sharing_factor().0,
            s.sharing_factor().1
        );
    }
    let side = cfg.model.image_side();
    let mut init = Init::new(0);
    let x = Tensor::constant(init.uniform::<f64>(&[side, side, cfg.model.in_channels()], 0.0, 1.0));
    let ctx = Ctx::inference();
    let start = Instant::now();
    for _ in 0..iters.max(1) {
        model.forward(&ctx, &x)?;
    }
    let per = start.elapsed().as_secs_f64() / iters.max(1) as f64;
    println!("forward {:.3} ms/image, {:.1} images/s", per * 1e3, 1.0 / per);
    Ok(true)
}
