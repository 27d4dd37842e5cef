use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use exogas_core::diagnostics::entropy_roots;
use exogas_core::io::{parse_config, resolve_out_dir, run, sweep, RunConfig, RunReport};
use exogas_core::verification::{convergence_study, MmsCase, Refinement, StudySetup};
use exogas_core::{PhysParams, Splitting};

/// Output root used when neither `--out` nor `EXOGAS_OUT_DIR` is given.
const DEFAULT_OUT: &str = "exogas-out";

#[derive(Parser, Debug)]
#[command(name = "exogas", version, about = "Radiative reactive gas outside a sphere, in Lagrangian mass coordinates")]
struct Cli {
    /// Configuration file, used when a command is given no config argument.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to EXOGAS_OUT_DIR, then ./exogas-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print only errors and the final verdict.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for sweeps and convergence studies.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a configuration to its end time and write all outputs.
    Run {
        /// Config file, or `default`.
        #[arg(value_name = "CONFIG")]
        file: Option<String>,
    },
    /// Run with the representation audit on and print every invariant
    /// against its threshold.
    Verify {
        /// Config file, or `default`.
        #[arg(value_name = "CONFIG")]
        file: Option<String>,
    },
    /// Convergence study on a manufactured solution.
    Mms {
        /// One of: smooth, equilibrium, static-heat.
        case: String,
        /// Number of refinement levels (at least 3).
        levels: usize,
        #[arg(long, value_enum, default_value_t = Study::Both)]
        study: Study,
        #[arg(long, value_enum, default_value_t = SplitArg::Strang)]
        splitting: SplitArg,
    },
    /// Print the two roots of y - ln y - 1 = value.
    Roots { value: f64 },
    /// One run per value of a configuration key.
    Sweep {
        /// Config file, or `default`.
        #[arg(value_name = "CONFIG")]
        file: String,
        /// Key to vary, e.g. params.b_exp.
        param: String,
        #[arg(required = true)]
        values: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Study {
    Space,
    Time,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Strang,
    Lie,
}

fn config_text(arg: Option<&str>, flag: Option<&Path>) -> Result<String> {
    let path = match (arg, flag) {
        (Some("default"), _) => return Ok(String::new()),
        (Some(p), _) => PathBuf::from(p),
        (None, Some(p)) => p.to_path_buf(),
        (None, None) => return Ok(String::new()),
    };
    std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
}

fn load(arg: Option<&str>, flag: Option<&Path>) -> Result<RunConfig> {
    Ok(parse_config(&config_text(arg, flag)?)?)
}

fn out_root(cli: &Cli) -> PathBuf {
    resolve_out_dir(cli.out.as_deref()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn print_summary(report: &RunReport) {
    println!(
        "status {}  t {}  steps {}  rejections {}",
        report.status, report.t_final, report.steps, report.rejections
    );
    println!(
        "decay metric {:.6e} -> {:.6e}  v in [{:.6}, {:.6}]  theta in [{:.6}, {:.6}]",
        report.decay_initial,
        report.decay_final,
        report.min_v,
        report.max_v,
        report.min_theta,
        report.max_theta
    );
    if report.outside_theorem_regime || !report.theorem_regime {
        println!("note: parameters lie outside the regime covered by the global estimates");
    }
    if let Some(e) = &report.error {
        println!("error: {e}");
    }
}

fn print_table(report: &RunReport) {
    println!("{:<28} {:>24} {:>24}  result", "check", "value", "threshold");
    for c in &report.invariants {
        println!(
            "{:<28} {:>24.6e} {:>24.6e}  {}",
            c.name,
            c.value,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
}

fn verdict(report: &RunReport) -> ExitCode {
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        for c in report.invariants.iter().filter(|c| !c.pass) {
            eprintln!("invariant {} failed: {:e} > {:e}", c.name, c.value, c.threshold);
        }
        if let Some(e) = &report.error {
            eprintln!("run failed: {e}");
        }
        ExitCode::FAILURE
    }
}

fn cmd_run(cli: &Cli, config: Option<&str>) -> Result<ExitCode> {
    let cfg = load(config, cli.config.as_deref())?;
    let dir = out_root(cli);
    let outcome = run(&cfg, Some(&dir))?;
    if !cli.quiet {
        print_summary(&outcome.report);
        println!("outputs in {}", dir.display());
    }
    Ok(verdict(&outcome.report))
}

fn cmd_verify(cli: &Cli, config: Option<&str>) -> Result<ExitCode> {
    let mut cfg = load(config, cli.config.as_deref())?;
    let x_max = cfg.grid.dx * cfg.grid.n_cells as f64;
    if x_max >= cfg.output.audit_k as f64 + 2.0 {
        cfg.output.audit = true;
    }
    let outcome = run(&cfg, resolve_out_dir(cli.out.as_deref()).as_deref())?;
    if !cli.quiet {
        print_summary(&outcome.report);
    }
    print_table(&outcome.report);
    Ok(verdict(&outcome.report))
}

fn cmd_mms(cli: &Cli, case: &str, levels: usize, study: Study, split: SplitArg) -> Result<ExitCode> {
    let case = MmsCase::by_name(case)?;
    let p = PhysParams::default();
    let kinds: &[Refinement] = match study {
        Study::Space => &[Refinement::Space],
        Study::Time => &[Refinement::Time],
        Study::Both => &[Refinement::Space, Refinement::Time],
    };
    let out = resolve_out_dir(cli.out.as_deref());
    if let Some(d) = &out {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut ok = true;
    for &kind in kinds {
        let mut setup = match kind {
            Refinement::Space => StudySetup::new(kind, 32, 2e-3, 0.5),
            Refinement::Time => StudySetup::new(kind, 64, 1e-2, 0.5),
        };
        setup.stepper.splitting = match split {
            SplitArg::Strang => Splitting::Strang,
            SplitArg::Lie => Splitting::Lie,
        };
        let rep = convergence_study(&case, &p, &setup, levels)?;
        let label = match kind {
            Refinement::Space => "space",
            Refinement::Time => "time",
        };
        if !cli.quiet {
            println!("# {label} refinement");
            print!("{}", rep.to_csv());
        }
        if rep.exact {
            println!("{label}: errors at roundoff, orders not meaningful");
        } else if let Some(o) = rep.final_orders() {
            println!(
                "{label}: finest orders v {:.3} u {:.3} theta {:.3} z {:.3}",
                o[0], o[1], o[2], o[3]
            );
        }
        if let Some(a) = &rep.anomaly {
            eprintln!("{label}: {a}");
            ok = false;
        }
        if let Some(d) = &out {
            let path = d.join(format!("mms_{label}.csv"));
            std::fs::write(&path, rep.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_sweep(cli: &Cli, config: &str, param: &str, values: &[String]) -> Result<ExitCode> {
    let base = config_text(Some(config), None)?;
    let dir = out_root(cli);
    let results = sweep(&base, param, values, Some(&dir))?;
    let mut ok = true;
    for (value, report) in &results {
        ok &= report.passed();
        if !cli.quiet {
            println!(
                "{param}={value}: {}  steps {}  decay {:.6e} -> {:.6e}",
                if report.passed() { "pass" } else { "FAIL" },
                report.steps,
                report.decay_initial,
                report.decay_final
            );
        }
    }
    if !cli.quiet {
        println!("outputs in {}", dir.display());
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if let Some(k) = cli.threads {
        if k == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Run { file } => cmd_run(cli, file.as_deref()),
        Command::Verify { file } => cmd_verify(cli, file.as_deref()),
        Command::Mms { case, levels, study, splitting } => {
            cmd_mms(cli, case, *levels, *study, *splitting)
        }
        Command::Roots { value } => {
            let (a1, a2) = entropy_roots(*value)?;
            println!("a1={a1} a2={a2}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { file, param, values } => cmd_sweep(cli, file, param, values),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
