//! `slicesim`: command-line front end for the slicing library.

mod problem;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slicing_core::allocator::{
    allocate_baseline, kkt_certificate, objective, AllocationProblem, AllocatorKind,
};
use slicing_core::experiment::{
    run_experiment, write_csv, write_csv_file, ExperimentSpec, RunResult, SweepAxis,
};
use slicing_core::game::{ActionProfile, Game};
use slicing_core::reliability::{self, RetransParams};
use slicing_core::simulator::{run_simulation_with, FrameEvents};
use slicing_core::{metrics, par, Execution};

#[derive(Parser, Debug)]
#[command(
    name = "slicesim",
    version,
    about = "URLLC/eMBB uplink slicing: reliability, game, allocation and simulation"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Experiment file (TOML). Defaults reproduce the reference scenario.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random stream; replaces the seed list of the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output file. CSV for `simulate` and `reliability`.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Number of frames to simulate.
    #[arg(long, global = true, value_name = "N")]
    frames: Option<u64>,
    /// Sweep axis `FIELD=v1,v2,...`; repeat for a Cartesian product.
    #[arg(long, global = true, value_name = "FIELD=VALUES")]
    sweep: Vec<String>,
    /// Override one base config field, `FIELD=VALUE`; repeatable.
    #[arg(long = "set", global = true, value_name = "FIELD=VALUE")]
    set: Vec<String>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Run every parallel section on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Failure probability of a tagged URLLC packet in one block.
    Reliability(ReliabilityArgs),
    /// Region-splitting game.
    #[command(subcommand)]
    Game(GameCommand),
    /// Solve one grant allocation problem read from a text file.
    Alloc(AllocArgs),
    /// Frame-by-frame simulation, one CSV row per sweep cell and seed.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct ReliabilityArgs {
    /// Per-block arrival rate; comma-separated list allowed.
    #[arg(long, value_delimiter = ',', required = true)]
    rho_tilde: Vec<f64>,
    /// Retransmission probability; defaults to the config value.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Window length in mini slots; defaults to the config value.
    #[arg(long)]
    tau: Option<u32>,
    /// Monte Carlo trials per cell; 0 skips simulation.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
}

#[derive(Subcommand, Debug)]
enum GameCommand {
    /// Classify the game and list its pure equilibria.
    Solve(GameSolveArgs),
}

#[derive(Args, Debug)]
struct GameSolveArgs {
    /// Total eMBB request in bits; defaults to users * mean arrival.
    #[arg(long)]
    r: Option<f64>,
    /// Print the full payoff matrix.
    #[arg(long)]
    matrix: bool,
    /// Cross-check against brute-force best-response enumeration.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug)]
struct AllocArgs {
    /// Problem file: `L <budget>` plus one `<id> <z> <r>` line per user.
    problem: PathBuf,
    /// Allocation method.
    #[arg(long, default_value = "water_fill")]
    method: AllocatorKind,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Write every frame's events as JSON lines (single run only).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

fn parse_assignment(text: &str) -> Result<(String, String)> {
    let (field, value) = text
        .split_once('=')
        .with_context(|| format!("expected FIELD=VALUE, got `{text}`"))?;
    Ok((field.trim().to_string(), value.trim().to_string()))
}

impl GlobalArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        for assignment in &self.set {
            let (field, value) = parse_assignment(assignment)?;
            spec.base.set_field(&field, &value)?;
        }
        if let Some(frames) = self.frames {
            spec.base.frames = frames;
        }
        if let Some(seed) = self.seed {
            spec.seeds = vec![seed];
        }
        for axis in &self.sweep {
            spec.sweep.push(SweepAxis::parse(axis)?);
        }
        spec.validate()?;
        Ok(spec)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn reject_sweep(&self, command: &str) -> Result<()> {
        if !self.sweep.is_empty() {
            bail!("--sweep only applies to `simulate`, not `{command}`");
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.global.threads {
        Some(threads) => par::with_threads(threads, || run(&cli))
            .map_err(anyhow::Error::from)
            .and_then(|r| r),
        None => run(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let global = &cli.global;
    match &cli.command {
        Command::Reliability(args) => {
            global.reject_sweep("reliability")?;
            reliability_cmd(global, args)
        }
        Command::Game(GameCommand::Solve(args)) => {
            global.reject_sweep("game")?;
            game_cmd(global, args)
        }
        Command::Alloc(args) => {
            global.reject_sweep("alloc")?;
            alloc_cmd(global, args)
        }
        Command::Simulate(args) => simulate_cmd(global, args),
    }
}

fn reliability_cmd(global: &GlobalArgs, args: &ReliabilityArgs) -> Result<()> {
    let spec = global.spec()?;
    let seed = spec.seeds[0];
    let tau = args.tau.unwrap_or(spec.base.tau);
    let ps = if args.p.is_empty() {
        vec![spec.base.p]
    } else {
        args.p.clone()
    };

    let header = [
        "rho_tilde",
        "p",
        "tau",
        "light_traffic",
        "exact_tau3",
        "mc_estimate",
        "mc_std_error",
        "trials",
        "seed",
    ];
    let mut rows = Vec::new();
    for &rho_tilde in &args.rho_tilde {
        for &p in &ps {
            let params = RetransParams::new(rho_tilde, p, tau)?;
            let light = reliability::failure_prob_light_traffic(params)?;
            let exact = (tau == 3)
                .then(|| reliability::failure_prob_exact_tau3(params))
                .transpose()?;
            let mc = (args.trials > 0)
                .then(|| {
                    reliability::failure_prob_monte_carlo_with(
                        params,
                        args.trials,
                        seed,
                        global.execution(),
                    )
                })
                .transpose()?;
            rows.push(vec![
                rho_tilde.to_string(),
                p.to_string(),
                tau.to_string(),
                light.to_string(),
                exact.map(|v| v.to_string()).unwrap_or_default(),
                mc.map(|m| m.estimate.to_string()).unwrap_or_default(),
                mc.map(|m| m.std_error.to_string()).unwrap_or_default(),
                args.trials.to_string(),
                seed.to_string(),
            ]);
        }
    }

    println!(
        "{:>10} {:>6} {:>4} {:>14} {:>14} {:>14} {:>12}",
        "rho_tilde", "p", "tau", "light_traffic", "exact_tau3", "monte_carlo", "std_error"
    );
    for row in &rows {
        let show = |s: &String| {
            if s.is_empty() {
                "-".to_string()
            } else {
                s.clone()
            }
        };
        let short = |s: &String| {
            s.parse::<f64>()
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_else(|_| show(s))
        };
        println!(
            "{:>10} {:>6} {:>4} {:>14} {:>14} {:>14} {:>12}",
            row[0],
            row[1],
            row[2],
            short(&row[3]),
            short(&row[4]),
            short(&row[5]),
            short(&row[6])
        );
    }
    if let Some(path) = &global.out {
        let mut writer = csv::Writer::from_path(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
    }
    Ok(())
}

fn game_cmd(global: &GlobalArgs, args: &GameSolveArgs) -> Result<()> {
    let spec = global.spec()?;
    let request = args.r.unwrap_or_else(|| spec.base.static_request());
    let game = Game::new(spec.base.game_params(request))?;
    let solution = game.solve();
    let n = game.params().n_blocks;

    println!("case: {}", solution.case.as_str());
    match solution.n1_star {
        Some(k) => println!(
            "n1*: {k}  (P(fail) = {:.6e} <= epsilon = {})",
            game.failure_prob(k),
            game.params().epsilon
        ),
        None => println!("n1*: none (no common region meets epsilon)"),
    }
    println!("n2*(0): {}", game.n2_star(0));
    let show = |label: &str, profiles: &[ActionProfile]| {
        println!("{label}:");
        println!(
            "  {:>4} {:>4} {:>12} {:>12} {:>12}",
            "n1", "n2", "urllc", "embb", "social"
        );
        for &profile in profiles {
            println!(
                "  {:>4} {:>4} {:>12.6} {:>12.6} {:>12.6}",
                profile.n1,
                profile.n2,
                game.payoff_urllc(profile),
                game.payoff_embb(profile),
                game.social_payoff(profile)
            );
        }
    };
    show("equilibria", &solution.equilibria);
    show("socially optimal", &solution.socially_optimal);

    if args.matrix {
        println!("payoff matrix (rows n1, columns n2, cells urllc/embb; n1 + n2 <= {n}):");
        for (n1, row) in game.payoff_matrix().iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .take(n - n1 + 1)
                .map(|(u, e)| format!("{u:.3}/{e:.3}"))
                .collect();
            println!("  {n1:>3}: {}", cells.join(" "));
        }
    }
    if args.check {
        let mut enumerated = game.enumerate_pure_nash()?;
        let mut expected = solution.equilibria.clone();
        enumerated.sort();
        expected.sort();
        if enumerated != expected {
            bail!("enumeration found {enumerated:?}, closed form gives {expected:?}");
        }
        println!(
            "check: brute-force enumeration agrees ({} equilibria)",
            enumerated.len()
        );
    }
    Ok(())
}

fn alloc_cmd(global: &GlobalArgs, args: &AllocArgs) -> Result<()> {
    let text = fs::read_to_string(&args.problem)
        .with_context(|| format!("cannot read {}", args.problem.display()))?;
    let file = problem::parse(&text).with_context(|| format!("in {}", args.problem.display()))?;
    let problem: &AllocationProblem = &file.problem;
    problem.check_feasible()?;

    let mut rng = ChaCha8Rng::seed_from_u64(global.seed.unwrap_or(1));
    let allocation = allocate_baseline(args.method, problem, &mut rng)?;
    let certificate = kkt_certificate(problem, &allocation.x)?;
    let after: Vec<f64> = problem
        .z
        .iter()
        .zip(&allocation.x)
        .map(|(z, x)| z + x)
        .collect();

    println!("method: {}", args.method);
    println!("budget: {}", problem.budget);
    println!(
        "{:>10} {:>14} {:>14} {:>14} {:>14}",
        "id", "z", "r", "x", "z + x"
    );
    for (i, id) in file.ids.iter().enumerate() {
        println!(
            "{id:>10} {:>14} {:>14} {:>14.9} {:>14.9}",
            problem.z[i], problem.r[i], allocation.x[i], after[i]
        );
    }
    println!("objective: {:.9e}", objective(problem, &allocation.x)?);
    if after.len() >= 2 {
        println!(
            "sample variance of z + x: {:.9e}",
            metrics::sample_variance(&after)?
        );
    }
    println!("jain index of z + x: {:.9}", metrics::jain_index(&after)?);
    match certificate.lambda {
        Some(lambda) => println!("kkt lambda: {lambda:.9e}"),
        None => println!(
            "kkt lambda: undetermined (no interior user), using {:.9e}",
            certificate.lambda_used
        ),
    }
    let ids = |set: &[usize]| {
        set.iter()
            .map(|&i| file.ids[i].as_str())
            .collect::<Vec<_>>()
            .join(",")
    };
    println!("kkt interior: [{}]", ids(&certificate.active_sets.interior));
    println!("kkt at zero: [{}]", ids(&certificate.active_sets.at_zero));
    println!("kkt at cap: [{}]", ids(&certificate.active_sets.at_cap));
    println!(
        "kkt residuals: stationarity {:.3e}, complementarity {:.3e}, primal {:.3e}",
        certificate.stationarity_residual,
        certificate.complementarity_residual,
        certificate.primal_residual
    );
    println!(
        "optimal: {}",
        if certificate.certifies(1e-9) {
            "yes"
        } else {
            "no"
        }
    );
    Ok(())
}

fn write_trace(spec: &ExperimentSpec, path: &Path) -> Result<Vec<RunResult>> {
    let runs = spec.runs()?;
    if runs.len() != 1 {
        bail!(
            "--trace needs exactly one run, the experiment has {}",
            runs.len()
        );
    }
    let config = runs.into_iter().next().expect("one run");
    let file =
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let outcome = run_simulation_with(&config, |events: &FrameEvents| {
        serde_json::to_writer(&mut out, events)
            .map_err(|e| slicing_core::Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
        Ok(())
    })
    .map_err(anyhow::Error::from)
    .and_then(|report| {
        out.flush()?;
        Ok(report)
    });
    match outcome {
        Ok(report) => Ok(vec![RunResult { config, report }]),
        Err(err) => {
            drop(out);
            let _ = fs::remove_file(path);
            Err(err)
        }
    }
}

fn simulate_cmd(global: &GlobalArgs, args: &SimulateArgs) -> Result<()> {
    let spec = global.spec()?;
    let results = match &args.trace {
        Some(path) => write_trace(&spec, path)?,
        None => run_experiment(&spec, global.execution())?,
    };
    match &global.out {
        Some(path) => {
            write_csv_file(path, &results)?;
            print_summary(&mut io::stdout().lock(), &spec, &results)?;
        }
        None => {
            write_csv(io::stdout().lock(), &results)?;
            print_summary(&mut io::stderr().lock(), &spec, &results)?;
        }
    }
    Ok(())
}

fn print_summary(out: &mut dyn Write, spec: &ExperimentSpec, results: &[RunResult]) -> Result<()> {
    let swept: Vec<&str> = spec.sweep.iter().map(|axis| axis.field.as_str()).collect();
    let mut header: Vec<String> = swept.iter().map(|s| s.to_string()).collect();
    header.extend(
        [
            "seed",
            "n1",
            "n2",
            "urllc_loss",
            "embb_loss",
            "variance",
            "jain",
            "payoff",
        ]
        .map(String::from),
    );
    let mut rows = vec![header];
    for result in results {
        let mut row = Vec::new();
        for field in &swept {
            row.push(result.config.field_value(field)?);
        }
        let r = &result.report;
        row.extend([
            r.seed.to_string(),
            format!("{:.2}", r.mean_n1),
            format!("{:.2}", r.mean_n2),
            format!("{:.4e}", r.urllc_loss_prob),
            format!("{:.4e}", r.embb_loss_prob),
            format!("{:.4e}", r.sample_variance),
            format!("{:.6}", r.jain_index),
            format!("{:.5}", r.social_payoff),
        ]);
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        writeln!(out, "{}", cells.join("  "))?;
    }
    Ok(())
}
