use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use ies_core::reform::BigM;
use ies_core::runner::{
    build, dump_lp, generate_scenario, load_scenario, prepare, run_all_modes, run_mode, save_scenario, sweep_k,
    verify, write_run, write_table, write_verify, GenProfile, RunOptions, SolutionReport, DEFAULT_K_LIST,
    VERIFY_TOL,
};
use ies_core::thermal::Mode;
use ies_core::CoreError;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_LIMIT: u8 = 3;
const EXIT_VERIFY_FAIL: u8 = 4;

#[derive(Parser)]
#[command(name = "ies", version, about = "Tiered pricing game for an integrated electric-thermal energy system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Price tiers per commodity; overrides the scenario.
    #[arg(long)]
    tiers: Option<usize>,
    /// Chords per side of the comfort curve and per fuel curve.
    #[arg(long, default_value_t = 8)]
    pwl_segments: usize,
    /// One Big-M constant for every complementarity pair.
    #[arg(long)]
    big_m: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    rel_gap: f64,
    /// Wall-clock limit per solve in seconds; results then depend on speed.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Branch-and-bound nodes per solve; 0 removes the limit.
    #[arg(long, default_value_t = 2500)]
    node_limit: usize,
    /// Also write the MILP as model.lp.
    #[arg(long)]
    dump_lp: bool,
    /// Accepted for symmetry with `gen`; solves are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            big_m: self.big_m.map_or(BigM::default(), BigM::Uniform),
            pwl_segments: self.pwl_segments,
            tiers: self.tiers,
            rel_gap: self.rel_gap,
            node_limit: (self.node_limit > 0).then_some(self.node_limit),
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// 24 hours, full fleet, three tiers.
    Day,
    /// A few hours, one CHP and one conventional unit.
    Tiny,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one mode.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(1..=5))]
        mode: u8,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve modes 1 to 5 and tabulate revenue and consumer cost.
    Modes {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Vary the residential share of reference heating.
    SweepK {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(1..=5))]
        mode: u8,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a synthetic scenario and its profiles.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Profile::Day)]
        profile: Profile,
        /// Hours; tiny profile only.
        #[arg(long, default_value_t = 2)]
        horizon: usize,
        #[arg(long)]
        tiers: Option<usize>,
        /// Clock hour of the first step; tiny profile only.
        #[arg(long, default_value_t = 7)]
        start_hour: usize,
    },
    /// Compare the MILP optimum with brute-force price enumeration.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(1..=5))]
        mode: u8,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Limit(_) | CoreError::Solver(_) | CoreError::Invariant(_) => EXIT_LIMIT,
        _ => EXIT_VALIDATION,
    }
}

fn mode_of(n: u8) -> Mode {
    Mode::try_from(n).expect("clap restricts modes to 1..=5")
}

fn print_report(r: &SolutionReport) {
    let c = &r.costs;
    println!(
        "mode {} {}: net_revenue {} revenue {} operating_cost {} energy_cost {} comfort_loss {} total_cost {}",
        r.mode.index(),
        r.status_label(),
        ies_core::runner::fmt_num(c.net_revenue),
        ies_core::runner::fmt_num(c.revenue),
        ies_core::runner::fmt_num(c.operating_cost),
        ies_core::runner::fmt_num(c.energy_cost),
        ies_core::runner::fmt_num(c.comfort_loss),
        ies_core::runner::fmt_num(c.total_cost),
    );
}

fn maybe_dump(dir: &Path, scenario: &ies_core::devices::Scenario, mode: Mode, solver: &SolverArgs) -> Result<(), CoreError> {
    if solver.dump_lp {
        let (_, _, p) = build(scenario, mode, &solver.options())?;
        dump_lp(dir, &p)?;
    }
    Ok(())
}

fn table_exit(reports: &[Result<SolutionReport, CoreError>]) -> u8 {
    let limited = reports.iter().any(|r| match r {
        Ok(rep) => !rep.is_final,
        Err(_) => true,
    });
    if limited {
        EXIT_LIMIT
    } else {
        0
    }
}

fn execute(command: Command) -> Result<u8, CoreError> {
    let started = Instant::now();
    let code = match command {
        Command::Run {
            scenario,
            mode,
            out,
            solver,
        } => {
            let s = load_scenario(&scenario)?;
            let mode = mode_of(mode);
            let r = run_mode(&s, mode, &solver.options())?;
            write_run(&out, &prepare(&s, &solver.options())?, &r)?;
            maybe_dump(&out, &s, mode, &solver)?;
            print_report(&r);
            if r.is_final {
                0
            } else {
                EXIT_LIMIT
            }
        }
        Command::Modes { scenario, out, solver } => {
            let s = load_scenario(&scenario)?;
            let opts = solver.options();
            let prepared = prepare(&s, &opts)?;
            let (table, reports) = run_all_modes(&s, &opts);
            write_table(&out, &prepared, &table, &reports, |row| format!("mode{}", row.key))?;
            for m in Mode::ALL {
                maybe_dump(&out.join(format!("mode{}", m.index())), &s, m, &solver)?;
            }
            print!("{}", table.to_csv());
            table_exit(&reports)
        }
        Command::SweepK {
            scenario,
            k_list,
            mode,
            out,
            solver,
        } => {
            let s = load_scenario(&scenario)?;
            let opts = solver.options();
            let prepared = prepare(&s, &opts)?;
            let ks = k_list.unwrap_or_else(|| DEFAULT_K_LIST.to_vec());
            let (table, reports) = sweep_k(&s, &ks, mode_of(mode), &opts)?;
            write_table(&out, &prepared, &table, &reports, |row| format!("k{}", row.key))?;
            print!("{}", table.to_csv());
            table_exit(&reports)
        }
        Command::Gen {
            seed,
            out,
            profile,
            horizon,
            tiers,
            start_hour,
        } => {
            if horizon < 2 {
                eprintln!("error: --horizon must be at least 2");
                return Ok(EXIT_USAGE);
            }
            let mut p = match profile {
                Profile::Day => GenProfile::day(),
                Profile::Tiny => GenProfile::tiny(horizon, 2, start_hour % 24),
            };
            if let Some(n) = tiers {
                p.tiers = n;
            }
            let s = generate_scenario(seed, &p);
            for path in save_scenario(&s, &out, "scenario.toml")? {
                println!("{}", path.display());
            }
            0
        }
        Command::Verify {
            scenario,
            mode,
            out,
            tol,
            solver,
        } => {
            let s = load_scenario(&scenario)?;
            let mode = mode_of(mode);
            let v = verify(&s, mode, &solver.options(), tol)?;
            write_verify(&out, &v)?;
            maybe_dump(&out, &s, mode, &solver)?;
            print!("{}", v.summary());
            if v.verdict.passed() {
                0
            } else {
                EXIT_VERIFY_FAIL
            }
        }
    };
    eprintln!("elapsed {:.1?}", started.elapsed());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
