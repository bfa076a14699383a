//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 configuration or usage error, 3 `nash` did not converge, 4 a check
//! (`verify`, `gradient-check`) failed.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::analysis::{export_report, verify_bang_bang, write_file, Summary, DEFAULT_SAT_THRESHOLD};
use crate::best_response::{finite_difference_gradient, gradient, solve_best_response};
use crate::config::{parse_config, ParsedConfig, RunConfig};
use crate::control::{project_admissible, read_control_csv, write_control_csv, Control, GameSpec, Player, DEFAULT_SAT_TOL};
use crate::error::Error;
use crate::nash::{check_equilibrium, solve_nash, NashMode};
use crate::pde::solve_forward;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Gradient-check pass threshold on `max|g - g_fd| / max|g|`.
pub const GRADIENT_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "heatgame", version, about = "Nash equilibria of the controlled heat equation game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the state equation and write the trajectory.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory holding u1.csv and u2.csv; zero controls when omitted.
        #[arg(long)]
        controls: Option<PathBuf>,
    },
    /// Compare the adjoint gradient with central finite differences at a
    /// seeded random admissible pair.
    GradientCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_player)]
        player: Player,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Best response of one player against the other's zero control.
    BestResponse {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_player)]
        player: Player,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterated best response; writes controls and reports.
    Nash {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        relax: Option<f64>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certify u1.csv/u2.csv from a controls directory as an equilibrium.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        controls: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 64)]
        probes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory; defaults to `<controls>/verify`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a named instance's configuration (`default-1d`, `mirror-1d`).
    Demo {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_player(s: &str) -> Result<Player, String> {
    s.parse::<u8>()
        .ok()
        .and_then(Player::from_index)
        .ok_or_else(|| format!("player must be 1 or 2, got {s:?}"))
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn load(config: &Path) -> crate::Result<ParsedConfig> {
    let parsed = parse_config(config)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed)
}

fn mkdir(dir: &Path) -> crate::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_config_echo(run: &RunConfig, dir: &Path) -> crate::Result<()> {
    let path = dir.join("config.json");
    fs::write(&path, run.to_json()).map_err(|e| Error::Io { path, source: e })
}

fn write_control(spec: &GameSpec, u: &Control, path: &Path) -> crate::Result<()> {
    write_file(path, |w| write_control_csv(w, &spec.time, u))
}

fn read_control(spec: &GameSpec, p: Player, path: &Path) -> crate::Result<Control> {
    let f = fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_control_csv(BufReader::new(f), &spec.grid, &spec.time, spec.mask(p), spec.cap(p)).map_err(|msg| Error::Parse {
        path: path.to_path_buf(),
        msg,
    })
}

fn dispatch(cmd: Command) -> crate::Result<i32> {
    match cmd {
        Command::Forward { config, out, controls } => forward(&config, &out, controls.as_deref()),
        Command::GradientCheck {
            config,
            player,
            eps,
            out,
            seed,
        } => gradient_check(&config, player, eps, &out, seed),
        Command::BestResponse { config, player, out } => best_response(&config, player, &out),
        Command::Nash {
            config,
            out,
            mode,
            relax,
            max_rounds,
            tol,
            seed,
        } => {
            let mut cfg = load(&config)?;
            if let Some(m) = mode {
                cfg.run.nash.mode = match m {
                    ModeArg::GaussSeidel => NashMode::GaussSeidel,
                    ModeArg::Jacobi => NashMode::Jacobi,
                };
            }
            if let Some(r) = relax {
                cfg.run.nash.relax = r;
            }
            if let Some(n) = max_rounds {
                cfg.run.nash.max_rounds = n;
            }
            if let Some(t) = tol {
                cfg.run.nash.nash_tol = t;
            }
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            let errs = cfg.run.nash_options().violations();
            if !errs.is_empty() {
                return Err(Error::Config(errs));
            }
            cfg.nash = cfg.run.nash_options();
            nash(&cfg, &out)
        }
        Command::Verify {
            config,
            controls,
            tol,
            probes,
            seed,
            out,
        } => {
            let out = out.unwrap_or_else(|| controls.join("verify"));
            verify(&config, &controls, tol, probes, seed, &out)
        }
        Command::Demo { name, out } => {
            let Some(run) = RunConfig::named(&name) else {
                return Err(Error::config(format!("unknown demo {name:?} (available: default-1d, mirror-1d)")));
            };
            mkdir(&out)?;
            write_config_echo(&run, &out)?;
            let mut summary = Summary::new("demo", run.seed, run.to_value());
            summary.extra.insert("name".into(), json!(name));
            summary.write(&out)?;
            println!("wrote {}", out.join("config.json").display());
            Ok(EXIT_OK)
        }
    }
}

fn forward(config: &Path, out: &Path, controls: Option<&Path>) -> crate::Result<i32> {
    let cfg = load(config)?;
    let spec = &cfg.spec;
    let (u1, u2) = match controls {
        Some(dir) => (
            read_control(spec, Player::One, &dir.join("u1.csv"))?,
            read_control(spec, Player::Two, &dir.join("u2.csv"))?,
        ),
        None => (spec.zero_control(Player::One), spec.zero_control(Player::Two)),
    };
    let y = solve_forward(spec, &u1, &u2)?;
    mkdir(out)?;
    write_config_echo(&cfg.run, out)?;
    write_file(&out.join("state.csv"), |w| {
        use std::io::Write;
        writeln!(w, "k,t,node_index,value")?;
        for (k, s) in y.slices.iter().enumerate() {
            for (j, v) in s.values().iter().enumerate() {
                writeln!(w, "{},{},{},{}", k, spec.time.t(k), j + 1, v)?;
            }
        }
        Ok(())
    })?;
    let yt = y.terminal();
    let j1 = spec.grid.norm_unchecked(yt.sub(&spec.y1).values());
    let j2 = spec.grid.norm_unchecked(yt.sub(&spec.y2).values());
    let mut summary = Summary::new("forward", cfg.run.seed, cfg.run.to_value());
    summary.extra.insert("J1".into(), json!(j1));
    summary.extra.insert("J2".into(), json!(j2));
    summary.extra.insert("terminal_norm".into(), json!(spec.grid.norm_unchecked(yt.values())));
    summary.write(out)?;
    println!("J1 = {j1}\nJ2 = {j2}");
    Ok(EXIT_OK)
}

/// Seeded admissible control: uniform noise on the region scaled to the cap, projected.
pub fn random_admissible(spec: &GameSpec, p: Player, rng: &mut ChaCha8Rng) -> Control {
    let mut u = spec.zero_control(p);
    let mask = spec.mask(p);
    let width = (mask.count() as f64 * spec.grid.h()).sqrt();
    let amp = spec.cap(p) / width;
    for s in &mut u.slices {
        for j in mask.indices() {
            s.values_mut()[j] = amp * rng.gen_range(-1.0..1.0);
        }
    }
    project_admissible(&spec.grid, &u).expect("caps validated")
}

/// `max|g - g_fd| / max|g|` over all entries.
pub fn max_relative_error(g: &Control, fd: &Control) -> f64 {
    let scale = g
        .slices
        .iter()
        .flat_map(|s| s.values())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = g.max_abs_diff(fd);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_check(config: &Path, player: Player, eps: f64, out: &Path, seed: Option<u64>) -> crate::Result<i32> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    let spec = &cfg.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let u1 = random_admissible(spec, Player::One, &mut rng);
    let u2 = random_admissible(spec, Player::Two, &mut rng);
    let g = gradient(spec, player, &u1, &u2)?;
    let fd = finite_difference_gradient(spec, player, &u1, &u2, eps)?;
    let err = max_relative_error(&g, &fd);
    let pass = err <= GRADIENT_CHECK_TOL;
    mkdir(out)?;
    let mut summary = Summary::new("gradient-check", cfg.run.seed, cfg.run.to_value());
    summary.extra.insert("player".into(), json!(player.index()));
    summary.extra.insert("eps".into(), json!(eps));
    summary.extra.insert("max_relative_error".into(), json!(err));
    summary.extra.insert("pass".into(), json!(pass));
    summary.write(out)?;
    println!("max relative error = {err:e} ({})", if pass { "pass" } else { "FAIL" });
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn best_response(config: &Path, player: Player, out: &Path) -> crate::Result<i32> {
    let cfg = load(config)?;
    let spec = &cfg.spec;
    let other = spec.zero_control(player.other());
    let res = solve_best_response(spec, player, &other, &cfg.br)?;
    mkdir(out)?;
    write_config_echo(&cfg.run, out)?;
    write_control(spec, &res.control, &out.join(format!("u{}.csv", player.index())))?;
    let mut summary = Summary::new("best-response", cfg.run.seed, cfg.run.to_value());
    for (k, v) in [
        ("player", json!(player.index())),
        ("objective", json!(res.objective)),
        ("vi_residual", json!(res.vi_residual)),
        ("iters", json!(res.iters)),
        ("converged", json!(res.converged)),
    ] {
        summary.extra.insert(k.into(), v);
    }
    summary.write(out)?;
    println!(
        "{player}: J = {} vi = {:e} iters = {} converged = {}",
        res.objective, res.vi_residual, res.iters, res.converged
    );
    Ok(EXIT_OK)
}

fn nash(cfg: &ParsedConfig, out: &Path) -> crate::Result<i32> {
    let spec = &cfg.spec;
    let result = solve_nash(spec, &cfg.nash)?;
    let report = verify_bang_bang(spec, &result, DEFAULT_SAT_TOL, DEFAULT_SAT_THRESHOLD)?;
    mkdir(out)?;
    write_config_echo(&cfg.run, out)?;
    write_control(spec, &result.u1, &out.join("u1.csv"))?;
    write_control(spec, &result.u2, &out.join("u2.csv"))?;
    let summary = Summary::new("nash", cfg.run.seed, cfg.run.to_value());
    export_report(spec, &result, &report, summary, out)?;
    println!(
        "rounds = {} converged = {} vi1 = {:e} vi2 = {:e} J1 = {} J2 = {} verdict = {:?}",
        result.rounds, result.converged, result.vi1, result.vi2, result.j1, result.j2, report.verdict
    );
    Ok(if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn verify(config: &Path, controls: &Path, tol: f64, probes: usize, seed: Option<u64>, out: &Path) -> crate::Result<i32> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if !(tol > 0.0) {
        return Err(Error::config(format!("--tol {tol}: must be > 0")));
    }
    let spec = &cfg.spec;
    let u1 = read_control(spec, Player::One, &controls.join("u1.csv"))?;
    let u2 = read_control(spec, Player::Two, &controls.join("u2.csv"))?;
    let cert = check_equilibrium(spec, &u1, &u2, tol, probes, cfg.run.seed)?;
    mkdir(out)?;
    let mut summary = Summary::new("verify", cfg.run.seed, cfg.run.to_value());
    summary.extra.insert("certificate".into(), serde_json::to_value(&cert).expect("serializable"));
    summary.extra.insert("pass".into(), json!(cert.pass()));
    summary.write(out)?;
    println!(
        "first-order: vi1 = {:e} vi2 = {:e} ({}); probes: {} violations ({})",
        cert.vi1,
        cert.vi2,
        if cert.first_order_pass { "pass" } else { "FAIL" },
        cert.violations.len(),
        if cert.probe_pass { "pass" } else { "FAIL" }
    );
    Ok(if cert.pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
}
