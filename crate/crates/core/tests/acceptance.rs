//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use heatgame::analysis::{verify_bang_bang, Verdict, DEFAULT_SAT_THRESHOLD};
use heatgame::best_response::*;
use heatgame::cli::{max_relative_error, run_command, EXIT_OK};
use heatgame::config::{FieldSource, RunConfig};
use heatgame::control::{bang_bang_from_adjoint, Control, GameSpec, Player};
use heatgame::nash::*;
use heatgame::pde::{first_eigenvalue, solve_adjoint, solve_forward, solve_linearized, ScalarField, SpaceTimeField};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zeros(spec: &GameSpec) -> (Control, Control) {
    (spec.zero_control(Player::One), spec.zero_control(Player::Two))
}

fn sin_run(n_interior: usize, n_steps: usize) -> RunConfig {
    RunConfig {
        n_interior,
        n_steps,
        y0: FieldSource::Preset("sin1".into()),
        ..RunConfig::default_1d()
    }
}

fn scheme_convergence() -> Outcome {
    let spec = spec_of(&sin_run(49, 50));
    let (z1, z2) = zeros(&spec);
    let y = solve_forward(&spec, &z1, &z2).unwrap();
    let decay = (1.0 + spec.time.dt() * first_eigenvalue(&spec)).powi(-(spec.time.n_steps() as i32));
    let want = sin_mode(&spec).scaled(decay);
    let discrete = want.sub(y.terminal()).values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
        / want.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut errors = Vec::new();
    for n_steps in [50, 100, 200, 400, 800] {
        let spec = spec_of(&sin_run(999, n_steps));
        let (z1, z2) = zeros(&spec);
        let y = solve_forward(&spec, &z1, &z2).unwrap();
        let exact = sin_mode(&spec).scaled((-PI * PI * spec.time.horizon()).exp());
        errors.push(spec.grid.norm(&y.terminal().sub(&exact)).unwrap());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let halving = ratios.iter().all(|r| (r - 2.0).abs() <= 0.4);
    check(
        discrete <= 1e-12 && halving,
        format!("eigen-decay rel err {discrete:.2e}; error ratios {ratios:.3?}"),
    )
}

fn adjoint_exactness() -> Outcome {
    let spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = spec.grid.n_interior();
    let dt = spec.time.dt();
    let (mut worst, mut worst_shifted) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let p = if i % 2 == 0 { Player::One } else { Player::Two };
        let v = random_admissible(&spec, p, &mut rng);
        let terminal = random_field(&mut rng, n);
        let z = solve_linearized(&spec, &v, p).unwrap();
        let phi = solve_adjoint(&spec, &terminal).unwrap();
        let lhs = spec.grid.inner(z.terminal(), &terminal).unwrap();
        let pair = |shift: usize| -> f64 {
            dt * (0..spec.time.n_steps())
                .map(|k| spec.grid.inner(&v.slices[k], &phi.slices[k + shift]).unwrap())
                .sum::<f64>()
        };
        worst = worst.max(rel_err(lhs, pair(0)));
        worst_shifted = worst_shifted.max(rel_err(lhs, pair(1)));
    }
    check(
        worst <= 1e-12,
        format!("max rel err {worst:.2e} pairing v_k with p_k (pairing with p_(k+1): {worst_shifted:.2e})"),
    )
}

fn gradient_correctness() -> Outcome {
    let base = default_spec();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in [base.clone(), with_constant_potential(&base, 2.0)] {
        let u1 = random_admissible(&spec, Player::One, &mut rng);
        let u2 = random_admissible(&spec, Player::Two, &mut rng);
        for p in [Player::One, Player::Two] {
            let g = gradient(&spec, p, &u1, &u2).unwrap();
            let fd = finite_difference_gradient(&spec, p, &u1, &u2, 1e-5).unwrap();
            worst = worst.max(max_relative_error(&g, &fd));
        }
    }
    check(worst <= 1e-6, format!("max rel err {worst:.2e} (a = 0 and a = 2, both players)"))
}

fn tiny_run(n_steps: usize, cap: f64) -> RunConfig {
    RunConfig {
        n_interior: 5,
        n_steps,
        horizon: 0.1 * n_steps as f64,
        omega1: (0.3, 0.4),
        omega2: (0.6, 0.7),
        cap1: cap,
        y0: FieldSource::Preset("gauss:0.5,0.3".into()),
        ..RunConfig::default_1d()
    }
}

fn best_response_optimality() -> Outcome {
    let tight = BestResponseOptions {
        vi_tol: 1e-18,
        max_iters: 5000,
        ..Default::default()
    };
    // (a) one masked node, one step
    let mut scalar_err = 0.0f64;
    for cap in [0.05, 0.5, 50.0] {
        let spec = spec_of(&tiny_run(1, cap));
        let other = spec.zero_control(Player::Two);
        let (c, cols) = dense_control_map(&spec, Player::One, &other);
        let b = &cols[0];
        let y1 = DVector::from_vec(spec.y1.values().to_vec());
        let bound = cap / spec.grid.h().sqrt();
        let want = (b.dot(&(&y1 - &c)) / b.dot(b)).clamp(-bound, bound);
        let out = solve_best_response(&spec, Player::One, &other, &tight).unwrap();
        let j = spec.mask1.indices().next().unwrap();
        scalar_err = scalar_err.max((out.control.slices[0].values()[j] - want).abs());
    }

    // (b) one masked node, two steps, exhaustive search
    let mut spec = spec_of(&tiny_run(2, 0.3));
    spec.potential = SpaceTimeField {
        slices: (0..=2).map(|k| spec.grid.sample(|x| 1.0 + x * k as f64)).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let other = random_admissible(&spec, Player::Two, &mut rng);
    let (c, cols) = dense_control_map(&spec, Player::One, &other);
    let h = spec.grid.h();
    let bound = spec.cap1 / h.sqrt();
    // reachable only with the second value beyond the box: one free, one clamped
    spec.y1 = ScalarField((&c + &cols[0] * (-0.8 * bound) + &cols[1] * (1.3 * bound)).as_slice().to_vec());
    let out = solve_best_response(&spec, Player::One, &other, &BestResponseOptions::default()).unwrap();
    let r = &c - DVector::from_vec(spec.y1.values().to_vec());
    let n = 2000;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let ra = &r + &cols[0] * (-bound + 2.0 * bound * i as f64 / n as f64);
        for k in 0..=n {
            let e = &ra + &cols[1] * (-bound + 2.0 * bound * k as f64 / n as f64);
            best = best.min((h * e.norm_squared()).sqrt());
        }
    }
    let grid_gap = (out.objective - best).abs();

    // (c) maximum condition on non-degenerate slices
    let mut bb_gap = 0.0f64;
    let mut mirror = spec_of(&RunConfig::mirror_1d());
    mirror.potential = SpaceTimeField::constant(&mirror.grid, &mirror.time, 1.0);
    for spec in [default_spec(), mirror] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [Player::One, Player::Two] {
            let other = random_admissible(&spec, p.other(), &mut rng);
            let out = solve_best_response(&spec, p, &other, &tight).unwrap();
            let (u1, u2) = match p {
                Player::One => (&out.control, &other),
                Player::Two => (&other, &out.control),
            };
            let phi = player_adjoint(&spec, p, u1, u2).unwrap();
            let bb = bang_bang_from_adjoint(&spec.grid, &phi, spec.mask(p), spec.cap(p)).unwrap();
            for k in (0..spec.time.n_steps()).filter(|k| !bb.degenerate.contains(k)) {
                let d = out.control.slices[k].sub(&bb.control.slices[k]);
                bb_gap = bb_gap.max(d.values().iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
    }
    check(
        scalar_err <= 1e-8 && grid_gap <= 1e-4 && bb_gap <= 1e-6,
        format!("(a) {scalar_err:.2e}; (b) objective gap {grid_gap:.2e}; (c) per-node gap {bb_gap:.2e}"),
    )
}

fn convexity() -> Outcome {
    let spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    for i in 0..100 {
        let p = if i % 2 == 0 { Player::One } else { Player::Two };
        let fixed = random_admissible(&spec, p.other(), &mut rng);
        let a = random_admissible(&spec, p, &mut rng);
        let b = random_admissible(&spec, p, &mut rng);
        let lam: f64 = rng.gen_range(0.0..1.0);
        let j = |own: &Control| match p {
            Player::One => objective(&spec, p, own, &fixed).unwrap(),
            Player::Two => objective(&spec, p, &fixed, own).unwrap(),
        };
        let slack = lam * j(&a) + (1.0 - lam) * j(&b) - j(&b.blend(lam, &a));
        worst = worst.min(slack);
    }
    check(worst >= -1e-12, format!("min slack {worst:.2e} over 100 tuples"))
}

fn nash_engine() -> Outcome {
    let spec = default_spec();
    let r = solve_nash(&spec, &NashOptions::default()).unwrap();
    let cert = check_equilibrium(&spec, &r.u1, &r.u2, 1e-5, 64, 0).unwrap();
    let mut run = RunConfig::default_1d();
    run.cap1 = 0.0;
    run.cap2 = 0.0;
    let zspec = spec_of(&run);
    let z = solve_nash(&zspec, &NashOptions::default()).unwrap();
    let zero_pair = z.u1.slices.iter().chain(&z.u2.slices).all(|s| s.is_zero());
    check(
        r.converged && r.max_vi() <= 1e-6 && r.rounds <= 200 && cert.pass() && z.converged && z.rounds == 1 && zero_pair,
        format!(
            "default-1d: {} round(s), vi ({:.1e}, {:.1e}), certificate {}; zero caps: {} round(s), zero pair {}",
            r.rounds,
            r.vi1,
            r.vi2,
            if cert.pass() { "pass" } else { "fail" },
            z.rounds,
            zero_pair
        ),
    )
}

fn dichotomy() -> Outcome {
    let mut converged = 0;
    let mut skipped = 0;
    let mut neither = Vec::new();
    let mut verdicts = BTreeMap::new();
    for (i, run) in family(2024, 14).iter().enumerate() {
        let spec = spec_of(run);
        assert!(!spec.targets_coincide());
        let r = solve_nash(&spec, &run.nash_options()).unwrap();
        if !r.converged {
            skipped += 1;
            continue;
        }
        converged += 1;
        let rep = verify_bang_bang(&spec, &r, 1e-3, DEFAULT_SAT_THRESHOLD).unwrap();
        *verdicts.entry(format!("{:?}", rep.verdict)).or_insert(0) += 1;
        if rep.verdict == Verdict::Neither {
            neither.push(i);
        }
    }
    check(
        converged >= 10 && neither.is_empty(),
        format!("{converged} converged ({skipped} not), verdicts {verdicts:?}, neither at {neither:?}"),
    )
}

fn reflect_gap(u1: &Control, u2: &Control) -> f64 {
    u1.slices
        .iter()
        .zip(&u2.slices)
        .flat_map(|(a, b)| {
            let r: ScalarField = reflect(a);
            r.0.into_iter().zip(b.values().to_vec()).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

fn symmetry() -> Outcome {
    let run = RunConfig::mirror_1d();
    let spec = spec_of(&run);
    let mut opts = run.nash_options();
    opts.mode = NashMode::Jacobi;
    // tiny tolerance so that several rounds run
    opts.nash_tol = 1e-14;
    opts.max_rounds = 10;
    let mut gaps = Vec::new();
    solve_nash_observed(&spec, &opts, |_, u1, u2| gaps.push(reflect_gap(u1, u2))).unwrap();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    check(
        !gaps.is_empty() && worst <= 1e-9,
        format!("max reflection gap {worst:.2e} over {} rounds", gaps.len()),
    )
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let digest = Sha256::digest(fs::read(&path).unwrap());
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, digest.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for rep in 0..2 {
        let root = tmp.path().join(format!("run{rep}"));
        let s = |p: &Path| p.to_str().unwrap().to_string();
        let cfg = root.join("config.json");
        let commands: Vec<Vec<String>> = vec![
            vec!["demo".into(), "--name".into(), "mirror-1d".into(), "--out".into(), s(&root)],
            vec!["nash".into(), "--config".into(), s(&cfg), "--out".into(), s(&root.join("nash")), "--seed".into(), "11".into()],
            vec!["verify".into(), "--config".into(), s(&cfg), "--controls".into(), s(&root.join("nash")), "--seed".into(), "11".into()],
            vec![
                "gradient-check".into(),
                "--config".into(),
                s(&cfg),
                "--player".into(),
                "2".into(),
                "--out".into(),
                s(&root.join("gc")),
                "--seed".into(),
                "11".into(),
            ],
        ];
        for c in commands {
            let code = run_command(std::iter::once("heatgame".to_string()).chain(c.iter().cloned()));
            if code != EXIT_OK {
                return Err(format!("{c:?} exited {code}"));
            }
        }
        hashes.push(hash_dir(&root));
    }
    check(
        hashes[0] == hashes[1] && hashes[0].len() >= 8,
        format!("{} output files hashed, identical across runs: {}", hashes[0].len(), hashes[0] == hashes[1]),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("scheme convergence", Duration::from_secs(1), scheme_convergence),
        ("adjoint exactness", Duration::from_secs(1), adjoint_exactness),
        ("gradient correctness", Duration::from_secs(10), gradient_correctness),
        ("best-response optimality", Duration::from_secs(30), best_response_optimality),
        ("convexity", Duration::from_secs(60), convexity),
        ("nash engine", Duration::from_secs(300), nash_engine),
        ("bang-bang dichotomy", Duration::from_secs(900), dichotomy),
        ("mirror symmetry", Duration::from_secs(60), symmetry),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit:?} budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {}: {name} [{:.2} s] {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
