#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heatgame::config::{FieldSource, PotentialSource, RunConfig};
use heatgame::control::{project_admissible, Control, GameSpec, Player};
use heatgame::pde::{ScalarField, SpaceTimeField};

pub fn default_spec() -> GameSpec {
    RunConfig::default_1d().build(Path::new(".")).unwrap().spec
}

pub fn spec_of(run: &RunConfig) -> GameSpec {
    run.build(Path::new(".")).unwrap().spec
}

/// Dense `I + dt (A_h + diag(a_k))`, assembled independently of the solver.
pub fn dense_step(spec: &GameSpec, k: usize) -> DMatrix<f64> {
    let n = spec.grid.n_interior();
    let h = spec.grid.h();
    let dt = spec.time.dt();
    DMatrix::from_fn(n, n, |i, j| {
        let lap = if i == j {
            2.0 / (h * h)
        } else if i.abs_diff(j) == 1 {
            -1.0 / (h * h)
        } else {
            0.0
        };
        let pot = if i == j { spec.potential.slices[k].values()[i] } else { 0.0 };
        (if i == j { 1.0 } else { 0.0 }) + dt * (lap + pot)
    })
}

/// Terminal state by dense LU solves; `source(k)` is the full nodal source on slice k.
pub fn dense_terminal(spec: &GameSpec, y0: &ScalarField, source: impl Fn(usize) -> DVector<f64>) -> DVector<f64> {
    let dt = spec.time.dt();
    let mut y = DVector::from_vec(y0.values().to_vec());
    for k in 0..spec.time.n_steps() {
        let rhs = &y + source(k) * dt;
        y = dense_step(spec, k + 1).lu().solve(&rhs).unwrap();
    }
    y
}

/// Affine map `u -> y(T)` restricted to player `p`'s masked nodes, with the
/// opponent fixed: returns `(offset, columns)` where column `(k, node)` is the
/// response to a unit value at that node on slice k.
pub fn dense_control_map(spec: &GameSpec, p: Player, other: &Control) -> (DVector<f64>, Vec<DVector<f64>>) {
    let n = spec.grid.n_interior();
    let other_src = |k: usize| DVector::from_vec(other.slices[k].values().to_vec());
    let offset = dense_terminal(spec, &spec.y0, other_src);
    let zero_y0 = ScalarField(vec![0.0; n]);
    let mut cols = Vec::new();
    for k0 in 0..spec.time.n_steps() {
        for j in spec.mask(p).indices() {
            let col = dense_terminal(spec, &zero_y0, |k| {
                let mut v = DVector::zeros(n);
                if k == k0 {
                    v[j] = 1.0;
                }
                v
            });
            cols.push(col);
        }
    }
    (offset, cols)
}

pub fn reflect(f: &ScalarField) -> ScalarField {
    ScalarField(f.values().iter().rev().copied().collect())
}

pub fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    ScalarField((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Seeded admissible control whose slice norms are spread over `[0, cap]`.
pub fn random_admissible(spec: &GameSpec, p: Player, rng: &mut ChaCha8Rng) -> Control {
    let mut u = spec.zero_control(p);
    for s in &mut u.slices {
        for j in spec.mask(p).indices() {
            s.values_mut()[j] = rng.gen_range(-1.0..1.0);
        }
        let n = spec.grid.norm(s).unwrap();
        let target = spec.cap(p) * rng.gen_range(0.0..1.0);
        if n > 0.0 {
            *s = s.scaled(target / n);
        }
    }
    project_admissible(&spec.grid, &u).unwrap()
}

/// Instance symmetric under `x -> 1 - x` with the players exchanged.
pub fn mirror_run(cap: f64) -> RunConfig {
    let mut run = RunConfig::mirror_1d();
    run.cap1 = cap;
    run.cap2 = cap;
    run
}

/// Seeded family of instances with distinct targets for the saturation study.
pub fn family(seed: u64, count: usize) -> Vec<RunConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n_interior = rng.gen_range(25..50);
            let l1 = rng.gen_range(0.02..0.2);
            let r1 = l1 + rng.gen_range(0.1..0.3);
            let l2 = rng.gen_range(0.55..0.7);
            let r2 = l2 + rng.gen_range(0.1..0.28);
            let c1: f64 = rng.gen_range(0.2..0.8);
            let c2 = (c1 + rng.gen_range(0.1..0.5)).min(0.95);
            let cap = 10f64.powf(rng.gen_range(-0.5..1.3));
            let y0 = match rng.gen_range(0..3) {
                0 => FieldSource::Preset("zero".into()),
                1 => FieldSource::Preset("sin1".into()),
                _ => FieldSource::Preset(format!("gauss:{},{}", rng.gen_range(0.3..0.7), rng.gen_range(0.05..0.3))),
            };
            RunConfig {
                domain_length: 1.0,
                n_interior,
                horizon: rng.gen_range(0.2..1.0),
                n_steps: rng.gen_range(15..40),
                potential: PotentialSource::Constant(rng.gen_range(0.0..3.0)),
                omega1: (l1, r1),
                omega2: (l2, r2.min(0.98)),
                cap1: cap * rng.gen_range(0.5..2.0),
                cap2: cap * rng.gen_range(0.5..2.0),
                y0,
                y1: FieldSource::Preset(format!("gauss:{c1},{}", rng.gen_range(0.08..0.3))),
                y2: FieldSource::Preset(format!("gauss:{c2},{}", rng.gen_range(0.08..0.3))),
                ..RunConfig::default_1d()
            }
        })
        .collect()
}

pub fn sin_mode(spec: &GameSpec) -> ScalarField {
    spec.grid.sample(|x| (PI * x / spec.grid.length()).sin())
}

pub fn with_constant_potential(spec: &GameSpec, a: f64) -> GameSpec {
    let mut s = spec.clone();
    s.potential = SpaceTimeField::constant(&s.grid, &s.time, a);
    s
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
