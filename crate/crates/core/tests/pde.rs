mod common;

use approx::assert_relative_eq;
use common::*;
use heatgame::control::{masked_adjoint_norms, Control, Player};
use heatgame::pde::{first_eigenvalue, solve_adjoint, solve_forward, solve_linearized, ScalarField, SpaceTimeField};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn norm_rel(a: &ScalarField, b: &ScalarField) -> f64 {
    let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s: f64 = a.values().iter().map(|x| x * x).sum::<f64>().sqrt();
    d / s.max(f64::MIN_POSITIVE)
}

#[test]
fn forward_matches_dense_oracle() {
    let mut spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    spec.potential = SpaceTimeField {
        slices: (0..=spec.time.n_steps())
            .map(|_| random_field(&mut rng, spec.grid.n_interior()).scaled(4.0))
            .collect(),
    };
    spec.y0 = random_field(&mut rng, spec.grid.n_interior());
    let u1 = random_admissible(&spec, Player::One, &mut rng);
    let u2 = random_admissible(&spec, Player::Two, &mut rng);
    let y = solve_forward(&spec, &u1, &u2).unwrap();
    let want = dense_terminal(&spec, &spec.y0, |k| {
        DVector::from_vec(u1.slices[k].add(&u2.slices[k]).values().to_vec())
    });
    let got = DVector::from_vec(y.terminal().values().to_vec());
    assert!((got - &want).norm() <= 1e-12 * want.norm());
}

#[test]
fn superposition() {
    let mut spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    spec.y0 = random_field(&mut rng, spec.grid.n_interior());
    let u1 = random_admissible(&spec, Player::One, &mut rng);
    let u2 = random_admissible(&spec, Player::Two, &mut rng);
    let z1 = spec.zero_control(Player::One);
    let z2 = spec.zero_control(Player::Two);
    let t = |a: &Control, b: &Control| solve_forward(&spec, a, b).unwrap().terminal().clone();
    let base = t(&z1, &z2);
    let lhs = t(&u1, &u2).sub(&base);
    let rhs = t(&u1, &z2).sub(&base).add(&t(&z1, &u2).sub(&base));
    assert!(norm_rel(&lhs, &rhs) <= 1e-12);
}

#[test]
fn linearized_state_is_the_state_difference() {
    let mut spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    spec.y0 = random_field(&mut rng, spec.grid.n_interior());
    let u1 = random_admissible(&spec, Player::One, &mut rng);
    let u2 = random_admissible(&spec, Player::Two, &mut rng);
    let v = random_admissible(&spec, Player::One, &mut rng);

    let z = solve_linearized(&spec, &v, Player::One).unwrap();
    let moved = solve_forward(&spec, &u1.axpy(1.0, &v), &u2).unwrap();
    let base = solve_forward(&spec, &u1, &u2).unwrap();
    assert!(norm_rel(z.terminal(), &moved.terminal().sub(base.terminal())) <= 1e-12);

    let z2 = solve_linearized(&spec, &v.axpy(1.0, &v), Player::One).unwrap();
    assert_eq!(z2.terminal(), &z.terminal().scaled(2.0));

    let zero = solve_linearized(&spec, &spec.zero_control(Player::Two), Player::Two).unwrap();
    assert!(zero.slices.iter().all(|s| s.is_zero()));
}

#[test]
fn linearized_rejects_wrong_region() {
    let spec = default_spec();
    let v = spec.zero_control(Player::One);
    assert!(solve_linearized(&spec, &v, Player::Two).is_err());
}

#[test]
fn adjoint_eigen_decay() {
    let spec = default_spec();
    let terminal = sin_mode(&spec);
    let phi = solve_adjoint(&spec, &terminal).unwrap();
    let lam = first_eigenvalue(&spec);
    let dt = spec.time.dt();
    let n = spec.time.n_steps();
    for kk in 0..=n {
        let decay = (1.0 + dt * lam).powi(kk as i32);
        let want = terminal.scaled(1.0 / decay);
        assert!(norm_rel(&phi.slices[n - kk], &want) <= 1e-13, "K = {kk}");
    }
    let zero = solve_adjoint(&spec, &spec.grid.zeros()).unwrap();
    assert!(zero.slices.iter().all(|s| s.is_zero()));
}

#[test]
fn per_step_stability_for_nonnegative_potential() {
    let mut spec = with_constant_potential(&default_spec(), 1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    spec.y0 = random_field(&mut rng, spec.grid.n_interior()).scaled(3.0);
    let u1 = random_admissible(&spec, Player::One, &mut rng);
    let u2 = random_admissible(&spec, Player::Two, &mut rng);
    let y = solve_forward(&spec, &u1, &u2).unwrap();
    let dt = spec.time.dt();
    for k in 0..spec.time.n_steps() {
        let src = u1.slices[k].add(&u2.slices[k]);
        let lhs = spec.grid.norm(&y.slices[k + 1]).unwrap();
        let rhs = spec.grid.norm(&y.slices[k]).unwrap() + dt * spec.grid.norm(&src).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-14), "step {k}");
    }
}

#[test]
fn masked_adjoint_norms_on_eigenmode() {
    let spec = default_spec();
    let phi = solve_adjoint(&spec, &sin_mode(&spec)).unwrap();
    let norms = masked_adjoint_norms(&spec.grid, &phi, &spec.mask1);
    assert!(norms.iter().all(|&n| n > 0.0));
    assert_relative_eq!(
        norms[spec.time.n_steps() - 1],
        spec.grid.norm(&spec.mask1.apply(&phi.slices[spec.time.n_steps() - 1])).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// `<z_N, p>_h = dt * sum_k <chi v_k, p_k>_h` for arbitrary data and potential.
    #[test]
    fn duality_identity(seed in any::<u64>(), a in -2.0f64..5.0) {
        let spec = with_constant_potential(&default_spec(), a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_admissible(&spec, Player::Two, &mut rng);
        let terminal = random_field(&mut rng, spec.grid.n_interior());
        let z = solve_linearized(&spec, &v, Player::Two).unwrap();
        let phi = solve_adjoint(&spec, &terminal).unwrap();
        let lhs = spec.grid.inner(z.terminal(), &terminal).unwrap();
        let rhs: f64 = spec.time.dt()
            * (0..spec.time.n_steps())
                .map(|k| spec.grid.inner(&spec.mask2.apply(&v.slices[k]), &phi.slices[k]).unwrap())
                .sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }
}
