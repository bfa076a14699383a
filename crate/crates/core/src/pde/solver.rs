//! Implicit Euler marching for `y_t - y_xx + a y = chi_1 u_1 + chi_2 u_2`
//! and its discrete transpose.
//!
//! Every step solves `(I + dt (A_h + diag(a_{k+1}))) y_{k+1} = y_k + dt f_k`
//! where `A_h` is the 3-point Dirichlet matrix for `-d²/dx²` and `f_k` is the
//! control source on `[t_k, t_{k+1})`. The adjoint marches backwards with the
//! same (symmetric) matrices, so
//! `<z_N, p_N>_h = dt * sum_k <f_k, p_k>_h` holds to round-off.

use super::grid::{ScalarField, SpaceTimeField, Trajectory};
use super::tridiag::SymTridiag;
use crate::control::{Control, GameSpec, Player};
use crate::error::{Error, Result};

fn step_matrix(spec: &GameSpec, k_new: usize) -> SymTridiag {
    let h = spec.grid.h();
    let dt = spec.time.dt();
    let r = dt / (h * h);
    let a = spec.potential.slices[k_new].values();
    SymTridiag {
        diag: a.iter().map(|&aj| 1.0 + 2.0 * r + dt * aj).collect(),
        off: -r,
    }
}

/// Forward march from `init`; `source(k, buf)` adds `f_k` into `buf`.
fn march_forward<F>(spec: &GameSpec, init: &ScalarField, mut source: F) -> Result<Trajectory>
where
    F: FnMut(usize, &mut [f64]),
{
    let n_steps = spec.time.n_steps();
    let dt = spec.time.dt();
    let n = spec.grid.n_interior();
    let mut slices = Vec::with_capacity(n_steps + 1);
    slices.push(init.clone());
    let mut scratch = Vec::with_capacity(n);
    let mut f = vec![0.0; n];
    for k in 0..n_steps {
        f.iter_mut().for_each(|v| *v = 0.0);
        source(k, &mut f);
        let mut rhs: Vec<f64> = slices[k]
            .values()
            .iter()
            .zip(&f)
            .map(|(y, s)| y + dt * s)
            .collect();
        step_matrix(spec, k + 1)
            .solve_in_place(&mut rhs, &mut scratch)
            .map_err(|row| Error::LinearSolve { step: k + 1, row })?;
        slices.push(ScalarField(rhs));
    }
    Ok(SpaceTimeField { slices })
}

fn add_masked(buf: &mut [f64], u: &Control, k: usize) {
    let slice = u.slices[k].values();
    for j in u.mask.indices() {
        buf[j] += slice[j];
    }
}

/// State trajectory `y(.; u1, u2)` starting from `spec.y0`.
pub fn solve_forward(spec: &GameSpec, u1: &Control, u2: &Control) -> Result<Trajectory> {
    spec.check_control(u1, Player::One)?;
    spec.check_control(u2, Player::Two)?;
    march_forward(spec, &spec.y0, |k, buf| {
        add_masked(buf, u1, k);
        add_masked(buf, u2, k);
    })
}

/// Linearized state `z` driven by `chi_which * v` from zero initial data.
pub fn solve_linearized(spec: &GameSpec, v: &Control, which: Player) -> Result<Trajectory> {
    spec.check_control(v, which)?;
    let zero = spec.grid.zeros();
    march_forward(spec, &zero, |k, buf| add_masked(buf, v, k))
}

/// Adjoint trajectory with `p(T) = terminal`, marching backwards with the
/// transposed step matrices.
pub fn solve_adjoint(spec: &GameSpec, terminal: &ScalarField) -> Result<Trajectory> {
    spec.grid.check(terminal, "adjoint terminal value")?;
    let n_steps = spec.time.n_steps();
    let mut slices = vec![ScalarField::default(); n_steps + 1];
    slices[n_steps] = terminal.clone();
    let mut scratch = Vec::with_capacity(spec.grid.n_interior());
    for k in (0..n_steps).rev() {
        let mut rhs = slices[k + 1].0.clone();
        step_matrix(spec, k + 1)
            .solve_in_place(&mut rhs, &mut scratch)
            .map_err(|row| Error::LinearSolve { step: k + 1, row })?;
        slices[k] = ScalarField(rhs);
    }
    Ok(SpaceTimeField { slices })
}

/// Smallest eigenvalue of `A_h` on `(0, length)`:
/// `(2 / h²)(1 - cos(pi h / length))`, with eigenvector `sin(pi x / length)`.
pub fn first_eigenvalue(spec: &GameSpec) -> f64 {
    let h = spec.grid.h();
    let theta = std::f64::consts::PI * h / spec.grid.length();
    2.0 / (h * h) * (1.0 - theta.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::test_support::tiny_spec;
    use std::f64::consts::PI;

    #[test]
    fn zero_data_gives_zero_state() {
        let mut spec = tiny_spec(9, 4);
        spec.y0 = spec.grid.zeros();
        let y = solve_forward(&spec, &spec.zero_control(Player::One), &spec.zero_control(Player::Two)).unwrap();
        assert!(y.slices.iter().all(|s| s.is_zero()));
    }

    #[test]
    fn eigenmode_decays_exactly() {
        let mut spec = tiny_spec(19, 7);
        spec.y0 = spec.grid.sample(|x| (PI * x).sin());
        let y = solve_forward(&spec, &spec.zero_control(Player::One), &spec.zero_control(Player::Two)).unwrap();
        let lam = first_eigenvalue(&spec);
        let dt = spec.time.dt();
        for (k, s) in y.slices.iter().enumerate() {
            let decay = (1.0 + dt * lam).powi(-(k as i32));
            for (j, v) in s.values().iter().enumerate() {
                let want = decay * (PI * spec.grid.node(j)).sin();
                assert!((v - want).abs() <= 1e-13, "k={k} j={j}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn negative_potential_can_break_the_step() {
        let mut spec = tiny_spec(5, 2);
        // diag = 1 + 2r + dt*a; pick a so the first pivot vanishes
        let r = spec.time.dt() / spec.grid.h().powi(2);
        let a = -(1.0 + 2.0 * r) / spec.time.dt();
        spec.potential = SpaceTimeField::constant(&spec.grid, &spec.time, a);
        let err = solve_adjoint(&spec, &spec.grid.sample(|x| x)).unwrap_err();
        assert!(matches!(err, Error::LinearSolve { step: 2, row: 0 }), "{err:?}");
    }
}
