//! Player costs, exact discrete adjoint gradients and the best-response
//! solver (projected gradient with Armijo backtracking).

use serde::{Deserialize, Serialize};

use crate::control::{bang_bang_from_adjoint, project_admissible, vi_residual, Control, GameSpec, Player};
use crate::error::{Error, Result};
use crate::pde::{solve_adjoint, solve_forward, solve_linearized, ScalarField, SpatialGrid, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BestResponseOptions {
    pub max_iters: usize,
    pub vi_tol: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            vi_tol: 1e-8,
            step_init: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
        }
    }
}

impl BestResponseOptions {
    /// Returns one message per violated constraint, keyed as `br.<field>`.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.max_iters == 0 {
            errs.push("br.max_iters = 0: must be positive".to_string());
        }
        if !(self.vi_tol > 0.0) {
            errs.push(format!("br.vi_tol = {}: must be > 0", self.vi_tol));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            errs.push(format!("br.step_init = {}: must be finite and > 0", self.step_init));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            errs.push(format!("br.backtrack_factor = {}: must lie in (0, 1)", self.backtrack_factor));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            errs.push(format!("br.armijo_c = {}: must lie in (0, 1)", self.armijo_c));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone)]
pub struct BestResponseOutcome {
    pub control: Control,
    /// `J_i` at the returned control.
    pub objective: f64,
    pub vi_residual: f64,
    pub iters: usize,
    pub converged: bool,
    /// `½ J_i²` at the warm start and after every accepted step; monotone up to
    /// round-off.
    pub trace: Vec<f64>,
}

fn controls<'a>(player: Player, own: &'a Control, other: &'a Control) -> (&'a Control, &'a Control) {
    match player {
        Player::One => (own, other),
        Player::Two => (other, own),
    }
}

fn terminal_mismatch(spec: &GameSpec, player: Player, y: &Trajectory) -> ScalarField {
    y.terminal().sub(spec.target(player))
}

/// `J_i(u1, u2) = ||y(T; u1, u2) - y_i||_h`.
pub fn objective(spec: &GameSpec, player: Player, u1: &Control, u2: &Control) -> Result<f64> {
    let y = solve_forward(spec, u1, u2)?;
    Ok(spec.grid.norm_unchecked(terminal_mismatch(spec, player, &y).values()))
}

/// Adjoint of player `player` at `(u1, u2)`: terminal value `y_i - y(T)`.
pub fn player_adjoint(spec: &GameSpec, player: Player, u1: &Control, u2: &Control) -> Result<Trajectory> {
    let y = solve_forward(spec, u1, u2)?;
    solve_adjoint(spec, &spec.target(player).sub(y.terminal()))
}

/// `sum_k <a_k, b_k>_h`, the pairing under which [`gradient`] is the gradient.
pub fn pairing(grid: &SpatialGrid, a: &Control, b: &Control) -> f64 {
    a.slices
        .iter()
        .zip(&b.slices)
        .map(|(x, y)| grid.inner_unchecked(x.values(), y.values()))
        .sum()
}

fn gradient_from_adjoint(spec: &GameSpec, player: Player, phi: &Trajectory) -> Control {
    let dt = spec.time.dt();
    let mask = spec.mask(player);
    Control {
        slices: phi.slices[..spec.time.n_steps()].iter().map(|p| mask.apply(p).scaled(-dt)).collect(),
        mask: mask.clone(),
        cap: spec.cap(player),
    }
}

/// Gradient of `½ J_i²` with respect to player `player`'s control,
/// `g_k = -dt * chi p_k`, represented under [`pairing`]: the directional
/// derivative along `v` is `pairing(g, v)`.
pub fn gradient(spec: &GameSpec, player: Player, u1: &Control, u2: &Control) -> Result<Control> {
    let phi = player_adjoint(spec, player, u1, u2)?;
    Ok(gradient_from_adjoint(spec, player, &phi))
}

fn half_sq(spec: &GameSpec, player: Player, u1: &Control, u2: &Control) -> Result<f64> {
    let j = objective(spec, player, u1, u2)?;
    Ok(0.5 * j * j)
}

/// Central differences of `½ J_i²` over every masked node and slice, divided
/// by `h` so the result is comparable entrywise with [`gradient`].
pub fn finite_difference_gradient(
    spec: &GameSpec,
    player: Player,
    u1: &Control,
    u2: &Control,
    eps: f64,
) -> Result<Control> {
    if !(eps > 0.0) {
        return Err(Error::config(format!("eps = {eps}: must be > 0")));
    }
    let (own, other) = match player {
        Player::One => (u1, u2),
        Player::Two => (u2, u1),
    };
    spec.check_control(own, player)?;
    let h = spec.grid.h();
    let mut out = Control::zeros(&spec.grid, &spec.time, spec.mask(player).clone(), spec.cap(player));
    let idx: Vec<usize> = spec.mask(player).indices().collect();
    let mut probe = own.clone();
    for k in 0..spec.time.n_steps() {
        for &j in &idx {
            let base = own.slices[k].values()[j];
            probe.slices[k].values_mut()[j] = base + eps;
            let (a, b) = controls(player, &probe, other);
            let plus = half_sq(spec, player, a, b)?;
            probe.slices[k].values_mut()[j] = base - eps;
            let (a, b) = controls(player, &probe, other);
            let minus = half_sq(spec, player, a, b)?;
            probe.slices[k].values_mut()[j] = base;
            out.slices[k].values_mut()[j] = (plus - minus) / (2.0 * eps * h);
        }
    }
    Ok(out)
}

struct Iterate {
    control: Control,
    mismatch: ScalarField,
    half_sq: f64,
    objective: f64,
    phi: Trajectory,
}

fn evaluate(spec: &GameSpec, player: Player, own: Control, other: &Control) -> Result<Iterate> {
    let (u1, u2) = controls(player, &own, other);
    let y = solve_forward(spec, u1, u2)?;
    let mismatch = terminal_mismatch(spec, player, &y);
    let objective = spec.grid.norm_unchecked(mismatch.values());
    let phi = solve_adjoint(spec, &mismatch.scaled(-1.0))?;
    Ok(Iterate {
        control: own,
        mismatch,
        half_sq: 0.5 * objective * objective,
        objective,
        phi,
    })
}

/// Minimizes `J_i(., other)` over player `player`'s admissible set.
///
/// Projected gradient on `½ J_i²` in the `L²(0,T;L²)` metric: the trial point
/// is `P(u + s chi p)` with `p` the player's adjoint, accepted under the
/// Armijo rule along the projection arc. The decrease of a trial is taken from
/// the linearized state of the step, which stays accurate long after the
/// difference of two objective values has drowned in round-off. After an accepted step the next
/// trial step grows by `1 / backtrack_factor`. Stops once the
/// maximum-condition gap drops to `vi_tol`.
pub fn solve_best_response(
    spec: &GameSpec,
    player: Player,
    other: &Control,
    opts: &BestResponseOptions,
) -> Result<BestResponseOutcome> {
    opts.validate()?;
    spec.check_admissible(other, player.other())?;
    let grid = &spec.grid;
    let time = &spec.time;
    let mask = spec.mask(player);
    let cap = spec.cap(player);

    // warm start: maximum-condition control of the zero-control adjoint
    let zero = spec.zero_control(player);
    let at_zero = evaluate(spec, player, zero.clone(), other)?;
    let bb = bang_bang_from_adjoint(grid, &at_zero.phi, mask, cap)?;
    let mut cur = if bb.degenerate.len() == time.n_steps() {
        at_zero
    } else {
        evaluate(spec, player, bb.control, other)?
    };

    let mut trace = vec![cur.half_sq];
    let mut vi = vi_residual(grid, time, &cur.control, &cur.phi)?;
    let mut iters = 0;
    let mut step = opts.step_init;
    let mut converged = vi <= opts.vi_tol;
    let dt = time.dt();

    while !converged && iters < opts.max_iters {
        let direction = Control {
            slices: cur.phi.slices[..time.n_steps()].iter().map(|p| mask.apply(p)).collect(),
            mask: mask.clone(),
            cap,
        };
        let mut accepted = None;
        while step > f64::MIN_POSITIVE {
            let trial = project_admissible(grid, &cur.control.axpy(step, &direction))?;
            // <grad, trial - u> in the dt-weighted metric
            let slope = -dt * pairing(grid, &direction, &trial.axpy(-1.0, &cur.control));
            let w = trial.axpy(-1.0, &cur.control);
            let z = solve_linearized(spec, &w, player)?;
            let z = z.terminal();
            let decrease = grid.inner_unchecked(cur.mismatch.values(), z.values())
                + 0.5 * grid.inner_unchecked(z.values(), z.values());
            if decrease <= opts.armijo_c * slope && slope < 0.0 {
                accepted = Some(evaluate(spec, player, trial, other)?);
                break;
            }
            step *= opts.backtrack_factor;
        }
        let Some(next) = accepted else {
            log::debug!("{player}: line search stalled at iteration {iters} (gap {vi:e})");
            break;
        };
        iters += 1;
        cur = next;
        trace.push(cur.half_sq);
        vi = vi_residual(grid, time, &cur.control, &cur.phi)?;
        converged = vi <= opts.vi_tol;
        step /= opts.backtrack_factor;
    }

    Ok(BestResponseOutcome {
        control: cur.control,
        objective: cur.objective,
        vi_residual: vi,
        iters,
        converged,
        trace,
    })
}
