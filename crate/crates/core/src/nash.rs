//! Iterated best response for the two-player game and certification of
//! candidate equilibria.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{objective, player_adjoint, solve_best_response, BestResponseOptions, BestResponseOutcome};
use crate::control::{project_admissible, vi_residual, Control, GameSpec, Player};
use crate::error::{Error, Result};
use crate::pde::solve_forward;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NashMode {
    /// `u1 <- BR1(u2)`, then `u2 <- BR2(u1)` with the fresh `u1`.
    #[default]
    GaussSeidel,
    /// Both responses against the previous round's pair.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashOptions {
    pub mode: NashMode,
    pub max_rounds: usize,
    /// Under-relaxation weight in `(0, 1]`.
    pub relax: f64,
    pub nash_tol: f64,
    pub br: BestResponseOptions,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            mode: NashMode::GaussSeidel,
            max_rounds: 200,
            relax: 1.0,
            nash_tol: 1e-6,
            br: BestResponseOptions::default(),
        }
    }
}

impl NashOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            errs.push(format!("nash.relax = {}: must lie in (0, 1]", self.relax));
        }
        if !(self.nash_tol > 0.0) {
            errs.push(format!("nash.nash_tol = {}: must be > 0", self.nash_tol));
        }
        errs.extend(self.br.violations());
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub vi1: f64,
    pub vi2: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub update_distance: f64,
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub u1: Control,
    pub u2: Control,
    pub vi1: f64,
    pub vi2: f64,
    pub j1: f64,
    pub j2: f64,
    /// Rounds executed (not the round at which the returned pair was found).
    pub rounds: usize,
    pub converged: bool,
    pub history: Vec<RoundRecord>,
}

impl EquilibriumResult {
    pub fn max_vi(&self) -> f64 {
        self.vi1.max(self.vi2)
    }

    pub fn control(&self, p: Player) -> &Control {
        match p {
            Player::One => &self.u1,
            Player::Two => &self.u2,
        }
    }
}

/// Residuals and costs of a pair, each residual against the player's own adjoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStatus {
    pub vi1: f64,
    pub vi2: f64,
    pub j1: f64,
    pub j2: f64,
}

pub fn pair_status(spec: &GameSpec, u1: &Control, u2: &Control) -> Result<PairStatus> {
    let y = solve_forward(spec, u1, u2)?;
    let yt = y.terminal();
    let phi = crate::pde::solve_adjoint(spec, &spec.y1.sub(yt))?;
    let psi = crate::pde::solve_adjoint(spec, &spec.y2.sub(yt))?;
    Ok(PairStatus {
        vi1: vi_residual(&spec.grid, &spec.time, u1, &phi)?,
        vi2: vi_residual(&spec.grid, &spec.time, u2, &psi)?,
        j1: spec.grid.norm_unchecked(yt.sub(&spec.y1).values()),
        j2: spec.grid.norm_unchecked(yt.sub(&spec.y2).values()),
    })
}

fn relaxed(spec: &GameSpec, old: &Control, new: Control, relax: f64) -> Result<Control> {
    if relax == 1.0 {
        Ok(new)
    } else {
        project_admissible(&spec.grid, &old.blend(relax, &new))
    }
}

fn jacobi_responses(
    spec: &GameSpec,
    u1: &Control,
    u2: &Control,
    br: &BestResponseOptions,
) -> Result<(BestResponseOutcome, BestResponseOutcome)> {
    let (r1, r2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| solve_best_response(spec, Player::One, u2, br));
        let r2 = solve_best_response(spec, Player::Two, u1, br);
        (h1.join().expect("best-response thread panicked"), r2)
    });
    Ok((r1?, r2?))
}

/// Iterated best response from the zero pair.
///
/// Stops once both maximum-condition gaps are at most `nash_tol` (checked
/// after every round) or after `max_rounds` rounds, and returns the pair with
/// the smallest `max(vi1, vi2)` seen. Non-convergence is reported through
/// `converged`, not as an error.
pub fn solve_nash(spec: &GameSpec, opts: &NashOptions) -> Result<EquilibriumResult> {
    solve_nash_observed(spec, opts, |_, _, _| {})
}

/// [`solve_nash`] that hands the pair to `observer` after every round.
pub fn solve_nash_observed<F>(spec: &GameSpec, opts: &NashOptions, mut observer: F) -> Result<EquilibriumResult>
where
    F: FnMut(usize, &Control, &Control),
{
    let errs = opts.violations();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let mut u1 = spec.zero_control(Player::One);
    let mut u2 = spec.zero_control(Player::Two);
    let init = pair_status(spec, &u1, &u2)?;
    let mut best = (u1.clone(), u2.clone(), init);
    let mut history = Vec::new();
    let mut converged = false;

    for round in 1..=opts.max_rounds {
        let (n1, n2) = match opts.mode {
            NashMode::GaussSeidel => {
                let r1 = solve_best_response(spec, Player::One, &u2, &opts.br)?;
                let n1 = relaxed(spec, &u1, r1.control, opts.relax)?;
                let r2 = solve_best_response(spec, Player::Two, &n1, &opts.br)?;
                let n2 = relaxed(spec, &u2, r2.control, opts.relax)?;
                (n1, n2)
            }
            NashMode::Jacobi => {
                let (r1, r2) = jacobi_responses(spec, &u1, &u2, &opts.br)?;
                (
                    relaxed(spec, &u1, r1.control, opts.relax)?,
                    relaxed(spec, &u2, r2.control, opts.relax)?,
                )
            }
        };
        let d1 = n1.distance(&u1, &spec.grid, &spec.time);
        let d2 = n2.distance(&u2, &spec.grid, &spec.time);
        u1 = n1;
        u2 = n2;
        observer(round, &u1, &u2);
        let st = pair_status(spec, &u1, &u2)?;
        history.push(RoundRecord {
            round,
            vi1: st.vi1,
            vi2: st.vi2,
            j1: st.j1,
            j2: st.j2,
            update_distance: d1.hypot(d2),
        });
        log::debug!("round {round}: vi1 {:e} vi2 {:e} J1 {} J2 {}", st.vi1, st.vi2, st.j1, st.j2);
        if st.vi1.max(st.vi2) < best.2.vi1.max(best.2.vi2) || round == 1 {
            best = (u1.clone(), u2.clone(), st);
        }
        if st.vi1.max(st.vi2) <= opts.nash_tol {
            converged = true;
            break;
        }
    }

    let (u1, u2, st) = best;
    Ok(EquilibriumResult {
        u1,
        u2,
        vi1: st.vi1,
        vi2: st.vi2,
        j1: st.j1,
        j2: st.j2,
        rounds: history.len(),
        converged,
        history,
    })
}

pub const RESIDUALS_CSV_HEADER: &str = "round,vi1,vi2,J1,J2,update_distance";

pub fn write_residuals_csv<W: Write>(mut w: W, history: &[RoundRecord]) -> std::io::Result<()> {
    writeln!(w, "{RESIDUALS_CSV_HEADER}")?;
    for r in history {
        writeln!(w, "{},{},{},{},{},{}", r.round, r.vi1, r.vi2, r.j1, r.j2, r.update_distance)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub player: u8,
    pub index: usize,
    pub j_pair: f64,
    pub j_probe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub tol: f64,
    pub seed: u64,
    pub n_probes: usize,
    pub vi1: f64,
    pub vi2: f64,
    pub j1: f64,
    pub j2: f64,
    pub first_order_pass: bool,
    pub probe_pass: bool,
    /// Probes with `J_i(deviation) < J_i(pair) - tol`, ordered by player then index.
    pub violations: Vec<ProbeRecord>,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.first_order_pass && self.probe_pass
    }
}

/// Seeded admissible deviation from `base`: noise on either one slice or
/// all slices at a log-uniform amplitude, then projected.
fn random_deviation(spec: &GameSpec, base: &Control, rng: &mut ChaCha8Rng) -> Result<Control> {
    let mut dev = base.clone();
    let idx: Vec<usize> = base.mask.indices().collect();
    let width = (idx.len() as f64 * spec.grid.h()).sqrt();
    let amp = base.cap * 10f64.powf(rng.gen_range(-3.0..0.5)) / width;
    let n = spec.time.n_steps();
    let slices: Vec<usize> = if rng.gen_bool(0.5) {
        vec![rng.gen_range(0..n)]
    } else {
        (0..n).collect()
    };
    for k in slices {
        let s = dev.slices[k].values_mut();
        for &j in &idx {
            s[j] += amp * rng.gen_range(-1.0..1.0);
        }
    }
    project_admissible(&spec.grid, &dev)
}

/// Two-part certificate for `(u1, u2)`: both maximum-condition gaps at most
/// `tol`, and no seeded admissible unilateral deviation that lowers a
/// player's cost by more than `tol`.
pub fn check_equilibrium(
    spec: &GameSpec,
    u1: &Control,
    u2: &Control,
    tol: f64,
    n_probes: usize,
    seed: u64,
) -> Result<Certificate> {
    check_equilibrium_with(spec, u1, u2, tol, n_probes, seed, &[])
}

/// [`check_equilibrium`] plus caller-supplied deviations, which are indexed
/// after the random probes of their player.
pub fn check_equilibrium_with(
    spec: &GameSpec,
    u1: &Control,
    u2: &Control,
    tol: f64,
    n_probes: usize,
    seed: u64,
    extra: &[(Player, Control)],
) -> Result<Certificate> {
    spec.check_admissible(u1, Player::One)?;
    spec.check_admissible(u2, Player::Two)?;
    for (p, dev) in extra {
        spec.check_admissible(dev, *p)?;
    }
    let st = pair_status(spec, u1, u2)?;
    let mut violations = Vec::new();
    for player in [Player::One, Player::Two] {
        // independent stream per player so probes do not depend on n_probes of the other
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(player.index() as u64);
        let j_pair = match player {
            Player::One => st.j1,
            Player::Two => st.j2,
        };
        let (own, other) = match player {
            Player::One => (u1, u2),
            Player::Two => (u2, u1),
        };
        let mut devs = Vec::with_capacity(n_probes);
        for _ in 0..n_probes {
            devs.push(random_deviation(spec, own, &mut rng)?);
        }
        devs.extend(extra.iter().filter(|(p, _)| *p == player).map(|(_, d)| d.clone()));
        for (index, dev) in devs.iter().enumerate() {
            let j_probe = match player {
                Player::One => objective(spec, player, dev, other)?,
                Player::Two => objective(spec, player, other, dev)?,
            };
            if j_probe < j_pair - tol {
                violations.push(ProbeRecord {
                    player: player.index() as u8,
                    index,
                    j_pair,
                    j_probe,
                });
            }
        }
    }
    Ok(Certificate {
        tol,
        seed,
        n_probes,
        vi1: st.vi1,
        vi2: st.vi2,
        j1: st.j1,
        j2: st.j2,
        first_order_pass: st.vi1 <= tol && st.vi2 <= tol,
        probe_pass: violations.is_empty(),
        violations,
    })
}

/// Adjoints `(phi, psi)` of both players at a pair.
pub fn pair_adjoints(
    spec: &GameSpec,
    u1: &Control,
    u2: &Control,
) -> Result<(crate::pde::Trajectory, crate::pde::Trajectory)> {
    Ok((
        player_adjoint(spec, Player::One, u1, u2)?,
        player_adjoint(spec, Player::Two, u1, u2)?,
    ))
}
