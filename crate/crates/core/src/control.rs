//! Admissible controls `{u : ||u(t)|| <= M, supp u(t) ⊂ ω}`, the game data,
//! and the pointwise-in-time optimality machinery built on the adjoint.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{ScalarField, SpaceTimeField, SpatialGrid, SubdomainMask, TimeGrid, Trajectory};

/// Relative slack on the ball constraint when testing admissibility.
pub const ADMISSIBLE_SLACK: f64 = 1e-12;
/// Degenerate-slice cutoff, relative to the largest masked adjoint slice norm.
pub const DEGENERACY_REL: f64 = 1e-14;
/// Default saturation tolerance, relative to `max(cap, 1)`.
pub const DEFAULT_SAT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 1,
            Player::Two => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Player> {
        match i {
            1 => Some(Player::One),
            2 => Some(Player::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "player {}", self.index())
    }
}

/// Complete game instance: grids, potential `a(x, t)`, control regions,
/// caps and the initial/target states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    /// One slice per time node.
    pub potential: SpaceTimeField,
    pub mask1: SubdomainMask,
    pub mask2: SubdomainMask,
    pub cap1: f64,
    pub cap2: f64,
    pub y0: ScalarField,
    pub y1: ScalarField,
    pub y2: ScalarField,
}

impl GameSpec {
    /// Validates the instance. Coinciding targets are accepted; callers can
    /// query [`GameSpec::targets_coincide`] to warn about it.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: SpatialGrid,
        time: TimeGrid,
        potential: SpaceTimeField,
        mask1: SubdomainMask,
        mask2: SubdomainMask,
        cap1: f64,
        cap2: f64,
        y0: ScalarField,
        y1: ScalarField,
        y2: ScalarField,
    ) -> Result<Self> {
        let spec = Self {
            grid,
            time,
            potential,
            mask1,
            mask2,
            cap1,
            cap2,
            y0,
            y1,
            y2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, cap) in [("cap1", self.cap1), ("cap2", self.cap2)] {
            if !(cap.is_finite() && cap >= 0.0) {
                errs.push(format!("{name} = {cap}: must be finite and >= 0"));
            }
        }
        if self.mask1.flags().len() != self.grid.n_interior() || self.mask2.flags().len() != self.grid.n_interior() {
            errs.push("masks do not match the grid".to_string());
        } else if !self.mask1.disjoint(&self.mask2) {
            errs.push(format!(
                "omega1 {:?} and omega2 {:?} overlap on the grid; control regions must be disjoint",
                self.mask1.interval(),
                self.mask2.interval()
            ));
        }
        for (name, f) in [("y0", &self.y0), ("y1", &self.y1), ("y2", &self.y2)] {
            if f.len() != self.grid.n_interior() {
                errs.push(format!("{name}: {} values for {} nodes", f.len(), self.grid.n_interior()));
            }
        }
        if self.potential.check_nodes(&self.grid, &self.time, "potential").is_err() {
            errs.push(format!(
                "potential: expected {} x {} values",
                self.time.n_steps() + 1,
                self.grid.n_interior()
            ));
        }
        let all_finite = [&self.y0, &self.y1, &self.y2]
            .into_iter()
            .chain(&self.potential.slices)
            .all(|f| f.values().iter().all(|v| v.is_finite()));
        if !all_finite {
            errs.push("data contain non-finite values".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn targets_coincide(&self) -> bool {
        self.y1 == self.y2
    }

    pub fn mask(&self, p: Player) -> &SubdomainMask {
        match p {
            Player::One => &self.mask1,
            Player::Two => &self.mask2,
        }
    }

    pub fn cap(&self, p: Player) -> f64 {
        match p {
            Player::One => self.cap1,
            Player::Two => self.cap2,
        }
    }

    pub fn target(&self, p: Player) -> &ScalarField {
        match p {
            Player::One => &self.y1,
            Player::Two => &self.y2,
        }
    }

    pub fn zero_control(&self, p: Player) -> Control {
        Control::zeros(&self.grid, &self.time, self.mask(p).clone(), self.cap(p))
    }

    /// Structural conformity of `u` with player `p`'s time axis, grid and region.
    pub fn check_control(&self, u: &Control, p: Player) -> Result<()> {
        if u.slices.len() != self.time.n_steps() {
            return Err(Error::Structure(format!(
                "{p} control has {} slices, expected {}",
                u.slices.len(),
                self.time.n_steps()
            )));
        }
        for s in &u.slices {
            self.grid.check(s, "control slice")?;
        }
        if u.mask.flags() != self.mask(p).flags() {
            return Err(Error::Structure(format!("{p} control carries a different region mask")));
        }
        Ok(())
    }

    /// Conformity plus membership in the admissible set.
    pub fn check_admissible(&self, u: &Control, p: Player) -> Result<()> {
        self.check_control(u, p)?;
        if u.cap != self.cap(p) {
            return Err(Error::Contract(format!("{p} control has cap {} but the game uses {}", u.cap, self.cap(p))));
        }
        if let Some(k) = u.first_violation(&self.grid) {
            return Err(Error::Contract(format!(
                "{p} control is not admissible: slice {k} has norm {} > cap {}",
                self.grid.norm_unchecked(u.slices[k].values()),
                u.cap
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant-in-time control; slice `k` acts on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub slices: Vec<ScalarField>,
    pub mask: SubdomainMask,
    pub cap: f64,
}

impl Control {
    pub fn zeros(grid: &SpatialGrid, time: &TimeGrid, mask: SubdomainMask, cap: f64) -> Self {
        Self {
            slices: vec![grid.zeros(); time.n_steps()],
            mask,
            cap,
        }
    }

    pub fn slice_norms(&self, grid: &SpatialGrid) -> Vec<f64> {
        self.slices.iter().map(|s| grid.norm_unchecked(s.values())).collect()
    }

    /// True when every slice vanishes off the region.
    pub fn supported(&self) -> bool {
        self.slices.iter().all(|s| {
            s.values()
                .iter()
                .zip(self.mask.flags())
                .all(|(&v, &m)| m || v == 0.0)
        })
    }

    fn first_violation(&self, grid: &SpatialGrid) -> Option<usize> {
        if !self.supported() {
            return Some(
                self.slices
                    .iter()
                    .position(|s| s.values().iter().zip(self.mask.flags()).any(|(&v, &m)| !m && v != 0.0))
                    .unwrap_or(0),
            );
        }
        let bound = self.cap * (1.0 + ADMISSIBLE_SLACK);
        self.slice_norms(grid).iter().position(|&n| n > bound)
    }

    pub fn is_admissible(&self, grid: &SpatialGrid) -> bool {
        self.first_violation(grid).is_none()
    }

    /// Stacked values of the masked nodes, slice-major.
    pub fn masked_values(&self) -> Vec<f64> {
        let idx: Vec<usize> = self.mask.indices().collect();
        self.slices
            .iter()
            .flat_map(|s| idx.iter().map(move |&j| s.values()[j]))
            .collect()
    }

    /// `self + c * other`, slice by slice (no projection).
    pub fn axpy(&self, c: f64, other: &Control) -> Control {
        Control {
            slices: self
                .slices
                .iter()
                .zip(&other.slices)
                .map(|(a, b)| a.add(&b.scaled(c)))
                .collect(),
            mask: self.mask.clone(),
            cap: self.cap,
        }
    }

    /// `(1 - w) * self + w * other`.
    pub fn blend(&self, w: f64, other: &Control) -> Control {
        Control {
            slices: self
                .slices
                .iter()
                .zip(&other.slices)
                .map(|(a, b)| a.scaled(1.0 - w).add(&b.scaled(w)))
                .collect(),
            mask: self.mask.clone(),
            cap: self.cap,
        }
    }

    /// `sqrt(dt * sum_k ||a_k - b_k||_h^2)`, the discrete `L²(0,T;L²)` distance.
    pub fn distance(&self, other: &Control, grid: &SpatialGrid, time: &TimeGrid) -> f64 {
        let sq: f64 = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| {
                let d = a.sub(b);
                grid.inner_unchecked(d.values(), d.values())
            })
            .sum();
        (time.dt() * sq).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Control) -> f64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Euclidean projection onto the product of per-slice balls of radius
/// `u.cap`. Off-region values are zeroed.
pub fn project_admissible(grid: &SpatialGrid, u: &Control) -> Result<Control> {
    if !(u.cap >= 0.0) {
        return Err(Error::config(format!("cap = {}: must be >= 0", u.cap)));
    }
    let slices = u
        .slices
        .iter()
        .map(|s| {
            let s = u.mask.apply(s);
            let n = grid.norm_unchecked(s.values());
            if n > u.cap {
                s.scaled(u.cap / n)
            } else {
                s
            }
        })
        .collect();
    Ok(Control {
        slices,
        mask: u.mask.clone(),
        cap: u.cap,
    })
}

/// Output of [`bang_bang_from_adjoint`].
#[derive(Debug, Clone)]
pub struct BangBang {
    pub control: Control,
    /// Slices whose masked adjoint norm fell below the degeneracy cutoff;
    /// these are set to zero.
    pub degenerate: Vec<usize>,
}

/// Adjoint slice paired with control slice `k` in the discrete duality
/// `<z_N, p_N>_h = dt * sum_k <chi v_k, p_k>_h`: with the source entering the
/// implicit step for `t_{k+1}`, the transposed march leaves exactly
/// `p_k = M_{k+1}^{-1} ... M_N^{-1} p_N` against `v_k`.
pub fn paired_adjoint(phi: &Trajectory) -> &[ScalarField] {
    &phi.slices[..phi.slices.len() - 1]
}

/// Masked adjoint norms `||chi p_k||_h` for `k = 0..n_steps`, one per control slice.
pub fn masked_adjoint_norms(grid: &SpatialGrid, phi: &Trajectory, mask: &SubdomainMask) -> Vec<f64> {
    paired_adjoint(phi)
        .iter()
        .map(|p| grid.norm_unchecked(mask.apply(p).values()))
        .collect()
}

pub fn degeneracy_cutoff(norms: &[f64]) -> f64 {
    DEGENERACY_REL * norms.iter().copied().fold(0.0, f64::max)
}

/// Maximizer of `u -> <chi p_k, u>` over the ball on every slice:
/// `u_k = cap * chi p_k / ||chi p_k||`.
pub fn bang_bang_from_adjoint(
    grid: &SpatialGrid,
    phi: &Trajectory,
    mask: &SubdomainMask,
    cap: f64,
) -> Result<BangBang> {
    if phi.slices.is_empty() {
        return Err(Error::Structure("adjoint trajectory has no slices".into()));
    }
    for p in &phi.slices {
        grid.check(p, "adjoint slice")?;
    }
    if mask.flags().len() != grid.n_interior() {
        return Err(Error::Structure("mask does not match the grid".into()));
    }
    let norms = masked_adjoint_norms(grid, phi, mask);
    let cutoff = degeneracy_cutoff(&norms);
    let mut degenerate = Vec::new();
    let slices = paired_adjoint(phi)
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(k, (p, &n))| {
            if n > cutoff {
                mask.apply(p).scaled(cap / n)
            } else {
                degenerate.push(k);
                grid.zeros()
            }
        })
        .collect();
    Ok(BangBang {
        control: Control {
            slices,
            mask: mask.clone(),
            cap,
        },
        degenerate,
    })
}

/// Gap `dt * sum_k [cap ||chi p_k|| - <u_k, chi p_k>]` of the pointwise
/// maximum condition. Non-negative for admissible `u`; zero exactly when `u`
/// maximizes `<chi p_k, .>` over the ball on every slice.
pub fn vi_residual(grid: &SpatialGrid, time: &TimeGrid, u: &Control, phi: &Trajectory) -> Result<f64> {
    if u.slices.len() != time.n_steps() {
        return Err(Error::Structure(format!(
            "control has {} slices, expected {}",
            u.slices.len(),
            time.n_steps()
        )));
    }
    phi.check_nodes(grid, time, "adjoint")?;
    u.slices.iter().try_for_each(|s| grid.check(s, "control slice"))?;
    if let Some(k) = u.first_violation(grid) {
        return Err(Error::Contract(format!("control is not admissible at slice {k}")));
    }
    let gap: f64 = u
        .slices
        .iter()
        .zip(paired_adjoint(phi))
        .map(|(uk, p)| {
            let mp = u.mask.apply(p);
            u.cap * grid.norm_unchecked(mp.values()) - grid.inner_unchecked(uk.values(), mp.values())
        })
        .sum();
    Ok((time.dt() * gap).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationProfile {
    /// `(t_k, ||u_k||_h)` per slice.
    pub points: Vec<(f64, f64)>,
    pub fraction: f64,
    pub sat_tol: f64,
}

/// Per-slice norms and the share of slices with `| ||u_k|| - cap | <= sat_tol * max(cap, 1)`.
pub fn saturation_profile(grid: &SpatialGrid, time: &TimeGrid, u: &Control, sat_tol: f64) -> SaturationProfile {
    let norms = u.slice_norms(grid);
    let band = sat_tol * u.cap.max(1.0);
    let hits = norms.iter().filter(|&&n| (n - u.cap).abs() <= band).count();
    SaturationProfile {
        points: norms.iter().enumerate().map(|(k, &n)| (time.t(k), n)).collect(),
        fraction: if norms.is_empty() { 0.0 } else { hits as f64 / norms.len() as f64 },
        sat_tol,
    }
}

pub const CONTROL_CSV_HEADER: &str = "k,t,node_index,value";

/// Writes the masked entries as `k,t,node_index,value`; `node_index` is the
/// 1-based interior node number (`x = node_index * h`).
pub fn write_control_csv<W: Write>(mut w: W, time: &TimeGrid, u: &Control) -> std::io::Result<()> {
    writeln!(w, "{CONTROL_CSV_HEADER}")?;
    for (k, s) in u.slices.iter().enumerate() {
        for j in u.mask.indices() {
            writeln!(w, "{},{},{},{}", k, time.t(k), j + 1, s.values()[j])?;
        }
    }
    Ok(())
}

/// Reads a control written by [`write_control_csv`]. Every masked node of
/// every slice must appear exactly once.
pub fn read_control_csv<R: BufRead>(
    r: R,
    grid: &SpatialGrid,
    time: &TimeGrid,
    mask: &SubdomainMask,
    cap: f64,
) -> std::result::Result<Control, String> {
    let mut u = Control::zeros(grid, time, mask.clone(), cap);
    let mut seen = vec![vec![false; grid.n_interior()]; time.n_steps()];
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == CONTROL_CSV_HEADER => {}
        Some((_, Ok(h))) => return Err(format!("bad header {h:?}, expected {CONTROL_CSV_HEADER:?}")),
        Some((_, Err(e))) => return Err(e.to_string()),
        None => return Err("empty file".into()),
    }
    for (lineno, line) in lines {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| format!("line {}: {msg}", lineno + 1);
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(at(format!("expected 4 columns, found {}", cols.len())));
        }
        let k: usize = cols[0].parse().map_err(|e| at(format!("k: {e}")))?;
        let node: usize = cols[2].parse().map_err(|e| at(format!("node_index: {e}")))?;
        let value: f64 = cols[3].parse().map_err(|e| at(format!("value: {e}")))?;
        if k >= time.n_steps() {
            return Err(at(format!("k = {k} out of range")));
        }
        if node == 0 || node > grid.n_interior() || !mask.contains(node - 1) {
            return Err(at(format!("node_index {node} is not in the control region")));
        }
        if std::mem::replace(&mut seen[k][node - 1], true) {
            return Err(at(format!("duplicate entry for k = {k}, node_index = {node}")));
        }
        u.slices[k].values_mut()[node - 1] = value;
    }
    let expected = time.n_steps() * mask.count();
    let got: usize = seen.iter().flatten().filter(|&&s| s).count();
    if got != expected {
        return Err(format!("{got} entries, expected {expected}"));
    }
    Ok(u)
}
