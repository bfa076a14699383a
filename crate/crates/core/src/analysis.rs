//! Saturation analysis of computed equilibria, adjoint nondegeneracy and
//! report export.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{degeneracy_cutoff, masked_adjoint_norms, saturation_profile, GameSpec, Player};
use crate::error::{Error, Result};
use crate::nash::{pair_adjoints, write_residuals_csv, EquilibriumResult};

pub const DEFAULT_SAT_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Player1Saturated,
    Player2Saturated,
    BothSaturated,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BangBangReport {
    pub sat_fraction_1: f64,
    pub sat_fraction_2: f64,
    pub degenerate_slices_1: usize,
    pub degenerate_slices_2: usize,
    pub verdict: Verdict,
    pub sat_tol: f64,
    pub sat_threshold: f64,
}

fn classify(f1: f64, f2: f64, threshold: f64) -> Verdict {
    match (f1 >= threshold, f2 >= threshold) {
        (true, true) => Verdict::BothSaturated,
        (true, false) => Verdict::Player1Saturated,
        (false, true) => Verdict::Player2Saturated,
        (false, false) => Verdict::Neither,
    }
}

/// Classifies which player's control sits on its cap on at least
/// `sat_threshold` of the time slices. A certified equilibrium with
/// `y1 != y2` should never be classified as `Neither`.
pub fn verify_bang_bang(
    spec: &GameSpec,
    result: &EquilibriumResult,
    sat_tol: f64,
    sat_threshold: f64,
) -> Result<BangBangReport> {
    let p1 = saturation_profile(&spec.grid, &spec.time, &result.u1, sat_tol);
    let p2 = saturation_profile(&spec.grid, &spec.time, &result.u2, sat_tol);
    let nd = adjoint_nondegeneracy(spec, result)?;
    Ok(BangBangReport {
        sat_fraction_1: p1.fraction,
        sat_fraction_2: p2.fraction,
        degenerate_slices_1: nd.degenerate_1,
        degenerate_slices_2: nd.degenerate_2,
        verdict: classify(p1.fraction, p2.fraction, sat_threshold),
        sat_tol,
        sat_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    /// `(t_k, ||chi_1 phi_k||_h)` per control slice.
    pub player1: Vec<(f64, f64)>,
    /// `(t_k, ||chi_2 psi_k||_h)` per control slice.
    pub player2: Vec<(f64, f64)>,
    pub degenerate_1: usize,
    pub degenerate_2: usize,
    /// False when `y1 != y2` and both masked adjoints vanish numerically on
    /// some slices; at least one of them should be nonzero on every slice.
    pub dichotomy_observed: bool,
}

/// Masked adjoint norms of both players at the result pair, with counts of
/// slices under the degeneracy cutoff.
pub fn adjoint_nondegeneracy(spec: &GameSpec, result: &EquilibriumResult) -> Result<NondegeneracyReport> {
    let (phi, psi) = pair_adjoints(spec, &result.u1, &result.u2)?;
    let n1 = masked_adjoint_norms(&spec.grid, &phi, &spec.mask1);
    let n2 = masked_adjoint_norms(&spec.grid, &psi, &spec.mask2);
    let count = |norms: &[f64]| {
        let cut = degeneracy_cutoff(norms);
        norms.iter().filter(|&&n| n <= cut).count()
    };
    let degenerate_1 = count(&n1);
    let degenerate_2 = count(&n2);
    let with_t = |norms: Vec<f64>| -> Vec<(f64, f64)> {
        norms.into_iter().enumerate().map(|(k, n)| (spec.time.t(k), n)).collect()
    };
    Ok(NondegeneracyReport {
        player1: with_t(n1),
        player2: with_t(n2),
        degenerate_1,
        degenerate_2,
        dichotomy_observed: spec.targets_coincide() || degenerate_1 == 0 || degenerate_2 == 0,
    })
}

/// Scalars of an [`EquilibriumResult`] as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub vi1: f64,
    pub vi2: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub rounds: usize,
    pub converged: bool,
}

impl From<&EquilibriumResult> for ResultSummary {
    fn from(r: &EquilibriumResult) -> Self {
        Self {
            vi1: r.vi1,
            vi2: r.vi2,
            j1: r.j1,
            j2: r.j2,
            rounds: r.rounds,
            converged: r.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bang_bang: Option<BangBangReport>,
    /// Command-specific scalars.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Summary {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            result: None,
            bang_bang: None,
            extra: serde_json::Map::new(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

pub const SATURATION_CSV_HEADER: &str = "k,t,norm_u1,norm_u2,cap1,cap2";

pub fn write_saturation_csv<W: Write>(mut w: W, spec: &GameSpec, result: &EquilibriumResult) -> std::io::Result<()> {
    writeln!(w, "{SATURATION_CSV_HEADER}")?;
    let n1 = result.control(Player::One).slice_norms(&spec.grid);
    let n2 = result.control(Player::Two).slice_norms(&spec.grid);
    for (k, (a, b)) in n1.iter().zip(&n2).enumerate() {
        writeln!(w, "{},{},{},{},{},{}", k, spec.time.t(k), a, b, spec.cap1, spec.cap2)?;
    }
    Ok(())
}

pub(crate) fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `saturation.csv`, `residuals.csv` and `summary.json` into `out_dir`.
/// `summary` supplies the config echo and seed; the result and report
/// scalars are filled in here.
pub fn export_report(
    spec: &GameSpec,
    result: &EquilibriumResult,
    report: &BangBangReport,
    mut summary: Summary,
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("saturation.csv"), |w| write_saturation_csv(w, spec, result))?;
    write_file(&out_dir.join("residuals.csv"), |w| write_residuals_csv(w, &result.history))?;
    summary.result = Some(result.into());
    summary.bang_bang = Some(report.clone());
    summary.write(out_dir)
}
