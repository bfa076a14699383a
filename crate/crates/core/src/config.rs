//! JSON run configuration, data presets and named demo instances.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::best_response::BestResponseOptions;
use crate::control::GameSpec;
use crate::error::{Error, Result};
use crate::nash::{NashMode, NashOptions};
use crate::pde::{ScalarField, SpaceTimeField, SpatialGrid, SubdomainMask, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSource {
    Constant(f64),
    /// CSV with `n_steps + 1` rows of `n_interior` values.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    /// `zero`, `sin1`, `neg_sin1` or `gauss:c,w`.
    Preset(String),
    /// `n_interior` values separated by commas or whitespace.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NashSection {
    pub mode: NashMode,
    pub max_rounds: usize,
    pub relax: f64,
    pub nash_tol: f64,
}

impl Default for NashSection {
    fn default() -> Self {
        let d = NashOptions::default();
        Self {
            mode: d.mode,
            max_rounds: d.max_rounds,
            relax: d.relax,
            nash_tol: d.nash_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain_length: f64,
    pub n_interior: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub potential: PotentialSource,
    pub omega1: (f64, f64),
    pub omega2: (f64, f64),
    pub cap1: f64,
    pub cap2: f64,
    pub y0: FieldSource,
    pub y1: FieldSource,
    pub y2: FieldSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub nash: NashSection,
    #[serde(default)]
    pub br: BestResponseOptions,
}

const KNOWN_KEYS: &[&str] = &[
    "domain_length",
    "n_interior",
    "horizon",
    "n_steps",
    "potential",
    "omega1",
    "omega2",
    "cap1",
    "cap2",
    "y0",
    "y1",
    "y2",
    "seed",
    "nash",
    "br",
];
const REQUIRED_KEYS: &[&str] = &[
    "domain_length",
    "n_interior",
    "horizon",
    "n_steps",
    "potential",
    "omega1",
    "omega2",
    "cap1",
    "cap2",
    "y0",
    "y1",
    "y2",
];
const NASH_KEYS: &[&str] = &["mode", "max_rounds", "relax", "nash_tol"];
const BR_KEYS: &[&str] = &["max_iters", "vi_tol", "step_init", "backtrack_factor", "armijo_c"];

pub const TARGETS_COINCIDE_WARNING: &str =
    "y1 and y2 coincide; the bang-bang dichotomy for equilibria assumes y1 != y2 (existence does not)";

/// A validated run: the game, solver options and the configuration it came from.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub spec: GameSpec,
    pub nash: NashOptions,
    pub br: BestResponseOptions,
    /// Configuration with file references made absolute.
    pub run: RunConfig,
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Unit interval, 49 interior nodes, horizon 0.5 in 50 steps, `a = 0`,
    /// `omega1 = (0.1, 0.4)`, `omega2 = (0.6, 0.9)`, unit caps, zero initial
    /// state, targets `+sin(pi x)` and `-sin(pi x)`.
    pub fn default_1d() -> Self {
        Self {
            domain_length: 1.0,
            n_interior: 49,
            horizon: 0.5,
            n_steps: 50,
            potential: PotentialSource::Constant(0.0),
            omega1: (0.1, 0.4),
            omega2: (0.6, 0.9),
            cap1: 1.0,
            cap2: 1.0,
            y0: FieldSource::Preset("zero".into()),
            y1: FieldSource::Preset("sin1".into()),
            y2: FieldSource::Preset("neg_sin1".into()),
            seed: 0,
            nash: NashSection::default(),
            br: BestResponseOptions::default(),
        }
    }

    /// Instance invariant under `x -> 1 - x` with the players swapped:
    /// even initial state, constant potential, mirrored regions and targets.
    pub fn mirror_1d() -> Self {
        Self {
            potential: PotentialSource::Constant(1.0),
            omega1: (0.1, 0.35),
            omega2: (0.65, 0.9),
            cap1: 0.8,
            cap2: 0.8,
            y0: FieldSource::Preset("gauss:0.5,0.2".into()),
            y1: FieldSource::Preset("gauss:0.3,0.15".into()),
            y2: FieldSource::Preset("gauss:0.7,0.15".into()),
            nash: NashSection {
                mode: NashMode::Jacobi,
                ..Default::default()
            },
            ..Self::default_1d()
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "default-1d" => Some(Self::default_1d()),
            "mirror-1d" => Some(Self::mirror_1d()),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn nash_options(&self) -> NashOptions {
        NashOptions {
            mode: self.nash.mode,
            max_rounds: self.nash.max_rounds,
            relax: self.nash.relax,
            nash_tol: self.nash.nash_tol,
            br: self.br.clone(),
        }
    }

    /// Rewrites relative file references against `base`.
    pub fn resolved(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PotentialSource::File(p) = &mut self.potential {
            fix(p);
        }
        for f in [&mut self.y0, &mut self.y1, &mut self.y2] {
            if let FieldSource::File(p) = f {
                fix(p);
            }
        }
        self
    }

    /// Validates every field, collecting all violations, and builds the game.
    /// Relative file references are resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<ParsedConfig> {
        let run = self.clone().resolved(base);
        let mut errs = Vec::new();

        let grid = SpatialGrid::new(run.domain_length, run.n_interior).map_err(|e| collect(&mut errs, e)).ok();
        let time = TimeGrid::new(run.horizon, run.n_steps).map_err(|e| collect(&mut errs, e)).ok();
        for (name, cap) in [("cap1", run.cap1), ("cap2", run.cap2)] {
            if !(cap.is_finite() && cap >= 0.0) {
                errs.push(format!("{name} = {cap}: must be finite and >= 0"));
            }
        }
        let nash = run.nash_options();
        errs.extend(nash.violations());

        let (l1, r1) = run.omega1;
        let (l2, r2) = run.omega2;
        if l1.max(l2) < r1.min(r2) {
            errs.push(format!(
                "omega1 ({l1}, {r1}) and omega2 ({l2}, {r2}) overlap; the control regions must be disjoint"
            ));
        }

        let mut built = None;
        if let Some(grid) = &grid {
            let m1 = SubdomainMask::new(grid, l1, r1)
                .map_err(|e| collect_prefixed(&mut errs, "omega1", e))
                .ok();
            let m2 = SubdomainMask::new(grid, l2, r2)
                .map_err(|e| collect_prefixed(&mut errs, "omega2", e))
                .ok();
            let mut field = |name: &str, src: &FieldSource| {
                load_field(grid, src)
                    .map_err(|msg| errs.push(format!("{name}: {msg}")))
                    .ok()
            };
            let y0 = field("y0", &run.y0);
            let y1 = field("y1", &run.y1);
            let y2 = field("y2", &run.y2);
            let pot = time.as_ref().and_then(|time| {
                load_potential(grid, time, &run.potential)
                    .map_err(|msg| errs.push(format!("potential: {msg}")))
                    .ok()
            });
            if let (Some(time), Some(m1), Some(m2), Some(y0), Some(y1), Some(y2), Some(pot)) = (&time, m1, m2, y0, y1, y2, pot)
            {
                built = Some((time.clone(), m1, m2, y0, y1, y2, pot));
            }
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let (time, m1, m2, y0, y1, y2, pot) = built.expect("all parts built when no errors");
        let spec = GameSpec::new(grid.unwrap(), time, pot, m1, m2, run.cap1, run.cap2, y0, y1, y2)?;

        let mut warnings = Vec::new();
        if spec.targets_coincide() {
            log::warn!("{TARGETS_COINCIDE_WARNING}");
            warnings.push(TARGETS_COINCIDE_WARNING.to_string());
        }
        Ok(ParsedConfig {
            br: nash.br.clone(),
            nash,
            spec,
            run,
            warnings,
        })
    }
}

fn collect(errs: &mut Vec<String>, e: Error) {
    match e {
        Error::Config(v) => errs.extend(v),
        other => errs.push(other.to_string()),
    }
}

fn collect_prefixed(errs: &mut Vec<String>, key: &str, e: Error) {
    match e {
        Error::Config(v) => errs.extend(v.into_iter().map(|m| format!("{key}: {m}"))),
        other => errs.push(format!("{key}: {other}")),
    }
}

/// Evaluates a named preset on the grid nodes.
pub fn preset(grid: &SpatialGrid, name: &str) -> std::result::Result<ScalarField, String> {
    let len = grid.length();
    match name {
        "zero" => Ok(grid.zeros()),
        "sin1" => Ok(grid.sample(|x| (PI * x / len).sin())),
        "neg_sin1" => Ok(grid.sample(|x| -(PI * x / len).sin())),
        _ => {
            let Some(args) = name.strip_prefix("gauss:") else {
                return Err(format!("unknown preset {name:?} (expected zero, sin1, neg_sin1 or gauss:c,w)"));
            };
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            let parsed: Vec<f64> = parts.iter().filter_map(|p| p.parse().ok()).collect();
            match parsed[..] {
                [c, w] if parts.len() == 2 && w > 0.0 && c.is_finite() && w.is_finite() => {
                    Ok(grid.sample(|x| (-((x - c) / w).powi(2)).exp()))
                }
                _ => Err(format!("preset {name:?}: expected gauss:c,w with finite c and w > 0")),
            }
        }
    }
}

fn read_numbers(path: &Path) -> std::result::Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| format!("{}: row {}: {t:?}: {e}", path.display(), i + 1))
                })
                .collect()
        })
        .collect()
}

fn load_field(grid: &SpatialGrid, src: &FieldSource) -> std::result::Result<ScalarField, String> {
    match src {
        FieldSource::Preset(name) => preset(grid, name),
        FieldSource::File(path) => {
            let values: Vec<f64> = read_numbers(path)?.into_iter().flatten().collect();
            if values.len() != grid.n_interior() {
                return Err(format!(
                    "{}: {} values, expected {}",
                    path.display(),
                    values.len(),
                    grid.n_interior()
                ));
            }
            Ok(ScalarField(values))
        }
    }
}

fn load_potential(
    grid: &SpatialGrid,
    time: &TimeGrid,
    src: &PotentialSource,
) -> std::result::Result<SpaceTimeField, String> {
    match src {
        PotentialSource::Constant(a) if a.is_finite() => Ok(SpaceTimeField::constant(grid, time, *a)),
        PotentialSource::Constant(a) => Err(format!("constant {a} is not finite")),
        PotentialSource::File(path) => {
            let rows = read_numbers(path)?;
            if rows.len() != time.n_steps() + 1 || rows.iter().any(|r| r.len() != grid.n_interior()) {
                return Err(format!(
                    "{}: expected {} rows of {} values",
                    path.display(),
                    time.n_steps() + 1,
                    grid.n_interior()
                ));
            }
            Ok(SpaceTimeField {
                slices: rows.into_iter().map(ScalarField).collect(),
            })
        }
    }
}

fn unknown_keys(obj: &serde_json::Map<String, serde_json::Value>, known: &[&str], prefix: &str, errs: &mut Vec<String>) {
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            errs.push(format!("{prefix}{k}: unknown key"));
        }
    }
}

/// Parses configuration text. Key-level problems (unknown, missing,
/// mistyped) are all reported together before semantic validation.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ParsedConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::config(format!("not valid JSON: {e}")))?;
    let Some(obj) = value.as_object() else {
        return Err(Error::config("top level must be a JSON object"));
    };
    let mut errs = Vec::new();
    unknown_keys(obj, KNOWN_KEYS, "", &mut errs);
    for k in REQUIRED_KEYS {
        if !obj.contains_key(*k) {
            errs.push(format!("{k}: required key missing"));
        }
    }
    for (section, known) in [("nash", NASH_KEYS), ("br", BR_KEYS)] {
        match obj.get(section) {
            Some(serde_json::Value::Object(m)) => unknown_keys(m, known, &format!("{section}."), &mut errs),
            Some(_) => errs.push(format!("{section}: must be an object")),
            None => {}
        }
    }
    // per-key type checks so every mistyped key is reported
    let probe = RunConfig::default_1d().to_value();
    for (k, v) in obj {
        if probe.get(k).is_some() {
            let mut trial = probe.clone();
            trial[k] = v.clone();
            if let Err(e) = serde_json::from_value::<RunConfig>(trial) {
                errs.push(format!("{k}: {e}"));
            }
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let run: RunConfig = serde_json::from_value(value).map_err(|e| Error::config(e.to_string()))?;
    run.build(base)
}

/// Reads and validates a configuration file; relative data paths are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    let base = base.canonicalize().unwrap_or(base);
    parse_config_str(&text, &base)
}
