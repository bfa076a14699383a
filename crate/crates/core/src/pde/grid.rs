//! Grids, nodal fields and control-region masks on the interval `(0, length)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of interior nodes on `(0, length)` with homogeneous Dirichlet
/// boundary values. Node `j` (0-based) sits at `x = (j + 1) * h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    length: f64,
    n_interior: usize,
    h: f64,
}

impl SpatialGrid {
    pub fn new(length: f64, n_interior: usize) -> Result<Self> {
        let mut errs = Vec::new();
        if !(length.is_finite() && length > 0.0) {
            errs.push(format!("domain_length = {length}: must be finite and > 0"));
        }
        if n_interior < 3 {
            errs.push(format!("n_interior = {n_interior}: must be >= 3"));
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Self {
            length,
            n_interior,
            h: length / (n_interior + 1) as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of interior node `j` (0-based).
    pub fn node(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_interior).map(move |j| self.node(j))
    }

    /// Samples `f` at every interior node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField(self.nodes().map(f).collect())
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField(vec![0.0; self.n_interior])
    }

    pub fn check(&self, f: &ScalarField, what: &str) -> Result<()> {
        if f.len() != self.n_interior {
            return Err(Error::Structure(format!(
                "{what} has {} values, grid has {} interior nodes",
                f.len(),
                self.n_interior
            )));
        }
        Ok(())
    }

    /// Rectangle-rule pairing `h * sum_j f_j g_j`.
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.check(f, "left operand")?;
        self.check(g, "right operand")?;
        Ok(self.h * dot(&f.0, &g.0))
    }

    pub fn norm(&self, f: &ScalarField) -> Result<f64> {
        Ok(self.inner(f, f)?.sqrt())
    }

    /// Unchecked variants for internal loops where shapes are already validated.
    pub(crate) fn inner_unchecked(&self, f: &[f64], g: &[f64]) -> f64 {
        self.h * dot(f, g)
    }

    pub(crate) fn norm_unchecked(&self, f: &[f64]) -> f64 {
        self.inner_unchecked(f, f).sqrt()
    }
}

fn dot(f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// Uniform time grid `t_k = k * dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        let mut errs = Vec::new();
        if !(horizon.is_finite() && horizon > 0.0) {
            errs.push(format!("horizon = {horizon}: must be finite and > 0"));
        }
        if n_steps < 1 {
            errs.push("n_steps = 0: must be >= 1".to_string());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Self {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Nodal values on the interior nodes of a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField(self.0.iter().map(|v| c * v).collect())
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        ScalarField(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// One [`ScalarField`] per time node (or per time interval, for controls).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub slices: Vec<ScalarField>,
}

/// Space-time solution of a forward, linearized or adjoint solve; slice `k`
/// holds the field at `t_k`.
pub type Trajectory = SpaceTimeField;

impl SpaceTimeField {
    pub fn constant(grid: &SpatialGrid, time: &TimeGrid, value: f64) -> Self {
        Self {
            slices: vec![ScalarField(vec![value; grid.n_interior()]); time.n_steps() + 1],
        }
    }

    pub fn zeros(grid: &SpatialGrid, time: &TimeGrid) -> Self {
        Self::constant(grid, time, 0.0)
    }

    pub fn terminal(&self) -> &ScalarField {
        self.slices.last().expect("space-time field has no slices")
    }

    /// Checks that there is one slice per time node, each on `grid`.
    pub fn check_nodes(&self, grid: &SpatialGrid, time: &TimeGrid, what: &str) -> Result<()> {
        if self.slices.len() != time.n_steps() + 1 {
            return Err(Error::Structure(format!(
                "{what} has {} time slices, expected {}",
                self.slices.len(),
                time.n_steps() + 1
            )));
        }
        self.slices.iter().try_for_each(|s| grid.check(s, what))
    }

    pub fn max_abs_diff(&self, other: &SpaceTimeField) -> f64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .flat_map(|(a, b)| a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Characteristic function of an open subinterval `(left, right)` sampled on
/// the interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainMask {
    left: f64,
    right: f64,
    flags: Vec<bool>,
}

impl SubdomainMask {
    /// Builds the mask of `(left, right)`; an interval that captures no
    /// interior node is rejected.
    pub fn new(grid: &SpatialGrid, left: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && 0.0 <= left && left < right && right <= grid.length()) {
            return Err(Error::config(format!(
                "interval ({left}, {right}): need 0 <= left < right <= {}",
                grid.length()
            )));
        }
        let flags: Vec<bool> = grid.nodes().map(|x| left < x && x < right).collect();
        if !flags.iter().any(|&f| f) {
            return Err(Error::config(format!(
                "interval ({left}, {right}) contains no interior node at h = {}",
                grid.h()
            )));
        }
        Ok(Self { left, right, flags })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn contains(&self, j: usize) -> bool {
        self.flags[j]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Indices of the nodes inside the region.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, &f)| f).map(|(j, _)| j)
    }

    pub fn disjoint(&self, other: &SubdomainMask) -> bool {
        self.flags.iter().zip(&other.flags).all(|(a, b)| !(a & b))
    }

    /// `chi * f`: zero outside the region.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        ScalarField(
            f.0.iter()
                .zip(&self.flags)
                .map(|(&v, &m)| if m { v } else { 0.0 })
                .collect(),
        )
    }
}
