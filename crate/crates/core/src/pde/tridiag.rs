/// Symmetric tridiagonal system with a constant off-diagonal, solved by the
/// Thomas algorithm (no pivoting).
pub(crate) struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl SymTridiag {
    /// Solves `self * x = rhs` in place. Returns the row of the first zero
    /// pivot if elimination breaks down.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) -> Result<(), usize> {
        let n = self.diag.len();
        debug_assert_eq!(rhs.len(), n);
        scratch.clear();
        scratch.resize(n, 0.0);

        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(0);
        }
        rhs[0] /= pivot;
        for i in 1..n {
            scratch[i] = self.off / pivot;
            pivot = self.diag[i] - self.off * scratch[i];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(i);
            }
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i + 1] * rhs[i + 1];
        }
        Ok(())
    }
}
