//! Thomas algorithm for tridiagonal systems.

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in place.
///
/// `lower[0]` and `upper[n-1]` are ignored. On return `rhs` holds the
/// solution and `upper` has been overwritten with the eliminated
/// super-diagonal. Returns `false` if a zero pivot was met.
pub fn solve_in_place(lower: &[f64], diag: &[f64], upper: &mut [f64], rhs: &mut [f64]) -> bool {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return true;
    }
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return false;
    }
    upper[0] /= pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * upper[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return false;
        }
        upper[i] /= pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= upper[i] * rhs[i + 1];
    }
    true
}

/// Reusable storage for repeated tridiagonal solves of a fixed size.
#[derive(Debug, Clone, Default)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Tridiag {
    pub fn new(n: usize) -> Self {
        Tridiag {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn resize(&mut self, n: usize) {
        self.lower.resize(n, 0.0);
        self.diag.resize(n, 0.0);
        self.upper.resize(n, 0.0);
        self.rhs.resize(n, 0.0);
    }

    /// Solves the assembled system; the solution is left in `rhs`.
    pub fn solve(&mut self) -> bool {
        solve_in_place(&self.lower, &self.diag, &mut self.upper, &mut self.rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solves_small_system() {
        // [2 1 0; 1 2 1; 0 1 2] x = [3 4 3] -> x = [1 1 1]
        let lower = [0.0, 1.0, 1.0];
        let diag = [2.0, 2.0, 2.0];
        let mut upper = [1.0, 1.0, 0.0];
        let mut rhs = [3.0, 4.0, 3.0];
        assert!(solve_in_place(&lower, &diag, &mut upper, &mut rhs));
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let mut t = Tridiag::new(2);
        t.diag = vec![0.0, 1.0];
        assert!(!t.solve());
    }

    proptest! {
        #[test]
        fn diagonally_dominant_residual(
            n in 1usize..40,
            seed in proptest::collection::vec(-1.0f64..1.0, 160)
        ) {
            let lower: Vec<f64> = (0..n).map(|i| seed[i]).collect();
            let upper0: Vec<f64> = (0..n).map(|i| seed[40 + i]).collect();
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + seed[80 + i]).collect();
            let b: Vec<f64> = (0..n).map(|i| seed[120 + i]).collect();
            let mut upper = upper0.clone();
            let mut x = b.clone();
            prop_assert!(solve_in_place(&lower, &diag, &mut upper, &mut x));
            for i in 0..n {
                let mut ax = diag[i] * x[i];
                if i > 0 { ax += lower[i] * x[i - 1]; }
                if i + 1 < n { ax += upper0[i] * x[i + 1]; }
                prop_assert!((ax - b[i]).abs() < 1e-12);
            }
        }
    }
}
