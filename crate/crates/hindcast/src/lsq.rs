//! Sparse linear least-squares backend.
//!
//! The weighted stages assemble one overdetermined system `A x ≈ b` per
//! solve. The backend contract is deterministic minimization of `‖Ax - b‖₂`;
//! the default route is column-equilibrated normal equations factored by a
//! sparse Cholesky, polished with two refinement sweeps whose residuals are
//! computed through `A` itself (corrected seminormal equations). A sparse QR
//! route is available for cross-checks.
//!
//! All factorizations run sequentially so that repeated runs are bit
//! identical.

use crate::{Error, Result};
use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::sparse::linalg::solvers::{Llt, Qr, SymbolicLlt, SymbolicQr};
use faer::sparse::{SparseColMat, Triplet};

/// Factorization route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LsqMethod {
    /// Column-scaled normal equations, sparse LLT, refined through `A`.
    #[default]
    NormalEquations,
    /// Sparse Householder QR of `A` itself.
    Qr,
}

/// Incremental row builder for a sparse least-squares system.
#[derive(Debug)]
pub struct LsqBuilder {
    ncols: usize,
    nrows: usize,
    triplets: Vec<Triplet<usize, usize, f64>>,
}

impl LsqBuilder {
    pub fn new(ncols: usize) -> Self {
        LsqBuilder {
            ncols,
            nrows: 0,
            triplets: Vec::new(),
        }
    }

    /// Appends one residual row; returns its index for RHS bookkeeping.
    pub fn add_row(&mut self, entries: &[(usize, f64)]) -> usize {
        let row = self.nrows;
        for &(col, val) in entries {
            debug_assert!(col < self.ncols);
            if val != 0.0 {
                self.triplets.push(Triplet::new(row, col, val));
            }
        }
        self.nrows += 1;
        row
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Builds and factorizes the system matrix.
    pub fn factorize(self, method: LsqMethod) -> Result<LsqSolver> {
        faer::set_global_parallelism(faer::Par::Seq);
        if self.nrows < self.ncols {
            return Err(Error::solver(format!(
                "underdetermined system: {} rows < {} cols",
                self.nrows, self.ncols
            )));
        }

        // Column scaling x_j = d_j y_j with d_j = 1/‖A e_j‖.
        let mut col_norm2 = vec![0.0f64; self.ncols];
        for t in &self.triplets {
            col_norm2[t.col] += t.val * t.val;
        }
        let d: Vec<f64> = col_norm2
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 1.0 })
            .collect();

        let scaled: Vec<Triplet<usize, usize, f64>> = self
            .triplets
            .iter()
            .map(|t| Triplet::new(t.row, t.col, t.val * d[t.col]))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.nrows, self.ncols, &scaled)
            .map_err(|e| Error::solver(format!("matrix assembly failed: {e:?}")))?;
        let at_triplets: Vec<Triplet<usize, usize, f64>> = scaled
            .iter()
            .map(|t| Triplet::new(t.col, t.row, t.val))
            .collect();
        let at =
            SparseColMat::<usize, f64>::try_new_from_triplets(self.ncols, self.nrows, &at_triplets)
                .map_err(|e| Error::solver(format!("matrix assembly failed: {e:?}")))?;

        let factor = match method {
            LsqMethod::NormalEquations => {
                let ata = &at * &a;
                let mut llt = None;
                // The equilibrated normal matrix has unit diagonal; bump the
                // shift until the Cholesky goes through.
                for shift in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
                    let shifted = if shift == 0.0 {
                        ata.clone()
                    } else {
                        let mut t: Vec<Triplet<usize, usize, f64>> =
                            (0..self.ncols).map(|j| Triplet::new(j, j, shift)).collect();
                        t.extend(to_triplets(&ata));
                        SparseColMat::try_new_from_triplets(self.ncols, self.ncols, &t)
                            .map_err(|e| Error::solver(format!("shifted assembly: {e:?}")))?
                    };
                    let sym = SymbolicLlt::try_new(shifted.symbolic(), faer::Side::Lower)
                        .map_err(|e| Error::solver(format!("symbolic factorization: {e:?}")))?;
                    match Llt::try_new_with_symbolic(sym, shifted.as_ref(), faer::Side::Lower) {
                        Ok(f) => {
                            llt = Some(f);
                            break;
                        }
                        Err(_) => continue,
                    }
                }
                let llt = llt.ok_or_else(|| {
                    Error::solver("normal equations not positive definite at any shift")
                })?;
                Factor::Llt(llt)
            }
            LsqMethod::Qr => {
                let sym = SymbolicQr::try_new(a.symbolic())
                    .map_err(|e| Error::solver(format!("symbolic QR: {e:?}")))?;
                let qr = Qr::try_new_with_symbolic(sym, a.as_ref())
                    .map_err(|e| Error::solver(format!("numeric QR: {e:?}")))?;
                Factor::Qr(qr)
            }
        };

        Ok(LsqSolver {
            a,
            at,
            d,
            factor,
            nrows: self.nrows,
            ncols: self.ncols,
        })
    }
}

enum Factor {
    Llt(Llt<usize, f64>),
    Qr(Qr<usize, f64>),
}

/// Factorized least-squares operator; one factorization serves any number of
/// right-hand sides.
pub struct LsqSolver {
    a: SparseColMat<usize, f64>,
    at: SparseColMat<usize, f64>,
    d: Vec<f64>,
    factor: Factor,
    nrows: usize,
    ncols: usize,
}

impl LsqSolver {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Minimizes `‖A x - b‖₂` for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.nrows {
            return Err(Error::solver(format!(
                "rhs length {} does not match row count {}",
                b.len(),
                self.nrows
            )));
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let b_mat = faer::Mat::from_fn(self.nrows, 1, |i, _| b[i]);
        let y = match &self.factor {
            Factor::Qr(qr) => qr.solve_lstsq(&b_mat),
            Factor::Llt(llt) => {
                let atb = &self.at * &b_mat;
                let mut y = llt.solve(&atb);
                // Two refinement sweeps with residuals through A.
                for _ in 0..2 {
                    let r = &b_mat - &self.a * &y;
                    let atr = &self.at * &r;
                    let dy = llt.solve(&atr);
                    y += &dy;
                }
                y
            }
        };
        let x: Vec<f64> = (0..self.ncols).map(|j| self.d[j] * y[(j, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver("least-squares solution is not finite"));
        }
        Ok(x)
    }

    /// `‖A x - b‖₂` for a candidate solution in the original variables.
    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let y = faer::Mat::from_fn(self.ncols, 1, |j, _| x[j] / self.d[j]);
        let ax = &self.a * &y;
        (0..self.nrows)
            .map(|i| {
                let r = ax[(i, 0)] - b[i];
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn to_triplets(m: &SparseColMat<usize, f64>) -> Vec<Triplet<usize, usize, f64>> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        let range = m.symbolic().col_range(j);
        let rows = m.symbolic().row_idx_of_col_raw(j);
        for (k, &i) in rows.iter().enumerate() {
            out.push(Triplet::new(i, j, m.val()[range.start + k]));
        }
    }
    out
}
