//! Dense LU factorization of the simplex basis with product-form (eta) updates.

use alloc::vec;
use alloc::vec::Vec;

const SINGULAR_TOL: f64 = 1e-11;
const ETA_DROP: f64 = 1e-14;

/// Positions of the basis that could not be pivoted, together with rows that
/// were left without a pivot. Both lists have the same length.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pivot: usize,
    pivot_value: f64,
    // off-pivot entries of the transformed entering column
    entries: Vec<(usize, f64)>,
}

/// `B = B0 * E1 * ... * Ek` where `B0` is held as a row-permuted dense LU.
#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    dim: usize,
    // eliminated matrix: U in pivot rows, L multipliers below
    lu: Vec<f64>,
    // row_of_step[k] = row chosen as pivot for basis position k
    row_of_step: Vec<usize>,
    etas: Vec<Eta>,
}

impl BasisFactor {
    /// Factorizes the square matrix whose columns are given densely.
    pub fn factor(columns: &[Vec<f64>]) -> Result<Self, Singular> {
        let m = columns.len();
        let mut lu = vec![0.0; m * m];
        for (k, col) in columns.iter().enumerate() {
            debug_assert_eq!(col.len(), m);
            for (i, &v) in col.iter().enumerate() {
                lu[i * m + k] = v;
            }
        }
        let mut pivoted = vec![false; m];
        let mut row_of_step = vec![usize::MAX; m];
        let mut bad_positions = Vec::new();
        for k in 0..m {
            let mut best = usize::MAX;
            let mut best_abs = SINGULAR_TOL;
            for (i, done) in pivoted.iter().enumerate() {
                if !done {
                    let a = lu[i * m + k].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = i;
                    }
                }
            }
            if best == usize::MAX {
                bad_positions.push(k);
                continue;
            }
            pivoted[best] = true;
            row_of_step[k] = best;
            let piv = lu[best * m + k];
            for i in 0..m {
                if pivoted[i] {
                    continue;
                }
                let a = lu[i * m + k];
                if a == 0.0 {
                    continue;
                }
                let l = a / piv;
                lu[i * m + k] = l;
                let (src, dst) = if best < i {
                    let (lo, hi) = lu.split_at_mut(i * m);
                    (&lo[best * m..best * m + m], &mut hi[..m])
                } else {
                    let (lo, hi) = lu.split_at_mut(best * m);
                    (&hi[..m], &mut lo[i * m..i * m + m])
                };
                for c in k + 1..m {
                    dst[c] -= l * src[c];
                }
            }
        }
        if !bad_positions.is_empty() {
            let rows = (0..m).filter(|&i| !pivoted[i]).collect();
            return Err(Singular { positions: bad_positions, rows });
        }
        Ok(Self { dim: m, lu, row_of_step, etas: Vec::new() })
    }

    pub fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs`; the result is indexed by basis position.
    pub fn ftran(&self, rhs: &mut Vec<f64>) {
        let m = self.dim;
        let v = rhs;
        // forward elimination in pivot order
        for k in 0..m {
            let p = self.row_of_step[k];
            let vp = v[p];
            if vp == 0.0 {
                continue;
            }
            for s in k + 1..m {
                let i = self.row_of_step[s];
                let l = self.lu[i * m + k];
                if l != 0.0 {
                    v[i] -= l * vp;
                }
            }
        }
        let mut out = vec![0.0; m];
        for k in (0..m).rev() {
            let p = self.row_of_step[k];
            let row = &self.lu[p * m..p * m + m];
            let mut sum = v[p];
            for c in k + 1..m {
                sum -= row[c] * out[c];
            }
            out[k] = sum / row[k];
        }
        for eta in &self.etas {
            let vr = out[eta.pivot] / eta.pivot_value;
            out[eta.pivot] = vr;
            if vr != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * vr;
                }
            }
        }
        *v = out;
    }

    /// Solves `y^T B = c^T`; `c` is indexed by basis position, the result by row.
    pub fn btran(&self, c: &mut Vec<f64>) {
        let m = self.dim;
        for eta in self.etas.iter().rev() {
            let mut sum = c[eta.pivot];
            for &(i, a) in &eta.entries {
                sum -= c[i] * a;
            }
            c[eta.pivot] = sum / eta.pivot_value;
        }
        // U^T w = c
        let mut w = vec![0.0; m];
        for k in 0..m {
            let mut sum = c[k];
            for kp in 0..k {
                let u = self.lu[self.row_of_step[kp] * m + k];
                if u != 0.0 {
                    sum -= u * w[kp];
                }
            }
            w[k] = sum / self.lu[self.row_of_step[k] * m + k];
        }
        // L^T ytilde = w
        let mut yt = w;
        for s in (0..m).rev() {
            let mut sum = yt[s];
            for sp in s + 1..m {
                let l = self.lu[self.row_of_step[sp] * m + s];
                if l != 0.0 {
                    sum -= l * yt[sp];
                }
            }
            yt[s] = sum;
        }
        let mut y = vec![0.0; m];
        for s in 0..m {
            y[self.row_of_step[s]] = yt[s];
        }
        *c = y;
    }

    /// Records the replacement of basis position `pivot` by a column whose
    /// FTRAN image is `alpha`.
    pub fn push_eta(&mut self, pivot: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pivot && a.abs() > ETA_DROP)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { pivot, pivot_value: alpha[pivot], entries });
    }
}
