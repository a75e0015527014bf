//! Compressed sparse rows for the master-equation right-hand side.
//!
//! Model operators have a handful of nonzeros per row, so products with the
//! dense density matrix are done row by row on raw slices.

use ndarray::Array2;
use num_complex::Complex64 as C64;

#[derive(Clone, Debug)]
pub(crate) struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    pub(crate) fn from_dense(m: &Array2<C64>) -> Self {
        let n = m.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut vals = Vec::new();
        indptr.push(0);
        for row in m.rows() {
            for (j, v) in row.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    vals.push(*v);
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, vals }
    }

    #[cfg(test)]
    pub(crate) fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub(crate) fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Conjugate transpose.
    pub(crate) fn dagger(&self) -> Self {
        let mut t = Array2::<C64>::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t[[j, i]] = v.conj();
            }
        }
        Self::from_dense(&t)
    }

    /// Largest absolute row sum.
    pub(crate) fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `out += c · A x` for a dense row-major `x`.
    pub(crate) fn lmul_acc(&self, c: C64, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, v) in self.row(i) {
                let s = c * v;
                let xrow = &x[k * n..(k + 1) * n];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += s * xv;
                }
            }
        }
    }

    /// `out += c · x A` for a dense row-major `x`.
    pub(crate) fn rmul_acc(&self, c: C64, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let xrow = &x[i * n..(i + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, xv) in xrow.iter().enumerate() {
                if *xv == C64::new(0.0, 0.0) {
                    continue;
                }
                let s = c * xv;
                for (j, v) in self.row(k) {
                    orow[j] += s * v;
                }
            }
        }
    }

    /// Tr[x A] for a dense row-major `x`.
    pub(crate) fn trace_with(&self, x: &[C64]) -> C64 {
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for (j, v) in self.row(i) {
                acc += v * x[j * n + i];
            }
        }
        acc
    }
}
