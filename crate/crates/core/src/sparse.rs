use crate::linalg::{C64, Vector, ZERO};

/// Compressed sparse row matrix, square.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<C64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(n: usize, mut trip: Vec<(u32, u32, C64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = CsrMatrix { n, row_ptr, cols, vals };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != ZERO {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        let mut y = Vector::zeros(self.n);
        for r in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> crate::linalg::Mat {
        let mut m = crate::linalg::Mat::zeros((self.n, self.n));
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[[r, self.cols[k] as usize]] += self.vals[k];
            }
        }
        m
    }

    /// Largest deviation from Hermiticity, `max |A_rc - conj(A_cr)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let get = |r: usize, c: usize| -> C64 {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            match self.cols[lo..hi].binary_search(&(c as u32)) {
                Ok(k) => self.vals[lo + k],
                Err(_) => ZERO,
            }
        };
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                worst = worst.max((self.vals[k] - get(c, r).conj()).norm());
            }
        }
        worst
    }
}
