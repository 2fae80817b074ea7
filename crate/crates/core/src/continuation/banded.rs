use nalgebra::DMatrix;

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Each row keeps
/// `kl` extra slots on the right for the fill-in produced by row pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        (j + self.kl >= i && j <= i + self.ku + self.kl && j < self.n).then(|| i * self.width + j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics outside the stored band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = value;
    }

    fn columns(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku + self.kl).min(self.n - 1)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.columns(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self + shift · I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.add(i, i, shift);
        }
        out
    }

    /// `scale · self`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= scale);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in self.columns(i) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Gaussian elimination with partial pivoting. Zero pivots are recorded
    /// rather than rejected; see [`BandedLu::min_pivot_ratio`].
    pub fn lu(&self) -> BandedLu {
        let scale = self.max_abs();
        let mut a = self.clone();
        let (n, kl) = (self.n, self.kl);
        let mut lower = vec![0.0; n * kl];
        let mut piv = vec![0; n];
        let mut sign = 1.0;
        let mut log_abs_det = 0.0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&x, &y| a.get(x, k).abs().total_cmp(&a.get(y, k).abs()))
                .unwrap_or(k);
            piv[k] = p;
            let right = (k + self.ku + kl).min(n - 1);
            if p != k {
                for j in k..=right {
                    let (x, y) = (a.get(k, j), a.get(p, j));
                    a.set(k, j, y);
                    a.set(p, j, x);
                }
                sign = -sign;
            }
            let pivot = a.get(k, k);
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == 0.0 {
                sign = 0.0;
                log_abs_det = f64::NEG_INFINITY;
                continue;
            }
            sign *= pivot.signum();
            log_abs_det += pivot.abs().ln();
            for i in k + 1..=last {
                let m = a.get(i, k) / pivot;
                lower[k * kl + (i - k - 1)] = m;
                a.set(i, k, 0.0);
                if m != 0.0 {
                    for j in k + 1..=right {
                        let v = a.get(k, j);
                        a.add(i, j, -m * v);
                    }
                }
            }
        }
        BandedLu { a, lower, piv, sign, log_abs_det, min_pivot_ratio: if scale > 0.0 { min_pivot / scale } else { 0.0 } }
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    a: BandedMatrix,
    lower: Vec<f64>,
    piv: Vec<usize>,
    sign: f64,
    log_abs_det: f64,
    min_pivot_ratio: f64,
}

impl BandedLu {
    /// Sign of the determinant (0 when a pivot vanished).
    pub fn det_sign(&self) -> f64 {
        self.sign
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// Smallest `|pivot|` relative to the largest matrix entry.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    /// Index of the first vanishing pivot.
    pub fn zero_pivot(&self) -> Option<usize> {
        (0..self.a.n).find(|&k| self.a.get(k, k) == 0.0)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl) = (self.a.n, self.a.kl);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            let end = (k + kl).min(n - 1);
            for (bi, l) in b[k + 1..=end].iter_mut().zip(&self.lower[k * kl..]) {
                *bi -= l * bk;
            }
        }
        for k in (0..n).rev() {
            let right = (k + self.a.ku + kl).min(n - 1);
            let s: f64 = (k + 1..=right).map(|j| self.a.get(k, j) * b[j]).sum();
            b[k] = (b[k] - s) / self.a.get(k, k);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
