//! Dense symmetric matrices and a Cholesky solver, sized for covariance
//! matrices over a few hundred stacks at most.

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * m.n + i] = v;
        }
        m
    }

    /// Builds from row-major data. Returns `None` unless the data is square
    /// and exactly symmetric.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Option<Self> {
        if data.len() != n * n {
            return None;
        }
        let m = Self { n, data };
        for i in 0..n {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return None;
                }
            }
        }
        Some(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self + shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += shift;
        }
        m
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Lower-triangular factor `L` with `self = L Lᵀ`, or `None` when the
    /// matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.n;
        let max_diag = self.diagonal().into_iter().fold(0.0f64, f64::max);
        // max_diag is never NaN: f64::max skips NaN operands
        if n == 0 || max_diag <= 0.0 || !max_diag.is_finite() {
            return None;
        }
        let tol = n as f64 * f64::EPSILON * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = self.get(j, j);
            for k in 0..j {
                pivot -= l[j * n + k] * l[j * n + k];
            }
            if pivot.is_nan() || pivot <= tol {
                return None;
            }
            let root = pivot.sqrt();
            l[j * n + j] = root;
            for i in j + 1..n {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / root;
            }
        }
        Some(Cholesky { n, l })
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solves `L y = b`.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let v = row.iter().zip(&y[..i]).fold(b[i], |v, (l, yk)| v - l * yk);
            y[i] = v / self.l[i * n + i];
        }
        y
    }

    /// `bᵀ A⁻¹ b` as `‖L⁻¹ b‖²`.
    pub fn quadratic_form(&self, b: &[f64]) -> f64 {
        self.forward(b).iter().fold(0.0, |acc, y| acc + y * y)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let v = x[i + 1..]
                .iter()
                .enumerate()
                .fold(x[i], |v, (o, xk)| v - self.l[(i + 1 + o) * n + i] * xk);
            x[i] = v / self.l[i * n + i];
        }
        x
    }
}
