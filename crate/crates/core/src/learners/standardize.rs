use crate::linalg::Matrix;
use crate::numeric::Scalar;

/// Per-column z-scoring fit on a training matrix. Constant columns are only centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<F> {
    mean: Vec<F>,
    scale: Vec<F>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn fit(x: &Matrix<F>) -> Self {
        let n = F::from_count(x.rows().max(1));
        let p = x.cols();
        let mut mean = vec![F::zero(); p];
        for row in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![F::zero(); p];
        for row in x.iter_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > F::epsilon() * F::lit(1e3) {
                    sd
                } else {
                    F::one()
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[F]) -> Vec<F> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix<F>) -> Matrix<F> {
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            out.extend(self.transform_row(row));
        }
        Matrix::from_vec(x.rows(), x.cols(), out)
    }
}
