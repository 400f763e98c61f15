use serde::{Deserialize, Serialize};

use crate::numeric::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    #[inline]
    pub fn eval<F: Scalar>(&self, a: &[F], b: &[F]) -> F {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Rbf { gamma } => {
                let d2 = a
                    .iter()
                    .zip(b)
                    .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
                (-F::lit(gamma) * d2).exp()
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }
}
