use std::collections::BTreeMap;

use synsrl_tensor::{Scalar, Tensor, TensorError};

use crate::encoder::ParamStore;
use crate::error::{Error, Result};

/// Adadelta with running averages of squared gradients and squared
/// updates, keyed by parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct Adadelta<T: Scalar = f64> {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
    eg2: BTreeMap<String, Tensor<T>>,
    edx2: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for Adadelta<T> {
    fn default() -> Self {
        Self::new(0.95, 1e-6, 1.0)
    }
}

impl<T: Scalar> Adadelta<T> {
    pub fn new(rho: f64, eps: f64, lr: f64) -> Self {
        Adadelta {
            rho,
            eps,
            lr,
            eg2: BTreeMap::new(),
            edx2: BTreeMap::new(),
        }
    }

    /// `E[g^2]` for a parameter, if it has been updated.
    pub fn eg2(&self, name: &str) -> Option<&Tensor<T>> {
        self.eg2.get(name)
    }

    /// `E[dx^2]` for a parameter, if it has been updated.
    pub fn edx2(&self, name: &str) -> Option<&Tensor<T>> {
        self.edx2.get(name)
    }

    pub fn state(&self) -> impl Iterator<Item = (&str, &Tensor<T>, &Tensor<T>)> {
        self.eg2.iter().map(|(k, a)| (k.as_str(), a, &self.edx2[k]))
    }

    pub fn restore(&mut self, name: &str, eg2: Tensor<T>, edx2: Tensor<T>) {
        self.eg2.insert(name.to_string(), eg2);
        self.edx2.insert(name.to_string(), edx2);
    }

    /// One update of every parameter that received a gradient.
    pub fn update(&mut self, params: &mut ParamStore<T>, grads: &[(String, Tensor<T>)]) -> Result<()> {
        let (rho, eps, lr) = (T::from_f64(self.rho), T::from_f64(self.eps), T::from_f64(self.lr));
        let one = T::one();
        for (name, grad) in grads {
            let p = params
                .get_mut(name)
                .ok_or_else(|| Error::Checkpoint(format!("gradient for unknown parameter {name}")))?;
            if p.shape() != grad.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adadelta",
                    left: p.shape().to_vec(),
                    right: grad.shape().to_vec(),
                }
                .into());
            }
            let zeros = || Tensor::zeros(grad.shape().to_vec()).expect("valid shape");
            let eg2 = self.eg2.entry(name.clone()).or_insert_with(zeros);
            let edx2 = self.edx2.entry(name.clone()).or_insert_with(zeros);
            let (eg2, edx2) = (eg2.data_mut(), edx2.data_mut());
            for (i, (x, &g)) in p.data_mut().iter_mut().zip(grad.data()).enumerate() {
                eg2[i] = rho * eg2[i] + (one - rho) * g * g;
                let dx = (edx2[i] + eps).sqrt() / (eg2[i] + eps).sqrt() * g;
                edx2[i] = rho * edx2[i] + (one - rho) * dx * dx;
                *x = *x - lr * dx;
            }
        }
        Ok(())
    }
}
