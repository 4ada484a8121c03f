//! Dense tensors, a tape-recorded computation graph with reverse-mode
//! gradients, a finite-difference gradient checker and a flat checkpoint
//! archive format.
//!
//! Values live in [`Tensor`]. Differentiable computations are recorded on a
//! [`Graph`], which hands out lightweight [`Var`] handles:
//!
//! ```
//! use synsrl_tensor::{Graph, Tensor};
//!
//! let g = Graph::<f64>::new();
//! let x = g.param(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
//! let y = g.relu(x);
//! let loss = g.sum(y);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0, 1.0]);
//! ```

mod archive;
mod error;
mod gradcheck;
mod graph;
mod rng;
mod scalar;
mod tensor;

pub use archive::{read_archive, write_archive, ArchiveEntry};
pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, GradCheckReport, REL_ERROR_FLOOR};
pub use graph::{Gradients, Graph, Var};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;
