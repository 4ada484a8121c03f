use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Denominator floor for relative errors. Below this magnitude the error
/// is effectively absolute, which keeps near-zero gradients from
/// amplifying rounding noise.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// Outcome of [`grad_check`]: one maximum relative error per input.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: Vec<f64>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error.iter().all(|&e| e < self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().copied().fold(0.0, f64::max)
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `f` may return a tensor of any shape; it is reduced to a scalar with a
/// fixed pseudo-random weighting so that no gradient component cancels by
/// symmetry (e.g. the rows of a softmax). `f` must be deterministic.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&Graph<f64>, &[Var]) -> Result<Var>,
{
    let weights = {
        let g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&g, &vars)?;
        let shape = g.shape(out);
        let mut rng = Rng::seed(0x6772_6164);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect())?
    };

    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&g, &vars)?;
        let w = g.constant(weights.clone());
        let loss = g.sum(g.mul(out, w)?);
        Ok(g.value(loss).data()[0])
    };

    let g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&g, &vars)?;
    let w = g.constant(weights.clone());
    let loss = g.sum(g.mul(out, w)?);
    let grads = g.backward(loss)?;

    let mut report = GradCheckReport {
        max_rel_error: Vec::with_capacity(inputs.len()),
        tolerance: tol,
    };
    let mut probe = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let zeros = Tensor::zeros(inputs[k].shape().to_vec())?;
        let analytic = grads.get(*var).unwrap_or(&zeros);
        let mut worst: f64 = 0.0;
        for idx in 0..inputs[k].numel() {
            let orig = inputs[k].data()[idx];
            probe[k].data_mut()[idx] = orig + h;
            let plus = eval(&probe)?;
            probe[k].data_mut()[idx] = orig - h;
            let minus = eval(&probe)?;
            probe[k].data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_error(analytic.data()[idx], numeric));
        }
        report.max_rel_error.push(worst);
    }
    Ok(report)
}
