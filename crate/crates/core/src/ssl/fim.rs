//! Empirical Fisher-information trace.

use devdiet_nn::Parameterized;

use crate::error::{Error, Result};

/// Mean over `batches` of the summed squared parameter gradients. `accumulate` must add
/// the loss gradient for one batch into the model's gradient buffers. Gradients are
/// cleared before and after; parameters are not modified.
pub fn fim_trace<M: Parameterized + ?Sized, B>(
    model: &mut M,
    batches: &[B],
    mut accumulate: impl FnMut(&mut M, &B) -> Result<()>,
) -> Result<f64> {
    if batches.is_empty() {
        return Err(Error::Argument("Fisher trace needs at least one probe batch".into()));
    }
    let mut total = 0.0;
    for b in batches {
        model.zero_grad();
        accumulate(model, b)?;
        total += model.grad_sq_norm();
    }
    model.zero_grad();
    Ok(total / batches.len() as f64)
}
