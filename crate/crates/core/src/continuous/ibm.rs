//! Integrated Brownian motion with the path and its derivative observed.

use std::sync::Arc;

use super::{ClosedFormSolution, ContinuousModel, Family, Jet};
use crate::error::{Error, Result};
use crate::measures::VectorMeasure;

pub(super) fn operator(model: &ContinuousModel, g: Jet) -> Result<VectorMeasure> {
    let (a, b) = model.interval();
    if a <= 0.0 {
        return Err(Error::InvalidInterval { a, b });
    }
    let z_a = g(a, 3) - 6.0 / (a * a) * g(a, 1) + 12.0 / (a * a * a) * g(a, 0);
    let z1_a = -g(a, 2) + 4.0 / a * g(a, 1) - 6.0 / (a * a) * g(a, 0);
    let z_b = -g(b, 3);
    let z1_b = g(b, 2);
    let values = model
        .empty()?
        .with_atom(a, z_a)?
        .with_atom(b, z_b)?
        .with_density(1.0, move |t| g(t, 4));
    let slopes = model.empty()?.with_atom(a, z1_a)?.with_atom(b, z1_b)?;
    VectorMeasure::new(vec![values, slopes])
}

pub(super) fn target_jet(t0: f64, p: u8) -> Jet {
    Arc::new(move |s, k| match (s <= t0, p, k) {
        // s ≤ t0: K = s² t0 / 2 - s³ / 6.
        (true, 0, 0) => s * s * t0 / 2.0 - s * s * s / 6.0,
        (true, 0, 1) => s * t0 - s * s / 2.0,
        (true, 0, 2) => t0 - s,
        (true, 0, 3) => -1.0,
        (true, 1, 0) => s * s / 2.0,
        (true, 1, 1) => s,
        (true, 1, 2) => 1.0,
        // s > t0: K = t0² s / 2 - t0³ / 6.
        (false, 0, 0) => t0 * t0 * s / 2.0 - t0 * t0 * t0 / 6.0,
        (false, 0, 1) => t0 * t0 / 2.0,
        (false, 1, 0) => t0 * s - t0 * t0 / 2.0,
        (false, 1, 1) => t0,
        (_, p, _) if p > 1 => f64::NAN,
        _ => 0.0,
    })
}

pub(super) fn closed_form_target(model: &ContinuousModel, t0: f64, p: u8) -> Result<Option<VectorMeasure>> {
    let (_, b) = model.interval();
    if p != 0 || t0 <= b {
        return Ok(None);
    }
    let values = model.empty()?.with_atom(b, 1.0)?;
    let slopes = model.empty()?.with_atom(b, t0 - b)?;
    Ok(Some(VectorMeasure::new(vec![values, slopes])?))
}

/// BLUP of `y(t0)` under integrated Brownian motion observed on `[a, b]`, `a > 0`.
pub fn ibm_blup(model: &ContinuousModel, t0: f64) -> Result<ClosedFormSolution> {
    if !matches!(model.family(), Family::Integrated) {
        return Err(Error::Unsupported(format!(
            "{:?} is not integrated Brownian motion",
            model.kernel()
        )));
    }
    model.blup(t0, 0)
}

/// Tabulated location-scale MSE `t0³/3 - t0 b (t0 - b/2)`; kept for
/// comparison against the generic evaluator, which disagrees with it.
pub fn ibm_printed_mse(b: f64, t0: f64) -> f64 {
    t0.powi(3) / 3.0 - t0 * b * (t0 - b / 2.0)
}
