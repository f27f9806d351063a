//! Matérn 3/2 kernel with the path and its derivative observed.

use std::sync::Arc;

use super::{ClosedFormSolution, ContinuousModel, Family, Jet};
use crate::error::{Error, Result};
use crate::measures::VectorMeasure;

pub(super) fn operator(model: &ContinuousModel, lambda: f64, g: Jet) -> Result<VectorMeasure> {
    let (a, b) = model.interval();
    let l = lambda;
    let s = 1.0 / (4.0 * l * l * l);
    let z_a = s * (g(a, 3) - 3.0 * l * l * g(a, 1) + 2.0 * l * l * l * g(a, 0));
    let z1_a = s * (-g(a, 2) + 2.0 * l * g(a, 1) - l * l * g(a, 0));
    let z_b = s * (-g(b, 3) + 3.0 * l * l * g(b, 1) + 2.0 * l * l * l * g(b, 0));
    let z1_b = s * (g(b, 2) + 2.0 * l * g(b, 1) + l * l * g(b, 0));
    let density = move |t: f64| s * (l.powi(4) * g(t, 0) - 2.0 * l * l * g(t, 2) + g(t, 4));
    let values = model
        .empty()?
        .with_atom(a, z_a)?
        .with_atom(b, z_b)?
        .with_density(1.0, density);
    let slopes = model.empty()?.with_atom(a, z1_a)?.with_atom(b, z1_b)?;
    VectorMeasure::new(vec![values, slopes])
}

/// `φ^{(k)}(u)` for `φ(u) = (1 + λu) e^{-λu}`.
fn profile(lambda: f64, u: f64, k: usize) -> f64 {
    (-lambda).powi(k as i32) * (-lambda * u).exp() * (1.0 + lambda * u - k as f64)
}

pub(super) fn target_jet(lambda: f64, t0: f64, p: u8) -> Jet {
    let p = p as usize;
    Arc::new(move |s, k| {
        if s <= t0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * profile(lambda, t0 - s, k + p)
        } else {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            sign * profile(lambda, s - t0, k + p)
        }
    })
}

/// Two boundary atoms at `b` for value prediction beyond the interval.
pub(super) fn closed_form_target(
    model: &ContinuousModel,
    lambda: f64,
    t0: f64,
    p: u8,
) -> Result<Option<VectorMeasure>> {
    let (_, b) = model.interval();
    if p != 0 || t0 <= b {
        return Ok(None);
    }
    let d = t0 - b;
    let e = (-lambda * d).exp();
    let values = model.empty()?.with_atom(b, (1.0 + lambda * d) * e)?;
    let slopes = model.empty()?.with_atom(b, d * e)?;
    Ok(Some(VectorMeasure::new(vec![values, slopes])?))
}

/// BLUP of `y^{(p)}(t0)` under the Matérn 3/2 kernel.
pub fn matern32_blup(model: &ContinuousModel, t0: f64, p: u8) -> Result<ClosedFormSolution> {
    if !matches!(model.family(), Family::Matern(_)) {
        return Err(Error::Unsupported(format!("{:?} is not Matérn 3/2", model.kernel())));
    }
    model.blup(t0, p)
}
