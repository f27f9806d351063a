//! Markovian kernels `K(t, s) = u(min) v(max)`.

use std::sync::Arc;

use super::{ContinuousModel, Family, Jet, TargetMeasure};
use crate::error::{Error, Result};
use crate::kernels::MarkovFns;
use crate::measures::VectorMeasure;
use crate::numerics::DenseMatrix;

/// ζ for a right-hand side `g`: atoms at both ends plus a density built from
/// `h = g / v`.
pub(super) fn operator(model: &ContinuousModel, m: &MarkovFns, g: Jet) -> Result<VectorMeasure> {
    let (a, b) = model.interval();
    let [ua, ua1, _] = m.u(a);
    let [va, _, _] = m.v(a);
    let qa1 = m.q(a)[1];
    let ga = g(a, 0);
    let ratio = if ua == 0.0 && ga == 0.0 { g(a, 1) } else { ga * ua1 / ua };
    let z_a = (ratio - g(a, 1)) / (va * va * qa1);
    let [vb, _, _] = m.v(b);
    let z_b = h_derivs(m, &g, b)[1] / (vb * m.q(b)[1]);
    if !z_a.is_finite() || !z_b.is_finite() {
        return Err(Error::Singular(format!(
            "unbounded boundary weight for {} on [{a}, {b}]",
            m.name()
        )));
    }
    let fns = m.clone();
    let density = move |t: f64| {
        let [_, h1, h2] = h_derivs(&fns, &g, t);
        let [_, q1, q2] = fns.q(t);
        -(h2 * q1 - h1 * q2) / (q1 * q1 * fns.v(t)[0])
    };
    let zeta = model
        .empty()?
        .with_atom(a, z_a)?
        .with_atom(b, z_b)?
        .with_density(1.0, density);
    Ok(VectorMeasure::scalar(zeta))
}

/// `h = g / v` and its first two derivatives.
fn h_derivs(m: &MarkovFns, g: &Jet, t: f64) -> [f64; 3] {
    let [v, v1, v2] = m.v(t);
    let w = 1.0 / v;
    let w1 = -v1 / (v * v);
    let w2 = (2.0 * v1 * v1 - v * v2) / (v * v * v);
    let (g0, g1, g2) = (g(t, 0), g(t, 1), g(t, 2));
    [g0 * w, g1 * w + g0 * w1, g2 * w + 2.0 * g1 * w1 + g0 * w2]
}

pub(super) fn target_jet(m: MarkovFns, t0: f64) -> Jet {
    Arc::new(move |s, k| {
        if k > 2 {
            return f64::NAN;
        }
        if s <= t0 {
            m.u(s)[k] * m.v(t0)[0]
        } else {
            m.u(t0)[0] * m.v(s)[k]
        }
    })
}

/// Tabulated two-atom target measure for `t0 > b`.
pub(super) fn closed_form_target(model: &ContinuousModel, m: &MarkovFns, t0: f64) -> Result<Option<VectorMeasure>> {
    let (a, b) = model.interval();
    if t0 <= b {
        return Ok(None);
    }
    let [_, ua1, _] = m.u(a);
    let [va, _, _] = m.v(a);
    let v0 = m.v(t0)[0];
    let z_a = (1.0 - ua1) / (va * va * m.q(a)[1]) * v0;
    let z_b = v0 / m.v(b)[0];
    let zeta = model.empty()?.with_atom(a, z_a)?.with_atom(b, z_b)?;
    Ok(Some(VectorMeasure::scalar(zeta)))
}

fn require_markov(model: &ContinuousModel) -> Result<()> {
    match model.family() {
        Family::Markov(_) => Ok(()),
        _ => Err(Error::Unsupported(format!("{:?} is not Markovian", model.kernel()))),
    }
}

/// Trend measures `ζ_j` and their information matrix `C`.
pub fn markovian_zeta(model: &ContinuousModel) -> Result<(Vec<VectorMeasure>, DenseMatrix)> {
    require_markov(model)?;
    let system = model.trend_system()?;
    Ok((system.zeta, system.information))
}

/// Target measure for `y(t0)`, recording whether the tabulated coefficients
/// or the general operator produced it.
pub fn markovian_zeta_t0(model: &ContinuousModel, t0: f64) -> Result<TargetMeasure> {
    require_markov(model)?;
    model.target_measure(t0, 0)
}
