//! BLUP from a continuously observed path (and, for once-differentiable
//! kernels, its derivative) on an interval.
//!
//! Every predictor is a [`VectorMeasure`]. The trend part is carried by one
//! measure per trend component solving `∫ K(t, s) ζ(dt) = f(s)`; the target
//! part by a measure reproducing the target's covariance with the path.

mod ibm;
mod markov;
mod matern;

use std::sync::Arc;

use nalgebra::DVector;

use crate::discrete::Target;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, MarkovFns, Pattern, Point};
use crate::measures::{SignedMeasure, VectorMeasure};
use crate::numerics::{default_panels, DenseMatrix, SpdFactor};
use crate::trend::Trend;

pub use ibm::{ibm_blup, ibm_printed_mse};
pub use markov::{markovian_zeta, markovian_zeta_t0};
pub use matern::matern32_blup;

/// Derivatives `g^{(k)}(t)` of a scalar function, `k ≤ 4`.
pub(crate) type Jet = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;

/// Largest residual accepted for a measure solving a ζ-equation.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Number of equispaced points used by residual checks.
pub const RESIDUAL_POINTS: usize = 101;

/// Tolerance on `∫ F dQ - f(target)` for the generic MSE evaluator.
pub const UNBIASED_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub(crate) enum Family {
    Markov(MarkovFns),
    Matern(f64),
    Integrated,
}

impl Family {
    fn of(kernel: &Kernel) -> Result<Self> {
        if let Some(m) = kernel.as_markov() {
            return Ok(Family::Markov(m));
        }
        match kernel {
            Kernel::Matern32 { lambda } => Ok(Family::Matern(*lambda)),
            Kernel::IntegratedBrownian => Ok(Family::Integrated),
            other => Err(Error::Unsupported(format!(
                "no continuous-observation solution for {other:?}"
            ))),
        }
    }
}

/// How the target measure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ZetaPath {
    /// Target inside the observed interval: the point evaluation itself.
    Interior,
    /// The kernel's tabulated closed-form coefficients passed the residual check.
    ClosedForm,
    /// The closed form failed (or does not exist), and the general trend
    /// operator applied to the target covariance was used.
    Operator,
}

/// Target measure with its provenance and residuals.
#[derive(Debug, Clone)]
pub struct TargetMeasure {
    pub measure: VectorMeasure,
    pub path: ZetaPath,
    /// Residual of the tabulated closed form, when one exists.
    pub closed_form_residual: Option<f64>,
    /// Residual of the measure actually used.
    pub residual: f64,
}

/// Trend measures `ζ_j`, `C = ∫ F ζᵀ`, `D = C⁻¹` and `G = D ζ`.
#[derive(Debug, Clone)]
pub struct TrendSystem {
    pub zeta: Vec<VectorMeasure>,
    pub information: DenseMatrix,
    pub d: DenseMatrix,
    pub g: Vec<VectorMeasure>,
    pub residual: f64,
    /// The trend's information is unbounded (Brownian motion pinned at an
    /// endpoint); `D` is zero and only exact targets are predictable.
    pub degenerate: bool,
}

/// A continuous-observation prediction.
#[derive(Debug, Clone)]
pub struct ClosedFormSolution {
    pub target: Target,
    pub zeta_t0: VectorMeasure,
    pub g: Vec<VectorMeasure>,
    pub information: DenseMatrix,
    pub d: DenseMatrix,
    pub c: DVector<f64>,
    pub q_star: VectorMeasure,
    pub mse: f64,
    pub path: ZetaPath,
    pub closed_form_residual: Option<f64>,
    pub target_residual: f64,
}

impl ClosedFormSolution {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }
}

/// Process observed on `[a, b]` together with all derivatives the kernel allows.
#[derive(Debug, Clone)]
pub struct ContinuousModel {
    kernel: Kernel,
    trend: Trend,
    a: f64,
    b: f64,
    panels: usize,
    family: Family,
}

impl ContinuousModel {
    pub fn new(kernel: Kernel, trend: Trend, a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        kernel.validate()?;
        if kernel.dim() != 1 {
            return Err(Error::DimensionMismatch("continuous model needs a 1D kernel".into()));
        }
        kernel.check_domain(&Point::Line(a))?;
        let family = Family::of(&kernel)?;
        let panels = default_panels(kernel.rate(), a, b);
        let model = Self {
            kernel,
            trend,
            a,
            b,
            panels,
            family,
        };
        model.check_trend()?;
        if let Family::Markov(m) = &model.family {
            let rule = crate::numerics::composite_gauss_legendre(a, b, crate::numerics::DEFAULT_ORDER, panels)?;
            let mut nodes = rule.nodes().to_vec();
            nodes.push(b);
            if a > 0.0 || !matches!(model.kernel, Kernel::BrownianMotion) {
                nodes.push(a);
            }
            m.validate_on(&nodes)?;
        }
        Ok(model)
    }

    /// Override the number of quadrature panels.
    pub fn with_panels(mut self, panels: usize) -> Self {
        self.panels = panels.max(1);
        self
    }

    fn check_trend(&self) -> Result<()> {
        let m = self.trend.dim();
        let mut gram = DenseMatrix::zeros(m, m);
        for k in 0..50 {
            let t = self.a + (self.b - self.a) * k as f64 / 49.0;
            let f = self.trend.eval(t, 0);
            gram += &f * f.transpose() / 50.0;
        }
        let eig = nalgebra::SymmetricEigen::new(gram).eigenvalues;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= 1e-10 {
            return Err(Error::InvalidTrend(format!(
                "trend components are linearly dependent on [{}, {}] (min eigenvalue {min:e})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn trend(&self) -> &Trend {
        &self.trend
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Highest observed derivative order.
    pub fn observed_order(&self) -> u8 {
        self.kernel.smoothness().0
    }

    pub(crate) fn family(&self) -> &Family {
        &self.family
    }

    fn zeros(&self) -> Result<VectorMeasure> {
        VectorMeasure::zeros(self.observed_order() as usize + 1, self.a, self.b, self.panels)
    }

    pub(crate) fn empty(&self) -> Result<SignedMeasure> {
        SignedMeasure::zero(self.a, self.b, self.panels)
    }

    /// Measure solving the ζ-equation with right-hand side `g`.
    pub(crate) fn apply_operator(&self, g: Jet) -> Result<VectorMeasure> {
        match &self.family {
            Family::Markov(m) => markov::operator(self, m, g),
            Family::Matern(lambda) => matern::operator(self, *lambda, g),
            Family::Integrated => ibm::operator(self, g),
        }
    }

    pub(crate) fn trend_jet(&self, j: usize) -> Jet {
        let trend = self.trend.clone();
        Arc::new(move |t, k| trend.eval(t, k)[j])
    }

    /// Trend measures and their information matrix.
    pub fn trend_system(&self) -> Result<TrendSystem> {
        let m = self.trend.dim();
        let mut zeta = Vec::with_capacity(m);
        for j in 0..m {
            match self.apply_operator(self.trend_jet(j)) {
                Ok(z) => zeta.push(z),
                Err(Error::Singular(_)) if matches!(self.kernel, Kernel::BrownianMotion) && self.a == 0.0 => {
                    let zeros = vec![self.zeros()?; m];
                    return Ok(TrendSystem {
                        zeta: zeros.clone(),
                        information: DenseMatrix::from_element(m, m, f64::INFINITY),
                        d: DenseMatrix::zeros(m, m),
                        g: zeros,
                        residual: 0.0,
                        degenerate: true,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let mut information = DenseMatrix::zeros(m, m);
        for (k, z) in zeta.iter().enumerate() {
            information.set_column(k, &z.trend_moment(&self.trend));
        }
        crate::numerics::check_symmetric(&information).or_else(|e| {
            let asym = (&information - information.transpose()).amax();
            if asym <= 1e-9 * information.amax().max(1.0) {
                Ok(())
            } else {
                Err(e)
            }
        })?;
        let information = (&information + information.transpose()) * 0.5;
        let d = SpdFactor::new(&information)
            .map_err(|_| Error::Singular("trend information matrix is not positive definite".into()))?
            .inverse();
        let g = (0..m)
            .map(|k| {
                let coeffs: Vec<f64> = (0..m).map(|j| d[(k, j)]).collect();
                VectorMeasure::combine(&self.zeros()?, &coeffs, &zeta)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut residual = 0.0f64;
        for (j, z) in zeta.iter().enumerate() {
            let jet = self.trend_jet(j);
            residual = residual.max(self.residual(z, &*jet));
        }
        if residual > RESIDUAL_TOL {
            return Err(Error::ResidualCheck(format!(
                "trend measures leave residual {residual:e}"
            )));
        }
        Ok(TrendSystem {
            zeta,
            information,
            d,
            g,
            residual,
            degenerate: false,
        })
    }

    /// Largest `|Σ_i ∫ ∂^i_t ∂^j_s K(t, s) ζ_i(dt) - g^{(j)}(s)|` over an
    /// equispaced grid of `[a, b]` and all observed orders `j`.
    pub fn residual(&self, zeta: &VectorMeasure, g: &dyn Fn(f64, usize) -> f64) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..RESIDUAL_POINTS {
            let s = self.a + (self.b - self.a) * k as f64 / (RESIDUAL_POINTS - 1) as f64;
            for j in 0..=self.observed_order() {
                let lhs = zeta.kernel_action(&self.kernel, s, j);
                worst = worst.max((lhs - g(s, j as usize)).abs());
            }
        }
        worst
    }

    /// Derivatives in `s` of `∂^p_{t0} K(t0, s)`, valid on `[a, b]` when
    /// `t0` lies outside it.
    pub(crate) fn target_jet(&self, t0: f64, p: u8) -> Jet {
        match &self.family {
            Family::Markov(m) => markov::target_jet(m.clone(), t0),
            Family::Matern(lambda) => matern::target_jet(*lambda, t0, p),
            Family::Integrated => ibm::target_jet(t0, p),
        }
    }

    fn closed_form_target(&self, t0: f64, p: u8) -> Result<Option<VectorMeasure>> {
        match &self.family {
            Family::Markov(m) => markov::closed_form_target(self, m, t0),
            Family::Matern(lambda) => matern::closed_form_target(self, *lambda, t0, p),
            Family::Integrated => ibm::closed_form_target(self, t0, p),
        }
    }

    /// Measure reproducing the covariance of `∂^p y(t0)` with the path.
    pub fn target_measure(&self, t0: f64, p: u8) -> Result<TargetMeasure> {
        self.kernel.deriv_1d(t0, t0, p, p)?;
        self.kernel.check_domain(&Point::Line(t0))?;
        let tol = 1e-12 * self.a.abs().max(self.b.abs()).max(1.0);
        if t0 >= self.a - tol && t0 <= self.b + tol {
            let at = t0.clamp(self.a, self.b);
            let mut comps = vec![self.empty()?; self.observed_order() as usize + 1];
            comps[p as usize] = self.empty()?.with_atom(at, 1.0)?;
            return Ok(TargetMeasure {
                measure: VectorMeasure::new(comps)?,
                path: ZetaPath::Interior,
                closed_form_residual: None,
                residual: 0.0,
            });
        }
        let jet = self.target_jet(t0, p);
        let closed = self.closed_form_target(t0, p)?;
        let closed_residual = closed.as_ref().map(|z| self.residual(z, &*jet));
        if let (Some(z), Some(r)) = (&closed, closed_residual) {
            if r <= RESIDUAL_TOL {
                return Ok(TargetMeasure {
                    measure: z.clone(),
                    path: ZetaPath::ClosedForm,
                    closed_form_residual: Some(r),
                    residual: r,
                });
            }
        }
        let measure = self.apply_operator(Arc::clone(&jet))?;
        let residual = self.residual(&measure, &*jet);
        if residual > RESIDUAL_TOL {
            return Err(Error::ResidualCheck(format!(
                "target measure at t0 = {t0}: closed form {closed_residual:?}, operator {residual:e}"
            )));
        }
        Ok(TargetMeasure {
            measure,
            path: ZetaPath::Operator,
            closed_form_residual: closed_residual,
            residual,
        })
    }

    /// BLUP of `∂^p y(t0)`.
    pub fn blup(&self, t0: f64, p: u8) -> Result<ClosedFormSolution> {
        let target = self.target_measure(t0, p)?;
        let system = self.trend_system()?;
        assemble_blup(self, &system, target, t0, p)
    }

    /// BLUP of `Σ_j ν_j y(s_j)`.
    pub fn blup_average(&self, nu: &[(f64, f64)]) -> Result<ClosedFormSolution> {
        if nu.is_empty() {
            return Err(Error::InvalidDesign("empty averaging measure".into()));
        }
        let system = self.trend_system()?;
        let mut zeta = self.zeros()?;
        let mut worst = 0.0f64;
        let mut closed_form_residual: Option<f64> = None;
        let mut path = ZetaPath::Interior;
        for &(s, w) in nu {
            let t = self.target_measure(s, 0)?;
            zeta = zeta.axpy(w, &t.measure)?;
            worst = worst.max(t.residual);
            if let Some(r) = t.closed_form_residual {
                closed_form_residual = Some(closed_form_residual.unwrap_or(0.0).max(r));
            }
            if t.path == ZetaPath::Operator || path == ZetaPath::Interior {
                path = t.path;
            }
        }
        let f_nu = nu
            .iter()
            .fold(DVector::zeros(self.trend.dim()), |acc, &(s, w)| acc + self.trend.eval(s, 0) * w);
        let c = &f_nu - zeta.trend_moment(&self.trend);
        let q_star = self.correct(&system, &zeta, &c)?;
        let k_nu: f64 = nu
            .iter()
            .flat_map(|&(s, w)| nu.iter().map(move |&(r, u)| (s, w, r, u)))
            .map(|(s, w, r, u)| w * u * self.kernel.deriv_1d_unchecked(s, r, 0, 0))
            .sum();
        let cross: f64 = nu.iter().map(|&(s, w)| w * q_star.kernel_action(&self.kernel, s, 0)).sum();
        let mse = k_nu + c.dot(&(&system.d * &f_nu)) - cross;
        let mse = clamp_mse(mse, k_nu)?;
        Ok(ClosedFormSolution {
            target: Target::Average(nu.iter().map(|&(s, w)| (Point::Line(s), w)).collect()),
            zeta_t0: zeta,
            g: system.g,
            information: system.information,
            d: system.d,
            c,
            q_star,
            mse,
            path,
            closed_form_residual,
            target_residual: worst,
        })
    }

    /// `ζ + Gᵀ c`.
    fn correct(&self, system: &TrendSystem, zeta: &VectorMeasure, c: &DVector<f64>) -> Result<VectorMeasure> {
        if system.degenerate {
            if c.amax() > 1e-12 {
                return Err(Error::Unsupported(
                    "trend information is unbounded and the target is not exactly reproduced".into(),
                ));
            }
            return Ok(zeta.clone());
        }
        VectorMeasure::combine(zeta, c.as_slice(), &system.g)
    }

    /// `(Var(target), ∫ cov(target, path) dQ-part helpers)` for generic evaluators.
    fn target_variance(&self, target: &Target) -> Result<f64> {
        match target {
            Target::Point(Point::Line(t0), p) => self.kernel.deriv_1d(*t0, *t0, p.0, p.0),
            Target::Average(nu) => {
                let mut v = 0.0;
                for (s, w) in nu {
                    for (r, u) in nu {
                        v += w * u * self.kernel.eval(s, r)?;
                    }
                }
                Ok(v)
            }
            _ => Err(Error::DimensionMismatch("continuous models predict on the line".into())),
        }
    }

    fn target_action(&self, q: &VectorMeasure, target: &Target) -> Result<f64> {
        match target {
            Target::Point(Point::Line(t0), p) => Ok(q.kernel_action(&self.kernel, *t0, p.0)),
            Target::Average(nu) => {
                let mut total = 0.0;
                for (s, w) in nu {
                    let Point::Line(s) = s else {
                        return Err(Error::DimensionMismatch("averaging atoms must be 1D".into()));
                    };
                    total += w * q.kernel_action(&self.kernel, *s, 0);
                }
                Ok(total)
            }
            _ => Err(Error::DimensionMismatch("continuous models predict on the line".into())),
        }
    }

    fn target_trend(&self, target: &Target) -> Result<DVector<f64>> {
        match target {
            Target::Point(p, pattern) => self.trend.features(p, *pattern),
            Target::Average(nu) => nu.iter().try_fold(DVector::zeros(self.trend.dim()), |acc, (s, w)| {
                Ok(acc + self.trend.features(s, Pattern::VALUE)? * *w)
            }),
        }
    }

    /// `∫ F dQ - f(target)`.
    pub fn unbiasedness_gap(&self, q: &VectorMeasure, target: &Target) -> Result<DVector<f64>> {
        Ok(q.trend_moment(&self.trend) - self.target_trend(target)?)
    }

    /// MSE of an arbitrary unbiased predictor `∫ y dQ`:
    /// `Var(target) - 2 Cov(target, ∫ y dQ) + Var(∫ y dQ)`.
    pub fn mse_of_measure(&self, q: &VectorMeasure, target: &Target) -> Result<f64> {
        let gap = self.unbiasedness_gap(q, target)?;
        let scale = self.target_trend(target)?.amax().max(1.0);
        if gap.amax() > UNBIASED_TOL * scale {
            return Err(Error::Biased(gap.iter().copied().collect()));
        }
        Ok(self.target_variance(target)? - 2.0 * self.target_action(q, target)?
            + q.kernel_bilinear(&self.kernel, q))
    }

    /// `K̃(t0, t0) - ∫ K̃(t, t0) Q(dt)` with `K̃ = K - fᵀ D f`.
    pub fn mse_reduced_kernel(&self, solution: &ClosedFormSolution) -> Result<f64> {
        let (t0, p) = match &solution.target {
            Target::Point(Point::Line(t0), p) => (*t0, *p),
            _ => {
                return Err(Error::Unsupported(
                    "the reduced-kernel form is defined for point targets".into(),
                ))
            }
        };
        let reduced = self.kernel.reduced(&self.trend, &solution.d)?;
        let at = Point::Line(t0);
        let mut total = reduced.deriv(&at, &at, p, p)?;
        for (i, m) in solution.q_star.components().iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let i = Pattern::order(i as u8);
            total -= m.integrate_with_breaks(
                |t| {
                    reduced
                        .deriv(&Point::Line(t), &at, i, p)
                        .unwrap_or(f64::NAN)
                },
                &[t0],
            );
        }
        Ok(total)
    }
}

fn clamp_mse(mse: f64, variance: f64) -> Result<f64> {
    let slack = 1e-10 * variance.abs().max(1.0);
    if mse >= 0.0 {
        Ok(mse)
    } else if mse >= -slack {
        Ok(0.0)
    } else {
        Err(Error::NegativeMse(mse))
    }
}

/// `Q* = ζ_{t0} + Gᵀc` and its MSE
/// `∂^p_t ∂^p_s K(t0, t0) + cᵀ D f^{(p)}(t0) - Σ_i ∫ ∂^i_t ∂^p_s K(t, t0) Q*_i(dt)`.
pub fn assemble_blup(
    model: &ContinuousModel,
    system: &TrendSystem,
    target: TargetMeasure,
    t0: f64,
    p: u8,
) -> Result<ClosedFormSolution> {
    let zeta = &target.measure;
    if zeta.support() != model.interval() {
        let (a, b) = zeta.support();
        return Err(Error::SupportMismatch(a, b, model.a, model.b));
    }
    crate::numerics::check_symmetric(&system.d)?;
    let f0 = model.trend.eval(t0, p as usize);
    let c = &f0 - zeta.trend_moment(&model.trend);
    let q_star = model.correct(system, zeta, &c)?;
    let variance = model.kernel.deriv_1d(t0, t0, p, p)?;
    let mse = variance + c.dot(&(&system.d * &f0)) - q_star.kernel_action(&model.kernel, t0, p);
    let mse = clamp_mse(mse, variance)?;
    Ok(ClosedFormSolution {
        target: Target::Point(Point::Line(t0), Pattern::order(p)),
        zeta_t0: target.measure,
        g: system.g.clone(),
        information: system.information.clone(),
        d: system.d.clone(),
        c,
        q_star,
        mse,
        path: target.path,
        closed_form_residual: target.closed_form_residual,
        target_residual: target.residual,
    })
}

/// BLUP of `Σ_j ν_j y(s_j)` from the path on `[a, b]`.
pub fn continuous_blup_average(model: &ContinuousModel, nu: &[(f64, f64)]) -> Result<ClosedFormSolution> {
    model.blup_average(nu)
}

/// Generic MSE of the predictor `∫ y dQ` for `target`.
pub fn mse_of_measure(model: &ContinuousModel, q: &VectorMeasure, target: &Target) -> Result<f64> {
    model.mse_of_measure(q, target)
}

#[cfg(test)]
mod tests;
