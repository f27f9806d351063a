//! Signed measures on an interval: finitely many atoms plus a smooth density.
//!
//! These represent every predictor and estimator in the continuous setting:
//! a linear functional `∫ y(t) Q(dt)` of an observed path.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Pattern};
use crate::numerics::{composite_gauss_legendre, integrate_piecewise, QuadratureRule, DEFAULT_ORDER};
use crate::trend::Trend;

pub type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const LOCATION_TOL: f64 = 1e-12;

/// Atoms plus a density on `[a, b]`.
#[derive(Clone)]
pub struct SignedMeasure {
    a: f64,
    b: f64,
    atoms: Vec<(f64, f64)>,
    density: Vec<(f64, Density)>,
    panels: usize,
    rule: QuadratureRule,
}

impl fmt::Debug for SignedMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignedMeasure")
            .field("support", &(self.a, self.b))
            .field("atoms", &self.atoms)
            .field("density_terms", &self.density.len())
            .finish()
    }
}

impl SignedMeasure {
    /// Zero measure on `[a, b]`; densities are integrated with `panels`
    /// Gauss–Legendre panels of order 16.
    pub fn zero(a: f64, b: f64, panels: usize) -> Result<Self> {
        let rule = composite_gauss_legendre(a, b, DEFAULT_ORDER, panels)?;
        Ok(Self {
            a,
            b,
            atoms: Vec::new(),
            density: Vec::new(),
            panels: panels.max(1),
            rule,
        })
    }

    pub fn dirac(a: f64, b: f64, panels: usize, x: f64, weight: f64) -> Result<Self> {
        Self::zero(a, b, panels)?.with_atom(x, weight)
    }

    /// Add `weight · δ_x`, merging with an existing atom at the same location.
    pub fn with_atom(mut self, x: f64, weight: f64) -> Result<Self> {
        self.push_atom(x, weight)?;
        Ok(self)
    }

    fn push_atom(&mut self, x: f64, weight: f64) -> Result<()> {
        let tol = LOCATION_TOL * x.abs().max(1.0);
        if x < self.a - tol || x > self.b + tol || !x.is_finite() {
            return Err(Error::DimensionMismatch(format!(
                "atom at {x} outside support [{}, {}]",
                self.a, self.b
            )));
        }
        let x = x.clamp(self.a, self.b);
        match self.atoms.iter_mut().find(|(y, _)| (y - x).abs() <= tol) {
            Some(slot) => slot.1 += weight,
            None if weight == 0.0 => {}
            None => {
                self.atoms.push((x, weight));
                self.atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
            }
        }
        Ok(())
    }

    /// Add `coef · g(t) dt`.
    pub fn with_density(mut self, coef: f64, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.density.push((coef, Arc::new(g)));
        self
    }

    /// Add a constant density `c dt`.
    pub fn with_constant_density(self, c: f64) -> Self {
        self.with_density(c, |_| 1.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Weight of the atom at `x`, or 0.
    pub fn atom_weight(&self, x: f64) -> f64 {
        let tol = LOCATION_TOL * x.abs().max(1.0);
        self.atoms
            .iter()
            .filter(|(y, _)| (y - x).abs() <= tol)
            .map(|p| p.1)
            .sum()
    }

    pub fn has_density(&self) -> bool {
        self.density.iter().any(|(c, _)| *c != 0.0)
    }

    pub fn density_at(&self, t: f64) -> f64 {
        self.density.iter().map(|(c, g)| c * g(t)).sum()
    }

    pub fn is_zero(&self) -> bool {
        !self.has_density() && self.atoms.iter().all(|p| p.1 == 0.0)
    }

    /// Atom locations strictly inside the support.
    pub fn interior_atoms(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms
            .iter()
            .map(|p| p.0)
            .filter(move |&x| x > self.a && x < self.b)
    }

    /// `∫ g dm` for an integrand smooth on the support.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|&(x, w)| w * g(x)).sum();
        if !self.has_density() {
            return atoms;
        }
        atoms + self.rule.integrate(|t| self.density_at(t) * g(t))
    }

    /// `∫ g dm` where `g` may have kinks at `breaks`.
    pub fn integrate_with_breaks<G: Fn(f64) -> f64>(&self, g: G, breaks: &[f64]) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|&(x, w)| w * g(x)).sum();
        if !self.has_density() {
            return atoms;
        }
        if breaks.iter().all(|&x| x <= self.a || x >= self.b) {
            return atoms + self.rule.integrate(|t| self.density_at(t) * g(t));
        }
        atoms + integrate_piecewise(self.a, self.b, self.panels, breaks, |t| self.density_at(t) * g(t))
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            atom.1 *= factor;
        }
        for term in &mut out.density {
            term.0 *= factor;
        }
        out
    }

    fn check_support(&self, other: &Self) -> Result<()> {
        let tol = LOCATION_TOL * self.a.abs().max(self.b.abs()).max(1.0);
        if (self.a - other.a).abs() > tol || (self.b - other.b).abs() > tol {
            return Err(Error::SupportMismatch(self.a, self.b, other.a, other.b));
        }
        Ok(())
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Result<Self> {
        self.check_support(other)?;
        let mut out = self.clone();
        if factor == 0.0 {
            return Ok(out);
        }
        for &(x, w) in &other.atoms {
            out.push_atom(x, factor * w)?;
        }
        for (c, g) in &other.density {
            out.density.push((factor * c, Arc::clone(g)));
        }
        Ok(out)
    }

    /// Replace the density by point masses `density(x_k) w_k` at the
    /// quadrature nodes, then list all atoms.
    pub fn discretize(&self) -> Vec<(f64, f64)> {
        let mut out = self.atoms.clone();
        if self.has_density() {
            out.extend(self.rule.points().map(|(x, w)| (x, w * self.density_at(x))));
        }
        out
    }

    pub fn record(&self) -> MeasureRecord {
        MeasureRecord {
            support: [self.a, self.b],
            atoms: self.atoms.iter().map(|&(x, w)| [x, w]).collect(),
            density_samples: if self.has_density() {
                self.rule.nodes().iter().map(|&x| [x, self.density_at(x)]).collect()
            } else {
                Vec::new()
            },
        }
    }
}

/// Serializable view of a measure; densities are sampled at quadrature nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureRecord {
    pub support: [f64; 2],
    pub atoms: Vec<[f64; 2]>,
    pub density_samples: Vec<[f64; 2]>,
}

/// Measures acting on `y, y′, …, y^{(q)}`; component `i` acts on `y^{(i)}`.
#[derive(Debug, Clone)]
pub struct VectorMeasure {
    components: Vec<SignedMeasure>,
}

impl VectorMeasure {
    pub fn new(components: Vec<SignedMeasure>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch("vector measure needs a component".into()));
        }
        for c in &components[1..] {
            components[0].check_support(c)?;
        }
        Ok(Self { components })
    }

    pub fn zeros(len: usize, a: f64, b: f64, panels: usize) -> Result<Self> {
        let zero = SignedMeasure::zero(a, b, panels)?;
        Self::new(vec![zero; len.max(1)])
    }

    /// Single-component measure acting on `y` only.
    pub fn scalar(m: SignedMeasure) -> Self {
        Self { components: vec![m] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> &[SignedMeasure] {
        &self.components
    }

    pub fn component(&self, i: usize) -> Option<&SignedMeasure> {
        self.components.get(i)
    }

    pub fn support(&self) -> (f64, f64) {
        self.components[0].support()
    }

    /// Pad with zero components up to `len`.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        let (a, b) = self.support();
        while out.components.len() < len {
            let zero = SignedMeasure::zero(a, b, self.components[0].panels())
                .expect("support already validated");
            out.components.push(zero);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(SignedMeasure::is_zero)
    }

    /// `Σ_i ∫ g_i dQ_i`; `gs[i]` integrates component `i`.
    pub fn integrate_vector(&self, gs: &[&dyn Fn(f64) -> f64]) -> Result<f64> {
        let mut total = 0.0;
        for (i, m) in self.components.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let g = gs.get(i).ok_or(Error::MissingDerivative(i))?;
            total += m.integrate(g);
        }
        Ok(total)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self.components.iter().map(|m| m.scaled(factor)).collect(),
        }
    }

    /// `self + factor · other`, padding the shorter one with zeros.
    pub fn axpy(&self, factor: f64, other: &Self) -> Result<Self> {
        let len = self.len().max(other.len());
        let (lhs, rhs) = (self.padded(len), other.padded(len));
        let components = lhs
            .components
            .iter()
            .zip(&rhs.components)
            .map(|(x, y)| x.axpy(factor, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// `base + Σ_k coeffs[k] · measures[k]`.
    pub fn combine(base: &Self, coeffs: &[f64], measures: &[Self]) -> Result<Self> {
        if coeffs.len() != measures.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} measures",
                coeffs.len(),
                measures.len()
            )));
        }
        coeffs
            .iter()
            .zip(measures)
            .try_fold(base.clone(), |acc, (&c, m)| acc.axpy(c, m))
    }

    /// `∫ F(t) Q(dt) = Σ_i ∫ f^{(i)}(t) Q_i(dt)`.
    pub fn trend_moment(&self, trend: &Trend) -> DVector<f64> {
        let mut out = DVector::zeros(trend.dim());
        for (i, m) in self.components.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            for k in 0..trend.dim() {
                out[k] += m.integrate(|t| trend.eval(t, i)[k]);
            }
        }
        out
    }

    /// `Σ_i ∫ ∂^i_t ∂^j_s K(t, s) Q_i(dt)` for a 1D kernel.
    pub fn kernel_action(&self, kernel: &Kernel, s: f64, j: u8) -> f64 {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, m)| {
                m.integrate_with_breaks(|t| kernel.deriv_1d_unchecked(t, s, i as u8, j), &[s])
            })
            .sum()
    }

    fn interior_atoms(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|m| m.interior_atoms().collect::<Vec<_>>())
            .collect()
    }

    /// `Σ_{i,j} ∫∫ Q_i(dt) ∂^i_t ∂^j_s K(t, s) R_j(ds)`.
    pub fn kernel_bilinear(&self, kernel: &Kernel, other: &Self) -> f64 {
        let breaks = self.interior_atoms();
        other
            .components
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(j, m)| m.integrate_with_breaks(|s| self.kernel_action(kernel, s, j as u8), &breaks))
            .sum()
    }

    /// Point-mass version of every component: `(location, derivative order, weight)`.
    pub fn discretize(&self) -> Vec<(f64, u8, f64)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.discretize().into_iter().map(move |(x, w)| (x, i as u8, w)))
            .collect()
    }

    pub fn record(&self) -> Vec<MeasureRecord> {
        self.components.iter().map(SignedMeasure::record).collect()
    }
}

/// One tensor term `weight · m₁(dt₁) m₂(dt₂)`.
#[derive(Debug, Clone)]
pub struct TensorTerm {
    pub weight: f64,
    pub first: SignedMeasure,
    pub second: SignedMeasure,
}

impl TensorTerm {
    pub fn integrate_separable<G1: Fn(f64) -> f64, G2: Fn(f64) -> f64>(&self, g1: G1, g2: G2) -> f64 {
        if self.weight == 0.0 {
            return 0.0;
        }
        self.weight * self.first.integrate(g1) * self.second.integrate(g2)
    }
}

/// Measure on a product set, one component per observed derivative pattern;
/// each component is a finite sum of tensor products of 1D measures.
#[derive(Debug, Clone, Default)]
pub struct ProductMeasure2D {
    components: Vec<(Pattern, Vec<TensorTerm>)>,
}

impl ProductMeasure2D {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, pattern: Pattern, weight: f64, first: SignedMeasure, second: SignedMeasure) {
        let term = TensorTerm { weight, first, second };
        match self.components.iter_mut().find(|(p, _)| *p == pattern) {
            Some((_, terms)) => terms.push(term),
            None => {
                self.components.push((pattern, vec![term]));
                self.components.sort_by_key(|(p, _)| p.rank());
            }
        }
    }

    pub fn patterns(&self) -> impl Iterator<Item = Pattern> + '_ {
        self.components.iter().map(|(p, _)| *p)
    }

    pub fn terms(&self, pattern: Pattern) -> &[TensorTerm] {
        self.components
            .iter()
            .find(|(p, _)| *p == pattern)
            .map(|(_, t)| t.as_slice())
            .unwrap_or(&[])
    }

    /// `∫ g₁(t₁) g₂(t₂)` against the component with the given pattern.
    pub fn integrate_separable<G1: Fn(f64) -> f64, G2: Fn(f64) -> f64>(
        &self,
        pattern: Pattern,
        g1: G1,
        g2: G2,
    ) -> f64 {
        self.terms(pattern)
            .iter()
            .map(|t| t.integrate_separable(&g1, &g2))
            .sum()
    }

    /// `∫ g(t₁, t₂)` against one component, by iterated quadrature.
    pub fn integrate<G: Fn(f64, f64) -> f64>(&self, pattern: Pattern, g: G) -> f64 {
        self.terms(pattern)
            .iter()
            .map(|term| {
                let inner = term.first.discretize();
                term.weight
                    * term
                        .second
                        .discretize()
                        .iter()
                        .map(|&(y, wy)| wy * inner.iter().map(|&(x, wx)| wx * g(x, y)).sum::<f64>())
                        .sum::<f64>()
            })
            .sum()
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, terms) in &other.components {
            for t in terms {
                out.add_term(*p, factor * t.weight, t.first.clone(), t.second.clone());
            }
        }
        out
    }

    /// Point masses `(t1, t2, pattern, weight)` of every component.
    pub fn discretize(&self) -> Vec<(f64, f64, Pattern, f64)> {
        let mut out = Vec::new();
        for (p, terms) in &self.components {
            for term in terms {
                let xs = term.first.discretize();
                let ys = term.second.discretize();
                for &(x, wx) in &xs {
                    for &(y, wy) in &ys {
                        out.push((x, y, *p, term.weight * wx * wy));
                    }
                }
            }
        }
        out
    }
}
