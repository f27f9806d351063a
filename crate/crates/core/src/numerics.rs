//! Quadrature rules and dense linear solves.
//!
//! Every integral over an observation interval goes through composite
//! Gauss–Legendre rules; every covariance system goes through a Cholesky
//! factorization. Nothing here regularizes silently: a Gram matrix that is
//! not numerically positive definite is reported as an error.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, Dyn, LU};

use crate::error::{Error, Result};

/// Dense real matrix used for Gram matrices, trend feature matrices and BLUE
/// covariances.
pub type DenseMatrix = DMatrix<f64>;

/// Order used by every composite rule in the library.
pub const DEFAULT_ORDER: usize = 16;

const MAX_ORDER: usize = 64;

/// A quadrature rule bound to a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Gauss–Legendre order of each panel.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Nodes and weights of the order-`n` Gauss–Legendre rule on [-1, 1].
fn reference_rule(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<OnceLock<(Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let slots = CACHE.get_or_init(|| (0..=MAX_ORDER).map(|_| OnceLock::new()).collect());
    slots[order].get_or_init(|| legendre_nodes(order))
}

// Newton iteration on the three-term Legendre recurrence.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Single-panel Gauss–Legendre rule of the given order on [a, b].
pub fn gauss_legendre(a: f64, b: f64, order: usize) -> Result<QuadratureRule> {
    composite_gauss_legendre(a, b, order, 1)
}

/// Composite Gauss–Legendre rule: `panels` equal panels of `order` nodes each.
pub fn composite_gauss_legendre(
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
) -> Result<QuadratureRule> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInterval { a, b });
    }
    if order == 0 || order > MAX_ORDER {
        return Err(Error::QuadratureOrder(order));
    }
    let panels = panels.max(1);
    let (rx, rw) = reference_rule(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        for (&x, &w) in rx.iter().zip(rw) {
            nodes.push(mid + 0.5 * h * x);
            weights.push(0.5 * h * w);
        }
    }
    Ok(QuadratureRule {
        a,
        b,
        nodes,
        weights,
        order,
    })
}

/// Panel count of the default policy: `max(4, ceil(rate * (b - a)))`.
pub fn default_panels(rate: f64, a: f64, b: f64) -> usize {
    let n = (rate * (b - a)).ceil();
    if n.is_finite() && n > 4.0 {
        n as usize
    } else {
        4
    }
}

/// Integrate `f` over [a, b] with the default composite rule, splitting the
/// interval at every `breaks` point strictly inside it so that integrands
/// with kinks there are integrated piecewise-smoothly.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    breaks: &[f64],
    f: F,
) -> f64 {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let (rx, rw) = reference_rule(DEFAULT_ORDER);
    let len = b - a;
    let mut total = 0.0;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let piece = hi - lo;
        if piece <= 0.0 {
            continue;
        }
        let n = ((panels as f64) * piece / len).ceil().max(1.0) as usize;
        let h = piece / n as f64;
        for p in 0..n {
            let mid = lo + h * (p as f64 + 0.5);
            for (&x, &w) in rx.iter().zip(rw) {
                total += 0.5 * h * w * f(mid + 0.5 * h * x);
            }
        }
        lo = hi;
    }
    total
}

/// Largest absolute entry.
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Reject matrices whose asymmetry exceeds `1e-10 * max|M|`.
pub fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let tolerance = 1e-10 * max_abs(m);
    let n = m.nrows();
    let mut asymmetry = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    Ok(())
}

/// Cholesky factorization of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        check_symmetric(m)?;
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.chol.inverse()
    }

    /// Lower-triangular factor `L` with `M = L Lᵀ`.
    pub fn l(&self) -> DenseMatrix {
        self.chol.l()
    }
}

/// Solve `M Z = B` for symmetric positive definite `M`.
pub fn solve_spd(m: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if m.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, right-hand side has {} rows",
            m.nrows(),
            m.ncols(),
            b.nrows()
        )));
    }
    Ok(SpdFactor::new(m)?.solve(b))
}

/// Pivoted LU factorization for general (non-symmetric or indefinite) square
/// systems such as the bordered kriging matrix.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: LU<f64, Dyn, Dyn>,
}

impl LuFactor {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch("LU needs a square matrix".into()));
        }
        let lu = LU::new(m.clone());
        if !lu.is_invertible() {
            return Err(Error::Singular("LU factorization found a zero pivot".into()));
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.lu
            .solve(b)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))
    }
}

/// Solve a general square system with partial pivoting.
pub fn solve_general(m: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    LuFactor::new(m)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn midpoint_rule() {
        let r = gauss_legendre(0.0, 1.0, 1).unwrap();
        assert_eq!(r.nodes(), &[0.5]);
        assert_eq!(r.weights(), &[1.0]);
    }

    #[test]
    fn order_two_is_exact_for_quadratics() {
        let r = gauss_legendre(0.0, 1.0, 2).unwrap();
        assert!((r.integrate(|t| t * t) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_integral_order_16() {
        let r = gauss_legendre(0.0, 1.0, 16).unwrap();
        let exact = (1.0 - (-2.0_f64).exp()) / 2.0;
        assert!((r.integrate(|t| (-2.0 * t).exp()) - exact).abs() < 1e-13);
    }

    #[test]
    fn polynomial_exactness_all_orders() {
        for order in 1..=64 {
            let r = gauss_legendre(-0.3, 1.7, order).unwrap();
            let deg = 2 * order - 1;
            // ∫ t^deg over [a, b]
            let exact = (1.7_f64.powi(deg as i32 + 1) - (-0.3_f64).powi(deg as i32 + 1))
                / (deg as f64 + 1.0);
            let got = r.integrate(|t| t.powi(deg as i32));
            assert!(
                (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                "order {order}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn rule_invariants() {
        for order in [1, 2, 5, 16, 33, 64] {
            for panels in [1, 3, 8] {
                let r = composite_gauss_legendre(0.25, 1.5, order, panels).unwrap();
                let sum: f64 = r.weights().iter().sum();
                assert!((sum - 1.25).abs() <= 1e-13 * 1.25);
                assert!(r.weights().iter().all(|&w| w > 0.0));
                assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
                assert!(r.nodes().iter().all(|&x| x > 0.25 && x < 1.5));
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            gauss_legendre(1.0, 1.0, 4),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(matches!(
            gauss_legendre(0.0, 1.0, 0),
            Err(Error::QuadratureOrder(0))
        ));
        assert!(matches!(
            gauss_legendre(0.0, 1.0, 65),
            Err(Error::QuadratureOrder(65))
        ));
    }

    #[test]
    fn composite_exponential_integrands() {
        // products of polynomials (deg <= 4) and e^{±λt}, λ <= 10, on unit-length intervals
        for &lambda in &[0.5, 2.0, 10.0] {
            for sign in [-1.0, 1.0] {
                let rate = sign * lambda;
                let r = composite_gauss_legendre(0.0, 1.0, 16, default_panels(lambda, 0.0, 1.0))
                    .unwrap();
                // ∫ t^4 e^{rt} dt by repeated integration by parts
                let e = rate.exp();
                let exact = e
                    * (1.0 / rate - 4.0 / rate.powi(2) + 12.0 / rate.powi(3) - 24.0 / rate.powi(4)
                        + 24.0 / rate.powi(5))
                    - 24.0 / rate.powi(5);
                let got = r.integrate(|t| t.powi(4) * (rate * t).exp());
                assert!((got - exact).abs() < 1e-11 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn piecewise_integration_handles_kink() {
        let got = integrate_piecewise(0.0, 1.0, 4, &[0.3], |t| (-(2.0 * (t - 0.3_f64).abs())).exp());
        let exact = (1.0 - (-0.6_f64).exp()) / 2.0 + (1.0 - (-1.4_f64).exp()) / 2.0;
        assert!((got - exact).abs() < 1e-14);
    }

    #[test]
    fn solve_identity_and_hand_case() {
        let b = dmatrix![1.0, 2.0; 3.0, 4.0; 5.0, 6.0];
        let z = solve_spd(&DenseMatrix::identity(3, 3), &b).unwrap();
        assert_eq!(z, b);
        let m = dmatrix![2.0, 1.0; 1.0, 2.0];
        let z = solve_spd(&m, &dmatrix![1.0; 1.0]).unwrap();
        assert!((z[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((z[(1, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn solve_ou_gram_against_adjugate() {
        let k = |t: f64, s: f64| (-2.0 * (t - s).abs()).exp();
        let sites = [0.0, 0.5, 1.0];
        let m = DenseMatrix::from_fn(3, 3, |i, j| k(sites[i], sites[j]));
        // adjugate oracle: inverse = adj(M) / det(M)
        let det = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
        let cof = |r: usize, c: usize| {
            let rows: Vec<usize> = (0..3).filter(|&x| x != r).collect();
            let cols: Vec<usize> = (0..3).filter(|&x| x != c).collect();
            let minor = m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])];
            if (r + c) % 2 == 0 {
                minor
            } else {
                -minor
            }
        };
        let expected: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| cof(j, i)).sum::<f64>() / det)
            .collect();
        let z = solve_spd(&m, &DenseMatrix::from_element(3, 1, 1.0)).unwrap();
        for i in 0..3 {
            assert!((z[(i, 0)] - expected[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn duplicate_sites_are_not_positive_definite() {
        let m = dmatrix![1.0, 1.0; 1.0, 1.0];
        assert_eq!(
            solve_spd(&m, &dmatrix![1.0; 0.0]).unwrap_err(),
            Error::NotPositiveDefinite
        );
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = dmatrix![2.0, 1.0; 0.5, 2.0];
        assert!(matches!(
            solve_spd(&m, &dmatrix![1.0; 1.0]),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn bordered_system_via_lu() {
        let m = dmatrix![0.0, 1.0, 1.0; 1.0, 2.0, 1.0; 1.0, 1.0, 2.0];
        let b = dmatrix![1.0; 0.0; 0.0];
        let z = solve_general(&m, &b).unwrap();
        let r = &m * &z - &b;
        assert!(max_abs(&r) < 1e-14);
    }
}
