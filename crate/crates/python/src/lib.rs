//! Python bindings for the `blup` predictors.

use blup_core::continuous::ContinuousModel;
use blup_core::measures::MeasureRecord;
use blup_core::product::{Region, DEFAULT_RESOLUTION};
use blup_core::{
    mse_grid, tables, BlupSolution, ClosedFormSolution, Design, DesignFamily, DiscreteModel, GridSource, Kernel,
    Pattern, Point, ProductModel, ProductSolution, Trend,
};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(blup, BlupError, PyValueError);

fn err(e: blup_core::Error) -> PyErr {
    BlupError::new_err(e.to_string())
}

fn rows(m: &blup_core::numerics::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn record<'py>(py: Python<'py>, r: &MeasureRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("support", (r.support[0], r.support[1]))?;
    d.set_item("atoms", r.atoms.iter().map(|a| (a[0], a[1])).collect::<Vec<_>>())?;
    d.set_item("density_samples", r.density_samples.iter().map(|a| (a[0], a[1])).collect::<Vec<_>>())?;
    Ok(d)
}

/// Covariance kernel.
#[pyclass(name = "Kernel", module = "blup", frozen)]
struct PyKernel {
    inner: Kernel,
}

#[pymethods]
impl PyKernel {
    /// `exp(-lambda |t - s|)`.
    #[staticmethod]
    fn exponential(lam: f64) -> PyResult<Self> {
        Self::checked(Kernel::exponential(lam))
    }

    /// `(1 + lambda |t - s|) exp(-lambda |t - s|)`.
    #[staticmethod]
    fn matern32(lam: f64) -> PyResult<Self> {
        Self::checked(Kernel::matern32(lam))
    }

    /// `min(t, s)`.
    #[staticmethod]
    fn brownian() -> Self {
        PyKernel { inner: Kernel::BrownianMotion }
    }

    /// Covariance of integrated Brownian motion.
    #[staticmethod]
    fn integrated_brownian() -> Self {
        PyKernel { inner: Kernel::IntegratedBrownian }
    }

    /// Mixed derivative `d^i/dt^i d^j/ds^j K(t, s)`.
    #[pyo3(signature = (t, s, i = 0, j = 0))]
    fn __call__(&self, t: f64, s: f64, i: u8, j: u8) -> PyResult<f64> {
        self.inner.deriv_1d(t, s, i, j).map_err(err)
    }

    /// Highest derivative order the process has in mean square.
    #[getter]
    fn smoothness(&self) -> u8 {
        self.inner.smoothness().0
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?})", self.inner)
    }
}

impl PyKernel {
    fn checked(k: Kernel) -> PyResult<Self> {
        k.validate().map_err(err)?;
        Ok(PyKernel { inner: k })
    }
}

/// Polynomial trend basis: `const1`, `t` or `t2`.
#[pyclass(name = "Trend", module = "blup", frozen)]
struct PyTrend {
    inner: Trend,
}

#[pymethods]
impl PyTrend {
    #[new]
    #[pyo3(signature = (id = "const1"))]
    fn new(id: &str) -> PyResult<Self> {
        Ok(PyTrend {
            inner: Trend::from_id(id).map_err(err)?,
        })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Trend({:?})", self.inner.id())
    }
}

/// Observation design: sites and the derivative patterns observed at each.
#[pyclass(name = "Design", module = "blup", frozen)]
struct PyDesign {
    inner: Design,
}

#[pymethods]
impl PyDesign {
    /// Expand a named family, e.g. `xi_N_0` or `xi_N2_N2_N2_N2`.
    #[staticmethod]
    #[pyo3(signature = (tag, n, interval = (0.0, 1.0)))]
    fn family(tag: &str, n: usize, interval: (f64, f64)) -> PyResult<Self> {
        let family: DesignFamily = tag.parse().map_err(err)?;
        Ok(PyDesign {
            inner: family.expand_on(n, interval, interval).map_err(err)?,
        })
    }

    /// Value observations at the given 1D sites.
    #[staticmethod]
    fn values(sites: Vec<f64>) -> PyResult<Self> {
        Ok(PyDesign {
            inner: Design::values(sites.into_iter().map(Point::Line).collect()).map_err(err)?,
        })
    }

    /// 1D sites with explicit derivative orders, e.g. `[(0.0, [0, 1]), (1.0, [0])]`.
    #[staticmethod]
    fn with_derivatives(sites: Vec<(f64, Vec<u8>)>) -> PyResult<Self> {
        let (points, patterns) = sites
            .into_iter()
            .map(|(t, ps)| (Point::Line(t), ps.into_iter().map(Pattern::order).collect()))
            .unzip();
        Ok(PyDesign {
            inner: Design::new(points, patterns).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Site coordinates, padded to two entries.
    #[getter]
    fn sites(&self) -> Vec<(f64, f64)> {
        self.inner
            .sites()
            .iter()
            .map(|p| {
                let [x, y] = p.coords();
                (x, y)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Design({} sites, dim {})", self.inner.len(), self.inner.dim())
    }
}

/// Discrete-observation prediction.
#[pyclass(name = "Solution", module = "blup", frozen)]
struct PySolution {
    inner: BlupSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.iter().copied().collect()
    }

    /// `(site, pattern)` for each weight, in order.
    #[getter]
    fn observations(&self) -> Vec<((f64, f64), (u8, u8))> {
        self.inner
            .observations
            .iter()
            .map(|o| {
                let [x, y] = o.point.coords();
                ((x, y), (o.pattern.0, o.pattern.1))
            })
            .collect()
    }

    #[getter]
    fn mse(&self) -> f64 {
        self.inner.mse
    }

    #[getter]
    fn rmse(&self) -> f64 {
        self.inner.rmse()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.inner.c.iter().copied().collect()
    }

    #[getter]
    fn d(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.d)
    }

    #[getter]
    fn interpolated(&self) -> bool {
        self.inner.interpolated
    }

    /// Apply the weights to observed data.
    fn predict(&self, data: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&data).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Solution(mse={}, {} weights)", self.inner.mse, self.inner.weights.len())
    }
}

/// Continuous-observation prediction.
#[pyclass(name = "ContinuousSolution", module = "blup", frozen)]
struct PyContinuousSolution {
    inner: ClosedFormSolution,
}

#[pymethods]
impl PyContinuousSolution {
    #[getter]
    fn mse(&self) -> f64 {
        self.inner.mse
    }

    #[getter]
    fn rmse(&self) -> f64 {
        self.inner.rmse()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.inner.c.iter().copied().collect()
    }

    #[getter]
    fn d(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.d)
    }

    /// `Interior`, `ClosedForm` or `Operator`.
    #[getter]
    fn path(&self) -> String {
        format!("{:?}", self.inner.path)
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.target_residual
    }

    /// One dict per derivative order: support, atoms and sampled density.
    fn q_star<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.q_star.components().iter().map(|m| record(py, &m.record())).collect()
    }

    /// `(t, order, mass)` with densities collapsed onto quadrature nodes.
    fn discretize(&self) -> Vec<(f64, u8, f64)> {
        self.inner.q_star.discretize()
    }

    fn __repr__(&self) -> String {
        format!("ContinuousSolution(mse={}, path={:?})", self.inner.mse, self.inner.path)
    }
}

/// Prediction from a whole observed square under a separable kernel.
#[pyclass(name = "ProductSolution", module = "blup", frozen)]
struct PyProductSolution {
    inner: ProductSolution,
}

#[pymethods]
impl PyProductSolution {
    #[getter]
    fn mse(&self) -> f64 {
        self.inner.mse
    }

    #[getter]
    fn rmse(&self) -> f64 {
        self.inner.rmse()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.d
    }

    #[getter]
    fn paths(&self) -> (String, String) {
        (format!("{:?}", self.inner.paths[0]), format!("{:?}", self.inner.paths[1]))
    }

    /// `(t1, t2, pattern, mass)` with densities collapsed onto quadrature nodes.
    fn discretize(&self) -> Vec<(f64, f64, (u8, u8), f64)> {
        self.inner
            .q_star
            .discretize()
            .into_iter()
            .map(|(x, y, p, w)| (x, y, (p.0, p.1), w))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("ProductSolution(mse={})", self.inner.mse)
    }
}

/// Predictor from finitely many observations.
#[pyclass(name = "DiscreteModel", module = "blup", frozen)]
struct PyDiscreteModel {
    inner: DiscreteModel,
}

fn point(coords: &[f64]) -> PyResult<Point> {
    match coords {
        [t] => Ok(Point::Line(*t)),
        [x, y] => Ok(Point::Plane(*x, *y)),
        _ => Err(PyValueError::new_err("target needs one or two coordinates")),
    }
}

#[pymethods]
impl PyDiscreteModel {
    #[new]
    fn new(kernel: &PyKernel, trend: &PyTrend, design: &PyDesign) -> PyResult<Self> {
        Ok(PyDiscreteModel {
            inner: DiscreteModel::new(kernel.inner.clone(), trend.inner.clone(), design.inner.clone()).map_err(err)?,
        })
    }

    /// Predict `y^(p)(t0)`; pass a 2-tuple for 2D designs.
    #[pyo3(signature = (t0, p = 0))]
    fn predict(&self, t0: Vec<f64>, p: u8) -> PyResult<PySolution> {
        Ok(PySolution {
            inner: self.inner.predict(&point(&t0)?, Pattern::order(p)).map_err(err)?,
        })
    }

    /// Predict the weighted average `sum w_i y(t_i)` of `(t_i, w_i)` atoms.
    fn predict_average(&self, nu: Vec<(f64, f64)>) -> PyResult<PySolution> {
        let atoms: Vec<(Point, f64)> = nu.into_iter().map(|(t, w)| (Point::Line(t), w)).collect();
        Ok(PySolution {
            inner: self.inner.predict_average(&atoms).map_err(err)?,
        })
    }
}

/// Predictor from a path observed on `[a, b]`.
#[pyclass(name = "ContinuousModel", module = "blup", frozen)]
struct PyContinuousModel {
    inner: ContinuousModel,
}

#[pymethods]
impl PyContinuousModel {
    #[new]
    #[pyo3(signature = (kernel, trend, a = 0.0, b = 1.0))]
    fn new(kernel: &PyKernel, trend: &PyTrend, a: f64, b: f64) -> PyResult<Self> {
        Ok(PyContinuousModel {
            inner: ContinuousModel::new(kernel.inner.clone(), trend.inner.clone(), a, b).map_err(err)?,
        })
    }

    #[pyo3(signature = (t0, p = 0))]
    fn blup(&self, t0: f64, p: u8) -> PyResult<PyContinuousSolution> {
        Ok(PyContinuousSolution {
            inner: self.inner.blup(t0, p).map_err(err)?,
        })
    }

    fn blup_average(&self, nu: Vec<(f64, f64)>) -> PyResult<PyContinuousSolution> {
        Ok(PyContinuousSolution {
            inner: self.inner.blup_average(&nu).map_err(err)?,
        })
    }
}

/// Separable kernel `K(t1, s1) K(t2, s2)` with a constant trend on a square.
#[pyclass(name = "ProductModel", module = "blup", frozen)]
struct PyProductModel {
    inner: ProductModel,
}

#[pymethods]
impl PyProductModel {
    #[new]
    #[pyo3(signature = (kernel, interval = (0.0, 1.0)))]
    fn new(kernel: &PyKernel, interval: (f64, f64)) -> PyResult<Self> {
        let k = kernel.inner.clone();
        Ok(PyProductModel {
            inner: ProductModel::new(k.clone(), k, [interval, interval]).map_err(err)?,
        })
    }

    /// Prediction from the whole observed square.
    fn blup(&self, t1: f64, t2: f64) -> PyResult<PyProductSolution> {
        Ok(PyProductSolution {
            inner: self.inner.blup((t1, t2)).map_err(err)?,
        })
    }

    /// Prediction from a full grid family (`xi_N2_0_0_0` or `xi_N2_N2_N2_N2`) with `n` points per axis.
    fn predict(&self, family: &str, n: usize, t1: f64, t2: f64) -> PyResult<PySolution> {
        let family: DesignFamily = family.parse().map_err(err)?;
        let model = self.inner.tensor_grid(family, n).map_err(err)?;
        Ok(PySolution {
            inner: model.predict((t1, t2)).map_err(err)?,
        })
    }

    /// Root MSE on a `resolution x resolution` grid: `(t1, t2, rmse)` with
    /// `rmse[i * len(t2) + j]`. `family=None` uses the whole observed square.
    #[pyo3(signature = (family = None, n = 0, region = (0.5, 2.0, 0.5, 2.0), resolution = DEFAULT_RESOLUTION))]
    fn mse_grid(
        &self,
        family: Option<&str>,
        n: usize,
        region: (f64, f64, f64, f64),
        resolution: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let source = match family {
            Some(tag) => GridSource::Family(tag.parse().map_err(err)?, n),
            None => GridSource::Continuous,
        };
        let region = Region {
            t1: (region.0, region.1),
            t2: (region.2, region.3),
        };
        let g = mse_grid(&self.inner, &source, region, (resolution, resolution)).map_err(err)?;
        Ok((g.t1, g.t2, g.rmse))
    }
}

/// Recomputed reference table.
#[pyclass(name = "Table", module = "blup", frozen)]
struct PyTable {
    inner: tables::TableReport,
}

#[pymethods]
impl PyTable {
    #[getter]
    fn title(&self) -> String {
        self.inner.title.clone()
    }

    /// `(row, col, value, reference, tolerance)` per cell.
    #[getter]
    fn cells(&self) -> Vec<(String, String, f64, f64, f64)> {
        self.inner
            .cells
            .iter()
            .map(|c| (c.row.clone(), c.col.clone(), c.value, c.reference, c.tolerance))
            .collect()
    }

    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    fn failures(&self) -> Vec<String> {
        self.inner.failures()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Recompute reference table `id` (1 to 4).
#[pyfunction]
fn reproduce_table(id: u8) -> PyResult<PyTable> {
    Ok(PyTable {
        inner: tables::reproduce(id).map_err(err)?,
    })
}

#[pymodule]
fn blup(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BlupError", m.py().get_type::<BlupError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyTrend>()?;
    m.add_class::<PyDesign>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyContinuousSolution>()?;
    m.add_class::<PyProductSolution>()?;
    m.add_class::<PyDiscreteModel>()?;
    m.add_class::<PyContinuousModel>()?;
    m.add_class::<PyProductModel>()?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(reproduce_table, m)?)?;
    Ok(())
}
