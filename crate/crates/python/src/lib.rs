//! Python bindings. Matrices cross the boundary as lists of rows.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bridgenet::bridge::{
    compose_ensemble, composition_flops, train_bridge as train_bridge_rs, BridgeKind, BridgeModel, BridgeSpec,
    Endpoint, Member, MixupCfg,
};
use bridgenet::dataio::{self, load_checkpoint, save_checkpoint, Checkpoint};
use bridgenet::metrics::{self, DEEBaseline, EvalReport, ProbMatrix, DEFAULT_BINS};
use bridgenet::nn::{self, count_flops, ArchSpec, OptimizerCfg, StepLog};
use bridgenet::subspace::{self, BezierCurve};
use bridgenet::{Error, Matrix};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Diverged(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for bridgenet::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).py()
}

fn probs(rows: Vec<Vec<f64>>) -> PyResult<ProbMatrix> {
    ProbMatrix::from_rows(&rows).py()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn prob_rows(p: &ProbMatrix) -> Vec<Vec<f64>> {
    p.iter_rows().map(<[f64]>::to_vec).collect()
}

/// `(step, lr, loss, r)` per optimizer step.
type LogRows = Vec<(usize, f64, f64, Option<f64>)>;

fn log_rows(log: &[StepLog]) -> LogRows {
    log.iter().map(|s| (s.step, s.lr, s.loss, s.r)).collect()
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("acc", r.acc)?;
    d.set_item("nll", r.nll)?;
    d.set_item("ece", r.ece)?;
    d.set_item("bs", r.brier)?;
    d.set_item("dee", r.dee)?;
    d.set_item("temperature", r.temperature)?;
    d.set_item("n", r.n)?;
    Ok(d)
}

fn optimizer(
    lr: f64,
    steps: usize,
    batch_size: usize,
    seed: u64,
    momentum: f64,
    weight_decay: f64,
) -> PyResult<OptimizerCfg> {
    let cfg = OptimizerCfg {
        base_lr: lr,
        momentum,
        weight_decay,
        total_steps: steps,
        batch_size,
        seed,
    };
    cfg.validate().py()?;
    Ok(cfg)
}

/// Labelled points with `k` classes.
#[pyclass(name = "Dataset", module = "bridgenet_py", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset(dataio::Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    fn new(x: Vec<Vec<f64>>, y: Vec<usize>, k: usize) -> PyResult<Self> {
        Ok(Self(dataio::Dataset::new(matrix(x)?, y, k, "python").py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(dataio::load_csv(&path).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataio::save_csv(&self.0, &path).py()
    }

    /// Stratified (train, val, test) split.
    fn split(&self, ratios: (f64, f64, f64), seed: u64) -> PyResult<(Self, Self, Self)> {
        let (a, b, c) = dataio::split(&self.0, ratios, seed).py()?;
        Ok((Self(a), Self(b), Self(c)))
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows(&self.0.x)
    }

    #[getter]
    fn y(&self) -> Vec<usize> {
        self.0.y.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn gen_spirals(n_per_class: usize, classes: usize, noise: f64, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset(dataio::gen_spirals(n_per_class, classes, noise, seed).py()?))
}

#[pyfunction]
#[pyo3(signature = (n_per_class, classes, dim, separation, noise, seed))]
fn gen_blobs(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> PyResult<PyDataset> {
    Ok(PyDataset(
        dataio::gen_blobs(n_per_class, classes, dim, separation, noise, seed).py()?,
    ))
}

/// Residual MLP architecture.
#[pyclass(name = "Arch", module = "bridgenet_py", skip_from_py_object)]
#[derive(Clone)]
struct PyArch(ArchSpec);

#[pymethods]
impl PyArch {
    #[new]
    #[pyo3(signature = (input_dim, classes, width, blocks, feature_tap = 2))]
    fn new(input_dim: usize, classes: usize, width: usize, blocks: usize, feature_tap: usize) -> PyResult<Self> {
        Ok(Self(
            ArchSpec::residual_mlp(input_dim, classes, width, blocks, feature_tap).py()?,
        ))
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.param_count()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.0.feature_dim()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.class_count()
    }

    /// Multiply-add count of one forward pass on a single input.
    fn flops(&self) -> u64 {
        count_flops(&self.0, None).total_flops
    }
}

/// One trained network.
#[pyclass(name = "Network", module = "bridgenet_py", from_py_object)]
#[derive(Clone)]
struct PyNetwork(nn::Network);

#[pymethods]
impl PyNetwork {
    #[new]
    fn new(arch: &PyArch, seed: u64) -> Self {
        Self(nn::Network::init(arch.0.clone(), seed))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(load_checkpoint(&path).py()?.to_network().py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&Checkpoint::from_network(&self.0, BTreeMap::new()), &path).py()
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(prob_rows(&self.0.predict(&matrix(x)?).py()?))
    }

    /// Tapped features feeding a bridge.
    fn features(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.0.predict_with_features(&matrix(x)?).py()?.1))
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id()
    }

    #[getter]
    fn arch(&self) -> PyArch {
        PyArch(self.0.arch.clone())
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.0.params.as_slice().to_vec()
    }

    fn mean_loss(&self, data: &PyDataset) -> PyResult<f64> {
        nn::mean_loss(&self.0.arch, self.0.params.as_slice(), &data.0).py()
    }
}

/// Trains a network from `seed`; returns it with the per-step log
/// `(step, lr, loss, r)`.
#[pyfunction]
#[pyo3(signature = (arch, data, lr, steps, batch_size, seed, momentum = 0.9, weight_decay = 5e-4))]
#[allow(clippy::too_many_arguments)]
fn train_mode(
    arch: &PyArch,
    data: &PyDataset,
    lr: f64,
    steps: usize,
    batch_size: usize,
    seed: u64,
    momentum: f64,
    weight_decay: f64,
) -> PyResult<(PyNetwork, LogRows)> {
    let cfg = optimizer(lr, steps, batch_size, seed, momentum, weight_decay)?;
    let (net, log) = nn::train_network(&arch.0, &data.0, &cfg).py()?;
    Ok((PyNetwork(net), log_rows(&log)))
}

/// Quadratic Bezier curve between two modes.
#[pyclass(name = "BezierCurve", module = "bridgenet_py", skip_from_py_object)]
#[derive(Clone)]
struct PyCurve(BezierCurve);

#[pymethods]
impl PyCurve {
    /// Curve whose pin-point is the midpoint of the segment.
    #[staticmethod]
    fn between(a: &PyNetwork, b: &PyNetwork) -> PyResult<Self> {
        Ok(Self(BezierCurve::between(&a.0, &b.0).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(load_checkpoint(&path).py()?.to_curve().py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&Checkpoint::from_curve(&self.0, BTreeMap::new()), &path).py()
    }

    fn curve_point(&self, r: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.curve_point(r).py()?.as_slice().to_vec())
    }

    fn network_at(&self, r: f64) -> PyResult<PyNetwork> {
        Ok(PyNetwork(self.0.network_at(r).py()?))
    }

    fn endpoint_i(&self) -> PyNetwork {
        PyNetwork(self.0.endpoint_i())
    }

    fn endpoint_j(&self) -> PyNetwork {
        PyNetwork(self.0.endpoint_j())
    }

    /// `grid` rows of `(r, loss, acc)` at evenly spaced positions.
    fn scan(&self, data: &PyDataset, grid: usize) -> PyResult<Vec<(f64, f64, f64)>> {
        let rows = subspace::scan_curve(&self.0, &data.0, grid).py()?;
        Ok(rows.iter().map(|r| (r.r, r.loss, r.acc)).collect())
    }
}

#[pyfunction]
#[pyo3(signature = (curve, data, lr, steps, batch_size, seed, momentum = 0.9, weight_decay = 5e-4))]
#[allow(clippy::too_many_arguments)]
fn train_curve(
    curve: &PyCurve,
    data: &PyDataset,
    lr: f64,
    steps: usize,
    batch_size: usize,
    seed: u64,
    momentum: f64,
    weight_decay: f64,
) -> PyResult<(PyCurve, LogRows)> {
    let cfg = optimizer(lr, steps, batch_size, seed, momentum, weight_decay)?;
    let (c, log) = subspace::train_pinpoint(&curve.0, &data.0, &cfg).py()?;
    Ok((PyCurve(c), log_rows(&log)))
}

/// Bridge network imitating a curve model from endpoint features.
#[pyclass(name = "Bridge", module = "bridgenet_py", skip_from_py_object)]
#[derive(Clone)]
struct PyBridge(BridgeModel);

#[pymethods]
impl PyBridge {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(load_checkpoint(&path).py()?.to_bridge().py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&Checkpoint::from_bridge(&self.0, BTreeMap::new()).py()?, &path).py()
    }

    /// Probabilities from raw inputs, running the base network(s) first.
    #[pyo3(signature = (x, base_i, base_j = None))]
    fn predict(&self, x: Vec<Vec<f64>>, base_i: &PyNetwork, base_j: Option<&PyNetwork>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(x)?;
        let zi = base_i.0.predict_with_features(&x).py()?.1;
        let zj = base_j
            .map(|b| b.0.predict_with_features(&x).map(|r| r.1))
            .transpose()
            .py()?;
        Ok(prob_rows(&self.0.predict(&zi, zj.as_ref()).py()?))
    }

    #[getter]
    fn kind(&self) -> u8 {
        match self.0.spec.kind {
            BridgeKind::TypeI => 1,
            BridgeKind::TypeII => 2,
        }
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.spec.width
    }

    /// Forward FLOPs relative to `arch`.
    fn relative_flops(&self, arch: &PyArch) -> PyResult<f64> {
        let base = count_flops(&arch.0, None);
        Ok(count_flops(&self.0.spec.arch().py()?, Some(&base))
            .relative_flops
            .unwrap_or(f64::NAN))
    }
}

/// Distills the curve model at `target_r` into a type 1 or type 2 bridge.
#[pyfunction]
#[pyo3(signature = (kind, curve, data, width, lr, steps, batch_size, seed, alpha = 0.4, target_r = 0.5, feed = "a"))]
#[allow(clippy::too_many_arguments)]
fn train_bridge(
    kind: u8,
    curve: &PyCurve,
    data: &PyDataset,
    width: usize,
    lr: f64,
    steps: usize,
    batch_size: usize,
    seed: u64,
    alpha: f64,
    target_r: f64,
    feed: &str,
) -> PyResult<(PyBridge, LogRows)> {
    let c = &curve.0;
    let kind = match kind {
        1 => BridgeKind::TypeI,
        2 => BridgeKind::TypeII,
        k => return Err(PyValueError::new_err(format!("kind must be 1 or 2, got {k}"))),
    };
    let feed = Endpoint::parse(feed).py()?;
    let spec = BridgeSpec::new(kind, c.arch.feature_dim(), width, c.arch.class_count(), target_r).py()?;
    let (base_i, base_j) = match (kind, feed) {
        (BridgeKind::TypeI, Endpoint::A) => (c.endpoint_i(), None),
        (BridgeKind::TypeI, Endpoint::B) => (c.endpoint_j(), None),
        (BridgeKind::TypeII, _) => (c.endpoint_i(), Some(c.endpoint_j())),
    };
    let init = BridgeModel::init(spec, c.identity(), (kind == BridgeKind::TypeI).then_some(feed), seed).py()?;
    let cfg = optimizer(lr, steps, batch_size, seed.wrapping_add(1), 0.9, 5e-4)?;
    let mix = MixupCfg {
        alpha,
        seed: seed.wrapping_add(2),
    };
    let (b, log) = train_bridge_rs(&init, &base_i, base_j.as_ref(), c, &data.0, &cfg, &mix).py()?;
    Ok((PyBridge(b), log_rows(&log)))
}

fn members(items: &[Bound<'_, PyAny>]) -> PyResult<Vec<Member>> {
    items
        .iter()
        .map(|item| {
            if let Ok(n) = item.extract::<PyRef<PyNetwork>>() {
                Ok(Member::Mode(n.0.clone()))
            } else if let Ok(b) = item.extract::<PyRef<PyBridge>>() {
                Ok(Member::Bridge(b.0.clone()))
            } else if let Ok((c, r)) = item.extract::<(PyRef<PyCurve>, f64)>() {
                Ok(Member::Bezier { curve: c.0.clone(), r })
            } else {
                Err(PyValueError::new_err("members are Network, Bridge or (BezierCurve, r)"))
            }
        })
        .collect()
}

/// Ensemble probabilities. Members are networks, bridges or `(curve, r)`
/// pairs; `bases` supplies networks bridges need that are not members.
#[pyfunction]
#[pyo3(signature = (items, x, bases = Vec::new()))]
fn ensemble_predict(items: Vec<Bound<'_, PyAny>>, x: Vec<Vec<f64>>, bases: Vec<PyNetwork>) -> PyResult<Vec<Vec<f64>>> {
    let declared: Vec<nn::Network> = bases.into_iter().map(|b| b.0).collect();
    Ok(prob_rows(
        &compose_ensemble(&members(&items)?, &declared, &matrix(x)?).py()?,
    ))
}

/// Total forward FLOPs of an ensemble relative to `arch`.
#[pyfunction]
#[pyo3(signature = (items, arch, bases = Vec::new()))]
fn ensemble_flops(items: Vec<Bound<'_, PyAny>>, arch: &PyArch, bases: Vec<PyNetwork>) -> PyResult<f64> {
    let declared: Vec<nn::Network> = bases.into_iter().map(|b| b.0).collect();
    let report = composition_flops(&members(&items)?, &declared).py()?;
    Ok(report
        .relative_to(&count_flops(&arch.0, None))
        .relative_flops
        .unwrap_or(f64::NAN))
}

#[pyfunction]
fn accuracy(p: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    metrics::accuracy(&probs(p)?, &labels).py()
}

#[pyfunction]
fn nll(p: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    metrics::nll(&probs(p)?, &labels).py()
}

#[pyfunction]
fn brier(p: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    metrics::brier(&probs(p)?, &labels).py()
}

#[pyfunction]
#[pyo3(signature = (p, labels, n_bins = DEFAULT_BINS))]
fn ece(p: Vec<Vec<f64>>, labels: Vec<usize>, n_bins: usize) -> PyResult<f64> {
    metrics::ece(&probs(p)?, &labels, n_bins).py()
}

#[pyfunction]
fn fit_temperature(p: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    metrics::fit_temperature(&probs(p)?, &labels).py()
}

#[pyfunction]
fn apply_temperature(p: Vec<Vec<f64>>, t: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(prob_rows(&metrics::apply_temperature(&probs(p)?, t).py()?))
}

#[pyfunction]
fn r2_score(target: Vec<Vec<f64>>, pred: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::r2_score(&probs(target)?, &probs(pred)?).py()
}

#[pyfunction]
fn mean_kl(target: Vec<Vec<f64>>, pred: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::mean_kl(&probs(target)?, &probs(pred)?).py()
}

/// Deep-ensemble equivalent of `nll` against `(m, nll)` baseline points.
#[pyfunction]
fn dee(nll: f64, baseline: Vec<(usize, f64)>) -> PyResult<f64> {
    metrics::dee(nll, &DEEBaseline::new(baseline).py()?).py()
}

/// Temperature fitted on validation, metrics on test.
#[pyfunction]
#[pyo3(signature = (test, test_labels, val, val_labels, n_bins = DEFAULT_BINS, baseline = None))]
fn evaluate_calibrated<'py>(
    py: Python<'py>,
    test: Vec<Vec<f64>>,
    test_labels: Vec<usize>,
    val: Vec<Vec<f64>>,
    val_labels: Vec<usize>,
    n_bins: usize,
    baseline: Option<Vec<(usize, f64)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let baseline = baseline.map(DEEBaseline::new).transpose().py()?;
    let report = metrics::evaluate_calibrated(
        &probs(test)?,
        &test_labels,
        &probs(val)?,
        &val_labels,
        n_bins,
        baseline.as_ref(),
    )
    .py()?;
    report_dict(py, &report)
}

#[pymodule]
fn bridgenet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyArch>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyCurve>()?;
    m.add_class::<PyBridge>()?;
    m.add_function(wrap_pyfunction!(gen_spirals, m)?)?;
    m.add_function(wrap_pyfunction!(gen_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(train_mode, m)?)?;
    m.add_function(wrap_pyfunction!(train_curve, m)?)?;
    m.add_function(wrap_pyfunction!(train_bridge, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_predict, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_flops, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(nll, m)?)?;
    m.add_function(wrap_pyfunction!(brier, m)?)?;
    m.add_function(wrap_pyfunction!(ece, m)?)?;
    m.add_function(wrap_pyfunction!(fit_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(apply_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(r2_score, m)?)?;
    m.add_function(wrap_pyfunction!(mean_kl, m)?)?;
    m.add_function(wrap_pyfunction!(dee, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_calibrated, m)?)?;
    Ok(())
}
