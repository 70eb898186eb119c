//! Python bindings for the gridtab core: load tables, fit codecs, build
//! layouts, run audits and the gradient check.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gridtab::audit::{self, AuditOptions, SemanticRule};
use gridtab::codec::{fit_codec, GRID_HEIGHT, GRID_WIDTH};
use gridtab::diffusion::{fixture, grad_check, GradCheckOptions, NetConfig};
use gridtab::pipeline::{self, build_layout, load_inputs, RunConfig};
use gridtab::{CleaningPolicy, Error, LayoutStrategy, MissingValues};

fn err(e: Error) -> PyErr {
    match e {
        Error::Numeric(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn strategy(name: &str) -> PyResult<LayoutStrategy> {
    name.parse().map_err(err)
}

/// A cleaned table bound to its schema.
#[pyclass(frozen, module = "gridtab_py")]
struct Table {
    inner: gridtab::Table,
}

#[pymethods]
impl Table {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.schema().names().map(str::to_string).collect()
    }

    fn vocabulary(&self, column: &str) -> PyResult<Vec<String>> {
        let i = self
            .inner
            .schema()
            .index_of(column)
            .ok_or_else(|| PyValueError::new_err(format!("no column `{column}`")))?;
        Ok(self.inner.schema().column(i).vocabulary.clone())
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn head(&self, n: usize) -> Table {
        Table { inner: self.inner.head(n) }
    }
}

/// Fitted scalers, vocabularies and block table.
#[pyclass(frozen, module = "gridtab_py")]
struct Codec {
    inner: gridtab::CodecSpec,
}

#[pymethods]
impl Codec {
    #[getter]
    fn encoded_width(&self) -> usize {
        self.inner.encoded_width()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// `(column, offset, width)` for every block.
    fn blocks(&self) -> Vec<(String, usize, usize)> {
        self.inner
            .blocks()
            .iter()
            .map(|b| (b.column_name.clone(), b.offset, b.width))
            .collect()
    }

    fn encode(&self, table: &Table) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .encode_table(&table.inner)
            .map(|v| v.chunks(self.inner.encoded_width()).map(<[f64]>::to_vec).collect())
            .map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (schema, csv, has_header = true, keep_missing = false))]
fn load(schema: PathBuf, csv: PathBuf, has_header: bool, keep_missing: bool) -> PyResult<Table> {
    let policy = CleaningPolicy {
        has_header,
        missing: if keep_missing { MissingValues::KeepAsCategory } else { MissingValues::DropIncomplete },
        ..CleaningPolicy::default()
    };
    let (_, inner) = load_inputs(&schema, &csv, &policy).map_err(err)?;
    Ok(Table { inner })
}

#[pyfunction]
#[pyo3(signature = (rows = gridtab::toy::TOY_ROWS, seed = 42))]
fn toy_table(rows: usize, seed: u64) -> PyResult<Table> {
    gridtab::toy::toy_table(rows, seed).map(|inner| Table { inner }).map_err(err)
}

#[pyfunction]
fn fit(table: &Table) -> PyResult<Codec> {
    fit_codec(&table.inner).map(|inner| Codec { inner }).map_err(err)
}

/// Column placement order and the flat cell index of every slot.
#[pyfunction]
#[pyo3(signature = (codec, table, strategy = "baseline", plan = None))]
fn layout(
    codec: &Codec,
    table: &Table,
    strategy: &str,
    plan: Option<PathBuf>,
) -> PyResult<(Vec<String>, Vec<usize>)> {
    let l = build_layout(self::strategy(strategy)?, &codec.inner, &table.inner, plan.as_deref())
        .map_err(err)?;
    Ok((l.column_order().to_vec(), l.slot_cells().to_vec()))
}

#[pyfunction]
fn fidelity<'py>(py: Python<'py>, real: &Table, synth: &Table) -> PyResult<Bound<'py, PyDict>> {
    let f = audit::fidelity(&real.inner, &synth.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("overall", f.overall)?;
    d.set_item("column_shapes", f.column_shapes_mean)?;
    d.set_item("pairwise", f.pairwise_mean)?;
    Ok(d)
}

/// Violation counts per rule plus `any`.
#[pyfunction]
fn semantic_check<'py>(py: Python<'py>, table: &Table) -> PyResult<Bound<'py, PyDict>> {
    let r = audit::semantic_check(&table.inner).map_err(err)?;
    let d = PyDict::new(py);
    for rule in SemanticRule::ALL {
        d.set_item(rule.name(), r.rule(rule).count)?;
    }
    d.set_item("any", r.any_count)?;
    Ok(d)
}

/// Full audit report as a JSON document.
#[pyfunction]
#[pyo3(signature = (real, synth, test = None, seed = 0, disclosure = true))]
fn audit_json(real: &Table, synth: &Table, test: Option<&Table>, seed: u64, disclosure: bool) -> PyResult<String> {
    let opts = AuditOptions { strategy: None, seed, disclosure };
    audit::run_audit(&real.inner, &synth.inner, test.map(|t| &t.inner), &opts)
        .map(|r| r.to_json())
        .map_err(err)
}

/// Maximum relative error between backprop and central differences.
#[pyfunction]
#[pyo3(signature = (params = 256, seed = 7))]
fn gradcheck(params: usize, seed: u64) -> PyResult<f64> {
    let (net, batch) = fixture(NetConfig::tiny(GRID_HEIGHT, GRID_WIDTH), seed).map_err(err)?;
    let opts = GradCheckOptions { params, seed, ..Default::default() };
    grad_check(&net, &batch, &opts).map(|r| r.max_relative_error).map_err(err)
}

/// End-to-end run; returns the artifact paths written under `out`.
#[pyfunction]
#[pyo3(signature = (schema, train_csv, out, seed = 0, strategy = "baseline", epochs = 5, timesteps = 100, rows = 500, channels = 8, has_header = true, force = false))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    schema: PathBuf,
    train_csv: PathBuf,
    out: PathBuf,
    seed: u64,
    strategy: &str,
    epochs: usize,
    timesteps: usize,
    rows: usize,
    channels: usize,
    has_header: bool,
    force: bool,
) -> PyResult<Vec<String>> {
    let mut cfg = RunConfig::new(schema, train_csv, out, seed);
    cfg.strategy = self::strategy(strategy)?;
    cfg.rows = rows;
    cfg.has_header = has_header;
    cfg.force = force;
    cfg.train.epochs = epochs;
    cfg.train.timesteps = timesteps;
    cfg.train.base_channels = channels;
    let m = pipeline::cmd_pipeline(&cfg).map_err(err)?;
    Ok(m.artifacts.into_iter().map(|a| a.path).collect())
}

#[pymodule]
fn gridtab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Table>()?;
    m.add_class::<Codec>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(toy_table, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(layout, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(semantic_check, m)?)?;
    m.add_function(wrap_pyfunction!(audit_json, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
