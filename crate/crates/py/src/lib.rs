//! Python bindings: `import moran`.
#![allow(unexpected_cfgs, clippy::useless_conversion)]

use moran_core::certificate::{self, Certificate};
use moran_core::config::SystemConfig;
use moran_core::existence::{existence_check, Existence, GeneralSystem};
use moran_core::fourier::{zero_set_member, TransformEvaluator};
use moran_core::spectra::{self, SpectrumBuildParams};
use moran_core::system::{CaseClass, Distinctness, Hypothesis};
use moran_core::tiling;
use moran_core::{ExactRational, MoranError, SequenceSpec};
use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(moran, MoranException, PyException);

fn err(e: MoranError) -> PyErr {
    MoranException::new_err(e.to_string())
}

/// `(check, pass, detail)` rows of a verification report.
type CheckRows = Vec<(String, bool, Option<String>)>;

fn spec(pre: Vec<i64>, per: Option<Vec<i64>>, prefix: Option<Vec<i64>>, name: &str) -> PyResult<SequenceSpec<i64>> {
    match (per, prefix) {
        (Some(per), None) => Ok(SequenceSpec::periodic(pre, per)),
        (None, Some(v)) if pre.is_empty() => Ok(SequenceSpec::prefix(v)),
        _ => Err(MoranException::new_err(format!("{name}: give exactly one of period or prefix"))),
    }
}

/// Cantor-Moran system with digits `{0, ..., N-1} t_k` and scales `b_k`.
#[pyclass(name = "MoranSystem", module = "moran")]
#[derive(Clone)]
struct PySystem {
    inner: moran_core::MoranSystem,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (n, b_period=None, t_period=None, b_preperiod=vec![], t_preperiod=vec![], b_prefix=None, t_prefix=None))]
    fn new(
        n: u32,
        b_period: Option<Vec<i64>>,
        t_period: Option<Vec<i64>>,
        b_preperiod: Vec<i64>,
        t_preperiod: Vec<i64>,
        b_prefix: Option<Vec<i64>>,
        t_prefix: Option<Vec<i64>>,
    ) -> PyResult<Self> {
        let b = spec(b_preperiod, b_period, b_prefix, "b")?;
        let t = spec(t_preperiod, t_period, t_prefix, "t")?;
        Ok(PySystem { inner: moran_core::MoranSystem::new(n, b, t).map_err(err)? })
    }

    /// Parse the line-oriented config format.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        let cfg = SystemConfig::parse(text).map_err(err)?;
        Ok(PySystem { inner: cfg.system().map_err(err)? })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    fn canonical(&self) -> String {
        self.inner.canonical()
    }

    fn fingerprint(&self) -> String {
        certificate::fingerprint(&self.inner)
    }

    fn s_values(&self, upto: usize) -> PyResult<Vec<i64>> {
        self.inner.s_values(upto).map_err(err)
    }

    fn frak_n(&self, k: usize) -> PyResult<usize> {
        self.inner.frak_n(k).map_err(err)
    }

    fn alpha(&self) -> PyResult<usize> {
        self.inner.alpha().map_err(err)
    }

    /// `None` when distinct, else the colliding pair `(i, j, value)`.
    fn collision(&self) -> PyResult<Option<(usize, usize, i64)>> {
        let w = self.inner.collision_window().or(self.inner.horizon()).unwrap_or(64);
        Ok(match self.inner.distinctness_check(w).map_err(err)? {
            Distinctness::Distinct { .. } => None,
            Distinctness::Collision { i, j, value } => Some((i, j, value)),
        })
    }

    /// `"I"` with its first breakpoints, `"II"` with `k0`, or `"undetermined"`.
    fn case<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new_bound(py);
        let w = self.inner.collision_window().or(self.inner.horizon()).unwrap_or(64);
        match self.inner.case_classify(w).map_err(err)? {
            CaseClass::CaseI { pattern } => {
                d.set_item("case", "I")?;
                d.set_item("breakpoints", pattern.breakpoints_upto(pattern.start + 4 * pattern.period))?;
            }
            CaseClass::CaseII { k0 } => {
                d.set_item("case", "II")?;
                d.set_item("k0", k0)?;
            }
            CaseClass::Undetermined { observed, .. } => {
                d.set_item("case", "undetermined")?;
                d.set_item("breakpoints", observed)?;
            }
        }
        Ok(d)
    }

    /// `m0`, or raises naming the failing index.
    fn hypothesis(&self) -> PyResult<usize> {
        match self.inner.spectral_hypothesis_check().map_err(err)? {
            Hypothesis::Satisfied { m0 } => Ok(m0),
            Hypothesis::Violated { k, b, t } => Err(err(MoranError::HypothesisViolated { k, b, t })),
        }
    }

    fn normalize(&self) -> PyResult<(PySystem, u32)> {
        let (s, m) = self.inner.normalize().map_err(err)?;
        Ok((PySystem { inner: s }, m))
    }

    /// `"converges"`, `"diverges"` or `"unknown"`.
    #[pyo3(signature = (depth=20))]
    fn existence(&self, depth: usize) -> PyResult<&'static str> {
        Ok(match existence_check(&GeneralSystem::from_system(&self.inner), depth).map_err(err)? {
            Existence::Converges { .. } => "converges",
            Existence::Diverges { .. } => "diverges",
            Existence::Unknown { .. } => "unknown",
        })
    }

    fn tile_predicate(&self, k: usize) -> PyResult<bool> {
        tiling::tile_predicate(&self.inner, k).map_err(err)
    }

    /// Sorted `D-bar_k`.
    fn aggregate(&self, k: usize) -> PyResult<Vec<BigInt>> {
        Ok(tiling::aggregate(&self.inner, k, tiling::DEFAULT_ELEMENT_CAP).map_err(err)?.elements)
    }

    /// `(complement, modulus)`.
    fn complement(&self, k: usize) -> PyResult<(Vec<BigInt>, BigInt)> {
        let c = tiling::build_complement(&self.inner, k, tiling::DEFAULT_ELEMENT_CAP).map_err(err)?;
        Ok((c.elements, c.modulus))
    }

    /// `mu_k^(xi)` as a complex number.
    fn mu_hat(&self, k: usize, xi: f64) -> PyResult<num_complex_compat::C> {
        let ev = TransformEvaluator::new(&self.inner).map_err(err)?;
        let v = ev.mu_hat_k(k, xi).map_err(err)?;
        Ok(num_complex_compat::C(v.re, v.im))
    }

    /// `(|nu_{>k}^(xi)| truncated at depth, error bound)`.
    #[pyo3(signature = (k, xi, depth=40))]
    fn nu_tail(&self, k: usize, xi: f64, depth: usize) -> PyResult<(f64, f64)> {
        let ev = TransformEvaluator::new(&self.inner).map_err(err)?;
        let v = ev.nu_hat_tail(k, xi, depth).map_err(err)?;
        Ok((v.abs(), v.err))
    }

    /// Component index whose zero set contains `num / den`, or `None`.
    #[pyo3(signature = (num, den=BigInt::from(1)))]
    fn zero_set_member(&self, num: BigInt, den: BigInt) -> PyResult<Option<usize>> {
        let xi = ExactRational::new(num, den).map_err(err)?;
        zero_set_member(&self.inner, &xi, None).map_err(err)
    }

    /// `(orthogonal, witness difference or None)`.
    fn verify_orthogonal(&self, lambdas: Vec<BigInt>, k: usize) -> PyResult<(bool, Option<BigInt>)> {
        let o = spectra::verify_orthogonal(&self.inner, &lambdas, k).map_err(err)?;
        Ok((o.orthogonal, o.witness))
    }

    fn verify_spectrum_finite(&self, lambdas: Vec<BigInt>, k: usize) -> PyResult<bool> {
        spectra::verify_spectrum_finite(&self.inner, &lambdas, k).map_err(err)
    }

    /// `max |Q - 1|` on `points` equally spaced samples of `[0, 1)`.
    #[pyo3(signature = (lambdas, k, points=1000))]
    fn q_deviation(&self, lambdas: Vec<BigInt>, k: usize, points: usize) -> PyResult<f64> {
        Ok(spectra::q_grid_check(&self.inner, &lambdas, k, &spectra::unit_grid(points), 0.0).map_err(err)?.max_dev)
    }

    /// Spectrum levels of the normalized system, each `(k, elements)`.
    fn spectrum_levels(&self, levels: usize) -> PyResult<Vec<(usize, Vec<BigInt>)>> {
        let (norm, _) = self.inner.normalize().map_err(err)?;
        let run = spectra::build_spectrum(&norm, levels, None, &SpectrumBuildParams::default()).map_err(err)?;
        Ok(run.levels.into_iter().map(|l| (l.k, l.elements)).collect())
    }

    /// Tile certificate as JSON.
    fn tile_certificate(&self, k: usize) -> PyResult<String> {
        certificate::tile_certificate(&self.inner, k, tiling::DEFAULT_ELEMENT_CAP)
            .and_then(|c| c.to_json())
            .map_err(err)
    }

    /// Spectrum certificate as JSON.
    fn spectrum_certificate(&self, levels: usize) -> PyResult<String> {
        certificate::spectrum_certificate(&self.inner, levels, &SpectrumBuildParams::default())
            .and_then(|c| c.to_json())
            .map_err(err)
    }

    /// `(pass, [(check, pass, detail)])` for a JSON certificate.
    fn verify_certificate(&self, json: &str) -> PyResult<(bool, CheckRows)> {
        let cert = Certificate::from_json(json).map_err(err)?;
        let rep = certificate::verify_certificate(&cert, &self.inner).map_err(err)?;
        Ok((rep.pass, rep.checks.into_iter().map(|c| (c.name, c.pass, c.detail)).collect()))
    }

    fn __repr__(&self) -> String {
        format!("MoranSystem({})", self.inner.canonical())
    }
}

mod num_complex_compat {
    use pyo3::prelude::*;
    use pyo3::types::PyComplex;

    pub struct C(pub f64, pub f64);

    impl IntoPy<PyObject> for C {
        fn into_py(self, py: Python<'_>) -> PyObject {
            PyComplex::from_doubles_bound(py, self.0, self.1).into_any().unbind()
        }
    }
}

#[pymodule]
fn moran(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add("MoranError", m.py().get_type_bound::<MoranException>())?;
    m.add("__version__", certificate::TOOL_VERSION)?;
    Ok(())
}
