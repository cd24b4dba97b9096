//! Line-oriented system configuration.
//!
//! ```text
//! # example system
//! N = 2
//! b.period = 18
//! t.period = [1, 4]
//! option.threshold_c = 0.001
//! ```
//!
//! Sequences take `preperiod`/`period` or `prefix`; lists are comma
//! separated, brackets optional. Integers only in the system itself.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{MoranError, Result};
use crate::sequence::SequenceSpec;
use crate::spectra::SpectrumBuildParams;
use crate::system::MoranSystem;
use crate::tiling::DEFAULT_ELEMENT_CAP;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Options {
    pub threshold_c: Option<f64>,
    pub epsilon0: Option<f64>,
    pub theta0: Option<f64>,
    pub sigma0: Option<f64>,
    pub element_cap: Option<usize>,
    pub depth: Option<usize>,
    pub window: Option<i64>,
    pub grid: Option<GridSpec>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n: u32,
    pub b: SequenceSpec<i64>,
    pub t: SequenceSpec<i64>,
    pub options: Options,
}

/// `points` equally spaced samples of `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / self.points as f64;
        (0..self.points).map(|i| self.lo + i as f64 * step).collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;

    /// `n` (on `[0, 1)`) or `lo:hi:n`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let count = |p: &str| match p.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("grid point count must be a positive integer, got `{p}`")),
        };
        let real = |p: &str| {
            p.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("invalid grid bound `{p}`"))
        };
        match parts.as_slice() {
            [n] => Ok(GridSpec { lo: 0.0, hi: 1.0, points: count(n)? }),
            [lo, hi, n] => {
                let (lo, hi) = (real(lo)?, real(hi)?);
                if hi <= lo {
                    return Err(format!("empty grid interval [{lo}, {hi})"));
                }
                Ok(GridSpec { lo, hi, points: count(n)? })
            }
            _ => Err(format!("grid must be `n` or `lo:hi:n`, got `{s}`")),
        }
    }
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(perr(line_no, None, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim().to_string();
            if !KNOWN.contains(&key.as_str()) {
                return Err(perr(line_no, Some(&key), "unknown key".into()));
            }
            if let Some((first, _)) = seen.get(&key) {
                return Err(perr(line_no, Some(&key), format!("duplicate key, first set on line {first}")));
            }
            seen.insert(key, (line_no, value.trim().to_string()));
        }
        let get = |k: &str| seen.get(k).map(|(l, v)| (*l, v.as_str()));
        let (nl, nv) = get("N").ok_or_else(|| MoranError::Parse("missing field `N`".into()))?;
        let n: u32 = nv.parse().map_err(|_| perr(nl, Some("N"), format!("invalid integer `{nv}`")))?;
        let b = sequence(&seen, "b")?;
        let t = sequence(&seen, "t")?;
        let options = Options {
            threshold_c: opt(&seen, "option.threshold_c", parse_real)?,
            epsilon0: opt(&seen, "option.epsilon0", parse_real)?,
            theta0: opt(&seen, "option.theta0", parse_real)?,
            sigma0: opt(&seen, "option.sigma0", parse_real)?,
            element_cap: opt(&seen, "option.element_cap", |v| {
                v.parse::<usize>().map_err(|_| format!("invalid count `{v}`"))
            })?,
            depth: opt(&seen, "option.depth", |v| v.parse::<usize>().map_err(|_| format!("invalid depth `{v}`")))?,
            window: opt(&seen, "option.window", |v| v.parse::<i64>().map_err(|_| format!("invalid window `{v}`")))?,
            grid: opt(&seen, "option.grid", GridSpec::from_str)?,
            out: opt(&seen, "option.out", |v| Ok(v.to_string()))?,
        };
        let cfg = SystemConfig { n, b, t, options };
        cfg.system().map_err(|e| MoranError::Parse(format!("config does not define a valid system: {e}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn system(&self) -> Result<MoranSystem> {
        MoranSystem::new(self.n, self.b.clone(), self.t.clone())
    }

    pub fn element_cap(&self) -> usize {
        self.options.element_cap.unwrap_or(DEFAULT_ELEMENT_CAP)
    }

    pub fn build_params(&self) -> SpectrumBuildParams {
        let mut p = SpectrumBuildParams::default();
        let o = &self.options;
        if let Some(v) = o.threshold_c {
            p.threshold_c = v;
        }
        if let Some(v) = o.epsilon0 {
            p.epsilon0 = v;
        }
        if let Some(v) = o.depth {
            p.depth = v;
        }
        if let Some(v) = o.window {
            p.offset_window = v;
        }
        p.theta0 = o.theta0;
        p.sigma0 = o.sigma0;
        p
    }
}

const KNOWN: &[&str] = &[
    "N",
    "b.preperiod",
    "b.period",
    "b.prefix",
    "t.preperiod",
    "t.period",
    "t.prefix",
    "option.threshold_c",
    "option.epsilon0",
    "option.theta0",
    "option.sigma0",
    "option.element_cap",
    "option.depth",
    "option.window",
    "option.grid",
    "option.out",
];

fn perr(line: usize, field: Option<&str>, msg: String) -> MoranError {
    match field {
        Some(f) => MoranError::Parse(format!("line {line}, field `{f}`: {msg}")),
        None => MoranError::Parse(format!("line {line}: {msg}")),
    }
}

fn parse_real(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("expected a positive decimal, got `{v}`")),
    }
}

fn opt<T>(
    seen: &BTreeMap<String, (usize, String)>,
    key: &str,
    f: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Option<T>> {
    match seen.get(key) {
        None => Ok(None),
        Some((line, v)) => f(v).map(Some).map_err(|m| perr(*line, Some(key), m)),
    }
}

fn int_list(line: usize, key: &str, v: &str) -> Result<Vec<i64>> {
    let inner = v.trim();
    let inner = inner.strip_prefix('[').map(|s| s.strip_suffix(']')).unwrap_or(Some(inner));
    let inner = inner.ok_or_else(|| perr(line, Some(key), "unbalanced brackets".into()))?;
    if inner.trim().is_empty() {
        return Ok(vec![]);
    }
    inner
        .split(',')
        .enumerate()
        .map(|(i, x)| {
            let x = x.trim();
            x.parse::<i64>().map_err(|_| perr(line, Some(key), format!("entry {} is not an integer: `{x}`", i + 1)))
        })
        .collect()
}

fn sequence(seen: &BTreeMap<String, (usize, String)>, name: &str) -> Result<SequenceSpec<i64>> {
    let get = |suffix: &str| {
        let key = format!("{name}.{suffix}");
        seen.get(&key).map(|(l, v)| int_list(*l, &key, v)).transpose()
    };
    let pre = get("preperiod")?;
    let per = get("period")?;
    let prefix = get("prefix")?;
    match (pre, per, prefix) {
        (_, Some(_), Some(_)) | (Some(_), None, Some(_)) => {
            let line = seen[&format!("{name}.prefix")].0;
            Err(perr(line, Some(&format!("{name}.prefix")), "cannot be combined with preperiod/period".into()))
        }
        (pre, Some(per), None) => {
            if per.is_empty() {
                let line = seen[&format!("{name}.period")].0;
                return Err(perr(line, Some(&format!("{name}.period")), "period must be nonempty".into()));
            }
            Ok(SequenceSpec::periodic(pre.unwrap_or_default(), per))
        }
        (None, None, Some(values)) => {
            if values.is_empty() {
                let line = seen[&format!("{name}.prefix")].0;
                return Err(perr(line, Some(&format!("{name}.prefix")), "prefix must be nonempty".into()));
            }
            Ok(SequenceSpec::prefix(values))
        }
        (Some(_), None, None) => {
            let line = seen[&format!("{name}.preperiod")].0;
            Err(perr(line, Some(&format!("{name}.preperiod")), "preperiod given without period".into()))
        }
        (None, None, None) => Err(MoranError::Parse(format!("missing `{name}.period` or `{name}.prefix`"))),
    }
}
