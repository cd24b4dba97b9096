//! Eventually-periodic and finite-prefix integer sequences, indexed from 1.

use serde::{Deserialize, Serialize};

use crate::error::{MoranError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceSpec<T> {
    /// `a_k = preperiod[k-1]` for `k <= |preperiod|`, then the period repeats.
    Periodic { preperiod: Vec<T>, period: Vec<T> },
    /// Known only up to the horizon `H = values.len()`.
    FinitePrefix { values: Vec<T> },
}

impl<T: Clone> SequenceSpec<T> {
    pub fn constant(v: T) -> Self {
        SequenceSpec::Periodic { preperiod: vec![], period: vec![v] }
    }

    pub fn periodic(preperiod: Vec<T>, period: Vec<T>) -> Self {
        SequenceSpec::Periodic { preperiod, period }
    }

    pub fn prefix(values: Vec<T>) -> Self {
        SequenceSpec::FinitePrefix { values }
    }

    pub fn get(&self, k: usize) -> Result<T> {
        if k == 0 {
            return Err(MoranError::Domain("sequence indices start at 1".into()));
        }
        match self {
            SequenceSpec::Periodic { preperiod, period } => {
                if k <= preperiod.len() {
                    Ok(preperiod[k - 1].clone())
                } else {
                    Ok(period[(k - preperiod.len() - 1) % period.len()].clone())
                }
            }
            SequenceSpec::FinitePrefix { values } => values.get(k - 1).cloned().ok_or_else(|| {
                MoranError::Horizon(format!("index {k} is beyond the declared horizon {}", values.len()))
            }),
        }
    }

    /// `None` for periodic specs.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            SequenceSpec::Periodic { .. } => None,
            SequenceSpec::FinitePrefix { values } => Some(values.len()),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, SequenceSpec::Periodic { .. })
    }

    /// `(preperiod length, period length)` for periodic specs.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self {
            SequenceSpec::Periodic { preperiod, period } => Some((preperiod.len(), period.len())),
            SequenceSpec::FinitePrefix { .. } => None,
        }
    }

    /// Every entry that can ever be produced.
    pub fn entries(&self) -> impl Iterator<Item = &T> {
        let (a, b): (&[T], &[T]) = match self {
            SequenceSpec::Periodic { preperiod, period } => (preperiod, period),
            SequenceSpec::FinitePrefix { values } => (values, &[]),
        };
        a.iter().chain(b.iter())
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> SequenceSpec<U> {
        match self {
            SequenceSpec::Periodic { preperiod, period } => SequenceSpec::Periodic {
                preperiod: preperiod.iter().map(&f).collect(),
                period: period.iter().map(&f).collect(),
            },
            SequenceSpec::FinitePrefix { values } => {
                SequenceSpec::FinitePrefix { values: values.iter().map(&f).collect() }
            }
        }
    }

    /// Replaces the first entry, keeping every later entry unchanged.
    pub fn with_first(&self, first: T) -> Self {
        match self {
            SequenceSpec::Periodic { preperiod, period } if preperiod.is_empty() => {
                let mut rotated = period[1..].to_vec();
                rotated.push(period[0].clone());
                SequenceSpec::Periodic { preperiod: vec![first], period: rotated }
            }
            SequenceSpec::Periodic { preperiod, period } => {
                let mut pre = preperiod.clone();
                pre[0] = first;
                SequenceSpec::Periodic { preperiod: pre, period: period.clone() }
            }
            SequenceSpec::FinitePrefix { values } => {
                let mut v = values.clone();
                if !v.is_empty() {
                    v[0] = first;
                }
                SequenceSpec::FinitePrefix { values: v }
            }
        }
    }

    pub(crate) fn validate(&self, what: &str) -> Result<()> {
        match self {
            SequenceSpec::Periodic { period, .. } if period.is_empty() => {
                Err(MoranError::InvalidSystem(format!("{what}: period must be nonempty")))
            }
            SequenceSpec::FinitePrefix { values } if values.is_empty() => {
                Err(MoranError::InvalidSystem(format!("{what}: prefix must be nonempty")))
            }
            _ => Ok(()),
        }
    }
}

/// Joint periodic structure of several sequences: for `k > offset` every
/// sequence repeats with period `period`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointPeriod {
    pub offset: usize,
    pub period: usize,
}

pub(crate) fn joint_period<I>(shapes: I) -> Option<JointPeriod>
where
    I: IntoIterator<Item = Option<(usize, usize)>>,
{
    let mut offset = 0;
    let mut period = 1usize;
    for s in shapes {
        let (pre, per) = s?;
        offset = offset.max(pre);
        period = num_integer::lcm(period, per);
    }
    Some(JointPeriod { offset, period })
}
