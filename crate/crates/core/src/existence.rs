//! Existence diagnostics for the infinite convolution with general digit
//! counts `N_k`: the summability test on `|N_k t_k / (b_1 ... b_k)|` and the
//! three Jessen-Wintner series at radius 1.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{MoranError, Result};
use crate::numthy::ExactRational;
use crate::sequence::{joint_period, SequenceSpec};
use crate::system::MoranSystem;

/// `(N_k, t_k, b_k)` with no primality or size constraints beyond nonzero entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralSystem {
    pub digits: SequenceSpec<BigInt>,
    pub t: SequenceSpec<BigInt>,
    pub b: SequenceSpec<BigInt>,
}

impl GeneralSystem {
    pub fn new(digits: SequenceSpec<BigInt>, t: SequenceSpec<BigInt>, b: SequenceSpec<BigInt>) -> Result<Self> {
        for (name, spec) in [("N_k", &digits), ("t", &t), ("b", &b)] {
            spec.validate(name)?;
            if spec.entries().any(|v| v.is_zero()) {
                return Err(MoranError::InvalidSystem(format!("{name} has a zero entry")));
            }
        }
        Ok(GeneralSystem { digits, t, b })
    }

    pub fn from_system(sys: &MoranSystem) -> Self {
        GeneralSystem {
            digits: SequenceSpec::constant(BigInt::from(sys.n())),
            t: sys.t_spec().map(|&v| BigInt::from(v)),
            b: sys.b_spec().map(|&v| BigInt::from(v)),
        }
    }

    fn horizon(&self) -> Option<usize> {
        [&self.digits, &self.t, &self.b].iter().filter_map(|s| s.horizon()).min()
    }

    /// `|N_k t_k / (b_1 ... b_k)|` for `k = 1..=upto`.
    fn terms(&self, upto: usize) -> Result<Vec<ExactRational>> {
        let mut prod = BigInt::one();
        let mut out = Vec::with_capacity(upto);
        for k in 1..=upto {
            prod *= self.b.get(k)?;
            let num = (self.digits.get(k)? * self.t.get(k)?).abs();
            out.push(ExactRational::new(num, prod.abs())?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Existence {
    /// `tail_bound` is the exact value of the remaining sum past `depth`.
    Converges { depth: usize, partial_sum: ExactRational, tail_bound: ExactRational },
    /// Terms repeat along the period and do not tend to zero.
    Diverges { witness_index: usize, term: ExactRational },
    /// Finite prefix: partial sums only, `partial_sums[k-1]` is the sum to `k`.
    Unknown { partial_sums: Vec<ExactRational> },
}

/// Summability of `|N_k t_k / (b_1 ... b_k)|`.
pub fn existence_check(sys: &GeneralSystem, depth: usize) -> Result<Existence> {
    let jp = joint_period([sys.digits.shape(), sys.t.shape(), sys.b.shape()]);
    let Some(jp) = jp else {
        let h = sys.horizon().expect("non-periodic spec has a horizon");
        let mut acc = ExactRational::zero();
        let partial_sums = sys
            .terms(depth.min(h))?
            .into_iter()
            .map(|t| {
                acc = &acc + &t;
                acc.clone()
            })
            .collect();
        return Ok(Existence::Unknown { partial_sums });
    };
    let depth = depth.max(jp.offset);
    let mut ratio = BigInt::one();
    for k in depth + 1..=depth + jp.period {
        ratio *= sys.b.get(k)?;
    }
    let terms = sys.terms(depth + jp.period)?;
    if ratio.abs().is_one() {
        let k = depth + 1;
        return Ok(Existence::Diverges { witness_index: k, term: terms[k - 1].clone() });
    }
    let partial_sum = terms[..depth].iter().fold(ExactRational::zero(), |a, t| &a + t);
    let block = terms[depth..].iter().fold(ExactRational::zero(), |a, t| &a + t);
    // Each further block of `period` terms is the previous one divided by |ratio|.
    let r = ExactRational::from_integer(ratio.abs());
    let tail_bound = &(&block * &r) / &(&r - &ExactRational::one());
    Ok(Existence::Converges { depth, partial_sum, tail_bound })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JwSeries {
    /// `sum omega_k(R \ B(1))`.
    pub s1: ExactRational,
    /// `sum c(omega_{k,1})`.
    pub s2: ExactRational,
    /// `sum M(omega_{k,1})`.
    pub s3: ExactRational,
}

/// Partial sums to `k_max` of the three series for `omega_k`, the uniform
/// measure on `{0, t_k, ..., (N_k - 1) t_k} / (b_1 ... b_k)`, truncated at radius 1.
pub fn jessen_wintner_series(sys: &GeneralSystem, k_max: usize) -> Result<JwSeries> {
    let positive = |s: &SequenceSpec<BigInt>, min: i64| s.entries().all(|v| *v >= BigInt::from(min));
    if !positive(&sys.b, 2) || !positive(&sys.t, 1) || !positive(&sys.digits, 2) {
        return Err(MoranError::Unsupported("the three-series evaluation needs b_k >= 2, t_k >= 1, N_k >= 2".into()));
    }
    let mut s1 = ExactRational::zero();
    let mut s2 = ExactRational::zero();
    let mut s3 = ExactRational::zero();
    let mut big_b = BigInt::one();
    for k in 1..=k_max {
        big_b *= sys.b.get(k)?;
        let n = sys.digits.get(k)?;
        let t = sys.t.get(k)?;
        let n1 = &n - 1;
        // Atoms j t / B with j <= f stay inside the closed unit ball.
        let f = big_b.div_floor(&t);
        if n1 > f {
            s1 = &s1 + &ExactRational::new(&n1 - &f, n.clone())?;
        }
        let g = if n1 <= f { n1 } else { f };
        let two = BigInt::from(2);
        let six = BigInt::from(6);
        // sum_{j<=g} j t / (N B) and sum_{j<=g} (j t / B)^2 / N
        let mean = ExactRational::new(&t * &g * (&g + 1u32), &two * &n * &big_b)?;
        let second = ExactRational::new(&g * (&g + 1u32) * (&two * &g + 1u32) * &t * &t, &six * &n * &big_b * &big_b)?;
        s3 = &s3 + &(&second - &(&mean * &mean));
        s2 = &s2 + &mean;
    }
    Ok(JwSeries { s1, s2, s3 })
}
