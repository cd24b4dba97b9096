//! Fourier transforms of the truncated measures and the exact zero set.
//!
//! With `B_j = b_1 ... b_j`,
//!
//! ```text
//! mu_k^(xi)      = prod_{j <= k} m(t_j xi / B_j)
//! nu_{>k}^(xi)   = prod_{n >= 1} m(t_{k+n} xi / (b_{k+1} ... b_{k+n}))
//! m(y)           = (1/N) sum_{d < N} e^{2 pi i d y}
//! ```
//!
//! `m` only depends on `y mod 1`. For rational arguments the reduction is done
//! in exact arithmetic, so huge `B_j` never cost precision.
//!
//! Dropping the tail factors beyond depth `M` costs at most
//! `sum_{n > M} |m(y_n) - 1| <= pi (N-1) |xi| sum_{n > M} t_{k+n} / (b_{k+1} ... b_{k+n})`
//! because `|e^{i theta} - 1| <= |theta|` and every factor has modulus at most 1.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{MoranError, Result};
use crate::numthy::{ratio_to_f64, ExactRational};
use crate::system::{Hypothesis, MoranSystem};

/// Representative of `y mod 1` in `[-1/2, 1/2]`, so phases near an integer
/// keep their relative precision.
fn centered(y: f64) -> f64 {
    y - y.round()
}

/// `m(y)` for the digit set `{0, ..., N-1}` at phase `y`.
pub fn m_phase(n: u32, y: f64) -> Complex64 {
    let y = centered(y);
    let s = (PI * y).sin();
    if s.abs() < 1e-8 {
        return m_direct(n, y);
    }
    let nf = n as f64;
    let mag = (PI * nf * y).sin() / (nf * s);
    Complex64::from_polar(1.0, PI * (nf - 1.0) * y) * mag
}

/// `|m(y)|`, the Dirichlet-kernel ratio.
pub fn m_phase_abs(n: u32, y: f64) -> f64 {
    let y = centered(y);
    let s = (PI * y).sin();
    if s.abs() < 1e-8 {
        return m_direct(n, y).norm();
    }
    ((PI * n as f64 * y).sin() / (n as f64 * s)).abs()
}

fn m_direct(n: u32, y: f64) -> Complex64 {
    let mut acc = Complex64::zero();
    for d in 0..n {
        acc += Complex64::from_polar(1.0, 2.0 * PI * d as f64 * y);
    }
    acc / n as f64
}

/// `(1/N) sum_{d < N} e^{2 pi i d t x}`.
pub fn m_factor(n: u32, t: i64, x: f64) -> Complex64 {
    m_phase(n, t as f64 * x)
}

/// `m_factor` for rational `x`, with `t x` reduced modulo 1 exactly.
pub fn m_factor_exact(n: u32, t: i64, x: &ExactRational) -> Complex64 {
    m_phase(n, frac_of(&(x.numer() * t), x.denom()))
}

/// `(num mod den) / den` as a float in `[0, 1)`.
pub fn frac_of(num: &BigInt, den: &BigInt) -> f64 {
    ratio_to_f64(&num.mod_floor(den), den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailValue {
    pub re: f64,
    pub im: f64,
    /// Certified bound on the distance to the untruncated transform.
    pub err: f64,
}

impl TailValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(&self) -> f64 {
        self.value().norm()
    }

    /// Certified lower bound on the modulus of the untruncated transform.
    pub fn lower(&self) -> f64 {
        self.abs() - self.err
    }
}

/// One zero-set component `N^{s_k} bold_b_k (Z \ N Z) / t'_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroSetComponent {
    pub k: usize,
    /// `N^{s_k} bold_b_k`; rational when `s_k < 0`.
    pub scale: ExactRational,
    #[serde(with = "crate::bigser")]
    pub denominator: BigInt,
    n: u32,
}

impl ZeroSetComponent {
    pub fn new(sys: &MoranSystem, k: usize) -> Result<Self> {
        let s = sys.s_value(k)?;
        let pow = num_traits::pow(BigInt::from(sys.n()), s.unsigned_abs() as usize);
        let bold = sys.bold_b(k)?;
        let scale = if s >= 0 { ExactRational::from_integer(pow * bold) } else { ExactRational::new(bold, pow)? };
        Ok(ZeroSetComponent { k, scale, denominator: BigInt::from(sys.t_free(k)?), n: sys.n() })
    }

    pub fn contains(&self, xi: &ExactRational) -> bool {
        let q = &(xi * &ExactRational::from_integer(self.denominator.clone())) / &self.scale;
        q.is_integer() && !q.numer().is_multiple_of(&BigInt::from(self.n))
    }
}

/// Evaluator bound to one positive system.
#[derive(Debug)]
pub struct TransformEvaluator<'a> {
    sys: &'a MoranSystem,
    n: u32,
    hypothesis: Hypothesis,
    tail_cache: Mutex<HashMap<(usize, usize), f64>>,
}

/// Float rounding allowance per evaluated factor.
const SLACK_PER_FACTOR: f64 = 16.0 * f64::EPSILON;

impl<'a> TransformEvaluator<'a> {
    pub fn new(sys: &'a MoranSystem) -> Result<Self> {
        sys.require_positive()?;
        let hypothesis = sys.spectral_hypothesis_check()?;
        Ok(TransformEvaluator { sys, n: sys.n(), hypothesis, tail_cache: Mutex::new(HashMap::new()) })
    }

    pub fn system(&self) -> &MoranSystem {
        self.sys
    }

    /// `mu_k^` at a float point; `k = 0` gives 1.
    pub fn mu_hat_k(&self, k: usize, xi: f64) -> Result<Complex64> {
        let mut acc = Complex64::one();
        for j in 1..=k {
            let bj = ratio_to_f64(&self.sys.prefix_product(j)?, &BigInt::one());
            acc *= m_phase(self.n, self.sys.t(j)? as f64 * xi / bj);
        }
        Ok(acc)
    }

    /// `mu_k^` at a rational point with exact phase reduction.
    pub fn mu_hat_k_exact(&self, k: usize, xi: &ExactRational) -> Result<Complex64> {
        let mut acc = Complex64::one();
        for j in 1..=k {
            let den = xi.denom() * self.sys.prefix_product(j)?;
            acc *= m_phase(self.n, frac_of(&(xi.numer() * self.sys.t(j)?), &den));
        }
        Ok(acc)
    }

    fn require_tail_hypothesis(&self, k: usize) -> Result<()> {
        match self.hypothesis {
            Hypothesis::Satisfied { m0 } if m0 <= k + 1 => Ok(()),
            Hypothesis::Satisfied { m0 } => {
                let bad = m0 - 1;
                Err(MoranError::HypothesisViolated { k: bad, b: self.sys.b(bad)?, t: self.sys.t(bad)? })
            }
            Hypothesis::Violated { k, b, t } => Err(MoranError::HypothesisViolated { k, b, t }),
        }
    }

    /// `sum_{n > depth} t_{k+n} / (b_{k+1} ... b_{k+n})`, exact; periodic
    /// systems only.
    pub fn tail_sum(&self, k: usize, depth: usize) -> Result<ExactRational> {
        let d = self
            .sys
            .drift()
            .ok_or_else(|| MoranError::Horizon("tail sums need eventually periodic sequences".into()))?;
        let start = (k + depth).max(d.offset);
        let mut acc = ExactRational::zero();
        let mut block = ExactRational::zero();
        let mut prod = BigInt::one();
        for idx in k + 1..=start + d.period {
            prod *= self.sys.b(idx)?;
            if idx <= k + depth {
                continue;
            }
            let term = ExactRational::new(BigInt::from(self.sys.t(idx)?), prod.clone())?;
            if idx <= start {
                acc = &acc + &term;
            } else {
                block = &block + &term;
            }
        }
        // Each later period repeats `block` divided by the period product r.
        let r = ExactRational::from_integer(self.sys.range_product(start, start + d.period)?);
        let later = &(&block * &r) / &(&r - &ExactRational::one());
        Ok(&acc + &later)
    }

    /// Upper bound for the support of `nu_{>k}`: `(N-1) sum_{n>=1} t_{k+n} / (b_{k+1}...b_{k+n})`.
    pub fn support_radius(&self, k: usize) -> Result<ExactRational> {
        Ok(&ExactRational::from((self.n - 1) as i64) * &self.tail_sum(k, 0)?)
    }

    fn tail_err(&self, k: usize, depth: usize, abs_xi: f64) -> Result<f64> {
        let cached = self.tail_cache.lock().expect("tail cache").get(&(k, depth)).copied();
        let tail = match cached {
            Some(v) => v,
            None => {
                let v = self.tail_sum(k, depth)?.to_f64() * (1.0 + 1e-12);
                self.tail_cache.lock().expect("tail cache").insert((k, depth), v);
                v
            }
        };
        Ok(PI * (self.n - 1) as f64 * abs_xi * tail + SLACK_PER_FACTOR * (depth + 1) as f64 * self.n as f64)
    }

    /// Truncated `nu_{>k}^(xi)` at a float point.
    pub fn nu_hat_tail(&self, k: usize, xi: f64, depth: usize) -> Result<TailValue> {
        self.require_tail_hypothesis(k)?;
        let mut acc = Complex64::one();
        let mut prod = 1.0f64;
        let mut phase_slack = 0.0;
        for i in 1..=depth {
            prod *= self.sys.b(k + i)? as f64;
            let y = self.sys.t(k + i)? as f64 * xi / prod;
            // `prod` carries i roundings, the multiply and divide two more
            phase_slack += y.abs() * f64::EPSILON * (i + 3) as f64;
            acc *= m_phase(self.n, y);
        }
        let err = self.tail_err(k, depth, xi.abs())? + PI * (self.n - 1) as f64 * phase_slack;
        Ok(TailValue { re: acc.re, im: acc.im, err })
    }

    /// Truncated `nu_{>k}^(xi)` at a rational point with exact phases.
    pub fn nu_hat_tail_exact(&self, k: usize, xi: &ExactRational, depth: usize) -> Result<TailValue> {
        self.require_tail_hypothesis(k)?;
        let mut acc = Complex64::one();
        let mut den = xi.denom().clone();
        for i in 1..=depth {
            den *= self.sys.b(k + i)?;
            acc *= m_phase(self.n, frac_of(&(xi.numer() * self.sys.t(k + i)?), &den));
        }
        let err = self.tail_err(k, depth, xi.abs().to_f64())?;
        Ok(TailValue { re: acc.re, im: acc.im, err })
    }

    /// Smallest `k` (at most `limit` when given) whose zero-set component
    /// contains `xi`; `None` is certified, not a give-up.
    pub fn zero_set_member(&self, xi: &ExactRational, limit: Option<usize>) -> Result<Option<usize>> {
        zero_set_member(self.sys, xi, limit)
    }
}

/// Smallest `k` with `xi in N^{s_k} bold_b_k (Z \ N Z) / t'_k`, restricted to
/// `k <= limit` when a limit is given.
///
/// Writing `xi = N^v p'/q'` with `p', q'` free of `N`, membership at `k` means
/// `s_k = v` and `q' bold_b_k | p' t'_k`. The search stops once no later `k`
/// can qualify: `s` has drifted above `v`, or `bold_b_k` outgrew `p' t'`.
pub fn zero_set_member(sys: &MoranSystem, xi: &ExactRational, limit: Option<usize>) -> Result<Option<usize>> {
    if xi.is_zero() {
        return Ok(None);
    }
    let (v, p, q) = xi.valuation(sys.n())?;
    let p = p.abs();
    let drift = sys.drift();
    let t_free_max = sys
        .t_spec()
        .entries()
        .map(|&t| crate::numthy::valuation_i64(t, sys.n()).map(|x| x.1.abs()))
        .try_fold(1i64, |m, x| x.map(|x| m.max(x)))?;
    let bound = &p * t_free_max;
    let mut k = 1;
    loop {
        if let Some(l) = limit {
            if k > l {
                return Ok(None);
            }
        }
        if let Some(d) = drift {
            if d.lower_bound_from(k).is_some_and(|lb| lb > v) {
                return Ok(None);
            }
            if d.delta == 0
                && k > d.offset + d.period
                && sys.range_product(d.offset, d.offset + d.period)?.abs().is_one()
            {
                return Ok(None);
            }
        }
        if sys.horizon().is_some_and(|h| k > h) {
            return Err(MoranError::Horizon(format!("zero-set membership of {xi} not settled within the horizon")));
        }
        let bold = sys.bold_b(k)?;
        if &bold.abs() * &q > bound {
            return Ok(None);
        }
        if sys.s_value(k)? == v {
            let num = &p * sys.t_free(k)?.abs();
            if num.is_multiple_of(&(&q * bold.abs())) {
                return Ok(Some(k));
            }
        }
        k += 1;
    }
}

/// Phase table for many points `lambda + x` sharing the integer parts `lambda`:
/// `frac(t_j lambda / B_j)` is computed once exactly, then shifted by the
/// float `t_j x / B_j`.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    n: u32,
    k: usize,
    /// `t_j / B_j` as floats.
    rates: Vec<f64>,
    /// Row-major `|lambdas| x k`.
    base: Vec<f64>,
}

impl PhaseTable {
    pub fn new(sys: &MoranSystem, k: usize, lambdas: &[BigInt]) -> Result<Self> {
        use rayon::prelude::*;
        let mut bs = Vec::with_capacity(k);
        let mut ts = Vec::with_capacity(k);
        let mut rates = Vec::with_capacity(k);
        for j in 1..=k {
            let b = sys.prefix_product(j)?;
            let t = sys.t(j)?;
            rates.push(ratio_to_f64(&BigInt::from(t), &b));
            bs.push(b);
            ts.push(t);
        }
        let base: Vec<f64> = lambdas
            .par_iter()
            .flat_map_iter(|lam| (0..k).map(|j| frac_of(&(lam * ts[j]), &bs[j])).collect::<Vec<_>>())
            .collect();
        Ok(PhaseTable { n: sys.n(), k, rates, base })
    }

    pub fn len(&self) -> usize {
        self.base.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|mu_k^(lambda_i + x)|^2`.
    pub fn mu_abs_sq(&self, i: usize, x: f64) -> f64 {
        let row = &self.base[i * self.k..(i + 1) * self.k];
        let mut acc = 1.0;
        for (j, &b) in row.iter().enumerate() {
            acc *= m_phase_abs(self.n, b + self.rates[j] * x);
        }
        acc * acc
    }
}
