//! The system `(N, {b_k}, {t_k})` and its valuation skeleton.
//!
//! Everything downstream consumes
//!
//! ```text
//! s_k = tau_N(b_1 ... b_k) - tau_N(N t_k)
//! ```
//!
//! together with the N-free parts `b'_k`, `t'_k` and `bold_b_k = b'_1 ... b'_k`.
//! When both sequences are eventually periodic with joint offset `P0` and joint
//! period `Q`, `s_{k+Q} = s_k + drift` for every `k > P0`, where `drift` is the
//! valuation of `Q` consecutive periodic `b` entries. All "for every k" claims
//! (distinctness, `n_k`, the Case I / Case II split) are decided from that
//! identity rather than from a guessed lookahead.

use std::collections::HashMap;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{MoranError, Result};
use crate::numthy::{is_prime, valuation_i64};
use crate::sequence::{joint_period, JointPeriod, SequenceSpec};

/// Lookahead demanded beyond a candidate `n_k` when the sequences are only
/// known up to a finite horizon.
pub const DEFAULT_PREFIX_MARGIN: usize = 8;

#[derive(Debug, Default)]
struct Memo {
    /// `tau_N(b_1 ... b_k)`, index 0 holds the empty product.
    tau_prefix: Vec<i64>,
    /// `b_1 ... b_k`.
    prefix: Vec<BigInt>,
    /// `b'_1 ... b'_k`.
    bold_b: Vec<BigInt>,
    s: Vec<i64>,
}

impl Memo {
    fn new() -> Self {
        Memo { tau_prefix: vec![0], prefix: vec![BigInt::one()], bold_b: vec![BigInt::one()], s: vec![0] }
    }
}

#[derive(Debug)]
pub struct MoranSystem {
    n: u32,
    b: SequenceSpec<i64>,
    t: SequenceSpec<i64>,
    scale_exponent: u32,
    memo: RwLock<Memo>,
}

impl Clone for MoranSystem {
    fn clone(&self) -> Self {
        MoranSystem {
            n: self.n,
            b: self.b.clone(),
            t: self.t.clone(),
            scale_exponent: self.scale_exponent,
            memo: RwLock::new(Memo::new()),
        }
    }
}

impl PartialEq for MoranSystem {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.b == other.b && self.t == other.t && self.scale_exponent == other.scale_exponent
    }
}

/// Drift data of an eventually periodic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Drift {
    pub offset: usize,
    pub period: usize,
    /// `s_{k+period} - s_k` for `k > offset`.
    pub delta: i64,
    /// `min { s_k : offset < k <= offset + period }`.
    pub periodic_min: i64,
}

impl Drift {
    /// Lower bound on `s_j` valid for every `j >= from` with `from > offset`.
    pub fn lower_bound_from(&self, from: usize) -> Option<i64> {
        if from <= self.offset {
            return None;
        }
        let q = ((from - self.offset - 1) / self.period) as i64;
        Some(self.periodic_min + q * self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Distinctness {
    /// `certified` is false when only a finite window was inspected.
    Distinct { certified: bool, window: usize },
    /// Smallest witnessing pair: minimal `j`, then the unique earlier `i`.
    Collision { i: usize, j: usize, value: i64 },
}

impl Distinctness {
    pub fn is_distinct(&self) -> bool {
        matches!(self, Distinctness::Distinct { .. })
    }
}

/// Breakpoints `k` with `min{s_j : j > k} > max{s_j : j <= k}`, repeating with
/// `period` from `start` on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakpointPattern {
    /// All breakpoints below `start`.
    pub initial: Vec<usize>,
    pub start: usize,
    pub period: usize,
    /// Breakpoints in `[start, start + period)`.
    pub residues: Vec<usize>,
}

impl BreakpointPattern {
    pub fn breakpoints_upto(&self, limit: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.initial.iter().copied().filter(|&k| k <= limit).collect();
        if self.residues.is_empty() {
            return out;
        }
        let mut shift = 0;
        loop {
            for &r in &self.residues {
                let k = r + shift;
                if k > limit {
                    return out;
                }
                out.push(k);
            }
            shift += self.period;
        }
    }

    /// Smallest breakpoint `>= from`.
    pub fn next_at_or_after(&self, from: usize) -> Option<usize> {
        if let Some(&k) = self.initial.iter().find(|&&k| k >= from) {
            return Some(k);
        }
        if self.residues.is_empty() {
            return None;
        }
        let mut shift = if from > self.start { (from - self.start) / self.period * self.period } else { 0 };
        loop {
            for &r in &self.residues {
                if r + shift >= from {
                    return Some(r + shift);
                }
            }
            shift += self.period;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum CaseClass {
    CaseI {
        pattern: BreakpointPattern,
    },
    CaseII {
        k0: usize,
    },
    /// Finite-prefix systems: breakpoints seen inside the window, uncertified.
    Undetermined {
        observed: Vec<usize>,
        window: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Hypothesis {
    Satisfied { m0: usize },
    Violated { k: usize, b: i64, t: i64 },
}

/// Snapshot of the valuation skeleton on `1..=len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SSkeleton {
    pub n: u32,
    /// Index 0 is unused.
    pub s: Vec<i64>,
    pub b_free: Vec<BigInt>,
    pub t_free: Vec<BigInt>,
    pub bold_b: Vec<BigInt>,
    pub frak_n: Vec<usize>,
    pub alpha: usize,
}

impl MoranSystem {
    pub fn new(n: u32, b: SequenceSpec<i64>, t: SequenceSpec<i64>) -> Result<Self> {
        if !is_prime(n as u64) {
            return Err(MoranError::InvalidSystem(format!("N = {n} is not prime")));
        }
        b.validate("b")?;
        t.validate("t")?;
        if let Some(&bad) = b.entries().find(|v| v.abs() < 2) {
            return Err(MoranError::InvalidSystem(format!("every |b_k| must be >= 2, found {bad}")));
        }
        if let Some(&bad) = t.entries().find(|v| v.abs() < 1) {
            return Err(MoranError::InvalidSystem(format!("every |t_k| must be >= 1, found {bad}")));
        }
        Ok(MoranSystem { n, b, t, scale_exponent: 0, memo: RwLock::new(Memo::new()) })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn b_spec(&self) -> &SequenceSpec<i64> {
        &self.b
    }

    pub fn t_spec(&self) -> &SequenceSpec<i64> {
        &self.t
    }

    /// Exponent `m` of the rescaling applied by [`MoranSystem::normalize`].
    pub fn scale_exponent(&self) -> u32 {
        self.scale_exponent
    }

    pub fn b(&self, k: usize) -> Result<i64> {
        self.b.get(k)
    }

    pub fn t(&self, k: usize) -> Result<i64> {
        self.t.get(k)
    }

    /// Largest index the specs can answer for; `None` when unbounded.
    pub fn horizon(&self) -> Option<usize> {
        match (self.b.horizon(), self.t.horizon()) {
            (None, None) => None,
            (Some(h), None) | (None, Some(h)) => Some(h),
            (Some(a), Some(b)) => Some(a.min(b)),
        }
    }

    pub fn joint_period(&self) -> Option<JointPeriod> {
        joint_period([self.b.shape(), self.t.shape()])
    }

    /// All `b_k >= 2` and `t_k >= 1`.
    pub fn is_positive(&self) -> bool {
        self.b.entries().all(|&v| v >= 2) && self.t.entries().all(|&v| v >= 1)
    }

    pub fn require_positive(&self) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(MoranError::Unsupported("signed b_k or t_k; this operation needs b_k >= 2 and t_k >= 1".into()))
        }
    }

    /// Normalized: positive entries and `s_k >= 0` on the decidable range.
    pub fn is_normalized(&self) -> bool {
        self.is_positive() && self.min_s().map(|m| m >= 0).unwrap_or(false)
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(MoranError::Domain("indices start at 1".into()));
        }
        if let Some(h) = self.horizon() {
            if k > h {
                return Err(MoranError::Horizon(format!("index {k} is beyond the declared horizon {h}")));
            }
        }
        Ok(())
    }

    fn fill(&self, k: usize) -> Result<()> {
        self.check_index(k)?;
        if self.memo.read().expect("memo poisoned").s.len() > k {
            return Ok(());
        }
        let mut memo = self.memo.write().expect("memo poisoned");
        while memo.s.len() <= k {
            let idx = memo.s.len();
            let b = self.b.get(idx)?;
            let t = self.t.get(idx)?;
            let (eb, ub) = valuation_i64(b, self.n)?;
            let (et, _) = valuation_i64(t, self.n)?;
            let tau = memo.tau_prefix[idx - 1] + eb as i64;
            let prefix = &memo.prefix[idx - 1] * BigInt::from(b);
            let bold = &memo.bold_b[idx - 1] * BigInt::from(ub);
            memo.tau_prefix.push(tau);
            memo.prefix.push(prefix);
            memo.bold_b.push(bold);
            memo.s.push(tau - et as i64 - 1);
        }
        Ok(())
    }

    /// `s_k = tau_N(b_1...b_k) - tau_N(t_k) - 1`.
    pub fn s_value(&self, k: usize) -> Result<i64> {
        self.fill(k)?;
        Ok(self.memo.read().expect("memo poisoned").s[k])
    }

    pub fn s_values(&self, upto: usize) -> Result<Vec<i64>> {
        if upto == 0 {
            return Ok(vec![]);
        }
        self.fill(upto)?;
        Ok(self.memo.read().expect("memo poisoned").s[1..=upto].to_vec())
    }

    /// `tau_N(b_1 ... b_k)`; `k = 0` gives 0.
    pub fn tau_prefix(&self, k: usize) -> Result<i64> {
        if k == 0 {
            return Ok(0);
        }
        self.fill(k)?;
        Ok(self.memo.read().expect("memo poisoned").tau_prefix[k])
    }

    /// `b_1 ... b_k`; `k = 0` gives 1.
    pub fn prefix_product(&self, k: usize) -> Result<BigInt> {
        if k == 0 {
            return Ok(BigInt::one());
        }
        self.fill(k)?;
        Ok(self.memo.read().expect("memo poisoned").prefix[k].clone())
    }

    /// `b_{from+1} ... b_to`.
    pub fn range_product(&self, from: usize, to: usize) -> Result<BigInt> {
        let mut p = BigInt::one();
        for i in from + 1..=to {
            p *= self.b(i)?;
        }
        Ok(p)
    }

    /// `bold_b_k = b'_1 ... b'_k`; `k = 0` gives 1.
    pub fn bold_b(&self, k: usize) -> Result<BigInt> {
        if k == 0 {
            return Ok(BigInt::one());
        }
        self.fill(k)?;
        Ok(self.memo.read().expect("memo poisoned").bold_b[k].clone())
    }

    pub fn b_free(&self, k: usize) -> Result<i64> {
        Ok(valuation_i64(self.b(k)?, self.n)?.1)
    }

    pub fn t_free(&self, k: usize) -> Result<i64> {
        Ok(valuation_i64(self.t(k)?, self.n)?.1)
    }

    pub fn tau_b(&self, k: usize) -> Result<u32> {
        Ok(valuation_i64(self.b(k)?, self.n)?.0)
    }

    pub fn tau_t(&self, k: usize) -> Result<u32> {
        Ok(valuation_i64(self.t(k)?, self.n)?.0)
    }

    pub fn drift(&self) -> Option<Drift> {
        let jp = self.joint_period()?;
        let base = jp.offset;
        let delta = self.tau_prefix(base + jp.period).ok()? - self.tau_prefix(base).ok()?;
        let periodic_min = (base + 1..=base + jp.period).map(|k| self.s_value(k).unwrap()).min()?;
        Some(Drift { offset: jp.offset, period: jp.period, delta, periodic_min })
    }

    /// Minimum of `s_k` over every index (periodic) or over the horizon (prefix).
    pub fn min_s(&self) -> Result<i64> {
        match (self.drift(), self.horizon()) {
            (Some(d), _) => {
                let head = (1..=d.offset + d.period).map(|k| self.s_value(k)).collect::<Result<Vec<_>>>()?;
                Ok(*head.iter().min().expect("nonempty"))
            }
            (None, Some(h)) => Ok(self.s_values(h)?.into_iter().min().expect("nonempty prefix")),
            (None, None) => unreachable!("a system is either periodic or has a horizon"),
        }
    }

    /// Window that is certain to contain the smallest collision, if any.
    pub fn collision_window(&self) -> Option<usize> {
        let d = self.drift()?;
        let base = d.offset + d.period;
        let s = self.s_values(base).ok()?;
        let range = s.iter().max()? - s.iter().min()?;
        if d.delta == 0 {
            return Some(base + d.period);
        }
        Some(d.offset + d.period * ((range / d.delta) as usize + 2))
    }

    /// Pairwise distinctness of the `s_k`.
    ///
    /// Periodic systems: decided for all indices; `window` only widens the
    /// scan. Finite prefixes: reports on `1..=min(window, H)`.
    pub fn distinctness_check(&self, window: usize) -> Result<Distinctness> {
        let (scan, certified) = match (self.collision_window(), self.horizon()) {
            (Some(w), _) => (w.max(window), true),
            (None, Some(h)) => (window.min(h), false),
            (None, None) => unreachable!(),
        };
        let mut seen: HashMap<i64, usize> = HashMap::new();
        for (idx, s) in self.s_values(scan)?.into_iter().enumerate() {
            let j = idx + 1;
            if let Some(&i) = seen.get(&s) {
                return Ok(Distinctness::Collision { i, j, value: s });
            }
            seen.insert(s, j);
        }
        Ok(Distinctness::Distinct { certified, window: scan })
    }

    /// Errors with the smallest collision unless the `s_k` are pairwise distinct.
    pub fn require_distinct(&self) -> Result<()> {
        match self.distinctness_check(64)? {
            Distinctness::Collision { i, j, value } => Err(MoranError::Collision { i, j, value }),
            Distinctness::Distinct { .. } => Ok(()),
        }
    }

    /// `n_k = max { j >= k : s_j <= s_k }` with the default prefix margin.
    pub fn frak_n(&self, k: usize) -> Result<usize> {
        self.frak_n_with_margin(k, DEFAULT_PREFIX_MARGIN)
    }

    /// `n_k`, certified: periodic systems through the drift bound, finite
    /// prefixes by requiring `margin` further indices inside the horizon.
    pub fn frak_n_with_margin(&self, k: usize, margin: usize) -> Result<usize> {
        let sk = self.s_value(k)?;
        match self.drift() {
            Some(d) => {
                if d.delta == 0 && d.periodic_min <= sk {
                    return Err(MoranError::Horizon(format!(
                        "n_{k} is unbounded: s repeats with zero drift and s_{k} = {sk} recurs or is exceeded from below"
                    )));
                }
                let mut best = k;
                let mut j = k + 1;
                loop {
                    if let Some(lb) = d.lower_bound_from(j) {
                        if lb > sk {
                            return Ok(best);
                        }
                    }
                    if self.s_value(j)? <= sk {
                        best = j;
                    }
                    j += 1;
                }
            }
            None => {
                let h = self.horizon().expect("prefix system has a horizon");
                let mut best = k;
                for j in k + 1..=h {
                    if self.s_value(j)? <= sk {
                        best = j;
                    }
                }
                if best + margin > h {
                    return Err(MoranError::Horizon(format!(
                        "horizon insufficient to certify n_{k} (candidate {best}, horizon {h}, margin {margin})"
                    )));
                }
                Ok(best)
            }
        }
    }

    /// `max { n_k - k : k <= window }`.
    pub fn alpha_bound(&self, window: usize) -> Result<usize> {
        let mut alpha = 0;
        for k in 1..=window {
            alpha = alpha.max(self.frak_n(k)? - k);
        }
        Ok(alpha)
    }

    /// The true `alpha = sup_k (n_k - k)`; `n_{k+Q} = n_k + Q` past the offset,
    /// so one period after the preperiod suffices.
    pub fn alpha(&self) -> Result<usize> {
        match self.drift() {
            Some(d) => self.alpha_bound(d.offset + d.period),
            None => Err(MoranError::Horizon("alpha is only decidable for eventually periodic systems".into())),
        }
    }

    /// `min { s_j : j > k }`, certified through the drift.
    fn tail_min(&self, k: usize, d: &Drift) -> Result<i64> {
        let mut cur = i64::MAX;
        let mut j = k + 1;
        loop {
            if let Some(lb) = d.lower_bound_from(j) {
                if lb >= cur {
                    return Ok(cur);
                }
            }
            cur = cur.min(self.s_value(j)?);
            j += 1;
        }
    }

    pub fn is_breakpoint(&self, k: usize) -> Result<bool> {
        let d = self.drift().ok_or_else(|| MoranError::Horizon("breakpoints need a periodic system".into()))?;
        self.breakpoint_with(k, &d)
    }

    fn breakpoint_with(&self, k: usize, d: &Drift) -> Result<bool> {
        let head = self.s_values(k)?.into_iter().max().expect("k >= 1");
        Ok(self.tail_min(k, d)? > head)
    }

    /// Case I (infinitely many breakpoints) or Case II (none from `k0` on).
    pub fn case_classify(&self, window: usize) -> Result<CaseClass> {
        self.require_distinct()?;
        let Some(d) = self.drift() else {
            let h = self.horizon().expect("prefix");
            let w = window.min(h);
            let s = self.s_values(w)?;
            let mut observed = vec![];
            for k in 1..w {
                let head = s[..k].iter().max().unwrap();
                let tail = s[k..].iter().min().unwrap();
                if tail > head {
                    observed.push(k);
                }
            }
            return Ok(CaseClass::Undetermined { observed, window: w });
        };
        // Past `start`, the running maximum of s is attained in the periodic
        // part, so breakpoint status repeats with the period.
        let head_max = self.s_values(d.offset + d.period)?.into_iter().max().unwrap();
        let mut start = d.offset + 1;
        let mut run = i64::MIN;
        loop {
            run = run.max(self.s_value(start)?);
            if run >= head_max {
                break;
            }
            start += 1;
        }
        let mut initial = vec![];
        let mut residues = vec![];
        for k in 1..start + d.period {
            if self.breakpoint_with(k, &d)? {
                if k < start {
                    initial.push(k);
                } else {
                    residues.push(k);
                }
            }
        }
        if residues.is_empty() {
            let k0 = initial.last().map(|&k| k + 1).unwrap_or(1);
            Ok(CaseClass::CaseII { k0 })
        } else {
            Ok(CaseClass::CaseI { pattern: BreakpointPattern { initial, start, period: d.period, residues } })
        }
    }

    /// Smallest `m0` with `|b_k| > (N-1)|t_k|` for all `k >= m0`.
    pub fn spectral_hypothesis_check(&self) -> Result<Hypothesis> {
        let n1 = (self.n - 1) as i64;
        let fails = |k: usize| -> Result<bool> { Ok(self.b(k)?.abs() <= n1 * self.t(k)?.abs()) };
        let last = match self.joint_period() {
            Some(jp) => {
                for k in jp.offset + 1..=jp.offset + jp.period {
                    if fails(k)? {
                        return Ok(Hypothesis::Violated { k, b: self.b(k)?, t: self.t(k)? });
                    }
                }
                jp.offset
            }
            None => self.horizon().expect("prefix"),
        };
        let mut m0 = 1;
        for k in 1..=last {
            if fails(k)? {
                m0 = k + 1;
            }
        }
        if let Some(h) = self.horizon() {
            if m0 > h {
                return Ok(Hypothesis::Violated { k: h, b: self.b(h)?, t: self.t(h)? });
            }
        }
        Ok(Hypothesis::Satisfied { m0 })
    }

    pub fn require_hypothesis(&self) -> Result<usize> {
        match self.spectral_hypothesis_check()? {
            Hypothesis::Satisfied { m0 } => Ok(m0),
            Hypothesis::Violated { k, b, t } => Err(MoranError::HypothesisViolated { k, b, t }),
        }
    }

    /// Rescales so that every `s_k >= 0`: `b_1` becomes `N^m b_1` with
    /// `m = max(0, -min s_k)`. If `nu(E) = mu(N^m E)`, then `Lambda` is a
    /// spectrum of `mu` iff `N^m Lambda` is one of `nu`.
    pub fn normalize(&self) -> Result<(MoranSystem, u32)> {
        self.require_positive()?;
        let min = self.min_s()?;
        let m = if min < 0 { (-min) as u32 } else { 0 };
        if m == 0 {
            return Ok((self.clone(), 0));
        }
        let b1 = self.b(1)?;
        let factor = (self.n as i64)
            .checked_pow(m)
            .and_then(|f| f.checked_mul(b1))
            .ok_or_else(|| MoranError::Resource("normalized b_1 does not fit in 64 bits".into()))?;
        let mut sys = MoranSystem::new(self.n, self.b.with_first(factor), self.t.clone())?;
        sys.scale_exponent = self.scale_exponent + m;
        Ok((sys, m))
    }

    /// Snapshot of `s`, `b'`, `t'`, `bold_b`, `n_k` on `1..=len`, plus alpha.
    pub fn skeleton(&self, len: usize) -> Result<SSkeleton> {
        let mut s = vec![0];
        let mut b_free = vec![BigInt::one()];
        let mut t_free = vec![BigInt::one()];
        let mut bold_b = vec![BigInt::one()];
        let mut frak_n = vec![0];
        for k in 1..=len {
            s.push(self.s_value(k)?);
            b_free.push(BigInt::from(self.b_free(k)?));
            t_free.push(BigInt::from(self.t_free(k)?));
            bold_b.push(self.bold_b(k)?);
            frak_n.push(self.frak_n(k)?);
        }
        let alpha = match self.drift() {
            Some(_) => self.alpha()?,
            None => (1..=len).map(|k| frak_n[k] - k).max().unwrap_or(0),
        };
        Ok(SSkeleton { n: self.n, s, b_free, t_free, bold_b, frak_n, alpha })
    }

    /// Canonical one-line text of the system, the input to fingerprints.
    pub fn canonical(&self) -> String {
        fn seq(s: &SequenceSpec<i64>) -> String {
            let j = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            match s {
                SequenceSpec::Periodic { preperiod, period } => format!("pre[{}]per[{}]", j(preperiod), j(period)),
                SequenceSpec::FinitePrefix { values } => format!("prefix[{}]", j(values)),
            }
        }
        format!("N={};b={};t={}", self.n, seq(&self.b), seq(&self.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: u32, b: SequenceSpec<i64>, t: SequenceSpec<i64>) -> MoranSystem {
        MoranSystem::new(n, b, t).unwrap()
    }

    fn periodic_18() -> MoranSystem {
        sys(2, SequenceSpec::constant(18), SequenceSpec::periodic(vec![], vec![1, 4]))
    }

    fn example2() -> MoranSystem {
        sys(2, SequenceSpec::constant(18), SequenceSpec::periodic(vec![], vec![1, 16]))
    }

    fn tile_only() -> MoranSystem {
        sys(3, SequenceSpec::constant(3), SequenceSpec::periodic(vec![1], vec![4]))
    }

    #[test]
    fn s_value_examples() {
        assert_eq!(example2().s_value(4).unwrap(), -1);
        assert_eq!(periodic_18().s_value(3).unwrap(), 2);
        assert_eq!(tile_only().s_value(5).unwrap(), 4);
    }

    #[test]
    fn bold_b_examples() {
        assert_eq!(periodic_18().bold_b(3).unwrap(), BigInt::from(729));
        let s = sys(2, SequenceSpec::periodic(vec![36], vec![18]), SequenceSpec::constant(1));
        assert_eq!(s.bold_b(2).unwrap(), BigInt::from(81));
        assert_eq!(tile_only().bold_b(4).unwrap(), BigInt::one());
    }

    #[test]
    fn normalize_examples() {
        let (n2, m2) = example2().normalize().unwrap();
        assert_eq!(m2, 3);
        assert_eq!(n2.b(1).unwrap(), 144);
        assert_eq!(n2.b(2).unwrap(), 18);
        assert_eq!(n2.scale_exponent(), 3);
        let (n1, m1) = periodic_18().normalize().unwrap();
        assert_eq!((m1, n1.b(1).unwrap()), (1, 36));
        let (n13, m13) = tile_only().normalize().unwrap();
        assert_eq!(m13, 0);
        assert_eq!(n13, tile_only());
    }

    #[test]
    fn normalized_s_shifts_by_m() {
        let raw = example2();
        let (norm, m) = raw.normalize().unwrap();
        for k in 1..60 {
            assert_eq!(norm.s_value(k).unwrap(), raw.s_value(k).unwrap() + m as i64);
        }
        assert!(norm.is_normalized());
        assert!(!raw.is_normalized());
    }

    #[test]
    fn frak_n_examples() {
        let (e1, _) = periodic_18().normalize().unwrap();
        assert_eq!(e1.s_values(6).unwrap(), vec![1, 0, 3, 2, 5, 4]);
        assert_eq!(e1.frak_n(1).unwrap(), 2);
        let (e2, _) = example2().normalize().unwrap();
        assert_eq!(e2.s_values(6).unwrap(), vec![3, 0, 5, 2, 7, 4]);
        assert_eq!(e2.frak_n(3).unwrap(), 6);
        let inc = sys(2, SequenceSpec::constant(4), SequenceSpec::constant(1));
        assert_eq!(inc.frak_n(5).unwrap(), 5);
    }

    #[test]
    fn alpha_examples() {
        let (e1, _) = periodic_18().normalize().unwrap();
        assert_eq!(e1.alpha_bound(20).unwrap(), 1);
        let (e2, _) = example2().normalize().unwrap();
        assert_eq!(e2.alpha_bound(20).unwrap(), 3);
        assert_eq!(e2.alpha().unwrap(), 3);
        assert_eq!(tile_only().alpha_bound(10).unwrap(), 0);
    }

    #[test]
    fn distinctness_examples() {
        let (e1, _) = periodic_18().normalize().unwrap();
        assert!(matches!(e1.distinctness_check(10).unwrap(), Distinctness::Distinct { certified: true, .. }));
        let bad = sys(2, SequenceSpec::constant(2), SequenceSpec::periodic(vec![], vec![1, 2]));
        assert_eq!(bad.distinctness_check(10).unwrap(), Distinctness::Collision { i: 1, j: 2, value: 0 });
        assert!(tile_only().distinctness_check(10).unwrap().is_distinct());
    }

    #[test]
    fn zero_drift_collides() {
        // b odd: no factor 2 ever, so s is periodic.
        let s = sys(2, SequenceSpec::constant(3), SequenceSpec::periodic(vec![], vec![1, 2, 4]));
        assert!(matches!(s.distinctness_check(1).unwrap(), Distinctness::Collision { i: 1, j: 4, .. }));
        assert!(s.frak_n(1).is_err());
    }

    #[test]
    fn case_examples() {
        let (e1, _) = periodic_18().normalize().unwrap();
        match e1.case_classify(20).unwrap() {
            CaseClass::CaseI { pattern } => {
                assert_eq!(pattern.breakpoints_upto(12), vec![2, 4, 6, 8, 10, 12]);
            }
            other => panic!("expected Case I, got {other:?}"),
        }
        let (e2, _) = example2().normalize().unwrap();
        assert_eq!(e2.case_classify(20).unwrap(), CaseClass::CaseII { k0: 1 });
        let inc = sys(2, SequenceSpec::constant(4), SequenceSpec::constant(1));
        match inc.case_classify(10).unwrap() {
            CaseClass::CaseI { pattern } => assert_eq!(pattern.breakpoints_upto(5), vec![1, 2, 3, 4, 5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn finite_prefix_case_is_undetermined() {
        let s = sys(2, SequenceSpec::prefix(vec![4; 10]), SequenceSpec::prefix(vec![1; 10]));
        assert!(matches!(s.case_classify(10).unwrap(), CaseClass::Undetermined { .. }));
        assert!(matches!(s.s_value(11), Err(MoranError::Horizon(_))));
    }

    #[test]
    fn hypothesis_examples() {
        assert_eq!(example2().spectral_hypothesis_check().unwrap(), Hypothesis::Satisfied { m0: 1 });
        assert_eq!(tile_only().spectral_hypothesis_check().unwrap(), Hypothesis::Violated { k: 2, b: 3, t: 4 });
        let inc = sys(2, SequenceSpec::constant(4), SequenceSpec::constant(1));
        assert_eq!(inc.spectral_hypothesis_check().unwrap(), Hypothesis::Satisfied { m0: 1 });
        let late = sys(2, SequenceSpec::periodic(vec![2, 2], vec![8]), SequenceSpec::periodic(vec![3, 1], vec![1]));
        assert_eq!(late.spectral_hypothesis_check().unwrap(), Hypothesis::Satisfied { m0: 2 });
    }

    #[test]
    fn invalid_systems_are_rejected() {
        assert!(MoranSystem::new(4, SequenceSpec::constant(4), SequenceSpec::constant(1)).is_err());
        assert!(MoranSystem::new(2, SequenceSpec::constant(1), SequenceSpec::constant(1)).is_err());
        assert!(MoranSystem::new(2, SequenceSpec::constant(4), SequenceSpec::constant(0)).is_err());
    }
}
