//! Aggregate digit sets `D_k + b_k D_{k-1} + ... + b_k...b_2 D_1`, their
//! tiling complements modulo a power of `N`, and independent checks.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MoranError, Result};
use crate::system::MoranSystem;

pub const DEFAULT_ELEMENT_CAP: usize = 1 << 24;

/// Largest `|D|` accepted by [`brute_force_complement_search`].
pub const BRUTE_FORCE_MAX_DIGITS: usize = 1 << 12;

const SEARCH_NODE_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateDigitSet {
    pub k: usize,
    /// Sorted, deduplicated.
    #[serde(with = "crate::bigser::vec")]
    pub elements: Vec<BigInt>,
    pub direct: bool,
    /// First repeated sum, when not direct.
    #[serde(with = "crate::bigser::opt")]
    pub duplicate: Option<BigInt>,
    /// `alpha_i = tau(b_{i+1} ... b_k) + tau(t_i)`, indexed by `i - 1`.
    pub alphas: Vec<u32>,
    /// `N^(max alpha + 1)`.
    #[serde(with = "crate::bigser")]
    pub modulus: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingComplement {
    pub k: usize,
    #[serde(with = "crate::bigser::vec")]
    pub elements: Vec<BigInt>,
    #[serde(with = "crate::bigser")]
    pub modulus: BigInt,
    /// Exponents `j <= max alpha` not of the form `alpha_i`.
    pub gap_exponents: Vec<u32>,
}

/// Structured record of a verified tiling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileRecord {
    pub k: usize,
    #[serde(with = "crate::bigser")]
    pub modulus: BigInt,
    pub alphas: Vec<u32>,
    #[serde(with = "crate::bigser::vec")]
    pub digits: Vec<BigInt>,
    #[serde(with = "crate::bigser::vec")]
    pub complement: Vec<BigInt>,
}

fn pow_n(n: u32, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(n), e as usize)
}

fn check_cap(n: u32, exp: usize, cap: usize, what: &str) -> Result<usize> {
    let mut size: usize = 1;
    for _ in 0..exp {
        size = size.checked_mul(n as usize).filter(|&s| s <= cap).ok_or_else(|| {
            MoranError::Resource(format!("{what} would have {n}^{exp} elements, above the cap {cap}"))
        })?;
    }
    Ok(size)
}

/// `alpha_i` for `i = 1..=k`.
pub fn alphas(sys: &MoranSystem, k: usize) -> Result<Vec<u32>> {
    let mut out = vec![0u32; k];
    let mut tail = 0u32;
    for i in (1..=k).rev() {
        out[i - 1] = tail + sys.tau_t(i)?;
        tail += sys.tau_b(i)?;
    }
    Ok(out)
}

pub fn aggregate(sys: &MoranSystem, k: usize, element_cap: usize) -> Result<AggregateDigitSet> {
    if k == 0 {
        return Err(MoranError::Domain("level k must be at least 1".into()));
    }
    sys.require_positive()?;
    check_cap(sys.n(), k, element_cap, "the aggregate digit set")?;
    let n = sys.n() as i64;
    // D-bar_k = D_k + b_k D-bar_{k-1}
    let mut elems: Vec<BigInt> = vec![BigInt::zero()];
    for i in 1..=k {
        let b = BigInt::from(sys.b(i)?);
        let t = BigInt::from(sys.t(i)?);
        let digits: Vec<BigInt> = (0..n).map(|d| &t * d).collect();
        elems = elems
            .iter()
            .flat_map(|e| {
                let be = &b * e;
                digits.iter().map(|d| d + &be).collect::<Vec<_>>()
            })
            .collect();
    }
    elems.par_sort_unstable();
    let duplicate = elems.windows(2).find(|w| w[0] == w[1]).map(|w| w[0].clone());
    elems.dedup();
    let alphas = alphas(sys, k)?;
    let amax = *alphas.iter().max().expect("k >= 1");
    Ok(AggregateDigitSet {
        k,
        direct: duplicate.is_none(),
        duplicate,
        elements: elems,
        alphas,
        modulus: pow_n(sys.n(), amax + 1),
    })
}

/// First colliding pair among `s_1..s_k`.
fn first_collision(sys: &MoranSystem, k: usize) -> Result<Option<(usize, usize, i64)>> {
    let mut seen = HashMap::new();
    for (idx, s) in sys.s_values(k)?.into_iter().enumerate() {
        if let Some(&i) = seen.get(&s) {
            return Ok(Some((i, idx + 1, s)));
        }
        seen.insert(s, idx + 1);
    }
    Ok(None)
}

/// `D-bar_k` is an integer tile iff `s_1, ..., s_k` are pairwise distinct.
pub fn tile_predicate(sys: &MoranSystem, k: usize) -> Result<bool> {
    Ok(first_collision(sys, k)?.is_none())
}

pub fn build_complement(sys: &MoranSystem, k: usize, element_cap: usize) -> Result<TilingComplement> {
    if let Some((i, j, value)) = first_collision(sys, k)? {
        return Err(MoranError::Collision { i, j, value });
    }
    let alphas = alphas(sys, k)?;
    let mut sorted = alphas.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(MoranError::Internal(format!("repeated exponent {} despite distinct s-values", w[0])));
    }
    let amax = *sorted.last().expect("k >= 1");
    let gaps: Vec<u32> = (0..=amax).filter(|j| sorted.binary_search(j).is_err()).collect();
    check_cap(sys.n(), gaps.len(), element_cap, "the complement")?;
    let mut elems = vec![BigInt::zero()];
    for &j in &gaps {
        let step = pow_n(sys.n(), j);
        elems = elems.iter().flat_map(|e| (0..sys.n()).map(|d| e + &step * d).collect::<Vec<_>>()).collect();
    }
    elems.sort_unstable();
    Ok(TilingComplement { k, elements: elems, modulus: pow_n(sys.n(), amax + 1), gap_exponents: gaps })
}

/// Residues of `D + L` modulo `modulus` are each hit exactly once.
pub fn verify_tiling(d: &[BigInt], l: &[BigInt], modulus: &BigInt) -> Result<bool> {
    if modulus.sign() != num_bigint::Sign::Plus {
        return Err(MoranError::Domain("modulus must be positive".into()));
    }
    if BigInt::from(d.len()) * BigInt::from(l.len()) != *modulus {
        return Err(MoranError::Precondition(format!(
            "|D| * |L| = {} * {} does not equal the modulus {modulus}",
            d.len(),
            l.len()
        )));
    }
    if let Some(m) = modulus.to_u64().filter(|&m| m < (1u64 << 62)) {
        let red = |v: &BigInt| v.mod_floor(modulus).to_u64().expect("reduced below modulus");
        let dr: Vec<u64> = d.iter().map(red).collect();
        let lr: Vec<u64> = l.iter().map(red).collect();
        if m <= 1 << 26 {
            let mut hit = vec![false; m as usize];
            for &x in &dr {
                for &y in &lr {
                    let r = ((x + y) % m) as usize;
                    if hit[r] {
                        return Ok(false);
                    }
                    hit[r] = true;
                }
            }
            return Ok(true);
        }
        let mut all: Vec<u64> = dr.par_iter().flat_map_iter(|&x| lr.iter().map(move |&y| (x + y) % m)).collect();
        all.par_sort_unstable();
        return Ok(all.windows(2).all(|w| w[0] != w[1]));
    }
    let mut all: Vec<BigInt> =
        d.par_iter().flat_map_iter(|x| l.iter().map(move |y| (x + y).mod_floor(modulus))).collect();
    all.par_sort_unstable();
    Ok(all.windows(2).all(|w| w[0] != w[1]))
}

/// Search for `L` with `D + L` a complete residue system modulo some
/// `N^m <= modulus_cap`. Returns the smallest such modulus.
///
/// A tiling modulo `N^m` lifts to `N^(m+1)` by adjoining `N^m {0..N-1}` to
/// `L`, so moduli are tried in increasing order and the first success is the
/// answer. For prime `N` each modulus is settled by the character count
/// below, with the complement it produces checked residue by residue; the
/// exhaustive exact cover handles composite `N` and any candidate that fails
/// that check.
pub fn brute_force_complement_search(d: &[BigInt], n: u32, modulus_cap: u64) -> Result<Option<(Vec<BigInt>, u64)>> {
    if d.is_empty() || d.len() > BRUTE_FORCE_MAX_DIGITS {
        return Err(MoranError::Precondition(format!("|D| = {} outside 1..={BRUTE_FORCE_MAX_DIGITS}", d.len())));
    }
    let mut moduli = vec![];
    let mut m: u64 = 1;
    while m <= modulus_cap {
        if m >= d.len() as u64 && m.is_multiple_of(d.len() as u64) {
            moduli.push(m);
        }
        match m.checked_mul(n as u64) {
            Some(next) => m = next,
            None => break,
        }
    }
    for &m in &moduli {
        if let Some(l) = complement_mod(d, n, m)? {
            return Ok(Some((l.into_iter().map(BigInt::from).collect(), m)));
        }
    }
    Ok(None)
}

fn complement_mod(d: &[BigInt], n: u32, m: u64) -> Result<Option<Vec<u64>>> {
    let mb = BigInt::from(m);
    let mut res: Vec<usize> = d.iter().map(|x| x.mod_floor(&mb).to_usize().expect("reduced")).collect();
    res.sort_unstable();
    if res.windows(2).any(|w| w[0] == w[1]) || !(m as usize).is_multiple_of(res.len()) {
        return Ok(None);
    }
    let m = m as usize;
    if is_prime(n) {
        let p = n as usize;
        let killed = annihilated_orders(&res, p, m);
        let need = log_floor(res.len(), p);
        if killed.iter().filter(|&&k| k).count() < need {
            return Ok(None);
        }
        let l = digit_complement(&killed, p);
        if covers_once(&res, &l, m) {
            return Ok(Some(l.into_iter().map(|x| x as u64).collect()));
        }
    }
    exact_cover(&res, m)
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|q| q * q <= n).all(|q| !n.is_multiple_of(q))
}

fn log_floor(mut x: usize, p: usize) -> usize {
    let mut e = 0;
    while x >= p {
        x /= p;
        e += 1;
    }
    e
}

/// `out[j-1]` says whether `Phi_{p^j}` divides `sum_{x in D} z^x`, for
/// `p^j <= m`. That holds iff the counts of `D` mod `p^j` are constant on
/// each class mod `p^(j-1)`.
///
/// Every nontrivial character of `Z_m` (`m = p^e`, `p` prime) has to be
/// killed by `D^` or `L^` in a tiling, all characters of one order at once.
/// Distinct cyclotomic factors of `D(z)` multiply to a divisor, so
/// evaluating at 1 gives `p^#{killed} | |D|`, and likewise for `L`. With
/// `|D| |L| = p^e` this forces `#{killed} = log_p |D|`.
fn annihilated_orders(res: &[usize], p: usize, m: usize) -> Vec<bool> {
    let mut out = vec![];
    let mut q = p;
    while q <= m {
        let step = q / p;
        let mut counts = vec![0u32; q];
        for &x in res {
            counts[x % q] += 1;
        }
        out.push((0..step).all(|r| (1..p).all(|i| counts[r + i * step] == counts[r])));
        q *= p;
    }
    out
}

/// `{ sum a_j p^(j-1) : a_j in 0..p, order p^j not killed by D }`. Its
/// polynomial is the product of the missing `Phi_{p^j}`, so together with
/// `D` every nontrivial character is killed.
fn digit_complement(killed: &[bool], p: usize) -> Vec<usize> {
    let mut l = vec![0usize];
    let mut place = 1;
    for &k in killed {
        if !k {
            l = l.iter().flat_map(|&x| (0..p).map(move |a| x + a * place)).collect();
        }
        place *= p;
    }
    l
}

fn covers_once(d: &[usize], l: &[usize], m: usize) -> bool {
    if d.len() * l.len() != m {
        return false;
    }
    let mut hit = vec![false; m];
    for &x in d {
        for &y in l {
            let r = (x + y) % m;
            if hit[r] {
                return false;
            }
            hit[r] = true;
        }
    }
    true
}

/// Backtracking exact cover of `Z_m` by translates of `D`, exhaustive.
///
/// With `D` shifted to contain 0, translating `L` lets the tile through 0 be
/// `D` itself. Each step branches on the uncovered residue with the fewest
/// placements still available (smallest residue on ties) and backtracks as
/// soon as some residue has none.
fn exact_cover(res: &[usize], m: usize) -> Result<Option<Vec<u64>>> {
    let shift = res[0];
    let res: Vec<usize> = res.iter().map(|&x| x - shift).collect();
    let mut cover = Cover::new(res, m);
    Ok(cover.solve()?.then(|| cover.placed.iter().map(|&(s, _)| s as u64).collect()))
}

struct Cover {
    d: Vec<usize>,
    m: usize,
    covered: Vec<bool>,
    /// Translate `s + D` is still disjoint from the covered residues.
    valid: Vec<bool>,
    /// Number of valid translates through each residue.
    count: Vec<usize>,
    /// Placed shifts with the translates they invalidated.
    placed: Vec<(usize, Vec<usize>)>,
}

impl Cover {
    fn new(d: Vec<usize>, m: usize) -> Self {
        let k = d.len();
        Cover { d, m, covered: vec![false; m], valid: vec![true; m], count: vec![k; m], placed: vec![] }
    }

    fn place(&mut self, s: usize) {
        let mut inv = vec![];
        for &y in &self.d {
            let r = (s + y) % self.m;
            self.covered[r] = true;
            for &x in &self.d {
                let s2 = (r + self.m - x) % self.m;
                if self.valid[s2] {
                    self.valid[s2] = false;
                    inv.push(s2);
                    for &z in &self.d {
                        self.count[(s2 + z) % self.m] -= 1;
                    }
                }
            }
        }
        self.placed.push((s, inv));
    }

    fn unplace(&mut self) -> usize {
        let (s, inv) = self.placed.pop().expect("nonempty");
        for &s2 in inv.iter().rev() {
            self.valid[s2] = true;
            for &z in &self.d {
                self.count[(s2 + z) % self.m] += 1;
            }
        }
        for &y in &self.d {
            self.covered[(s + y) % self.m] = false;
        }
        s
    }

    /// Most constrained uncovered residue, or `None` when all are covered.
    fn pick(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for r in 0..self.m {
            if self.covered[r] {
                continue;
            }
            if best.is_none_or(|b| self.count[r] < self.count[b]) {
                best = Some(r);
                if self.count[r] <= 1 {
                    break;
                }
            }
        }
        best
    }

    /// Shifts that would cover `r`, in the order of `D`.
    fn options(&self, r: usize) -> Vec<usize> {
        self.d.iter().map(|&x| (r + self.m - x) % self.m).filter(|&s| self.valid[s]).collect()
    }

    fn solve(&mut self) -> Result<bool> {
        self.place(0);
        // each frame: remaining options for one branching residue
        let mut stack: Vec<Vec<usize>> = vec![];
        let mut nodes = 0u64;
        let mut descend = true;
        loop {
            if descend {
                let Some(r) = self.pick() else {
                    return Ok(true);
                };
                nodes += 1;
                if nodes > SEARCH_NODE_BUDGET {
                    return Err(MoranError::Resource("complement search exceeded its node budget".into()));
                }
                let mut opts = self.options(r);
                opts.reverse();
                stack.push(opts);
            }
            let Some(frame) = stack.last_mut() else {
                return Ok(false);
            };
            match frame.pop() {
                Some(s) => {
                    self.place(s);
                    descend = true;
                }
                None => {
                    stack.pop();
                    if stack.is_empty() {
                        return Ok(false);
                    }
                    self.unplace();
                    descend = false;
                }
            }
        }
    }
}

/// `l D + L` tiles again whenever `gcd(l, |D|) = 1`.
pub fn tijdeman_scale_check(d: &[BigInt], l_set: &[BigInt], modulus: &BigInt, l: i64) -> Result<bool> {
    if BigInt::from(l).gcd(&BigInt::from(d.len())) != BigInt::one() {
        return Err(MoranError::Precondition(format!("scale {l} is not coprime to |D| = {}", d.len())));
    }
    if !verify_tiling(d, l_set, modulus)? {
        return Err(MoranError::Precondition("the input pair is not a tiling".into()));
    }
    let scaled: Vec<BigInt> = d.iter().map(|x| (x * l).mod_floor(modulus)).collect();
    verify_tiling(&scaled, l_set, modulus)
}

/// Aggregate, complement and verification in one step.
pub fn tile_record(sys: &MoranSystem, k: usize, element_cap: usize) -> Result<TileRecord> {
    let comp = build_complement(sys, k, element_cap)?;
    let agg = aggregate(sys, k, element_cap)?;
    if !agg.direct {
        return Err(MoranError::Internal("aggregate is not direct despite distinct s-values".into()));
    }
    if !verify_tiling(&agg.elements, &comp.elements, &comp.modulus)? {
        return Err(MoranError::Internal(format!("constructed complement fails to tile at level {k}")));
    }
    Ok(TileRecord { k, modulus: comp.modulus, alphas: agg.alphas, digits: agg.elements, complement: comp.elements })
}
