//! Self-contained JSON certificates and their re-verification.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MoranError, Result};
use crate::fourier::TransformEvaluator;
use crate::numthy::ExactRational;
use crate::spectra::{
    build_spectrum, case2_min, verify_orthogonal, verify_tail_lower_bound, BlockKind, SpectrumBuildParams, SpectrumRun,
    CASE2_FACTOR_FLOOR,
};
use crate::system::MoranSystem;
use crate::tiling::{aggregate, alphas, tile_record, verify_tiling, TileRecord};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the canonical system text.
pub fn fingerprint(sys: &MoranSystem) -> String {
    hex::encode(Sha256::digest(sys.canonical().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Tile {
        record: TileRecord,
    },
    Spectrum {
        /// Emitted spectra are the normalized elements divided by `N^scale_exponent`.
        scale_exponent: u32,
        breakpoint_rule: String,
        run: SpectrumRun,
        /// `denormalized[n-1]` is level `n` in the original frame.
        denormalized: Vec<Vec<ExactRational>>,
    },
    Verification {
        report: VerificationReport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub tool_version: String,
    pub fingerprint: String,
    pub system: String,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Certificate {
    fn new(sys: &MoranSystem, payload: Payload) -> Self {
        Certificate {
            tool_version: TOOL_VERSION.into(),
            fingerprint: fingerprint(sys),
            system: sys.canonical(),
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    fn push(&mut self, name: impl Into<String>, pass: bool, detail: Option<String>) {
        self.pass &= pass;
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    /// Detail of the first failing check.
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn verification_certificate(&self, sys: &MoranSystem) -> Certificate {
        Certificate::new(sys, Payload::Verification { report: self.clone() })
    }
}

/// Verified tiling of `D-bar_k`; fails with the collision when `s` repeats.
pub fn tile_certificate(sys: &MoranSystem, k: usize, element_cap: usize) -> Result<Certificate> {
    if k == 0 {
        return Err(MoranError::Domain("level k must be at least 1".into()));
    }
    Ok(Certificate::new(sys, Payload::Tile { record: tile_record(sys, k, element_cap)? }))
}

/// Nested spectrum levels of the normalized system, with the denormalized view.
pub fn spectrum_certificate(sys: &MoranSystem, levels: usize, params: &SpectrumBuildParams) -> Result<Certificate> {
    let (norm, m) = sys.normalize()?;
    let run = build_spectrum(&norm, levels, None, params)?;
    let denormalized = run.levels.iter().map(|l| l.denormalized(sys.n())).collect::<Result<_>>()?;
    Ok(Certificate::new(
        sys,
        Payload::Spectrum {
            scale_exponent: m,
            breakpoint_rule: "smallest admissible index at each level".into(),
            run,
            denormalized,
        },
    ))
}

/// Independent re-check of every exact claim in `cert` against `sys`.
pub fn verify_certificate(cert: &Certificate, sys: &MoranSystem) -> Result<VerificationReport> {
    let fp = fingerprint(sys);
    if cert.fingerprint != fp {
        return Err(MoranError::Fingerprint { certificate: cert.fingerprint.clone(), config: fp });
    }
    let mut rep = VerificationReport { pass: true, checks: vec![] };
    match &cert.payload {
        Payload::Tile { record } => verify_tile(sys, record, &mut rep)?,
        Payload::Spectrum { scale_exponent, run, denormalized, .. } => {
            verify_spectrum(sys, *scale_exponent, run, denormalized, &mut rep)?
        }
        Payload::Verification { .. } => {
            return Err(MoranError::Domain("verification records are not re-verifiable certificates".into()))
        }
    }
    Ok(rep)
}

fn verify_tile(sys: &MoranSystem, r: &TileRecord, rep: &mut VerificationReport) -> Result<()> {
    let agg = aggregate(sys, r.k, r.digits.len().max(1))?;
    let mut digits = r.digits.clone();
    digits.sort();
    rep.push(
        format!("digits are D-bar_{}", r.k),
        agg.direct && agg.elements == digits,
        (agg.elements != digits).then(|| "digit set differs from the recomputed aggregate".into()),
    );
    rep.push("alpha exponents", alphas(sys, r.k)? == r.alphas, None);
    let ok = verify_tiling(&r.digits, &r.complement, &r.modulus)?;
    rep.push(format!("D + L tiles Z_{}", r.modulus), ok, (!ok).then(|| "some residue is hit twice or missed".into()));
    Ok(())
}

fn verify_spectrum(
    sys: &MoranSystem,
    m: u32,
    run: &SpectrumRun,
    denormalized: &[Vec<ExactRational>],
    rep: &mut VerificationReport,
) -> Result<()> {
    let (norm, m_sys) = sys.normalize()?;
    rep.push("scale exponent", m == m_sys, (m != m_sys).then(|| format!("certificate m = {m}, system m = {m_sys}")));
    let ev = TransformEvaluator::new(&norm)?;
    let params = SpectrumBuildParams { epsilon0: run.params.epsilon0, depth: run.params.depth, ..Default::default() };
    let den = num_traits::pow(BigInt::from(sys.n()), m as usize);
    let mut prev: Option<Vec<BigInt>> = None;
    for lvl in &run.levels {
        let n = lvl.level;
        let k = lvl.k;
        let els = &lvl.elements;
        let expected = num_traits::pow(BigInt::from(sys.n()), k);
        let size_ok = BigInt::from(els.len()) == expected;
        rep.push(
            format!("level {n}: |Lambda| = N^{k}"),
            size_ok,
            (!size_ok).then(|| format!("{} elements", els.len())),
        );
        rep.push(format!("level {n}: contains 0"), els.iter().any(|e| e.is_zero()), None);
        let mut sorted = els.clone();
        sorted.sort();
        if let Some(p) = &prev {
            let missing = p.iter().find(|x| sorted.binary_search(x).is_err());
            rep.push(
                format!("level {n}: contains level {}", n - 1),
                missing.is_none(),
                missing.map(|x| format!("missing {x}")),
            );
        }
        let orth = verify_orthogonal(&norm, els, k)?;
        rep.push(
            format!("level {n}: differences in the zero set of mu_{k}"),
            orth.orthogonal,
            orth.witness.map(|w| format!("difference {w} is not a zero")),
        );
        let tail = verify_tail_lower_bound(&ev, els, k, &params)?;
        rep.push(
            format!("level {n}: tail bound >= {}", params.epsilon0),
            tail.ok && tail.min_lower == lvl.status.tail.min_lower,
            Some(format!(
                "min certified {:.6e} (recorded {:.6e}) at lambda = {}",
                tail.min_lower, lvl.status.tail.min_lower, tail.witness.lambda
            )),
        );
        let denorm_ok = denormalized.get(n - 1).is_some_and(|d| {
            d.len() == els.len()
                && d.iter().zip(els).all(|(r, e)| ExactRational::new(e.clone(), den.clone()).is_ok_and(|x| &x == r))
        });
        rep.push(format!("level {n}: emitted values are Lambda / N^{m}"), denorm_ok, None);
        prev = Some(els.clone());
    }
    for b in run.blocks.iter().filter(|b| b.kind == BlockKind::CaseII) {
        let v = case2_min(&norm, &b.elements, b.k2, run.alpha)?;
        rep.push(
            format!("block ({}, {}]: Case II tail factors > {CASE2_FACTOR_FLOOR:e}", b.k1, b.k2),
            v > CASE2_FACTOR_FLOOR,
            Some(format!("min {v:.6e}")),
        );
    }
    Ok(())
}
