//! Randomized invariants, each checked against a direct computation.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use moran_core::existence::{existence_check, Existence, GeneralSystem};
use moran_core::fourier::{m_factor, m_phase, zero_set_member, TransformEvaluator};
use moran_core::numthy::valuation;
use moran_core::spectra::{
    build_spectrum, q_grid_check, unit_grid, verify_orthogonal, verify_spectrum_finite, SpectrumBuildParams,
};
use moran_core::system::Distinctness;
use moran_core::tiling::{aggregate, build_complement, tijdeman_scale_check, tile_predicate};
use moran_core::{ExactRational, MoranSystem, SequenceSpec};
use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn tau(mut v: BigInt, n: u32) -> i64 {
    let nb = BigInt::from(n);
    let mut e = 0;
    while (&v % &nb).is_zero() {
        v /= &nb;
        e += 1;
    }
    e
}

fn direct_m(n: u32, y: f64) -> Complex64 {
    (0..n).map(|d| Complex64::from_polar(1.0, 2.0 * PI * d as f64 * y)).sum::<Complex64>() / n as f64
}

fn big() -> impl Strategy<Value = BigInt> {
    (any::<bool>(), prop::collection::vec(any::<u32>(), 1..11))
        .prop_map(|(neg, digits)| BigInt::from_slice(if neg { Sign::Minus } else { Sign::Plus }, &digits))
}

fn nonzero_big() -> impl Strategy<Value = BigInt> {
    big().prop_filter("nonzero", |x| !x.is_zero())
}

/// Periodic positive system with `|b_k| > (N-1) |t_k|` on the period.
fn periodic_system() -> impl Strategy<Value = MoranSystem> {
    (prop::sample::select(vec![2u32, 3, 5]), 1usize..=3).prop_flat_map(|(n, len)| {
        let entry = (0u32..=2, prop::sample::select(vec![1i64, 2, 4, 7]), 1i64..=4, 0u32..=1);
        prop::collection::vec(entry, len).prop_map(move |v| {
            let t: Vec<i64> = v.iter().map(|&(_, _, t, e)| t * (n as i64).pow(e)).collect();
            let b: Vec<i64> = v
                .iter()
                .zip(&t)
                .map(|(&(e, u, _, _), &t)| {
                    let u = if u % n as i64 == 0 { u + 1 } else { u };
                    let mut b = (n as i64).pow(e) * u;
                    while b <= (n as i64 - 1) * t {
                        b *= n as i64;
                    }
                    b
                })
                .collect();
            MoranSystem::new(n, SequenceSpec::periodic(vec![], b), SequenceSpec::periodic(vec![], t)).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn valuation_is_additive(a in nonzero_big(), b in nonzero_big(), n in prop::sample::select(vec![2u32, 3, 5, 7, 11])) {
        let va = valuation(&a, n).unwrap();
        let vb = valuation(&b, n).unwrap();
        let vab = valuation(&(&a * &b), n).unwrap();
        prop_assert_eq!(vab.exponent, va.exponent + vb.exponent);
        prop_assert_eq!(tau(a.abs(), n), va.exponent as i64);
    }

    #[test]
    fn valuation_reconstructs(a in nonzero_big(), e in 0u32..40, n in 2u32..12) {
        let x = &a * BigInt::from(n).pow(e);
        let v = valuation(&x, n).unwrap();
        prop_assert_eq!(v.reconstruct(n), x);
        prop_assert!(!(&v.unit % BigInt::from(n)).is_zero());
    }

    #[test]
    fn rational_arithmetic_is_exact(p in big(), q in nonzero_big(), r in big(), s in nonzero_big()) {
        let x = ExactRational::new(p, q).unwrap();
        let y = ExactRational::new(r, s).unwrap();
        prop_assert_eq!(&(&x + &y) - &y, x.clone());
        prop_assert_eq!(&(&x * &y) + &(&x * &y), &x * &(&y + &y));
    }

    #[test]
    fn s_agrees_with_product_valuation(sys in periodic_system()) {
        let s = sys.s_values(300).unwrap();
        let n = sys.n();
        let mut prod = BigInt::one();
        for k in 1..=300 {
            prod *= sys.b(k).unwrap();
            let oracle = tau(prod.clone(), n) - tau(BigInt::from(n as i64 * sys.t(k).unwrap()), n);
            prop_assert_eq!(s[k - 1], oracle, "k = {}", k);
        }
    }

    #[test]
    fn normalization_shifts_s(sys in periodic_system()) {
        let (norm, m) = sys.normalize().unwrap();
        let s = sys.s_values(200).unwrap();
        let s2 = norm.s_values(200).unwrap();
        prop_assert!(s2.iter().all(|&v| v >= 0));
        prop_assert!(s.iter().zip(&s2).all(|(a, b)| *b == a + m as i64));
    }

    #[test]
    fn distinctness_matches_pairwise_scan(sys in periodic_system()) {
        let s = sys.s_values(500).unwrap();
        let mut first: HashMap<i64, usize> = HashMap::new();
        let mut oracle = None;
        for (j, &v) in s.iter().enumerate() {
            if let Some(&i) = first.get(&v) {
                oracle = Some((i + 1, j + 1, v));
                break;
            }
            first.insert(v, j);
        }
        match sys.distinctness_check(500).unwrap() {
            Distinctness::Distinct { .. } => prop_assert_eq!(oracle, None),
            Distinctness::Collision { i, j, value } => prop_assert_eq!(oracle, Some((i, j, value))),
        }
    }

    #[test]
    fn frak_n_is_certified(sys in periodic_system(), k in 1usize..20) {
        let s = sys.s_values(400).unwrap();
        if let Ok(nk) = sys.frak_n(k) {
            prop_assert!(nk >= k);
            prop_assert!(s[nk - 1] <= s[k - 1]);
            prop_assert!(s[nk..].iter().all(|&v| v > s[k - 1]), "n_{} = {}", k, nk);
        } else {
            // refused only when s never leaves the level of s_k
            prop_assert!(s[300..].iter().any(|&v| v <= s[k - 1]));
        }
    }

    /// `s_j > s_i` gives `n_j >= n_i`, `b_{n_i} | b_{n_j}`, and sums of the
    /// two zero-set shells stay in the shell of `i`.
    #[test]
    fn shell_sums_stay_in_lower_shell(
        sys in periodic_system(),
        i in 1usize..12,
        j in 1usize..12,
        l1 in -50i64..50,
        l2 in -50i64..50,
    ) {
        let n = sys.n() as i64;
        prop_assume!(l1 % n != 0 && l2 % n != 0);
        let (norm, _) = sys.normalize().unwrap();
        prop_assume!(matches!(norm.distinctness_check(64), Ok(Distinctness::Distinct { .. })));
        let (si, sj) = (norm.s_value(i).unwrap(), norm.s_value(j).unwrap());
        prop_assume!(sj > si);
        let (ni, nj) = (norm.frak_n(i).unwrap(), norm.frak_n(j).unwrap());
        prop_assert!(nj >= ni);
        let (bi, bj) = (norm.bold_b(ni).unwrap(), norm.bold_b(nj).unwrap());
        prop_assert!(bj.is_multiple_of(&bi));
        let shell_i = BigInt::from(n).pow(si as u32) * &bi;
        let lam = &shell_i * l1 + BigInt::from(n).pow(sj as u32) * &bj * l2;
        let (q, r) = lam.div_rem(&shell_i);
        prop_assert!(r.is_zero());
        prop_assert!(!q.is_multiple_of(&BigInt::from(n)));
    }

    #[test]
    fn existence_partial_sums_and_tail(sys in periodic_system(), d in 0usize..10) {
        let g = GeneralSystem::from_system(&sys);
        let (a, b) = (existence_check(&g, d).unwrap(), existence_check(&g, d + 7).unwrap());
        match (a, b) {
            (
                Existence::Converges { partial_sum: p1, tail_bound: t1, .. },
                Existence::Converges { partial_sum: p2, tail_bound: t2, .. },
            ) => {
                prop_assert!(p2 >= p1);
                prop_assert!(&p2 - &p1 <= t1);
                prop_assert_eq!(&p1 + &t1, &p2 + &t2);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn m_closed_form_matches_direct_sum(n in 2u32..8, y in -50.0f64..50.0) {
        let v = m_phase(n, y);
        prop_assert!(v.norm() <= 1.0 + 1e-15);
        prop_assert!((v - direct_m(n, y)).norm() < 1e-12);
    }

    #[test]
    fn factors_are_periodic(sys in periodic_system(), j in 1usize..6, xi in -20.0f64..20.0, z in -3i64..3) {
        let ev = TransformEvaluator::new(&sys).unwrap();
        let _ = ev;
        let bj = sys.prefix_product(j).unwrap();
        let t = sys.t(j).unwrap();
        // factor j is m(t_j x / B_j); shift x by z B_j / t_j
        let bj = bj.to_string().parse::<f64>().unwrap();
        let shifted = xi + z as f64 * bj / t as f64;
        let a = m_factor(sys.n(), t, xi / bj);
        let b = m_factor(sys.n(), t, shifted / bj);
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn truncation_error_is_a_bound(sys in periodic_system(), k in 0usize..4, xi in -100.0f64..100.0, m in 1usize..15, extra in 1usize..20) {
        let ev = TransformEvaluator::new(&sys).unwrap();
        let a = ev.nu_hat_tail(k, xi, m).unwrap();
        let b = ev.nu_hat_tail(k, xi, m + extra).unwrap();
        prop_assert!((a.value() - b.value()).norm() <= a.err);
    }

    #[test]
    fn zero_set_points_are_zeros(sys in periodic_system(), k in 1usize..5, l in 1i64..30) {
        let (norm, _) = sys.normalize().unwrap();
        let n = norm.n() as i64;
        prop_assume!(l % n != 0);
        let sk = norm.s_value(k).unwrap();
        let bold = norm.bold_b(k).unwrap();
        let tf = BigInt::from(norm.t_free(k).unwrap().abs());
        // N^{s_k} bold_b_k l / t'_k is a zero of factor k
        let xi = ExactRational::new(BigInt::from(n).pow(sk as u32) * &bold * l, tf).unwrap();
        let hit = zero_set_member(&norm, &xi, None).unwrap();
        prop_assert!(hit.is_some_and(|h| h <= k), "{:?}", hit);
        let ev = TransformEvaluator::new(&norm).unwrap();
        for kk in hit.unwrap()..hit.unwrap() + 3 {
            prop_assert!(ev.mu_hat_k_exact(kk, &xi).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn direct_aggregates_have_full_size(sys in periodic_system(), k in 1usize..6) {
        let (norm, _) = sys.normalize().unwrap();
        let agg = aggregate(&norm, k, 1 << 20).unwrap();
        let s = norm.s_values(k).unwrap();
        let distinct = s.iter().collect::<HashSet<_>>().len() == k;
        prop_assert_eq!(tile_predicate(&norm, k).unwrap(), distinct);
        if distinct {
            prop_assert_eq!(agg.elements.len(), (norm.n() as usize).pow(k as u32));
        }
    }

    #[test]
    fn complement_sums_differ_mod_modulus(sys in periodic_system(), k in 1usize..5, l in 1i64..200) {
        let (norm, _) = sys.normalize().unwrap();
        prop_assume!(tile_predicate(&norm, k).unwrap());
        let d = aggregate(&norm, k, 1 << 20).unwrap().elements;
        let c = build_complement(&norm, k, 1 << 20).unwrap();
        let mut seen = HashSet::new();
        for x in &d {
            for y in &c.elements {
                prop_assert!(seen.insert((x + y).mod_floor(&c.modulus)));
            }
        }
        prop_assume!(BigInt::from(l).gcd(&BigInt::from(d.len())).is_one());
        prop_assert!(tijdeman_scale_check(&d, &c.elements, &c.modulus, l).unwrap());
    }
}

/// Levels built on random periodic systems: exact spectra, nested, with
/// `Q <= 1` on a grid, and orthogonality matching a pairwise oracle.
#[test]
fn built_levels_are_nested_spectra() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut built = 0;
    for _ in 0..60 {
        let n: u32 = [2, 3][rng.gen_range(0..2)];
        let len = rng.gen_range(1..=2);
        let t: Vec<i64> = (0..len).map(|_| [1, 2, 4, n as i64][rng.gen_range(0..4)]).collect();
        let b: Vec<i64> = t.iter().map(|&t| (n as i64) * ((n as i64 - 1) * t + rng.gen_range(1..=6))).collect();
        let sys = MoranSystem::new(n, SequenceSpec::periodic(vec![], b), SequenceSpec::periodic(vec![], t)).unwrap();
        let (norm, _) = sys.normalize().unwrap();
        let Ok(run) = build_spectrum(&norm, 2, None, &SpectrumBuildParams::default()) else {
            continue;
        };
        built += 1;
        let mut prev: Vec<BigInt> = vec![];
        for lvl in &run.levels {
            let els = &lvl.elements;
            assert_eq!(els.len(), (n as usize).pow(lvl.k as u32));
            assert!(els.contains(&BigInt::zero()));
            assert!(prev.iter().all(|p| els.contains(p)));
            assert!(verify_spectrum_finite(&norm, els, lvl.k).unwrap());
            let q = q_grid_check(&norm, els, lvl.k, &unit_grid(200), 1e-9).unwrap();
            assert!(q.pass, "{}: {q:?}", norm.canonical());
            prev = els.clone();
        }
        // dropping the orthogonality of one pair must be detected
        let last = run.levels.last().unwrap();
        let mut bad = last.elements.clone();
        bad[1] = &bad[0] + 1;
        if !bad[2..].contains(&bad[1]) {
            let o = verify_orthogonal(&norm, &bad, last.k).unwrap();
            assert!(!o.orthogonal);
        }
    }
    assert!(built >= 10, "only {built} systems built");
}
