use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rug::{Integer, Rational};

use heegner::classpoly::{build_pd, build_pd_via_square_root};
use heegner::exactarith::kronecker;
use heegner::hauptmodul::{j_p, Arc, HighComplex};
use heegner::modpoly::{is_perfect_square, squarefree_decomposition, FPoly};
use heegner::quadforms::{al_pair_classes, enumerate_classes, reduced_forms, Discriminant, QuadForm, Shape};
use heegner::sssearch::{search, SearchError, SearchOptions};
use heegner::ssverify::{is_supersingular_j, j_from_h, norm_square_check, reduce_mod, Fq2, Reduction, Status};

fn primes_up_to(bound: u32) -> Vec<u64> {
    heegner::exactarith::primes_up_to(bound).into_iter().map(u64::from).collect()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn valid_discriminant() -> impl Strategy<Value = Discriminant> {
    (prop::sample::select(vec![3u64, 5, 7, 11, 13, 19]), 3u64..200, any::<bool>()).prop_filter_map(
        "valid shape",
        |(p, ell, four)| {
            let shape = if four { Shape::MinusFourPEll } else { Shape::MinusPEll };
            Discriminant::new(p, ell, shape).ok()
        },
    )
}

#[test]
fn kronecker_matches_euler_criterion() {
    for q in primes_up_to(1000).into_iter().filter(|&q| q > 2) {
        for a in 1..q {
            let mut e = (q - 1) / 2;
            let (mut base, mut r) = (a % q, 1u64);
            while e > 0 {
                if e & 1 == 1 {
                    r = r * base % q;
                }
                base = base * base % q;
                e >>= 1;
            }
            let euler = if r == 1 { 1 } else { -1 };
            assert_eq!(kronecker(&Integer::from(a), &Integer::from(q)), euler, "({a} | {q})");
        }
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn composition_is_a_group_law(n in 3i64..4000, i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>(), k in any::<prop::sample::Index>()) {
        prop_assume!(n % 4 == 0 || n % 4 == 3);
        let d = -n;
        let forms: Vec<QuadForm> = reduced_forms(d).into_iter().filter(|f| f.is_primitive()).collect();
        let (f, g, h) = (*i.get(&forms), *j.get(&forms), *k.get(&forms));
        let c = |x: &QuadForm, y: &QuadForm| x.compose(y).unwrap().reduce().unwrap();
        prop_assert_eq!(c(&f, &g), c(&g, &f));
        prop_assert_eq!(c(&c(&f, &g), &h), c(&f, &c(&g, &h)));
        prop_assert_eq!(c(&f, &QuadForm::principal(d)), f);
        prop_assert_eq!(c(&f, &f.inverse()), QuadForm::principal(d).reduce().unwrap());
    }
}

proptest! {
    #![proptest_config(config(120))]

    #[test]
    fn atkin_lehner_pairs_partition_the_classes(disc in valid_discriminant()) {
        let group = enumerate_classes(&disc);
        prop_assert_eq!(group.h() % 2, 0);
        let pairs = al_pair_classes(&group).unwrap();
        prop_assert_eq!(pairs.len(), group.h() / 2);
        let covered: BTreeSet<QuadForm> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
        prop_assert_eq!(covered.len(), group.h());
    }
}

fn tau(re: f64, im: f64) -> HighComplex {
    HighComplex::from_f64(192, re, im)
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn atkin_lehner_invariance(p in prop::sample::select(vec![3u64, 5, 7, 11, 13, 19, 23]), re in -0.5f64..0.5, im in 0.15f64..1.5) {
        let bits = 128;
        let z = tau(re, im);
        let w = z.mobius(0, -1, p as i64, 0);
        let a = j_p(&z, p, bits).unwrap();
        let b = j_p(&w, p, bits).unwrap();
        let scale = a.abs().to_f64().max(1.0);
        prop_assert!(a.dist(&b) < scale * 2f64.powi(-(bits as i32) + 16), "p={} τ={}+{}i: {} vs {}", p, re, im, a, b);
    }

    #[test]
    fn real_on_the_symmetry_lines(p in prop::sample::select(vec![3u64, 5, 7, 11, 13, 19]), im in 0.1f64..2.0, t in 0.0f64..1.0) {
        let bits = 128;
        let tol = |v: &HighComplex| v.re.to_f64().abs().max(1.0) * 1e-25;
        let v = j_p(&tau(0.0, im), p, bits).unwrap();
        prop_assert!(v.im.to_f64().abs() < tol(&v), "Re τ = 0: {}", v);
        let v = j_p(&tau(-0.5, im), p, bits).unwrap();
        prop_assert!(v.im.to_f64().abs() < tol(&v), "Re τ = -1/2: {}", v);
        if let Ok(arc) = Arc::new(p) {
            let v = j_p(&arc.point(t, bits), p, bits).unwrap();
            prop_assert!(v.im.to_f64().abs() < tol(&v), "on S: {}", v);
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn pairing_and_square_root_constructions_agree(disc in valid_discriminant()) {
        let group = enumerate_classes(&disc);
        prop_assume!(group.h() <= 40);
        let a = build_pd(&disc, None).unwrap();
        let b = build_pd_via_square_root(&disc, None).unwrap();
        prop_assert_eq!(a.degree(), group.h() / 2);
        prop_assert!(a.is_monic());
        prop_assert_eq!(a.coefficients, b.coefficients);
    }
}

/// Trial division by monic linear and quadratic polynomials; complete when
/// every irreducible factor has degree at most 2.
fn naive_factor(f: &FPoly) -> BTreeMap<FPoly, u32> {
    let q = f.modulus();
    let mut rest = f.monic();
    let mut out = BTreeMap::new();
    let mut divide = |g: FPoly, rest: &mut FPoly| {
        while let Some(r) = rest.div_exact(&g) {
            *out.entry(g.clone()).or_insert(0) += 1;
            *rest = r;
        }
    };
    for r in 0..q {
        divide(FPoly::linear(q, r), &mut rest);
    }
    for b in 0..q {
        for c in 0..q {
            if rest.degree() >= 2 {
                divide(FPoly::new(q, &[c as i64, b as i64, 1]), &mut rest);
            }
        }
    }
    assert_eq!(rest.degree(), 0, "factor of degree > 2 left");
    out
}

fn small_factor(q: u64) -> impl Strategy<Value = FPoly> {
    prop_oneof![
        (0..q).prop_map(move |r| FPoly::linear(q, r)),
        (0..q, 0..q).prop_map(move |(b, c)| FPoly::new(q, &[c as i64, b as i64, 1])),
    ]
}

fn product_of_small_factors() -> impl Strategy<Value = FPoly> {
    prop::sample::select(primes_up_to(50).into_iter().filter(|&q| q > 2).collect::<Vec<_>>()).prop_flat_map(|q| {
        (prop::collection::vec((small_factor(q), 1u32..5), 1..5), 1..q).prop_filter_map(
            "degree ≤ 8",
            move |(parts, lead)| {
                let mut f = FPoly::constant(q, lead);
                for (g, e) in parts {
                    f = f.mul(&g.pow(e));
                }
                (f.degree() >= 1 && f.degree() <= 8).then_some(f)
            },
        )
    })
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn squarefree_decomposition_matches_trial_division(f in product_of_small_factors()) {
        let q = f.modulus();
        let mut by_exponent: BTreeMap<u32, FPoly> = BTreeMap::new();
        for (g, e) in naive_factor(&f) {
            let slot = by_exponent.entry(e).or_insert_with(|| FPoly::one(q));
            *slot = slot.mul(&g);
        }
        let expected: Vec<(FPoly, u32)> = by_exponent.into_iter().map(|(e, g)| (g, e)).collect();
        let got = squarefree_decomposition(&f);
        prop_assert_eq!(&got, &expected);
        let all_even = expected.iter().all(|(_, e)| e % 2 == 0);
        prop_assert_eq!(is_perfect_square(&f.monic()).is_some(), all_even);
    }
}

fn small_rational(bound: i64) -> impl Strategy<Value = Rational> {
    (-bound..bound, 1i64..12).prop_map(|(n, d)| Rational::from((n, d)))
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn norm_is_a_square_for_complex_lifts(h in small_rational(600)) {
        prop_assume!(Rational::from(h.square_ref()) < 2916);
        let (_, square) = norm_square_check(&h).unwrap();
        prop_assert!(square);
    }
}

proptest! {
    #![proptest_config(config(30))]

    #[test]
    fn conjugate_reductions_agree(p in prop::sample::select(vec![3u64, 5, 7, 13]), h in small_rational(200)) {
        let Ok(j) = j_from_h(&h, p) else { return Ok(()) };
        let mut pairs = 0;
        for q in primes_up_to(600).into_iter().filter(|&q| q > 3) {
            let Ok(Reduction::Pair(a, b)) = reduce_mod(&j, q) else { continue };
            let sa = is_supersingular_j(&Fq2::base(q, a), u64::MAX).unwrap();
            let sb = is_supersingular_j(&Fq2::base(q, b), u64::MAX).unwrap();
            prop_assert_eq!(sa, sb, "j = {} mod {}", j, q);
            pairs += 1;
        }
        prop_assert!(pairs > 0 || j.is_rational());
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn search_never_repeats_avoided_primes(n in 1i64..160, d in 1i64..10) {
        let h = Rational::from((n, d));
        let opts = SearchOptions { count: 1, ell_bound: 200, ..Default::default() };
        let first = match search(11, &h, &[], &opts) {
            Ok(o) => o,
            Err(SearchError::SupersingularAtP { .. } | SearchError::RealJCase { .. } | SearchError::OnBoundary { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for c in &first.certificates {
            c.check().unwrap();
        }
        let found = first.primes();
        prop_assume!(!found.is_empty());
        let again = search(11, &h, &found, &opts).unwrap();
        for c in &again.certificates {
            c.check().unwrap();
            for q in c.selected_primes().unwrap() {
                prop_assert!(!found.contains(&q), "{} repeated", q);
            }
        }
        prop_assert!(again.certificates.iter().all(|c| c.verified.iter().all(|v| v.status != Status::Ordinary)));
    }
}
