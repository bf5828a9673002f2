//! Search for supersingular primes of a curve with `j_p = h` rational:
//! pick `ℓ` so that the class polynomial value `P(h)` is negative, then
//! read primes off its numerator that are not split modulo `pℓ`.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use rug::ops::RemRounding;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classpoly::{build_pd, build_pl, evaluate, ClassPolyError, ClassPolynomial, DiscSpec};
use crate::exactarith::{factorize_with, is_prime_u64, kronecker, ArithError, FactorBudget, Factorization};
use crate::hauptmodul::{Arc, HauptmodulError};
use crate::modpoly::{is_perfect_square, mod_p_square_check, shape_mod_ell, supersingular_set, FPoly, ModPolyError};
use crate::quadforms::{Discriminant, FormError, Shape};
use crate::ssverify::{self, QuadSurd, Status, VerifyError};

pub const DEFAULT_ELL_BOUND: u64 = 500;

/// Distance kept from the ends of `j_p(S)`.
pub const BOUNDARY_MARGIN: f64 = 1.0 / 65536.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("p = {0} is not one of 3, 5, 7, 11, 13, 19")]
    UnsupportedLevel(u64),
    #[error("h = {h} is a supersingular j_{p}-invariant mod {p}")]
    SupersingularAtP { p: u64, h: String },
    #[error("h = {h} lies outside j_{p}(S) = [{lo}, {hi}]: real-j case, not searched")]
    RealJCase { p: u64, h: String, lo: f64, hi: f64 },
    #[error("h = {h} is within {BOUNDARY_MARGIN} of an endpoint of j_{p}(S)")]
    OnBoundary { p: u64, h: String },
    #[error("no admissible ℓ ≤ {bound}")]
    BoundExhausted { bound: u64 },
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error("unfactored cofactor in P(h) at ℓ = {0}")]
    Unfactored(u64),
    #[error(transparent)]
    ClassPoly(#[from] ClassPolyError),
    #[error(transparent)]
    ModPoly(#[from] ModPolyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Hauptmodul(#[from] HauptmodulError),
    #[error(transparent)]
    Form(#[from] FormError),
}

pub fn is_search_level(p: u64) -> bool {
    matches!(p, 3 | 5 | 7 | 11 | 13 | 19)
}

/// `ℓ ≡ 1 mod 4` split in `O_{-p}` for `p ≡ 3 mod 4`; the tabulated
/// residue classes for `p ∈ {5, 13}`.
pub fn ell_admissible(p: u64, ell: u64) -> bool {
    if ell == p || ell < 3 || !is_prime_u64(ell) {
        return false;
    }
    match p {
        5 => [3, 7].contains(&(ell % 20)),
        13 => [7, 11, 15, 19, 31, 47].contains(&(ell % 52)),
        _ if p % 4 == 3 => ell % 4 == 1 && kronecker(&Integer::from(-(p as i64)), &Integer::from(ell)) == 1,
        _ => false,
    }
}

/// Every `v ∈ Σ` other than `p` is a square modulo `pℓ`.
pub fn sigma_condition(ell: u64, p: u64, sigma: &[Integer]) -> bool {
    let pl = Integer::from(p * ell);
    sigma.iter().filter(|v| **v != p).all(|v| kronecker(v, &pl) == 1)
}

/// An `ℓ` with its class polynomial and the value at `h`.
#[derive(Debug, Clone)]
pub struct EllChoice {
    pub ell: u64,
    pub poly: ClassPolynomial,
    /// The single factors of a product-form polynomial.
    pub factors: Vec<ClassPolynomial>,
    pub value: Rational,
}

fn polynomial_for(p: u64, ell: u64, bits: Option<u32>) -> Result<(ClassPolynomial, Vec<ClassPolynomial>), SearchError> {
    if p % 4 == 1 {
        let full = build_pl(ell, p, bits)?;
        let small = build_pd(&Discriminant::new(p, ell, Shape::MinusPEll)?, bits)?;
        let large = build_pd(&Discriminant::new(p, ell, Shape::MinusFourPEll)?, bits)?;
        Ok((full, vec![small, large]))
    } else {
        let f = build_pd(&Discriminant::new(p, ell, Shape::MinusFourPEll)?, bits)?;
        Ok((f.clone(), vec![f]))
    }
}

/// The smallest admissible `ℓ` in `[from, bound]` passing the `Σ` condition
/// with `P(h) < 0`.
pub fn find_ell(
    p: u64,
    h: &Rational,
    sigma: &[Integer],
    from: u64,
    bound: u64,
    bits: Option<u32>,
) -> Result<EllChoice, SearchError> {
    for ell in from.max(3)..=bound {
        if !ell_admissible(p, ell) || !sigma_condition(ell, p, sigma) {
            continue;
        }
        let (poly, factors) = polynomial_for(p, ell, bits)?;
        let value = evaluate(&poly, h);
        if value < 0 {
            return Ok(EllChoice { ell, poly, factors, value });
        }
    }
    Err(SearchError::BoundExhausted { bound })
}

/// The primes read off a negative value.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub factorization: Factorization,
    pub kronecker: Vec<(Integer, i32)>,
    pub selected: Vec<Integer>,
}

/// Factors the numerator and keeps the primes `q ∉ Σ ∪ {p}` with
/// `(q | pℓ) ≠ 1`.
pub fn extract_primes(
    value: &Rational,
    p: u64,
    ell: u64,
    sigma: &[Integer],
    budget: &FactorBudget,
) -> Result<Extracted, SearchError> {
    if value.numer().cmp_abs(&Integer::from(1)).is_le() {
        return Err(SearchError::Consistency(format!("{value} has no prime factors to extract")));
    }
    let factorization = factorize_with(value.numer(), budget)?;
    let pl = Integer::from(p * ell);
    let kron: Vec<(Integer, i32)> = factorization
        .factors
        .iter()
        .map(|(q, _)| (q.clone(), kronecker(q, &pl)))
        .collect();
    let selected: Vec<Integer> = kron
        .iter()
        .filter(|(q, k)| *k != 1 && *q != p && !sigma.contains(q))
        .map(|(q, _)| q.clone())
        .collect();
    if selected.is_empty() {
        if !factorization.is_complete() {
            return Err(SearchError::Unfactored(ell));
        }
        return Err(SearchError::Consistency(format!(
            "no prime of {value} is non-split mod {pl} outside Σ"
        )));
    }
    Ok(Extracted {
        factorization,
        kronecker: kron,
        selected,
    })
}

/// `j_p(S)` as a real interval, for `p ≡ 3 mod 4`.
pub fn arc_image(p: u64) -> Result<(f64, f64), SearchError> {
    static CACHE: OnceLock<std::sync::Mutex<Vec<(u64, (f64, f64))>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some((_, v)) = cache.lock().expect("cache lock").iter().find(|(q, _)| *q == p) {
        return Ok(*v);
    }
    let (a, b) = Arc::new(p)?.endpoint_values(256)?;
    let v = (a.to_f64().min(b.to_f64()), a.to_f64().max(b.to_f64()));
    cache.lock().expect("cache lock").push((p, v));
    Ok(v)
}

/// Where `h` sits relative to `j_p(S)`; errors unless strictly inside.
pub fn check_arc_interior(p: u64, h: &Rational) -> Result<(), SearchError> {
    let (lo, hi) = arc_image(p)?;
    let x = Float::with_val(128, h).to_f64();
    if x < lo - BOUNDARY_MARGIN || x > hi + BOUNDARY_MARGIN {
        return Err(SearchError::RealJCase { p, h: h.to_string(), lo, hi });
    }
    if (x - lo).abs() <= BOUNDARY_MARGIN || (x - hi).abs() <= BOUNDARY_MARGIN {
        return Err(SearchError::OnBoundary { p, h: h.to_string() });
    }
    Ok(())
}

/// `h mod p` is one of the supersingular `j_p`-invariants.
pub fn is_supersingular_at_p(p: u64, h: &Rational) -> Result<bool, SearchError> {
    let pi = Integer::from(p);
    if h.denom().is_divisible(&pi) {
        return Ok(false);
    }
    let den_inv = h.denom().clone().invert(&pi).expect("coprime denominator");
    let r = Integer::from(h.numer() * &den_inv).rem_euc(&pi);
    let r = r.to_u64().expect("small residue");
    Ok(supersingular_set(p)?.contains(&r))
}

/// Value of `P(h)` with its provenance, ready for JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionJson {
    pub num: String,
    pub den: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorJson {
    pub prime: String,
    pub exponent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerJson {
    pub q: String,
    pub symbol: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedJson {
    pub q: String,
    pub status: Status,
}

/// One supersingular-prime discovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCertificate {
    pub p: u64,
    pub h: String,
    pub sigma: Vec<String>,
    pub ell: u64,
    #[serde(rename = "D")]
    pub disc: DiscSpec,
    pub value: FractionJson,
    pub factors: Vec<FactorJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unfactored: Vec<String>,
    pub selected: Vec<String>,
    pub kronecker: Vec<KroneckerJson>,
    pub verified: Vec<VerifiedJson>,
}

fn parse_int(s: &str) -> Result<Integer, SearchError> {
    s.parse()
        .map_err(|_| SearchError::Consistency(format!("bad integer {s:?}")))
}

impl SearchCertificate {
    pub fn value(&self) -> Result<Rational, SearchError> {
        Ok(Rational::from((parse_int(&self.value.num)?, parse_int(&self.value.den)?)))
    }

    pub fn selected_primes(&self) -> Result<Vec<Integer>, SearchError> {
        self.selected.iter().map(|s| parse_int(s)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SearchError> {
        serde_json::from_str(s).map_err(|e| SearchError::Consistency(e.to_string()))
    }

    /// The certificate invariants, checked from the stored data alone.
    pub fn check(&self) -> Result<(), SearchError> {
        let fail = |m: String| Err(SearchError::Consistency(m));
        let value = self.value()?;
        if value >= 0 {
            return fail(format!("value {value} is not negative"));
        }
        let sigma: Vec<Integer> = self.sigma.iter().map(|s| parse_int(s)).collect::<Result<_, _>>()?;
        let pl = Integer::from(self.p * self.ell);
        for q in self.selected_primes()? {
            if kronecker(&q, &pl) == 1 {
                return fail(format!("{q} is a square mod {pl}"));
            }
            if sigma.contains(&q) || q == self.p {
                return fail(format!("{q} is excluded"));
            }
            if !value.numer().is_divisible(&q) {
                return fail(format!("{q} does not divide the numerator"));
            }
        }
        if !value.denom().is_perfect_square() {
            return fail(format!("denominator {} is not a square", value.denom()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub ell_bound: u64,
    pub count: usize,
    pub budget: FactorBudget,
    pub effort_bound: u64,
    pub bits: Option<u32>,
    /// The j-invariant of the curve, for verification when no built-in lift
    /// exists.
    pub j: Option<QuadSurd>,
    /// Add the primes dividing the denominator of `h` to `Σ`.
    pub augment_sigma: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            ell_bound: DEFAULT_ELL_BOUND,
            count: 1,
            budget: FactorBudget::default(),
            effort_bound: ssverify::DEFAULT_EFFORT_BOUND,
            bits: None,
            j: None,
            augment_sigma: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub certificates: Vec<SearchCertificate>,
    /// Fewer than `count` primes were found before `ell_bound`.
    pub exhausted: bool,
}

impl SearchOutcome {
    pub fn primes(&self) -> Vec<Integer> {
        self.certificates
            .iter()
            .flat_map(|c| c.selected_primes().unwrap_or_default())
            .collect()
    }
}

/// Squareness mod `ℓ` and mod `p` before anything is read off `P(h)`.
fn soundness_checks(p: u64, choice: &EllChoice) -> Result<(), SearchError> {
    for f in &choice.factors {
        if !shape_mod_ell(f, choice.ell) {
            return Err(SearchError::Consistency(format!(
                "P_{:?} is not of the expected shape mod {}",
                f.disc, choice.ell
            )));
        }
    }
    if !mod_p_square_check(&choice.poly).is_square {
        return Err(SearchError::Consistency(format!("P is not a square mod {p} at ℓ = {}", choice.ell)));
    }
    if p % 4 == 1 {
        let f = FPoly::from_integers(choice.ell, &choice.poly.coefficients);
        if is_perfect_square(&f).is_none() {
            return Err(SearchError::Consistency(format!("P_ℓ is not a square mod {}", choice.ell)));
        }
    }
    if !choice.value.denom().is_perfect_square() {
        return Err(SearchError::Consistency(format!(
            "denominator of {} is not a square",
            choice.value
        )));
    }
    Ok(())
}

fn prime_divisors(n: &Integer) -> Vec<Integer> {
    let mut out = Vec::new();
    let mut m = Integer::from(n.abs_ref());
    let mut d = Integer::from(2);
    while Integer::from(&d * &d) <= m {
        if m.is_divisible(&d) {
            out.push(d.clone());
            while m.is_divisible(&d) {
                m /= &d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// Runs the search until `count` primes outside `Σ` are certified.
pub fn search(p: u64, h: &Rational, sigma: &[Integer], opts: &SearchOptions) -> Result<SearchOutcome, SearchError> {
    if !is_search_level(p) {
        return Err(SearchError::UnsupportedLevel(p));
    }
    if is_supersingular_at_p(p, h)? {
        return Err(SearchError::SupersingularAtP { p, h: h.to_string() });
    }
    if p % 4 == 3 {
        check_arc_interior(p, h)?;
    }
    let mut sig: BTreeSet<Integer> = sigma.iter().cloned().collect();
    if opts.augment_sigma {
        sig.extend(prime_divisors(h.denom()));
    }
    let j = match &opts.j {
        Some(j) => Some(j.clone()),
        None => ssverify::j_from_h(h, p).ok(),
    };
    let mut certificates = Vec::new();
    let mut found = 0usize;
    let mut from = 3u64;
    while found < opts.count {
        let sig_vec: Vec<Integer> = sig.iter().cloned().collect();
        let choice = match find_ell(p, h, &sig_vec, from, opts.ell_bound, opts.bits) {
            Ok(c) => c,
            Err(SearchError::BoundExhausted { .. }) => {
                return Ok(SearchOutcome { certificates, exhausted: true });
            }
            Err(e) => return Err(e),
        };
        from = choice.ell + 1;
        soundness_checks(p, &choice)?;
        let extracted = match extract_primes(&choice.value, p, choice.ell, &sig_vec, &opts.budget) {
            Ok(x) => x,
            Err(SearchError::Unfactored(_)) => continue,
            Err(e) => return Err(e),
        };
        let verified = extracted
            .selected
            .iter()
            .map(|q| {
                let status = match &j {
                    Some(j) => ssverify::verify_j_mod(j, q, opts.effort_bound)?,
                    None => Status::Unverified,
                };
                Ok(VerifiedJson { q: q.to_string(), status })
            })
            .collect::<Result<Vec<_>, SearchError>>()?;
        if let Some(bad) = verified.iter().find(|v| v.status == Status::Ordinary) {
            return Err(SearchError::Consistency(format!("{} failed the Hasse test", bad.q)));
        }
        let cert = SearchCertificate {
            p,
            h: h.to_string(),
            sigma: sig_vec.iter().map(|s| s.to_string()).collect(),
            ell: choice.ell,
            disc: choice.poly.disc,
            value: FractionJson {
                num: choice.value.numer().to_string(),
                den: choice.value.denom().to_string(),
            },
            factors: extracted
                .factorization
                .factors
                .iter()
                .map(|(q, e)| FactorJson { prime: q.to_string(), exponent: *e })
                .collect(),
            unfactored: extracted.factorization.unfactored.iter().map(|c| c.to_string()).collect(),
            selected: extracted.selected.iter().map(|q| q.to_string()).collect(),
            kronecker: extracted
                .kronecker
                .iter()
                .map(|(q, k)| KroneckerJson { q: q.to_string(), symbol: *k })
                .collect(),
            verified,
        };
        cert.check()?;
        found += extracted.selected.len();
        sig.extend(extracted.selected);
        certificates.push(cert);
    }
    Ok(SearchOutcome { certificates, exhausted: false })
}
