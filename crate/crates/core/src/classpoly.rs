//! Class polynomials `P_D(X)`: the monic integer polynomial whose roots are
//! the values of `j_p` at Heegner points, one per Atkin–Lehner pair.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hauptmodul::{self, CMPoint, HauptmodulError, HighComplex};
use crate::quadforms::{
    al_pair_classes, enumerate_classes, heegner_rep, Discriminant, FormError, QuadForm, Shape,
};

/// Largest working precision tried before giving up.
pub const MAX_BITS: u32 = 1 << 16;

/// Coefficients must lie this close to integers.
pub const RESIDUAL_BOUND: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassPolyError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Hauptmodul(#[from] HauptmodulError),
    #[error("precision exhausted at {bits} bits for D = {disc} (residual {residual:e})")]
    PrecisionExhausted { disc: i64, bits: u32, residual: f64 },
    #[error("product form needs p in {{5, 13}}, got {0}")]
    ProductFormLevel(u64),
    #[error("coefficients for D = {disc} do not approach integers (residual {residual:e} at {bits} bits)")]
    NotIntegral { disc: i64, bits: u32, residual: f64 },
    #[error("malformed class polynomial: {0}")]
    Malformed(String),
}

/// The discriminant(s) a class polynomial was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiscSpec {
    Single(i64),
    /// `P_{-pℓ} · P_{-4pℓ}`.
    Product([i64; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassPolynomial {
    pub p: u64,
    pub disc: DiscSpec,
    /// Ascending; the last entry is 1.
    pub coefficients: Vec<Integer>,
    pub rounding_residual: f64,
}

#[derive(Serialize, Deserialize)]
struct ClassPolynomialJson {
    p: u64,
    #[serde(rename = "D")]
    disc: DiscSpec,
    coefficients: Vec<String>,
    rounding_residual: f64,
}

impl ClassPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn is_monic(&self) -> bool {
        self.coefficients.last().map_or(false, |c| *c == 1)
    }

    pub fn to_json(&self) -> String {
        let j = ClassPolynomialJson {
            p: self.p,
            disc: self.disc,
            coefficients: self.coefficients.iter().map(|c| c.to_string()).collect(),
            rounding_residual: self.rounding_residual,
        };
        serde_json::to_string_pretty(&j).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassPolyError> {
        let j: ClassPolynomialJson =
            serde_json::from_str(s).map_err(|e| ClassPolyError::Malformed(e.to_string()))?;
        let coefficients = j
            .coefficients
            .iter()
            .map(|c| {
                c.parse::<Integer>()
                    .map_err(|_| ClassPolyError::Malformed(format!("bad coefficient {c:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let poly = Self {
            p: j.p,
            disc: j.disc,
            coefficients,
            rounding_residual: j.rounding_residual,
        };
        if !poly.is_monic() {
            return Err(ClassPolyError::Malformed("not monic".into()));
        }
        Ok(poly)
    }
}

/// Heuristic starting precision from the sizes of the Heegner forms.
pub fn initial_bits(disc: i64, reps: &[QuadForm]) -> u32 {
    let inv_sum: f64 = reps.iter().map(|f| 1.0 / f.a as f64).sum();
    let est = 64.0 + 3.5 * std::f64::consts::PI * (-disc as f64).sqrt() * inv_sum / std::f64::consts::LN_2;
    (est.ceil() as u32).clamp(64, MAX_BITS)
}

/// One Heegner form per Atkin–Lehner pair: whichever class gives the
/// smaller leading coefficient.
pub fn pair_representatives(disc: &Discriminant) -> Result<Vec<QuadForm>, ClassPolyError> {
    let group = enumerate_classes(disc);
    let pairs = al_pair_classes(&group)?;
    let p = disc.p();
    pairs
        .iter()
        .map(|(f, g)| {
            let a = heegner_rep(f, p)?;
            let b = heegner_rep(g, p)?;
            Ok(if b.a < a.a { b } else { a })
        })
        .collect()
}

/// `∏(X - v)` with ascending coefficients.
fn expand(values: &[HighComplex], prec: u32) -> Vec<HighComplex> {
    let mut poly = vec![HighComplex::one(prec)];
    for v in values {
        let mut next = vec![HighComplex::zero(prec); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k + 1] = &next[k + 1] + c;
            next[k] = &next[k] - &(c * v);
        }
        poly = next;
    }
    poly
}

struct Rounded {
    coefficients: Vec<Integer>,
    residual: f64,
}

fn round_coefficients(poly: &[HighComplex]) -> Rounded {
    let mut residual = 0f64;
    let coefficients = poly
        .iter()
        .map(|c| {
            let r = c.re.to_integer().expect("finite coefficient");
            let dr = Float::with_val(c.re.prec(), &c.re - &r).abs().to_f64();
            residual = residual.max(dr).max(c.im.to_f64().abs());
            r
        })
        .collect();
    Rounded {
        coefficients,
        residual,
    }
}

/// `max |P(v)| / Σ|c_k||v|^k` over the given points.
fn relative_reevaluation(coefficients: &[Integer], values: &[HighComplex]) -> f64 {
    let mut worst = 0f64;
    for v in values {
        let prec = v.prec();
        let mut acc = HighComplex::zero(prec);
        let mut scale = Float::with_val(prec, 0);
        let av = v.abs();
        for c in coefficients.iter().rev() {
            acc = &acc * v;
            acc.re += c;
            scale *= &av;
            scale += Float::with_val(prec, Integer::from(c.abs_ref()));
        }
        let rel = Float::with_val(prec, acc.abs() / &scale).to_f64();
        worst = worst.max(rel);
    }
    worst
}

/// Values of `j_p` at the given Heegner forms, computed in parallel.
pub fn heegner_values(forms: &[QuadForm], p: u64, bits: u32) -> Result<Vec<HighComplex>, ClassPolyError> {
    forms
        .par_iter()
        .map(|f| {
            let cm = CMPoint::from_form(f, bits)?;
            Ok(hauptmodul::j_p(&cm.tau, p, bits)?)
        })
        .collect()
}

fn env_bits() -> Option<u32> {
    std::env::var("HEEGNER_BITS").ok()?.parse().ok()
}

/// Builds `P_D` from the given Heegner forms, doubling the precision until
/// the rounding certifies.
fn build_from_forms(
    disc: i64,
    p: u64,
    forms: &[QuadForm],
    bits: Option<u32>,
) -> Result<(Vec<Integer>, f64), ClassPolyError> {
    let mut bits = bits.or_else(env_bits).unwrap_or_else(|| initial_bits(disc, forms)).max(64);
    let mut previous: Option<Rounded> = None;
    loop {
        let values = heegner_values(forms, p, bits)?;
        let prec = values.iter().map(HighComplex::prec).min().unwrap_or(bits);
        let rounded = round_coefficients(&expand(&values, prec));
        if rounded.residual < RESIDUAL_BOUND {
            let rel = relative_reevaluation(&rounded.coefficients, &values);
            if rel < 2f64.powi(-(bits as i32) / 4) {
                return Ok((rounded.coefficients, rounded.residual));
            }
        } else if let Some(prev) = &previous {
            // same nearest integers and no shrinkage: the limit is not integral
            if prev.coefficients == rounded.coefficients && rounded.residual > prev.residual / 2.0 {
                return Err(ClassPolyError::NotIntegral {
                    disc,
                    bits,
                    residual: rounded.residual,
                });
            }
        }
        if bits >= MAX_BITS {
            return Err(ClassPolyError::PrecisionExhausted {
                disc,
                bits,
                residual: rounded.residual,
            });
        }
        previous = Some(rounded);
        bits = (bits * 2).min(MAX_BITS);
    }
}

/// `P_D(X)`, of degree `h(D)/2`.
pub fn build_pd(disc: &Discriminant, bits: Option<u32>) -> Result<ClassPolynomial, ClassPolyError> {
    let p = disc.p();
    if !hauptmodul::has_hauptmodul(p) {
        return Err(HauptmodulError::UnsupportedLevel(p).into());
    }
    let forms = pair_representatives(disc)?;
    let (coefficients, residual) = build_from_forms(disc.value(), p, &forms, bits)?;
    Ok(ClassPolynomial {
        p,
        disc: DiscSpec::Single(disc.value()),
        coefficients,
        rounding_residual: residual,
    })
}

/// `P_D` by rounding the product over all `h(D)` classes and taking an exact
/// polynomial square root. Slower; used to cross-check [`build_pd`].
pub fn build_pd_via_square_root(disc: &Discriminant, bits: Option<u32>) -> Result<ClassPolynomial, ClassPolyError> {
    let p = disc.p();
    let group = enumerate_classes(disc);
    let forms = group
        .classes
        .iter()
        .map(|f| heegner_rep(f, p))
        .collect::<Result<Vec<_>, _>>()?;
    let (full, residual) = build_from_forms(disc.value(), p, &forms, bits)?;
    let coefficients = integer_poly_sqrt(&full).ok_or_else(|| {
        ClassPolyError::Malformed(format!("full product for D = {} is not a square", disc.value()))
    })?;
    Ok(ClassPolynomial {
        p,
        disc: DiscSpec::Single(disc.value()),
        coefficients,
        rounding_residual: residual,
    })
}

/// The exact square root of a monic integer polynomial, if it has one.
pub fn integer_poly_sqrt(f: &[Integer]) -> Option<Vec<Integer>> {
    if f.is_empty() || f.len() % 2 == 0 || *f.last()? != 1 {
        return None;
    }
    let n = (f.len() - 1) / 2;
    // g = X^n + g_{n-1} X^{n-1} + ..., solved from the top coefficients
    let mut g = vec![Integer::new(); n + 1];
    g[n] = Integer::from(1);
    for k in (0..n).rev() {
        // coefficient of X^{n+k} in g² is 2 g_k + Σ_{i+j=n+k, k<i,j≤n} g_i g_j
        let mut s = Integer::new();
        for i in k + 1..=n {
            let j = n + k - i;
            if j > k && j <= n {
                s += &g[i] * &g[j];
            }
        }
        let rem = Integer::from(&f[n + k] - &s);
        if rem.is_odd() {
            return None;
        }
        g[k] = rem / 2;
    }
    (poly_mul(&g, &g) == f).then_some(g)
}

pub fn poly_mul(a: &[Integer], b: &[Integer]) -> Vec<Integer> {
    let mut out = vec![Integer::new(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `P_ℓ = P_{-pℓ} · P_{-4pℓ}` for `p ∈ {5, 13}` and `ℓ ≡ 3 mod 4`.
pub fn build_pl(ell: u64, p: u64, bits: Option<u32>) -> Result<ClassPolynomial, ClassPolyError> {
    if p != 5 && p != 13 {
        return Err(ClassPolyError::ProductFormLevel(p));
    }
    let d1 = Discriminant::new(p, ell, Shape::MinusPEll)?;
    let d2 = Discriminant::new(p, ell, Shape::MinusFourPEll)?;
    let f1 = build_pd(&d1, bits)?;
    let f2 = build_pd(&d2, bits)?;
    Ok(ClassPolynomial {
        p,
        disc: DiscSpec::Product([d1.value(), d2.value()]),
        coefficients: poly_mul(&f1.coefficients, &f2.coefficients),
        rounding_residual: f1.rounding_residual.max(f2.rounding_residual),
    })
}

/// Exact value of the polynomial at a rational point.
pub fn evaluate(poly: &ClassPolynomial, h: &Rational) -> Rational {
    eval_rational(&poly.coefficients, h)
}

fn eval_rational(coefficients: &[Integer], h: &Rational) -> Rational {
    let mut acc = Rational::new();
    for c in coefficients.iter().rev() {
        acc *= h;
        acc += c;
    }
    acc
}

/// An isolating interval `[lo, hi]` holding exactly one real root.
#[derive(Debug, Clone, PartialEq)]
pub struct RootInterval {
    pub lo: Rational,
    pub hi: Rational,
}

impl RootInterval {
    pub fn midpoint(&self) -> f64 {
        Rational::from(&self.lo + &self.hi).to_f64() / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo.to_f64() <= x && x <= self.hi.to_f64()
    }
}

fn trim(p: &mut Vec<Integer>) {
    while p.len() > 1 && p.last().map_or(false, |c| *c == 0) {
        p.pop();
    }
}

fn derivative(p: &[Integer]) -> Vec<Integer> {
    let mut d: Vec<Integer> = p.iter().enumerate().skip(1).map(|(k, c)| Integer::from(c * k as u32)).collect();
    if d.is_empty() {
        d.push(Integer::new());
    }
    d
}

fn primitive_part(p: &mut [Integer]) {
    let g = p.iter().fold(Integer::new(), |g, c| g.gcd(c));
    if g > 1 {
        for c in p.iter_mut() {
            *c /= &g;
        }
    }
}

/// Remainder of `a` by `b` scaled by a positive constant, keeping the
/// signs required by a Sturm sequence.
fn signed_pseudo_rem(a: &[Integer], b: &[Integer]) -> Vec<Integer> {
    let mut r = a.to_vec();
    let lead = b.last().expect("nonzero divisor").clone();
    let db = b.len() - 1;
    let lead_abs = Integer::from(lead.abs_ref());
    while r.len() > db && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let top = r[dr].clone();
        // r <- |lead|·r - sign(lead)·top·X^{dr-db}·b
        for c in r.iter_mut() {
            *c *= &lead_abs;
        }
        let factor = if lead < 0 { Integer::from(-&top) } else { top };
        for (k, c) in b.iter().enumerate() {
            r[dr - db + k] -= Integer::from(&factor * c);
        }
        r.pop();
        trim(&mut r);
        if r.len() == 1 && r[0] == 0 {
            break;
        }
    }
    trim(&mut r);
    primitive_part(&mut r);
    r
}

fn is_zero(p: &[Integer]) -> bool {
    p.iter().all(|c| *c == 0)
}

fn sturm_sequence(f: &[Integer]) -> Vec<Vec<Integer>> {
    let mut seq = vec![f.to_vec(), derivative(f)];
    loop {
        let n = seq.len();
        if seq[n - 1].len() == 1 {
            break;
        }
        let r = signed_pseudo_rem(&seq[n - 2], &seq[n - 1]);
        if is_zero(&r) {
            break;
        }
        seq.push(r.into_iter().map(|c| -c).collect());
    }
    seq
}

fn sign_changes(seq: &[Vec<Integer>], x: &Rational) -> usize {
    let mut count = 0;
    let mut last = 0;
    for p in seq {
        let s = eval_rational(p, x).cmp0() as i32;
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Isolates every real root to an interval of width at most `2^-32`.
pub fn real_roots(poly: &ClassPolynomial) -> Vec<RootInterval> {
    real_roots_of(&poly.coefficients)
}

pub fn real_roots_of(coefficients: &[Integer]) -> Vec<RootInterval> {
    let mut f = coefficients.to_vec();
    trim(&mut f);
    if f.len() < 2 {
        return Vec::new();
    }
    let seq = sturm_sequence(&f);
    let lead = Integer::from(f.last().unwrap().abs_ref());
    let max_ratio = f[..f.len() - 1]
        .iter()
        .map(|c| Rational::from((Integer::from(c.abs_ref()), lead.clone())))
        .max()
        .unwrap_or_default();
    let bound = max_ratio + Rational::from(1);
    let lo = Rational::from(-&bound);
    let width = Rational::from((1, 1u64 << 32));
    let mut out = Vec::new();
    isolate(&seq, lo, bound, &width, &mut out);
    out
}

/// Roots in the half-open interval `(lo, hi]`.
fn isolate(seq: &[Vec<Integer>], lo: Rational, hi: Rational, width: &Rational, out: &mut Vec<RootInterval>) {
    let n = sign_changes(seq, &lo) as i64 - sign_changes(seq, &hi) as i64;
    if n <= 0 {
        return;
    }
    let span = Rational::from(&hi - &lo);
    if n == 1 && span <= *width {
        out.push(RootInterval { lo, hi });
        return;
    }
    let mid = Rational::from(&lo + &hi) / 2u32;
    isolate(seq, lo, mid.clone(), width, out);
    isolate(seq, mid, hi, width, out);
}

/// Signs of `P(-big)` and `P(big)` for a monic polynomial: `(-1)^deg` and `+1`.
pub fn end_signs(poly: &ClassPolynomial) -> (i32, i32) {
    let d = poly.degree();
    (if d % 2 == 0 { 1 } else { -1 }, 1)
}

/// Integer `n` as a `Rational`.
pub fn rational(n: i64) -> Rational {
    Rational::from(n)
}

/// `10^k`, handy for bounding coefficient sizes in tests.
pub fn ten_pow(k: u32) -> Integer {
    Integer::from(10).pow(k)
}
