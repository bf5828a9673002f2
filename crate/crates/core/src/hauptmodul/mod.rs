//! Multiprecision evaluation of the Dedekind eta function, binary theta
//! series, the Hauptmoduln `j_p` of `X₀*(p)` and the classical `j`.
//!
//! Points are first moved into a fundamental domain of the relevant group
//! (`SL₂(Z)`, `Γ₀(p)` or `Γ₀(p)` extended by the Fricke involution) so that
//! the `q`-series converge quickly; truncation drops every term below
//! `2^-(bits + GUARD_BITS)`.

mod complex;

use rug::float::Constant;
use rug::Float;
use thiserror::Error;

pub use complex::HighComplex;

use crate::quadforms::{xgcd, QuadForm};

pub const GUARD_BITS: u32 = 32;

/// Extra working precision carried on top of the requested bits.
const WORKING_EXTRA: u32 = 32;

/// Levels with a Hauptmodul on `X₀*(p)` used by the supersingular search.
pub const SUPPORTED_LEVELS: [u64; 6] = [3, 5, 7, 11, 13, 19];

/// Raw series evaluation refuses points this close to the real axis.
pub const MIN_IMAGINARY_PART: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HauptmodulError {
    #[error("no Hauptmodul implemented for p = {0}")]
    UnsupportedLevel(u64),
    #[error("point is not in the upper half plane (Im = {0})")]
    NotInUpperHalfPlane(f64),
    #[error("Im(τ) = {0} is below {MIN_IMAGINARY_PART}")]
    TooCloseToRealAxis(f64),
    #[error("({0}, {1}, {2}) is not positive definite")]
    Indefinite(i64, i64, i64),
}

/// Whether `j_p` is available for `p`. Level 23 is included for the
/// square-detection experiment only.
pub fn has_hauptmodul(p: u64) -> bool {
    SUPPORTED_LEVELS.contains(&p) || p == 23
}

fn working_prec(bits: u32) -> u32 {
    bits + GUARD_BITS + WORKING_EXTRA
}

fn check_upper(tau: &HighComplex) -> Result<(), HauptmodulError> {
    let im = tau.im.to_f64();
    if !(im > 0.0) {
        return Err(HauptmodulError::NotInUpperHalfPlane(im));
    }
    Ok(())
}

fn check_series_domain(tau: &HighComplex) -> Result<(), HauptmodulError> {
    check_upper(tau)?;
    let im = tau.im.to_f64();
    if im < MIN_IMAGINARY_PART {
        return Err(HauptmodulError::TooCloseToRealAxis(im));
    }
    Ok(())
}

/// A CM point `τ = (-b + i√|D|)/(2a)` together with the form it came from.
#[derive(Clone, Debug)]
pub struct CMPoint {
    pub tau: HighComplex,
    pub form: QuadForm,
    pub disc: i64,
}

impl CMPoint {
    pub fn from_form(form: &QuadForm, bits: u32) -> Result<Self, HauptmodulError> {
        let d = form.discriminant();
        if form.a <= 0 || d >= 0 {
            return Err(HauptmodulError::Indefinite(form.a, form.b, form.c));
        }
        let prec = working_prec(bits);
        let two_a = Float::with_val(prec, 2 * form.a);
        let re = Float::with_val(prec, -form.b) / &two_a;
        let im = Float::with_val(prec, -d).sqrt() / &two_a;
        Ok(Self {
            tau: HighComplex::new(re, im),
            form: *form,
            disc: d,
        })
    }
}

/// `-log₂|q|` for `q = exp(2πiτ·scale)`, as a float.
fn q_decay_bits(tau: &HighComplex, scale: f64) -> f64 {
    2.0 * std::f64::consts::PI * tau.im.to_f64() * scale / std::f64::consts::LN_2
}

fn terms_needed(decay_bits: f64, target_bits: u32) -> u64 {
    (f64::from(target_bits) / decay_bits).ceil() as u64 + 2
}

/// `Σ_k c_k x^{e_k}` over an ascending list of (exponent, coefficient).
fn sparse_series(x: &HighComplex, terms: &[(u64, i64)]) -> HighComplex {
    let prec = x.prec();
    let mut acc = HighComplex::zero(prec);
    let mut power = HighComplex::one(prec);
    let mut at = 0u64;
    for &(e, c) in terms {
        if e > at {
            power = &power * &x.powi((e - at) as i64);
            at = e;
        }
        acc = &acc + &power.scale_int(c);
    }
    acc
}

/// `Σ_{n ≤ N} c_n x^n` by Horner's rule.
fn dense_series(x: &HighComplex, coeffs: &[i64]) -> HighComplex {
    let prec = x.prec();
    let mut acc = HighComplex::zero(prec);
    for &c in coeffs.iter().rev() {
        acc = (&acc * x).add_int(c);
    }
    acc
}

/// `∏(1 - qⁿ) = Σ (-1)^k q^{k(3k-1)/2}` evaluated at `q`, with `decay` the
/// value of `-log₂|q|`.
fn euler_product(q: &HighComplex, decay: f64, target_bits: u32) -> HighComplex {
    let n_max = terms_needed(decay, target_bits);
    let mut terms = vec![(0u64, 1i64)];
    let mut k = 1u64;
    loop {
        let e1 = k * (3 * k - 1) / 2;
        if e1 > n_max {
            break;
        }
        let sign = if k % 2 == 1 { -1 } else { 1 };
        terms.push((e1, sign));
        let e2 = k * (3 * k + 1) / 2;
        if e2 <= n_max {
            terms.push((e2, sign));
        }
        k += 1;
    }
    sparse_series(q, &terms)
}

/// Representation numbers `r(n) = #{(x,y) : ax² + bxy + cy² = n}` for `n ≤ n_max`.
fn representation_counts(a: i64, b: i64, c: i64, n_max: u64) -> Vec<i64> {
    let d = (b * b - 4 * a * c) as f64;
    let n_max_i = n_max as i64;
    let mut counts = vec![0i64; n_max as usize + 1];
    // |y| ≤ sqrt(4aN/|D|)
    let y_max = ((4.0 * a as f64 * n_max as f64) / -d).sqrt().floor() as i64 + 1;
    for y in -y_max..=y_max {
        // a x² + b y x + (c y² - N) ≤ 0
        let disc = (b * y) as f64 * (b * y) as f64 - 4.0 * a as f64 * ((c * y * y) as f64 - n_max as f64);
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let lo = ((-(b * y) as f64 - s) / (2.0 * a as f64)).floor() as i64 - 1;
        let hi = ((-(b * y) as f64 + s) / (2.0 * a as f64)).ceil() as i64 + 1;
        for x in lo..=hi {
            let v = a * x * x + b * x * y + c * y * y;
            if (0..=n_max_i).contains(&v) {
                counts[v as usize] += 1;
            }
        }
    }
    counts
}

fn theta_raw(a: i64, b: i64, c: i64, tau: &HighComplex, target_bits: u32) -> HighComplex {
    let q = tau.q_power(1, 1);
    let decay = q_decay_bits(tau, 1.0);
    // representation numbers grow at most linearly; a few bits cover them
    let n_max = terms_needed(decay, target_bits + 16);
    dense_series(&q, &representation_counts(a, b, c, n_max))
}

/// `Σ_{m+n odd} (-1)^m Q^{m² + mn + 5n²}` with `Q = exp(πiτ)`.
fn theta_star_raw(tau: &HighComplex, target_bits: u32) -> HighComplex {
    let big_q = tau.q_power(1, 2);
    let decay = q_decay_bits(tau, 0.5);
    let k_max = terms_needed(decay, target_bits + 16) as i64;
    let mut coeffs = vec![0i64; k_max as usize + 1];
    let n_bound = ((4.0 * k_max as f64) / 19.0).sqrt() as i64 + 1;
    for n in -n_bound..=n_bound {
        let disc = (n * n) as f64 - 4.0 * ((5 * n * n) as f64 - k_max as f64);
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let lo = ((-n as f64 - s) / 2.0).floor() as i64 - 1;
        let hi = ((-n as f64 + s) / 2.0).ceil() as i64 + 1;
        for m in lo..=hi {
            if (m + n).rem_euclid(2) != 1 {
                continue;
            }
            let k = m * m + m * n + 5 * n * n;
            if k <= k_max {
                coeffs[k as usize] += if m.rem_euclid(2) == 0 { 1 } else { -1 };
            }
        }
    }
    dense_series(&big_q, &coeffs)
}

/// Dedekind eta `q^{1/24} ∏(1 - qⁿ)`.
pub fn eta(tau: &HighComplex, bits: u32) -> Result<HighComplex, HauptmodulError> {
    check_series_domain(tau)?;
    let prec = working_prec(bits);
    let tau = tau.with_prec(prec);
    let q = tau.q_power(1, 1);
    let e = euler_product(&q, q_decay_bits(&tau, 1.0), bits + GUARD_BITS);
    Ok(&tau.q_power(1, 24) * &e)
}

/// The theta series `Σ q^{ax² + bxy + cy²}` of a positive definite form.
pub fn theta(a: i64, b: i64, c: i64, tau: &HighComplex, bits: u32) -> Result<HighComplex, HauptmodulError> {
    if a <= 0 || b * b - 4 * a * c >= 0 {
        return Err(HauptmodulError::Indefinite(a, b, c));
    }
    check_series_domain(tau)?;
    let tau = tau.with_prec(working_prec(bits));
    Ok(theta_raw(a, b, c, &tau, bits + GUARD_BITS))
}

/// The signed half-integral theta series attached to `x² + xy + 5y²`.
pub fn theta_star(tau: &HighComplex, bits: u32) -> Result<HighComplex, HauptmodulError> {
    check_series_domain(tau)?;
    let tau = tau.with_prec(working_prec(bits));
    Ok(theta_star_raw(&tau, bits + GUARD_BITS))
}

/// An integer Möbius transformation `τ ↦ (aτ + b)/(cτ + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mobius {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mobius {
    const IDENTITY: Mobius = Mobius { a: 1, b: 0, c: 0, d: 1 };

    fn then(self, next: Mobius) -> Mobius {
        Mobius {
            a: next.a * self.a + next.b * self.c,
            b: next.a * self.b + next.b * self.d,
            c: next.c * self.a + next.d * self.c,
            d: next.c * self.b + next.d * self.d,
        }
    }

    fn apply_f64(&self, z: (f64, f64)) -> (f64, f64) {
        let (x, y) = z;
        let (nr, ni) = (self.a as f64 * x + self.b as f64, self.a as f64 * y);
        let (dr, di) = (self.c as f64 * x + self.d as f64, self.c as f64 * y);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    pub fn apply(&self, tau: &HighComplex) -> HighComplex {
        tau.mobius(self.a, self.b, self.c, self.d)
    }
}

/// How far a fundamental-domain reduction may go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    /// `SL₂(Z)`.
    Full,
    /// `Γ₀(p)`, optionally extended by the Fricke involution.
    Level { p: i64, fricke: bool },
}

/// Moves `τ` towards the top of a fundamental domain. Returns the composed
/// transformation and the number of Fricke involutions used.
fn reduce_point(tau: (f64, f64), group: Group) -> (Mobius, u32) {
    let mut total = Mobius::IDENTITY;
    let mut z = tau;
    let mut frickes = 0u32;
    let level = match group {
        Group::Full => 1,
        Group::Level { p, .. } => p,
    };
    for _ in 0..10_000 {
        let k = (z.0 + 0.5).floor() as i64;
        if k != 0 {
            let t = Mobius { a: 1, b: -k, c: 0, d: 1 };
            total = total.then(t);
            z = t.apply_f64(z);
        }
        let (x, y) = z;
        let mut best: Option<(f64, Mobius, bool)> = None;
        let mut consider = |shrink: f64, m: Mobius, is_fricke: bool| {
            if shrink < 1.0 - 1e-12 && best.map_or(true, |(s, _, _)| shrink < s) {
                best = Some((shrink, m, is_fricke));
            }
        };
        match group {
            Group::Full => {
                consider(x * x + y * y, Mobius { a: 0, b: -1, c: 1, d: 0 }, false);
            }
            Group::Level { p, fricke } => {
                if fricke {
                    let pf = p as f64;
                    consider(pf * (x * x + y * y), Mobius { a: 0, b: -1, c: p, d: 0 }, true);
                }
                for cc in 1..=4i64 {
                    let lower = level * cc;
                    let centre = (-(lower as f64) * x).round() as i64;
                    for d in centre - 2..=centre + 2 {
                        let (g, s, t) = xgcd(d, lower);
                        if g != 1 {
                            continue;
                        }
                        // a d - b·lower = 1 with a = s, b = -t
                        let m = Mobius { a: s, b: -t, c: lower, d };
                        let lf = lower as f64;
                        let shrink = (lf * x + d as f64).powi(2) + (lf * y).powi(2);
                        consider(shrink, m, false);
                    }
                }
            }
        }
        match best {
            Some((_, m, is_fricke)) => {
                total = total.then(m);
                z = m.apply_f64(z);
                if is_fricke {
                    frickes += 1;
                }
            }
            None => break,
        }
    }
    (total, frickes)
}

fn reduced(tau: &HighComplex, group: Group) -> (HighComplex, u32) {
    let (m, frickes) = reduce_point(tau.to_f64(), group);
    (m.apply(tau), frickes)
}

/// `p^{12/(p-1)}`, the Fricke constant of the eta quotient.
pub fn fricke_constant(p: u64) -> Result<i64, HauptmodulError> {
    match p {
        3 => Ok(729),
        5 => Ok(125),
        7 => Ok(49),
        13 => Ok(13),
        _ => Err(HauptmodulError::UnsupportedLevel(p)),
    }
}

fn eta_quotient_raw(tau: &HighComplex, p: u64, target_bits: u32) -> HighComplex {
    let exponent = 24 / (p as i64 - 1);
    let q = tau.q_power(1, 1);
    let qp = tau.q_power(p as i64, 1);
    let decay = q_decay_bits(tau, 1.0);
    let num = euler_product(&q, decay, target_bits);
    let den = euler_product(&qp, decay * p as f64, target_bits);
    &(&num / &den).powi(exponent) / &q
}

/// The eta quotient `(η(τ)/η(pτ))^{24/(p-1)}` for `p ∈ {3, 5, 7, 13}`.
pub fn j_p0(tau: &HighComplex, p: u64, bits: u32) -> Result<HighComplex, HauptmodulError> {
    fricke_constant(p)?;
    check_upper(tau)?;
    let prec = working_prec(bits);
    let (z, frickes) = reduced(&tau.with_prec(prec), Group::Level { p: p as i64, fricke: true });
    let v = eta_quotient_raw(&z, p, bits + GUARD_BITS);
    if frickes % 2 == 1 {
        Ok(w_p(&v, p)?)
    } else {
        Ok(v)
    }
}

/// The Fricke involution on the eta-quotient coordinate: `x ↦ p^{12/(p-1)}/x`.
pub fn w_p(value: &HighComplex, p: u64) -> Result<HighComplex, HauptmodulError> {
    let w = fricke_constant(p)?;
    Ok(value.recip().scale_int(w))
}

fn j_p_raw(z: &HighComplex, p: u64, target_bits: u32) -> Result<HighComplex, HauptmodulError> {
    let decay = q_decay_bits(z, 1.0);
    match p {
        3 | 5 | 7 | 13 => {
            let j0 = eta_quotient_raw(z, p, target_bits);
            Ok(&j0 + &w_p(&j0, p)?)
        }
        11 => {
            let q = z.q_power(1, 1);
            let th = theta_raw(1, 1, 3, z, target_bits);
            let e1 = euler_product(&q, decay, target_bits);
            let e11 = euler_product(&z.q_power(11, 1), decay * 11.0, target_bits);
            let den = &q * &(&e1 * &e11).square();
            Ok(&th.square() / &den)
        }
        19 => {
            let th = theta_raw(1, 1, 5, z, target_bits);
            let ts = theta_star_raw(z, target_bits);
            // θ* = -2q^{1/2} + ..., so the square of the quotient starts at q⁻¹/4
            Ok((&th / &ts).square().scale_int(4))
        }
        23 => {
            let q = z.q_power(1, 1);
            let th = theta_raw(1, 1, 6, z, target_bits);
            let e1 = euler_product(&q, decay, target_bits);
            let e23 = euler_product(&z.q_power(23, 1), decay * 23.0, target_bits);
            Ok(&th / &(&q * &(&e1 * &e23)))
        }
        _ => Err(HauptmodulError::UnsupportedLevel(p)),
    }
}

/// The Hauptmodul `j_p` of `X₀*(p)`, invariant under `Γ₀(p)` and `τ ↦ -1/(pτ)`.
///
/// Every `j_p` here is normalized as `q⁻¹ + O(1)` with integer coefficients,
/// so CM values are algebraic integers; for `p = 19` that means
/// `4(θ_{1,1,5}/θ*)²`.
///
/// For `p = 23` this is `θ_{1,1,6}/(η(τ)η(23τ))`, a Hauptmodul of `X₀*(23)`
/// normalized as `q⁻¹ + O(1)`, used only for square detection mod 23.
pub fn j_p(tau: &HighComplex, p: u64, bits: u32) -> Result<HighComplex, HauptmodulError> {
    if !has_hauptmodul(p) {
        return Err(HauptmodulError::UnsupportedLevel(p));
    }
    check_upper(tau)?;
    let prec = working_prec(bits);
    let (z, _) = reduced(&tau.with_prec(prec), Group::Level { p: p as i64, fricke: true });
    j_p_raw(&z, p, bits + GUARD_BITS)
}

/// The kernel of a `p`-isogeny from `C/⟨1, τ⟩`: `⟨1/p⟩` or `⟨(τ + k)/p⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    OneOverP,
    TauPlus(i64),
}

/// A point `z` such that `(C/⟨1, τ⟩, kernel)` is isomorphic to
/// `(C/⟨1, z⟩, ⟨1/p⟩)`.
pub fn torsion_to_tau(tau: &HighComplex, kernel: Kernel) -> HighComplex {
    match kernel {
        Kernel::OneOverP => tau.clone(),
        // rescale ⟨1, τ⟩ = ⟨τ + k, -1⟩ by 1/(τ + k)
        Kernel::TauPlus(k) => tau.clone().add_int(k).recip().scale_int(-1),
    }
}

/// The classical `j`-invariant `E₄³/Δ`.
pub fn classical_j(tau: &HighComplex, bits: u32) -> Result<HighComplex, HauptmodulError> {
    check_upper(tau)?;
    let prec = working_prec(bits);
    let (z, _) = reduced(&tau.with_prec(prec), Group::Full);
    let target = bits + GUARD_BITS;
    let q = z.q_power(1, 1);
    let decay = q_decay_bits(&z, 1.0);
    let n_max = terms_needed(decay, target + 40);
    let mut coeffs = vec![0i64; n_max as usize + 1];
    coeffs[0] = 1;
    for n in 1..=n_max as usize {
        let mut sigma3 = 0i64;
        for dvs in 1..=n {
            if n % dvs == 0 {
                sigma3 += (dvs as i64).pow(3);
            }
        }
        coeffs[n] = 240 * sigma3;
    }
    let e4 = dense_series(&q, &coeffs);
    let delta = &q * &euler_product(&q, decay, target).powi(24);
    Ok(&(&e4.square() * &e4) / &delta)
}

/// `1728 + (x² - 486x - 19683)²/x³`, the classical `j` expressed through
/// the level-3 eta quotient `x = j_{3,0}`.
pub fn classical_j_from_j30(x: &HighComplex) -> HighComplex {
    let poly = (&x.square() - &x.scale_int(486)).add_int(-19683);
    (&poly.square() / &x.powi(3)).add_int(1728)
}

/// The arc `S = {τ : |τ| = 1/√p, -d/c < Re τ < 0}` for `p ≡ 3 mod 4`, with
/// `c + d√p` the fundamental unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub p: u64,
    pub unit: (i64, i64),
}

impl Arc {
    pub fn new(p: u64) -> Result<Self, HauptmodulError> {
        let unit = crate::quadforms::fundamental_unit(p)
            .map_err(|_| HauptmodulError::UnsupportedLevel(p))?;
        Ok(Self { p, unit })
    }

    /// CM forms whose roots are the two endpoints: `i/√p` (left of the
    /// list is the `Re τ = 0` end) and the point with `Re τ = -d/c`.
    pub fn endpoint_forms(&self) -> [QuadForm; 2] {
        let p = self.p as i64;
        let (c, d) = self.unit;
        [QuadForm::new(p, 0, 1), QuadForm::new(p * c / 2, p * d, c / 2)]
    }

    /// The point of the arc with real part `-t·d/c`, `t ∈ [0, 1]`.
    pub fn point(&self, t: f64, bits: u32) -> HighComplex {
        let prec = working_prec(bits);
        let (c, d) = self.unit;
        let re = Float::with_val(prec, -t) * d / c;
        let r2 = Float::with_val(prec, 1) / self.p;
        let im = (r2 - Float::with_val(prec, re.square_ref())).sqrt();
        HighComplex::new(re, im)
    }

    /// `(j_p(i/√p), j_p(endpoint at Re τ = -d/c))`.
    pub fn endpoint_values(&self, bits: u32) -> Result<(Float, Float), HauptmodulError> {
        let [f0, f1] = self.endpoint_forms();
        let v0 = j_p(&CMPoint::from_form(&f0, bits)?.tau, self.p, bits)?;
        let v1 = j_p(&CMPoint::from_form(&f1, bits)?.tau, self.p, bits)?;
        Ok((v0.re, v1.re))
    }
}

/// `π` at the given precision.
pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    fn point(re: f64, im: f64, bits: u32) -> HighComplex {
        HighComplex::from_f64(working_prec(bits), re, im)
    }

    fn close(a: &HighComplex, b: &HighComplex, tol: f64) -> bool {
        a.dist(b) < tol
    }

    #[test]
    fn eta_at_i() {
        let v = eta(&point(0.0, 1.0, 256), 256).unwrap();
        // Γ(1/4) / (2 π^{3/4})
        let prec = 300;
        let gamma = Float::with_val(prec, 0.25).gamma();
        let expected = gamma / (Float::with_val(prec, 2) * Float::with_val(prec, pi(prec).pow(0.75f64)));
        assert!((v.re.clone() - expected).abs().to_f64() < 1e-70);
        assert!(v.im.to_f64().abs() < 1e-70);
        assert!((v.re.to_f64() - 0.768_225_422_326_056_6).abs() < 1e-15);
    }

    #[test]
    fn eta_translation() {
        let bits = 160;
        let tau = point(0.1, 0.8, bits);
        let lhs = eta(&tau.clone().add_int(1), bits).unwrap();
        let rhs = &HighComplex::new(Float::with_val(260, 0), pi(260) / 12u32).exp() * &eta(&tau, bits).unwrap();
        assert!(close(&lhs, &rhs, 1e-45));
    }

    #[test]
    fn eta_precision_doubling() {
        let tau = point(0.0, 2.0, 512);
        let ratio_lo = {
            let t = tau.with_prec(working_prec(128));
            (&eta(&t, 128).unwrap() / &eta(&point(0.0, 1.0, 128), 128).unwrap()).abs()
        };
        let ratio_hi = (&eta(&tau, 256).unwrap() / &eta(&point(0.0, 1.0, 256), 256).unwrap()).abs();
        let diff = (ratio_lo - ratio_hi).abs().to_f64();
        assert!(diff < 2f64.powi(-120), "{diff}");
    }

    #[test]
    fn series_reject_bad_points() {
        assert!(matches!(eta(&point(0.0, -1.0, 64), 64), Err(HauptmodulError::NotInUpperHalfPlane(_))));
        assert!(matches!(eta(&point(0.0, 0.01, 64), 64), Err(HauptmodulError::TooCloseToRealAxis(_))));
        assert!(matches!(theta(1, 3, 1, &point(0.0, 1.0, 64), 64), Err(HauptmodulError::Indefinite(..))));
        assert!(matches!(j_p(&point(0.0, 1.0, 64), 17, 64), Err(HauptmodulError::UnsupportedLevel(17))));
    }

    fn theta_brute(a: i64, b: i64, c: i64, tau: &HighComplex, r: i64) -> HighComplex {
        let q = tau.q_power(1, 1);
        let mut acc = HighComplex::zero(tau.prec());
        for x in -r..=r {
            for y in -r..=r {
                let n = a * x * x + b * x * y + c * y * y;
                acc = &acc + &q.powi(n);
            }
        }
        acc
    }

    #[test]
    fn theta_against_brute_force() {
        let tau = point(0.0, 1.0, 128);
        let fast = theta(1, 1, 3, &tau, 128).unwrap();
        let slow = theta_brute(1, 1, 3, &tau, 30);
        assert!(close(&fast, &slow, 1e-38));
        // symmetry (x, y) -> (-x, -y): the sum is 1 plus twice a half lattice
        let q = tau.q_power(1, 1);
        let mut half = HighComplex::zero(tau.prec());
        for x in -30i64..=30 {
            for y in 0..=30i64 {
                if y > 0 || x > 0 {
                    half = &half + &q.powi(x * x + x * y + 3 * y * y);
                }
            }
        }
        assert!(close(&fast, &half.scale_int(2).add_int(1), 1e-38));
        // constant term dominates high in the upper half plane
        let high = theta(1, 1, 3, &point(0.0, 12.0, 64), 64).unwrap();
        assert!((high.re.to_f64() - 1.0).abs() < 1e-30);
    }

    #[test]
    fn theta_star_against_brute_force() {
        let bits = 128;
        let tau = point(0.0, 2.0, bits);
        let fast = theta_star(&tau, bits).unwrap();
        let big_q = tau.q_power(1, 2);
        let mut slow = HighComplex::zero(tau.prec());
        for m in -20i64..=20 {
            for n in -20i64..=20 {
                if (m + n).rem_euclid(2) == 1 {
                    let term = big_q.powi(m * m + m * n + 5 * n * n);
                    slow = &slow + &term.scale_int(if m % 2 == 0 { 1 } else { -1 });
                }
            }
        }
        assert!(close(&fast, &slow, 1e-38));
    }

    #[test]
    fn j19_real_on_imaginary_axis() {
        for t in [0.5, 1.0, 2.0] {
            let v = j_p(&point(0.0, t, 128), 19, 128).unwrap();
            assert!(v.im.to_f64().abs() < 2f64.powi(-112), "t={t}: {v}");
        }
    }

    #[test]
    fn fricke_identity_for_eta_quotients() {
        let bits = 128;
        let tau = point(0.13, 0.7, bits);
        for (p, w) in [(3u64, 729i64), (5, 125), (7, 49), (13, 13)] {
            let j0 = j_p0(&tau, p, bits).unwrap();
            let prod = &j0 * &w_p(&j0, p).unwrap();
            assert!(close(&prod, &HighComplex::from_int(64, w), 1e-30));
            // w_p really is τ -> -1/(pτ)
            let image = tau.mobius(0, -1, p as i64, 0);
            let j0w = j_p0(&image, p, bits).unwrap();
            assert!(close(&j0w, &w_p(&j0, p).unwrap(), 1e-25 * j0w.abs().to_f64().max(1.0)));
        }
    }

    #[test]
    fn j50_at_i() {
        let v = j_p0(&point(0.0, 1.0, 256), 5, 256).unwrap();
        let expected = 125.0 * (2.0 + 5f64.sqrt());
        assert!((v.re.to_f64() - expected).abs() < 1e-9);
        assert!((v.re.to_f64() - 529.508_497_2).abs() < 1e-6);
    }

    #[test]
    fn j5_table_at_gaussian_point() {
        let bits = 256;
        let i = point(0.0, 1.0, bits);
        let s5 = Float::with_val(400, 5).sqrt();
        let plus = Float::with_val(400, 248) + Float::with_val(400, &s5 * 126u32);
        let minus = Float::with_val(400, 248) - Float::with_val(400, &s5 * 126u32);
        let check = |kernel: Kernel, expected: &Float| {
            let z = torsion_to_tau(&i, kernel);
            let v = j_p(&z, 5, bits).unwrap();
            let err = (v.re.clone() - expected).abs().to_f64();
            assert!(err < 1e-20 && v.im.to_f64().abs() < 1e-20, "{kernel:?}: {v}");
        };
        check(Kernel::OneOverP, &plus);
        check(Kernel::TauPlus(0), &plus);
        check(Kernel::TauPlus(1), &minus);
        check(Kernel::TauPlus(4), &minus);
        check(Kernel::TauPlus(2), &Float::with_val(64, -22));
        check(Kernel::TauPlus(3), &Float::with_val(64, -22));
        // j_{5,0} at the (i+2)/5 kernel is -11 ± 2i
        let z = torsion_to_tau(&i, Kernel::TauPlus(2));
        let v = j_p0(&z, 5, bits).unwrap();
        assert!((v.re.to_f64() + 11.0).abs() < 1e-20 && (v.im.to_f64().abs() - 2.0).abs() < 1e-20);
    }

    #[test]
    fn j13_at_gaussian_kernel() {
        let bits = 256;
        let i = point(0.0, 1.0, bits);
        // (2 + 3i)/13 generates the same subgroup as (i + 5)/13
        let z = torsion_to_tau(&i, Kernel::TauPlus(5));
        let v = j_p(&z, 13, bits).unwrap();
        assert!((v.re.to_f64() + 6.0).abs() < 1e-20 && v.im.to_f64().abs() < 1e-20, "{v}");
        let v0 = j_p0(&z, 13, bits).unwrap();
        assert!((v0.re.to_f64() + 3.0).abs() < 1e-20 && (v0.im.to_f64().abs() - 2.0).abs() < 1e-20);
    }

    #[test]
    fn j11_at_heegner_points_of_minus_220() {
        let bits = 128;
        let disc: f64 = 77.0 * 77.0 - 4.0 * 121.0;
        let roots = [(77.0 - disc.sqrt()) / 2.0, (77.0 + disc.sqrt()) / 2.0];
        for form in [QuadForm::new(11, 0, 5), QuadForm::new(77, 44, 7)] {
            let tau = CMPoint::from_form(&form, bits).unwrap().tau;
            let v = j_p(&tau, 11, bits).unwrap();
            let (re, im) = v.to_f64();
            assert!(im.abs() < 1e-30);
            assert!(roots.iter().any(|r| (r - re).abs() < 1e-9), "{re}");
        }
    }

    #[test]
    fn atkin_lehner_invariance() {
        let bits = 128;
        let pts = [(0.11, 0.9), (-0.3, 0.45), (0.27, 1.3), (0.02, 0.3), (-0.41, 0.61)];
        for p in [3u64, 5, 7, 11, 13, 19, 23] {
            for &(x, y) in &pts {
                let tau = point(x, y, bits);
                let v = j_p(&tau, p, bits).unwrap();
                let w = j_p(&tau.mobius(0, -1, p as i64, 0), p, bits).unwrap();
                let scale = v.abs().to_f64().max(1.0);
                assert!(v.dist(&w) / scale < 2f64.powi(-(bits as i32) + 16), "p={p} τ=({x},{y})");
            }
        }
    }

    #[test]
    fn classical_j_special_values() {
        let bits = 128;
        let j_i = classical_j(&point(0.0, 1.0, bits), bits).unwrap();
        assert!(close(&j_i, &HighComplex::from_int(64, 1728), 1e-25));
        let rho = HighComplex::new(Float::with_val(200, 0.5), Float::with_val(200, 3).sqrt() / 2u32);
        let j_rho = classical_j(&rho, bits).unwrap();
        assert!(j_rho.abs().to_f64() < 1e-25);
    }

    #[test]
    fn classical_j_through_level_three() {
        let bits = 160;
        for &(x, y) in &[(0.1, 0.8), (-0.35, 1.1), (0.45, 0.6), (0.0, 0.4), (0.2, 2.0)] {
            let tau = point(x, y, bits);
            let direct = classical_j(&tau, bits).unwrap();
            let via = classical_j_from_j30(&j_p0(&tau, 3, bits).unwrap());
            let scale = direct.abs().to_f64().max(1.0);
            assert!(direct.dist(&via) / scale < 2f64.powi(-(bits as i32) + 24));
        }
    }

    #[test]
    fn reality_on_arcs() {
        let bits = 128;
        for p in [3u64, 5, 7, 11, 13, 19] {
            for t in [0.3, 0.7, 1.5] {
                for re in [0.0, -0.5] {
                    let v = j_p(&point(re, t, bits), p, bits).unwrap();
                    let scale = v.abs().to_f64().max(1.0);
                    assert!(v.im.to_f64().abs() / scale < 2f64.powi(-100), "p={p} {re}+{t}i");
                }
            }
        }
        for p in [3u64, 7, 11, 19] {
            let arc = Arc::new(p).unwrap();
            for k in 1..10 {
                let v = j_p(&arc.point(k as f64 / 10.0, bits), p, bits).unwrap();
                let scale = v.abs().to_f64().max(1.0);
                assert!(v.im.to_f64().abs() / scale < 2f64.powi(-100), "p={p} k={k}");
            }
        }
    }

    #[test]
    fn arc_endpoints_are_on_the_circle() {
        for p in [3u64, 7, 11, 19] {
            let arc = Arc::new(p).unwrap();
            for (f, t) in arc.endpoint_forms().iter().zip([0.0, 1.0]) {
                let cm = CMPoint::from_form(f, 64).unwrap();
                assert!(cm.tau.dist(&arc.point(t, 64)) < 1e-15);
            }
        }
    }

    #[test]
    fn precision_doubling_is_stable() {
        let tau_hi = point(0.21, 0.37, 512);
        for p in [5u64, 11, 19] {
            let lo = j_p(&tau_hi, p, 128).unwrap();
            let hi = j_p(&tau_hi, p, 256).unwrap();
            let scale = hi.abs().to_f64().max(1.0);
            assert!(lo.dist(&hi) / scale < 2f64.powi(-120));
        }
    }
}
