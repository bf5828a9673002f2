//! Polynomials over prime fields and the squareness statements for class
//! polynomials reduced modulo `ℓ` and modulo `p`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rug::Integer;
use thiserror::Error;

use crate::classpoly::{build_pd, ClassPolyError, ClassPolynomial, DiscSpec};
use crate::exactarith::{is_prime_u64, kronecker_i64};
use crate::quadforms::{class_number, Discriminant, Shape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModPolyError {
    #[error("{0} is not an odd prime")]
    BadModulus(u64),
    #[error("discriminant {0} is not odd")]
    EvenDiscriminant(i64),
    #[error("no Brandt matrix table for p = {0}")]
    NoBrandtTable(u64),
    #[error("X - {root} does not divide the polynomial mod {q}")]
    NotDivisible { root: u64, q: u64 },
    #[error("reduction mod {0} does not have the expected supersingular roots")]
    UnexpectedRoots(u64),
    #[error(transparent)]
    ClassPoly(#[from] ClassPolyError),
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, q: u64) -> u64 {
    let mut r = 1 % q;
    a %= q;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, q);
        }
        a = mul_mod(a, a, q);
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, q: u64) -> u64 {
    pow_mod(a, q - 2, q)
}

/// `n mod q` in `[0, q)`.
pub fn residue(n: i64, q: u64) -> u64 {
    n.rem_euclid(q as i64) as u64
}

/// A polynomial over `F_q`, ascending coefficients, no leading zeros.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FPoly {
    q: u64,
    c: Vec<u64>,
}

impl fmt::Debug for FPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self, self.q)
    }
}

impl fmt::Display for FPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.c.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (k, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => write!(f, "X")?,
                (1, c) => write!(f, "{c}X")?,
                (k, 1) => write!(f, "X^{k}")?,
                (k, c) => write!(f, "{c}X^{k}")?,
            }
        }
        Ok(())
    }
}

impl FPoly {
    /// Reduces the coefficients mod `q`.
    pub fn new(q: u64, coeffs: &[i64]) -> Self {
        let c = coeffs.iter().map(|&x| residue(x, q)).collect();
        Self::from_raw(q, c)
    }

    fn from_raw(q: u64, mut c: Vec<u64>) -> Self {
        while c.last() == Some(&0) {
            c.pop();
        }
        Self { q, c }
    }

    pub fn from_integers(q: u64, coeffs: &[Integer]) -> Self {
        let qs = u32::try_from(q).expect("modulus fits in 32 bits");
        let c = coeffs.iter().map(|x| u64::from(x.mod_u(qs))).collect();
        Self::from_raw(q, c)
    }

    pub fn zero(q: u64) -> Self {
        Self { q, c: Vec::new() }
    }

    pub fn one(q: u64) -> Self {
        Self::constant(q, 1)
    }

    pub fn constant(q: u64, a: u64) -> Self {
        Self::from_raw(q, vec![a % q])
    }

    pub fn x(q: u64) -> Self {
        Self::from_raw(q, vec![0, 1])
    }

    /// `X - r`.
    pub fn linear(q: u64, r: u64) -> Self {
        Self::from_raw(q, vec![(q - r % q) % q, 1])
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn lead(&self) -> u64 {
        self.c.last().copied().unwrap_or(0)
    }

    pub fn is_one(&self) -> bool {
        self.c == [1]
    }

    pub fn is_monic(&self) -> bool {
        self.lead() == 1
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let inv = inv_mod(self.lead(), self.q);
        self.scale(inv)
    }

    pub fn scale(&self, a: u64) -> Self {
        Self::from_raw(self.q, self.c.iter().map(|&x| mul_mod(x, a, self.q)).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.c.len().max(o.c.len());
        let c = (0..n)
            .map(|k| {
                let a = self.c.get(k).copied().unwrap_or(0);
                let b = o.c.get(k).copied().unwrap_or(0);
                (a + b) % self.q
            })
            .collect();
        Self::from_raw(self.q, c)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(self.q - 1))
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero(self.q);
        }
        let q = self.q;
        let mut acc = vec![0u128; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in o.c.iter().enumerate() {
                acc[i + j] = (acc[i + j] + a as u128 * b as u128) % q as u128;
            }
        }
        Self::from_raw(q, acc.into_iter().map(|x| x as u64).collect())
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.q);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let q = self.q;
        if self.c.len() < d.c.len() {
            return (Self::zero(q), self.clone());
        }
        let inv = inv_mod(d.lead(), q);
        let mut r = self.c.clone();
        let dd = d.c.len() - 1;
        let mut quot = vec![0u64; r.len() - dd];
        for k in (0..quot.len()).rev() {
            let t = mul_mod(r[k + dd], inv, q);
            quot[k] = t;
            if t != 0 {
                for (j, &b) in d.c.iter().enumerate() {
                    r[k + j] = (r[k + j] + q - mul_mod(t, b, q)) % q;
                }
            }
        }
        r.truncate(dd);
        (Self::from_raw(q, quot), Self::from_raw(q, r))
    }

    pub fn rem(&self, d: &Self) -> Self {
        self.div_rem(d).1
    }

    /// Exact quotient, or `None` if `d` does not divide.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let (quot, r) = self.div_rem(d);
        r.is_zero().then_some(quot)
    }

    /// Monic gcd.
    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> Self {
        let q = self.q;
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| mul_mod(a, k as u64 % q, q))
            .collect();
        Self::from_raw(q, c)
    }

    pub fn eval(&self, x: u64) -> u64 {
        self.c.iter().rev().fold(0, |acc, &a| (mul_mod(acc, x, self.q) + a) % self.q)
    }

    /// Roots in `F_q` by exhaustive search.
    pub fn roots(&self) -> Vec<u64> {
        (0..self.q).filter(|&x| self.eval(x) == 0).collect()
    }

    /// `g` with `g(X)^q = self`, assuming only exponents divisible by `q`
    /// occur. Over a prime field the Frobenius fixes coefficients.
    fn pth_root(&self) -> Self {
        let q = self.q as usize;
        let c = self.c.iter().step_by(q).copied().collect();
        Self::from_raw(self.q, c)
    }

    /// Multiplicity of the root `r`.
    pub fn multiplicity(&self, r: u64) -> u32 {
        let lin = Self::linear(self.q, r);
        let mut f = self.clone();
        let mut m = 0;
        while !f.is_zero() {
            match f.div_exact(&lin) {
                Some(g) => {
                    f = g;
                    m += 1;
                }
                None => break,
            }
        }
        m
    }
}

/// `f = lc · ∏ gᵢ^{eᵢ}` with the `gᵢ` monic, squarefree, pairwise coprime
/// and the exponents distinct. Sorted by exponent.
pub fn squarefree_decomposition(f: &FPoly) -> Vec<(FPoly, u32)> {
    assert!(!f.is_zero(), "squarefree decomposition of zero");
    let mut acc: BTreeMap<u32, FPoly> = BTreeMap::new();
    sqf_into(&f.monic(), 1, &mut acc);
    acc.into_iter().map(|(e, g)| (g, e)).collect()
}

fn sqf_into(f: &FPoly, mult: u32, acc: &mut BTreeMap<u32, FPoly>) {
    if f.degree() == 0 {
        return;
    }
    let q = f.modulus();
    let mut c = f.gcd(&f.derivative());
    let mut w = f.div_exact(&c).expect("gcd divides");
    let mut i = 1u32;
    while w.degree() > 0 {
        let y = w.gcd(&c);
        let z = w.div_exact(&y).expect("gcd divides");
        if z.degree() > 0 {
            let e = i * mult;
            let slot = acc.entry(e).or_insert_with(|| FPoly::one(q));
            *slot = slot.mul(&z);
        }
        i += 1;
        c = c.div_exact(&y).expect("gcd divides");
        w = y;
    }
    if c.degree() > 0 {
        sqf_into(&c.pth_root(), mult * q as u32, acc);
    }
}

/// The monic `g` with `g² = f` for monic `f`, if it exists.
pub fn is_perfect_square(f: &FPoly) -> Option<FPoly> {
    if f.is_zero() || !f.is_monic() {
        return None;
    }
    let mut g = FPoly::one(f.modulus());
    for (h, e) in squarefree_decomposition(f) {
        if e % 2 != 0 {
            return None;
        }
        g = g.mul(&h.pow(e / 2));
    }
    Some(g)
}

/// For `f = (X - r)·R²`, returns `R`. Errors if `X - r` does not divide `f`.
pub fn is_square_times_linear(f: &FPoly, r: i64) -> Result<Option<FPoly>, ModPolyError> {
    let q = f.modulus();
    let root = residue(r, q);
    let g = f
        .div_exact(&FPoly::linear(q, root))
        .ok_or(ModPolyError::NotDivisible { root, q })?;
    Ok(is_perfect_square(&g))
}

/// The residue `r` with `P_D ≡ (X - r)·R² mod ℓ` for `p ≡ 1 mod 4`.
pub fn special_root(p: u64) -> Option<i64> {
    match p {
        5 => Some(-22),
        13 => Some(-6),
        _ => None,
    }
}

fn single_disc(poly: &ClassPolynomial) -> Option<Discriminant> {
    match poly.disc {
        DiscSpec::Single(d) => Discriminant::from_value(d, poly.p).ok(),
        DiscSpec::Product(_) => None,
    }
}

/// The mod-`ℓ` shape statement for a single `P_D`: a perfect square, or for
/// `p ∈ {5, 13}` a square times the special linear factor.
pub fn shape_mod_ell(poly: &ClassPolynomial, ell: u64) -> bool {
    let f = FPoly::from_integers(ell, &poly.coefficients);
    match special_root(poly.p) {
        Some(r) => matches!(is_square_times_linear(&f, r), Ok(Some(_))),
        None => is_perfect_square(&f).is_some(),
    }
}

/// Outcome of reducing a class polynomial mod `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModPSquare {
    pub is_square: bool,
    pub root: Option<FPoly>,
    pub factorization: Vec<(FPoly, u32)>,
}

/// Reduces `P` mod `p` and tests it for being a perfect square.
pub fn mod_p_square_check(poly: &ClassPolynomial) -> ModPSquare {
    let f = FPoly::from_integers(poly.p, &poly.coefficients);
    let root = is_perfect_square(&f);
    ModPSquare {
        is_square: root.is_some(),
        root,
        factorization: squarefree_decomposition(&f),
    }
}

/// `ε ∈ {0, 1, 2}` as 2 is inert, ramified or split in `O_{D'}`.
pub fn epsilon_split(d_prime: i64) -> Result<u8, ModPolyError> {
    if d_prime.rem_euclid(2) == 0 {
        return Err(ModPolyError::EvenDiscriminant(d_prime));
    }
    Ok(match d_prime.rem_euclid(8) {
        1 => 2,
        5 => 0,
        _ => 1,
    })
}

/// `h(-4pℓ) = (3 - ε)·h(-pℓ)`.
pub fn t2_degree_check(p: u64, ell: u64) -> Result<bool, ModPolyError> {
    let d_prime = -((p * ell) as i64);
    if d_prime.rem_euclid(4) != 1 {
        return Err(ModPolyError::EvenDiscriminant(d_prime));
    }
    let eps = epsilon_split(d_prime)? as usize;
    Ok(class_number(4 * d_prime) == (3 - eps) * class_number(d_prime))
}

/// The Brandt matrix of `T₂` on supersingular `j_p`-invariants mod `p`.
/// Row `i` lists the coefficients of `T₂(bᵢ)` in the basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct T2Data {
    pub p: u64,
    /// Residues mod `p`; `None` where no basis ordering is tabulated.
    pub basis: Option<Vec<u64>>,
    pub matrix: Vec<Vec<u32>>,
    pub note: &'static str,
}

impl T2Data {
    pub fn column_sums(&self) -> Vec<u32> {
        let n = self.matrix.len();
        (0..n).map(|j| self.matrix.iter().map(|row| row[j]).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<u32> {
        self.matrix.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn columns_even(&self) -> bool {
        self.column_sums().iter().all(|s| s % 2 == 0)
    }
}

pub fn brandt_table(p: u64) -> Result<T2Data, ModPolyError> {
    match p {
        11 => Ok(T2Data {
            p,
            basis: Some(vec![0, 10]),
            matrix: vec![vec![1, 2], vec![3, 0]],
            note: "T2(0) = (0) + 2(-1), T2(-1) = 3(0)",
        }),
        19 => Ok(T2Data {
            p,
            basis: Some(vec![0, 8]),
            matrix: vec![vec![1, 2], vec![1, 2]],
            note: "basis (0), (8)",
        }),
        23 => Ok(T2Data {
            p,
            basis: None,
            matrix: vec![vec![1, 2, 0], vec![1, 1, 1], vec![0, 3, 0]],
            note: "column sums not all even; squareness mod 23 is not guaranteed",
        }),
        _ => Err(ModPolyError::NoBrandtTable(p)),
    }
}

/// First admissible `ℓ` used to derive the supersingular invariants.
fn reference_disc(p: u64) -> Option<Discriminant> {
    let shape = if p % 4 == 1 { Shape::MinusPEll } else { Shape::MinusFourPEll };
    let ell = (3..200u64).find(|&l| {
        l != p
            && is_prime_u64(l)
            && kronecker_i64(-(p as i64), l as i64) == 1
            && if p % 4 == 1 { l % 4 == 3 } else { l % 4 == 1 }
    })?;
    Discriminant::new(p, ell, shape).ok()
}

/// Supersingular `j_p`-invariants mod `p` lying in `F_p`.
///
/// For `p ∈ {11, 19}` these are the Brandt bases; for `p ∈ {3, 5, 7, 13}`
/// (a single class each) they are read off a class polynomial reduced mod
/// `p`; for 23 they are the `F_23`-roots of a reduced class polynomial.
pub fn supersingular_set(p: u64) -> Result<Vec<u64>, ModPolyError> {
    static CACHE: OnceLock<std::sync::Mutex<BTreeMap<u64, Vec<u64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache lock").get(&p) {
        return Ok(v.clone());
    }
    let set = match p {
        11 | 19 => brandt_table(p)?.basis.expect("tabulated basis"),
        3 | 5 | 7 | 13 | 23 => {
            let disc = reference_disc(p).ok_or(ModPolyError::UnexpectedRoots(p))?;
            let f = FPoly::from_integers(p, &build_pd(&disc, None)?.coefficients);
            let roots = f.roots();
            if roots.is_empty() || (p != 23 && roots.len() != 1) {
                return Err(ModPolyError::UnexpectedRoots(p));
            }
            roots
        }
        _ => return Err(ModPolyError::NoBrandtTable(p)),
    };
    cache.lock().expect("cache lock").insert(p, set.clone());
    Ok(set)
}

/// Multiplicities of `f` on `basis`; `None` if `f` has other factors.
pub fn basis_exponents(f: &FPoly, basis: &[u64]) -> Option<Vec<u32>> {
    let exps: Vec<u32> = basis.iter().map(|&b| f.multiplicity(b)).collect();
    let total: u32 = exps.iter().sum();
    (total as usize == f.degree()).then_some(exps)
}

/// The `T₂` relation between `P_{D'}` and `P_D` mod `p` for `D' = -pℓ`,
/// `D = 4D'` and `p ∈ {3, 7, 11, 19}`: if `P_{D'} ≡ ∏(X - bᵢ)^{mᵢ}` then
/// `P_D ≡ ∏(X - bⱼ)^{Σᵢ mᵢ Bᵢⱼ - ε mⱼ}`.
pub fn t2_relation_check(small: &ClassPolynomial, large: &ClassPolynomial) -> Result<bool, ModPolyError> {
    let p = small.p;
    let (basis, matrix) = match p {
        11 | 19 => {
            let t = brandt_table(p)?;
            (t.basis.expect("tabulated basis"), t.matrix)
        }
        3 | 7 => (supersingular_set(p)?, vec![vec![3]]),
        _ => return Err(ModPolyError::NoBrandtTable(p)),
    };
    let d_small = single_disc(small).ok_or(ModPolyError::NoBrandtTable(p))?;
    let eps = epsilon_split(d_small.value())? as u32;
    let fs = FPoly::from_integers(p, &small.coefficients);
    let fl = FPoly::from_integers(p, &large.coefficients);
    let m = basis_exponents(&fs, &basis).ok_or(ModPolyError::UnexpectedRoots(p))?;
    let n = match basis_exponents(&fl, &basis) {
        Some(n) => n,
        None => return Ok(false),
    };
    let expected: Vec<i64> = (0..basis.len())
        .map(|j| {
            let t: u32 = (0..basis.len()).map(|i| m[i] * matrix[i][j]).sum();
            t as i64 - (eps * m[j]) as i64
        })
        .collect();
    Ok(expected.iter().zip(&n).all(|(&e, &got)| e == got as i64))
}
