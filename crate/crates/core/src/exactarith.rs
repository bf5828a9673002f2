//! Exact integer and rational arithmetic: Kronecker symbols, primality and
//! factorization.
//!
//! `Integer` and `Rational` are re-exported from `rug`; rationals are kept in
//! lowest terms with a positive denominator after every operation.

use std::sync::OnceLock;

use rug::integer::IsPrime;
use rug::ops::{Pow, RemRounding};
pub use rug::{Integer, Rational};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("cannot factor zero")]
    FactorZero,
}

/// Largest bound for which the trial-division prime table is built.
pub const DEFAULT_TRIAL_BOUND: u32 = 1_000_000;

/// Pollard-rho iterations spent on one composite cofactor before giving up.
pub const DEFAULT_RHO_ITERATIONS: u64 = 1 << 24;

fn prime_table() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| sieve(DEFAULT_TRIAL_BOUND))
}

/// All primes `<= bound` by the sieve of Eratosthenes.
pub fn sieve(bound: u32) -> Vec<u32> {
    let n = bound as usize;
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u32);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

/// Primes up to `bound`, served from the cached table when possible.
pub fn primes_up_to(bound: u32) -> Vec<u32> {
    if bound <= DEFAULT_TRIAL_BOUND {
        let table = prime_table();
        let end = table.partition_point(|&p| p <= bound);
        table[..end].to_vec()
    } else {
        sieve(bound)
    }
}

/// Kronecker symbol `(a|n)`; returns -1, 0 or 1.
pub fn kronecker(a: &Integer, n: &Integer) -> i32 {
    if *n == 0 {
        return if a.clone().abs() == 1 { 1 } else { 0 };
    }
    if a.is_even() && n.is_even() {
        return 0;
    }
    let mut n = n.clone();
    let mut k = 1i32;
    let v = n.find_one(0).unwrap_or(0);
    n >>= v;
    if v % 2 == 1 {
        k *= two_table(a);
    }
    if n < 0 {
        n = -n;
        if *a < 0 {
            k = -k;
        }
    }
    // n is odd and positive: plain Jacobi symbol from here on.
    let mut a = a.clone().rem_euc(&n);
    loop {
        if a == 0 {
            return if n == 1 { k } else { 0 };
        }
        let v = a.find_one(0).unwrap_or(0);
        a >>= v;
        if v % 2 == 1 {
            k *= two_table(&n);
        }
        if a.get_bit(1) && n.get_bit(1) {
            k = -k;
        }
        let r = n.rem_euc(&a);
        n = a;
        a = r;
    }
}

/// `(2|m)` for odd `m`, read off `m mod 8`; 0 when `m` is even.
fn two_table(m: &Integer) -> i32 {
    match m.mod_u(8) {
        1 | 7 => 1,
        3 | 5 => -1,
        _ => 0,
    }
}

pub fn kronecker_i64(a: i64, n: i64) -> i32 {
    kronecker(&Integer::from(a), &Integer::from(n))
}

const DETERMINISTIC_BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Primality test. Deterministic below 2^64 (the first twelve prime bases
/// suffice there); above that, 64 strong-probable-prime rounds bound the
/// error by 4^-64.
pub fn is_prime(n: &Integer) -> bool {
    if *n < 2 {
        return false;
    }
    for &p in &prime_table()[..168] {
        if *n == p {
            return true;
        }
        if n.is_divisible_u(p) {
            return false;
        }
    }
    if *n < 1_000_000u64 {
        return true;
    }
    let n_minus_1 = Integer::from(n - 1u32);
    let s = n_minus_1.find_one(0).unwrap_or(0);
    let d = Integer::from(&n_minus_1 >> s);
    let bases: Vec<u32> = if n.significant_bits() <= 64 {
        DETERMINISTIC_BASES.to_vec()
    } else {
        prime_table()[..64].to_vec()
    };
    'witness: for base in bases {
        let mut x = Integer::from(base)
            .pow_mod(&d, n)
            .expect("positive exponent");
        if x == 1 || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x.square_mut();
            x %= n;
            if x == n_minus_1 {
                continue 'witness;
            }
            if x == 1 {
                return false;
            }
        }
        return false;
    }
    true
}

pub fn is_prime_u64(n: u64) -> bool {
    is_prime(&Integer::from(n))
}

/// Effort limits for [`factorize_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorBudget {
    pub trial_bound: u32,
    pub rho_iterations: u64,
}

impl Default for FactorBudget {
    fn default() -> Self {
        Self {
            trial_bound: DEFAULT_TRIAL_BOUND,
            rho_iterations: DEFAULT_RHO_ITERATIONS,
        }
    }
}

/// Signed prime factorization. Cofactors that survived the effort budget are
/// kept separately in `unfactored` and are composite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub sign: i32,
    pub factors: Vec<(Integer, u32)>,
    pub unfactored: Vec<Integer>,
}

impl Factorization {
    pub fn is_complete(&self) -> bool {
        self.unfactored.is_empty()
    }

    pub fn primes(&self) -> impl Iterator<Item = &Integer> {
        self.factors.iter().map(|(p, _)| p)
    }

    pub fn exponent_of(&self, q: &Integer) -> u32 {
        self.factors
            .iter()
            .find(|(p, _)| p == q)
            .map_or(0, |(_, e)| *e)
    }

    /// Multiplies everything back together, including unfactored cofactors.
    pub fn reconstruct(&self) -> Integer {
        let mut acc = Integer::from(self.sign);
        for (p, e) in &self.factors {
            acc *= Integer::from(p.pow(*e));
        }
        for c in &self.unfactored {
            acc *= c;
        }
        acc
    }
}

pub fn factorize(n: &Integer) -> Result<Factorization, ArithError> {
    factorize_with(n, &FactorBudget::default())
}

pub fn factorize_with(n: &Integer, budget: &FactorBudget) -> Result<Factorization, ArithError> {
    if *n == 0 {
        return Err(ArithError::FactorZero);
    }
    let sign = if *n < 0 { -1 } else { 1 };
    let mut rest = n.clone().abs();
    let mut found: Vec<(Integer, u32)> = Vec::new();
    let mut unfactored = Vec::new();

    for &p in primes_up_to(budget.trial_bound).iter() {
        if rest == 1 {
            break;
        }
        if rest < u64::from(p) * u64::from(p) {
            break;
        }
        if rest.is_divisible_u(p) {
            let mut e = 0;
            while rest.is_divisible_u(p) {
                rest.div_exact_u_mut(p);
                e += 1;
            }
            found.push((Integer::from(p), e));
        }
    }

    let mut stack = Vec::new();
    if rest > 1 {
        stack.push(rest);
    }
    while let Some(m) = stack.pop() {
        if is_prime(&m) {
            push_factor(&mut found, m, 1);
            continue;
        }
        if let Some(root) = exact_square_root(&m) {
            stack.push(root.clone());
            stack.push(root);
            continue;
        }
        match pollard_rho(&m, budget.rho_iterations) {
            Some(d) => {
                let other = Integer::from(m.div_exact_ref(&d));
                stack.push(d);
                stack.push(other);
            }
            None => unfactored.push(m),
        }
    }

    found.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Integer, u32)> = Vec::with_capacity(found.len());
    for (p, e) in found {
        match merged.last_mut() {
            Some((q, f)) if *q == p => *f += e,
            _ => merged.push((p, e)),
        }
    }
    unfactored.sort();
    Ok(Factorization {
        sign,
        factors: merged,
        unfactored,
    })
}

fn push_factor(found: &mut Vec<(Integer, u32)>, p: Integer, e: u32) {
    if let Some(slot) = found.iter_mut().find(|(q, _)| *q == p) {
        slot.1 += e;
    } else {
        found.push((p, e));
    }
}

fn exact_square_root(m: &Integer) -> Option<Integer> {
    if m.is_perfect_square() {
        Some(m.clone().sqrt())
    } else {
        None
    }
}

/// Brent's variant of Pollard rho with batched gcds. Returns a proper divisor
/// or `None` once `max_iterations` evaluations have been spent.
fn pollard_rho(n: &Integer, max_iterations: u64) -> Option<Integer> {
    if n.is_even() {
        return Some(Integer::from(2));
    }
    const BATCH: u64 = 128;
    let mut spent = 0u64;
    let mut c = 1u32;
    while spent < max_iterations {
        let step = |x: &Integer| -> Integer {
            let mut y = x.clone().square();
            y += c;
            y % n
        };
        let mut y = Integer::from(2);
        let mut x = y.clone();
        let mut ys = y.clone();
        let mut g = Integer::from(1);
        let mut q = Integer::from(1);
        let mut r = 1u64;
        while g == 1 && spent < max_iterations {
            x.clone_from(&y);
            for _ in 0..r {
                y = step(&y);
            }
            spent += r;
            let mut k = 0u64;
            while k < r && g == 1 {
                ys.clone_from(&y);
                let lim = BATCH.min(r - k);
                for _ in 0..lim {
                    y = step(&y);
                    let diff = Integer::from(&x - &y).abs();
                    q *= diff;
                    q %= n;
                }
                spent += lim;
                g = Integer::from(q.gcd_ref(n));
                k += lim;
            }
            r *= 2;
        }
        if g == *n {
            // Batch overshot; replay one step at a time from the saved point.
            loop {
                ys = step(&ys);
                spent += 1;
                let diff = Integer::from(&x - &ys).abs();
                g = Integer::from(diff.gcd_ref(n));
                if g != 1 {
                    break;
                }
            }
        }
        if g != 1 && g != *n {
            return Some(g);
        }
        c += 1;
    }
    None
}

/// `rug`'s own probabilistic test, exposed for cross-checking.
pub fn probably_prime_gmp(n: &Integer) -> bool {
    n.is_probably_prime(40) != IsPrime::No
}

/// Parses `"n/d"` or `"n"` into a normalized rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((num, den)) => {
            let num = Integer::from_str_radix(num.trim(), 10).ok()?;
            let den = Integer::from_str_radix(den.trim(), 10).ok()?;
            if den == 0 {
                return None;
            }
            Some(Rational::from((num, den)))
        }
        None => Integer::from_str_radix(s, 10).ok().map(Rational::from),
    }
}

pub fn rational_to_string(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(v: i64) -> Integer {
        Integer::from(v)
    }

    fn euler_criterion(a: u64, q: u64) -> i32 {
        let r = Integer::from(a)
            .pow_mod(&Integer::from((q - 1) / 2), &Integer::from(q))
            .unwrap();
        if r == 0 {
            0
        } else if r == 1 {
            1
        } else {
            -1
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(&int(1), &int(55)), 1);
        assert_eq!(kronecker(&int(7), &int(407)), -1);
        assert_eq!(kronecker(&int(151), &int(407)), -1);
        assert_eq!(kronecker(&int(2309), &int(55)), -1);
        assert_eq!(kronecker(&int(2309), &int(407)), 1);
    }

    #[test]
    fn kronecker_matches_euler_for_small_primes() {
        for q in primes_up_to(1000).into_iter().skip(1) {
            let q = u64::from(q);
            for a in 1..q {
                assert_eq!(
                    kronecker(&Integer::from(a), &Integer::from(q)),
                    euler_criterion(a, q),
                    "({a}|{q})"
                );
            }
        }
    }

    #[test]
    fn kronecker_even_and_negative_arguments() {
        assert_eq!(kronecker(&int(2), &int(8)), 0);
        assert_eq!(kronecker(&int(-1), &int(-1)), -1);
        assert_eq!(kronecker(&int(3), &int(-7)), kronecker(&int(3), &int(7)));
        assert_eq!(kronecker(&int(5), &int(0)), 0);
        assert_eq!(kronecker(&int(-1), &int(0)), 1);
        assert_eq!(kronecker(&int(-55), &int(2)), 1);
        assert_eq!(kronecker(&int(-35), &int(2)), -1);
    }

    #[test]
    fn primality_examples() {
        assert!(is_prime(&int(2309)));
        assert!(!is_prime(&int(1)));
        assert!(!is_prime(&int(0)));
        assert!(is_prime(&int(2)));
        let big = int(452_233_314_041);
        assert!(is_prime(&big));
        // cross-check: no prime divisor up to 10^6
        assert!(primes_up_to(1_000_000).iter().all(|&p| !big.is_divisible_u(p)));
        // strong pseudoprime to bases 2..=37 is still rejected
        assert!(!is_prime(&Integer::from_str_radix("3825123056546413051", 10).unwrap()));
        // Mersenne prime above 2^64
        assert!(is_prime(&Integer::from((Integer::from(1) << 127u32) - 1u32)));
        assert!(!is_prime(&Integer::from((Integer::from(1) << 128u32) + 1u32)));
    }

    #[test]
    fn factorization_examples() {
        let f = factorize(&int(-2309)).unwrap();
        assert_eq!(f.sign, -1);
        assert_eq!(f.factors, vec![(int(2309), 1)]);

        let n = int(-7 * 7 * 151) * int(452_233_314_041);
        let f = factorize(&n).unwrap();
        assert_eq!(f.sign, -1);
        assert_eq!(
            f.factors,
            vec![(int(7), 2), (int(151), 1), (int(452_233_314_041), 1)]
        );
        assert!(f.is_complete());

        let f = factorize(&int(1)).unwrap();
        assert_eq!(f.sign, 1);
        assert!(f.factors.is_empty());

        assert_eq!(factorize(&int(0)), Err(ArithError::FactorZero));
    }

    #[test]
    fn rho_splits_products_of_large_primes() {
        let p = Integer::from(1_000_000_007u64);
        let q = Integer::from(998_244_353u64);
        let n = Integer::from(&p * &q) * &p;
        let f = factorize(&n).unwrap();
        assert_eq!(f.factors, vec![(q, 1), (p, 2)]);
    }

    #[test]
    fn exhausted_budget_reports_cofactor() {
        let p = Integer::from(1_000_000_007u64);
        let q = Integer::from(998_244_353u64);
        let n = Integer::from(&p * &q);
        let budget = FactorBudget {
            trial_bound: 100,
            rho_iterations: 4,
        };
        let f = factorize_with(&n, &budget).unwrap();
        assert!(!f.is_complete());
        assert_eq!(f.reconstruct(), n);
    }

    #[test]
    fn rational_parsing() {
        let h = parse_rational("21/2").unwrap();
        assert_eq!(h, Rational::from((21, 2)));
        assert_eq!(parse_rational("-4/8").unwrap(), Rational::from((-1, 2)));
        assert_eq!(parse_rational("7").unwrap(), Rational::from(7));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("x").is_none());
        assert_eq!(rational_to_string(&Rational::from((-2309, 4))), "-2309/4");
    }

    proptest! {
        #[test]
        fn kronecker_is_multiplicative(a in -5000i64..5000, b in -5000i64..5000, n in 1i64..5000) {
            let (a, b, n) = (int(a), int(b), int(n));
            let ab = Integer::from(&a * &b);
            prop_assert_eq!(kronecker(&a, &n) * kronecker(&b, &n), kronecker(&ab, &n));
        }

        #[test]
        fn kronecker_agrees_with_gmp(a in -100_000i64..100_000, n in -100_000i64..100_000) {
            prop_assume!(n != 0);
            let (a, n) = (int(a), int(n));
            prop_assert_eq!(kronecker(&a, &n), a.kronecker(&n));
        }

        #[test]
        fn factorization_reconstructs(n in prop::num::i64::ANY) {
            prop_assume!(n != 0);
            let n = int(n);
            let f = factorize(&n).unwrap();
            prop_assert!(f.is_complete());
            prop_assert_eq!(f.reconstruct(), n);
            for p in f.primes() {
                prop_assert!(is_prime(p));
                prop_assert!(probably_prime_gmp(p));
            }
        }

        #[test]
        fn primality_agrees_with_gmp(n in 0u64..2_000_000) {
            let n = Integer::from(n);
            prop_assert_eq!(is_prime(&n), probably_prime_gmp(&n));
        }
    }
}
