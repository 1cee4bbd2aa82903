//! Prime-field arithmetic.
//!
//! Everything above this module (encoding, interpolation, decoding) works over
//! `F_q` for a runtime prime `q < 2^63`. Values are stored as canonical `u64`
//! representatives and products go through `u128`, so no operation can
//! overflow regardless of the modulus size.

use std::fmt;

use thiserror::Error;

/// Default operation field, `2^31 - 1`.
pub const DEFAULT_MODULUS: u64 = 2_147_483_647;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (need 2 < q < 2^63)")]
    ModulusOutOfRange(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands live in different fields (q = {0} vs q = {1})")]
    ModulusMismatch(u64, u64),
    #[error("value {value} is not a canonical element of F_{modulus}")]
    NotCanonical { value: u64, modulus: u64 },
}

/// A prime modulus `q`, validated once at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if q <= 2 || q >= 1 << 63 {
            return Err(FieldError::ModulusOutOfRange(q));
        }
        if !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(Self(q))
    }

    /// The default `2^31 - 1` field.
    pub fn default_field() -> Self {
        Self(DEFAULT_MODULUS)
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn reduce(self, v: u64) -> u64 {
        v % self.0
    }

    /// Maps a signed integer into its canonical representative.
    pub fn reduce_signed(self, v: i64) -> u64 {
        v.rem_euclid(self.0 as i64) as u64
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        // a, b < q < 2^63, so a + b cannot overflow u64.
        let s = a + b;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.0 - b
        }
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.0 as u128) as u64
    }

    pub fn pow(self, base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.0;
        let mut base = base % self.0;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(self, a: u64) -> Result<u64, FieldError> {
        if a.is_multiple_of(self.0) {
            return Err(FieldError::DivisionByZero);
        }
        Ok(self.pow(a, self.0 - 2))
    }

    pub fn element(self, value: u64) -> Result<FieldElement, FieldError> {
        FieldElement::new(value, self)
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Deterministic Miller-Rabin, exact for every `n < 2^64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// An element of `F_q` carrying its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: PrimeModulus,
}

// Checked arithmetic: mixing moduli is an error, so these are not the ops traits.
#[allow(clippy::should_implement_trait)]
impl FieldElement {
    /// Rejects non-canonical values instead of reducing them.
    pub fn new(value: u64, modulus: PrimeModulus) -> Result<Self, FieldError> {
        if value >= modulus.get() {
            return Err(FieldError::NotCanonical {
                value,
                modulus: modulus.get(),
            });
        }
        Ok(Self { value, modulus })
    }

    pub fn reduced(value: u64, modulus: PrimeModulus) -> Self {
        Self {
            value: modulus.reduce(value),
            modulus,
        }
    }

    pub fn zero(modulus: PrimeModulus) -> Self {
        Self { value: 0, modulus }
    }

    pub fn one(modulus: PrimeModulus) -> Self {
        Self { value: 1, modulus }
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.value
    }

    #[inline]
    pub fn modulus(self) -> PrimeModulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: Self) -> Result<PrimeModulus, FieldError> {
        if self.modulus != other.modulus {
            return Err(FieldError::ModulusMismatch(
                self.modulus.get(),
                other.modulus.get(),
            ));
        }
        Ok(self.modulus)
    }

    pub fn add(self, rhs: Self) -> Result<Self, FieldError> {
        let q = self.same_field(rhs)?;
        Ok(Self {
            value: q.add(self.value, rhs.value),
            modulus: q,
        })
    }

    pub fn sub(self, rhs: Self) -> Result<Self, FieldError> {
        let q = self.same_field(rhs)?;
        Ok(Self {
            value: q.sub(self.value, rhs.value),
            modulus: q,
        })
    }

    pub fn mul(self, rhs: Self) -> Result<Self, FieldError> {
        let q = self.same_field(rhs)?;
        Ok(Self {
            value: q.mul(self.value, rhs.value),
            modulus: q,
        })
    }

    pub fn div(self, rhs: Self) -> Result<Self, FieldError> {
        self.mul(rhs.inv()?)
    }

    pub fn neg(self) -> Self {
        Self {
            value: self.modulus.neg(self.value),
            modulus: self.modulus,
        }
    }

    pub fn inv(self) -> Result<Self, FieldError> {
        Ok(Self {
            value: self.modulus.inv(self.value)?,
            modulus: self.modulus,
        })
    }

    pub fn pow(self, exp: u64) -> Self {
        Self {
            value: self.modulus.pow(self.value, exp),
            modulus: self.modulus,
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.value.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f7() -> PrimeModulus {
        PrimeModulus::new(7).unwrap()
    }

    #[test]
    fn rejects_bad_moduli() {
        assert_eq!(PrimeModulus::new(2), Err(FieldError::ModulusOutOfRange(2)));
        assert_eq!(PrimeModulus::new(1), Err(FieldError::ModulusOutOfRange(1)));
        assert_eq!(PrimeModulus::new(9), Err(FieldError::NotPrime(9)));
        assert_eq!(
            PrimeModulus::new(3_215_031_751),
            Err(FieldError::NotPrime(3_215_031_751))
        );
        assert!(PrimeModulus::new(1 << 63).is_err());
        assert!(PrimeModulus::new((1 << 61) - 1).is_ok());
        assert!(PrimeModulus::new(DEFAULT_MODULUS).is_ok());
    }

    #[test]
    fn primality_matches_trial_division() {
        let slow = |n: u64| {
            n >= 2
                && (2..)
                    .take_while(|d| d * d <= n)
                    .all(|d| !n.is_multiple_of(d))
        };
        for n in 0..5000 {
            assert_eq!(is_prime(n), slow(n), "n = {n}");
        }
    }

    #[test]
    fn inverse_of_three_mod_seven() {
        let three = f7().element(3).unwrap();
        assert_eq!(three.inv().unwrap().value(), 5);
    }

    #[test]
    fn identities() {
        let q = f7();
        for v in 0..7 {
            let a = q.element(v).unwrap();
            assert_eq!(a.add(FieldElement::zero(q)).unwrap(), a);
            assert_eq!(a.mul(FieldElement::one(q)).unwrap(), a);
        }
    }

    #[test]
    fn zero_has_no_inverse() {
        assert_eq!(
            FieldElement::zero(f7()).inv(),
            Err(FieldError::DivisionByZero)
        );
    }

    #[test]
    fn mixed_moduli_are_rejected() {
        let a = f7().element(3).unwrap();
        let b = PrimeModulus::new(11).unwrap().element(3).unwrap();
        assert_eq!(a.add(b), Err(FieldError::ModulusMismatch(7, 11)));
        assert_eq!(a.mul(b), Err(FieldError::ModulusMismatch(7, 11)));
    }

    #[test]
    fn non_canonical_values_are_rejected() {
        assert!(f7().element(7).is_err());
        assert_eq!(FieldElement::reduced(15, f7()).value(), 1);
    }

    #[test]
    fn large_modulus_does_not_overflow() {
        let q = PrimeModulus::new((1 << 61) - 1).unwrap();
        let a = q.get() - 1;
        // (-1)^2 = 1
        assert_eq!(q.mul(a, a), 1);
        assert_eq!(q.add(a, a), q.get() - 2);
    }

    fn mersenne31() -> PrimeModulus {
        PrimeModulus::default_field()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn inverse_roundtrip(a in 1..DEFAULT_MODULUS) {
            let a = mersenne31().element(a).unwrap();
            prop_assert_eq!(a.mul(a.inv().unwrap()).unwrap().value(), 1);
        }

        #[test]
        fn fermat(a in 1..DEFAULT_MODULUS) {
            let a = mersenne31().element(a).unwrap();
            prop_assert_eq!(a.pow(DEFAULT_MODULUS - 1).value(), 1);
        }
    }

    proptest! {
        #[test]
        fn field_axioms(a in 0..DEFAULT_MODULUS, b in 0..DEFAULT_MODULUS, c in 0..DEFAULT_MODULUS) {
            let q = mersenne31();
            let (a, b, c) = (q.element(a).unwrap(), q.element(b).unwrap(), q.element(c).unwrap());
            prop_assert_eq!(a.add(b).unwrap(), b.add(a).unwrap());
            prop_assert_eq!(a.mul(b).unwrap(), b.mul(a).unwrap());
            prop_assert_eq!(a.add(b).unwrap().add(c).unwrap(), a.add(b.add(c).unwrap()).unwrap());
            prop_assert_eq!(a.mul(b).unwrap().mul(c).unwrap(), a.mul(b.mul(c).unwrap()).unwrap());
            prop_assert_eq!(
                a.mul(b.add(c).unwrap()).unwrap(),
                a.mul(b).unwrap().add(a.mul(c).unwrap()).unwrap()
            );
            prop_assert_eq!(a.sub(b).unwrap().add(b).unwrap(), a);
            prop_assert_eq!(a.add(a.neg()).unwrap().value(), 0);
        }

        #[test]
        fn wide_modulus_distributes(a in 0u64..(1 << 61) - 1, b in 0u64..(1 << 61) - 1, c in 0u64..(1 << 61) - 1) {
            let q = PrimeModulus::new((1 << 61) - 1).unwrap();
            let lhs = q.mul(a, q.add(b, c));
            let rhs = q.add(q.mul(a, b), q.mul(a, c));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
