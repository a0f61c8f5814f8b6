//! Arithmetic over binary extension fields GF(2^m), 1 <= m <= 8.
//!
//! Elements are stored as `u8` values whose bits are the coefficients of a
//! polynomial over GF(2). Addition is XOR. Multiplication goes through a full
//! product table derived from log/antilog tables, which are built once per
//! [`Field`] from the configured reduction polynomial.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduction polynomial x^8 + x^4 + x^3 + x^2 + 1.
pub const GF256_POLY: u16 = 0x11D;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GaloisError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("vector length mismatch: target {target}, source {len}")]
    LengthMismatch { target: usize, len: usize },
    #[error("field order {0} is not a power of two in [2, 256]")]
    UnsupportedOrder(u16),
    #[error("polynomial {poly:#x} is not irreducible of degree {degree}")]
    Reducible { poly: u16, degree: u32 },
    #[error("byte {value:#04x} is not an element of GF({order})")]
    NotInField { value: u8, order: u16 },
}

/// An element of GF(q). The value is always below the order of the field it
/// was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldElement(u8);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Wraps a raw value. Range checking against a particular field happens in
    /// [`Field::element`].
    pub const fn from_raw(value: u8) -> Self {
        FieldElement(value)
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

/// Field order and reduction polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub order: u16,
    /// Full reduction polynomial including the leading x^m term.
    pub poly: u16,
}

impl FieldConfig {
    pub const GF256: FieldConfig = FieldConfig {
        order: 256,
        poly: GF256_POLY,
    };
    pub const GF2: FieldConfig = FieldConfig {
        order: 2,
        poly: 0b11,
    };

    /// Default configuration for a given order: the smallest irreducible
    /// polynomial of the right degree, except for q = 256 which uses 0x11D.
    pub fn for_order(order: u16) -> Result<Self, GaloisError> {
        let degree = degree_of_order(order)?;
        if order == 256 {
            return Ok(Self::GF256);
        }
        let poly = (1u16 << degree..1u16 << (degree + 1))
            .find(|&p| is_irreducible(p, degree))
            .expect("an irreducible polynomial exists for every degree");
        Ok(FieldConfig { order, poly })
    }

    pub fn degree(&self) -> u32 {
        self.order.trailing_zeros()
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self::GF256
    }
}

fn degree_of_order(order: u16) -> Result<u32, GaloisError> {
    if !(2..=256).contains(&order) || !order.is_power_of_two() {
        return Err(GaloisError::UnsupportedOrder(order));
    }
    Ok(order.trailing_zeros())
}

fn poly_degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

/// Remainder of carry-less division `a mod b` over GF(2).
fn poly_rem(mut a: u32, b: u32) -> u32 {
    let db = poly_degree(b);
    while a != 0 && poly_degree(a) >= db {
        a ^= b << (poly_degree(a) - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=degree/2.
fn is_irreducible(poly: u16, degree: u32) -> bool {
    if poly_degree(poly as u32) != degree as i32 {
        return false;
    }
    (2u32..1u32 << (degree / 2 + 1)).all(|d| poly_rem(poly as u32, d) != 0)
}

/// Shift-and-add product reduced by `poly`.
fn slow_mul(mut a: u16, mut b: u16, poly: u16, order: u16) -> u16 {
    let mut acc = 0u16;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & order != 0 {
            a ^= poly;
        }
    }
    acc
}

#[derive(Debug)]
struct Tables {
    config: FieldConfig,
    generator: u8,
    /// `exp[i] = g^i`, duplicated so that `exp[log a + log b]` needs no modulo.
    exp: Vec<u8>,
    log: Vec<u8>,
    /// Row-major product table, `mul[a * q + b]`.
    mul: Vec<u8>,
    inv: Vec<u8>,
}

/// Immutable arithmetic context for GF(q). Cloning is cheap.
#[derive(Debug, Clone)]
pub struct Field {
    tables: Arc<Tables>,
}

impl Field {
    pub fn new(config: FieldConfig) -> Result<Self, GaloisError> {
        let degree = degree_of_order(config.order)?;
        if !is_irreducible(config.poly, degree) {
            return Err(GaloisError::Reducible {
                poly: config.poly,
                degree,
            });
        }
        let q = config.order as usize;
        let group = q - 1;

        // An irreducible polynomial need not make x primitive, so search for a
        // generator of the multiplicative group.
        let generator = (1..q as u16)
            .find(|&g| {
                let mut x = 1u16;
                for i in 1..=group {
                    x = slow_mul(x, g, config.poly, config.order);
                    if x == 1 {
                        return i == group;
                    }
                }
                false
            })
            .expect("multiplicative group of a finite field is cyclic")
            as u8;

        let mut exp = vec![0u8; 2 * group];
        let mut log = vec![0u8; q];
        let mut x = 1u16;
        for i in 0..group {
            exp[i] = x as u8;
            exp[i + group] = x as u8;
            log[x as usize] = i as u8;
            x = slow_mul(x, generator as u16, config.poly, config.order);
        }

        let mut mul = vec![0u8; q * q];
        let mut inv = vec![0u8; q];
        for a in 1..q {
            for b in 1..q {
                mul[a * q + b] = exp[log[a] as usize + log[b] as usize];
            }
            inv[a] = exp[(group - log[a] as usize) % group];
        }

        Ok(Field {
            tables: Arc::new(Tables {
                config,
                generator,
                exp,
                log,
                mul,
                inv,
            }),
        })
    }

    pub fn gf256() -> Self {
        Self::new(FieldConfig::GF256).expect("0x11D is irreducible")
    }

    pub fn gf2() -> Self {
        Self::new(FieldConfig::GF2).expect("x + 1 is irreducible")
    }

    pub fn config(&self) -> FieldConfig {
        self.tables.config
    }

    pub fn order(&self) -> u16 {
        self.tables.config.order
    }

    /// Primitive element used to build the log tables.
    pub fn generator(&self) -> FieldElement {
        FieldElement(self.tables.generator)
    }

    /// Checked construction; `None` when `value >= q`.
    pub fn element(&self, value: u8) -> Option<FieldElement> {
        ((value as u16) < self.order()).then_some(FieldElement(value))
    }

    pub fn contains(&self, a: FieldElement) -> bool {
        (a.0 as u16) < self.order()
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    /// Same as [`add`](Self::add) in characteristic 2.
    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let q = self.order() as usize;
        FieldElement(self.tables.mul[a.0 as usize * q + b.0 as usize])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GaloisError> {
        if a.is_zero() {
            return Err(GaloisError::ZeroInverse);
        }
        Ok(FieldElement(self.tables.inv[a.0 as usize]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GaloisError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Discrete logarithm base [`generator`](Self::generator); `None` for zero.
    pub fn log(&self, a: FieldElement) -> Option<u8> {
        (!a.is_zero()).then(|| self.tables.log[a.0 as usize])
    }

    pub fn exp(&self, power: usize) -> FieldElement {
        let group = self.order() as usize - 1;
        FieldElement(self.tables.exp[power % group])
    }

    /// Uniform draw over all q elements, zero included.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.random_range(0..self.order()) as u8)
    }

    /// Checks that every byte is a field element. Payloads carry one symbol
    /// per byte, so below GF(256) the high bits must be clear.
    pub fn check_symbols(&self, data: &[u8]) -> Result<(), GaloisError> {
        let order = self.order();
        match data.iter().find(|&&b| b as u16 >= order) {
            Some(&value) => Err(GaloisError::NotInField { value, order }),
            None => Ok(()),
        }
    }

    /// `target[j] += coeff * source[j]` for every byte, each byte being one
    /// field element.
    pub fn vec_axpy(
        &self,
        target: &mut [u8],
        source: &[u8],
        coeff: FieldElement,
    ) -> Result<(), GaloisError> {
        if target.len() != source.len() {
            return Err(GaloisError::LengthMismatch {
                target: target.len(),
                len: source.len(),
            });
        }
        if self.order() < 256 {
            self.check_symbols(target)?;
            self.check_symbols(source)?;
        }
        match coeff.0 {
            0 => {}
            1 => target.iter_mut().zip(source).for_each(|(t, s)| *t ^= s),
            c => {
                let q = self.order() as usize;
                let row = &self.tables.mul[c as usize * q..(c as usize + 1) * q];
                target
                    .iter_mut()
                    .zip(source)
                    .for_each(|(t, &s)| *t ^= row[s as usize]);
            }
        }
        Ok(())
    }

    /// `data[j] *= coeff` in place.
    pub fn vec_scale(&self, data: &mut [u8], coeff: FieldElement) -> Result<(), GaloisError> {
        self.check_symbols(data)?;
        let q = self.order() as usize;
        let row = &self.tables.mul[coeff.0 as usize * q..(coeff.0 as usize + 1) * q];
        data.iter_mut().for_each(|d| *d = row[*d as usize]);
        Ok(())
    }
}

impl Default for Field {
    fn default() -> Self {
        Self::gf256()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fe(v: u8) -> FieldElement {
        FieldElement::from_raw(v)
    }

    #[test]
    fn add_examples() {
        let f = Field::gf256();
        assert_eq!(f.add(fe(0x57), fe(0x83)), fe(0xD4));
        for a in 0..=255u8 {
            assert_eq!(f.add(fe(a), fe(a)), FieldElement::ZERO);
            assert_eq!(f.add(fe(a), FieldElement::ZERO), fe(a));
        }
    }

    #[test]
    fn identities() {
        let f = Field::gf256();
        for a in 0..=255u8 {
            assert_eq!(f.mul(fe(a), FieldElement::ONE), fe(a));
            assert_eq!(f.mul(fe(a), FieldElement::ZERO), FieldElement::ZERO);
        }
        assert_eq!(f.inv(FieldElement::ONE), Ok(FieldElement::ONE));
        assert_eq!(f.inv(FieldElement::ZERO), Err(GaloisError::ZeroInverse));
    }

    #[test]
    fn inverse_is_involution() {
        let f = Field::gf256();
        for a in 1..=255u8 {
            let ia = f.inv(fe(a)).unwrap();
            assert_eq!(f.mul(fe(a), ia), FieldElement::ONE);
            assert_eq!(f.inv(ia).unwrap(), fe(a));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert_eq!(
            Field::new(FieldConfig {
                order: 12,
                poly: 0x13
            })
            .unwrap_err(),
            GaloisError::UnsupportedOrder(12)
        );
        // x^8 + 1 = (x + 1)^8
        assert!(matches!(
            Field::new(FieldConfig {
                order: 256,
                poly: 0x101
            }),
            Err(GaloisError::Reducible { .. })
        ));
    }

    #[test]
    fn aes_polynomial_needs_generator_search() {
        // x is not primitive under 0x11B; 3 is.
        let f = Field::new(FieldConfig {
            order: 256,
            poly: 0x11B,
        })
        .unwrap();
        assert_eq!(f.generator(), fe(3));
        assert_eq!(f.mul(fe(0x57), fe(0x83)), fe(0xC1));
    }

    #[test]
    fn small_fields() {
        for m in 1..=8u32 {
            let cfg = FieldConfig::for_order(1 << m).unwrap();
            let f = Field::new(cfg).unwrap();
            for a in 1..f.order() {
                let a = fe(a as u8);
                assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
            }
        }
        let f = Field::gf2();
        assert_eq!(f.mul(fe(1), fe(1)), fe(1));
        assert_eq!(f.element(2), None);
    }

    #[test]
    fn symbols_must_fit_the_field() {
        let f = Field::new(FieldConfig::for_order(16).unwrap()).unwrap();
        assert!(f.check_symbols(&[0, 15, 7]).is_ok());
        assert_eq!(
            f.check_symbols(&[3, 16]),
            Err(GaloisError::NotInField {
                value: 16,
                order: 16
            })
        );
        let mut y = vec![1u8, 2];
        assert!(f.vec_axpy(&mut y, &[1, 200], f.generator()).is_err());
        assert!(f.vec_scale(&mut [255], f.generator()).is_err());
        assert!(Field::gf256().check_symbols(&[255]).is_ok());
    }

    #[test]
    fn axpy() {
        let f = Field::gf256();
        let src: Vec<u8> = (0..32).map(|i| (i * 37 + 11) as u8).collect();
        let orig: Vec<u8> = (0..32).map(|i| (i * 91 + 3) as u8).collect();

        let mut t = orig.clone();
        f.vec_axpy(&mut t, &src, FieldElement::ZERO).unwrap();
        assert_eq!(t, orig);

        let mut z = vec![0u8; 32];
        f.vec_axpy(&mut z, &src, FieldElement::ONE).unwrap();
        assert_eq!(z, src);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = f.random(&mut rng);
            let mut t = orig.clone();
            f.vec_axpy(&mut t, &src, c).unwrap();
            for j in 0..32 {
                assert_eq!(t[j], orig[j] ^ f.mul(c, fe(src[j])).value());
            }
            f.vec_axpy(&mut t, &src, c).unwrap();
            assert_eq!(t, orig);
        }

        assert_eq!(
            f.vec_axpy(&mut [0u8; 3], &[0u8; 4], FieldElement::ONE),
            Err(GaloisError::LengthMismatch { target: 3, len: 4 })
        );
    }
}
