//! Test-only oracles that share no code with the library paths they check.

#![allow(dead_code)]

use astro_float::{BigFloat, Consts, RoundingMode};

const PRECISION: usize = 512;
const RM: RoundingMode = RoundingMode::ToEven;

/// Ψ(n) in 512-bit arithmetic, evaluated literally: the two power products are
/// formed directly instead of through exponent sums.
pub struct PsiOracle {
    cc: Consts,
}

impl PsiOracle {
    pub fn new() -> Self {
        PsiOracle {
            cc: Consts::new().expect("constants cache"),
        }
    }

    pub fn psi(&mut self, n: u64) -> BigFloat {
        let p = PRECISION;
        let cc = &mut self.cc;
        let x = BigFloat::from_u64(n, p);
        let one = BigFloat::from_u8(1, p);
        let two = BigFloat::from_u8(2, p);
        let root = x.sqrt(p, RM);
        let a = x.ln(p, RM, cc).div(&two.mul(&root, p, RM), p, RM);
        let two_n = two.mul(&x, p, RM);
        let lower = one
            .sub(&a, p, RM)
            .pow(&two_n, p, RM, cc)
            .mul(&x.pow(&one.add(&root, p, RM), p, RM, cc), p, RM);
        let upper = one
            .add(&a, p, RM)
            .pow(&two_n, p, RM, cc)
            .mul(&x.pow(&one.sub(&root, p, RM), p, RM, cc), p, RM);
        let v = one.sub(&lower, p, RM).sub(&upper, p, RM);
        if v.is_negative() {
            BigFloat::from_u8(0, p)
        } else {
            v
        }
    }

    /// |value - oracle| / oracle, compared against `tol`.
    pub fn agrees(&mut self, n: u64, value: f64, tol: f64) -> bool {
        let p = PRECISION;
        let exact = self.psi(n);
        if exact.is_zero() {
            return value == 0.0;
        }
        let diff = BigFloat::from_f64(value, p).sub(&exact, p, RM).abs();
        let rel = diff.div(&exact, p, RM);
        rel.cmp(&BigFloat::from_f64(tol, p)).is_some_and(|c| c <= 0)
    }

    pub fn is_zero(&mut self, n: u64) -> bool {
        self.psi(n).is_zero()
    }
}

/// `H_n` summed largest term first (the library sums the other way).
pub fn harmonic_forward(n: u64) -> f64 {
    (1..=n).map(|m| 1.0 / m as f64).sum()
}
