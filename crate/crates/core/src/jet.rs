//! Truncated power series in one variable with an explicit valuation.
//!
//! A jet stores `rho^valuation * (c0 + c1 rho + ... )` and is known exactly
//! through the absolute power `valuation + coeffs.len() - 1`. Arithmetic
//! propagates that precision instead of truncating to a fixed length, so a
//! product or quotient never claims more terms than its inputs determine.
//! Exact leading zeros are moved into the valuation, so `coeffs[0] != 0`
//! for every nonzero jet. The zero jet has no coefficients and is known to
//! vanish through `valuation - 1`.

use std::fmt;

use crate::error::{Error, Result};

/// Divisors with a leading coefficient below this are rejected.
pub const TAU_JET: f64 = 1e-13;

#[derive(Clone, PartialEq)]
pub struct Jet {
    valuation: u32,
    coeffs: Vec<f64>,
}

impl Jet {
    /// `rho^valuation * sum coeffs[k] rho^k`; precision from the length.
    pub fn new(valuation: u32, coeffs: Vec<f64>) -> Self {
        let mut j = Self { valuation, coeffs };
        j.normalize();
        j
    }

    /// Zero known through `rho^order`.
    pub fn zero(order: u32) -> Self {
        Self { valuation: order + 1, coeffs: Vec::new() }
    }

    /// Constant exact through `rho^order`.
    pub fn constant(c: f64, order: u32) -> Self {
        let mut coeffs = vec![0.0; order as usize + 1];
        coeffs[0] = c;
        Self::new(0, coeffs)
    }

    /// The variable `rho` itself, exact through `rho^order` (`order >= 1`).
    pub fn variable(order: u32) -> Self {
        let mut coeffs = vec![0.0; order.max(1) as usize];
        coeffs[0] = 1.0;
        Self::new(1, coeffs)
    }

    /// Polynomial with absolute coefficients `c[k]` of `rho^k`, known through `order`.
    pub fn from_poly(c: &[f64], order: u32) -> Self {
        let n = order as usize + 1;
        let coeffs = (0..n).map(|k| c.get(k).copied().unwrap_or(0.0)).collect();
        Self::new(0, coeffs)
    }

    fn normalize(&mut self) {
        let lead = self.coeffs.iter().position(|&c| c != 0.0).unwrap_or(self.coeffs.len());
        self.valuation += lead as u32;
        self.coeffs.drain(..lead);
    }

    pub fn valuation(&self) -> u32 {
        self.valuation
    }

    /// Coefficients after factoring out `rho^valuation`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Highest absolute power of `rho` the jet determines.
    pub fn order(&self) -> i64 {
        self.valuation as i64 + self.coeffs.len() as i64 - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }

    /// Coefficient of `rho^k`; `None` past the known order.
    pub fn coeff(&self, k: u32) -> Option<f64> {
        if (k as i64) > self.order() {
            None
        } else if k < self.valuation {
            Some(0.0)
        } else {
            Some(self.coeffs[(k - self.valuation) as usize])
        }
    }

    /// Absolute coefficients of `rho^0 .. rho^order`.
    pub fn dense(&self, order: u32) -> Vec<f64> {
        (0..=order).map(|k| self.coeff(k).unwrap_or(0.0)).collect()
    }

    /// Drops everything above `rho^order`.
    pub fn truncate(&self, order: u32) -> Self {
        if (order as i64) >= self.order() {
            return self.clone();
        }
        if order < self.valuation {
            return Self::zero(order);
        }
        Self::new(self.valuation, self.coeffs[..=(order - self.valuation) as usize].to_vec())
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let inner = self.coeffs.iter().rev().fold(0.0, |acc, c| acc * rho + c);
        inner * rho.powi(self.valuation as i32)
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::zero(self.order().max(0) as u32);
        }
        Self { valuation: self.valuation, coeffs: self.coeffs.iter().map(|c| c * k).collect() }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Jet, sign: f64) -> Jet {
        let order = self.order().min(other.order());
        let v = self.valuation.min(other.valuation);
        if order < v as i64 {
            return Jet::zero(0).with_order(order);
        }
        let coeffs =
            (v..=order as u32).map(|k| self.coeff(k).unwrap_or(0.0) + sign * other.coeff(k).unwrap_or(0.0)).collect();
        Self::new(v, coeffs)
    }

    fn with_order(mut self, order: i64) -> Self {
        if self.coeffs.is_empty() {
            self.valuation = (order + 1).max(0) as u32;
        }
        self
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let v = self.valuation + other.valuation;
        let len = self.coeffs.len().min(other.coeffs.len());
        if self.is_zero() || other.is_zero() {
            let order = (self.valuation as i64 + other.order()).min(other.valuation as i64 + self.order());
            return Jet::zero(0).with_order(order);
        }
        let mut coeffs = vec![0.0; len];
        for (k, out) in coeffs.iter_mut().enumerate() {
            *out = (0..=k).map(|i| self.coeffs[i] * other.coeffs[k - i]).sum();
        }
        Jet::new(v, coeffs)
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        let lead = other.leading();
        if other.is_zero() || lead.abs() < TAU_JET {
            return Err(Error::DivisionBySingularJet { leading: lead });
        }
        if self.is_zero() {
            return Ok(Jet::zero(0).with_order(self.order() - other.valuation as i64));
        }
        if self.valuation < other.valuation {
            return Err(Error::InvalidArgument(format!(
                "jet quotient has negative valuation {} - {}",
                self.valuation, other.valuation
            )));
        }
        let len = self.coeffs.len().min(other.coeffs.len());
        let b = &other.coeffs;
        let mut q = vec![0.0; len];
        for k in 0..len {
            let acc: f64 = (1..=k).map(|i| b[i] * q[k - i]).sum();
            q[k] = (self.coeffs[k] - acc) / b[0];
        }
        Ok(Jet::new(self.valuation - other.valuation, q))
    }

    /// `k`-fold product, `k >= 1`.
    pub fn pow(&self, k: u32) -> Jet {
        assert!(k >= 1, "jet power must be positive");
        let mut out = self.clone();
        for _ in 1..k {
            out = out.mul(self);
        }
        out
    }

    /// `sum c[k] x^k` with jet argument, by Horner.
    pub fn compose_poly(c: &[f64], x: &Jet, order: u32) -> Jet {
        let mut acc = Jet::zero(order);
        for &ck in c.iter().rev() {
            acc = acc.mul(x).add(&Jet::constant(ck, order));
        }
        acc.truncate(order)
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rho^{} * {:?} (through rho^{})", self.valuation, self.coeffs, self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn difference_of_squares() {
        let a = Jet::new(0, vec![1.0, 1.0, 0.0]);
        let b = Jet::new(0, vec![1.0, -1.0, 0.0]);
        let p = a.mul(&b);
        assert_eq!(p.dense(2), vec![1.0, 0.0, -1.0]);
        assert_eq!(p.order(), 2);
    }

    #[test]
    fn valuation_arithmetic() {
        let a = Jet::new(2, vec![2.0, 1.0]);
        let b = Jet::new(1, vec![1.0, 0.0]);
        let q = a.div(&b).unwrap();
        assert_eq!(q.valuation(), 1);
        assert_eq!(q.coeffs(), &[2.0, 1.0]);
    }

    #[test]
    fn geometric_series() {
        let one = Jet::constant(1.0, 3);
        let d = Jet::from_poly(&[1.0, -1.0], 3);
        let g = one.div(&d).unwrap();
        assert_eq!(g.dense(3), vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn singular_division() {
        let a = Jet::constant(1.0, 3);
        assert!(matches!(a.div(&Jet::zero(3)), Err(Error::DivisionBySingularJet { .. })));
        let tiny = Jet::new(0, vec![1e-14, 1.0]);
        assert!(matches!(a.div(&tiny), Err(Error::DivisionBySingularJet { .. })));
        let r = Jet::variable(3);
        assert!(matches!(a.div(&r), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn leading_zeros_move_into_valuation() {
        let j = Jet::new(0, vec![0.0, 0.0, 3.0, 1.0]);
        assert_eq!(j.valuation(), 2);
        assert_eq!(j.coeffs(), &[3.0, 1.0]);
        assert_eq!(j.order(), 3);
        assert_eq!(j.coeff(1), Some(0.0));
        assert_eq!(j.coeff(4), None);
    }

    #[test]
    fn precision_propagates() {
        // (rho + rho^2 + ?) * (1 + ?) is known through rho^1 only
        let a = Jet::new(1, vec![1.0, 1.0]);
        let b = Jet::new(0, vec![1.0]);
        assert_eq!(a.mul(&b).order(), 1);
        let s = a.add(&Jet::constant(2.0, 5));
        assert_eq!(s.order(), 2);
        let z = Jet::zero(4).mul(&Jet::variable(4));
        assert!(z.is_zero());
        assert_eq!(z.order(), 4 + 1);
    }

    #[test]
    fn cancellation_gives_zero_jet() {
        let a = Jet::from_poly(&[1.0, 2.0], 3);
        let z = a.sub(&a);
        assert!(z.is_zero());
        assert_eq!(z.order(), 3);
    }

    #[test]
    fn compose_and_eval() {
        // (1 + x)^2 at x = rho + rho^2 through rho^3: 1 + 2rho + 3rho^2 + 2rho^3
        let x = Jet::from_poly(&[0.0, 1.0, 1.0], 3);
        let c = Jet::compose_poly(&[1.0, 2.0, 1.0], &x, 3);
        assert_eq!(c.dense(3), vec![1.0, 2.0, 3.0, 2.0]);
        assert_abs_diff_eq!(c.eval(0.5), 1.0 + 1.0 + 0.75 + 0.25);
    }

    fn arb_jet() -> impl Strategy<Value = Jet> {
        (0u32..3, 1.0f64..2.0, any::<bool>(), prop::collection::vec(-0.5f64..0.5, 8)).prop_map(
            |(v, lead, neg, rest)| {
                let mut c = vec![if neg { -lead } else { lead }];
                c.extend(rest);
                Jet::new(v, c)
            },
        )
    }

    proptest! {
        #[test]
        fn mul_div_round_trip(a in arb_jet(), b in arb_jet()) {
            let back = a.mul(&b).div(&b).unwrap();
            prop_assert_eq!(back.valuation(), a.valuation());
            prop_assert_eq!(back.coeffs().len(), a.coeffs().len());
            for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn pow_is_repeated_mul(a in arb_jet(), k in 1u32..5) {
            let mut m = a.clone();
            for _ in 1..k {
                m = m.mul(&a);
            }
            prop_assert_eq!(a.pow(k), m);
        }
    }
}
