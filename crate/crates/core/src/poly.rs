//! Sparse bivariate polynomials and planar polynomial vector fields.
//!
//! Everything downstream (Lie derivatives of the switching function, the
//! weighted polar substitution, center certificates) is exact polynomial
//! algebra over `f64` coefficients. Identities are checked coefficient-wise
//! with [`COEF_TOL`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for coefficient-wise polynomial identities.
pub const COEF_TOL: f64 = 1e-12;

/// Sparse polynomial in `x` and `y`: exponent pair `(i, j)` maps to the
/// coefficient of `x^i y^j`. No stored coefficient is exactly zero.
#[derive(Clone, Default, PartialEq)]
pub struct BiPoly {
    terms: BTreeMap<(u32, u32), f64>,
}

impl BiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: u32, j: u32, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(i, j, c);
        p
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    /// Builds a polynomial from `(i, j, c)` triples; repeated exponents add up.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, f64)>,
    {
        let mut p = Self::zero();
        for (i, j, c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry((i, j)).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&(i, j));
        }
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.terms.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).max()
    }

    /// Lowest total degree among the stored terms.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).min()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// True when every coefficient is below `COEF_TOL * max(1, scale)`.
    pub fn is_zero_within(&self, scale: f64) -> bool {
        let tol = COEF_TOL * scale.max(1.0);
        self.terms.values().all(|c| c.abs() <= tol)
    }

    /// Drops coefficients whose magnitude is at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self { terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(&k, &c)| (k, c)).collect() }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_terms(self.terms().map(|(i, j, c)| (i, j, c * k)))
    }

    /// Multiplies by `c * x^di * y^dj`.
    pub fn shift(&self, di: u32, dj: u32, c: f64) -> Self {
        Self::from_terms(self.terms().map(|(i, j, v)| (i + di, j + dj, v * c)))
    }

    /// Evaluation grouped by powers of `y`, Horner in `x` within each group.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut rows: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
        for (&(i, j), &c) in &self.terms {
            rows.entry(j).or_default().push((i, c));
        }
        let mut acc = 0.0;
        let mut prev_j: Option<u32> = None;
        for (&j, row) in rows.iter().rev() {
            if let Some(pj) = prev_j {
                acc *= y.powi((pj - j) as i32);
            }
            acc += horner_sparse(row, x);
            prev_j = Some(j);
        }
        if let Some(pj) = prev_j {
            acc *= y.powi(pj as i32);
        }
        acc
    }

    pub fn dx(&self) -> Self {
        Self::from_terms(self.terms().filter(|&(i, _, _)| i > 0).map(|(i, j, c)| (i - 1, j, c * i as f64)))
    }

    pub fn dy(&self) -> Self {
        Self::from_terms(self.terms().filter(|&(_, j, _)| j > 0).map(|(i, j, c)| (i, j - 1, c * j as f64)))
    }

    /// Antiderivative in `x` with zero integration constant.
    pub fn integrate_x(&self) -> Self {
        Self::from_terms(self.terms().map(|(i, j, c)| (i + 1, j, c / (i + 1) as f64)))
    }

    pub fn integrate_y(&self) -> Self {
        Self::from_terms(self.terms().map(|(i, j, c)| (i, j + 1, c / (j + 1) as f64)))
    }

    /// `p(-x, y)`.
    pub fn reflect_x(&self) -> Self {
        Self::from_terms(self.terms().map(|(i, j, c)| (i, j, if i % 2 == 1 { -c } else { c })))
    }

    /// `p(x + x0, y + y0)`, expanded binomially.
    pub fn translate(&self, x0: f64, y0: f64) -> Self {
        if x0 == 0.0 && y0 == 0.0 {
            return self.clone();
        }
        let mut out = Self::zero();
        for (i, j, c) in self.terms() {
            for a in 0..=i {
                let cx = binomial(i, a) * x0.powi((i - a) as i32);
                if cx == 0.0 {
                    continue;
                }
                for b in 0..=j {
                    let cy = binomial(j, b) * y0.powi((j - b) as i32);
                    out.add_term(a, b, c * cx * cy);
                }
            }
        }
        out
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Self::from_terms(self.terms().filter(|&(i, j, _)| i + j == d))
    }

    /// Restriction to the x-axis, `p(x, 0)`, as coefficients by power of `x`.
    pub fn on_x_axis(&self) -> Self {
        Self::from_terms(self.terms().filter(|&(_, j, _)| j == 0))
    }

    /// True when `p(x, 0)` is an even function of `x`.
    pub fn even_on_x_axis(&self) -> bool {
        let scale = self.max_abs_coeff();
        self.on_x_axis().terms().filter(|&(i, _, _)| i % 2 == 1).all(|(_, _, c)| c.abs() <= COEF_TOL * scale.max(1.0))
    }

    /// Coefficient-wise comparison with relative tolerance `COEF_TOL`.
    pub fn approx_eq(&self, other: &BiPoly) -> bool {
        let scale = self.max_abs_coeff().max(other.max_abs_coeff());
        (self - other).is_zero_within(scale)
    }
}

fn horner_sparse(row: &[(u32, f64)], x: f64) -> f64 {
    // row is sorted by ascending exponent
    let mut acc = 0.0;
    let mut prev: Option<u32> = None;
    for &(i, c) in row.iter().rev() {
        if let Some(p) = prev {
            acc *= x.powi((p - i) as i32);
        }
        acc += c;
        prev = Some(i);
    }
    if let Some(p) = prev {
        acc *= x.powi(p as i32);
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

impl fmt::Debug for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (i, j, c)) in self.terms().enumerate() {
            if n > 0 {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            write!(f, "{}", c.abs())?;
            match i {
                0 => {}
                1 => write!(f, "*x")?,
                _ => write!(f, "*x^{i}")?,
            }
            match j {
                0 => {}
                1 => write!(f, "*y")?,
                _ => write!(f, "*y^{j}")?,
            }
        }
        Ok(())
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, rhs: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for (i, j, c) in rhs.terms() {
            out.add_term(i, j, c);
        }
        out
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, rhs: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for (i, j, c) in rhs.terms() {
            out.add_term(i, j, -c);
        }
        out
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for (i, j, c) in self.terms() {
            for (k, l, d) in rhs.terms() {
                out.add_term(i + k, j + l, c * d);
            }
        }
        out
    }
}

impl Neg for &BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for BiPoly {
            type Output = BiPoly;
            fn $m(self, rhs: BiPoly) -> BiPoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Serialize for BiPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.terms.len()))?;
        for (i, j, c) in self.terms() {
            seq.serialize_element(&(i, j, c))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for BiPoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TermsVisitor;
        impl<'de> Visitor<'de> for TermsVisitor {
            type Value = BiPoly;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "an array of [i, j, coefficient] triples")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<BiPoly, A::Error> {
                let mut p = BiPoly::zero();
                while let Some((i, j, c)) = seq.next_element::<(u32, u32, f64)>()? {
                    if !c.is_finite() {
                        return Err(de::Error::custom("non-finite coefficient"));
                    }
                    p.add_term(i, j, c);
                }
                Ok(p)
            }
        }
        deserializer.deserialize_seq(TermsVisitor)
    }
}

/// Polynomial vector field `(x', y') = (P, Q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarField {
    #[serde(rename = "P")]
    pub p: BiPoly,
    #[serde(rename = "Q")]
    pub q: BiPoly,
}

impl PlanarField {
    pub fn new(p: BiPoly, q: BiPoly) -> Self {
        Self { p, q }
    }

    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        [self.p.eval(x, y), self.q.eval(x, y)]
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.p.scale(k), self.q.scale(k))
    }

    pub fn negated(&self) -> Self {
        self.scale(-1.0)
    }

    /// Image under the reflection `(x, y) -> (-x, y)`: `(-P(-x,y), Q(-x,y))`.
    /// Reverses the rotation sense while keeping both half-planes.
    pub fn mirrored(&self) -> Self {
        Self::new(-&self.p.reflect_x(), self.q.reflect_x())
    }

    pub fn translate(&self, x0: f64, y0: f64) -> Self {
        Self::new(self.p.translate(x0, y0), self.q.translate(x0, y0))
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_empty() && self.q.is_empty()
    }

    /// Jacobian `[[Px, Py], [Qx, Qy]]` at a point.
    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [[self.p.dx().eval(x, y), self.p.dy().eval(x, y)], [self.q.dx().eval(x, y), self.q.dy().eval(x, y)]]
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.p.max_abs_coeff().max(self.q.max_abs_coeff())
    }
}

/// Quasi-homogeneous weights `(wx, wy)` for `x = rho^wx cos t, y = rho^wy sin t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightPair {
    pub wx: u32,
    pub wy: u32,
}

impl WeightPair {
    /// Reduces to coprime integers.
    pub fn new(wx: u32, wy: u32) -> Result<Self> {
        if wx == 0 || wy == 0 {
            return Err(Error::WeightMismatch(wx, wy));
        }
        let g = gcd(wx, wy);
        Ok(Self { wx: wx / g, wy: wy / g })
    }

    pub const fn standard() -> Self {
        Self { wx: 1, wy: 1 }
    }
}

pub(crate) fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Structural proof that a half field returns `(x0, 0)` to `(-x0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CenterCertificate {
    /// `x' = -H_y, y' = H_x` with `H(x, 0)` even.
    Hamiltonian {
        energy: BiPoly,
    },
    /// Invariant under `(x, y, t) -> (-x, y, -t)`.
    Reversible,
    None,
}

impl CenterCertificate {
    pub fn is_some(&self) -> bool {
        !matches!(self, CenterCertificate::None)
    }
}

/// `Xf = f_x P + f_y Q`.
pub fn lie_derivative(field: &PlanarField, f: &BiPoly) -> BiPoly {
    &(&f.dx() * &field.p) + &(&f.dy() * &field.q)
}

/// `[Xf, X^2 f, ..., X^n f]`.
pub fn lie_chain(field: &PlanarField, f: &BiPoly, n: usize) -> Vec<BiPoly> {
    let mut out = Vec::with_capacity(n);
    let mut cur = f.clone();
    for _ in 0..n {
        cur = lie_derivative(field, &cur);
        out.push(cur.clone());
    }
    out
}

pub fn divergence(field: &PlanarField) -> BiPoly {
    &field.p.dx() + &field.q.dy()
}

/// Energy `H` with `x' = -H_y`, `y' = H_x`, `H(0, 0) = 0`, when the field
/// is divergence free.
pub fn hamiltonian_certificate(field: &PlanarField) -> Option<BiPoly> {
    let scale = field.max_abs_coeff();
    if !divergence(field).is_zero_within(scale) {
        return None;
    }
    let partial = field.q.integrate_x();
    // g'(y) = -P - d/dy(int Q dx); only pure powers of y survive when div = 0
    let rest = &(-&field.p) - &partial.dy();
    let g_prime = BiPoly::from_terms(rest.terms().filter(|&(i, _, _)| i == 0));
    let mut h = &partial + &g_prime.integrate_y();
    let c0 = h.coeff(0, 0);
    h.add_term(0, 0, -c0);
    Some(h.pruned(COEF_TOL * scale.max(1.0)))
}

/// `P(-x, y) = P(x, y)` and `Q(-x, y) = -Q(x, y)`.
pub fn reversibility_check(field: &PlanarField) -> bool {
    let tol = COEF_TOL * field.max_abs_coeff().max(1.0);
    let p_even = field.p.terms().all(|(i, _, c)| i % 2 == 0 || c.abs() <= tol);
    let q_odd = field.q.terms().all(|(i, _, c)| i % 2 == 1 || c.abs() <= tol);
    p_even && q_odd
}

/// Center certificate for one half field; Hamiltonian preferred.
pub fn center_certificate(field: &PlanarField) -> CenterCertificate {
    if let Some(h) = hamiltonian_certificate(field) {
        if h.even_on_x_axis() {
            return CenterCertificate::Hamiltonian { energy: h };
        }
    }
    if reversibility_check(field) {
        CenterCertificate::Reversible
    } else {
        CenterCertificate::None
    }
}
