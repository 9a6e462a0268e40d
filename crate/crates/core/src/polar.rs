//! Weighted polar blow-up `x = rho^p cos t, y = rho^r sin t` of one half field.
//!
//! Substituting into `(P, Q)` and solving the 2x2 system gives
//!
//! ```text
//! rho' = rho^(1-p-r) N / (p c^2 + r s^2),   N = rho^r c P + rho^p s Q
//! t'   = rho^(-p-r)  D / (p c^2 + r s^2),   D = p rho^p c Q - r rho^r s P
//! drho/dt = rho N / D
//! ```
//!
//! `N` and `D` are polynomials in `rho` whose coefficients are polynomials in
//! `(c, s)`. Their lowest nonzero powers are found exactly (modulo
//! `c^2 + s^2 = 1`) and cancelled before any division, leaving
//! `drho/dt = rho^e Ntilde(rho) / Dtilde(rho)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::poly::{BiPoly, PlanarField, WeightPair};
use crate::sigma::Side;

/// `|G(t, 0)|` below this violates the blow-up hypothesis.
pub const TAU_G: f64 = 1e-9;
pub const DEFAULT_JET_ORDER: usize = 8;
pub const DEFAULT_VALIDATION_GRID: usize = 256;

/// Polynomial in `(c, s)` as a flat term list.
#[derive(Debug, Clone, Default, PartialEq)]
struct TrigPoly {
    terms: Vec<(u32, u32, f64)>,
}

impl TrigPoly {
    fn from_bipoly(p: &BiPoly) -> Self {
        Self { terms: p.terms().collect() }
    }

    fn eval(&self, cp: &[f64], sp: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, j, a)| a * cp[i as usize] * sp[j as usize]).sum()
    }

    fn max_exponent(&self) -> u32 {
        self.terms.iter().map(|&(i, j, _)| i.max(j)).max().unwrap_or(0)
    }
}

/// Canonical form modulo `c^2 + s^2 - 1`: every `c` exponent is 0 or 1.
fn reduce_circle(p: &BiPoly) -> BiPoly {
    let mut out = BiPoly::zero();
    let mut stack: Vec<(u32, u32, f64)> = p.terms().collect();
    while let Some((i, j, a)) = stack.pop() {
        if i >= 2 {
            stack.push((i - 2, j, a));
            stack.push((i - 2, j + 2, -a));
        } else {
            out.add_term(i, j, a);
        }
    }
    out
}

fn is_zero_on_circle(p: &BiPoly, scale: f64) -> bool {
    reduce_circle(p).max_abs_coeff() <= 1e-12 * scale.max(1.0)
}

/// Outcome of the blow-up hypothesis check on an angular interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub passed: bool,
    pub theta_from: f64,
    pub theta_to: f64,
    pub grid: usize,
    /// Smallest `|G(t, 0)|` on the grid and where it occurs.
    pub min_abs_g: f64,
    pub theta_at_min: f64,
    /// Power `e` in `drho/dt = rho^e (...)`; `F(t, 0) = 0` needs `e >= 1`.
    pub f_valuation: Option<i64>,
    pub offending_theta: Option<f64>,
    pub reason: Option<String>,
}

impl HypothesisRecord {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::HypothesisViolation {
                theta: self.offending_theta.unwrap_or(f64::NAN),
                reason: self.reason.clone().unwrap_or_default(),
            })
        }
    }
}

/// `drho/dt = F/G` for one half field in weighted polar coordinates.
#[derive(Debug, Clone)]
pub struct PolarOde {
    /// Field actually transported (already negated when time reversed).
    pub field: PlanarField,
    pub weights: WeightPair,
    pub half: Side,
    pub time_reversed: bool,
    /// Coefficients of `Ntilde` and `Dtilde` in powers of rho.
    num: Vec<TrigPoly>,
    den: Vec<TrigPoly>,
    /// `e = 1 + v(N) - v(D)`; `None` when `N` vanishes identically.
    exponent: Option<i64>,
    /// Power of rho factored out of `D`; `None` when `D` vanishes identically.
    den_valuation: Option<u32>,
    num_valuation: Option<u32>,
    max_power: u32,
    pub validation: Option<HypothesisRecord>,
}

/// Builds the blow-up ODE. `reversed` transports `-X`.
pub fn weighted_polar_ode(x: &PlanarField, w: WeightPair, half: Side, reversed: bool) -> PolarOde {
    let field = if reversed { x.negated() } else { x.clone() };
    let (p, r) = (w.wx, w.wy);
    let mut n_by_power: BTreeMap<u32, BiPoly> = BTreeMap::new();
    let mut d_by_power: BTreeMap<u32, BiPoly> = BTreeMap::new();
    let push = |map: &mut BTreeMap<u32, BiPoly>, k: u32, i: u32, j: u32, a: f64| {
        map.entry(k).or_default().add_term(i, j, a);
    };
    for (i, j, a) in field.p.terms() {
        let k = p * i + r * j;
        push(&mut n_by_power, k + r, i + 1, j, a);
        push(&mut d_by_power, k + r, i, j + 1, -(r as f64) * a);
    }
    for (i, j, b) in field.q.terms() {
        let k = p * i + r * j;
        push(&mut n_by_power, k + p, i, j + 1, b);
        push(&mut d_by_power, k + p, i + 1, j, p as f64 * b);
    }
    let scale = field.max_abs_coeff().max(1.0) * (p.max(r) as f64);
    let strip = |map: &BTreeMap<u32, BiPoly>| -> (Option<u32>, Vec<TrigPoly>) {
        let nonzero: Vec<(u32, &BiPoly)> =
            map.iter().filter(|(_, v)| !is_zero_on_circle(v, scale)).map(|(&k, v)| (k, v)).collect();
        match nonzero.first() {
            None => (None, Vec::new()),
            Some(&(v, _)) => {
                let top = nonzero.last().unwrap().0;
                let coeffs = (v..=top)
                    .map(|k| {
                        map.get(&k)
                            .filter(|poly| !is_zero_on_circle(poly, scale))
                            .map(TrigPoly::from_bipoly)
                            .unwrap_or_default()
                    })
                    .collect();
                (Some(v), coeffs)
            }
        }
    };
    let (vn, num) = strip(&n_by_power);
    let (vd, den) = strip(&d_by_power);
    let exponent = match (vn, vd) {
        (Some(a), Some(b)) => Some(1 + a as i64 - b as i64),
        _ => None,
    };
    let max_power = num.iter().chain(den.iter()).map(TrigPoly::max_exponent).max().unwrap_or(0) + 2;
    PolarOde {
        field,
        weights: w,
        half,
        time_reversed: reversed,
        num,
        den,
        exponent,
        den_valuation: vd,
        num_valuation: vn,
        max_power,
        validation: None,
    }
}

impl PolarOde {
    fn powers(&self, theta: f64) -> (Vec<f64>, Vec<f64>) {
        let (s, c) = theta.sin_cos();
        let n = self.max_power as usize + 1;
        let mut cp = vec![1.0; n];
        let mut sp = vec![1.0; n];
        for k in 1..n {
            cp[k] = cp[k - 1] * c;
            sp[k] = sp[k - 1] * s;
        }
        (cp, sp)
    }

    /// `p cos^2 t + r sin^2 t`.
    pub fn determinant(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.weights.wx as f64 * c * c + self.weights.wy as f64 * s * s
    }

    /// True when `drho/dt` vanishes identically.
    pub fn is_trivial(&self) -> bool {
        self.num.is_empty()
    }

    /// `e` in `drho/dt = rho^e Ntilde / Dtilde`.
    pub fn exponent(&self) -> Option<i64> {
        if self.num.is_empty() {
            None
        } else {
            self.exponent
        }
    }

    /// `(Ntilde_k(t), Dtilde_k(t))` for `k = 0..=order` (zero-padded).
    pub fn trig_coeffs(&self, theta: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
        let (cp, sp) = self.powers(theta);
        let eval = |v: &[TrigPoly]| -> Vec<f64> {
            (0..=order).map(|k| v.get(k).map(|t| t.eval(&cp, &sp)).unwrap_or(0.0)).collect()
        };
        (eval(&self.num), eval(&self.den))
    }

    /// `G(t, 0)`: leading coefficient of `t'` after the rho power is factored out.
    pub fn g0(&self, theta: f64) -> f64 {
        match self.den.first() {
            Some(d0) => {
                let (cp, sp) = self.powers(theta);
                d0.eval(&cp, &sp) / self.determinant(theta)
            }
            None => 0.0,
        }
    }

    /// Leading coefficients of `(rho', t')` after their rho powers are factored out.
    pub fn leading_rates(&self, theta: f64) -> (f64, f64) {
        let (cp, sp) = self.powers(theta);
        let det = self.determinant(theta);
        let n0 = self.num.first().map(|t| t.eval(&cp, &sp)).unwrap_or(0.0);
        (n0 / det, self.g0(theta))
    }

    /// Powers of rho factored out of `rho'` and `t'`.
    pub fn rate_valuations(&self) -> (Option<i64>, Option<i64>) {
        let pr = (self.weights.wx + self.weights.wy) as i64;
        (self.num_valuation.map(|v| 1 - pr + v as i64), self.den_valuation.map(|v| v as i64 - pr))
    }

    fn check_g(&self, theta: f64) -> Result<()> {
        let g = self.g0(theta);
        if g.abs() < TAU_G {
            return Err(Error::HypothesisViolation {
                theta,
                reason: format!("|G(theta, 0)| = {:e} below {TAU_G:e}", g.abs()),
            });
        }
        Ok(())
    }

    /// `drho/dt` as a jet in rho through `rho^order`.
    pub fn rhs_jet(&self, theta: f64, order: usize) -> Result<Jet> {
        self.check_g(theta)?;
        if self.num.is_empty() {
            return Ok(Jet::zero(order as u32));
        }
        let e = self.exponent.unwrap_or(0);
        if e < 1 {
            return Err(Error::HypothesisViolation {
                theta,
                reason: format!("F(theta, 0) does not vanish (rho exponent {e})"),
            });
        }
        let e = e as usize;
        let (n, d) = self.trig_coeffs(theta, order);
        let mut abs_num = vec![0.0; order + 1];
        for k in 0..=order.saturating_sub(e) {
            if e + k <= order {
                abs_num[e + k] = n[k];
            }
        }
        Jet::from_poly(&abs_num, order as u32).div(&Jet::from_poly(&d, order as u32))
    }

    /// `[R_1(t), ..., R_N(t)]`, the Taylor coefficients of `drho/dt` in rho.
    pub fn radial_coeffs(&self, theta: f64, order: usize) -> Result<Vec<f64>> {
        let jet = self.rhs_jet(theta, order)?;
        Ok((1..=order as u32).map(|k| jet.coeff(k).unwrap_or(0.0)).collect())
    }

    /// `drho/dt` by direct substitution into the field, for `rho > 0`.
    pub fn rhs_direct(&self, theta: f64, rho: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let (p, r) = (self.weights.wx as i32, self.weights.wy as i32);
        let (rp, rr) = (rho.powi(p), rho.powi(r));
        let [pv, qv] = self.field.eval(rp * c, rr * s);
        let n = rr * c * pv + rp * s * qv;
        let d = p as f64 * rp * c * qv - r as f64 * rr * s * pv;
        rho * n / d
    }

    /// Checks `|G(t, 0)| >= TAU_G` on a grid over `[from, to]` (sign changes
    /// between grid points are bisected) and that `F(t, 0) = 0`.
    pub fn hypothesis_h_validate(&self, theta_from: f64, theta_to: f64, grid: usize) -> HypothesisRecord {
        let grid = grid.max(2);
        let mut rec = HypothesisRecord {
            passed: true,
            theta_from,
            theta_to,
            grid,
            min_abs_g: f64::INFINITY,
            theta_at_min: theta_from,
            f_valuation: if self.num.is_empty() { None } else { self.exponent },
            offending_theta: None,
            reason: None,
        };
        let fail = |rec: &mut HypothesisRecord, theta: f64, reason: String| {
            if rec.passed {
                rec.passed = false;
                rec.offending_theta = Some(theta);
                rec.reason = Some(reason);
            }
        };
        if self.den.is_empty() {
            rec.min_abs_g = 0.0;
            fail(&mut rec, theta_from, "the angular component vanishes identically".into());
            return rec;
        }
        if let Some(e) = rec.f_valuation {
            if e < 1 {
                fail(&mut rec, theta_from, format!("F(theta, 0) does not vanish (rho exponent {e})"));
            }
        }
        let at = |k: usize| theta_from + (theta_to - theta_from) * k as f64 / grid as f64;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=grid {
            let th = at(k);
            let g = self.g0(th);
            if g.abs() < rec.min_abs_g {
                rec.min_abs_g = g.abs();
                rec.theta_at_min = th;
            }
            if g.abs() < TAU_G {
                fail(&mut rec, th, format!("|G(theta, 0)| = {:e} below {TAU_G:e}", g.abs()));
            }
            if let Some((t0, g0)) = prev {
                if g0 * g < 0.0 {
                    let (mut a, mut b, ga) = (t0, th, g0);
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        if self.g0(m) * ga > 0.0 {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    let root = 0.5 * (a + b);
                    rec.min_abs_g = 0.0;
                    rec.theta_at_min = root;
                    fail(&mut rec, root, "G(theta, 0) changes sign".into());
                }
            }
            prev = Some((th, g));
        }
        rec
    }

    /// Runs the validation on the half's natural interval and attaches it.
    pub fn validated(mut self, grid: usize) -> Self {
        let to = match self.half {
            Side::Upper => PI,
            Side::Lower => -PI,
        };
        self.validation = Some(self.hypothesis_h_validate(0.0, to, grid));
        self
    }
}
