//! Pointwise classification of the switching curve, fold detection, the
//! Filippov sliding field and the monodromy test for Σ-singular points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{lie_chain, lie_derivative, BiPoly, PlanarField};

/// "Equals zero" threshold for Lie-derivative values and field magnitudes.
pub const TAU_ZERO: f64 = 1e-10;
/// Highest Lie derivative tried when looking for a fold order.
pub const DEFAULT_MAX_ORDER: usize = 12;
pub const DEFAULT_SIGN_RADIUS: f64 = 0.1;
pub const DEFAULT_SIGN_SAMPLES: usize = 64;
/// Tolerance on `|f(pt)|` for a point to count as lying on Σ.
pub const SIGMA_TOL: f64 = 1e-10;

/// Piecewise field: `upper` on `f > 0`, `lower` on `f < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseField {
    pub upper: PlanarField,
    pub lower: PlanarField,
    #[serde(default = "BiPoly::y")]
    pub switch: BiPoly,
}

impl PiecewiseField {
    /// Switching curve `y = 0`.
    pub fn new(upper: PlanarField, lower: PlanarField) -> Self {
        Self { upper, lower, switch: BiPoly::y() }
    }

    pub fn with_switch(upper: PlanarField, lower: PlanarField, switch: BiPoly) -> Self {
        Self { upper, lower, switch }
    }

    pub fn switch_is_axis(&self) -> bool {
        self.switch.approx_eq(&BiPoly::y())
    }

    pub fn field(&self, side: Side) -> &PlanarField {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    /// `(X+f, X-f)` at a point.
    pub fn normal_components(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = self.switch.dx().eval(x, y);
        let fy = self.switch.dy().eval(x, y);
        let [pu, qu] = self.upper.eval(x, y);
        let [pl, ql] = self.lower.eval(x, y);
        (fx * pu + fy * qu, fx * pl + fy * ql)
    }

    pub fn scale(&self, k_upper: f64, k_lower: f64) -> Self {
        Self::with_switch(self.upper.scale(k_upper), self.lower.scale(k_lower), self.switch.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Sewing,
    Sliding,
    Escaping,
    TangentUpper,
    TangentLower,
    TangentBoth,
    SigmaSingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldInfo {
    pub order: usize,
    pub visible: bool,
    /// `X^n f` at the point.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonodromyCase {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    Ii,
    #[serde(rename = "iii")]
    Iii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Monodromy {
    Monodromic { case: MonodromyCase, evidence: String },
    NotMonodromic { reason: String },
    Undetermined { reason: String },
}

impl Monodromy {
    pub fn is_monodromic(&self) -> bool {
        matches!(self, Monodromy::Monodromic { .. })
    }

    pub fn case(&self) -> Option<MonodromyCase> {
        match self {
            Monodromy::Monodromic { case, .. } => Some(*case),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPointReport {
    pub point: [f64; 2],
    pub region: Region,
    pub upper_normal: f64,
    pub lower_normal: f64,
    pub fold_upper: Option<FoldInfo>,
    pub fold_lower: Option<FoldInfo>,
    /// Set for a field that vanishes at the point.
    pub singular_upper: bool,
    pub singular_lower: bool,
    pub sliding: Option<SlidingVector>,
    pub monodromy: Monodromy,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingVector {
    pub vx: f64,
    pub vy: f64,
    /// Weight of `X+` in the convex combination.
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyOptions {
    pub max_order: usize,
    pub assert_no_char_orbit_upper: bool,
    pub assert_no_char_orbit_lower: bool,
    pub sign_radius: f64,
    pub sign_samples: usize,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
            assert_no_char_orbit_upper: false,
            assert_no_char_orbit_lower: false,
            sign_radius: DEFAULT_SIGN_RADIUS,
            sign_samples: DEFAULT_SIGN_SAMPLES,
        }
    }
}

/// Outcome of the sampled neighbourhood test `X+f * X-f > 0` on Σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCheck {
    pub passed: bool,
    pub samples: usize,
    pub first_violation: Option<[f64; 2]>,
    pub violation_product: Option<f64>,
}

fn check_on_sigma(switch: &BiPoly, pt: [f64; 2]) -> Result<()> {
    let value = switch.eval(pt[0], pt[1]);
    if value.abs() >= SIGMA_TOL {
        return Err(Error::NotOnSigma { x: pt[0], y: pt[1], value });
    }
    let gx = switch.dx().eval(pt[0], pt[1]);
    let gy = switch.dy().eval(pt[0], pt[1]);
    if gx.hypot(gy) < TAU_ZERO {
        return Err(Error::SingularSwitch { x: pt[0], y: pt[1] });
    }
    Ok(())
}

/// Region, folds and monodromy verdict at a point of Σ.
pub fn classify_point(w: &PiecewiseField, pt: [f64; 2], opts: &MonodromyOptions) -> Result<SigmaPointReport> {
    check_on_sigma(&w.switch, pt)?;
    let (up, lo) = w.normal_components(pt[0], pt[1]);
    let tangent_up = up.abs() < TAU_ZERO;
    let tangent_lo = lo.abs() < TAU_ZERO;
    let mut evidence = vec![format!("X+f = {up:e}, X-f = {lo:e}")];

    let mut region = match (tangent_up, tangent_lo) {
        (true, true) => Region::TangentBoth,
        (true, false) => Region::TangentUpper,
        (false, true) => Region::TangentLower,
        _ if up * lo > 0.0 => Region::Sewing,
        _ if up < 0.0 => Region::Sliding,
        _ => Region::Escaping,
    };

    let mut sliding = None;
    if matches!(region, Region::Sliding | Region::Escaping) {
        let v = sliding_field(w, pt)?;
        if v.vx.hypot(v.vy) < TAU_ZERO {
            evidence.push("sliding field vanishes: pseudo-equilibrium".into());
            region = Region::SigmaSingular;
        }
        sliding = Some(v);
    }

    let mut folds = [None, None];
    let mut singular = [false, false];
    for (k, side, tangent) in [(0, Side::Upper, tangent_up), (1, Side::Lower, tangent_lo)] {
        if !tangent {
            continue;
        }
        match fold_order(w.field(side), &w.switch, pt, side, opts.max_order) {
            Ok(fold) => folds[k] = fold,
            Err(Error::SingularPoint { .. }) => {
                singular[k] = true;
                evidence.push(format!("{} field vanishes at the point", side.name()));
            }
            Err(Error::OrderExceeded { max_order }) => {
                evidence.push(format!("{}: no nonzero Lie derivative up to order {max_order}", side.name()))
            }
            Err(e) => return Err(e),
        }
    }

    let monodromy = monodromy_verdict(w, pt, opts);
    Ok(SigmaPointReport {
        point: pt,
        region,
        upper_normal: up,
        lower_normal: lo,
        fold_upper: folds[0],
        fold_lower: folds[1],
        singular_upper: singular[0],
        singular_lower: singular[1],
        sliding,
        monodromy,
        evidence,
    })
}

/// Smallest `n` with `X^n f(pt) != 0`, with visibility for the given side.
/// `Ok(None)` when the field is transversal (`n = 1`).
pub fn fold_order(x: &PlanarField, f: &BiPoly, pt: [f64; 2], side: Side, max_order: usize) -> Result<Option<FoldInfo>> {
    let [p, q] = x.eval(pt[0], pt[1]);
    if p.hypot(q) < TAU_ZERO {
        return Err(Error::SingularPoint { x: pt[0], y: pt[1] });
    }
    let chain = lie_chain(x, f, max_order.max(1));
    let values: Vec<f64> = chain.iter().map(|d| d.eval(pt[0], pt[1])).collect();
    if values[0].abs() >= TAU_ZERO {
        return Ok(None);
    }
    let n = values.iter().position(|v| v.abs() >= TAU_ZERO).ok_or(Error::OrderExceeded { max_order })?;
    let value = values[n];
    let visible = match side {
        Side::Upper => value > 0.0,
        Side::Lower => value < 0.0,
    };
    Ok(Some(FoldInfo { order: n + 1, visible, value }))
}

/// Filippov vector `(X-f X+ - X+f X-) / (X-f - X+f)` on a sliding or
/// escaping point.
pub fn sliding_field(w: &PiecewiseField, pt: [f64; 2]) -> Result<SlidingVector> {
    let (up, lo) = w.normal_components(pt[0], pt[1]);
    let product = up * lo;
    if product.is_nan() || product >= 0.0 {
        return Err(Error::NotSlidingRegion { product });
    }
    let lambda = lo / (lo - up);
    let [pu, qu] = w.upper.eval(pt[0], pt[1]);
    let [pl, ql] = w.lower.eval(pt[0], pt[1]);
    Ok(SlidingVector { vx: lambda * pu + (1.0 - lambda) * pl, vy: lambda * qu + (1.0 - lambda) * ql, lambda })
}

/// Points of Σ at arc distance `k * radius / half` from `pt`, `k = 1..=half`,
/// in the direction `dir` (+1 or -1) of the unit tangent `(-f_y, f_x)`.
fn trace_sigma(f: &BiPoly, pt: [f64; 2], radius: f64, half: usize, dir: f64) -> Vec<[f64; 2]> {
    let (fx, fy) = (f.dx(), f.dy());
    let sub = 8;
    let h = radius / (half * sub) as f64;
    let mut z = pt;
    let mut out = Vec::with_capacity(half);
    for k in 0..half * sub {
        let (gx, gy) = (fx.eval(z[0], z[1]), fy.eval(z[0], z[1]));
        let g = gx.hypot(gy);
        if g < TAU_ZERO {
            break;
        }
        z = [z[0] - dir * h * gy / g, z[1] + dir * h * gx / g];
        for _ in 0..20 {
            let v = f.eval(z[0], z[1]);
            let (gx, gy) = (fx.eval(z[0], z[1]), fy.eval(z[0], z[1]));
            let g2 = gx * gx + gy * gy;
            if g2 == 0.0 {
                break;
            }
            z = [z[0] - v * gx / g2, z[1] - v * gy / g2];
            if v.abs() < 1e-15 {
                break;
            }
        }
        if (k + 1) % sub == 0 {
            out.push(z);
        }
    }
    out
}

/// Sampled test of `X+f * X-f > 0` on the punctured arc of Σ of half-length
/// `radius` around `pt`.
pub fn sign_condition_check(w: &PiecewiseField, pt: [f64; 2], radius: f64, samples: usize) -> SignCheck {
    let half = (samples / 2).max(1);
    let points: Vec<[f64; 2]> = if w.switch_is_axis() {
        (1..=half)
            .flat_map(|k| {
                let d = radius * k as f64 / half as f64;
                [[pt[0] - d, pt[1]], [pt[0] + d, pt[1]]]
            })
            .collect()
    } else {
        let left = trace_sigma(&w.switch, pt, radius, half, -1.0);
        let right = trace_sigma(&w.switch, pt, radius, half, 1.0);
        left.into_iter().zip(right).flat_map(|(a, b)| [a, b]).collect()
    };
    for s in &points {
        let (up, lo) = w.normal_components(s[0], s[1]);
        let product = up * lo;
        if product.is_nan() || product <= 0.0 {
            return SignCheck {
                passed: false,
                samples: points.len(),
                first_violation: Some(*s),
                violation_product: Some(product),
            };
        }
    }
    SignCheck { passed: true, samples: points.len(), first_violation: None, violation_product: None }
}

/// Real roots of `sum a_k t^k` (coefficients lowest first), isolated between
/// the real critical points and refined by bisection.
fn real_roots(a: &[f64]) -> Vec<f64> {
    let scale = a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let Some(d) = a.iter().rposition(|c| c.abs() > 1e-12 * scale) else {
        return Vec::new();
    };
    let a = &a[..=d];
    match d {
        0 => return Vec::new(),
        1 => return vec![-a[0] / a[1]],
        _ => {}
    }
    let eval = |t: f64| a.iter().rev().fold(0.0, |acc, c| acc * t + c);
    let size = |t: f64| a.iter().enumerate().map(|(k, c)| c.abs() * t.abs().powi(k as i32)).sum::<f64>();
    let deriv: Vec<f64> = (1..=d).map(|k| k as f64 * a[k]).collect();
    let bound = 1.0 + a[..d].iter().fold(0.0f64, |m, c| m.max((c / a[d]).abs()));
    let mut knots = vec![-bound];
    knots.extend(real_roots(&deriv).into_iter().filter(|t| t.abs() < bound));
    knots.push(bound);
    knots.sort_by(f64::total_cmp);

    let mut roots = Vec::new();
    for &c in &knots[1..knots.len() - 1] {
        if eval(c).abs() <= 1e-12 * size(c) {
            roots.push(c);
        }
    }
    for win in knots.windows(2) {
        let (mut lo, mut hi) = (win[0], win[1]);
        let (flo, fhi) = (eval(lo), eval(hi));
        if flo * fhi >= 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(mid) * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * (1.0 + a.abs()));
    roots
}

/// Angles in `[0, 2π)` where `cos θ Q_m - sin θ P_m` vanishes, for the lowest
/// homogeneous part `(P_m, Q_m)` of the field at `pt`.
pub fn characteristic_directions(x: &PlanarField, pt: [f64; 2]) -> Result<Vec<f64>> {
    let local = x.translate(pt[0], pt[1]);
    let tol = 1e-12 * local.max_abs_coeff().max(1.0);
    let p = local.p.pruned(tol);
    let q = local.q.pruned(tol);
    let m = p.terms().chain(q.terms()).map(|(i, j, _)| i + j).filter(|&d| d > 0).min().ok_or(Error::ZeroLeadingPart)?;
    let (pm, qm) = (p.homogeneous_part(m), q.homogeneous_part(m));
    // R(c, s) = c Q_m - s P_m, homogeneous of degree m + 1
    let r = &qm.shift(1, 0, 1.0) - &pm.shift(0, 1, 1.0);
    if r.is_zero_within(tol) {
        return Err(Error::AllDirectionsCharacteristic);
    }
    let deg = (m + 1) as usize;
    let mut a = vec![0.0; deg + 1];
    for (i, j, c) in r.terms() {
        debug_assert_eq!((i + j) as usize, deg);
        a[j as usize] = c;
    }
    let rscale = a.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let mut angles = Vec::new();
    if a[deg].abs() <= 1e-12 * rscale {
        angles.extend([PI / 2.0, 3.0 * PI / 2.0]);
    }
    for t in real_roots(&a) {
        let th = t.atan().rem_euclid(PI);
        angles.extend([th, th + PI]);
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|b, a| (*b - *a).abs() < 1e-9);
    if angles.len() > 1 && angles[0] < 1e-9 && (2.0 * PI - angles[angles.len() - 1]) < 1e-9 {
        angles.pop();
    }
    Ok(angles)
}

/// Linear part of a field at a singular point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearPart {
    Zero,
    Nilpotent,
    Complex { alpha: f64, beta: f64 },
    Real { lambda1: f64, lambda2: f64 },
}

pub fn linear_part(x: &PlanarField, pt: [f64; 2]) -> LinearPart {
    let [[a, b], [c, d]] = x.jacobian(pt[0], pt[1]);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale < TAU_ZERO {
        return LinearPart::Zero;
    }
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr - 4.0 * det;
    if disc < -TAU_ZERO * scale * scale {
        return LinearPart::Complex { alpha: tr / 2.0, beta: (-disc).sqrt() / 2.0 };
    }
    if det.abs() < TAU_ZERO * scale * scale && tr.abs() < TAU_ZERO * scale {
        return LinearPart::Nilpotent;
    }
    let sq = disc.max(0.0).sqrt();
    LinearPart::Real { lambda1: (tr - sq) / 2.0, lambda2: (tr + sq) / 2.0 }
}

enum SideStatus {
    Accepted(String),
    Rejected(String),
    Unknown(String),
}

fn side_status(w: &PiecewiseField, pt: [f64; 2], side: Side, opts: &MonodromyOptions) -> (SideStatus, bool) {
    let x = w.field(side);
    let name = side.name();
    match fold_order(x, &w.switch, pt, side, opts.max_order) {
        Ok(Some(fold)) => {
            let status = if fold.order % 2 == 1 {
                SideStatus::Rejected(format!("{name} fold has odd order {}", fold.order))
            } else if fold.visible {
                SideStatus::Rejected(format!("{name} fold of order {} is visible", fold.order))
            } else {
                SideStatus::Accepted(format!(
                    "{name}: invisible fold of order {} (X^{}f = {})",
                    fold.order, fold.order, fold.value
                ))
            };
            (status, false)
        }
        Ok(None) => (SideStatus::Rejected(format!("{name} field is transversal to the switching curve")), false),
        Err(Error::OrderExceeded { max_order }) => {
            (SideStatus::Unknown(format!("{name}: no nonzero Lie derivative up to order {max_order}")), false)
        }
        Err(_) => {
            let flag = match side {
                Side::Upper => opts.assert_no_char_orbit_upper,
                Side::Lower => opts.assert_no_char_orbit_lower,
            };
            let status = match linear_part(x, pt) {
                LinearPart::Complex { alpha, beta } => {
                    SideStatus::Accepted(format!("{name}: singular point with eigenvalues {alpha} ± {beta}i"))
                }
                LinearPart::Real { lambda1, lambda2 } if lambda1.abs() > TAU_ZERO && lambda2.abs() > TAU_ZERO => {
                    SideStatus::Rejected(format!(
                        "{name}: elementary singular point with real eigenvalues {lambda1}, {lambda2}"
                    ))
                }
                _ => match characteristic_directions(x, pt) {
                    Ok(dirs) if dirs.is_empty() => {
                        SideStatus::Accepted(format!("{name}: singular point without characteristic directions"))
                    }
                    _ if flag => SideStatus::Accepted(format!("{name}: no characteristic orbit asserted by the user")),
                    Ok(dirs) => SideStatus::Unknown(format!(
                        "{name}: degenerate singular point with characteristic directions {dirs:?}; \
                         absence of characteristic orbits cannot be decided"
                    )),
                    Err(e) => SideStatus::Unknown(format!("{name}: {e}")),
                },
            };
            (status, true)
        }
    }
}

/// Monodromy verdict at a tangency point of both fields.
pub fn monodromy_verdict(w: &PiecewiseField, pt: [f64; 2], opts: &MonodromyOptions) -> Monodromy {
    if let Err(e) = check_on_sigma(&w.switch, pt) {
        return Monodromy::NotMonodromic { reason: e.to_string() };
    }
    let (up, lo) = w.normal_components(pt[0], pt[1]);
    if up.abs() >= TAU_ZERO || lo.abs() >= TAU_ZERO {
        return Monodromy::NotMonodromic {
            reason: format!("not a tangency of both fields: X+f = {up:e}, X-f = {lo:e}"),
        };
    }
    let check = sign_condition_check(w, pt, opts.sign_radius, opts.sign_samples);
    if !check.passed {
        let s = check.first_violation.unwrap_or(pt);
        return Monodromy::NotMonodromic {
            reason: format!(
                "X+f * X-f = {:e} <= 0 at ({}, {}) near the point",
                check.violation_product.unwrap_or(0.0),
                s[0],
                s[1]
            ),
        };
    }

    let (upper, sing_up) = side_status(w, pt, Side::Upper, opts);
    let (lower, sing_lo) = side_status(w, pt, Side::Lower, opts);
    let mut accepted = Vec::new();
    let mut unknown = Vec::new();
    for status in [upper, lower] {
        match status {
            SideStatus::Rejected(reason) => return Monodromy::NotMonodromic { reason },
            SideStatus::Unknown(reason) => unknown.push(reason),
            SideStatus::Accepted(ev) => accepted.push(ev),
        }
    }
    if !unknown.is_empty() {
        return Monodromy::Undetermined { reason: unknown.join("; ") };
    }
    let case = match (sing_up, sing_lo) {
        (false, false) => MonodromyCase::I,
        (true, true) => MonodromyCase::Iii,
        _ => MonodromyCase::Ii,
    };
    Monodromy::Monodromic { case, evidence: accepted.join("; ") }
}

/// `X^k f` evaluated at a point for `k = 1..=n`.
pub fn lie_values(x: &PlanarField, f: &BiPoly, pt: [f64; 2], n: usize) -> Vec<f64> {
    let mut cur = f.clone();
    (0..n)
        .map(|_| {
            cur = lie_derivative(x, &cur);
            cur.eval(pt[0], pt[1])
        })
        .collect()
}
