//! Series transport across each half-plane, half return maps, the glued
//! displacement series and stability verdicts.
//!
//! A half orbit starting at radius `rho0` on `t = 0` reaches `t = ±π` at
//! `rho = u_1 rho0 + u_2 rho0^2 + ...`. The `u_i(t)` solve a triangular
//! ODE system obtained by substituting the series into `drho/dt`.

use std::f64::consts::PI;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::newton::newton_polygon_weights;
use crate::polar::{weighted_polar_ode, HypothesisRecord, PolarOde, DEFAULT_VALIDATION_GRID};
use crate::poly::{center_certificate, CenterCertificate, PlanarField, WeightPair};
use crate::quadrature::quadrature;
use crate::rk::{integrate, RkOptions, RkStats};
use crate::sigma::{PiecewiseField, Side};

pub const DEFAULT_ORDER: usize = 6;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Coefficients at or below this magnitude count as zero.
pub const TAU_COEF: f64 = 1e-9;

/// How the right-hand side of the `u` system is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// `u' = sum_i R_i(t) U^i` with `R_i` from jet division in rho.
    Recursive,
    /// `U^e Ntilde(U) / Dtilde(U)` composed directly on jets in `rho0`.
    Jet,
}

/// Transported coefficients `u_1..u_N` at `theta_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoeffs {
    pub u: Vec<f64>,
    pub theta_end: f64,
    pub route: Route,
    pub stats: RkStats,
}

fn state_jet(u: &[f64]) -> Jet {
    Jet::new(1, u.to_vec())
}

fn rhs(ode: &PolarOde, route: Route, theta: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
    let n = u.len();
    if ode.is_trivial() {
        // still reject angles where the blow-up degenerates
        ode.radial_coeffs(theta, 1)?;
        out.iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }
    let big_u = state_jet(u);
    let order = n as u32;
    let d = match route {
        Route::Recursive => {
            let r = ode.radial_coeffs(theta, n)?;
            let mut c = Vec::with_capacity(n + 1);
            c.push(0.0);
            c.extend(r);
            Jet::compose_poly(&c, &big_u, order)
        }
        Route::Jet => {
            let g = ode.g0(theta);
            if g.abs() < crate::polar::TAU_G {
                return Err(Error::HypothesisViolation { theta, reason: format!("|G(theta, 0)| = {:e}", g.abs()) });
            }
            let e = ode.exponent().unwrap_or(1).max(1) as u32;
            let (nc, dc) = ode.trig_coeffs(theta, n);
            let num = big_u.pow(e).mul(&Jet::compose_poly(&nc, &big_u, order));
            num.div(&Jet::compose_poly(&dc, &big_u, order))?
        }
    };
    for (j, o) in out.iter_mut().enumerate() {
        *o = d.coeff(j as u32 + 1).unwrap_or(0.0);
    }
    Ok(())
}

fn ensure_valid(ode: &PolarOde, from: f64, to: f64) -> Result<()> {
    match &ode.validation {
        Some(rec) if rec.theta_from == from && rec.theta_to == to => rec.clone().into_result().map(|_| ()),
        _ => ode.hypothesis_h_validate(from, to, DEFAULT_VALIDATION_GRID).into_result().map(|_| ()),
    }
}

/// Integrates the `u` system from `u(from) = (1, 0, ..., 0)` to `to`.
pub fn transport_series_route(
    ode: &PolarOde,
    theta_from: f64,
    theta_to: f64,
    order: usize,
    tol: f64,
    route: Route,
) -> Result<SeriesCoeffs> {
    if order == 0 {
        return Err(Error::InvalidArgument("series order must be at least 1".into()));
    }
    ensure_valid(ode, theta_from, theta_to)?;
    let mut u0 = vec![0.0; order];
    u0[0] = 1.0;
    let sol = integrate(|t, u, out| rhs(ode, route, t, u, out), theta_from, theta_to, &u0, &RkOptions::with_tol(tol))?;
    debug!("transport {:?} {:?}: {} steps, u = {:?}", ode.half, route, sol.stats.steps, sol.y);
    Ok(SeriesCoeffs { u: sol.y, theta_end: theta_to, route, stats: sol.stats })
}

/// Transport by the recursive route.
pub fn transport_series(
    ode: &PolarOde,
    theta_from: f64,
    theta_to: f64,
    order: usize,
    tol: f64,
) -> Result<SeriesCoeffs> {
    transport_series_route(ode, theta_from, theta_to, order, tol, Route::Recursive)
}

/// Both routes and their largest scaled disagreement `|a - b| / max(1, |a|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub recursive: SeriesCoeffs,
    pub jet: SeriesCoeffs,
    pub max_difference: f64,
    pub agrees: bool,
}

pub fn transport_cross_check(
    ode: &PolarOde,
    theta_from: f64,
    theta_to: f64,
    order: usize,
    tol: f64,
) -> Result<CrossCheck> {
    let a = transport_series_route(ode, theta_from, theta_to, order, tol, Route::Recursive)?;
    let b = transport_series_route(ode, theta_from, theta_to, order, tol, Route::Jet)?;
    let max_difference = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)).fold(0.0, f64::max);
    let agrees = max_difference <= 10.0 * tol;
    if !agrees {
        warn!("transport routes differ by {max_difference:e} (limit {:e})", 10.0 * tol);
    }
    Ok(CrossCheck { recursive: a, jet: b, max_difference, agrees })
}

/// `exp(int R_1)` over the interval, by quadrature.
pub fn u1_by_quadrature(ode: &PolarOde, theta_from: f64, theta_to: f64, tol: f64) -> Result<f64> {
    let mut failure = None;
    let r = quadrature(
        |t| match ode.radial_coeffs(t, 1) {
            Ok(r) => r[0],
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        theta_from,
        theta_to,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value.exp()),
    }
}

/// `-Π` as a series in `t = x0^(1/weight_x)`: `coeffs[k]` multiplies `t^(weight_x + k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub weight_x: u32,
    pub coeffs: Vec<f64>,
}

impl ReturnSeries {
    /// `Π(x0)` for `x0 > 0`.
    pub fn eval(&self, x0: f64) -> f64 {
        let t = x0.powf(1.0 / self.weight_x as f64);
        -self.coeffs.iter().enumerate().map(|(k, c)| c * t.powi(self.weight_x as i32 + k as i32)).sum::<f64>()
    }
}

/// `-(sum u_i t^i)^p` truncated where the `u_i` stop.
pub fn half_return_series(s: &SeriesCoeffs, weight_x: u32) -> Result<ReturnSeries> {
    let u1 = s.u.first().copied().unwrap_or(0.0);
    if u1.is_nan() || u1 <= 0.0 {
        return Err(Error::NonPositiveLeading { u1 });
    }
    if weight_x == 0 {
        return Err(Error::WeightMismatch(weight_x, weight_x));
    }
    let powered = state_jet(&s.u).pow(weight_x);
    let coeffs = (0..s.u.len() as u32).map(|k| powered.coeff(weight_x + k).unwrap_or(0.0)).collect();
    Ok(ReturnSeries { weight_x, coeffs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    StableFocus,
    UnstableFocus,
    /// Every computed coefficient vanished; no structural proof.
    CenterCandidate {
        order_checked: usize,
    },
    /// Vanishing coefficients backed by certificates on both halves.
    Center,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Counterclockwise,
    /// The input turned clockwise and was reflected by `x -> -x`.
    MirroredFromClockwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSummary {
    pub u_upper: Vec<f64>,
    pub u_lower: Vec<f64>,
    pub stats_upper: RkStats,
    pub stats_lower: RkStats,
    /// Largest disagreement between the two transport routes, if checked.
    pub route_difference: Option<f64>,
    pub routes_agree: Option<bool>,
}

/// Displacement `|Π+(x0)| - |Π-(x0)|` as a series in `w = x0^(1/(pq))`.
/// Positive means orbits move outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub weights_upper: Option<WeightPair>,
    pub weights_lower: Option<WeightPair>,
    pub p: u32,
    pub q: u32,
    pub w_exponents: Vec<u32>,
    pub w_coeffs: Vec<f64>,
    pub leading_index: Option<usize>,
    pub leading_w_exponent: Option<u32>,
    /// Leading power of `x0`, `w_exponent / (pq)`.
    pub leading_x0_exponent: Option<f64>,
    pub leading_sign: i8,
    pub tau_coef: f64,
    pub verdict: Verdict,
    pub certificate_upper: CenterCertificate,
    pub certificate_lower: CenterCertificate,
    pub free_of_limit_cycles: bool,
    pub orientation: Orientation,
    pub upper_series: ReturnSeries,
    pub lower_series: ReturnSeries,
    pub hypothesis_upper: Option<HypothesisRecord>,
    pub hypothesis_lower: Option<HypothesisRecord>,
    pub transport: Option<TransportSummary>,
}

impl DisplacementReport {
    /// Series value at `x0 > 0`.
    pub fn eval(&self, x0: f64) -> f64 {
        let w = x0.powf(1.0 / (self.p * self.q) as f64);
        self.w_exponents.iter().zip(&self.w_coeffs).map(|(&e, c)| c * w.powi(e as i32)).sum()
    }

    /// Coefficient of `w^exponent` (zero below the first exponent, `None` past the truncation).
    pub fn coeff(&self, exponent: u32) -> Option<f64> {
        let first = *self.w_exponents.first()?;
        if exponent < first {
            return Some(0.0);
        }
        self.w_coeffs.get((exponent - first) as usize).copied()
    }

    /// Coefficients in the landing convention `Π+(x0) - Π-(x0)`.
    pub fn landing_coeffs(&self) -> Vec<f64> {
        self.w_coeffs.iter().map(|c| -c).collect()
    }
}

/// Glues the two half maps in `w` with `x0 = w^(pq)` and subtracts.
pub fn displacement_series(upper: &ReturnSeries, lower: &ReturnSeries, tau_coef: f64) -> Result<DisplacementReport> {
    let (p, q) = (upper.weight_x, lower.weight_x);
    if p == 0 || q == 0 {
        return Err(Error::WeightMismatch(p, q));
    }
    let n_up = upper.coeffs.len() as u32;
    let n_lo = lower.coeffs.len() as u32;
    if n_up == 0 || n_lo == 0 {
        return Err(Error::InvalidArgument("empty half-map series".into()));
    }
    let first = p * q;
    let last = (q * (p + n_up - 1)).min(p * (q + n_lo - 1));
    let mut coeffs = vec![0.0; (last - first + 1) as usize];
    for (k, c) in upper.coeffs.iter().enumerate() {
        let e = q * (p + k as u32);
        if e <= last {
            coeffs[(e - first) as usize] += c;
        }
    }
    for (k, c) in lower.coeffs.iter().enumerate() {
        let e = p * (q + k as u32);
        if e <= last {
            coeffs[(e - first) as usize] -= c;
        }
    }
    let exps: Vec<u32> = (first..=last).collect();
    let leading_index = coeffs.iter().position(|c| c.abs() > tau_coef);
    let leading_sign = leading_index.map(|i| coeffs[i].signum() as i8).unwrap_or(0);
    let verdict = match leading_sign {
        -1 => Verdict::StableFocus,
        1 => Verdict::UnstableFocus,
        _ => Verdict::CenterCandidate { order_checked: coeffs.len() },
    };
    Ok(DisplacementReport {
        weights_upper: None,
        weights_lower: None,
        p,
        q,
        leading_w_exponent: leading_index.map(|i| exps[i]),
        leading_x0_exponent: leading_index.map(|i| exps[i] as f64 / first as f64),
        w_exponents: exps,
        w_coeffs: coeffs,
        leading_index,
        leading_sign,
        tau_coef,
        free_of_limit_cycles: leading_sign != 0,
        verdict,
        certificate_upper: CenterCertificate::None,
        certificate_lower: CenterCertificate::None,
        orientation: Orientation::Counterclockwise,
        upper_series: upper.clone(),
        lower_series: lower.clone(),
        hypothesis_upper: None,
        hypothesis_lower: None,
        transport: None,
    })
}

/// Attaches certificates and upgrades a center candidate when both halves carry one.
pub fn stability_verdict(
    mut r: DisplacementReport,
    certificates: (CenterCertificate, CenterCertificate),
) -> DisplacementReport {
    r.certificate_upper = certificates.0;
    r.certificate_lower = certificates.1;
    r.verdict = match r.leading_sign {
        -1 => Verdict::StableFocus,
        1 => Verdict::UnstableFocus,
        _ if r.w_coeffs.is_empty() => Verdict::Undetermined,
        _ if r.certificate_upper.is_some() && r.certificate_lower.is_some() => Verdict::Center,
        _ => Verdict::CenterCandidate { order_checked: r.w_coeffs.len() },
    };
    r.free_of_limit_cycles = matches!(r.verdict, Verdict::StableFocus | Verdict::UnstableFocus | Verdict::Center);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub order: usize,
    pub tol: f64,
    pub tau_coef: f64,
    /// Explicit `(upper, lower)` weights; found automatically when `None`.
    pub weights: Option<(WeightPair, WeightPair)>,
    pub grid: usize,
    /// Also run the jet route and record the agreement.
    pub cross_check: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            tol: DEFAULT_TOL,
            tau_coef: TAU_COEF,
            weights: None,
            grid: DEFAULT_VALIDATION_GRID,
            cross_check: true,
        }
    }
}

/// Sign of the angular speed over a half, `+1` for counterclockwise.
fn turning_sign(ode: &PolarOde, from: f64, to: f64) -> f64 {
    let total: f64 = (0..=32).map(|k| ode.g0(from + (to - from) * k as f64 / 32.0)).sum();
    total.signum()
}

/// Half-field blow-ups for `w`: the upper one forward, the lower one reversed.
pub fn half_odes(w: &PiecewiseField, weights: (WeightPair, WeightPair)) -> (PolarOde, PolarOde) {
    (
        weighted_polar_ode(&w.upper, weights.0, Side::Upper, false),
        weighted_polar_ode(&w.lower, weights.1, Side::Lower, true),
    )
}

/// Weights for both halves from fold orders or the Newton polygon.
pub fn auto_weights(w: &PiecewiseField) -> Result<(WeightPair, WeightPair)> {
    Ok((newton_polygon_weights(&w.upper, true)?, newton_polygon_weights(&w.lower, true)?))
}

/// Reflects a clockwise system so that both halves turn counterclockwise.
pub fn normalize_orientation(
    w: &PiecewiseField,
    weights: (WeightPair, WeightPair),
) -> Result<(PiecewiseField, Orientation)> {
    let (up, lo) = half_odes(w, weights);
    let su = turning_sign(&up, 0.0, PI);
    // the lower ODE is reversed, so counterclockwise shows up as a negative sign
    let sl = -turning_sign(&lo, 0.0, -PI);
    match (su > 0.0, sl > 0.0) {
        (true, true) => Ok((w.clone(), Orientation::Counterclockwise)),
        (false, false) if su < 0.0 && sl < 0.0 => Ok((
            PiecewiseField::with_switch(w.upper.mirrored(), w.lower.mirrored(), w.switch.clone()),
            Orientation::MirroredFromClockwise,
        )),
        _ => Err(Error::OrientationMismatch(format!(
            "upper half turns {}, lower half turns {}",
            if su > 0.0 { "counterclockwise" } else { "clockwise" },
            if sl > 0.0 { "counterclockwise" } else { "clockwise" }
        ))),
    }
}

/// Full pipeline: weights, blow-up validation, transport, half maps,
/// displacement and verdict. The switching curve must be `y = 0`.
pub fn analyze(w: &PiecewiseField, opts: &AnalysisOptions) -> Result<DisplacementReport> {
    if !w.switch_is_axis() {
        return Err(Error::SwitchNotAxis);
    }
    let weights = match opts.weights {
        Some(ws) => ws,
        None => auto_weights(w)?,
    };
    let (w, orientation) = normalize_orientation(w, weights)?;
    let (up, lo) = half_odes(&w, weights);
    let up = up.validated(opts.grid);
    let lo = lo.validated(opts.grid);
    let rec_up = up.validation.clone().unwrap();
    let rec_lo = lo.validation.clone().unwrap();
    rec_up.clone().into_result()?;
    rec_lo.clone().into_result()?;

    let (su, sl, diff) = if opts.cross_check {
        let cu = transport_cross_check(&up, 0.0, PI, opts.order, opts.tol)?;
        let cl = transport_cross_check(&lo, 0.0, -PI, opts.order, opts.tol)?;
        let d = cu.max_difference.max(cl.max_difference);
        (cu.recursive, cl.recursive, Some(d))
    } else {
        (
            transport_series(&up, 0.0, PI, opts.order, opts.tol)?,
            transport_series(&lo, 0.0, -PI, opts.order, opts.tol)?,
            None,
        )
    };
    let upper = half_return_series(&su, weights.0.wx)?;
    let lower = half_return_series(&sl, weights.1.wx)?;
    let mut report = displacement_series(&upper, &lower, opts.tau_coef)?;
    report.weights_upper = Some(weights.0);
    report.weights_lower = Some(weights.1);
    report.orientation = orientation;
    report.hypothesis_upper = Some(rec_up);
    report.hypothesis_lower = Some(rec_lo);
    report.transport = Some(TransportSummary {
        u_upper: su.u.clone(),
        u_lower: sl.u.clone(),
        stats_upper: su.stats,
        stats_lower: sl.stats,
        route_difference: diff,
        routes_agree: diff.map(|d| d <= 10.0 * opts.tol),
    });
    Ok(stability_verdict(report, (center_certificate(&w.upper), center_certificate(&w.lower))))
}

/// Certificates for both halves of a system.
pub fn certificates(w: &PiecewiseField) -> (CenterCertificate, CenterCertificate) {
    (center_certificate(&w.upper), center_certificate(&w.lower))
}

/// Field from term lists, used by tests and case studies.
pub fn field_from_terms(p: &[(u32, u32, f64)], q: &[(u32, u32, f64)]) -> PlanarField {
    use crate::poly::BiPoly;
    PlanarField::new(BiPoly::from_terms(p.iter().copied()), BiPoly::from_terms(q.iter().copied()))
}
