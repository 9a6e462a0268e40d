//! Direct integration with switching-curve events: numeric half maps, the
//! numeric displacement and a Filippov trajectory simulator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{BiPoly, PlanarField};
use crate::rk::{dp5_step, next_step};
use crate::sigma::{lie_values, sliding_field, PiecewiseField, Side};

/// Landing residual target for event refinement.
pub const EPS_EVENT: f64 = 1e-12;
/// Accepted-step minimum of `|f|` below which a touch counts as a graze.
pub const EPS_GRAZE: f64 = 1e-10;
/// Shots refuse starting abscissas closer to the origin than this.
pub const NEAR_ORIGIN_CUTOFF: f64 = 1e-6;
pub const DEFAULT_T_MAX: f64 = 1e12;
const MAX_STEPS: usize = 2_000_000;
const MAX_REFINE: usize = 200;
/// Lie-derivative depth used to decide which way an orbit leaves Σ.
const LEAVE_ORDER: usize = 8;
/// Relative cutoff on `X^k f` when deciding the leaving direction.
const LEAVE_TOL: f64 = 1e-10;
const LAMBDA_EXIT: f64 = 1e-10;
/// Simulations stop once a coordinate exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e6;

fn diverged(z: &[f64]) -> bool {
    z.iter().any(|v| v.is_nan() || v.abs() > DIVERGENCE_BOUND)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub landing_x: f64,
    pub flight_time: f64,
    pub steps: usize,
    /// `|y|` at the refined landing point.
    pub event_refinement_error: f64,
}

/// Adaptive DP5 stepper whose error scale for each component is the
/// largest magnitude that component has reached so far. Shots near a
/// degenerate point have `y` many orders smaller than `x`, so a shared
/// absolute floor would leave `y` uncontrolled.
struct Stepper {
    tol: f64,
    amp: Vec<f64>,
    /// Error floor as a fraction of the largest amplitude.
    floor_rel: f64,
    h: f64,
}

impl Stepper {
    fn new(tol: f64, y0: &[f64]) -> Self {
        Self { tol, amp: y0.iter().map(|v| v.abs()).collect(), floor_rel: 1e-30, h: 0.0 }
    }

    /// Error measured against the overall size of the state.
    fn uniform(tol: f64, y0: &[f64]) -> Self {
        Self { floor_rel: tol, ..Self::new(tol, y0) }
    }

    fn norm(&self, err: &[f64], y0: &[f64], y1: &[f64]) -> f64 {
        let size = self.amp.iter().chain(y0).chain(y1).fold(0.0, |m: f64, a| m.max(a.abs()));
        let floor = size * self.floor_rel + 1e-300;
        (0..err.len())
            .map(|i| err[i].abs() / (self.tol * self.amp[i].max(y0[i].abs()).max(y1[i].abs()) + floor))
            .fold(0.0, f64::max)
    }

    /// One accepted step of at most `h_cap`; returns `(h_used, y_new)`.
    fn step<F>(&mut self, f: &mut F, t: f64, y: &[f64], h_cap: f64) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        if self.h == 0.0 {
            self.h = initial_step(f, y)?;
        }
        loop {
            if self.h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StallAtTangency { x: y[0], y: y[1] });
            }
            let h = self.h.min(h_cap);
            let (y5, err) = dp5_step(f, t, y, h)?;
            let norm = self.norm(&err, y, &y5);
            if norm.is_finite() && norm <= 1.0 {
                self.h = next_step(h, norm);
                for (a, v) in self.amp.iter_mut().zip(&y5) {
                    *a = a.max(v.abs());
                }
                return Ok((h, y5));
            }
            self.h = if norm.is_finite() { next_step(h, norm) } else { 0.2 * h };
        }
    }
}

/// Step that moves the state by about 1e-3 of its size.
fn initial_step<F>(f: &mut F, y: &[f64]) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut d = vec![0.0; y.len()];
    f(0.0, y, &mut d)?;
    let size = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let speed = d.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(if size == 0.0 || speed == 0.0 { 1e-6 } else { 1e-3 * size / speed })
}

fn field_rhs(x: &PlanarField, sign: f64) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + '_ {
    move |_, y, d| {
        let [p, q] = x.eval(y[0], y[1]);
        d[0] = sign * p;
        d[1] = sign * q;
        Ok(())
    }
}

/// Root of `g(h)` on `(0, hi]` given `g(0) * g(hi) <= 0`, by Illinois
/// false position with bisection fallback. Stops once `|g| <= eps` or the
/// bracket has collapsed to rounding. Returns `(h, state)`.
fn refine<F, G>(f: &mut F, g: G, t: f64, y: &[f64], hi: f64, eps: f64) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: Fn(&[f64]) -> f64,
{
    let (mut a, mut ga) = (0.0, g(y));
    let mut b = hi;
    let mut yb = dp5_step(f, t, y, b)?.0;
    let mut gb = g(&yb);
    let mut side = 0i8;
    for it in 0..MAX_REFINE {
        if gb.abs() <= eps {
            return Ok((b, yb));
        }
        let c = if it % 8 == 7 || ga == gb { 0.5 * (a + b) } else { (a * gb - b * ga) / (gb - ga) };
        let c = if c <= a.min(b) || c >= a.max(b) { 0.5 * (a + b) } else { c };
        let yc = dp5_step(f, t, y, c)?.0;
        let gc = g(&yc);
        if gc.abs() <= eps {
            return Ok((c, yc));
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            yb = yc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = b;
            ga = gb;
            b = c;
            gb = gc;
            yb = yc;
            side = -1;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * hi {
            return Ok((b, yb));
        }
    }
    Ok((b, yb))
}

/// Integrates `X` from `start` until it next crosses `{y = 0}`. A start on
/// the axis must leave it on the first step.
pub fn integrate_to_section(x: &PlanarField, start: [f64; 2], tol: f64, t_max: f64) -> Result<ShootResult> {
    integrate_signed(x, 1.0, start, tol, t_max)
}

fn integrate_signed(x: &PlanarField, sign: f64, start: [f64; 2], tol: f64, t_max: f64) -> Result<ShootResult> {
    let mut rhs = field_rhs(x, sign);
    let mut st = Stepper::new(tol, &start);
    let (mut t, mut y) = (0.0, start.to_vec());
    let mut leaving = start[1] == 0.0;
    let side = if leaving {
        let q = sign * x.eval(start[0], 0.0)[1];
        if q == 0.0 {
            return Err(Error::StallAtTangency { x: start[0], y: 0.0 });
        }
        q.signum()
    } else {
        start[1].signum()
    };
    let mut steps = 0;
    while t < t_max {
        if steps >= MAX_STEPS {
            return Err(Error::NoReturn { t_max: t });
        }
        let (mut h, mut yn) = st.step(&mut rhs, t, &y, t_max - t)?;
        steps += 1;
        if leaving {
            h = first_step_off(&mut rhs, &y, h, &mut yn, |z| side * z[1])?;
            st.h = st.h.min(2.0 * h);
            leaving = false;
        } else if yn[1] * side <= 0.0 {
            let (hc, yc) = refine(&mut rhs, |s| s[1], t, &y, h, 0.0)?;
            return Ok(ShootResult {
                landing_x: yc[0],
                flight_time: t + hc,
                steps,
                event_refinement_error: yc[1].abs(),
            });
        }
        t += h;
        y = yn;
    }
    Err(Error::NoReturn { t_max })
}

/// Halves a step off Σ until it ends strictly on the intended side
/// (`g > 0`); a step that overshoots a return would otherwise hide it.
fn first_step_off<F, G>(f: &mut F, y: &[f64], mut h: f64, yn: &mut Vec<f64>, g: G) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: Fn(&[f64]) -> f64,
{
    let mut tries = 0;
    while g(yn) <= 0.0 {
        tries += 1;
        if tries > 60 {
            return Err(Error::StallAtTangency { x: y[0], y: y[1] });
        }
        h *= 0.5;
        *yn = dp5_step(f, 0.0, y, h)?.0;
    }
    Ok(h)
}

fn check_cutoff(x0: f64) -> Result<()> {
    if x0.abs() < NEAR_ORIGIN_CUTOFF {
        return Err(Error::BelowCutoff { x0, cutoff: NEAR_ORIGIN_CUTOFF });
    }
    Ok(())
}

/// Landing abscissa of the half map started at `(x0, 0)`. The lower field
/// is run backwards in time so both halves share the same orientation.
pub fn numeric_half_map(w: &PiecewiseField, x0: f64, side: Side, tol: f64) -> Result<f64> {
    Ok(shoot_half(w, x0, side, tol)?.landing_x)
}

/// Full shot record for one half map.
pub fn shoot_half(w: &PiecewiseField, x0: f64, side: Side, tol: f64) -> Result<ShootResult> {
    if !w.switch_is_axis() {
        return Err(Error::SwitchNotAxis);
    }
    check_cutoff(x0)?;
    let (field, sign) = match side {
        Side::Upper => (&w.upper, 1.0),
        Side::Lower => (&w.lower, -1.0),
    };
    let [_, q] = field.eval(x0, 0.0);
    let inward = match side {
        Side::Upper => sign * q > 0.0,
        Side::Lower => sign * q < 0.0,
    };
    if !inward {
        return Err(Error::NotInward { half: side.name(), x0 });
    }
    integrate_signed(field, sign, [x0, 0.0], tol, DEFAULT_T_MAX)
}

/// `|Π+(x0)| - |Π-(x0)|`, the radial convention of the series. Systems
/// turning clockwise are shot from `-x0`.
pub fn numeric_displacement(w: &PiecewiseField, x0: f64, tol: f64) -> Result<f64> {
    check_cutoff(x0)?;
    let start = match shoot_half(w, x0.abs(), Side::Upper, tol) {
        Err(Error::NotInward { .. }) => -x0.abs(),
        _ => x0.abs(),
    };
    let up = numeric_half_map(w, start, Side::Upper, tol)?;
    let lo = numeric_half_map(w, start, Side::Lower, tol)?;
    Ok(up.abs() - lo.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Upper,
    Lower,
    Sliding,
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::Upper => "upper",
            Segment::Lower => "lower",
            Segment::Sliding => "sliding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Cross,
    Tangency,
    SlideEntry,
    SlideExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub segment: Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Both fields are tangent to Σ or vanish there.
    SigmaSingular,
    /// Filippov continuation is not unique (escaping region).
    Escaping,
    /// The state left the box `|x|, |y| <= DIVERGENCE_BOUND`.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub terminated: Termination,
}

impl Trajectory {
    /// Abscissas of crossing events with `x > 0`.
    pub fn positive_crossings(&self) -> Vec<f64> {
        self.events.iter().filter(|e| e.kind == EventKind::Cross && e.x > 0.0).map(|e| e.x).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,y,segment")?;
        for s in &self.samples {
            writeln!(out, "{:e},{:e},{:e},{}", s.t, s.x, s.y, s.segment.name())?;
        }
        Ok(())
    }

    pub fn events_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.events)
    }
}

/// Sign of `f(phi_t(p)) - f(p)` for small `t > 0`: the first Lie derivative
/// above the noise floor decides. Zero when all vanish.
fn leaving_sign(x: &PlanarField, f: &BiPoly, p: [f64; 2]) -> f64 {
    let vals = lie_values(x, f, p, LEAVE_ORDER);
    let scale = 1.0 + x.max_abs_coeff();
    vals.iter().find(|v| v.abs() > LEAVE_TOL * scale).map_or(0.0, |v| v.signum())
}

enum Next {
    Mode(Segment),
    Stop(Termination),
}

fn decide(w: &PiecewiseField, p: [f64; 2]) -> Next {
    let su = leaving_sign(&w.upper, &w.switch, p);
    let sl = leaving_sign(&w.lower, &w.switch, p);
    match (su > 0.0, su < 0.0, sl > 0.0, sl < 0.0) {
        (true, _, true, _) => Next::Mode(Segment::Upper),
        (_, true, _, true) => Next::Mode(Segment::Lower),
        (_, true, true, _) => {
            let (a, b) = w.normal_components(p[0], p[1]);
            if a < 0.0 && b > 0.0 {
                Next::Mode(Segment::Sliding)
            } else {
                Next::Stop(Termination::SigmaSingular)
            }
        }
        (true, _, _, true) => Next::Stop(Termination::Escaping),
        // one field tangent to all orders or singular; follow the other if it leaves
        (false, false, true, _) => Next::Mode(Segment::Upper),
        (false, false, _, true) => Next::Mode(Segment::Lower),
        (true, _, false, false) => Next::Mode(Segment::Upper),
        (_, true, false, false) => Next::Mode(Segment::Lower),
        _ => Next::Stop(Termination::SigmaSingular),
    }
}

/// Newton projection onto `{f = 0}` along the gradient.
fn project(f: &BiPoly, p: [f64; 2]) -> [f64; 2] {
    if f.coeff(0, 1) == 1.0 && f.len() == 1 {
        return [p[0], 0.0];
    }
    let (fx, fy) = (f.dx(), f.dy());
    let mut z = p;
    for _ in 0..4 {
        let v = f.eval(z[0], z[1]);
        let (gx, gy) = (fx.eval(z[0], z[1]), fy.eval(z[0], z[1]));
        let g2 = gx * gx + gy * gy;
        if g2 == 0.0 || v.abs() < 1e-16 {
            break;
        }
        z = [z[0] - v * gx / g2, z[1] - v * gy / g2];
    }
    z
}

/// Stitched Filippov trajectory from `start` over `t_span` time units.
pub fn simulate(w: &PiecewiseField, start: [f64; 2], t_span: f64, tol: f64) -> Result<Trajectory> {
    let f = &w.switch;
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut p = start;
    let on_sigma = |p: [f64; 2]| f.eval(p[0], p[1]).abs() <= EPS_EVENT;

    let mut mode = if on_sigma(p) {
        p = project(f, p);
        match decide(w, p) {
            Next::Mode(m) => m,
            Next::Stop(r) => {
                samples.push(Sample { t, x: p[0], y: p[1], segment: Segment::Sliding });
                return Ok(Trajectory { samples, events, terminated: r });
            }
        }
    } else if f.eval(p[0], p[1]) > 0.0 {
        Segment::Upper
    } else {
        Segment::Lower
    };
    if mode == Segment::Sliding {
        events.push(Event { t, x: p[0], y: p[1], kind: EventKind::SlideEntry });
    }
    samples.push(Sample { t, x: p[0], y: p[1], segment: mode });
    let mut total_steps = 0usize;

    while t < t_span {
        let mut leaving = on_sigma(p);
        let mut st = if mode == Segment::Sliding { Stepper::uniform(tol, &p) } else { Stepper::new(tol, &p) };
        let outcome = match mode {
            Segment::Upper | Segment::Lower => {
                let (field, s) = if mode == Segment::Upper { (&w.upper, 1.0) } else { (&w.lower, -1.0) };
                let mut rhs = field_rhs(field, 1.0);
                let g = |z: &[f64]| f.eval(z[0], z[1]);
                let mut y = p.to_vec();
                let mut prev_abs = g(&y).abs();
                let mut falling = false;
                loop {
                    if t >= t_span {
                        break None;
                    }
                    total_steps += 1;
                    if total_steps > MAX_STEPS {
                        return Err(Error::NoProgress { t });
                    }
                    let (mut h, mut yn) = st.step(&mut rhs, t, &y, t_span - t)?;
                    if leaving {
                        h = first_step_off(&mut rhs, &y, h, &mut yn, |z| s * g(z))?;
                        st.h = st.h.min(2.0 * h);
                        leaving = false;
                    } else if s * g(&yn) <= 0.0 {
                        let (hc, yc) = refine(&mut rhs, g, t, &y, h, 0.0)?;
                        t += hc;
                        let z = project(f, [yc[0], yc[1]]);
                        samples.push(Sample { t, x: z[0], y: z[1], segment: mode });
                        break Some(z);
                    }
                    t += h;
                    y = yn;
                    samples.push(Sample { t, x: y[0], y: y[1], segment: mode });
                    if diverged(&y) {
                        return Ok(Trajectory { samples, events, terminated: Termination::Diverged });
                    }
                    let a = g(&y).abs();
                    if falling && a > prev_abs && prev_abs < EPS_GRAZE {
                        events.push(Event { t, x: y[0], y: y[1], kind: EventKind::Tangency });
                    }
                    falling = a < prev_abs;
                    prev_abs = a;
                }
            }
            Segment::Sliding => {
                let mut rhs = |_: f64, z: &[f64], d: &mut [f64]| {
                    let v = sliding_field(w, [z[0], z[1]])?;
                    d[0] = v.vx;
                    d[1] = v.vy;
                    Ok(())
                };
                let lambda = |z: &[f64]| {
                    let (a, b) = w.normal_components(z[0], z[1]);
                    b / (b - a)
                };
                let mut y = p.to_vec();
                loop {
                    if t >= t_span {
                        break None;
                    }
                    total_steps += 1;
                    if total_steps > MAX_STEPS {
                        return Err(Error::NoProgress { t });
                    }
                    // cap the step so the sliding field stays defined inside the stage evaluations
                    let (h, yn) = match st.step(&mut rhs, t, &y, t_span - t) {
                        Ok(v) => v,
                        Err(Error::NotSlidingRegion { .. }) => {
                            st.h *= 0.25;
                            if st.h < 1e-14 * (1.0 + t.abs()) {
                                break Some([y[0], y[1]]);
                            }
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let (a, b) = w.normal_components(yn[0], yn[1]);
                    let l = if a < 0.0 && b > 0.0 { lambda(&yn) } else { f64::NAN };
                    if !(LAMBDA_EXIT..=1.0 - LAMBDA_EXIT).contains(&l) {
                        // exit: locate where λ hits the cone boundary
                        let l0 = lambda(&y);
                        let bound = if l.is_nan() {
                            if l0 > 0.5 {
                                1.0
                            } else {
                                0.0
                            }
                        } else if l > 0.5 {
                            1.0
                        } else {
                            0.0
                        };
                        let z = match refine(&mut rhs, |z| lambda(z) - bound, t, &y, h, LAMBDA_EXIT) {
                            Ok((hc, yc)) => {
                                t += hc;
                                [yc[0], yc[1]]
                            }
                            Err(_) => [y[0], y[1]],
                        };
                        let z = project(f, z);
                        samples.push(Sample { t, x: z[0], y: z[1], segment: mode });
                        break Some(z);
                    }
                    t += h;
                    let z = project(f, [yn[0], yn[1]]);
                    y = z.to_vec();
                    samples.push(Sample { t, x: z[0], y: z[1], segment: mode });
                }
            }
        };
        let Some(z) = outcome else { break };
        p = z;
        let prev = mode;
        match decide(w, p) {
            Next::Mode(m) => {
                let kind = match (prev, m) {
                    (Segment::Sliding, Segment::Sliding) => {
                        return Err(Error::NoProgress { t });
                    }
                    (Segment::Sliding, _) => EventKind::SlideExit,
                    (_, Segment::Sliding) => EventKind::SlideEntry,
                    (a, b) if a == b => EventKind::Tangency,
                    _ => EventKind::Cross,
                };
                events.push(Event { t, x: p[0], y: p[1], kind });
                mode = m;
            }
            Next::Stop(r) => {
                if prev == Segment::Sliding {
                    events.push(Event { t, x: p[0], y: p[1], kind: EventKind::SlideExit });
                }
                return Ok(Trajectory { samples, events, terminated: r });
            }
        }
    }
    Ok(Trajectory { samples, events, terminated: Termination::Completed })
}
