//! The four reference systems with closed-form predictions for their
//! displacement coefficients.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{BiPoly, PlanarField, WeightPair};
use crate::quadrature::{quadrature, QuadResult};
use crate::series::{analyze, AnalysisOptions, DisplacementReport, Verdict};
use crate::shoot::{simulate, Termination};
use crate::sigma::{classify_point, MonodromyCase, MonodromyOptions, PiecewiseField, SigmaPointReport};

/// Regression values of the three reference integrals (tolerance 1e-14).
pub const K0: f64 = 0.32286405301081184;
pub const I1: f64 = -0.133453676382887;
pub const I2: f64 = -0.43700959238201986;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStudy {
    CuspFold2,
    CuspDegenerate,
    Fold2Fold4,
    ElementaryDegenerate,
}

impl CaseStudy {
    pub const ALL: [CaseStudy; 4] =
        [CaseStudy::CuspFold2, CaseStudy::CuspDegenerate, CaseStudy::Fold2Fold4, CaseStudy::ElementaryDegenerate];

    pub fn id(self) -> &'static str {
        match self {
            CaseStudy::CuspFold2 => "cusp-fold2",
            CaseStudy::CuspDegenerate => "cusp-degenerate",
            CaseStudy::Fold2Fold4 => "fold2-fold4",
            CaseStudy::ElementaryDegenerate => "elementary-degenerate",
        }
    }

    /// Parameters the system actually uses.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            CaseStudy::CuspFold2 | CaseStudy::CuspDegenerate => &["b"],
            CaseStudy::Fold2Fold4 => &["a", "b", "c"],
            CaseStudy::ElementaryDegenerate => &["a", "b", "c", "d"],
        }
    }

    pub fn system(self, k: &CaseParams) -> PiecewiseField {
        let f = |p: &[(u32, u32, f64)], q: &[(u32, u32, f64)]| {
            PlanarField::new(BiPoly::from_terms(p.iter().copied()), BiPoly::from_terms(q.iter().copied()))
        };
        let cusp = f(&[(0, 2, -1.0), (1, 1, k.b)], &[(1, 0, 1.0)]);
        match self {
            CaseStudy::CuspFold2 => PiecewiseField::new(cusp, f(&[(0, 0, 1.0)], &[(1, 0, 1.0)])),
            CaseStudy::CuspDegenerate => PiecewiseField::new(cusp, f(&[(0, 1, -1.0)], &[(3, 0, 1.0), (1, 1, -4.0)])),
            CaseStudy::Fold2Fold4 => PiecewiseField::new(
                f(&[(1, 0, k.a), (0, 0, -1.0)], &[(1, 0, 1.0), (0, 1, k.b)]),
                f(&[(0, 1, 1.0), (0, 0, 1.0)], &[(3, 0, 1.0), (2, 1, k.c)]),
            ),
            CaseStudy::ElementaryDegenerate => PiecewiseField::new(
                f(&[(1, 0, k.a), (0, 1, -k.b), (2, 0, k.c)], &[(1, 0, k.b), (0, 1, k.a)]),
                f(&[(0, 3, -1.0)], &[(3, 0, 1.0), (4, 1, k.d)]),
            ),
        }
    }

    /// The cusp has characteristic orbits, all inside the lower half-plane;
    /// that is asserted rather than decided. The HE point likewise.
    pub fn monodromy_options(self) -> MonodromyOptions {
        let mut o = MonodromyOptions::default();
        match self {
            CaseStudy::CuspFold2 => o.assert_no_char_orbit_upper = true,
            CaseStudy::CuspDegenerate => {
                o.assert_no_char_orbit_upper = true;
                o.assert_no_char_orbit_lower = true;
            }
            _ => {}
        }
        o
    }

    pub fn expected_case(self) -> MonodromyCase {
        match self {
            CaseStudy::CuspFold2 => MonodromyCase::Ii,
            CaseStudy::Fold2Fold4 => MonodromyCase::I,
            CaseStudy::CuspDegenerate | CaseStudy::ElementaryDegenerate => MonodromyCase::Iii,
        }
    }

    pub fn expected_weights(self) -> (WeightPair, WeightPair) {
        let w = |a, b| WeightPair { wx: a, wy: b };
        match self {
            CaseStudy::CuspFold2 => (w(3, 2), w(1, 2)),
            CaseStudy::CuspDegenerate => (w(3, 2), w(1, 2)),
            CaseStudy::Fold2Fold4 => (w(1, 2), w(1, 4)),
            CaseStudy::ElementaryDegenerate => (w(1, 1), w(1, 1)),
        }
    }

    /// Closed-form displacement coefficients published for this system.
    /// Values use the radial convention `|Π+| - |Π-|` unless marked otherwise.
    pub fn predictions(self, k: &CaseParams) -> Vec<Prediction> {
        let mut out = Vec::new();
        match self {
            CaseStudy::CuspFold2 | CaseStudy::CuspDegenerate => out.push(Prediction {
                label: "-3 b k0".into(),
                w_exponent: 4,
                convention: Convention::Landing,
                value: -3.0 * k.b * K0,
            }),
            CaseStudy::Fold2Fold4 => {
                let s = k.a + k.b;
                out.push(Prediction {
                    label: "2(a+b)/3".into(),
                    w_exponent: 2,
                    convention: Convention::Radial,
                    value: 2.0 * s / 3.0,
                });
                out.push(Prediction {
                    label: "4(a+b)^2/9".into(),
                    w_exponent: 3,
                    convention: Convention::Radial,
                    value: 4.0 * s * s / 9.0,
                });
                if s == 0.0 {
                    out.push(Prediction {
                        label: "-c I1".into(),
                        w_exponent: 4,
                        convention: Convention::Radial,
                        value: -k.c * I1,
                    });
                }
            }
            CaseStudy::ElementaryDegenerate => {
                let e = (k.a * PI / k.b).exp();
                out.push(Prediction {
                    label: "e^(a pi/b) - 1".into(),
                    w_exponent: 1,
                    convention: Convention::Radial,
                    value: e - 1.0,
                });
                out.push(Prediction {
                    label: "-4ab^2c e(e+1)/((a^2+9b^2)(a^2+b^2))".into(),
                    w_exponent: 2,
                    convention: Convention::Radial,
                    value: -4.0 * k.a * k.b * k.b * k.c * e * (e + 1.0)
                        / ((k.a * k.a + 9.0 * k.b * k.b) * (k.a * k.a + k.b * k.b)),
                });
                if k.a == 0.0 {
                    out.push(Prediction {
                        label: "-(d/sqrt 2) I2".into(),
                        w_exponent: 3,
                        convention: Convention::Radial,
                        value: -k.d / SQRT_2 * I2,
                    });
                }
            }
        }
        out
    }

    /// Verdict stated in the published analysis for these parameters.
    pub fn published_verdict(self, k: &CaseParams) -> &'static str {
        let sign = |v: f64| {
            if v < 0.0 {
                -1
            } else if v > 0.0 {
                1
            } else {
                0
            }
        };
        let pick = |s: i32| match s {
            -1 => "StableFocus",
            1 => "UnstableFocus",
            _ => "Center",
        };
        match self {
            CaseStudy::CuspFold2 | CaseStudy::CuspDegenerate => pick(sign(k.b)),
            CaseStudy::Fold2Fold4 => match sign(k.a + k.b) {
                0 => pick(-sign(k.c)),
                s => pick(s),
            },
            CaseStudy::ElementaryDegenerate => match sign(k.a) {
                0 => pick(-sign(k.d)),
                s => pick(s),
            },
        }
    }
}

impl fmt::Display for CaseStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CaseStudy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseStudy::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case study '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for CaseParams {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0, d: 1.0 }
    }
}

impl CaseParams {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "a" => self.a = value,
            "b" => self.b = value,
            "c" => self.c = value,
            "d" => self.d = value,
            _ => return Err(Error::InvalidArgument(format!("unknown parameter '{name}'"))),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "a" => Some(self.a),
            "b" => Some(self.b),
            "c" => Some(self.c),
            "d" => Some(self.d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `|Π+(x0)| - |Π-(x0)|`, as reported in `w_coeffs`.
    Radial,
    /// `Π+(x0) - Π-(x0)`, the negation.
    Landing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub w_exponent: u32,
    pub convention: Convention,
    pub value: f64,
}

/// A published coefficient next to the computed one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCheck {
    pub label: String,
    pub w_exponent: u32,
    pub convention: Convention,
    pub predicted: f64,
    /// Computed coefficient expressed in the same convention; `None` past
    /// the truncation order.
    pub computed: Option<f64>,
    pub deviation: Option<f64>,
    /// `|deviation / predicted|`, absent when the prediction is zero.
    pub relative_deviation: Option<f64>,
}

pub fn check_predictions(case: CaseStudy, k: &CaseParams, r: &DisplacementReport) -> Vec<PredictionCheck> {
    case.predictions(k)
        .into_iter()
        .map(|p| {
            let computed = r.coeff(p.w_exponent).map(|c| match p.convention {
                Convention::Radial => c,
                Convention::Landing => -c,
            });
            let deviation = computed.map(|c| c - p.value);
            let relative_deviation = deviation.filter(|_| p.value != 0.0).map(|d| (d / p.value).abs());
            PredictionCheck {
                label: p.label,
                w_exponent: p.w_exponent,
                convention: p.convention,
                predicted: p.value,
                computed,
                deviation,
                relative_deviation,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub start: [f64; 2],
    pub t_span: f64,
    pub samples: usize,
    pub positive_crossings: Vec<f64>,
    pub terminated: Option<Termination>,
    pub error: Option<String>,
}

/// Start abscissa and time span of the bundled simulation.
pub const BUNDLE_START: f64 = 0.05;
pub const BUNDLE_T_SPAN: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBundle {
    pub id: CaseStudy,
    pub params: CaseParams,
    pub system: PiecewiseField,
    pub classification: SigmaPointReport,
    pub displacement: Option<DisplacementReport>,
    pub displacement_error: Option<String>,
    pub predictions: Vec<PredictionCheck>,
    pub published_verdict: String,
    pub verdict_agrees: Option<bool>,
    pub simulation: SimulationSummary,
}

/// Classification, displacement, prediction table and a short simulation.
pub fn case_study_bundle(case: CaseStudy, k: &CaseParams, opts: &AnalysisOptions, sim_tol: f64) -> Result<CaseBundle> {
    let system = case.system(k);
    let classification = classify_point(&system, [0.0, 0.0], &case.monodromy_options())?;
    let (displacement, displacement_error) = match analyze(&system, opts) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let predictions = displacement.as_ref().map(|r| check_predictions(case, k, r)).unwrap_or_default();
    let published = case.published_verdict(k);
    let verdict_agrees = displacement.as_ref().map(|r| match r.verdict {
        Verdict::StableFocus => published == "StableFocus",
        Verdict::UnstableFocus => published == "UnstableFocus",
        Verdict::Center => published == "Center",
        _ => false,
    });
    let start = [BUNDLE_START, 0.0];
    let simulation = match simulate(&system, start, BUNDLE_T_SPAN, sim_tol) {
        Ok(tr) => SimulationSummary {
            start,
            t_span: BUNDLE_T_SPAN,
            samples: tr.samples.len(),
            positive_crossings: tr.positive_crossings(),
            terminated: Some(tr.terminated),
            error: None,
        },
        Err(e) => SimulationSummary {
            start,
            t_span: BUNDLE_T_SPAN,
            samples: 0,
            positive_crossings: Vec::new(),
            terminated: None,
            error: Some(e.to_string()),
        },
    };
    Ok(CaseBundle {
        id: case,
        params: *k,
        system,
        classification,
        displacement,
        displacement_error,
        predictions,
        published_verdict: published.to_string(),
        verdict_agrees,
        simulation,
    })
}

fn m_cusp(t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    (3.0 - 2.0 * s) * c * c + 2.0 * s
}

/// `k0 = int_0^π 3^(1/6) (11 sin 3t + 10 sin t + sin 5t) / (16 m^(13/6)) dt`.
pub fn k0_integral(tol: f64) -> Result<QuadResult> {
    let pre = 3f64.powf(1.0 / 6.0) / 16.0;
    quadrature(
        |t| pre * (11.0 * (3.0 * t).sin() + 10.0 * t.sin() + (5.0 * t).sin()) / m_cusp(t).powf(13.0 / 6.0),
        0.0,
        PI,
        tol,
    )
}

/// `int_0^-π sin t cos^2 t (3 cos 2t - 4) / (cos^4 t - 4 sin t)^(11/4) dt`.
pub fn i1_integral(tol: f64) -> Result<QuadResult> {
    quadrature(
        |t| {
            let (s, c) = t.sin_cos();
            s * c * c * (3.0 * (2.0 * t).cos() - 4.0) / (c.powi(4) - 4.0 * s).powf(2.75)
        },
        0.0,
        -PI,
        tol,
    )
}

/// `int_0^-π (cos 4t - 1)^2 / ((cos 4t + 3)^2 sqrt(2 cos 4t + 6)) dt`.
pub fn i2_integral(tol: f64) -> Result<QuadResult> {
    quadrature(
        |t| {
            let c4 = (4.0 * t).cos();
            (c4 - 1.0).powi(2) / ((c4 + 3.0).powi(2) * (2.0 * c4 + 6.0).sqrt())
        },
        0.0,
        -PI,
        tol,
    )
}
