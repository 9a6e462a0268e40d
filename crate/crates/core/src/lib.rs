//! Analysis of planar piecewise-polynomial vector fields split by a switching
//! curve: Σ classification, monodromy, weighted-polar series for the half
//! return maps, the displacement series and a direct shooting oracle.

pub mod cases;
pub mod error;
pub mod jet;
pub mod newton;
pub mod polar;
pub mod poly;
pub mod quadrature;
pub mod rk;
pub mod series;
pub mod shoot;
pub mod sigma;

pub use cases::{case_study_bundle, CaseBundle, CaseParams, CaseStudy, Convention, Prediction};
pub use error::{Error, Result};
pub use jet::Jet;
pub use newton::newton_polygon_weights;
pub use polar::{weighted_polar_ode, HypothesisRecord, PolarOde};
pub use poly::{
    center_certificate, divergence, hamiltonian_certificate, lie_chain, lie_derivative, reversibility_check, BiPoly,
    CenterCertificate, PlanarField, WeightPair,
};
pub use quadrature::{quadrature, QuadResult};
pub use series::{
    analyze, displacement_series, half_return_series, stability_verdict, transport_series, AnalysisOptions,
    DisplacementReport, ReturnSeries, SeriesCoeffs, Verdict,
};
pub use shoot::{
    integrate_to_section, numeric_displacement, numeric_half_map, simulate, EventKind, Segment, ShootResult,
    Termination, Trajectory,
};
pub use sigma::{
    characteristic_directions, classify_point, fold_order, monodromy_verdict, sign_condition_check, sliding_field,
    Monodromy, MonodromyCase, MonodromyOptions, PiecewiseField, Region, Side, SigmaPointReport, SlidingVector,
};
