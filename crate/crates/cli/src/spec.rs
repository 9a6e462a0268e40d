//! JSON system description: two polynomial fields, an optional switching
//! polynomial, optional weights and analysis options.
//!
//! Polynomials are lists of `[i, j, c]` triples for `c x^i y^j`.

use serde::{Deserialize, Serialize};
use sigma_mono_core::sigma::DEFAULT_MAX_ORDER;
use sigma_mono_core::{AnalysisOptions, BiPoly, MonodromyOptions, PiecewiseField, PlanarField, WeightPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub upper: PlanarField,
    pub lower: PlanarField,
    #[serde(default = "BiPoly::y")]
    pub switch: BiPoly,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<SpecWeights>,
    #[serde(default)]
    pub options: SpecOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecWeights {
    pub upper: [u32; 2],
    pub lower: [u32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Asserts {
    /// No characteristic orbit reaches the point through the upper half.
    pub upper: bool,
    pub lower: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecOptions {
    pub order: usize,
    pub tol: f64,
    pub tau_coef: f64,
    pub max_order: usize,
    pub asserts: Asserts,
}

impl Default for SpecOptions {
    fn default() -> Self {
        let a = AnalysisOptions::default();
        Self {
            order: a.order,
            tol: a.tol,
            tau_coef: a.tau_coef,
            max_order: DEFAULT_MAX_ORDER,
            asserts: Asserts::default(),
        }
    }
}

/// Parse failure with the JSON path of the offending value.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for SpecError {}

impl SystemSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: SystemSpec = serde_path_to_error::deserialize(de)
            .map_err(|e| SpecError { path: e.path().to_string(), message: e.inner().to_string() })?;
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), SpecError> {
        let bad = |path: &str, message: String| Err(SpecError { path: path.into(), message });
        if let Some(w) = self.weights {
            for (name, pair) in [("weights.upper", w.upper), ("weights.lower", w.lower)] {
                if pair[0] == 0 || pair[1] == 0 {
                    return bad(name, format!("weights must be positive, got {pair:?}"));
                }
            }
        }
        let o = &self.options;
        if o.order == 0 {
            return bad("options.order", "order must be at least 1".into());
        }
        if o.tol.is_nan() || o.tol <= 0.0 {
            return bad("options.tol", format!("tolerance must be positive, got {}", o.tol));
        }
        if o.tau_coef.is_nan() || o.tau_coef < 0.0 {
            return bad("options.tau_coef", format!("threshold must be nonnegative, got {}", o.tau_coef));
        }
        if self.switch.is_empty() {
            return bad("switch", "switching polynomial is zero".into());
        }
        Ok(())
    }

    pub fn system(&self) -> PiecewiseField {
        PiecewiseField::with_switch(self.upper.clone(), self.lower.clone(), self.switch.clone())
    }

    pub fn weight_pairs(&self) -> Option<(WeightPair, WeightPair)> {
        self.weights.map(|w| {
            (
                WeightPair::new(w.upper[0], w.upper[1]).expect("checked positive"),
                WeightPair::new(w.lower[0], w.lower[1]).expect("checked positive"),
            )
        })
    }

    pub fn monodromy_options(&self) -> MonodromyOptions {
        MonodromyOptions {
            max_order: self.options.max_order,
            assert_no_char_orbit_upper: self.options.asserts.upper,
            assert_no_char_orbit_lower: self.options.asserts.lower,
            ..MonodromyOptions::default()
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            order: self.options.order,
            tol: self.options.tol,
            tau_coef: self.options.tau_coef,
            weights: self.weight_pairs(),
            ..AnalysisOptions::default()
        }
    }
}
