//! Machine-readable verification records.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::verify::{AnnulusReport, DecayFit, Lemma41Report, SupremumEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub operation: String,
    pub inputs: Value,
    pub value: f64,
    /// The quantity `value` is compared against, when there is one.
    pub bound: Option<f64>,
    /// `bound - value` for upper bounds, `value - bound` for lower bounds.
    pub margin: Option<f64>,
    pub converged: bool,
}

impl VerifyReport {
    pub fn new(operation: &str, inputs: Value, value: f64) -> Self {
        VerifyReport { operation: operation.into(), inputs, value, bound: None, margin: None, converged: true }
    }

    pub fn upper(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.margin = Some(bound - self.value);
        self
    }

    pub fn lower(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.margin = Some(self.value - bound);
        self
    }

    pub fn supremum(operation: &str, est: &SupremumEstimate, mut inputs: Value) -> Self {
        if let Value::Object(map) = &mut inputs {
            map.insert("q".into(), json!(est.q));
            map.insert("R".into(), json!(est.r));
            map.insert("iterations".into(), json!(est.iterations));
        }
        VerifyReport { converged: est.converged, ..Self::new(operation, inputs, est.value) }
    }

    /// Fitted slope against the theoretical exponent, less the fit tolerance.
    pub fn decay(fit: &DecayFit, delta: Option<f64>, tolerance: f64, inputs: Value) -> Self {
        let rep = Self::new("decay_rate_fit", inputs, fit.slope);
        match delta {
            Some(d) => rep.lower(d - tolerance),
            None => rep,
        }
    }

    pub fn lemma41(rep: &Lemma41Report, inputs: Value) -> Self {
        Self::new("check_lemma41", inputs, rep.lhs).upper(rep.rhs * (1.0 + crate::verify::INEQUALITY_SLACK))
    }

    pub fn annulus(rep: &AnnulusReport, inputs: Value) -> Self {
        let mut inputs = inputs;
        if let Value::Object(map) = &mut inputs {
            map.insert("t".into(), json!(rep.t));
            map.insert("q_tilde".into(), json!(rep.q_tilde));
            map.insert("proof_constant".into(), json!(rep.proof_constant));
        }
        Self::new("check_annulus_bound", inputs, rep.empirical_constant).upper(rep.proof_constant)
    }

    pub fn passed(&self) -> bool {
        self.margin.is_none_or(|m| m >= 0.0)
    }
}
