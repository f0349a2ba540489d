use serde::{Deserialize, Serialize};

use super::SchemeParams;

/// Reaction-time model constants, in seconds, and recall accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsabilityConstants {
    pub cr_base: f64,
    pub cr_slope: f64,
    pub psi: f64,
    pub g: f64,
    pub vs_base: f64,
    pub vs_slope: f64,
    pub w: f64,
    pub lambda_recall: f64,
    pub lambda_recognition: f64,
}

impl Default for UsabilityConstants {
    fn default() -> Self {
        UsabilityConstants {
            cr_base: 0.3694,
            cr_slope: 0.0383,
            psi: 1.969,
            g: 1.0,
            vs_base: 0.583,
            vs_slope: 0.0529,
            w: 1.0,
            lambda_recall: 0.296,
            lambda_recognition: 0.848,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UsabilityMetrics {
    /// Cued recall time amortised per round.
    pub alpha1: f64,
    /// Single-target visual search time.
    pub alpha2: f64,
    /// Cognitive workload per round.
    pub cw: f64,
    /// Memory demand of the second password.
    pub md: f64,
    /// Human power: CW over a session times MD.
    pub hp: f64,
    /// Memory demand of the first password.
    pub md_p1: f64,
}

pub fn usability_metrics(c: &UsabilityConstants, p: &SchemeParams) -> UsabilityMetrics {
    let cr = c.cr_base + c.cr_slope * c.g * c.psi;
    let rounds = p.rounds as f64;
    let alpha1 = if p.rounds == 0 { 0.0 } else { cr / rounds * p.p2_len as f64 };
    let alpha2 = c.vs_base + c.vs_slope * c.w;
    let cw = alpha1 + alpha2;
    let md = p.p2_len as f64 / c.lambda_recall;
    UsabilityMetrics {
        alpha1,
        alpha2,
        cw,
        md,
        hp: cw * rounds * md,
        md_p1: p.p1_len as f64 / c.lambda_recall,
    }
}
