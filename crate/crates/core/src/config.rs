use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by all stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_quad: f64,
    pub tol_theta: f64,
    pub tol_alg: f64,
    pub tol_arc: f64,
    pub tol_mean: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_quad: 1e-12,
            tol_theta: 1e-12,
            tol_alg: 1e-8,
            tol_arc: 1e-8,
            tol_mean: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::error::Result<()> {
        let all = [self.tol_quad, self.tol_theta, self.tol_alg, self.tol_arc, self.tol_mean];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(crate::error::Error::InvalidConfig("all tolerances must be positive".into()))
        }
    }
}
