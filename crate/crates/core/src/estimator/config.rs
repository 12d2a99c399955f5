use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// EM stopping rules, inner Newton settings and multi-start policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop when `|l_t - l_{t-1}| / |l_{t-1}|` falls below this.
    pub rel_tol_loglik: f64,
    /// Stop when no free parameter moves by more than this in one iteration.
    pub abs_tol_param: f64,
    pub inner_newton_tol: f64,
    pub inner_newton_max: usize,
    /// Cap on the cyclic block sweeps of one item/support M-step.
    pub max_block_cycles: usize,
    /// Total starts; the deterministic start is always the first.
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 5000,
            rel_tol_loglik: 1e-8,
            abs_tol_param: 1e-6,
            inner_newton_tol: 1e-8,
            inner_newton_max: 50,
            max_block_cycles: 50,
            n_starts: 1,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol_loglik", self.rel_tol_loglik),
            ("abs_tol_param", self.abs_tol_param),
            ("inner_newton_tol", self.inner_newton_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter < 1 {
            return Err(Error::config("max_iter must be at least 1"));
        }
        if self.inner_newton_max < 1 || self.max_block_cycles < 1 {
            return Err(Error::config(
                "inner_newton_max and max_block_cycles must be at least 1",
            ));
        }
        if self.n_starts < 1 {
            return Err(Error::config("n_starts must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EmConfig::default().validate().unwrap();
        let bad = EmConfig {
            rel_tol_loglik: 0.0,
            ..EmConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EmConfig {
            max_iter: 0,
            ..EmConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
