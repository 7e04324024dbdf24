use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{TOL_EIG, TOL_HERM, TOL_RANK};

/// Numerical tolerances shared by validation, eigensolves and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative symmetry / skew-symmetry residual.
    pub herm: f64,
    /// Relative eigenvalue threshold for rank decisions.
    pub rank: f64,
    /// Relative eigenpair residual.
    pub eig: f64,
    /// `|Re zeta| < re * max(1, |zeta|)` counts as zero frequency.
    pub re: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: TOL_HERM,
            rank: TOL_RANK,
            eig: TOL_EIG,
            re: 1e-9,
        }
    }
}

impl Tolerances {
    /// Applies overrides written as `key=value` pairs separated by commas or
    /// whitespace, e.g. `rank=1e-9,re=1e-8`. Keys: herm, rank, eig, re.
    pub fn with_overrides(mut self, overrides: &str) -> Result<Self> {
        for item in overrides.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("tolerance override `{item}` is not key=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("tolerance `{key}` has a non-numeric value")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance `{key}` must be positive")));
            }
            match key.trim() {
                "herm" => self.herm = value,
                "rank" => self.rank = value,
                "eig" => self.eig = value,
                "re" => self.re = value,
                other => return Err(Error::InvalidArgument(format!("unknown tolerance `{other}`"))),
            }
        }
        Ok(self)
    }

    /// Whether `re_part` is numerically zero for an eigenvalue of modulus `abs`.
    pub fn is_zero_frequency(&self, re_part: f64, abs: f64) -> bool {
        re_part.abs() < self.re * abs.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let t = Tolerances::default().with_overrides("rank=1e-9, re=2e-8").unwrap();
        assert_eq!(t.rank, 1e-9);
        assert_eq!(t.re, 2e-8);
        assert_eq!(t.herm, TOL_HERM);
        assert!(Tolerances::default().with_overrides("foo=1").is_err());
        assert!(Tolerances::default().with_overrides("rank").is_err());
        assert!(Tolerances::default().with_overrides("rank=-1").is_err());
        assert_eq!(Tolerances::default().with_overrides("").unwrap(), Tolerances::default());
    }
}
