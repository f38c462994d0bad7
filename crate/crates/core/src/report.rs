//! Verification report records: one named check per line with its
//! tolerance and measured deviation, serialized as JSON.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>) -> Self {
        VerificationReport {
            name: name.into(),
            checks: Vec::new(),
            pass: true,
        }
    }

    /// Records a check that passes when `measured <= tolerance`.
    pub fn check(&mut self, name: impl Into<String>, tolerance: f64, measured: f64) {
        let pass = measured <= tolerance;
        self.pass &= pass;
        self.checks.push(Check {
            name: name.into(),
            tolerance,
            measured,
            pass,
        });
    }

    pub fn max_measured(&self) -> f64 {
        self.checks.iter().map(|c| c.measured).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_pass_flag() {
        let mut r = VerificationReport::new("demo");
        r.check("a", 1e-10, 1e-12);
        assert!(r.pass);
        r.check("b", 1e-10, 1e-3);
        assert!(!r.pass);
        assert_eq!(r.checks.len(), 2);
        assert_eq!(r.max_measured(), 1e-3);
    }
}
