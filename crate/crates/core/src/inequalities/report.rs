use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::radial::RadialIntegral;

/// Relative tolerance separating `violated` from `inconclusive`.
pub const TOL_REPORT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Hardy,
    HardyCarron,
    HardyNorm,
    Rellich,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hardy => "hardy",
            Self::HardyCarron => "hardy_carron",
            Self::HardyNorm => "hardy_norm",
            Self::Rellich => "rellich",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Inconclusive,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Holds => "holds",
            Self::Inconclusive => "inconclusive",
            Self::Violated => "violated",
        })
    }
}

/// Three-way outcome of `slack` against an error budget.
pub fn verdict(slack: f64, budget: f64, scale: f64, flagged: bool) -> Verdict {
    let tol = TOL_REPORT * scale;
    if slack < -budget - tol {
        Verdict::Violated
    } else if flagged || slack < -budget {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Term {
    pub value: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Excision {
    pub exponent: Option<f64>,
    pub expected: f64,
    pub conclusive: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Budget {
    pub quadrature: f64,
    pub extrapolation: f64,
    pub discretization: f64,
    pub total: f64,
}

/// Parameters echoed into a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportParams {
    pub k: usize,
    pub p: f64,
    pub gamma: f64,
    pub xi: Vec<f64>,
    pub ambient: String,
}

/// Every term of one inequality with its verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermBreakdown {
    pub theorem: Theorem,
    pub params: ReportParams,
    pub terms: BTreeMap<String, Term>,
    pub lhs_terms: Vec<String>,
    pub rhs_terms: Vec<String>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub budget: Budget,
    pub verdict: Verdict,
    pub excision: BTreeMap<String, Excision>,
    pub auxiliary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl TermBreakdown {
    pub fn term(&self, name: &str) -> f64 {
        self.terms.get(name).map_or(f64::NAN, |t| t.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Recomputes the budget and verdict with a discretization estimate.
    pub fn with_discretization(mut self, d: f64) -> Self {
        self.budget.discretization = d;
        self.budget.total = self.budget.quadrature + self.budget.extrapolation + d;
        self.verdict = verdict(
            self.slack,
            self.budget.total,
            self.lhs.abs().max(self.rhs.abs()),
            self.excision.values().any(|e| !e.conclusive),
        );
        self
    }
}

/// Accumulates terms in order.
pub(crate) struct Builder {
    theorem: Theorem,
    params: ReportParams,
    terms: BTreeMap<String, Term>,
    lhs: Vec<(String, f64)>,
    rhs: Vec<(String, f64)>,
    budget: Budget,
    excision: BTreeMap<String, Excision>,
    auxiliary: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Builder {
    pub fn new(theorem: Theorem, params: ReportParams) -> Self {
        Self {
            theorem,
            params,
            terms: BTreeMap::new(),
            lhs: Vec::new(),
            rhs: Vec::new(),
            budget: Budget::default(),
            excision: BTreeMap::new(),
            auxiliary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, v: &RadialIntegral, expected: f64) {
        self.terms.insert(
            name.to_string(),
            Term {
                value: v.value,
                err: v.err(),
            },
        );
        self.budget.quadrature += v.err_quadrature;
        self.budget.extrapolation += v.err_extrapolation;
        if v.excised {
            self.excision.insert(
                name.to_string(),
                Excision {
                    exponent: v.tail_exponent,
                    expected,
                    conclusive: !v.inconclusive,
                },
            );
        }
    }

    /// Adds a left-hand term; `rate` is the expected tail exponent.
    pub fn lhs(&mut self, name: &str, v: &RadialIntegral, rate: f64) -> &mut Self {
        self.add(name, v, rate);
        self.lhs.push((name.to_string(), v.value));
        self
    }

    pub fn rhs(&mut self, name: &str, v: &RadialIntegral, rate: f64) -> &mut Self {
        self.add(name, v, rate);
        self.rhs.push((name.to_string(), v.value));
        self
    }

    pub fn aux(&mut self, name: &str, v: f64) -> &mut Self {
        self.auxiliary.insert(name.to_string(), v);
        self
    }

    pub fn note(&mut self, s: &str) -> &mut Self {
        self.notes.push(s.to_string());
        self
    }

    pub fn finish(self) -> TermBreakdown {
        use crate::quadrature::compensated_sum;
        let lhs = compensated_sum(self.lhs.iter().map(|t| t.1));
        let rhs = compensated_sum(self.rhs.iter().map(|t| t.1));
        let out = TermBreakdown {
            theorem: self.theorem,
            params: self.params,
            terms: self.terms,
            lhs_terms: self.lhs.into_iter().map(|t| t.0).collect(),
            rhs_terms: self.rhs.into_iter().map(|t| t.0).collect(),
            lhs,
            rhs,
            slack: rhs - lhs,
            budget: self.budget,
            verdict: Verdict::Holds,
            excision: self.excision,
            auxiliary: self.auxiliary,
            notes: self.notes,
        };
        out.with_discretization(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_bands() {
        assert_eq!(verdict(0.0, 0.0, 1.0, false), Verdict::Holds);
        assert_eq!(verdict(-0.5, 1.0, 1.0, false), Verdict::Holds);
        assert_eq!(
            verdict(-1.0 - 1e-10, 1.0, 1.0, false),
            Verdict::Inconclusive
        );
        assert_eq!(verdict(-1.1, 1.0, 1.0, false), Verdict::Violated);
        assert_eq!(verdict(1.0, 0.0, 1.0, true), Verdict::Inconclusive);
        assert_eq!(verdict(-2.0, 0.0, 1.0, true), Verdict::Violated);
    }
}
