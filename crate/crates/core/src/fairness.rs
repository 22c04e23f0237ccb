//! Group fairness criteria expressed as membership rules over `(a, y)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model_core::{ConstraintSide, GroupRates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// No fairness constraint; the model is plain L2 logistic regression.
    Unconstrained,
    DemographicParity,
    EqualizedOpportunity,
    EqualizedOdds,
}

impl CriterionKind {
    pub fn constraint_count(self) -> usize {
        match self {
            CriterionKind::Unconstrained => 0,
            CriterionKind::DemographicParity | CriterionKind::EqualizedOpportunity => 1,
            CriterionKind::EqualizedOdds => 2,
        }
    }

    /// True label the constraint conditions on, if any.
    ///
    /// Equalized odds uses constraint 0 for `y = 1` and constraint 1 for `y = 0`.
    pub fn constraint_label(self, constraint_id: usize) -> Result<Option<u8>> {
        self.check_id(constraint_id)?;
        Ok(match self {
            CriterionKind::EqualizedOpportunity => Some(1),
            CriterionKind::EqualizedOdds => Some(if constraint_id == 0 { 1 } else { 0 }),
            _ => None,
        })
    }

    pub fn constraint_name(self, constraint_id: usize) -> Result<&'static str> {
        self.check_id(constraint_id)?;
        Ok(match (self, constraint_id) {
            (CriterionKind::DemographicParity, _) => "dp",
            (CriterionKind::EqualizedOpportunity, _) => "eopp",
            (CriterionKind::EqualizedOdds, 0) => "eodds_y1",
            _ => "eodds_y0",
        })
    }

    /// Whether predictions need the label marginalization step.
    pub fn is_label_dependent(self) -> bool {
        matches!(self, CriterionKind::EqualizedOpportunity | CriterionKind::EqualizedOdds)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            CriterionKind::Unconstrained => "none",
            CriterionKind::DemographicParity => "dp",
            CriterionKind::EqualizedOpportunity => "eopp",
            CriterionKind::EqualizedOdds => "eodds",
        }
    }

    fn check_id(self, constraint_id: usize) -> Result<()> {
        if constraint_id >= self.constraint_count() {
            return Err(Error::InvalidConstraint {
                kind: self.to_string(),
                id: constraint_id,
            });
        }
        Ok(())
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "unconstrained" | "baseline" => Ok(CriterionKind::Unconstrained),
            "dp" | "demographic_parity" => Ok(CriterionKind::DemographicParity),
            "eopp" | "equalized_opportunity" => Ok(CriterionKind::EqualizedOpportunity),
            "eodds" | "equalized_odds" => Ok(CriterionKind::EqualizedOdds),
            other => Err(Error::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Side of constraint `constraint_id` that an example with `(a, y)` falls on.
pub fn membership(kind: CriterionKind, constraint_id: usize, a: u8, y: u8) -> Result<ConstraintSide> {
    let wanted = kind.constraint_label(constraint_id)?;
    if a > 1 || y > 1 {
        return Err(Error::InvalidArgument(format!("a={a}, y={y} must be binary")));
    }
    if wanted.is_some_and(|w| w != y) {
        return Ok(ConstraintSide::Neither);
    }
    Ok(if a == 1 {
        ConstraintSide::Gamma1
    } else {
        ConstraintSide::Gamma0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub name: String,
    /// True label this constraint conditions on, if any.
    pub label: Option<u8>,
    pub rates: GroupRates,
}

/// A criterion together with its per-constraint empirical group rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSpec {
    pub kind: CriterionKind,
    pub constraints: Vec<ConstraintSpec>,
}

impl FairnessSpec {
    pub fn unconstrained() -> Self {
        FairnessSpec {
            kind: CriterionKind::Unconstrained,
            constraints: Vec::new(),
        }
    }

    /// The single constraint (and its side) touching an example, if any.
    ///
    /// Constraints of one criterion partition the examples, so at most one
    /// of them returns a side other than `Neither`.
    pub fn assignment(&self, a: u8, y: u8) -> Option<(usize, ConstraintSide)> {
        (0..self.constraints.len()).find_map(|c| match membership(self.kind, c, a, y) {
            Ok(ConstraintSide::Neither) | Err(_) => None,
            Ok(side) => Some((c, side)),
        })
    }

    pub fn assignments(&self, data: &Dataset) -> Vec<Option<(usize, ConstraintSide)>> {
        (0..data.len())
            .map(|i| self.assignment(data.group(i), data.label(i)))
            .collect()
    }
}

/// Counts each constraint side over `(groups, labels)` and divides by `n`.
pub fn empirical_rates_from(groups: &[u8], labels: &[u8], kind: CriterionKind) -> Result<FairnessSpec> {
    let n = groups.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let mut constraints = Vec::with_capacity(kind.constraint_count());
    for c in 0..kind.constraint_count() {
        let (mut n1, mut n0) = (0usize, 0usize);
        for (&a, &y) in groups.iter().zip(labels) {
            match membership(kind, c, a, y)? {
                ConstraintSide::Gamma1 => n1 += 1,
                ConstraintSide::Gamma0 => n0 += 1,
                ConstraintSide::Neither => {}
            }
        }
        let name = kind.constraint_name(c)?.to_string();
        for (count, group) in [(n1, "gamma1"), (n0, "gamma0")] {
            if count == 0 {
                return Err(Error::ZeroGroupRate {
                    constraint: name,
                    group,
                });
            }
        }
        constraints.push(ConstraintSpec {
            name,
            label: kind.constraint_label(c)?,
            rates: GroupRates::new(n1 as f64 / n as f64, n0 as f64 / n as f64)?,
        });
    }
    Ok(FairnessSpec { kind, constraints })
}

pub fn empirical_rates(data: &Dataset, kind: CriterionKind) -> Result<FairnessSpec> {
    empirical_rates_from(data.groups(), data.labels(), kind)
}
