use std::fmt;

use super::{ModelSpec, ParamValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateField {
    Utility,
    CostDirectMedical,
    CostProductivity,
    CostOutOfPocket,
}

impl StateField {
    fn parse(s: &str) -> Option<StateField> {
        Some(match s {
            "utility" => StateField::Utility,
            "cost_direct_medical" => StateField::CostDirectMedical,
            "cost_productivity" => StateField::CostProductivity,
            "cost_out_of_pocket" => StateField::CostOutOfPocket,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            StateField::Utility => "utility",
            StateField::CostDirectMedical => "cost_direct_medical",
            StateField::CostProductivity => "cost_productivity",
            StateField::CostOutOfPocket => "cost_out_of_pocket",
        }
    }
}

/// Value domain of an addressable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Closed unit interval (utilities).
    Unit,
    /// `[0, 1)` (discount rates).
    Rate,
    /// Nonnegative reals (costs).
    NonNegative,
    /// A full transition-matrix row.
    StochasticRow,
}

impl Domain {
    pub fn is_scalar(self) -> bool {
        !matches!(self, Domain::StochasticRow)
    }

    pub fn contains(self, v: f64) -> bool {
        match self {
            Domain::Unit => (0.0..=1.0).contains(&v),
            Domain::Rate => (0.0..1.0).contains(&v),
            Domain::NonNegative => v >= 0.0 && v.is_finite(),
            Domain::StochasticRow => false,
        }
    }

    /// Nearest in-domain value.
    pub fn clamp(self, v: f64) -> f64 {
        match self {
            Domain::Unit => v.clamp(0.0, 1.0),
            Domain::Rate => v.clamp(0.0, 1.0 - 1e-12),
            Domain::NonNegative => v.max(0.0),
            Domain::StochasticRow => v,
        }
    }
}

/// A resolved, dotted parameter path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParameterPath {
    State { state: String, field: StateField },
    OneTimeCost { strategy: String },
    TransitionRow { strategy: String, from: String },
    DiscountCosts,
    DiscountEffects,
}

impl ParameterPath {
    /// Parses `raw` and checks that every name in it exists in `spec`.
    pub fn parse(raw: &str, spec: &ModelSpec) -> Result<ParameterPath> {
        let unresolved = || Error::UnresolvedPath(raw.to_string());
        let parts: Vec<&str> = raw.split('.').collect();
        let path = match parts.as_slice() {
            ["states", state, field] => ParameterPath::State {
                state: state.to_string(),
                field: StateField::parse(field).ok_or_else(unresolved)?,
            },
            ["strategies", strategy, "one_time_cost"] => ParameterPath::OneTimeCost {
                strategy: strategy.to_string(),
            },
            ["strategies", strategy, "transition_matrix", from] => ParameterPath::TransitionRow {
                strategy: strategy.to_string(),
                from: from.to_string(),
            },
            ["discount", "costs"] => ParameterPath::DiscountCosts,
            ["discount", "effects"] => ParameterPath::DiscountEffects,
            _ => return Err(unresolved()),
        };
        let ok = match &path {
            ParameterPath::State { state, .. } => spec.state_index(state).is_some(),
            ParameterPath::OneTimeCost { strategy } => spec.strategy_index(strategy).is_some(),
            ParameterPath::TransitionRow { strategy, from } => spec
                .strategy(strategy)
                .is_some_and(|s| s.transition_matrix.contains_key(from.as_str())),
            ParameterPath::DiscountCosts | ParameterPath::DiscountEffects => true,
        };
        if ok {
            Ok(path)
        } else {
            Err(unresolved())
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            ParameterPath::State {
                field: StateField::Utility,
                ..
            } => Domain::Unit,
            ParameterPath::State { .. } | ParameterPath::OneTimeCost { .. } => Domain::NonNegative,
            ParameterPath::TransitionRow { .. } => Domain::StochasticRow,
            ParameterPath::DiscountCosts | ParameterPath::DiscountEffects => Domain::Rate,
        }
    }

    /// State whose value this path sets, if any.
    pub fn state(&self) -> Option<&str> {
        match self {
            ParameterPath::State { state, .. } => Some(state),
            _ => None,
        }
    }

    pub fn get(&self, spec: &ModelSpec) -> Result<ParamValue> {
        let missing = || Error::UnresolvedPath(self.to_string());
        Ok(match self {
            ParameterPath::State { state, field } => {
                let s = spec.states.iter().find(|s| &s.name == state).ok_or_else(missing)?;
                ParamValue::Scalar(s.field(*field))
            }
            ParameterPath::OneTimeCost { strategy } => {
                ParamValue::Scalar(spec.strategy(strategy).ok_or_else(missing)?.one_time_cost)
            }
            ParameterPath::TransitionRow { strategy, from } => ParamValue::Row(
                spec.strategy(strategy)
                    .and_then(|s| s.transition_matrix.get(from.as_str()))
                    .ok_or_else(missing)?
                    .clone(),
            ),
            ParameterPath::DiscountCosts => ParamValue::Scalar(spec.discount.costs),
            ParameterPath::DiscountEffects => ParamValue::Scalar(spec.discount.effects),
        })
    }

    /// Writes `value`; a scalar into a row slot (or vice versa) is an error.
    pub fn set(&self, spec: &mut ModelSpec, value: ParamValue) -> Result<()> {
        let missing = || Error::UnresolvedPath(self.to_string());
        let incompatible = |expected| Error::IncompatibleValue {
            path: self.to_string(),
            expected,
        };
        match self {
            ParameterPath::TransitionRow { strategy, from } => {
                let ParamValue::Row(row) = value else {
                    return Err(incompatible("row"));
                };
                let n = spec.states.len();
                if row.len() != n {
                    return Err(Error::Dimension(format!(
                        "`{self}` needs {n} entries, got {}",
                        row.len()
                    )));
                }
                let slot = spec
                    .strategies
                    .iter_mut()
                    .find(|s| &s.name == strategy)
                    .and_then(|s| s.transition_matrix.get_mut(from.as_str()))
                    .ok_or_else(missing)?;
                *slot = row;
            }
            _ => {
                let ParamValue::Scalar(v) = value else {
                    return Err(incompatible("scalar"));
                };
                match self {
                    ParameterPath::State { state, field } => {
                        let s = spec
                            .states
                            .iter_mut()
                            .find(|s| &s.name == state)
                            .ok_or_else(missing)?;
                        *s.field_mut(*field) = v;
                    }
                    ParameterPath::OneTimeCost { strategy } => {
                        spec.strategies
                            .iter_mut()
                            .find(|s| &s.name == strategy)
                            .ok_or_else(missing)?
                            .one_time_cost = v;
                    }
                    ParameterPath::DiscountCosts => spec.discount.costs = v,
                    ParameterPath::DiscountEffects => spec.discount.effects = v,
                    ParameterPath::TransitionRow { .. } => unreachable!(),
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ParameterPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterPath::State { state, field } => write!(f, "states.{state}.{}", field.name()),
            ParameterPath::OneTimeCost { strategy } => {
                write!(f, "strategies.{strategy}.one_time_cost")
            }
            ParameterPath::TransitionRow { strategy, from } => {
                write!(f, "strategies.{strategy}.transition_matrix.{from}")
            }
            ParameterPath::DiscountCosts => f.write_str("discount.costs"),
            ParameterPath::DiscountEffects => f.write_str("discount.effects"),
        }
    }
}
