use serde::{Deserialize, Serialize};

use super::features::{Feature, FeatureValue, Shape, NUMBER_MAX, NUMBER_MIN, SHADE_LEVELS, SIZE_LEVELS};
use super::GenError;

/// Deterministic successor rule for the predictive feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Adds `direction` (+1 or -1) to an ordered feature.
    MonotonicStep { feature: Feature, direction: i8 },
    /// Swaps between two distinct shapes.
    Alternating { shape_a: Shape, shape_b: Shape },
}

impl Rule {
    pub fn monotonic(feature: Feature, direction: i8) -> Result<Self, GenError> {
        if !feature.is_ordered() {
            return Err(GenError::WrongFeature(format!("{feature} is not an ordered feature")));
        }
        if direction != 1 && direction != -1 {
            return Err(GenError::InvalidSpec(format!(
                "direction must be +1 or -1, got {direction}"
            )));
        }
        Ok(Rule::MonotonicStep { feature, direction })
    }

    pub fn alternating(shape_a: Shape, shape_b: Shape) -> Result<Self, GenError> {
        if shape_a == shape_b {
            return Err(GenError::InvalidSpec(format!(
                "alternating rule needs two distinct shapes, got {shape_a} twice"
            )));
        }
        Ok(Rule::Alternating { shape_a, shape_b })
    }

    pub fn feature(&self) -> Feature {
        match self {
            Rule::MonotonicStep { feature, .. } => *feature,
            Rule::Alternating { .. } => Feature::Shape,
        }
    }
}

/// Successor of `value` under `rule`.
pub fn apply_rule(rule: &Rule, value: FeatureValue) -> Result<FeatureValue, GenError> {
    match *rule {
        Rule::MonotonicStep { feature, direction } => {
            if value.feature() != feature {
                return Err(GenError::WrongFeature(format!(
                    "rule on {feature} applied to a {} value",
                    value.feature()
                )));
            }
            let (v, lo, hi) = match value {
                FeatureValue::Number(v) => (v, NUMBER_MIN, NUMBER_MAX),
                FeatureValue::Shade(v) => (v, 0, SHADE_LEVELS - 1),
                FeatureValue::Size(v) => (v, 0, SIZE_LEVELS - 1),
                FeatureValue::Shape(_) => unreachable!("monotonic rules are built on ordered features"),
            };
            let next = v as i16 + direction as i16;
            if next < lo as i16 || next > hi as i16 {
                return Err(GenError::OutOfRange(format!(
                    "{feature} {v} {direction:+} leaves [{lo}, {hi}]"
                )));
            }
            let next = next as u8;
            Ok(match value {
                FeatureValue::Number(_) => FeatureValue::Number(next),
                FeatureValue::Shade(_) => FeatureValue::Shade(next),
                _ => FeatureValue::Size(next),
            })
        }
        Rule::Alternating { shape_a, shape_b } => match value {
            FeatureValue::Shape(s) if s == shape_a => Ok(FeatureValue::Shape(shape_b)),
            FeatureValue::Shape(s) if s == shape_b => Ok(FeatureValue::Shape(shape_a)),
            FeatureValue::Shape(s) => Err(GenError::OutOfRange(format!(
                "{s} is not part of the {shape_a}/{shape_b} alternation"
            ))),
            other => Err(GenError::WrongFeature(format!(
                "shape rule applied to a {} value",
                other.feature()
            ))),
        },
    }
}
