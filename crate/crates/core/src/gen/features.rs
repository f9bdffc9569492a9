//! Feature space of SCE images.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const NUMBER_MIN: u8 = 1;
pub const NUMBER_MAX: u8 = 9;
pub const SHADE_LEVELS: u8 = 6;
pub const SIZE_LEVELS: u8 = 6;
pub const GRID_CELLS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Number,
    Shade,
    Shape,
    Size,
    Positions,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::Number,
        Feature::Shade,
        Feature::Shape,
        Feature::Size,
        Feature::Positions,
    ];

    /// Features that can carry the rule.
    pub const PREDICTIVE: [Feature; 4] = [Feature::Size, Feature::Shade, Feature::Number, Feature::Shape];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Number => "number",
            Feature::Shade => "shade",
            Feature::Shape => "shape",
            Feature::Size => "size",
            Feature::Positions => "positions",
        }
    }

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn can_be_predictive(self) -> bool {
        self != Feature::Positions
    }

    pub fn is_ordered(self) -> bool {
        matches!(self, Feature::Number | Feature::Shade | Feature::Size)
    }

    /// Number of values in the feature's domain (`9!` for positions).
    pub fn cardinality(self) -> usize {
        match self {
            Feature::Number => (NUMBER_MAX - NUMBER_MIN + 1) as usize,
            Feature::Shade => SHADE_LEVELS as usize,
            Feature::Shape => Shape::ALL.len(),
            Feature::Size => SIZE_LEVELS as usize,
            Feature::Positions => (1..=GRID_CELLS).product(),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "number" => Ok(Feature::Number),
            "shade" | "color" | "colour" => Ok(Feature::Shade),
            "shape" => Ok(Feature::Shape),
            "size" => Ok(Feature::Size),
            "positions" | "position" => Ok(Feature::Positions),
            other => Err(format!("unknown feature `{other}`")),
        }
    }
}

impl Serialize for Feature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Set of features, stored as a bitmask over [`Feature::bit`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn from_bits(bits: u8) -> Self {
        Self(bits & 0b1_1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, f: Feature) -> bool {
        self.0 & f.bit() != 0
    }

    pub fn insert(&mut self, f: Feature) {
        self.0 |= f.bit();
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in declaration order.
    pub fn iter(self) -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// Member names sorted lexicographically.
    pub fn sorted_names(self) -> Vec<&'static str> {
        let mut names: Vec<_> = self.iter().map(Feature::name).collect();
        names.sort_unstable();
        names
    }

    /// `+`-joined sorted names, `none` when empty.
    pub fn label(self) -> String {
        if self.is_empty() {
            "none".to_string()
        } else {
            self.sorted_names().join("+")
        }
    }
}

impl FromIterator<Feature> for FeatureSet {
    fn from_iter<I: IntoIterator<Item = Feature>>(iter: I) -> Self {
        let mut s = FeatureSet::empty();
        for f in iter {
            s.insert(f);
        }
        s
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    /// Accepts `none`, an empty string, or names separated by `,` or `+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(FeatureSet::empty());
        }
        s.split([',', '+']).map(str::parse::<Feature>).collect()
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.sorted_names())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names
            .iter()
            .map(|n| n.parse::<Feature>())
            .collect::<Result<FeatureSet, _>>()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Triangle,
    Square,
    Star,
    Hexagon,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::Circle,
        Shape::Triangle,
        Shape::Square,
        Shape::Star,
        Shape::Hexagon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
            Shape::Square => "square",
            Shape::Star => "star",
            Shape::Hexagon => "hexagon",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown shape `{s}`"))
    }
}

/// The value of one rule-bearing feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "feature", content = "value", rename_all = "lowercase")]
pub enum FeatureValue {
    Number(u8),
    Shade(u8),
    Shape(Shape),
    Size(u8),
}

impl FeatureValue {
    pub fn feature(self) -> Feature {
        match self {
            FeatureValue::Number(_) => Feature::Number,
            FeatureValue::Shade(_) => Feature::Shade,
            FeatureValue::Shape(_) => Feature::Shape,
            FeatureValue::Size(_) => Feature::Size,
        }
    }

    /// Every value of a predictive feature's domain, in ascending order.
    pub fn domain(feature: Feature) -> Vec<FeatureValue> {
        match feature {
            Feature::Number => (NUMBER_MIN..=NUMBER_MAX).map(FeatureValue::Number).collect(),
            Feature::Shade => (0..SHADE_LEVELS).map(FeatureValue::Shade).collect(),
            Feature::Shape => Shape::ALL.into_iter().map(FeatureValue::Shape).collect(),
            Feature::Size => (0..SIZE_LEVELS).map(FeatureValue::Size).collect(),
            Feature::Positions => Vec::new(),
        }
    }
}

/// Full description of one image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub number: u8,
    pub shade_idx: u8,
    pub shape: Shape,
    pub size_idx: u8,
    /// Permutation of grid cells 0..9 (row-major); the first `number` are occupied.
    pub positions: [u8; GRID_CELLS],
}

impl FeatureVector {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut fv = FeatureVector {
            number: NUMBER_MIN,
            shade_idx: 0,
            shape: Shape::Circle,
            size_idx: 0,
            positions: [0, 1, 2, 3, 4, 5, 6, 7, 8],
        };
        for f in Feature::ALL {
            fv.resample(f, rng);
        }
        fv
    }

    /// Draws a fresh uniform value for `feature`.
    pub fn resample(&mut self, feature: Feature, rng: &mut impl Rng) {
        match feature {
            Feature::Number => self.number = rng.gen_range(NUMBER_MIN..=NUMBER_MAX),
            Feature::Shade => self.shade_idx = rng.gen_range(0..SHADE_LEVELS),
            Feature::Shape => self.shape = *Shape::ALL.choose(rng).expect("non-empty"),
            Feature::Size => self.size_idx = rng.gen_range(0..SIZE_LEVELS),
            Feature::Positions => {
                let mut cells = [0u8, 1, 2, 3, 4, 5, 6, 7, 8];
                cells.shuffle(rng);
                self.positions = cells;
            }
        }
    }

    pub fn get(&self, feature: Feature) -> Option<FeatureValue> {
        match feature {
            Feature::Number => Some(FeatureValue::Number(self.number)),
            Feature::Shade => Some(FeatureValue::Shade(self.shade_idx)),
            Feature::Shape => Some(FeatureValue::Shape(self.shape)),
            Feature::Size => Some(FeatureValue::Size(self.size_idx)),
            Feature::Positions => None,
        }
    }

    pub fn set(&mut self, value: FeatureValue) {
        match value {
            FeatureValue::Number(v) => self.number = v,
            FeatureValue::Shade(v) => self.shade_idx = v,
            FeatureValue::Shape(v) => self.shape = v,
            FeatureValue::Size(v) => self.size_idx = v,
        }
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = [false; GRID_CELLS];
        for &c in &self.positions {
            if c as usize >= GRID_CELLS || seen[c as usize] {
                return false;
            }
            seen[c as usize] = true;
        }
        (NUMBER_MIN..=NUMBER_MAX).contains(&self.number) && self.shade_idx < SHADE_LEVELS && self.size_idx < SIZE_LEVELS
    }

    /// Occupied cells, in placement order.
    pub fn occupied(&self) -> &[u8] {
        &self.positions[..self.number as usize]
    }

    /// True when `self` and `other` agree on `feature`.
    pub fn same(&self, other: &FeatureVector, feature: Feature) -> bool {
        match feature {
            Feature::Positions => self.positions == other.positions,
            f => self.get(f) == other.get(f),
        }
    }
}
