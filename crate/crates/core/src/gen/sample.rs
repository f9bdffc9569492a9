//! Test specifications, random test construction and the condition grid.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Feature, FeatureSet, FeatureValue, FeatureVector, Shape, NUMBER_MAX, NUMBER_MIN};
use super::render::{render, Image, RenderConfig};
use super::rule::{apply_rule, Rule};
use super::GenError;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_N: usize = 4;

fn default_k() -> usize {
    DEFAULT_K
}

fn default_n() -> usize {
    DEFAULT_N
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    pub predictive: Feature,
    pub distractors: FeatureSet,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Alternate between a random pair of shapes instead of triangle/square.
    #[serde(default)]
    pub random_shape_pair: bool,
    /// Monotonic rules step up or down with equal probability instead of
    /// always increasing.
    #[serde(default)]
    pub bidirectional: bool,
}

impl TestSpec {
    pub fn new(predictive: Feature, distractors: FeatureSet) -> Self {
        Self {
            predictive,
            distractors,
            k: DEFAULT_K,
            n: DEFAULT_N,
            seed: 0,
            random_shape_pair: false,
            bidirectional: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn difficulty(&self) -> usize {
        self.distractors.len()
    }

    /// Stable identifier of the condition (predictive feature and
    /// distractor set); independent of K, n and seed.
    pub fn condition_id(&self) -> u64 {
        self.predictive.index() as u64 * 32 + self.distractors.bits() as u64
    }

    /// e.g. `size/none`, `shade/number+positions`.
    pub fn condition_label(&self) -> String {
        format!("{}/{}", self.predictive, self.distractors.label())
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if !self.predictive.can_be_predictive() {
            return Err(GenError::InvalidSpec(
                "positions cannot be the predictive feature".into(),
            ));
        }
        if self.distractors.contains(self.predictive) {
            return Err(GenError::InvalidSpec(format!(
                "{} is both predictive and a distractor",
                self.predictive
            )));
        }
        if self.k < 1 || self.n < 1 {
            return Err(GenError::InvalidSpec(format!(
                "K={} and n={} must be positive",
                self.k, self.n
            )));
        }
        Ok(())
    }
}

/// One generated test: the sequence, the choices and their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceTest {
    pub spec: TestSpec,
    pub rule: Rule,
    pub sequence_features: Vec<FeatureVector>,
    pub choice_features: Vec<FeatureVector>,
    pub correct_idx: usize,
    #[serde(skip)]
    pub sequence_images: Vec<Image>,
    #[serde(skip)]
    pub choice_images: Vec<Image>,
}

impl SceTest {
    /// The value the rule predicts for the (K+1)-th image.
    pub fn expected_next(&self) -> FeatureValue {
        let last = self.sequence_features.last().expect("K >= 1");
        let v = last.get(self.spec.predictive).expect("predictive feature has a value");
        apply_rule(&self.rule, v).expect("rule was applicable during generation")
    }

    /// Re-renders every image from its features.
    pub fn render_images(&mut self, cfg: &RenderConfig) {
        self.sequence_images = self.sequence_features.iter().map(|f| render(f, cfg)).collect();
        self.choice_images = self.choice_features.iter().map(|f| render(f, cfg)).collect();
    }
}

fn sample_direction(spec: &TestSpec, rng: &mut impl Rng) -> i8 {
    if spec.bidirectional && rng.gen_bool(0.5) {
        -1
    } else {
        1
    }
}

fn sample_rule(spec: &TestSpec, rng: &mut impl Rng) -> Result<(Rule, FeatureValue), GenError> {
    let k = spec.k;
    match spec.predictive {
        Feature::Shade | Feature::Size => {
            let levels = spec.predictive.cardinality() as u8;
            if k + 1 > levels as usize {
                return Err(GenError::InfeasibleSpec(format!(
                    "{} has {levels} levels, K={k} needs {}",
                    spec.predictive,
                    k + 1
                )));
            }
            let direction = sample_direction(spec, rng);
            let start = if direction > 0 { 0 } else { levels - 1 };
            let value = if spec.predictive == Feature::Shade {
                FeatureValue::Shade(start)
            } else {
                FeatureValue::Size(start)
            };
            Ok((Rule::monotonic(spec.predictive, direction)?, value))
        }
        Feature::Number => {
            let span = (NUMBER_MAX - NUMBER_MIN) as usize;
            if k > span {
                return Err(GenError::InfeasibleSpec(format!("number cannot take {} steps", k)));
            }
            let direction = sample_direction(spec, rng);
            // K steps (sequence plus the answer) must stay inside 1..=9
            let start = if direction > 0 {
                rng.gen_range(NUMBER_MIN..=NUMBER_MAX - k as u8)
            } else {
                rng.gen_range(NUMBER_MIN + k as u8..=NUMBER_MAX)
            };
            Ok((
                Rule::monotonic(Feature::Number, direction)?,
                FeatureValue::Number(start),
            ))
        }
        Feature::Shape => {
            let (a, b) = if spec.random_shape_pair {
                let picks = index::sample(rng, Shape::ALL.len(), 2);
                (Shape::ALL[picks.index(0)], Shape::ALL[picks.index(1)])
            } else {
                (Shape::Triangle, Shape::Square)
            };
            let start = if rng.gen_bool(0.5) { a } else { b };
            Ok((Rule::alternating(a, b)?, FeatureValue::Shape(start)))
        }
        Feature::Positions => Err(GenError::InvalidSpec("positions cannot be predictive".into())),
    }
}

fn derive_image<R: Rng>(
    base: &FeatureVector,
    value: FeatureValue,
    distractors: FeatureSet,
    rng: &mut R,
) -> FeatureVector {
    let mut fv = base.clone();
    fv.set(value);
    for d in distractors.iter() {
        fv.resample(d, rng);
    }
    fv
}

/// Draws one test for `spec` from `rng`, rendering with the default config.
pub fn sample_test(spec: &TestSpec, rng: &mut impl Rng) -> Result<SceTest, GenError> {
    sample_test_with(spec, rng, &RenderConfig::default())
}

pub fn sample_test_with(spec: &TestSpec, rng: &mut impl Rng, cfg: &RenderConfig) -> Result<SceTest, GenError> {
    spec.validate()?;
    let (rule, start) = sample_rule(spec, rng)?;

    let mut values = Vec::with_capacity(spec.k);
    let mut v = start;
    values.push(v);
    for _ in 1..spec.k {
        v = apply_rule(&rule, v)?;
        values.push(v);
    }
    let correct = apply_rule(&rule, v)?;

    let wrong_pool: Vec<FeatureValue> = FeatureValue::domain(spec.predictive)
        .into_iter()
        .filter(|x| *x != correct)
        .collect();
    if wrong_pool.len() < spec.n - 1 {
        return Err(GenError::InfeasibleSpec(format!(
            "{} offers {} incorrect values, n={} needs {}",
            spec.predictive,
            wrong_pool.len(),
            spec.n,
            spec.n - 1
        )));
    }

    let base = FeatureVector::random(rng);
    let correct_idx = rng.gen_range(0..spec.n);
    let picks = index::sample(rng, wrong_pool.len(), spec.n - 1).into_vec();
    let mut wrong = picks.iter().map(|&i| wrong_pool[i]);

    let sequence_features: Vec<FeatureVector> = values
        .iter()
        .map(|&v| derive_image(&base, v, spec.distractors, rng))
        .collect();
    let mut choice_features = Vec::with_capacity(spec.n);
    for c in 0..spec.n {
        let value = if c == correct_idx {
            correct
        } else {
            wrong.next().expect("n - 1 incorrect values")
        };
        choice_features.push(derive_image(&base, value, spec.distractors, rng));
    }

    let mut test = SceTest {
        spec: spec.clone(),
        rule,
        sequence_features,
        choice_features,
        correct_idx,
        sequence_images: Vec::new(),
        choice_images: Vec::new(),
    };
    test.render_images(cfg);
    Ok(test)
}

/// Generates the test determined by `spec.seed`.
pub fn generate(spec: &TestSpec) -> Result<SceTest, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_test(spec, &mut rng)
}

/// All 16 distractor subsets of the four non-predictive features, ordered
/// by difficulty and then by the sorted feature names.
pub fn condition_grid(predictive: Feature) -> Result<Vec<TestSpec>, GenError> {
    if !predictive.can_be_predictive() {
        return Err(GenError::InvalidSpec("positions cannot be predictive".into()));
    }
    let others: Vec<Feature> = Feature::ALL.into_iter().filter(|f| *f != predictive).collect();
    let mut sets: Vec<FeatureSet> = (0u8..16)
        .map(|mask| {
            others
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, f)| *f)
                .collect()
        })
        .collect();
    sets.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.sorted_names().cmp(&b.sorted_names()))
    });
    Ok(sets.into_iter().map(|d| TestSpec::new(predictive, d)).collect())
}

/// The 64-condition grid, predictive features in the order size, shade,
/// number, shape.
pub fn full_grid() -> Vec<TestSpec> {
    Feature::PREDICTIVE
        .into_iter()
        .flat_map(|p| condition_grid(p).expect("predictive feature"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn size_easy_spans_whole_domain() {
        let spec = TestSpec::new(Feature::Size, FeatureSet::empty());
        let t = sample_test(&spec, &mut rng(7)).unwrap();
        let seq: Vec<u8> = t.sequence_features.iter().map(|f| f.size_idx).collect();
        let answer = t.choice_features[t.correct_idx].size_idx;
        assert!(seq == vec![0, 1, 2, 3, 4] && answer == 5 || seq == vec![5, 4, 3, 2, 1] && answer == 0);
        let first = &t.sequence_features[0];
        for fv in t.sequence_features.iter().chain(&t.choice_features) {
            for f in [Feature::Number, Feature::Shade, Feature::Shape, Feature::Positions] {
                assert!(fv.same(first, f), "{f} not constant");
            }
        }
    }

    #[test]
    fn hardest_shade_test_has_difficulty_four() {
        let spec = TestSpec::new(Feature::Shade, "number,shape,size,positions".parse().unwrap());
        assert_eq!(spec.difficulty(), 4);
        let t = sample_test(&spec, &mut rng(3)).unwrap();
        assert_eq!(t.sequence_images.len(), 5);
        assert_eq!(t.choice_images.len(), 4);
    }

    #[test]
    fn monotonic_rules_increase_unless_bidirectional() {
        for f in [Feature::Size, Feature::Shade, Feature::Number] {
            let spec = TestSpec::new(f, FeatureSet::empty());
            let mut both = spec.clone();
            both.bidirectional = true;
            let mut seen = [0usize; 2];
            for seed in 0..100 {
                assert!(matches!(
                    sample_test(&spec, &mut rng(seed)).unwrap().rule,
                    Rule::MonotonicStep { direction: 1, .. }
                ));
                if let Rule::MonotonicStep { direction, .. } = sample_test(&both, &mut rng(seed)).unwrap().rule {
                    seen[(direction > 0) as usize] += 1;
                }
            }
            assert!(seen[0] > 25 && seen[1] > 25, "{f}: {seen:?}");
        }
    }

    #[test]
    fn number_starts_leave_room_for_answer() {
        for seed in 0..200 {
            let mut spec = TestSpec::new(Feature::Number, FeatureSet::empty());
            spec.bidirectional = true;
            let t = sample_test(&spec, &mut rng(seed)).unwrap();
            let first = t.sequence_features[0].number;
            let ascending = t.sequence_features[1].number > first;
            if ascending {
                assert!((1..=4).contains(&first));
            } else {
                assert!((6..=9).contains(&first));
            }
        }
    }

    #[test]
    fn shape_rule_defaults_to_triangle_square() {
        let spec = TestSpec::new(Feature::Shape, FeatureSet::empty());
        let t = sample_test(&spec, &mut rng(11)).unwrap();
        match t.rule {
            Rule::Alternating { shape_a, shape_b } => {
                assert_eq!((shape_a, shape_b), (Shape::Triangle, Shape::Square))
            }
            other => panic!("{other:?}"),
        }
        let mut random = spec.clone();
        random.random_shape_pair = true;
        let t = sample_test(&random, &mut rng(11)).unwrap();
        assert!(matches!(t.rule, Rule::Alternating { shape_a, shape_b } if shape_a != shape_b));
    }

    #[test]
    fn infeasible_choice_count() {
        let mut spec = TestSpec::new(Feature::Shape, FeatureSet::empty());
        spec.n = 6;
        assert!(matches!(
            sample_test(&spec, &mut rng(0)),
            Err(GenError::InfeasibleSpec(_))
        ));
        let mut long = TestSpec::new(Feature::Size, FeatureSet::empty());
        long.k = 6;
        assert!(matches!(
            sample_test(&long, &mut rng(0)),
            Err(GenError::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        let mut s = TestSpec::new(Feature::Size, FeatureSet::empty());
        s.distractors.insert(Feature::Size);
        assert!(s.validate().is_err());
        assert!(TestSpec::new(Feature::Positions, FeatureSet::empty())
            .validate()
            .is_err());
    }

    #[test]
    fn grid_orders_by_difficulty_then_names() {
        let g = condition_grid(Feature::Size).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g[0].difficulty(), 0);
        assert_eq!(g[15].difficulty(), 4);
        assert_eq!(g.iter().filter(|s| s.difficulty() == 0).count(), 1);
        assert_eq!(g.iter().filter(|s| s.difficulty() == 4).count(), 1);
        let labels: Vec<String> = g[1..5].iter().map(|s| s.distractors.label()).collect();
        assert_eq!(labels, ["number", "positions", "shade", "shape"]);
        for w in g.windows(2) {
            assert!(w[0].difficulty() <= w[1].difficulty());
        }
        let shape = condition_grid(Feature::Shape).unwrap();
        assert_eq!(
            shape
                .iter()
                .filter(|s| s.distractors.contains(Feature::Positions))
                .count(),
            8
        );
        assert_eq!(full_grid().len(), 64);
        assert!(condition_grid(Feature::Positions).is_err());
    }

    #[test]
    fn condition_ids_are_unique() {
        let mut ids: Vec<u64> = full_grid().iter().map(TestSpec::condition_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 64);
    }

    #[test]
    fn manifest_json_shape() {
        let spec = TestSpec::new(Feature::Size, "shape".parse().unwrap()).with_seed(5);
        let t = generate(&spec).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["spec"]["predictive"], "size");
        assert_eq!(v["spec"]["distractors"], serde_json::json!(["shape"]));
        assert_eq!(v["rule"]["kind"], "monotonic_step");
        let back: SceTest = serde_json::from_value(v).unwrap();
        assert_eq!(back.sequence_features, t.sequence_features);
    }
}
