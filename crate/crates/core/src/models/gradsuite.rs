//! Finite-difference checks of every primitive layer and every model loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{grad_check, init_uniform, ConvGeom, GradCheckReport, Param, ParamSet, Tape, TensorError, Var};
use crate::gen::{generate, Feature, FeatureSet, TestSpec};
use crate::seed::mix;

use super::{to_input, ModelBundle, ModelError, Negatives, Variant};

/// Largest relative error tolerated by the suite.
pub const GRAD_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradCase {
    pub name: String,
    pub report: GradCheckReport,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error < GRAD_TOLERANCE
    }
}

fn random_params(shapes: &[(&str, &[usize])], seed: u64) -> ParamSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ParamSet::new();
    for (name, shape) in shapes {
        let mut p = Param::zeros(*name, shape);
        init_uniform(&mut p, 1, &mut rng);
        set.push(p);
    }
    set
}

fn layer_case<L>(
    name: &str,
    shapes: &[(&str, &[usize])],
    loss: L,
    budget: usize,
    seed: u64,
) -> Result<GradCase, ModelError>
where
    L: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let params = random_params(shapes, seed);
    let report = grad_check(&params, |t: &mut Tape<f64>, v: &[Var]| loss(t, v), budget, seed)?;
    Ok(GradCase {
        name: name.into(),
        report,
    })
}

/// A weighted sum that gives every output element a distinct gradient.
fn probe(tape: &mut Tape<f64>, x: Var) -> Result<Var, TensorError> {
    let n = tape.value(x).len();
    let x = tape.reshape(x, &[n])?;
    let w = tape.input(&[n], (0..n).map(|i| 0.3 + 0.7 * ((i * 7 % 11) as f64 / 11.0)).collect())?;
    let y = tape.mul(x, w)?;
    Ok(tape.sum(y))
}

/// Primitive operations on small random tensors.
pub fn layer_cases(budget: usize, seed: u64) -> Result<Vec<GradCase>, ModelError> {
    let mut out = Vec::new();
    out.push(layer_case(
        "linear",
        &[("x", &[6]), ("w", &[4, 6]), ("b", &[4])],
        |t, v| {
            let y = t.linear(v[0], v[1], Some(v[2]))?;
            probe(t, y)
        },
        budget,
        seed,
    )?);
    for (name, stride) in [("conv2d-stride1", 1), ("conv2d-stride2", 2)] {
        out.push(layer_case(
            name,
            &[("x", &[2, 7, 6]), ("w", &[3, 2, 3, 3]), ("b", &[3])],
            |t, v| {
                let y = t.conv2d(v[0], v[1], v[2], ConvGeom { stride, pad: 1 })?;
                probe(t, y)
            },
            budget,
            seed,
        )?);
    }
    type Unary = fn(&mut Tape<f64>, Var) -> Var;
    let unary: [(&str, Unary); 4] = [
        ("relu", |t, x| t.relu(x)),
        ("tanh", |t, x| t.tanh(x)),
        ("sigmoid", |t, x| t.sigmoid(x)),
        ("square", |t, x| t.square(x)),
    ];
    for (name, f) in unary {
        out.push(layer_case(
            name,
            &[("x", &[9])],
            |t, v| {
                let y = f(t, v[0]);
                probe(t, y)
            },
            budget,
            seed,
        )?);
    }
    out.push(layer_case(
        "logsumexp",
        &[("x", &[7])],
        |t, v| {
            let s = t.scale(v[0], 3.0);
            t.logsumexp(s)
        },
        budget,
        seed,
    )?);
    out.push(layer_case(
        "mul-sub-add",
        &[("a", &[5]), ("b", &[5]), ("c", &[5])],
        |t, v| {
            let ab = t.mul(v[0], v[1])?;
            let d = t.sub(ab, v[2])?;
            let e = t.add(d, v[0])?;
            probe(t, e)
        },
        budget,
        seed,
    )?);
    out.push(layer_case(
        "concat-slice-reshape",
        &[("a", &[2, 3]), ("b", &[4])],
        |t, v| {
            let a = t.reshape(v[0], &[6])?;
            let c = t.concat(&[a, v[1]])?;
            let s = t.slice(c, 3, 5)?;
            let sq = t.square(s);
            probe(t, sq)
        },
        budget,
        seed,
    )?);
    Ok(out)
}

fn sequence_inputs(seed: u64) -> Vec<Vec<f64>> {
    let spec = TestSpec::new(Feature::Size, FeatureSet::from_bits(0)).with_seed(seed);
    let test = generate(&spec).expect("size-easy tests are always feasible");
    test.sequence_images.iter().map(to_input).collect()
}

/// The full objective of `variant` on a rendered sequence, with the
/// encoder included.
pub fn model_case(
    name: &str,
    variant: Variant,
    negatives: Negatives,
    budget: usize,
    seed: u64,
) -> Result<GradCase, ModelError> {
    let mut config = variant.config();
    config.negatives = negatives;
    let bundle = ModelBundle::<f64>::new(config, mix(seed, 1))?;
    let inputs = sequence_inputs(mix(seed, 2));
    let report = grad_check(
        bundle.params(),
        |tape: &mut Tape<f64>, vars: &[Var]| {
            let fwd = bundle.bind_vars(vars.to_vec());
            let latents = fwd.encode_all(tape, &inputs)?;
            fwd.sequence_loss(tape, &latents)
        },
        budget,
        seed,
    )?;
    Ok(GradCase {
        name: name.into(),
        report,
    })
}

/// Every loss family and context type, plus a wider latent so the
/// predictor and recurrent maps are not all scalars.
pub fn model_cases(budget: usize, seed: u64) -> Result<Vec<GradCase>, ModelError> {
    let cases = [
        ("infonce", Variant::Mcpc, Negatives::All),
        ("infonce-exclude-self", Variant::Mcpc, Negatives::ExcludeSelf),
        ("infonce-nonres", Variant::McpcNonres, Negatives::All),
        ("infonce-d10", Variant::McpcDim(10), Negatives::All),
        ("no-contrast", Variant::McpcNocontrast, Negatives::All),
        ("relation", Variant::Rn, Negatives::All),
        ("relation-deep", Variant::RnDeep, Negatives::All),
        ("rnn-context", Variant::RnnCpc, Negatives::All),
        ("lstm-context", Variant::LstmCpc, Negatives::All),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(i, &(name, v, neg))| model_case(name, v, neg, budget, mix(seed, i as u64)))
        .collect()
}

/// Layers first, then model losses.
pub fn gradient_suite(budget: usize, seed: u64) -> Result<Vec<GradCase>, ModelError> {
    let mut all = layer_cases(budget, seed)?;
    all.extend(model_cases(budget, seed)?);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_passes() {
        for case in layer_cases(200, 3).unwrap() {
            assert!(case.passed(), "{}: {:?}", case.name, case.report);
            assert_eq!(case.report.checked, case.report.total);
        }
    }
}
