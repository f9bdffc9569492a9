//! Model parameters, their architecture and the forward pass.

use crate::autodiff::{init_uniform, ConvGeom, InitSpec, OptimizerState, Param, ParamId, ParamSet, Real, Tape, Var};
use crate::gen::Image;

use super::losses::{error_matrix, infonce_from_errors, nocontrast_from_errors, prediction_error, relation_loss};
use super::{ContextKind, EncoderKind, ModelConfig, ModelError, Objective, PredictorKind};

const HIDDEN: usize = 32;
const DEEP_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Conv {
    w: ParamId,
    b: ParamId,
    geom: ConvGeom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
enum Context {
    Markov,
    Rnn { input: Dense, recurrent: ParamId },
    Lstm { gates: Dense },
}

#[derive(Debug, Clone, PartialEq)]
struct Architecture {
    convs: Vec<Conv>,
    /// Encoder head; ReLU between layers, none after the last.
    head: Vec<Dense>,
    /// dT / T body.
    predictor: Option<[Dense; 2]>,
    context: Context,
    relation: Option<[Dense; 2]>,
}

struct Builder<'a, F, R> {
    params: &'a mut ParamSet<F>,
    rng: &'a mut R,
}

impl<F: Real, R: rand::Rng> Builder<'_, F, R> {
    fn tensor(&mut self, name: String, shape: &[usize], fan_in: usize) -> ParamId {
        let mut p = Param::zeros(name, shape);
        init_uniform(&mut p, fan_in, self.rng);
        self.params.push(p)
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, stride: usize) -> Conv {
        let fan_in = cin * 9;
        Conv {
            w: self.tensor(format!("{name}.w"), &[cout, cin, 3, 3], fan_in),
            b: self.tensor(format!("{name}.b"), &[cout], fan_in),
            geom: ConvGeom { stride, pad: 1 },
        }
    }

    fn dense(&mut self, name: &str, n_in: usize, n_out: usize) -> Dense {
        Dense {
            w: self.tensor(format!("{name}.w"), &[n_out, n_in], n_in),
            b: self.tensor(format!("{name}.b"), &[n_out], n_in),
        }
    }
}

/// Encoder, predictor, optional context and relation head, plus the
/// optimizer state that goes with them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<F: Real> {
    config: ModelConfig,
    seed: u64,
    params: ParamSet<F>,
    arch: Architecture,
    optimizer: OptimizerState<F>,
}

impl<F: Real> ModelBundle<F> {
    /// Freshly initialized model; identical seeds give identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let mut params = ParamSet::new();
        let mut rng = InitSpec::new(seed).rng();
        let mut b = Builder {
            params: &mut params,
            rng: &mut rng,
        };
        let enc = config.encoder;
        let d = enc.latent_dim;
        let (channels, extra, hidden): (&[usize], bool, Option<usize>) = match enc.kind {
            EncoderKind::Simple => (&[8, 16, 32, 32], false, None),
            EncoderKind::Deep => (&[16, 32, 64, 64], true, Some(DEEP_HIDDEN)),
        };
        let mut convs = Vec::new();
        let (mut c, mut h, mut w) = (1usize, enc.input_height, enc.input_width);
        for (i, &out) in channels.iter().enumerate() {
            let conv = b.conv(&format!("encoder.conv{i}"), c, out, 2);
            h = conv.geom.out_len(h, 3);
            w = conv.geom.out_len(w, 3);
            c = out;
            convs.push(conv);
        }
        if extra {
            convs.push(b.conv(&format!("encoder.conv{}", channels.len()), c, c, 1));
        }
        let flat = c * h * w;
        let head = match hidden {
            None => vec![b.dense("encoder.fc0", flat, d)],
            Some(hd) => vec![b.dense("encoder.fc0", flat, hd), b.dense("encoder.fc1", hd, d)],
        };
        let predictor = config
            .objective
            .is_predictive()
            .then(|| [b.dense("predictor.fc0", d, HIDDEN), b.dense("predictor.fc1", HIDDEN, d)]);
        let context = match config.context {
            ContextKind::Markov => Context::Markov,
            ContextKind::Rnn => Context::Rnn {
                input: b.dense("context.rnn.input", d, d),
                recurrent: b.tensor("context.rnn.recurrent.w".into(), &[d, d], d),
            },
            ContextKind::Lstm => Context::Lstm {
                gates: b.dense("context.lstm.gates", 2 * d, 4 * d),
            },
        };
        let relation = (config.objective == Objective::Relation).then(|| {
            [
                b.dense("relation.fc0", 2 * d, HIDDEN),
                b.dense("relation.fc1", HIDDEN, 1),
            ]
        });
        Ok(Self {
            config,
            seed,
            params,
            arch: Architecture {
                convs,
                head,
                predictor,
                context,
                relation,
            },
            optimizer: OptimizerState::new(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamSet<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<F> {
        &mut self.params
    }

    pub fn optimizer(&self) -> &OptimizerState<F> {
        &self.optimizer
    }

    pub fn num_params(&self) -> usize {
        self.params.numel()
    }

    pub fn has_relation_head(&self) -> bool {
        self.arch.relation.is_some()
    }

    /// Binds the parameters to `tape` for one forward pass.
    pub fn bind<'a>(&'a self, tape: &mut Tape<F>) -> Forward<'a, F> {
        Forward {
            bundle: self,
            vars: tape.bind_all(&self.params),
        }
    }

    /// Binds externally owned parameters laid out like this bundle's
    /// (used by gradient checks that perturb copies).
    pub fn bind_vars<'a>(&'a self, vars: Vec<Var>) -> Forward<'a, F> {
        Forward { bundle: self, vars }
    }

    /// Loss of the model's objective on `inputs`.
    pub fn loss(&self, inputs: &[Vec<F>]) -> Result<F, ModelError> {
        let mut tape = Tape::new();
        let fwd = self.bind(&mut tape);
        let latents = fwd.encode_all(&mut tape, inputs)?;
        let loss = fwd.sequence_loss(&mut tape, &latents)?;
        Ok(tape.scalar(loss))
    }

    /// One optimizer step on the objective over `inputs`; returns the loss
    /// before the step.
    pub fn train_step(&mut self, inputs: &[Vec<F>]) -> Result<F, ModelError> {
        self.params.zero_grad();
        let mut tape = Tape::new();
        let loss = {
            let fwd = self.bind(&mut tape);
            let latents = fwd.encode_all(&mut tape, inputs)?;
            fwd.sequence_loss(&mut tape, &latents)?
        };
        tape.backward(loss, &mut self.params)?;
        self.optimizer.step(&self.config.optimizer, &mut self.params)?;
        Ok(tape.scalar(loss))
    }
}

/// Maps 8-bit pixels to `2 * v / 255 - 1`.
pub fn to_input<F: Real>(img: &Image) -> Vec<F> {
    img.pixels
        .iter()
        .map(|&v| F::of(2.0 * (v as f64 / 255.0) - 1.0))
        .collect()
}

/// Parameters bound to a tape.
pub struct Forward<'a, F: Real> {
    bundle: &'a ModelBundle<F>,
    vars: Vec<Var>,
}

impl<F: Real> Forward<'_, F> {
    fn v(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }

    fn dense(&self, tape: &mut Tape<F>, layer: Dense, x: Var) -> Result<Var, ModelError> {
        Ok(tape.linear(x, self.v(layer.w), Some(self.v(layer.b)))?)
    }

    /// `z = Z(x)` for one preprocessed image.
    pub fn encode(&self, tape: &mut Tape<F>, input: &[F]) -> Result<Var, ModelError> {
        let enc = self.bundle.config.encoder;
        let mut x = tape.input(&[1, enc.input_height, enc.input_width], input.to_vec())?;
        for conv in &self.bundle.arch.convs {
            let y = tape.conv2d(x, self.v(conv.w), self.v(conv.b), conv.geom)?;
            x = tape.relu(y);
        }
        let n = tape.value(x).len();
        x = tape.reshape(x, &[n])?;
        let head = &self.bundle.arch.head;
        for (i, layer) in head.iter().enumerate() {
            x = self.dense(tape, *layer, x)?;
            if i + 1 < head.len() {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    pub fn encode_all(&self, tape: &mut Tape<F>, inputs: &[Vec<F>]) -> Result<Vec<Var>, ModelError> {
        inputs.iter().map(|x| self.encode(tape, x)).collect()
    }

    /// `T(z)`, residual or not.
    pub fn predict(&self, tape: &mut Tape<F>, z: Var) -> Result<Var, ModelError> {
        let [l0, l1] = self.bundle.arch.predictor.ok_or(ModelError::MissingPredictor)?;
        let h = self.dense(tape, l0, z)?;
        let h = tape.relu(h);
        let delta = self.dense(tape, l1, h)?;
        match self.bundle.config.predictor {
            PredictorKind::Residual => Ok(tape.add(z, delta)?),
            PredictorKind::NonResidual => Ok(delta),
        }
    }

    /// Context states `c_1..c_m`; the latents themselves for Markov models.
    pub fn contexts(&self, tape: &mut Tape<F>, latents: &[Var]) -> Result<Vec<Var>, ModelError> {
        let d = self.bundle.config.latent_dim();
        match &self.bundle.arch.context {
            Context::Markov => Ok(latents.to_vec()),
            Context::Rnn { input, recurrent } => {
                let mut out: Vec<Var> = Vec::with_capacity(latents.len());
                for &z in latents {
                    let mut pre = self.dense(tape, *input, z)?;
                    if let Some(&prev) = out.last() {
                        let rec = tape.linear(prev, self.v(*recurrent), None)?;
                        pre = tape.add(pre, rec)?;
                    }
                    out.push(tape.tanh(pre));
                }
                Ok(out)
            }
            Context::Lstm { gates } => {
                let mut h = tape.input(&[d], vec![F::zero(); d])?;
                let mut c = tape.input(&[d], vec![F::zero(); d])?;
                let mut out = Vec::with_capacity(latents.len());
                for &z in latents {
                    let zh = tape.concat(&[z, h])?;
                    let g = self.dense(tape, *gates, zh)?;
                    let gi = tape.slice(g, 0, d)?;
                    let gf = tape.slice(g, d, d)?;
                    let gg = tape.slice(g, 2 * d, d)?;
                    let go = tape.slice(g, 3 * d, d)?;
                    let i = tape.sigmoid(gi);
                    let f = tape.sigmoid(gf);
                    let cand = tape.tanh(gg);
                    let o = tape.sigmoid(go);
                    let keep = tape.mul(f, c)?;
                    let write = tape.mul(i, cand)?;
                    c = tape.add(keep, write)?;
                    let tc = tape.tanh(c);
                    h = tape.mul(o, tc)?;
                    out.push(h);
                }
                Ok(out)
            }
        }
    }

    /// Prediction sources `T(c_a)` for every position.
    pub fn predictions(&self, tape: &mut Tape<F>, latents: &[Var]) -> Result<Vec<Var>, ModelError> {
        let ctx = self.contexts(tape, latents)?;
        ctx.into_iter().map(|c| self.predict(tape, c)).collect()
    }

    /// `g(z_a ++ z_b)` in (0, 1).
    pub fn relation(&self, tape: &mut Tape<F>, za: Var, zb: Var) -> Result<Var, ModelError> {
        let [l0, l1] = self.bundle.arch.relation.ok_or(ModelError::MissingHead)?;
        let x = tape.concat(&[za, zb])?;
        let h = self.dense(tape, l0, x)?;
        let h = tape.relu(h);
        let s = self.dense(tape, l1, h)?;
        Ok(tape.sigmoid(s))
    }

    /// The model's objective over a latent sequence.
    pub fn sequence_loss(&self, tape: &mut Tape<F>, latents: &[Var]) -> Result<Var, ModelError> {
        let m = latents.len();
        if m < 2 {
            return Err(ModelError::TooShort { m, min: 2 });
        }
        match self.bundle.config.objective {
            Objective::InfoNce => {
                let preds = self.predictions(tape, latents)?;
                let errors = error_matrix(tape, &preds[..m - 1], latents)?;
                infonce_from_errors(tape, &errors, self.bundle.config.negatives)
            }
            Objective::NoContrast => {
                let consecutive = self.consecutive_errors(tape, latents)?;
                nocontrast_from_errors(tape, &consecutive)
            }
            Objective::Relation => relation_loss(tape, latents, |t, a, b| self.relation(t, a, b)),
        }
    }

    /// `eps_{j,j+1}` for `j = 1..m-1`.
    pub fn consecutive_errors(&self, tape: &mut Tape<F>, latents: &[Var]) -> Result<Vec<Var>, ModelError> {
        let preds = self.predictions(tape, latents)?;
        (0..latents.len().saturating_sub(1))
            .map(|j| prediction_error(tape, preds[j], latents[j + 1]))
            .collect()
    }

    /// Consistency of the last element with the one before it alone:
    /// `eps_{m-1,m}` for predictive models, `(g(z_{m-1}, z_m) - 1)^2` for
    /// relation models.
    pub fn last_pair_score(&self, tape: &mut Tape<F>, latents: &[Var]) -> Result<Var, ModelError> {
        let m = latents.len();
        if m < 2 {
            return Err(ModelError::TooShort { m, min: 2 });
        }
        if self.bundle.config.objective == Objective::Relation {
            let s = self.relation(tape, latents[m - 2], latents[m - 1])?;
            let one = tape.constant(F::one());
            let diff = tape.sub(s, one)?;
            return Ok(tape.square(diff));
        }
        let ctx = self.contexts(tape, &latents[..m - 1])?;
        let pred = self.predict(tape, ctx[m - 2])?;
        prediction_error(tape, pred, latents[m - 1])
    }
}
