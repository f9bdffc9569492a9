//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ParamSet, Tape, TensorError, Var};

/// Finite-difference step used by every check.
pub const FD_STEP: f64 = 1e-5;

/// Relative errors are taken against `max(|analytic|, |numeric|, FLOOR)`.
const FLOOR: f64 = 1e-6;

/// One-sided slopes further apart than this mark a kink.
const KINK: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Number of scalar coordinates compared.
    pub checked: usize,
    pub total: usize,
    /// Coordinates whose one-sided slopes disagree (a ReLU boundary lies
    /// within one step); these are compared against the one-sided slope
    /// on the side the analytic gradient uses.
    pub kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares `backward` against central differences for a scalar loss
/// built by `loss_fn` from the bound parameters.
///
/// Tensors with more than `budget` scalars are checked on a seeded sample
/// of `budget` coordinates; smaller ones are checked in full.
pub fn grad_check<L, E>(params: &ParamSet<f64>, loss_fn: L, budget: usize, seed: u64) -> Result<GradCheckReport, E>
where
    L: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let eval = |set: &ParamSet<f64>| -> Result<f64, E> {
        let mut tape = Tape::new();
        let vars = tape.bind_all(set);
        let loss = loss_fn(&mut tape, &vars)?;
        Ok(tape.scalar(loss))
    };

    let mut work = params.clone();
    work.zero_grad();
    {
        let mut tape = Tape::new();
        let vars = tape.bind_all(&work);
        let loss = loss_fn(&mut tape, &vars)?;
        tape.backward(loss, &mut work)?;
    }

    let total = work.numel();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (t, p) in work.iter().enumerate() {
        if p.len() <= budget {
            chosen.extend((0..p.len()).map(|e| (t, e)));
        } else {
            let mut picks = index::sample(&mut rng, p.len(), budget).into_vec();
            picks.sort_unstable();
            chosen.extend(picks.into_iter().map(|e| (t, e)));
        }
    }

    let analytic: Vec<Vec<f64>> = work.iter().map(|p| p.grad.clone()).collect();
    let mut probe = params.clone();
    let base = eval(params)?;
    let mut max_rel: f64 = 0.0;
    let mut kinks = 0;
    for &(t, e) in &chosen {
        let id = super::ParamId(t);
        let orig = probe.get(id).value[e];
        probe.get_mut(id).value[e] = orig + FD_STEP;
        let plus = eval(&probe)?;
        probe.get_mut(id).value[e] = orig - FD_STEP;
        let minus = eval(&probe)?;
        probe.get_mut(id).value[e] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic[t][e];
        let mut err = relative_error(a, numeric);
        let (ahead, behind) = ((plus - base) / FD_STEP, (base - minus) / FD_STEP);
        if relative_error(ahead, behind) > KINK {
            kinks += 1;
            err = err.min(relative_error(a, ahead)).min(relative_error(a, behind));
        }
        max_rel = max_rel.max(err);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked: chosen.len(),
        total,
        kinks,
    })
}
