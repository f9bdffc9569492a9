//! Prediction errors and the three loss families, expressed on the tape.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape, Var};

use super::ModelError;

/// Index set of the infoNCE denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Negatives {
    /// Every image of the sequence, including the anchor itself.
    #[default]
    All,
    /// Every image except the anchor.
    ExcludeSelf,
}

impl std::str::FromStr for Negatives {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Negatives::All),
            "exclude-self" => Ok(Negatives::ExcludeSelf),
            other => Err(format!("unknown negatives mode `{other}` (all|exclude-self)")),
        }
    }
}

impl Negatives {
    pub fn name(self) -> &'static str {
        match self {
            Negatives::All => "all",
            Negatives::ExcludeSelf => "exclude-self",
        }
    }
}

/// `||pred - target||^2`, a scalar for any latent dimension.
pub fn prediction_error<F: Real>(tape: &mut Tape<F>, pred: Var, target: Var) -> Result<Var, ModelError> {
    let (a, b) = (tape.value(pred).len(), tape.value(target).len());
    if a != b {
        return Err(ModelError::DimensionMismatch { left: a, right: b });
    }
    let diff = tape.sub(pred, target)?;
    let sq = tape.square(diff);
    Ok(tape.sum(sq))
}

/// `errors[a][b] = ||sources[a] - targets[b]||^2` for every pair.
pub fn error_matrix<F: Real>(
    tape: &mut Tape<F>,
    sources: &[Var],
    targets: &[Var],
) -> Result<Vec<Vec<Var>>, ModelError> {
    sources
        .iter()
        .map(|&s| targets.iter().map(|&t| prediction_error(tape, s, t)).collect())
        .collect()
}

/// `-(1/(m-1)) * sum_j log(exp(-e[j][j+1]) / sum_j' exp(-e[j][j']))`, with
/// the denominator over `negatives`. `errors` has `m` columns and at least
/// `m - 1` rows (the last image is never an anchor).
pub fn infonce_from_errors<F: Real>(
    tape: &mut Tape<F>,
    errors: &[Vec<Var>],
    negatives: Negatives,
) -> Result<Var, ModelError> {
    let m = errors.first().map_or(0, Vec::len);
    if m < 2 {
        return Err(ModelError::TooShort { m, min: 2 });
    }
    if errors.len() < m - 1 || errors.iter().any(|row| row.len() != m) {
        return Err(ModelError::DimensionMismatch {
            left: errors.len(),
            right: m,
        });
    }
    let mut terms = Vec::with_capacity(m - 1);
    for j in 0..m - 1 {
        let mut logits = Vec::with_capacity(m);
        for (jp, &e) in errors[j].iter().enumerate() {
            if negatives == Negatives::ExcludeSelf && jp == j {
                continue;
            }
            logits.push(tape.scale(e, -F::one()));
        }
        let logits = tape.concat(&logits)?;
        let lse = tape.logsumexp(logits)?;
        // -log softmax_pos = e_pos + logsumexp(-e)
        terms.push(tape.add(errors[j][j + 1], lse)?);
    }
    mean(tape, &terms)
}

/// Mean of the consecutive-pair errors.
pub fn nocontrast_from_errors<F: Real>(tape: &mut Tape<F>, consecutive: &[Var]) -> Result<Var, ModelError> {
    if consecutive.is_empty() {
        return Err(ModelError::TooShort { m: 1, min: 2 });
    }
    mean(tape, consecutive)
}

/// Mean squared error of `g(z_a, z_b)` against 1 for `b = a + 1` and 0
/// otherwise, over all ordered pairs `a != b`.
pub fn relation_loss<F, G>(tape: &mut Tape<F>, latents: &[Var], mut g: G) -> Result<Var, ModelError>
where
    F: Real,
    G: FnMut(&mut Tape<F>, Var, Var) -> Result<Var, ModelError>,
{
    let m = latents.len();
    if m < 2 {
        return Err(ModelError::TooShort { m, min: 2 });
    }
    let mut terms = Vec::with_capacity(m * (m - 1));
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let score = g(tape, latents[a], latents[b])?;
            let err = if b == a + 1 {
                let target = tape.constant(F::one());
                tape.sub(score, target)?
            } else {
                score
            };
            terms.push(tape.square(err));
        }
    }
    mean(tape, &terms)
}

pub(crate) fn mean<F: Real>(tape: &mut Tape<F>, terms: &[Var]) -> Result<Var, ModelError> {
    let all = tape.concat(terms)?;
    let n = tape.value(all).len();
    let total = tape.sum(all);
    Ok(tape.scale(total, F::one() / F::of(n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_errors(tape: &mut Tape<f64>, e: &[Vec<f64>]) -> Vec<Vec<Var>> {
        e.iter()
            .map(|row| row.iter().map(|&v| tape.constant(v)).collect())
            .collect()
    }

    #[test]
    fn prediction_error_values() {
        let mut t = Tape::<f64>::new();
        let a = t.input(&[1], vec![2.0]).unwrap();
        let b = t.input(&[1], vec![0.5]).unwrap();
        let e = prediction_error(&mut t, a, b).unwrap();
        assert!((t.scalar(e) - 2.25).abs() < 1e-15);
        let p = t.input(&[2], vec![1.0, 2.0]).unwrap();
        let z = t.input(&[2], vec![0.0, 0.0]).unwrap();
        let e = prediction_error(&mut t, p, z).unwrap();
        assert_eq!(t.scalar(e), 5.0);
        let same = prediction_error(&mut t, p, p).unwrap();
        assert_eq!(t.scalar(same), 0.0);
        assert!(matches!(
            prediction_error(&mut t, a, p),
            Err(ModelError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn uniform_errors_give_log_m() {
        for m in [5usize, 6] {
            let mut t = Tape::<f64>::new();
            let e = scalar_errors(&mut t, &vec![vec![0.7; m]; m]);
            let l = infonce_from_errors(&mut t, &e, Negatives::All).unwrap();
            assert!((t.scalar(l) - (m as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_image_infonce_values() {
        let direct = |pos: f64, own: f64| -((-pos).exp() / ((-own).exp() + (-pos).exp())).ln();
        let mut t = Tape::<f64>::new();
        let e = scalar_errors(&mut t, &[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let l = infonce_from_errors(&mut t, &e, Negatives::All).unwrap();
        assert!((t.scalar(l) - direct(1.0, 0.0)).abs() < 1e-12);
        assert!((t.scalar(l) - 1.31326).abs() < 1e-5);

        let mut t = Tape::<f64>::new();
        let e = scalar_errors(&mut t, &[vec![10.0, 0.0], vec![0.0, 0.0]]);
        let l = infonce_from_errors(&mut t, &e, Negatives::All).unwrap();
        assert!((t.scalar(l) - direct(0.0, 10.0)).abs() < 1e-15);
        assert!((t.scalar(l) - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn excluding_self_drops_the_diagonal() {
        let mut t = Tape::<f64>::new();
        let e = scalar_errors(&mut t, &[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let l = infonce_from_errors(&mut t, &e, Negatives::ExcludeSelf).unwrap();
        // only the positive remains in the denominator
        assert!(t.scalar(l).abs() < 1e-15);
    }

    #[test]
    fn infonce_needs_two_images() {
        let mut t = Tape::<f64>::new();
        let e = scalar_errors(&mut t, &[vec![0.0]]);
        assert!(matches!(
            infonce_from_errors(&mut t, &e, Negatives::All),
            Err(ModelError::TooShort { m: 1, .. })
        ));
    }

    #[test]
    fn nocontrast_is_the_mean() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(1.0);
        let b = t.constant(3.0);
        let l = nocontrast_from_errors(&mut t, &[a, b]).unwrap();
        assert_eq!(t.scalar(l), 2.0);
    }

    #[test]
    fn constant_relation_heads() {
        for (g_value, expected) in [(0.0, 0.2), (1.0, 0.8)] {
            let mut t = Tape::<f64>::new();
            let latents: Vec<Var> = (0..5).map(|i| t.constant(i as f64)).collect();
            let mut calls = 0;
            let l = relation_loss(&mut t, &latents, |tape, _, _| {
                calls += 1;
                Ok(tape.constant(g_value))
            })
            .unwrap();
            assert_eq!(calls, 20);
            assert!((t.scalar(l) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn relation_loss_counts_pairs() {
        let mut t = Tape::<f64>::new();
        let latents: Vec<Var> = (0..6).map(|i| t.constant(i as f64)).collect();
        let mut calls = 0;
        let perfect = relation_loss(&mut t, &latents, |tape, a, b| {
            calls += 1;
            let (va, vb) = (tape.scalar(a), tape.scalar(b));
            Ok(tape.constant(if vb == va + 1.0 { 1.0 } else { 0.0 }))
        })
        .unwrap();
        assert_eq!(calls, 30);
        assert_eq!(t.scalar(perfect), 0.0);
    }
}
