//! Naive Markov-CPC anomaly scoring of frame sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape};
use crate::gen::{draw_objects, Image, RenderConfig, Shape};
use crate::models::{to_input, ModelBundle, ModelError, Variant};
use crate::seed::{mix, mix_all};

/// Guard added to the standard deviation of the window errors.
pub const STD_GUARD: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum AnomalyError {
    #[error("frame of {width}x{height} after cropping is smaller than the {target_w}x{target_h} target")]
    TooSmall {
        width: usize,
        height: usize,
        target_w: usize,
        target_h: usize,
    },
    #[error("need at least {need} frames, got {got}")]
    InsufficientFrames { need: usize, got: usize },
    #[error("unsupported frame: {0}")]
    BadFrame(String),
    #[error("invalid anomaly setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyConfig {
    /// Number of preceding frames the model is stepped on.
    pub window: usize,
    pub runs: usize,
    pub sigma: f64,
    pub crop_top: usize,
    pub width: usize,
    pub height: usize,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            window: 5,
            runs: 5,
            sigma: 10.0,
            crop_top: 30,
            width: 64,
            height: 64,
            variant: Variant::Mcpc,
            seed: 0,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        if self.window < 2 {
            return Err(AnomalyError::Invalid("window must be at least 2".into()));
        }
        if self.runs == 0 {
            return Err(AnomalyError::Invalid("runs must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(AnomalyError::Invalid(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !self.variant.config().objective.is_predictive() {
            return Err(AnomalyError::Invalid(format!("{} has no predictor", self.variant)));
        }
        Ok(())
    }
}

/// Decoded frame: interleaved 8-bit samples, 1 (gray), 3 (RGB) or 4
/// (RGBA, alpha ignored) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl From<&Image> for RawFrame {
    fn from(img: &Image) -> Self {
        RawFrame {
            width: img.width,
            height: img.height,
            channels: 1,
            data: img.pixels.clone(),
        }
    }
}

/// Crops the top rows, converts to luma and area-averages down to the
/// target size.
pub fn preprocess_frame(raw: &RawFrame, crop_top: usize, width: usize, height: usize) -> Result<Image, AnomalyError> {
    if !matches!(raw.channels, 1 | 3 | 4) {
        return Err(AnomalyError::BadFrame(format!("{} channels", raw.channels)));
    }
    if raw.data.len() != raw.width * raw.height * raw.channels {
        return Err(AnomalyError::BadFrame(format!(
            "{} bytes for {}x{}x{}",
            raw.data.len(),
            raw.width,
            raw.height,
            raw.channels
        )));
    }
    let h = raw.height.saturating_sub(crop_top);
    let w = raw.width;
    if h < height || w < width || width == 0 || height == 0 {
        return Err(AnomalyError::TooSmall {
            width: w,
            height: h,
            target_w: width,
            target_h: height,
        });
    }
    let luma: Vec<f64> = (crop_top..raw.height)
        .flat_map(|y| (0..w).map(move |x| (y * w + x) * raw.channels))
        .map(|i| match raw.channels {
            1 => raw.data[i] as f64,
            _ => 0.299 * raw.data[i] as f64 + 0.587 * raw.data[i + 1] as f64 + 0.114 * raw.data[i + 2] as f64,
        })
        .collect();
    let xs = spans(w, width);
    let ys = spans(h, height);
    let mut pixels = Vec::with_capacity(width * height);
    for row in &ys {
        for col in &xs {
            let mut acc = 0.0;
            let mut area = 0.0;
            for &(sy, wy) in row {
                for &(sx, wx) in col {
                    acc += luma[sy * w + sx] * wy * wx;
                    area += wy * wx;
                }
            }
            pixels.push((acc / area).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(Image { width, height, pixels })
}

/// For each of `dst` output cells, the source indices it overlaps and the
/// overlap lengths.
fn spans(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

/// `(eps_c - mean(eps_p)) / (std(eps_p) + guard)` with the population
/// standard deviation.
pub fn anomaly_score(eps_p: &[f64], eps_c: f64) -> f64 {
    if eps_p.is_empty() {
        return f64::NAN;
    }
    let n = eps_p.len() as f64;
    // Shifted by the first value so equal inputs give an exactly equal mean.
    let base = eps_p[0];
    let mean = base + eps_p.iter().map(|e| e - base).sum::<f64>() / n;
    let var = eps_p.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    (eps_c - mean) / (var.sqrt() + STD_GUARD)
}

/// Gaussian smoothing truncated at `ceil(4 sigma)`, renormalized over the
/// part of the kernel inside the series.
pub fn gaussian_smooth(scores: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || scores.is_empty() {
        return scores.to_vec();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let n = scores.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in -radius..=radius {
                let j = i + k;
                if (0..n).contains(&j) {
                    let w = kernel[(k + radius) as usize];
                    acc += w * scores[j as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub index: usize,
    pub runs: Vec<f64>,
    pub mean: f64,
    pub smoothed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub config: AnomalyConfig,
    pub files: Vec<String>,
    pub frames: Vec<FrameScore>,
}

impl AnomalyReport {
    /// Frame index of the largest smoothed score (first on ties).
    pub fn peak(&self) -> Option<usize> {
        let mut best: Option<&FrameScore> = None;
        for f in &self.frames {
            if best.is_none_or(|b| f.smoothed > b.smoothed) {
                best = Some(f);
            }
        }
        best.map(|f| f.index)
    }
}

/// Score of frame `c` from one freshly initialized model stepped on the
/// `window` frames before it.
pub fn score_frame<F: Real>(inputs: &[Vec<F>], c: usize, run: usize, cfg: &AnomalyConfig) -> Result<f64, AnomalyError> {
    let k = cfg.window;
    if c < k || c >= inputs.len() {
        return Err(AnomalyError::Invalid(format!("frame {c} has no full window")));
    }
    let mut bundle = ModelBundle::<F>::new(cfg.variant.config(), mix_all(cfg.seed, &[c as u64, run as u64]))?;
    bundle.train_step(&inputs[c - k..c])?;
    let mut tape = Tape::new();
    let fwd = bundle.bind(&mut tape);
    let latents = fwd.encode_all(&mut tape, &inputs[c - k..=c])?;
    let errors: Vec<f64> = fwd
        .consecutive_errors(&mut tape, &latents)?
        .into_iter()
        .map(|e| tape.scalar(e).as_f64())
        .collect();
    let (eps_c, eps_p) = errors.split_last().expect("window >= 2");
    Ok(anomaly_score(eps_p, *eps_c))
}

/// Scores every frame with a full window in front of it, on the current
/// rayon pool.
pub fn score_video(frames: &[Image], files: Vec<String>, cfg: &AnomalyConfig) -> Result<AnomalyReport, AnomalyError> {
    cfg.validate()?;
    if frames.len() < cfg.window + 1 {
        return Err(AnomalyError::InsufficientFrames {
            need: cfg.window + 1,
            got: frames.len(),
        });
    }
    let inputs: Vec<Vec<f32>> = frames.iter().map(to_input).collect();
    let runs = (cfg.window..frames.len())
        .into_par_iter()
        .map(|c| {
            (0..cfg.runs)
                .map(|r| score_frame(&inputs, c, r, cfg))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let means: Vec<f64> = runs
        .iter()
        .map(|r| {
            let base = r[0];
            base + r.iter().map(|s| s - base).sum::<f64>() / r.len() as f64
        })
        .collect();
    let smoothed = gaussian_smooth(&means, cfg.sigma);
    let frames = runs
        .into_iter()
        .zip(means)
        .zip(smoothed)
        .enumerate()
        .map(|(i, ((runs, mean), smoothed))| FrameScore {
            index: cfg.window + i,
            runs,
            mean,
            smoothed,
        })
        .collect();
    Ok(AnomalyReport {
        config: cfg.clone(),
        files,
        frames,
    })
}

/// A synthetic video whose object gray level rises by a fixed step per
/// frame and falls back once, at the returned break frame, against the
/// monotonic trend.
#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub frames: Vec<Image>,
    pub break_frame: usize,
}

pub const SYNTH_START_GRAY: f64 = 50.0;
pub const SYNTH_STEP: f64 = 0.8;
pub const SYNTH_JUMP: f64 = -40.0;

/// `len` frames of identical objects (shape, count and cells drawn from
/// `seed`); the break frame is uniform in the middle 40% of the video.
pub fn synthetic_video(len: usize, seed: u64) -> SyntheticVideo {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(seed, 0x5ce));
    let shape = *Shape::ALL.choose(&mut rng).expect("shapes");
    let mut cells: Vec<u8> = (0..9).collect();
    cells.shuffle(&mut rng);
    let count = rng.gen_range(1..=9);
    let diameter = RenderConfig::default().size_table[rng.gen_range(2..6)];
    let break_frame = rng.gen_range(len * 3 / 10..=len * 7 / 10);
    let cfg = RenderConfig::default();
    let frames = (0..len)
        .map(|t| {
            let jump = if t >= break_frame { SYNTH_JUMP } else { 0.0 };
            let gray = (SYNTH_START_GRAY + SYNTH_STEP * t as f64 + jump)
                .round()
                .clamp(0.0, 254.0) as u8;
            draw_objects(shape, &cells[..count], gray, diameter, &cfg)
        })
        .collect();
    SyntheticVideo { frames, break_frame }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_identities() {
        assert_eq!(anomaly_score(&[1.0, 2.0, 3.0, 4.0], 2.5), 0.0);
        let s = anomaly_score(&[1.0, 2.0, 3.0, 4.0], 5.0);
        assert!((s - 2.236_07).abs() < 1e-5, "{s}");
        let big = anomaly_score(&[0.3; 4], 0.31);
        assert!(big.is_finite() && big > 1e9);
        assert_eq!(anomaly_score(&[0.1, 0.1, 0.1], 0.1), 0.0);
    }

    #[test]
    fn smoothing_identities() {
        let x = [1.0, -2.0, 5.0, 0.5];
        assert_eq!(gaussian_smooth(&x, 0.0), x.to_vec());
        let c = gaussian_smooth(&[3.25; 17], 2.5);
        assert!(c.iter().all(|&v| (v - 3.25).abs() < 1e-15));
        let mut impulse = vec![0.0; 201];
        impulse[100] = 1.0;
        let s = gaussian_smooth(&impulse, 10.0);
        assert_eq!(s.len(), 201);
        assert!((s[100] - 0.039_89).abs() < 1e-5, "{}", s[100]);
    }

    #[test]
    fn luma_and_crop() {
        let red = RawFrame {
            width: 64,
            height: 70,
            channels: 3,
            data: [255u8, 0, 0].repeat(64 * 70),
        };
        let img = preprocess_frame(&red, 6, 64, 64).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 76));

        let mut data = vec![0u8; 64 * 94];
        for (i, v) in data.iter_mut().enumerate() {
            *v = (i % 251) as u8;
        }
        let gray = RawFrame {
            width: 64,
            height: 94,
            channels: 1,
            data: data.clone(),
        };
        let img = preprocess_frame(&gray, 30, 64, 64).unwrap();
        assert_eq!(img.pixels, data[30 * 64..].to_vec());
    }

    #[test]
    fn area_averaging() {
        let uniform = RawFrame {
            width: 150,
            height: 130,
            channels: 1,
            data: vec![93; 150 * 130],
        };
        let img = preprocess_frame(&uniform, 30, 64, 64).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 93));

        // 128x128 -> 64x64 averages 2x2 blocks exactly
        let data: Vec<u8> = (0..128 * 128)
            .map(|i| if (i / 128 + i % 128) % 2 == 0 { 0 } else { 200 })
            .collect();
        let checker = RawFrame {
            width: 128,
            height: 128,
            channels: 1,
            data,
        };
        let img = preprocess_frame(&checker, 0, 64, 64).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 100));
    }

    #[test]
    fn too_small_frames_are_rejected() {
        let f = RawFrame {
            width: 64,
            height: 80,
            channels: 1,
            data: vec![0; 64 * 80],
        };
        assert!(matches!(
            preprocess_frame(&f, 30, 64, 64),
            Err(AnomalyError::TooSmall { .. })
        ));
    }

    #[test]
    fn identical_frames_score_zero() {
        let frame = synthetic_video(10, 3).frames[0].clone();
        let cfg = AnomalyConfig {
            runs: 2,
            ..AnomalyConfig::default()
        };
        let report = score_video(&vec![frame; 8], vec![], &cfg).unwrap();
        assert_eq!(report.frames.len(), 3);
        assert_eq!(report.frames[0].index, 5);
        for f in &report.frames {
            assert_eq!(f.mean, 0.0);
            assert!(f.runs.iter().all(|&r| r == 0.0));
        }
    }

    #[test]
    fn too_few_frames() {
        let v = synthetic_video(5, 1);
        assert!(matches!(
            score_video(&v.frames, vec![], &AnomalyConfig::default()),
            Err(AnomalyError::InsufficientFrames { need: 6, got: 5 })
        ));
    }

    #[test]
    fn synthetic_video_breaks_once() {
        let v = synthetic_video(200, 9);
        assert!((60..=140).contains(&v.break_frame));
        let ink = |img: &Image| img.pixels.iter().map(|&p| 255 - p as u64).sum::<u64>();
        let inks: Vec<u64> = v.frames.iter().map(ink).collect();
        let rises: Vec<u64> = inks.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
        let (at, _) = rises.iter().enumerate().max_by_key(|(_, d)| **d).unwrap();
        assert_eq!(at + 1, v.break_frame);
        // ink never grows anywhere else
        assert_eq!(rises.iter().filter(|&&d| d > 0).count(), 1);
    }
}
