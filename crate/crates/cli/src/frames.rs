//! Loading a directory of PGM/PNG frames in order.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use regex::Regex;
use sce_core::anomaly::RawFrame;
use sce_core::gen::pgm::read_pgm;

fn is_frame(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
}

/// Frame files of `dir`. Without a pattern they are in lexicographic
/// order; with one, only names matching it are kept and they are ordered
/// by the integer in its first capture group.
pub fn list_frames(dir: &Path, pattern: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading frame directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.is_file() && is_frame(p))
        .collect();
    files.sort();
    let Some(pattern) = pattern else {
        return Ok(files);
    };
    let re = Regex::new(pattern).with_context(|| format!("invalid --pattern `{pattern}`"))?;
    if re.captures_len() < 2 {
        bail!("--pattern needs a capture group for the frame index");
    }
    let mut indexed = Vec::new();
    for f in files {
        let name = f.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if let Some(c) = re.captures(&name) {
            let idx: u64 = c[1]
                .parse()
                .with_context(|| format!("frame index `{}` in {name} is not an integer", &c[1]))?;
            indexed.push((idx, f));
        }
    }
    indexed.sort();
    if let Some(w) = indexed.windows(2).find(|w| w[0].0 == w[1].0) {
        bail!("frame index {} appears twice", w[0].0);
    }
    Ok(indexed.into_iter().map(|(_, f)| f).collect())
}

pub fn load_frame(path: &Path) -> Result<RawFrame> {
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        let img =
            read_pgm(BufReader::new(fs::File::open(path)?)).with_context(|| format!("decoding {}", path.display()))?;
        return Ok(RawFrame::from(&img));
    }
    let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?;
    Ok(if img.color().has_color() {
        let rgb = img.to_rgb8();
        RawFrame {
            width: rgb.width() as usize,
            height: rgb.height() as usize,
            channels: 3,
            data: rgb.into_raw(),
        }
    } else {
        let gray = img.to_luma8();
        RawFrame {
            width: gray.width() as usize,
            height: gray.height() as usize,
            channels: 1,
            data: gray.into_raw(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_orders_numerically() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["f10.pgm", "f9.pgm", "f100.png", "notes.txt", "g1.pgm"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        let names = |v: Vec<PathBuf>| -> Vec<String> {
            v.iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect()
        };
        assert_eq!(
            names(list_frames(dir.path(), None).unwrap()),
            ["f10.pgm", "f100.png", "f9.pgm", "g1.pgm"]
        );
        assert_eq!(
            names(list_frames(dir.path(), Some(r"^f(\d+)\.")).unwrap()),
            ["f9.pgm", "f10.pgm", "f100.png"]
        );
        assert!(list_frames(dir.path(), Some(r"^f\d+")).is_err());
    }

    #[test]
    fn png_color_frames_keep_three_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        image::RgbImage::from_pixel(4, 3, image::Rgb([255, 0, 0]))
            .save(&path)
            .unwrap();
        let raw = load_frame(&path).unwrap();
        assert_eq!((raw.width, raw.height, raw.channels), (4, 3, 3));
        let gray_path = dir.path().join("b.png");
        image::GrayImage::from_pixel(2, 2, image::Luma([9]))
            .save(&gray_path)
            .unwrap();
        assert_eq!(load_frame(&gray_path).unwrap().data, vec![9; 4]);
    }
}
