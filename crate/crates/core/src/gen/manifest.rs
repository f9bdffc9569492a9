//! On-disk test corpus: one JSON manifest per test next to its PGM images.

use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::pgm::{read_pgm, write_pgm};
use super::rule::Rule;
use super::sample::{SceTest, TestSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestManifest {
    pub test_id: String,
    pub spec: TestSpec,
    pub rule: Rule,
    pub sequence_features: Vec<FeatureVector>,
    pub choice_features: Vec<FeatureVector>,
    pub correct_idx: usize,
    /// File names relative to the manifest's directory.
    pub sequence_images: Vec<String>,
    pub choice_images: Vec<String>,
}

/// Writes `<test_id>.json` plus `<test_id>_seq<j>.pgm` / `<test_id>_choice<c>.pgm`
/// into `dir`; returns every written path. On failure the files already
/// written for this test are removed again.
pub fn write_test(dir: &Path, test_id: &str, test: &SceTest) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match write_files(dir, test_id, test, &mut written) {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

fn write_files(dir: &Path, test_id: &str, test: &SceTest, written: &mut Vec<PathBuf>) -> io::Result<()> {
    let mut save = |name: String, img| -> io::Result<String> {
        let path = dir.join(&name);
        write_pgm(io::BufWriter::new(fs::File::create(&path)?), img)?;
        written.push(path);
        Ok(name)
    };
    let mut sequence_images = Vec::new();
    for (j, img) in test.sequence_images.iter().enumerate() {
        sequence_images.push(save(format!("{test_id}_seq{j}.pgm"), img)?);
    }
    let mut choice_images = Vec::new();
    for (c, img) in test.choice_images.iter().enumerate() {
        choice_images.push(save(format!("{test_id}_choice{c}.pgm"), img)?);
    }
    let manifest = TestManifest {
        test_id: test_id.to_string(),
        spec: test.spec.clone(),
        rule: test.rule,
        sequence_features: test.sequence_features.clone(),
        choice_features: test.choice_features.clone(),
        correct_idx: test.correct_idx,
        sequence_images,
        choice_images,
    };
    let path = dir.join(format!("{test_id}.json"));
    let json = serde_json::to_string_pretty(&serde_json::to_value(&manifest)?)?;
    fs::write(&path, json + "\n")?;
    written.push(path);
    Ok(())
}

/// Loads a manifest and its images.
pub fn load_test(manifest_path: &Path) -> io::Result<SceTest> {
    let manifest: TestManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let load = |name: &String| -> io::Result<_> { read_pgm(BufReader::new(fs::File::open(dir.join(name))?)) };
    Ok(SceTest {
        spec: manifest.spec,
        rule: manifest.rule,
        sequence_features: manifest.sequence_features,
        choice_features: manifest.choice_features,
        correct_idx: manifest.correct_idx,
        sequence_images: manifest.sequence_images.iter().map(load).collect::<io::Result<_>>()?,
        choice_images: manifest.choice_images.iter().map(load).collect::<io::Result<_>>()?,
    })
}
