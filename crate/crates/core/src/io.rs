//! On-disk layouts.
//!
//! A dataset directory holds `manifest.json` and one file per example under
//! `examples/`. A models directory holds `effects.json` and, once the
//! parser has been trained, `parser.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::action::ActionKind;
use crate::codec::{read_file, write_file};
use crate::datagen::{self, Example};
use crate::effects::EffectsModel;
use crate::parser::LinearModel;
use crate::pipeline::Models;
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const EXAMPLES_DIR: &str = "examples";
pub const PARSER_FILE: &str = "parser.json";
pub const EFFECTS_FILE: &str = "effects.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub batch: usize,
    pub index: usize,
    pub seed: u64,
    pub kind: ActionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub batches: usize,
    pub n_examples: usize,
    pub n_descriptions: usize,
    pub n_test: usize,
    pub interaction_rate: f64,
    pub per_kind: BTreeMap<ActionKind, usize>,
    pub examples: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(master_seed: u64, batches: usize, examples: &[Example]) -> Manifest {
        let mut per_kind = BTreeMap::new();
        for e in examples {
            *per_kind.entry(e.action.kind()).or_insert(0) += 1;
        }
        let n_test = datagen::split(examples).map_or(0, |(_, test)| test.len());
        Manifest {
            master_seed,
            batches,
            n_examples: examples.len(),
            n_descriptions: examples.iter().map(|e| e.gt_descriptions.len()).sum(),
            n_test,
            interaction_rate: datagen::interaction_rate(examples),
            per_kind,
            examples: examples
                .iter()
                .map(|e| ManifestEntry {
                    file: format!("{EXAMPLES_DIR}/{}.json", e.id()),
                    batch: e.batch,
                    index: e.index,
                    seed: e.seed,
                    kind: e.action.kind(),
                })
                .collect(),
        }
    }
}

pub fn write_dataset(
    dir: impl AsRef<Path>,
    master_seed: u64,
    batches: usize,
    examples: &[Example],
) -> Result<Manifest> {
    let dir = dir.as_ref();
    let manifest = Manifest::new(master_seed, batches, examples);
    for (entry, e) in manifest.examples.iter().zip(examples) {
        write_file(dir.join(&entry.file), e)?;
    }
    write_file(dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Reads the manifest and every example it lists, in manifest order.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(Manifest, Vec<Example>)> {
    let dir = dir.as_ref();
    let manifest: Manifest = read_file(dir.join(MANIFEST))?;
    let examples = crate::exec::try_map(&manifest.examples, |entry| {
        let e: Example = read_file(dir.join(&entry.file))?;
        if (e.batch, e.index) != (entry.batch, entry.index) {
            return Err(Error::InvalidValue(format!(
                "{} holds example b{}/e{}, manifest says b{}/e{}",
                entry.file, e.batch, e.index, entry.batch, entry.index
            )));
        }
        Ok(e)
    })?;
    Ok((manifest, examples))
}

pub fn write_models(dir: impl AsRef<Path>, models: &Models) -> Result<()> {
    let dir = dir.as_ref();
    write_file(dir.join(EFFECTS_FILE), &models.effects)?;
    match &models.parser {
        Some(p) => write_file(dir.join(PARSER_FILE), p),
        None => Ok(()),
    }
}

/// Loads a models directory. A missing parser file leaves the linear
/// backend unavailable.
pub fn read_models(dir: impl AsRef<Path>) -> Result<Models> {
    let dir = dir.as_ref();
    let effects: EffectsModel = read_file(dir.join(EFFECTS_FILE))?;
    let parser_path: PathBuf = dir.join(PARSER_FILE);
    let parser: Option<LinearModel> = if parser_path.exists() {
        Some(read_file(parser_path)?)
    } else {
        None
    };
    Ok(Models { parser, effects })
}
