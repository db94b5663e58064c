//! Reading and writing the artifacts passed between commands.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use prs_core::{
    deserialize_rm, deserialize_sets, load_ratings, serialize_rm, serialize_sets, synth, PreparedSets, RatingDataset,
    RatingScale, RecommendationModel, RecordFormat,
};
use prs_protocol::ClientBundle;

/// Where a command's rating dataset comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    /// A dataset written by `prs ingest`.
    Ingested(std::path::PathBuf),
    /// A raw delimiter-separated rating file.
    Ratings { path: std::path::PathBuf, format: RecordFormat, scale: RatingScale },
    /// The synthetic MovieLens-100K twin.
    Twin { seed: u64 },
    /// A smaller synthetic dataset.
    Synthetic { users: usize, items: usize, ratings: usize, seed: u64 },
}

impl DatasetSource {
    pub fn load(&self) -> Result<RatingDataset> {
        match self {
            Self::Ingested(path) => read_dataset(path),
            Self::Ratings { path, format, scale } => {
                load_ratings(path, format, *scale).with_context(|| format!("loading ratings from {}", path.display()))
            }
            Self::Twin { seed } => Ok(synth::movielens_twin(*seed)),
            Self::Synthetic { users, items, ratings, seed } => {
                if ratings > &(users * items) {
                    bail!("{ratings} ratings do not fit {users} users x {items} items");
                }
                Ok(synth::ratings(&synth::SynthConfig::small(*users, *items, *ratings), *seed))
            }
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_dataset(path: &Path) -> Result<RatingDataset> {
    serde_json::from_slice(&read(path)?).with_context(|| format!("{} is not an ingested dataset", path.display()))
}

pub fn write_dataset(path: &Path, ds: &RatingDataset) -> Result<()> {
    write(path, &serde_json::to_vec(ds)?)
}

pub fn read_model(path: &Path) -> Result<RecommendationModel> {
    deserialize_rm(&read(path)?).with_context(|| format!("decoding model {}", path.display()))
}

pub fn write_model(path: &Path, rm: &RecommendationModel) -> Result<usize> {
    let bytes = serialize_rm(rm);
    write(path, &bytes)?;
    Ok(bytes.len())
}

pub fn read_sets(path: &Path) -> Result<PreparedSets> {
    deserialize_sets(&read(path)?).with_context(|| format!("decoding sets {}", path.display()))
}

pub fn write_sets(path: &Path, sets: &PreparedSets) -> Result<usize> {
    let bytes = serialize_sets(sets);
    write(path, &bytes)?;
    Ok(bytes.len())
}

pub fn read_bundle(path: &Path) -> Result<ClientBundle> {
    ClientBundle::decode(&read(path)?).with_context(|| format!("decoding bundle {}", path.display()))
}

pub fn write_bundle(path: &Path, bundle: &ClientBundle) -> Result<usize> {
    let bytes = bundle.encode();
    write(path, &bytes)?;
    Ok(bytes.len())
}

/// Parses `"4,4,4"` into lanes.
pub fn parse_query(s: &str) -> Result<Vec<u16>> {
    s.split(',')
        .map(|c| c.trim().parse::<u16>().with_context(|| format!("bad query coordinate {c:?}")))
        .collect()
}
