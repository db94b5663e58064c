//! Rating ingestion and the canonical in-memory rating matrix.
//!
//! Ratings are stored quantized: a rating `r` on a scale `(min, max, step)`
//! becomes the unsigned level `(r - min) / step`. Users and items receive dense
//! indices in first-appearance order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const GRID_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidScale(format!("{min}:{max}:{step}")));
        }
        let levels = (max - min) / step;
        if (levels - levels.round()).abs() > GRID_EPS || levels.round() > u16::MAX as f64 {
            return Err(Error::InvalidScale(format!(
                "range {min}..{max} is not a whole number of {step} steps"
            )));
        }
        Ok(Self { min, max, step })
    }

    /// MovieLens half-star scale.
    pub fn half_stars() -> Self {
        Self { min: 1.0, max: 5.0, step: 0.5 }
    }

    /// Whole-star 1..5 scale.
    pub fn five_stars() -> Self {
        Self { min: 1.0, max: 5.0, step: 1.0 }
    }

    /// Parses `min:max:step`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidScale(s.to_string()));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::InvalidScale(s.to_string()));
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }

    pub fn quantized_max(&self) -> u16 {
        ((self.max - self.min) / self.step).round() as u16
    }

    /// Mid-scale level, used as the neutral pad rating.
    pub fn neutral(&self) -> u16 {
        self.quantized_max() / 2
    }

    /// Maps a raw rating onto its grid level, or `None` when it is off-grid.
    pub fn quantize(&self, r: f64) -> Option<u16> {
        let level = (r - self.min) / self.step;
        let rounded = level.round();
        if (level - rounded).abs() > GRID_EPS || rounded < 0.0 || rounded > self.quantized_max() as f64 {
            return None;
        }
        Some(rounded as u16)
    }

    pub fn dequantize(&self, q: u16) -> f64 {
        self.min + q as f64 * self.step
    }
}

/// Bidirectional map between external ids and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ids `"1" ..= "n"`, the MovieLens convention.
    pub fn sequential(n: usize) -> Self {
        (1..=n).map(|i| i.to_string()).collect::<Vec<_>>().into()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get_or_insert(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, index: u32) -> Option<&str> {
        self.ids.get(index as usize).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

impl From<Vec<String>> for IdMap {
    fn from(ids: Vec<String>) -> Self {
        let index = ids.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Self { ids, index }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(m: IdMap) -> Self {
        m.ids
    }
}

/// Column layout of a delimiter-separated rating file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordFormat {
    pub delimiter: String,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: usize,
    pub skip_header: bool,
}

impl RecordFormat {
    pub fn with_delimiter(delimiter: &str) -> Self {
        Self {
            delimiter: delimiter.to_string(),
            user_col: 0,
            item_col: 1,
            rating_col: 2,
            skip_header: false,
        }
    }

    /// MovieLens 100K `u.data`.
    pub fn tab() -> Self {
        Self::with_delimiter("\t")
    }

    /// MovieLens 1M/10M `ratings.dat`.
    pub fn double_colon() -> Self {
        Self::with_delimiter("::")
    }

    /// MovieLens 20M `ratings.csv` (with header row).
    pub fn comma() -> Self {
        Self { skip_header: true, ..Self::with_delimiter(",") }
    }

    /// Accepts `tab`, `colons`, `comma`, or a literal delimiter.
    pub fn parse(s: &str) -> Self {
        match s {
            "tab" | "\\t" | "\t" => Self::tab(),
            "colons" | "::" => Self::double_colon(),
            "comma" | "csv" | "," => Self::comma(),
            other => Self::with_delimiter(other),
        }
    }
}

/// Sparse user x item matrix of quantized ratings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingDataset {
    scale: RatingScale,
    users: IdMap,
    items: IdMap,
    /// Per user, `(item, rating)` sorted by item.
    rows: Vec<Vec<(u32, u16)>>,
    /// Per item, `(user, rating)` sorted by user.
    cols: Vec<Vec<(u32, u16)>>,
    generation: u64,
}

impl RatingDataset {
    pub fn empty(scale: RatingScale) -> Self {
        Self {
            scale,
            users: IdMap::new(),
            items: IdMap::new(),
            rows: Vec::new(),
            cols: Vec::new(),
            generation: 0,
        }
    }

    /// Builds a dataset from dense triples. Duplicate cells are rejected.
    pub fn from_triples(
        scale: RatingScale,
        users: IdMap,
        items: IdMap,
        triples: impl IntoIterator<Item = (u32, u32, u16)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); users.len()];
        let mut cols = vec![Vec::new(); items.len()];
        let qmax = scale.quantized_max();
        for (u, i, r) in triples {
            if u as usize >= rows.len() {
                return Err(Error::UnknownUser(u));
            }
            if i as usize >= cols.len() {
                return Err(Error::UnknownItem(i));
            }
            if r > qmax {
                return Err(Error::RatingOutOfRange { rating: r, max: qmax });
            }
            rows[u as usize].push((i, r));
            cols[i as usize].push((u, r));
        }
        for (u, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Duplicate {
                    line: 0,
                    user: users.id_of(u as u32).unwrap_or_default().to_string(),
                    item: items.id_of(w[0].0).unwrap_or_default().to_string(),
                });
            }
        }
        for col in cols.iter_mut() {
            col.sort_unstable();
        }
        Ok(Self { scale, users, items, rows, cols, generation: 0 })
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_ratings(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn items(&self) -> &IdMap {
        &self.items
    }

    /// Items rated by `user`, sorted by item index.
    pub fn user_ratings(&self, user: u32) -> &[(u32, u16)] {
        &self.rows[user as usize]
    }

    /// Users who rated `item`, sorted by user index.
    pub fn item_raters(&self, item: u32) -> &[(u32, u16)] {
        &self.cols[item as usize]
    }

    pub fn rating(&self, user: u32, item: u32) -> Option<u16> {
        let row = self.rows.get(user as usize)?;
        row.binary_search_by_key(&item, |&(i, _)| i).ok().map(|p| row[p].1)
    }

    pub fn check_user(&self, user: u32) -> Result<()> {
        if (user as usize) < self.num_users() {
            Ok(())
        } else {
            Err(Error::UnknownUser(user))
        }
    }

    pub fn check_item(&self, item: u32) -> Result<()> {
        if (item as usize) < self.num_items() {
            Ok(())
        } else {
            Err(Error::UnknownItem(item))
        }
    }

    /// Inserts or overwrites one rating and bumps the generation counter.
    pub fn set_rating(&mut self, user: u32, item: u32, rating: u16) -> Result<()> {
        self.check_user(user)?;
        self.check_item(item)?;
        let max = self.scale.quantized_max();
        if rating > max {
            return Err(Error::RatingOutOfRange { rating, max });
        }
        let row = &mut self.rows[user as usize];
        match row.binary_search_by_key(&item, |&(i, _)| i) {
            Ok(p) => row[p].1 = rating,
            Err(p) => row.insert(p, (item, rating)),
        }
        let col = &mut self.cols[item as usize];
        match col.binary_search_by_key(&user, |&(u, _)| u) {
            Ok(p) => col[p].1 = rating,
            Err(p) => col.insert(p, (user, rating)),
        }
        self.generation += 1;
        Ok(())
    }

    /// All ratings as `(user, item, rating)` in user-major order.
    pub fn triples(&self) -> impl Iterator<Item = (u32, u32, u16)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&(i, r)| (u as u32, i, r)))
    }

    /// Re-indexes users and items in sorted id order (numeric ids sort
    /// numerically). Two ingestions of the same records in different line
    /// orders canonicalize to equal datasets.
    pub fn canonicalize(&self) -> Self {
        fn sorted(map: &IdMap) -> (IdMap, Vec<u32>) {
            let mut ids: Vec<String> = map.ids().to_vec();
            ids.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
                (Ok(x), Ok(y)) => x.cmp(&y),
                _ => a.cmp(b),
            });
            let new_map: IdMap = ids.into();
            let remap = map.ids().iter().map(|id| new_map.index_of(id).unwrap()).collect();
            (new_map, remap)
        }
        let (users, user_remap) = sorted(&self.users);
        let (items, item_remap) = sorted(&self.items);
        let triples: Vec<_> = self
            .triples()
            .map(|(u, i, r)| (user_remap[u as usize], item_remap[i as usize], r))
            .collect();
        let mut out = Self::from_triples(self.scale, users, items, triples).expect("remap preserves validity");
        out.generation = self.generation;
        out
    }
}

/// Reads a rating file. Any malformed, off-grid or duplicate record rejects the
/// whole file.
pub fn load_ratings(path: impl AsRef<Path>, format: &RecordFormat, scale: RatingScale) -> Result<RatingDataset> {
    parse_ratings(File::open(path)?, format, scale)
}

pub fn parse_ratings(reader: impl Read, format: &RecordFormat, scale: RatingScale) -> Result<RatingDataset> {
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut triples = Vec::new();
    let needed = format.user_col.max(format.item_col).max(format.rating_col) + 1;

    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if n == 0 && format.skip_header {
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter.as_str()).collect();
        if fields.len() < needed || fields.len() > needed + 1 {
            return Err(Error::Malformed {
                line: line_no,
                reason: format!("expected {needed} or {} fields, found {}", needed + 1, fields.len()),
            });
        }
        let user = fields[format.user_col].trim();
        let item = fields[format.item_col].trim();
        if user.is_empty() || item.is_empty() {
            return Err(Error::Malformed { line: line_no, reason: "empty id".into() });
        }
        let raw: f64 = fields[format.rating_col].trim().parse().map_err(|_| Error::Malformed {
            line: line_no,
            reason: format!("unparsable rating {:?}", fields[format.rating_col]),
        })?;
        // Timestamps are validated as integers and dropped.
        if fields.len() == needed + 1 {
            let ts = fields[needed].trim();
            if ts.parse::<i64>().is_err() {
                return Err(Error::Malformed { line: line_no, reason: format!("bad timestamp {ts:?}") });
            }
        }
        let q = scale.quantize(raw).ok_or(Error::OffGrid { line: line_no, value: raw })?;
        let u = users.get_or_insert(user);
        let i = items.get_or_insert(item);
        if seen.insert((u, i), line_no).is_some() {
            return Err(Error::Duplicate { line: line_no, user: user.into(), item: item.into() });
        }
        triples.push((u, i, q));
    }
    RatingDataset::from_triples(scale, users, items, triples)
}

/// Zero-centred Laplace noise rounded into a small ordered rating domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationPolicy<T> {
    pub b: T,
    pub domain: RangeInclusive<u16>,
    pub unrated: u16,
}

impl<T: Scalar> Default for PerturbationPolicy<T> {
    fn default() -> Self {
        Self { b: T::of(0.7), domain: 0..=4, unrated: 2 }
    }
}

impl<T: Scalar> PerturbationPolicy<T> {
    pub fn with_scale(b: T) -> Self {
        Self { b, ..Self::default() }
    }

    /// Location of the noise distribution; always zero.
    pub fn location(&self) -> T {
        T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > T::zero()) {
            return Err(Error::InvalidPolicy("Laplace scale must be positive".into()));
        }
        if *self.domain.start() != 0 || self.domain.is_empty() {
            return Err(Error::InvalidPolicy("domain must start at level 0".into()));
        }
        let (lo, hi) = (*self.domain.start() as u32, *self.domain.end() as u32);
        if (lo + hi) % 2 != 0 || self.unrated as u32 != (lo + hi) / 2 {
            return Err(Error::InvalidPolicy("unrated value must be the domain median".into()));
        }
        Ok(())
    }

    /// One draw from Lap(0, b) by inverse CDF.
    pub fn sample_noise(&self, rng: &mut impl Rng) -> T {
        loop {
            let v: f64 = rng.gen();
            if v == 0.0 {
                continue;
            }
            let u = T::of(v - 0.5);
            let mag = T::one() - T::of(2.0) * u.abs();
            let x = -self.b * u.signum() * mag.ln();
            return self.location() + x;
        }
    }

    fn apply(&self, r: u16, noise: T) -> u16 {
        let hi = T::of(*self.domain.end() as f64);
        let v = (T::of(r as f64) + noise).round().max(T::zero()).min(hi);
        v.to_u16().unwrap_or(0)
    }
}

/// Maps a dataset onto a `0..=levels` domain by rounding `r_q * levels / qmax`.
/// For the half-star scale and five levels this is `round(r_q / 2)`.
pub fn remap_levels(ds: &RatingDataset, levels: u16) -> Result<RatingDataset> {
    let qmax = ds.scale.quantized_max();
    if levels == 0 {
        return Err(Error::InvalidPolicy("target domain needs at least two levels".into()));
    }
    let step = ds.scale.step * qmax as f64 / levels as f64;
    let scale = RatingScale::new(ds.scale.min, ds.scale.max, step)?;
    let triples: Vec<_> = ds
        .triples()
        .map(|(u, i, r)| (u, i, (r as f64 * levels as f64 / qmax as f64).round() as u16))
        .collect();
    let mut out = RatingDataset::from_triples(scale, ds.users.clone(), ds.items.clone(), triples)?;
    out.generation = ds.generation;
    Ok(out)
}

/// Adds rounded, clamped Laplace noise to every present rating. Absent cells
/// stay absent. Deterministic for a fixed seed.
pub fn perturb_ratings<T: Scalar>(ds: &RatingDataset, policy: &PerturbationPolicy<T>, seed: u64) -> Result<RatingDataset> {
    policy.validate()?;
    let expected = *policy.domain.end();
    if ds.scale.quantized_max() != expected {
        return Err(Error::DomainMismatch { dataset: ds.scale.quantized_max(), policy: expected });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let triples: Vec<_> = ds
        .triples()
        .map(|(u, i, r)| {
            let noise = policy.sample_noise(&mut rng);
            (u, i, policy.apply(r, noise))
        })
        .collect();
    let mut out = RatingDataset::from_triples(ds.scale, ds.users.clone(), ds.items.clone(), triples)?;
    out.generation = ds.generation;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub density: f64,
    /// `c_i`: number of items rated by user `i`.
    pub per_user_counts: Vec<usize>,
}

pub fn dataset_stats(ds: &RatingDataset) -> DatasetStats {
    let users = ds.num_users();
    let items = ds.num_items();
    let ratings = ds.num_ratings();
    let cells = users * items;
    DatasetStats {
        users,
        items,
        ratings,
        density: if cells == 0 { 0.0 } else { ratings as f64 / cells as f64 },
        per_user_counts: ds.rows.iter().map(Vec::len).collect(),
    }
}
