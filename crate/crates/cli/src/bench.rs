//! Desk-scale benchmarks: accuracy of the private pipeline against
//! plaintext KNN, time and traffic against model size, and neighbor
//! exposure of the model builder.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use prs_core::{
    build_all, exposure_report, serialize_rm, synth, ItemVector, ModelConfig, PartitionConfig, RatingDataset,
    RecommendationModel, VulnerabilityPolicy,
};
use prs_protocol::{distribute_local, query_local, Client, Cloud, DataOwner, QueryOptions, QueryRun, SeedTree};
use prs_wire::peak_rss_kb;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::report::{Gate, Table};

/// How query vectors are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QueryKind {
    /// Uniform over the rating grid, per coordinate.
    Random,
    /// Every coordinate at the top rating: "items my neighbors loved".
    AllMax,
}

fn draw_query(kind: QueryKind, dim: usize, qmax: u16, rng: &mut impl Rng) -> Vec<u16> {
    match kind {
        QueryKind::Random => (0..dim).map(|_| rng.gen_range(0..=qmax)).collect(),
        QueryKind::AllMax => vec![qmax; dim],
    }
}

fn squared_distance(a: &[u16], b: &[u16]) -> u64 {
    a.iter().zip(b).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64).sum()
}

/// Exact nearest items, ties to the lower item id.
pub fn exact_knn(vectors: &[ItemVector], query: &[u16], k: usize) -> Vec<u32> {
    let mut scored: Vec<(u64, u32)> = vectors.iter().map(|v| (squared_distance(&v.coords, query), v.item)).collect();
    scored.sort_unstable();
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// `|got ∩ want| / |want|`; 1 when `want` is empty.
pub fn overlap(got: &[u32], want: &[u32]) -> f64 {
    if want.is_empty() {
        return 1.0;
    }
    want.iter().filter(|i| got.contains(i)).count() as f64 / want.len() as f64
}

/// The mean-overlap band a model size is held to, if any.
pub fn accuracy_band(k: usize) -> Option<(f64, f64)> {
    match k {
        3 => Some((0.85, 1.0)),
        2 => Some((0.6, 0.8)),
        _ => None,
    }
}

#[derive(Clone, Debug)]
pub struct AccuracyConfig {
    pub k: usize,
    pub k_out: usize,
    pub k_cl: usize,
    pub queries: usize,
    pub query: QueryKind,
    pub weight: f64,
    pub partition: PartitionConfig,
    /// Concurrent client sessions.
    pub parallel: usize,
    pub seed: u64,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        let options = QueryOptions::default();
        Self {
            k: 3,
            k_out: options.k_out,
            k_cl: options.k_cl,
            queries: 50,
            query: QueryKind::Random,
            weight: 0.5,
            partition: PartitionConfig::default(),
            parallel: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryOutcome {
    pub user: u32,
    pub query: Vec<u16>,
    pub private: Vec<u32>,
    pub oracle: Vec<u32>,
    pub overlap: f64,
    pub seconds: f64,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AccuracyReport {
    pub k: usize,
    pub k_out: usize,
    pub k_cl: usize,
    pub query: QueryKind,
    pub mean_overlap: f64,
    pub min_overlap: f64,
    pub outcomes: Vec<QueryOutcome>,
    pub gates: Vec<Gate>,
}

fn timed_query(client: &mut Client, cloud: &Cloud, q: &[u16], options: &QueryOptions) -> Result<(QueryRun, f64)> {
    let start = Instant::now();
    let run = query_local(client, cloud, q, options, false)?;
    Ok((run, start.elapsed().as_secs_f64()))
}

/// One client with the queries it will run, in order.
struct Session {
    user: u32,
    client: Client,
    vectors: Vec<ItemVector>,
    queries: Vec<(usize, Vec<u16>)>,
}

fn run_session(s: &mut Session, cloud: &Cloud, options: &QueryOptions) -> Result<Vec<(usize, QueryOutcome)>> {
    let mut out = Vec::with_capacity(s.queries.len());
    for (n, q) in &s.queries {
        let (run, seconds) = timed_query(&mut s.client, cloud, q, options)?;
        let oracle = exact_knn(&s.vectors, q, options.k_out);
        let private = run.result.items;
        log::debug!("query {n}: user {} {q:?} -> {private:?}, oracle {oracle:?}", s.user);
        out.push((
            *n,
            QueryOutcome {
                user: s.user,
                overlap: overlap(&private, &oracle),
                query: q.clone(),
                private,
                oracle,
                seconds,
                bytes: run.client.report.total(),
            },
        ));
    }
    Ok(out)
}

/// Runs `queries` private queries for distinct random users, each against
/// that user's own model, and compares every result with exact KNN over
/// the same model. With `parallel > 1` the clients query the one cloud
/// concurrently; results do not depend on it.
pub fn bench_accuracy(ds: &RatingDataset, cfg: &AccuracyConfig) -> Result<AccuracyReport> {
    ensure!(cfg.queries > 0, "at least one query is needed");
    ensure!(ds.num_users() > 0, "the dataset has no users");
    let seeds = SeedTree::from_u64(cfg.seed);
    let mut rng = seeds.rng("accuracy", 0);
    let model = ModelConfig::new(cfg.k).with_weight(cfg.weight);
    let mut owner = DataOwner::new(ds.clone(), model, cfg.partition.clone(), seeds.child("owner", 0));
    let cloud = Cloud::new(seeds.child("cloud", 0))?;
    let options = QueryOptions { k_out: cfg.k_out, k_cl: cfg.k_cl, ..Default::default() };
    let qmax = ds.scale().quantized_max();
    let users = sample(&mut rng, ds.num_users(), cfg.queries.min(ds.num_users())).into_vec();

    let mut sessions: Vec<Session> = Vec::with_capacity(users.len());
    for &u in &users {
        let user = u as u32;
        owner.prepare(user).with_context(|| format!("building the model of user {user}"))?;
        let vectors = owner.model(user).and_then(|m| m.rm.as_ref()).map(|rm| rm.item_vectors()).unwrap_or_default();
        let bundle = distribute_local(&mut owner, &cloud, user)?.bundle;
        let client = Client::new(bundle, seeds.child("client", user as u64))?;
        sessions.push(Session { user, client, vectors, queries: Vec::new() });
    }
    for n in 0..cfg.queries {
        let q = draw_query(cfg.query, cfg.k, qmax, &mut rng);
        let i = n % sessions.len();
        sessions[i].queries.push((n, q));
    }

    let workers = cfg.parallel.clamp(1, sessions.len());
    let mut slots: Vec<Vec<&mut Session>> = (0..workers).map(|_| Vec::new()).collect();
    for (i, s) in sessions.iter_mut().enumerate() {
        slots[i % workers].push(s);
    }
    let cloud = &cloud;
    let options = &options;
    let results: Vec<Result<Vec<(usize, QueryOutcome)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = slots
            .into_iter()
            .map(|slot| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for s in slot {
                        out.extend(run_session(s, cloud, options)?);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("query worker panicked")).collect()
    });
    let mut numbered = Vec::with_capacity(cfg.queries);
    for r in results {
        numbered.extend(r?);
    }
    numbered.sort_by_key(|(n, _)| *n);
    let outcomes: Vec<QueryOutcome> = numbered.into_iter().map(|(_, o)| o).collect();

    let mean_overlap = outcomes.iter().map(|o| o.overlap).sum::<f64>() / outcomes.len() as f64;
    let min_overlap = outcomes.iter().map(|o| o.overlap).fold(1.0, f64::min);
    let gates = accuracy_band(cfg.k)
        .map(|(lo, hi)| {
            vec![Gate::new(
                format!("accuracy k={}", cfg.k),
                (lo..=hi).contains(&mean_overlap),
                format!("mean overlap {mean_overlap:.3}, band [{lo}, {hi}]"),
            )]
        })
        .unwrap_or_default();
    Ok(AccuracyReport { k: cfg.k, k_out: cfg.k_out, k_cl: cfg.k_cl, query: cfg.query, mean_overlap, min_overlap, outcomes, gates })
}

impl AccuracyReport {
    pub fn render(&self) -> String {
        let mut t = Table::new(&["user", "query", "overlap", "seconds", "bytes"]);
        for o in &self.outcomes {
            t.row(vec![
                o.user.to_string(),
                format!("{:?}", o.query),
                format!("{:.2}", o.overlap),
                format!("{:.3}", o.seconds),
                o.bytes.to_string(),
            ]);
        }
        format!(
            "{}\nk={} k_out={} k_cl={} queries={} mean_overlap={:.3} min_overlap={:.2}\n",
            t.render(),
            self.k,
            self.k_out,
            self.k_cl,
            self.outcomes.len(),
            self.mean_overlap,
            self.min_overlap
        )
    }
}

/// Least-squares line through `(x, y)` and its worst relative residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let max_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| ((slope * a + intercept - b) / b).abs())
        .fold(0.0, f64::max);
    LinearFit { slope, intercept, max_residual }
}

pub const MAX_RESIDUAL: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct ScalingConfig {
    /// Items of the smallest synthetic model.
    pub base_items: usize,
    pub factors: Vec<usize>,
    pub k: u16,
    pub repetitions: usize,
    pub k_out: usize,
    pub k_cl: usize,
    pub partition: PartitionConfig,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        let options = QueryOptions::default();
        Self {
            base_items: 500,
            factors: vec![1, 4, 16],
            k: 3,
            repetitions: 3,
            k_out: options.k_out,
            k_cl: options.k_cl,
            partition: PartitionConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SizePoint {
    pub items: usize,
    pub rm_cells: usize,
    /// `PRSM` encoding of the model.
    pub model_bytes: usize,
    /// Median over the repetitions.
    pub seconds: f64,
    /// Client-side transcript bytes of one query.
    pub bytes: u64,
    /// The same quantity from the transport's own counters.
    pub socket_bytes: u64,
    pub peak_rss_kb: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub points: Vec<SizePoint>,
    pub time_fit: LinearFit,
    pub bytes_fit: LinearFit,
    pub gates: Vec<Gate>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// A fresh owner, cloud and client sharing one distributed model.
struct Deployment {
    cloud: Cloud,
    client: Client,
}

fn deploy_model(rm: RecommendationModel, partition: &PartitionConfig, seeds: &SeedTree, client: u32) -> Result<Deployment> {
    let mut owner = DataOwner::without_dataset(partition.clone(), seeds.child("owner", 0));
    owner.install_model(client, rm)?;
    deploy(owner, seeds, client)
}

fn deploy_vectors(vectors: &[ItemVector], partition: &PartitionConfig, seeds: &SeedTree, client: u32) -> Result<Deployment> {
    let mut owner = DataOwner::without_dataset(partition.clone(), seeds.child("owner", 0));
    owner.install_vectors(client, vectors, 0)?;
    deploy(owner, seeds, client)
}

fn deploy(mut owner: DataOwner, seeds: &SeedTree, client: u32) -> Result<Deployment> {
    let cloud = Cloud::new(seeds.child("cloud", 0))?;
    let bundle = distribute_local(&mut owner, &cloud, client)?.bundle;
    Ok(Deployment { client: Client::new(bundle, seeds.child("client", 0))?, cloud })
}

struct Measured {
    seconds: f64,
    bytes: u64,
    socket_bytes: u64,
}

fn measure(d: &mut Deployment, queries: &[Vec<u16>], options: &QueryOptions) -> Result<Measured> {
    let mut times = Vec::with_capacity(queries.len());
    let mut bytes = Vec::with_capacity(queries.len());
    let mut socket = Vec::with_capacity(queries.len());
    for q in queries {
        let (run, seconds) = timed_query(&mut d.client, &d.cloud, q, options)?;
        times.push(seconds);
        bytes.push(run.client.report.total());
        socket.push(run.client.counters.sent + run.client.counters.received);
    }
    ensure!(bytes.windows(2).all(|w| w[0] == w[1]), "query traffic varies with the query: {bytes:?}");
    Ok(Measured { seconds: median(times), bytes: bytes[0], socket_bytes: socket[0] })
}

/// Times private queries over synthetic models of `base_items × factor`
/// items and fits time and traffic against model size.
pub fn bench_scaling(cfg: &ScalingConfig) -> Result<ScalingReport> {
    ensure!(cfg.factors.len() >= 2, "scaling needs at least two model sizes");
    ensure!(cfg.repetitions > 0, "at least one repetition is needed");
    let seeds = SeedTree::from_u64(cfg.seed);
    let options = QueryOptions { k_out: cfg.k_out, k_cl: cfg.k_cl, ..Default::default() };
    let qmax = 4;
    let mut points = Vec::new();
    for (i, &factor) in cfg.factors.iter().enumerate() {
        let items = cfg.base_items * factor;
        let rm = synth::model(items, cfg.k, qmax, cfg.seed ^ i as u64);
        let (rm_cells, model_bytes) = (rm.rating_cells(), serialize_rm(&rm).len());
        let run_seeds = seeds.child("scaling", i as u64);
        let mut d = deploy_model(rm, &cfg.partition, &run_seeds, 1)?;
        let mut rng = run_seeds.rng("queries", 0);
        let queries: Vec<_> = (0..cfg.repetitions).map(|_| draw_query(QueryKind::Random, cfg.k as usize, qmax, &mut rng)).collect();
        let m = measure(&mut d, &queries, &options)?;
        points.push(SizePoint {
            items,
            rm_cells,
            model_bytes,
            seconds: m.seconds,
            bytes: m.bytes,
            socket_bytes: m.socket_bytes,
            peak_rss_kb: peak_rss_kb(),
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.rm_cells as f64).collect();
    let time_fit = linear_fit(&x, &points.iter().map(|p| p.seconds).collect::<Vec<_>>());
    let bytes_fit = linear_fit(&x, &points.iter().map(|p| p.bytes as f64).collect::<Vec<_>>());
    let (first, last) = (&points[0], &points[points.len() - 1]);
    let size_ratio = last.rm_cells as f64 / first.rm_cells as f64;
    let growth = |a: f64, b: f64| b / a;
    let gates = vec![
        Gate::new(
            "time grows at most linearly",
            time_fit.max_residual <= MAX_RESIDUAL && growth(first.seconds, last.seconds) <= size_ratio * (1.0 + MAX_RESIDUAL),
            format!(
                "fit residual {:.3}, x{:.1} size gives x{:.2} time",
                time_fit.max_residual,
                size_ratio,
                growth(first.seconds, last.seconds)
            ),
        ),
        Gate::new(
            "bytes grow at most linearly",
            bytes_fit.max_residual <= MAX_RESIDUAL && growth(first.bytes as f64, last.bytes as f64) <= size_ratio * (1.0 + MAX_RESIDUAL),
            format!(
                "fit residual {:.3}, x{:.1} size gives x{:.2} bytes",
                bytes_fit.max_residual,
                size_ratio,
                growth(first.bytes as f64, last.bytes as f64)
            ),
        ),
        Gate::new(
            "bytes equal socket counters",
            points.iter().all(|p| p.bytes == p.socket_bytes),
            format!("{} sizes", points.len()),
        ),
    ];
    Ok(ScalingReport { points, time_fit, bytes_fit, gates })
}

impl ScalingReport {
    pub fn render(&self) -> String {
        let mut t = Table::new(&["items", "rm_cells", "model_bytes", "seconds", "bytes", "socket_bytes", "peak_rss_kb"]);
        for p in &self.points {
            t.row(vec![
                p.items.to_string(),
                p.rm_cells.to_string(),
                p.model_bytes.to_string(),
                format!("{:.3}", p.seconds),
                p.bytes.to_string(),
                p.socket_bytes.to_string(),
                p.peak_rss_kb.map_or("-".into(), |k| k.to_string()),
            ]);
        }
        format!(
            "{}\ntime fit: {:.3e} s/cell + {:.3} s, residual {:.3}\nbytes fit: {:.1} B/cell + {:.0} B, residual {:.3}\n",
            t.render(),
            self.time_fit.slope,
            self.time_fit.intercept,
            self.time_fit.max_residual,
            self.bytes_fit.slope,
            self.bytes_fit.intercept,
            self.bytes_fit.max_residual
        )
    }
}

/// Minimum slowdown of the full-rating baseline at dataset scale.
pub const BASELINE_MIN_SLOWDOWN: f64 = 5.0;

#[derive(Clone, Debug)]
pub struct BaselineConfig {
    pub k: usize,
    pub k_out: usize,
    pub k_cl: usize,
    pub weight: f64,
    /// Target user; drawn from the seed when unset.
    pub user: Option<u32>,
    pub repetitions: usize,
    pub partition: PartitionConfig,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let options = QueryOptions::default();
        Self {
            k: 3,
            k_out: options.k_out,
            k_cl: options.k_cl,
            weight: 0.5,
            user: None,
            repetitions: 1,
            partition: PartitionConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeCost {
    pub items: usize,
    pub dim: usize,
    pub seconds: f64,
    pub bytes: u64,
    pub peak_rss_kb: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselineReport {
    pub user: u32,
    pub rm: ModeCost,
    pub full: ModeCost,
    pub slowdown: f64,
    pub gates: Vec<Gate>,
}

/// Item vectors over every user's rating of each candidate item, missing
/// ratings at the scale's neutral level. Same candidates as the model.
pub fn full_rating_vectors(ds: &RatingDataset, items: impl IntoIterator<Item = u32>) -> Vec<ItemVector> {
    let neutral = ds.scale().neutral();
    items
        .into_iter()
        .map(|item| {
            let mut coords = vec![neutral; ds.num_users()];
            for &(u, r) in ds.item_raters(item) {
                coords[u as usize] = r;
            }
            ItemVector { item, coords }
        })
        .collect()
}

/// Compares a query over one user's model with the same query over full
/// rating columns of the same candidate items.
pub fn bench_baseline(ds: &RatingDataset, cfg: &BaselineConfig) -> Result<BaselineReport> {
    ensure!(ds.num_users() > 1, "the baseline needs at least two users");
    let seeds = SeedTree::from_u64(cfg.seed);
    let user = cfg.user.unwrap_or_else(|| seeds.rng("baseline-user", 0).gen_range(0..ds.num_users() as u32));
    let rm = prs_core::build_rm(ds, user, &ModelConfig::new(cfg.k).with_weight(cfg.weight), &VulnerabilityPolicy::unlimited())?;
    let full = full_rating_vectors(ds, rm.entries.iter().map(|e| e.item));
    let options = QueryOptions { k_out: cfg.k_out, k_cl: cfg.k_cl, ..Default::default() };
    let qmax = ds.scale().quantized_max();
    let items = rm.entries.len();

    let cost = |d: &mut Deployment, dim: usize| -> Result<ModeCost> {
        let queries = vec![vec![qmax; dim]; cfg.repetitions.max(1)];
        let m = measure(d, &queries, &options)?;
        Ok(ModeCost { items, dim, seconds: m.seconds, bytes: m.bytes, peak_rss_kb: peak_rss_kb() })
    };
    let rm_cost = cost(&mut deploy_model(rm, &cfg.partition, &seeds.child("rm", 0), user)?, cfg.k)?;
    let full_cost = cost(&mut deploy_vectors(&full, &cfg.partition, &seeds.child("full", 0), user)?, ds.num_users())?;
    let slowdown = full_cost.seconds / rm_cost.seconds;
    let gates = vec![Gate::new(
        "full-rating baseline is slower",
        slowdown >= BASELINE_MIN_SLOWDOWN,
        format!("x{slowdown:.1} time, x{:.1} bytes, need x{BASELINE_MIN_SLOWDOWN}", full_cost.bytes as f64 / rm_cost.bytes as f64),
    )];
    Ok(BaselineReport { user, rm: rm_cost, full: full_cost, slowdown, gates })
}

impl BaselineReport {
    pub fn render(&self) -> String {
        let mut t = Table::new(&["mode", "items", "dim", "seconds", "bytes", "peak_rss_kb"]);
        for (name, c) in [("rm", &self.rm), ("no-rm", &self.full)] {
            t.row(vec![
                name.into(),
                c.items.to_string(),
                c.dim.to_string(),
                format!("{:.3}", c.seconds),
                c.bytes.to_string(),
                c.peak_rss_kb.map_or("-".into(), |k| k.to_string()),
            ]);
        }
        format!("user {}\n{}\nslowdown x{:.1}\n", self.user, t.render(), self.slowdown)
    }
}

#[derive(Clone, Debug)]
pub struct ExposureConfig {
    pub k: usize,
    pub weight: f64,
    /// Neighbor count of the similarity-only baseline; `k` when unset.
    pub baseline_k: Option<usize>,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self { k: 3, weight: 0.5, baseline_k: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExposureBench {
    pub k: usize,
    pub weight: f64,
    pub mean_exposure: f64,
    pub mean_baseline: f64,
    /// Percent.
    pub reduction: f64,
    /// `(lower bound, users)` per power-of-two exposure bucket; the first
    /// bucket holds unexposed users.
    pub histogram: Vec<(usize, usize)>,
    pub baseline_histogram: Vec<(usize, usize)>,
    pub gates: Vec<Gate>,
}

fn histogram(values: &[usize]) -> Vec<(usize, usize)> {
    let mut buckets: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in values {
        let lower = if v == 0 { 0 } else { 1 << v.ilog2() };
        *buckets.entry(lower).or_default() += 1;
    }
    buckets.into_iter().collect()
}

/// Builds every user's model and compares neighbor exposure with plain
/// similarity-only top-k models.
pub fn bench_exposure(ds: &RatingDataset, cfg: &ExposureConfig) -> Result<ExposureBench> {
    let rms = build_all(ds, &ModelConfig::new(cfg.k).with_weight(cfg.weight), &VulnerabilityPolicy::unlimited())?;
    let report = exposure_report::<f64>(&rms, ds, cfg.baseline_k.unwrap_or(cfg.k))?;
    let mut gates = Vec::new();
    if cfg.weight == 1.0 && cfg.baseline_k.is_none_or(|b| b == cfg.k) {
        gates.push(Gate::new(
            "similarity-only matches its baseline",
            report.reduction == 0.0,
            format!("reduction {:.3}%", 100.0 * report.reduction),
        ));
    }
    Ok(ExposureBench {
        k: cfg.k,
        weight: cfg.weight,
        mean_exposure: report.mean_exposure,
        mean_baseline: report.mean_baseline,
        reduction: 100.0 * report.reduction,
        histogram: histogram(&report.exposure),
        baseline_histogram: histogram(&report.baseline_exposure),
        gates,
    })
}

impl ExposureBench {
    pub fn render(&self) -> String {
        let base: BTreeMap<usize, usize> = self.baseline_histogram.iter().copied().collect();
        let ours: BTreeMap<usize, usize> = self.histogram.iter().copied().collect();
        let mut t = Table::new(&["exposure>=", "users", "baseline_users"]);
        let keys: std::collections::BTreeSet<usize> = base.keys().chain(ours.keys()).copied().collect();
        for key in keys {
            t.row(vec![key.to_string(), ours.get(&key).unwrap_or(&0).to_string(), base.get(&key).unwrap_or(&0).to_string()]);
        }
        format!(
            "{}\nk={} w={} mean_exposure={:.1} baseline={:.1} reduction={:.1}%\n",
            t.render(),
            self.k,
            self.weight,
            self.mean_exposure,
            self.mean_baseline,
            self.reduction
        )
    }
}
