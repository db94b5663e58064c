use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use prs_core::dataset::dataset_stats;
use prs_core::{
    build_rm, perturb_ratings, remap_levels, ModelConfig, PartitionConfig, PerturbationPolicy, RatingDataset, RatingScale,
    RecordFormat, VulnerabilityPolicy,
};
use prs_protocol::{Client, Cloud, DataOwner, DisclosureMode, Feedback, QueryOptions, SeedTree, Served};
use prs_wire::{Metered, TcpChannel};
use serde::Serialize;

use prs_cli::bench::{self, AccuracyConfig, BaselineConfig, ExposureConfig, QueryKind, ScalingConfig};
use prs_cli::store::{self, DatasetSource};
use prs_cli::{all_passed, env_seed, Gate};

#[derive(Parser)]
#[command(name = "prs", version, about = "Private recommendations over reduced neighbor models")]
struct Cli {
    /// Emit one JSON document instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate and optionally perturb a rating file.
    Ingest(IngestArgs),
    /// Build one user's recommendation model.
    Model(ModelArgs),
    /// Partition a model into stash and clusters.
    Preprocess(PreprocessArgs),
    /// Mask a partitioned model through the cloud and write the client bundle.
    Distribute(DistributeArgs),
    /// Run the cloud.
    Serve(ServeArgs),
    /// Query the cloud with a client bundle.
    Query(QueryArgs),
    /// Record a rating, rebuild the model and redistribute it.
    Feedback(FeedbackArgs),
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Private results against plaintext KNN on the same models.
    Accuracy(AccuracyArgs),
    /// Query cost against model size, plus the full-rating baseline.
    Scaling(ScalingArgs),
    /// Neighbor exposure against similarity-only models.
    Exposure(ExposureArgs),
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Dataset written by `prs ingest`.
    #[arg(long, conflicts_with_all = ["ratings", "synthetic"])]
    dataset: Option<PathBuf>,
    /// Raw rating file.
    #[arg(long, conflicts_with = "synthetic")]
    ratings: Option<PathBuf>,
    /// Field delimiter of the rating file: tab, colons, comma or a literal.
    #[arg(long, default_value = "tab")]
    format: String,
    /// Rating scale as min:max:step.
    #[arg(long, default_value = "1:5:1")]
    scale: String,
    /// Synthetic dataset: `twin` or USERS,ITEMS,RATINGS. The default
    /// without a file.
    #[arg(long)]
    synthetic: Option<String>,
}

impl DatasetArgs {
    fn source(&self, seed: u64) -> Result<DatasetSource> {
        if let Some(p) = &self.dataset {
            return Ok(DatasetSource::Ingested(p.clone()));
        }
        if let Some(p) = &self.ratings {
            return Ok(DatasetSource::Ratings { path: p.clone(), format: RecordFormat::parse(&self.format), scale: RatingScale::parse(&self.scale)? });
        }
        match self.synthetic.as_deref().unwrap_or("twin") {
            "twin" => Ok(DatasetSource::Twin { seed }),
            spec => {
                let n: Vec<usize> = spec.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().context("synthetic shape must be USERS,ITEMS,RATINGS")?;
                let [users, items, ratings] = n[..] else { bail!("synthetic shape must be USERS,ITEMS,RATINGS") };
                Ok(DatasetSource::Synthetic { users, items, ratings, seed })
            }
        }
    }

    fn load(&self, seed: u64) -> Result<RatingDataset> {
        self.source(seed)?.load()
    }
}

#[derive(Args, Clone)]
struct PartitionArgs {
    /// k-means clusters; ceil(sqrt(n)) when unset.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 64)]
    capacity: usize,
    /// Smallest cluster kept out of the stash; capacity/4 when unset.
    #[arg(long)]
    min_size: Option<usize>,
}

impl PartitionArgs {
    fn config(&self, seed: u64) -> PartitionConfig {
        PartitionConfig { clusters: self.clusters, capacity: self.capacity, min_size: self.min_size, seed, ..Default::default() }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    source: DatasetArgs,
    /// Perturb ratings with Laplace noise, e.g. b=0.7. Ratings are first
    /// mapped onto five levels.
    #[arg(long)]
    perturb: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    source: DatasetArgs,
    /// External id of the target user.
    #[arg(long)]
    user: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Weight of similarity against reusability.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    partition: PartitionArgs,
    /// Model generation recorded in the sets.
    #[arg(long, default_value_t = 0)]
    generation: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistributeArgs {
    #[arg(long)]
    sets: PathBuf,
    #[arg(long)]
    client: u32,
    #[arg(long)]
    cloud: String,
    /// Ingested dataset, for external item ids in the bundle.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7400")]
    listen: String,
    /// Exit after this many sessions.
    #[arg(long)]
    sessions: Option<usize>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    cloud: String,
    #[arg(long)]
    bundle: PathBuf,
    /// Comma-separated rating levels, one per model neighbor.
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k_out: usize,
    #[arg(long, default_value_t = 3)]
    k_cl: usize,
    /// Also reveal each stage's winners to the client.
    #[arg(long)]
    per_stage: bool,
}

#[derive(Args)]
struct FeedbackArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// The client's current bundle; gives its id and generation.
    #[arg(long)]
    bundle: PathBuf,
    /// External id of the rated item.
    #[arg(long)]
    item: String,
    /// Rating on the dataset's scale.
    #[arg(long)]
    rating: f64,
    #[arg(long)]
    cloud: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    #[command(flatten)]
    partition: PartitionArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Where the new bundle goes; the model and dataset are updated in place.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AccuracyArgs {
    #[command(flatten)]
    source: DatasetArgs,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    k_out: usize,
    #[arg(long, default_value_t = 3)]
    k_cl: usize,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    /// Query every coordinate at the top rating instead of at random.
    #[arg(long)]
    all_max: bool,
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    #[command(flatten)]
    partition: PartitionArgs,
    /// Concurrent client sessions against the one cloud.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    source: DatasetArgs,
    /// Items of the smallest synthetic model.
    #[arg(long, default_value_t = 500)]
    base_items: usize,
    /// Size multiples of the base model.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
    factors: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    k: u16,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[command(flatten)]
    partition: PartitionArgs,
    /// Skip the full-rating baseline.
    #[arg(long)]
    skip_baseline: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExposureArgs {
    #[command(flatten)]
    source: DatasetArgs,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    w: f64,
    /// Neighbors of the similarity-only baseline; k when unset.
    #[arg(long)]
    baseline_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// `--seed`, else `PRS_SEED`, else fresh entropy.
fn seed(flag: Option<u64>) -> Result<u64> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or_else(rand::random),
    })
}

/// Output of a command: text, JSON and the gates deciding the exit code.
struct Outcome {
    text: String,
    json: serde_json::Value,
    gates: Vec<Gate>,
}

impl Outcome {
    fn new(text: String, json: impl Serialize) -> Result<Self> {
        Ok(Self { text, json: serde_json::to_value(json)?, gates: Vec::new() })
    }

    fn gated(mut self, gates: Vec<Gate>) -> Self {
        self.gates = gates;
        self
    }
}

fn user_index(ds: &RatingDataset, id: &str) -> Result<u32> {
    ds.users().index_of(id).with_context(|| format!("no user {id:?} in the dataset"))
}

fn ingest(a: &IngestArgs) -> Result<Outcome> {
    let seed = seed(a.seed)?;
    let mut ds = a.source.load(seed)?;
    let mut perturbed = None;
    if let Some(p) = &a.perturb {
        let b: f64 = p.strip_prefix("b=").unwrap_or(p).parse().with_context(|| format!("bad perturbation {p:?}, expected b=<float>"))?;
        let policy = PerturbationPolicy::with_scale(b);
        if ds.scale().quantized_max() != *policy.domain.end() {
            ds = remap_levels(&ds, *policy.domain.end())?;
        }
        ds = perturb_ratings(&ds, &policy, seed)?;
        perturbed = Some(b);
    }
    if let Some(out) = &a.out {
        store::write_dataset(out, &ds)?;
    }
    let s = dataset_stats(&ds);
    let text = format!(
        "users {}\nitems {}\nratings {}\ndensity {:.5}\nlevels 0..={}\n{}",
        s.users,
        s.items,
        s.ratings,
        s.density,
        ds.scale().quantized_max(),
        perturbed.map_or(String::new(), |b| format!("perturbed with b={b}, seed {seed}\n"))
    );
    #[derive(Serialize)]
    struct Json {
        users: usize,
        items: usize,
        ratings: usize,
        density: f64,
        perturb_b: Option<f64>,
    }
    Outcome::new(text, Json { users: s.users, items: s.items, ratings: s.ratings, density: s.density, perturb_b: perturbed })
}

fn model(a: &ModelArgs) -> Result<Outcome> {
    let ds = a.source.load(seed(None)?)?;
    let user = user_index(&ds, &a.user)?;
    let rm = build_rm(&ds, user, &ModelConfig::new(a.k).with_weight(a.weight), &VulnerabilityPolicy::unlimited())?;
    let bytes = store::write_model(&a.out, &rm)?;
    let text = format!(
        "user {} (index {user})\nentries {} (items {} - rated {})\nrating cells {}\nmodel bytes {bytes}\n",
        a.user,
        rm.entries.len(),
        ds.num_items(),
        ds.user_ratings(user).len(),
        rm.rating_cells()
    );
    #[derive(Serialize)]
    struct Json {
        user: u32,
        entries: usize,
        rating_cells: usize,
        model_bytes: usize,
    }
    Outcome::new(text, Json { user, entries: rm.entries.len(), rating_cells: rm.rating_cells(), model_bytes: bytes })
}

fn preprocess(a: &PreprocessArgs) -> Result<Outcome> {
    let rm = store::read_model(&a.model)?;
    let sets = prs_core::prepare_sets::<f64>(&rm.item_vectors(), &a.partition.config(seed(a.seed)?), a.generation)?;
    let bytes = store::write_sets(&a.out, &sets)?;
    let l = sets.layout;
    let text = format!(
        "clusters {} x capacity {}\nstash {}\ndimension {}\nsets bytes {bytes}\n",
        l.num_clusters, l.capacity, l.stash_size, l.k
    );
    #[derive(Serialize)]
    struct Json {
        clusters: u32,
        capacity: u32,
        stash: u32,
        dimension: u16,
        sets_bytes: usize,
    }
    Outcome::new(text, Json { clusters: l.num_clusters, capacity: l.capacity, stash: l.stash_size, dimension: l.k, sets_bytes: bytes })
}

fn connect(addr: &str) -> Result<Metered<TcpChannel>> {
    Ok(Metered::new(TcpChannel::connect(addr).with_context(|| format!("connecting to the cloud at {addr}"))?))
}

fn owner_for(dataset: Option<&PathBuf>, seeds: &SeedTree) -> Result<DataOwner> {
    Ok(match dataset {
        Some(p) => DataOwner::new(store::read_dataset(p)?, ModelConfig::new(3), PartitionConfig::default(), seeds.child("owner", 0)),
        None => DataOwner::without_dataset(PartitionConfig::default(), seeds.child("owner", 0)),
    })
}

fn distribute(a: &DistributeArgs) -> Result<Outcome> {
    let seeds = SeedTree::from_u64(seed(None)?);
    let mut owner = owner_for(a.dataset.as_ref(), &seeds)?;
    owner.install_sets(a.client, store::read_sets(&a.sets)?);
    let mut link = connect(&a.cloud)?;
    let bundle = owner.distribute(&mut link, a.client)?;
    let bytes = store::write_bundle(&a.out, &bundle)?;
    let report = link.report();
    let text = format!(
        "client {} generation {}\nbundle bytes {bytes}\nsetup traffic {} B\n",
        bundle.client,
        bundle.generation,
        report.total()
    );
    #[derive(Serialize)]
    struct Json {
        client: u32,
        generation: u64,
        bundle_bytes: usize,
        traffic: u64,
    }
    Outcome::new(text, Json { client: bundle.client, generation: bundle.generation, bundle_bytes: bytes, traffic: report.total() })
}

fn serve(a: &ServeArgs, json: bool) -> Result<Outcome> {
    let cloud = Arc::new(Cloud::new(SeedTree::from_u64(seed(None)?))?);
    let listener = TcpListener::bind(&a.listen).with_context(|| format!("binding {}", a.listen))?;
    log::info!("cloud listening on {}", listener.local_addr()?);
    eprintln!("listening on {}", listener.local_addr()?);
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || cloud.serve_tcp(listener, move |r| drop(tx.send(r))));
    let (mut served, mut failed) = (0usize, 0usize);
    for r in rx {
        match r {
            Ok(Served::Setup { client, generation }) => log::info!("setup client {client} generation {generation}"),
            Ok(Served::Query { client, generation }) => log::info!("query client {client} generation {generation}"),
            Err(e) => {
                failed += 1;
                log::warn!("session failed: {e}");
            }
        }
        served += 1;
        if !json {
            eprintln!("sessions {served}, failed {failed}");
        }
        if a.sessions.is_some_and(|n| served >= n) {
            break;
        }
    }
    #[derive(Serialize)]
    struct Json {
        sessions: usize,
        failed: usize,
    }
    Outcome::new(format!("sessions {served}\nfailed {failed}\n"), Json { sessions: served, failed })
}

fn query(a: &QueryArgs) -> Result<Outcome> {
    let bundle = store::read_bundle(&a.bundle)?;
    let mut client = Client::new(bundle, SeedTree::from_u64(seed(None)?))?;
    let q = store::parse_query(&a.query)?;
    let options = QueryOptions {
        k_out: a.k_out,
        k_cl: a.k_cl,
        disclosure: if a.per_stage { DisclosureMode::PerStage } else { DisclosureMode::FinalOnly },
    };
    let mut link = connect(&a.cloud)?;
    let result = client.query(&mut link, &q, &options, &mut prs_protocol::NoAudit)?;
    let report = link.report();
    let mut text = String::new();
    for (rank, id) in result.external_ids.iter().enumerate() {
        text.push_str(&format!("{:>3}  {id}\n", rank + 1));
    }
    text.push_str(&format!("generation {}\ntraffic {} B\n", result.rm_generation, report.total()));
    #[derive(Serialize)]
    struct Json {
        items: Vec<String>,
        generation: u64,
        traffic: u64,
        disclosed: Vec<u32>,
    }
    Outcome::new(text, Json { items: result.external_ids, generation: result.rm_generation, traffic: report.total(), disclosed: result.disclosed })
}

fn feedback(a: &FeedbackArgs) -> Result<Outcome> {
    let seed = seed(a.seed)?;
    let seeds = SeedTree::from_u64(seed);
    let ds = store::read_dataset(&a.dataset)?;
    let mut rm = store::read_model(&a.model)?;
    let bundle = store::read_bundle(&a.bundle)?;
    let item = ds.items().index_of(&a.item).with_context(|| format!("no item {:?} in the dataset", a.item))?;
    let rating = ds.scale().quantize(a.rating).with_context(|| format!("rating {} is off the dataset's scale", a.rating))?;
    rm.generation = bundle.generation;
    let mut owner = DataOwner::new(ds, ModelConfig::new(a.k).with_weight(a.weight), a.partition.config(seed), seeds.child("owner", 0));
    owner.install_model(bundle.client, rm)?;
    let generation = owner.apply_feedback(&Feedback { client: bundle.client, generation: bundle.generation, item, rating })?;
    let mut link = connect(&a.cloud)?;
    let next = owner.distribute(&mut link, bundle.client)?;
    store::write_bundle(&a.out, &next)?;
    let rm = owner.model(bundle.client).and_then(|m| m.rm.as_ref()).context("rebuilt model missing")?;
    store::write_model(&a.model, rm)?;
    store::write_dataset(&a.dataset, owner.dataset().context("dataset missing")?)?;
    let text = format!("client {} now at generation {generation}\nmodel entries {}\n", bundle.client, rm.entries.len());
    #[derive(Serialize)]
    struct Json {
        client: u32,
        generation: u64,
        entries: usize,
    }
    Outcome::new(text, Json { client: bundle.client, generation, entries: rm.entries.len() })
}

fn bench_accuracy(a: &AccuracyArgs) -> Result<Outcome> {
    let seed = seed(a.seed)?;
    let ds = a.source.load(seed)?;
    let cfg = AccuracyConfig {
        k: a.k,
        k_out: a.k_out,
        k_cl: a.k_cl,
        queries: a.queries,
        query: if a.all_max { QueryKind::AllMax } else { QueryKind::Random },
        weight: a.weight,
        partition: a.partition.config(seed),
        parallel: a.parallel,
        seed,
    };
    let r = bench::bench_accuracy(&ds, &cfg)?;
    Ok(Outcome::new(r.render(), &r)?.gated(r.gates.clone()))
}

fn bench_scaling(a: &ScalingArgs) -> Result<Outcome> {
    let seed = seed(a.seed)?;
    let cfg = ScalingConfig {
        base_items: a.base_items,
        factors: a.factors.clone(),
        k: a.k,
        repetitions: a.repetitions,
        partition: a.partition.config(seed),
        seed,
        ..Default::default()
    };
    let scaling = bench::bench_scaling(&cfg)?;
    let mut text = scaling.render();
    let mut gates = scaling.gates.clone();
    let baseline = if a.skip_baseline {
        None
    } else {
        let ds = a.source.load(seed)?;
        let b = bench::bench_baseline(&ds, &BaselineConfig { k: a.k as usize, partition: a.partition.config(seed), seed, ..Default::default() })?;
        text.push('\n');
        text.push_str(&b.render());
        gates.extend(b.gates.clone());
        Some(b)
    };
    #[derive(Serialize)]
    struct Json<'a> {
        scaling: &'a bench::ScalingReport,
        baseline: Option<&'a bench::BaselineReport>,
        gates: &'a [Gate],
    }
    let json = Json { scaling: &scaling, baseline: baseline.as_ref(), gates: &gates };
    Ok(Outcome::new(text, json)?.gated(gates))
}

fn bench_exposure(a: &ExposureArgs) -> Result<Outcome> {
    let ds = a.source.load(seed(a.seed)?)?;
    let r = bench::bench_exposure(&ds, &ExposureConfig { k: a.k, weight: a.w, baseline_k: a.baseline_k })?;
    Ok(Outcome::new(r.render(), &r)?.gated(r.gates.clone()))
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Model(a) => model(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Distribute(a) => distribute(a),
        Command::Serve(a) => serve(a, cli.json),
        Command::Query(a) => query(a),
        Command::Feedback(a) => feedback(a),
        Command::Bench(BenchCommand::Accuracy(a)) => bench_accuracy(a),
        Command::Bench(BenchCommand::Scaling(a)) => bench_scaling(a),
        Command::Bench(BenchCommand::Exposure(a)) => bench_exposure(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                let mut json = out.json;
                if let Some(obj) = json.as_object_mut() {
                    obj.entry("passed").or_insert(all_passed(&out.gates).into());
                }
                println!("{json}");
            } else {
                print!("{}", out.text);
                for g in &out.gates {
                    println!("{}", g.line());
                }
            }
            if all_passed(&out.gates) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
