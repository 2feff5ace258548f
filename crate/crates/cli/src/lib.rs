//! Command-line front end: corpus generation, learning, synthesis,
//! strength reports and SVG rendering.

pub mod render;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use roomgen::corpus::synthetic::{generate_synthetic_corpus, PatternSpec};
use roomgen::corpus::{parse_scenes, read_scenes, write_scenes, ObjectInstance, Scene};
use roomgen::csr::{CsrParams, DEFAULT_EPSILON, DEFAULT_RATIO};
use roomgen::geometry::Polygon;
use roomgen::priors::{learn, DpcParams, LearnParams, PriorStore, Template};
use roomgen::synthesis::{synthesize, ObjectRequest, SolverParams, SynthesisError};

pub use render::RenderOptions;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{infeasible} of {total} variants are infeasible")]
    Infeasible { infeasible: usize, total: usize },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible { .. } => 3,
            CliError::Output { .. } => 1,
        }
    }
}

fn input(context: impl std::fmt::Display, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {err}"))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_owned(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(path.display(), e))
}

#[derive(Debug, Parser)]
#[command(
    name = "roomgen",
    version,
    about = "Learn furniture layout priors and synthesize rooms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic JSON-lines corpus and its ground-truth sidecar.
    GenCorpus {
        spec: PathBuf,
        out: PathBuf,
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Learn pair strengths, templates and wall priors from a corpus.
    Learn {
        corpus: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = 0.015)]
        eta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesize layouts for a room and an object list.
    Synth {
        priors: PathBuf,
        room: PathBuf,
        objects: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        variants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
    },
    /// Draw a scene, a template or one pair of a priors file as SVG.
    Render(RenderArgs),
    /// Write the strength graph as CSV, strongest pairs first.
    SsgReport { priors: PathBuf, out: PathBuf },
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    /// Template to draw from a priors file, as `anchor|other`.
    #[arg(long)]
    pub pair: Option<String>,
    /// Scene to draw from a multi-scene file.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 60.0)]
    pub scale: f64,
    #[arg(long)]
    pub no_labels: bool,
    /// Plain grey template points instead of orientation hues.
    #[arg(long)]
    pub no_hsv: bool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus { spec, out, n, seed } => gen_corpus(&spec, &out, n, seed),
        Command::Learn {
            corpus,
            out,
            ratio,
            eta,
            epsilon,
            seed,
        } => {
            let params = LearnParams {
                csr: CsrParams {
                    ratio,
                    ..CsrParams::default()
                },
                dpc: DpcParams {
                    eta,
                    ..DpcParams::default()
                },
                epsilon,
                seed,
            };
            let summary = learn_priors(&corpus, &out, &params)?;
            print!("{summary}");
            Ok(())
        }
        Command::Synth {
            priors,
            room,
            objects,
            out,
            variants,
            seed,
            max_iters,
        } => synth(&priors, &room, &objects, &out, variants, seed, max_iters),
        Command::Render(args) => render(&args),
        Command::SsgReport { priors, out } => ssg_report(&priors, &out),
    }
}

/// `dir/name.ext` with its last extension replaced by `suffix`.
pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

pub fn gen_corpus(spec: &Path, out: &Path, n: usize, seed: u64) -> Result<(), CliError> {
    let spec = PatternSpec::from_json(&read_text(spec)?).map_err(|e| input(spec.display(), e))?;
    let corpus = generate_synthetic_corpus(&spec, n, seed).map_err(|e| input("generation", e))?;
    write_scenes(out, &corpus.scenes).map_err(|e| CliError::Output {
        path: out.to_owned(),
        source: io::Error::other(e),
    })?;
    let truth =
        serde_json::to_string_pretty(&corpus.ground_truth).expect("ground truth serializes");
    write_file(&sidecar_path(out, "truth.json"), truth + "\n")?;
    log::info!("wrote {n} scenes to {}", out.display());
    Ok(())
}

/// Runs the offline stage and writes the priors file. Returns the
/// human-readable summary.
pub fn learn_priors(corpus: &Path, out: &Path, params: &LearnParams) -> Result<String, CliError> {
    if !(params.csr.ratio > 0.0 && params.csr.ratio <= 1.0) {
        return Err(CliError::Input(format!(
            "--ratio must lie in (0, 1], got {}",
            params.csr.ratio
        )));
    }
    if !params.epsilon.is_finite() {
        return Err(CliError::Input("--epsilon must be finite".into()));
    }
    let scenes = read_scenes(corpus).map_err(|e| input(corpus.display(), e))?;
    if scenes.is_empty() {
        return Err(CliError::Input(format!(
            "{}: corpus is empty",
            corpus.display()
        )));
    }
    let (store, report) = learn(&scenes, params).map_err(|e| input("learning", e))?;
    let text = store.to_json().map_err(|e| input("priors", e))? + "\n";
    write_file(out, text)?;

    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(format!(
        "scenes: {} used, {} skipped",
        report.scenes_used, report.scenes_skipped
    ));
    let mut pairs: Vec<_> = store.ssg.iter().collect();
    pairs.sort_by(|a, b| {
        b.1.d_value
            .total_cmp(&a.1.d_value)
            .then_with(|| a.0.cmp(b.0))
    });
    let strong = pairs
        .iter()
        .filter(|(_, p)| p.d_value >= params.epsilon)
        .count();
    line(format!(
        "pairs: {} scored, {strong} at or above epsilon {}",
        pairs.len(),
        params.epsilon
    ));
    for ((a, b), p) in pairs.iter().filter(|(_, p)| p.d_value >= params.epsilon) {
        line(format!(
            "  {a}|{b}  d={:.3}  m={}/{}",
            p.d_value, p.m_used, p.n_samples
        ));
    }
    line(format!("excluded pairs: {}", report.excluded_pairs.len()));
    for e in &report.excluded_pairs {
        line(format!("  {}|{}  {}", e.pair.0, e.pair.1, e.reason));
    }
    line(format!(
        "templates: {}, wall priors: {}",
        store.templates.len(),
        store.wall_priors.len()
    ));
    for ((a, b), why) in &report.failed_templates {
        line(format!("  no template for {a}|{b}: {why}"));
    }
    for (c, why) in &report.failed_wall_priors {
        line(format!("  no wall prior for {c}: {why}"));
    }
    line(format!("wrote {}", out.display()));
    Ok(s)
}

/// Room input for `synth`: the room outline and optional fixtures.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomFile {
    pub room: Polygon,
    #[serde(default)]
    pub fixtures: Vec<ObjectInstance>,
}

#[derive(Debug, Serialize)]
struct VariantMeta {
    variant: usize,
    seed: u64,
    loss: f64,
    iterations: usize,
    feasible: bool,
}

#[derive(Debug, Serialize)]
struct SynthMeta {
    seed: u64,
    max_iterations: usize,
    variants: Vec<VariantMeta>,
}

fn read_priors(path: &Path) -> Result<PriorStore, CliError> {
    PriorStore::from_json(&read_text(path)?).map_err(|e| input(path.display(), e))
}

pub fn synth(
    priors: &Path,
    room: &Path,
    objects: &Path,
    out: &Path,
    variants: usize,
    seed: u64,
    max_iters: usize,
) -> Result<(), CliError> {
    let store = read_priors(priors)?;
    let room_file: RoomFile =
        serde_json::from_str(&read_text(room)?).map_err(|e| input(room.display(), e))?;
    let requests: Vec<ObjectRequest> =
        serde_json::from_str(&read_text(objects)?).map_err(|e| input(objects.display(), e))?;
    let params = SolverParams {
        epsilon: store.epsilon,
        max_iterations: max_iters,
        seed,
        ..SolverParams::default()
    };
    let results = synthesize(
        &room_file.room,
        &requests,
        &room_file.fixtures,
        &store,
        variants,
        &params,
    )
    .map_err(|e| match e {
        SynthesisError::NoWallPrior(c) => CliError::Input(format!(
            "category {c:?} has no wall prior and no group member with one"
        )),
        other => input("synthesis", other),
    })?;
    let scenes: Vec<Scene> = results.iter().map(|r| r.scene.clone()).collect();
    write_scenes(out, &scenes).map_err(|e| CliError::Output {
        path: out.to_owned(),
        source: io::Error::other(e),
    })?;
    let meta = SynthMeta {
        seed,
        max_iterations: max_iters,
        variants: results
            .iter()
            .map(|r| VariantMeta {
                variant: r.variant,
                seed: r.seed,
                loss: r.loss,
                iterations: r.iterations,
                feasible: r.feasible,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_file(&sidecar_path(out, "meta.json"), text + "\n")?;
    let infeasible = results.iter().filter(|r| !r.feasible).count();
    if infeasible > 0 {
        return Err(CliError::Infeasible {
            infeasible,
            total: results.len(),
        });
    }
    Ok(())
}

fn pick_template<'a>(store: &'a PriorStore, pair: &str) -> Result<&'a Template, CliError> {
    let (a, b) = pair.split_once('|').ok_or_else(|| {
        CliError::Input(format!("--pair must look like anchor|other, got {pair:?}"))
    })?;
    store
        .template(a, b)
        .ok_or_else(|| CliError::Input(format!("priors have no template for {pair}")))
}

pub fn render(args: &RenderArgs) -> Result<(), CliError> {
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(CliError::Input(format!(
            "--scale must be positive, got {}",
            args.scale
        )));
    }
    let options = RenderOptions {
        scale: args.scale,
        draw_labels: !args.no_labels,
        hsv_orientation: !args.no_hsv,
    };
    let text = read_text(&args.input)?;
    let name = args.input.display();
    let svg = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(value) if value.get("templates").is_some() => {
            let store = PriorStore::from_json(&text).map_err(|e| input(&name, e))?;
            let pair = args
                .pair
                .as_deref()
                .ok_or_else(|| CliError::Input(format!("{name}: priors input needs --pair")))?;
            render::render_template(pick_template(&store, pair)?, Some(pair), &options)
        }
        Ok(value) if value.get("points").is_some() => {
            let t: Template = serde_json::from_value(value).map_err(|e| input(&name, e))?;
            render::render_template(&t, None, &options)
        }
        Ok(value) if value.get("room").is_some() && value.get("objects").is_some() => {
            let scene: Scene = serde_json::from_value(value).map_err(|e| input(&name, e))?;
            render::render_scene(&scene, &options)
        }
        Ok(_) => return Err(CliError::Input(format!("{name}: unknown input kind"))),
        Err(_) => {
            let scenes = parse_scenes(&text)
                .map_err(|_| CliError::Input(format!("{name}: unknown input kind")))?;
            let scene = scenes.get(args.index).ok_or_else(|| {
                CliError::Input(format!(
                    "{name}: no scene {} (file has {})",
                    args.index,
                    scenes.len()
                ))
            })?;
            render::render_scene(scene, &options)
        }
    };
    write_file(&args.out, svg)
}

pub fn ssg_report(priors: &Path, out: &Path) -> Result<(), CliError> {
    let store = read_priors(priors)?;
    let mut rows: Vec<_> = store.ssg.iter().collect();
    rows.sort_by(|a, b| {
        b.1.d_value
            .total_cmp(&a.1.d_value)
            .then_with(|| a.0.cmp(b.0))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    let failed = |e: csv::Error| CliError::Output {
        path: out.to_owned(),
        source: io::Error::other(e),
    };
    w.write_record([
        "pair",
        "n_samples",
        "m_used",
        "cooccurrence",
        "d_value",
        "above_threshold",
    ])
    .map_err(failed)?;
    for ((a, b), p) in rows {
        w.write_record([
            format!("{a}|{b}"),
            p.n_samples.to_string(),
            p.m_used.to_string(),
            p.cooccurrence.to_string(),
            format!("{:.6}", p.d_value),
            (p.d_value >= store.epsilon).to_string(),
        ])
        .map_err(failed)?;
    }
    let bytes = w.into_inner().map_err(|e| failed(e.into_error().into()))?;
    write_file(out, bytes)
}
