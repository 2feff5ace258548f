//! Denoised layout priors learned by density peak clustering.
//!
//! Relation samples of a category pair are clustered by local density `ρ`
//! (neighbours within a cutoff `d_c`) and separation `δ` (distance to the
//! nearest denser sample). Low-density samples are discarded as noise and
//! the survivors form a weighted [`Template`]. The same clustering on
//! scalar wall attributes yields a [`WallPrior`].

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    build_relation_graph, CorpusError, PairKey, RelationGraph, RelationSample, Scene,
    WallAttributeSample,
};
use crate::csr::{build_ssg, CsrParams, ExcludedPair, SpatialStrengthGraph, DEFAULT_EPSILON};
use crate::geometry::{ang_diff, wrap_angle};

pub const PRIORS_VERSION: u32 = 1;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("density clustering needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("every sample was discarded as noise")]
    EmptyTemplate,
    #[error("no neighbour template reaches similarity {beta}")]
    NoPriorAvailable { beta: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error("unsupported priors version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid priors: {0}")]
    Invalid(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpcParams {
    /// Neighbour fraction that fixes the density cutoff.
    pub eta: f64,
    /// Samples whose density is below this fraction of the maximum are noise.
    pub rho_keep: f64,
    /// Samples whose `ρ·δ` reaches this fraction of the maximum are centers.
    pub center_score_keep: f64,
    /// Larger inputs are thinned by a fixed stride before clustering.
    pub max_points: usize,
}

impl Default for DpcParams {
    fn default() -> Self {
        Self {
            eta: 0.015,
            rho_keep: 0.01,
            center_score_keep: 0.2,
            max_points: 1000,
        }
    }
}

impl DpcParams {
    pub fn validate(&self) -> Result<(), PriorError> {
        for (name, v) in [
            ("eta", self.eta),
            ("rho_keep", self.rho_keep),
            ("center_score_keep", self.center_score_keep),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(PriorError::InvalidParams {
                    name,
                    reason: format!("{v} is outside (0, 1)"),
                });
            }
        }
        if self.max_points < 2 {
            return Err(PriorError::InvalidParams {
                name: "max_points",
                reason: "must be at least 2".into(),
            });
        }
        Ok(())
    }
}

/// Local density, separation and the cutoff that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dpc {
    pub rho: Vec<usize>,
    pub delta: Vec<f64>,
    pub d_c: f64,
    /// Nearest denser point; `None` only for the densest.
    pub nearest_higher: Vec<Option<usize>>,
}

impl Dpc {
    /// Index of the densest point (lowest index among ties).
    pub fn peak(&self) -> usize {
        self.order()[0]
    }

    /// Indices from densest to sparsest; ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rho.len()).collect();
        order.sort_by(|&a, &b| self.rho[b].cmp(&self.rho[a]).then(a.cmp(&b)));
        order
    }
}

/// The `⌊η·K²⌋`-th smallest of the `K(K−1)` ordered pairwise distances.
pub fn cutoff_distance<F: Fn(usize, usize) -> f64>(k: usize, eta: f64, dist: F) -> f64 {
    let ordered = k * (k - 1);
    let r = ((eta * (k * k) as f64 + 1e-9).floor() as usize).clamp(1, ordered);
    // each unordered distance appears twice in the ordered list
    let q = r.div_ceil(2);
    let mut d: Vec<f64> = Vec::with_capacity(ordered / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            d.push(dist(a, b));
        }
    }
    let (_, v, _) = d.select_nth_unstable_by(q - 1, f64::total_cmp);
    *v
}

/// Densities and separations for a fixed cutoff over any symmetric
/// distance.
pub fn dpc_with_cutoff<F: Fn(usize, usize) -> f64>(k: usize, d_c: f64, dist: F) -> Dpc {
    let mut rho = vec![0usize; k];
    for a in 0..k {
        for b in (a + 1)..k {
            if dist(a, b) <= d_c {
                rho[a] += 1;
                rho[b] += 1;
            }
        }
    }
    let mut dpc = Dpc {
        rho,
        delta: vec![0.0; k],
        d_c,
        nearest_higher: vec![None; k],
    };
    let order = dpc.order();
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 {
            dpc.delta[i] = (0..k).map(|j| dist(i, j)).fold(0.0, f64::max);
            continue;
        }
        let mut best = (f64::INFINITY, order[0]);
        for &j in &order[..pos] {
            let d = dist(i, j);
            if d < best.0 {
                best = (d, j);
            }
        }
        dpc.delta[i] = best.0;
        dpc.nearest_higher[i] = Some(best.1);
    }
    dpc
}

pub fn dpc<F: Fn(usize, usize) -> f64>(k: usize, eta: f64, dist: F) -> Result<Dpc, PriorError> {
    if k < 2 {
        return Err(PriorError::TooFewSamples(k));
    }
    let d_c = cutoff_distance(k, eta, &dist);
    Ok(dpc_with_cutoff(k, d_c, dist))
}

/// Clustering over the translations `(p_x, p_y, p_z)` of relation samples.
pub fn dpc_densities(samples: &[RelationSample], eta: f64) -> Result<Dpc, PriorError> {
    dpc(samples.len(), eta, |a, b| samples[a].distance3(&samples[b]))
}

fn thin<T: Copy>(items: &[T], max_points: usize) -> Vec<T> {
    if items.len() <= max_points {
        return items.to_vec();
    }
    let stride = items.len().div_ceil(max_points);
    log::info!("thinning {} samples by stride {stride}", items.len());
    items.iter().step_by(stride).copied().collect()
}

/// Noise filtering and center detection shared by templates and wall
/// priors. Returns the retained indices and the centers among them.
fn select(dpc: &Dpc, params: &DpcParams) -> Result<(Vec<usize>, Vec<usize>), PriorError> {
    let max_rho = dpc.rho.iter().copied().max().unwrap_or(0);
    if max_rho == 0 {
        return Err(PriorError::EmptyTemplate);
    }
    let floor = params.rho_keep * max_rho as f64;
    let kept: Vec<usize> = (0..dpc.rho.len())
        .filter(|&i| dpc.rho[i] as f64 >= floor)
        .collect();
    let score = |i: usize| dpc.rho[i] as f64 * dpc.delta[i];
    let max_score = kept.iter().map(|&i| score(i)).fold(0.0, f64::max);
    let centers = if max_score > 0.0 {
        kept.iter()
            .copied()
            .filter(|&i| score(i) >= params.center_score_keep * max_score)
            .collect()
    } else {
        vec![dpc.peak()]
    };
    Ok((kept, centers))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemplatePoint {
    pub sample: RelationSample,
    pub weight: f64,
}

/// Weighted discrete set of relative poses.
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    points: Vec<TemplatePoint>,
    centers: Vec<usize>,
}

impl Template {
    pub fn new(points: Vec<TemplatePoint>, centers: Vec<usize>) -> Result<Self, PriorError> {
        let t = Template { points, centers };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), PriorError> {
        if self.points.is_empty() {
            return Err(PriorError::EmptyTemplate);
        }
        let finite = self.points.iter().all(|p| {
            let s = p.sample;
            [s.p_x, s.p_y, s.p_z, s.p_theta, p.weight]
                .iter()
                .all(|v| v.is_finite())
                && p.weight >= 0.0
        });
        if !finite {
            return Err(PriorError::Invalid("template values must be finite".into()));
        }
        let total: f64 = self.points.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(PriorError::Invalid(format!(
                "template weights sum to {total}"
            )));
        }
        if let Some(c) = self.centers.iter().find(|&&c| c >= self.points.len()) {
            return Err(PriorError::Invalid(format!("center {c} is out of range")));
        }
        Ok(())
    }

    pub fn points(&self) -> &[TemplatePoint] {
        &self.points
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Draws one point with probability equal to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &TemplatePoint {
        let dist = WeightedIndex::new(self.points.iter().map(|p| p.weight))
            .expect("validated template weights");
        &self.points[dist.sample(rng)]
    }
}

#[derive(Serialize, Deserialize)]
struct TemplateRecord {
    points: Vec<[f64; 5]>,
    centers: Vec<usize>,
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TemplateRecord {
            points: self
                .points
                .iter()
                .map(|p| {
                    let q = p.sample;
                    [q.p_x, q.p_y, q.p_z, q.p_theta, p.weight]
                })
                .collect(),
            centers: self.centers.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = TemplateRecord::deserialize(d)?;
        let points = r
            .points
            .into_iter()
            .map(|[p_x, p_y, p_z, p_theta, weight]| TemplatePoint {
                sample: RelationSample {
                    p_x,
                    p_y,
                    p_z,
                    p_theta,
                },
                weight,
            })
            .collect();
        Template::new(points, r.centers).map_err(serde::de::Error::custom)
    }
}

pub fn extract_template(
    samples: &[RelationSample],
    params: &DpcParams,
) -> Result<Template, PriorError> {
    params.validate()?;
    let samples = thin(samples, params.max_points);
    let dpc = dpc_densities(&samples, params.eta)?;
    let (kept, centers) = select(&dpc, params)?;
    let total: f64 = kept.iter().map(|&i| dpc.rho[i] as f64).sum();
    let points = kept
        .iter()
        .map(|&i| TemplatePoint {
            sample: samples[i],
            weight: dpc.rho[i] as f64 / total,
        })
        .collect();
    let centers = centers
        .iter()
        .map(|c| kept.binary_search(c).expect("centers are retained"))
        .collect();
    Template::new(points, centers)
}

/// One support value of a multinomial and its probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Mode {
    pub value: f64,
    pub probability: f64,
}

impl From<[f64; 2]> for Mode {
    fn from([value, probability]: [f64; 2]) -> Self {
        Mode { value, probability }
    }
}

impl From<Mode> for [f64; 2] {
    fn from(m: Mode) -> Self {
        [m.value, m.probability]
    }
}

fn sample_modes<R: Rng + ?Sized>(modes: &[Mode], rng: &mut R) -> f64 {
    let dist =
        WeightedIndex::new(modes.iter().map(|m| m.probability)).expect("validated mode weights");
    modes[dist.sample(rng)].value
}

/// Multinomials over an object category's distance to, and heading
/// relative to, its nearest wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallPrior {
    pub dist_modes: Vec<Mode>,
    pub orient_modes: Vec<Mode>,
}

impl WallPrior {
    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_modes(&self.dist_modes, rng)
    }

    pub fn sample_orientation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_modes(&self.orient_modes, rng)
    }

    fn validate(&self) -> Result<(), PriorError> {
        for (name, modes) in [
            ("dist_modes", &self.dist_modes),
            ("orient_modes", &self.orient_modes),
        ] {
            if modes.is_empty() {
                return Err(PriorError::Invalid(format!("{name} is empty")));
            }
            if modes
                .iter()
                .any(|m| !m.value.is_finite() || m.probability.is_nan() || m.probability < 0.0)
            {
                return Err(PriorError::Invalid(format!("{name} has invalid entries")));
            }
            let total: f64 = modes.iter().map(|m| m.probability).sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(PriorError::Invalid(format!(
                    "{name} probabilities sum to {total}"
                )));
            }
        }
        Ok(())
    }
}

/// Peaks of a scalar sample set, each with probability proportional to its
/// density. Coincident peaks are merged.
fn scalar_modes<F: Fn(f64, f64) -> f64>(
    values: &[f64],
    params: &DpcParams,
    dist: F,
) -> Result<Vec<Mode>, PriorError> {
    let dpc = dpc(values.len(), params.eta, |a, b| dist(values[a], values[b]))?;
    let (_, centers) = select(&dpc, params)?;
    let total: f64 = centers.iter().map(|&c| dpc.rho[c] as f64).sum();
    let mut modes: Vec<Mode> = Vec::new();
    for c in centers {
        let (value, probability) = if total > 0.0 {
            (values[c], dpc.rho[c] as f64 / total)
        } else {
            (values[c], 1.0)
        };
        match modes.iter_mut().find(|e| e.value == value) {
            Some(e) => e.probability += probability,
            None => modes.push(Mode { value, probability }),
        }
    }
    modes.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(modes)
}

pub fn extract_wall_prior(
    samples: &[WallAttributeSample],
    params: &DpcParams,
) -> Result<WallPrior, PriorError> {
    params.validate()?;
    let samples = thin(samples, params.max_points);
    let d: Vec<f64> = samples.iter().map(|s| s.d_wall).collect();
    let t: Vec<f64> = samples.iter().map(|s| wrap_angle(s.theta_wall)).collect();
    Ok(WallPrior {
        dist_modes: scalar_modes(&d, params, |a, b| (a - b).abs())?,
        orient_modes: scalar_modes(&t, params, ang_diff)?,
    })
}

/// Union of the neighbour templates scoring at least `beta`, at most
/// `k_max` of them, each contributing weight in proportion to its score.
pub fn merge_templates(
    neighbors: &[(Template, f64)],
    beta: f64,
    k_max: usize,
) -> Result<Template, PriorError> {
    let mut chosen: Vec<&(Template, f64)> = neighbors.iter().filter(|(_, s)| *s >= beta).collect();
    chosen.sort_by(|a, b| b.1.total_cmp(&a.1));
    chosen.truncate(k_max);
    let total: f64 = chosen.iter().map(|(_, s)| s).sum();
    if chosen.is_empty() || total <= 0.0 {
        return Err(PriorError::NoPriorAvailable { beta });
    }
    let mut points = Vec::new();
    let mut centers = Vec::new();
    for (t, score) in chosen {
        let offset = points.len();
        centers.extend(t.centers.iter().map(|c| c + offset));
        points.extend(t.points.iter().map(|p| TemplatePoint {
            sample: p.sample,
            weight: p.weight * score / total,
        }));
    }
    Template::new(points, centers)
}

/// Everything synthesis needs: pair strengths, pair templates keyed by
/// ordered `(anchor, other)` and per-category wall priors.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorStore {
    pub epsilon: f64,
    pub ssg: SpatialStrengthGraph,
    pub templates: BTreeMap<PairKey, Template>,
    pub wall_priors: BTreeMap<String, WallPrior>,
}

#[derive(Serialize, Deserialize)]
struct PriorFile {
    version: u32,
    epsilon: f64,
    ssg: SpatialStrengthGraph,
    templates: BTreeMap<String, Template>,
    wall_priors: BTreeMap<String, WallPrior>,
}

fn pair_label(pair: &PairKey) -> String {
    format!("{}|{}", pair.0, pair.1)
}

impl PriorStore {
    pub fn template(&self, anchor: &str, other: &str) -> Option<&Template> {
        self.templates.get(&(anchor.to_owned(), other.to_owned()))
    }

    pub fn wall_prior(&self, category: &str) -> Option<&WallPrior> {
        self.wall_priors.get(category)
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        if !(self.epsilon.is_finite()) {
            return Err(PriorError::Invalid("epsilon must be finite".into()));
        }
        for ((a, b), s) in self.ssg.iter() {
            if !s.d_value.is_finite() || s.d_value < 0.0 {
                return Err(PriorError::Invalid(format!(
                    "d-value of {a}|{b} is invalid"
                )));
            }
        }
        for (pair, t) in &self.templates {
            t.validate()?;
            if self.ssg.strength(&pair.0, &pair.1).is_none() {
                return Err(PriorError::Invalid(format!(
                    "template {} has no strength entry",
                    pair_label(pair)
                )));
            }
        }
        for w in self.wall_priors.values() {
            w.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, PriorError> {
        let file = PriorFile {
            version: PRIORS_VERSION,
            epsilon: self.epsilon,
            ssg: self.ssg.clone(),
            templates: self
                .templates
                .iter()
                .map(|(k, v)| (pair_label(k), v.clone()))
                .collect(),
            wall_priors: self.wall_priors.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PriorError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != PRIORS_VERSION {
            return Err(PriorError::Version {
                found,
                expected: PRIORS_VERSION,
            });
        }
        let file: PriorFile = serde_json::from_value(value)?;
        let mut templates = BTreeMap::new();
        for (label, t) in file.templates {
            let (a, b) = label
                .split_once('|')
                .ok_or_else(|| PriorError::Invalid(format!("template key {label:?}")))?;
            templates.insert((a.to_owned(), b.to_owned()), t);
        }
        let store = PriorStore {
            epsilon: file.epsilon,
            ssg: file.ssg,
            templates,
            wall_priors: file.wall_priors,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PriorError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PriorError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnParams {
    pub csr: CsrParams,
    pub dpc: DpcParams,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            csr: CsrParams::default(),
            dpc: DpcParams::default(),
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

/// What the learning run left out, and why.
#[derive(Debug, Default)]
pub struct LearnReport {
    pub scenes_used: usize,
    pub scenes_skipped: usize,
    pub excluded_pairs: Vec<ExcludedPair>,
    pub failed_templates: Vec<(PairKey, String)>,
    pub failed_wall_priors: Vec<(String, String)>,
}

/// Full offline stage: relation graph, strength graph, templates for both
/// directions of every pair at or above `epsilon`, and wall priors.
pub fn learn(
    scenes: &[Scene],
    params: &LearnParams,
) -> Result<(PriorStore, LearnReport), PriorError> {
    params.dpc.validate()?;
    if let Some(bad) = scenes
        .iter()
        .flat_map(|s| &s.objects)
        .find(|o| o.category.contains('|'))
    {
        return Err(PriorError::InvalidParams {
            name: "category",
            reason: format!("{:?} contains '|'", bad.category),
        });
    }
    let graph = build_relation_graph(scenes)?;
    Ok(learn_from_graph(&graph, params))
}

pub fn learn_from_graph(graph: &RelationGraph, params: &LearnParams) -> (PriorStore, LearnReport) {
    let (ssg, excluded_pairs) = build_ssg(graph, &params.csr, params.seed);
    let mut ordered: Vec<PairKey> = Vec::new();
    for ((a, b), s) in ssg.iter() {
        if s.d_value >= params.epsilon {
            ordered.push((a.clone(), b.clone()));
            if a != b {
                ordered.push((b.clone(), a.clone()));
            }
        }
    }
    ordered.sort();
    let extracted: Vec<_> = ordered
        .into_par_iter()
        .map(|pair| {
            let t = extract_template(graph.samples(&pair.0, &pair.1), &params.dpc);
            (pair, t)
        })
        .collect();
    let walls: Vec<_> = graph
        .wall_samples
        .par_iter()
        .map(|(c, s)| (c.clone(), extract_wall_prior(s, &params.dpc)))
        .collect();

    let mut report = LearnReport {
        scenes_used: graph.scenes_used,
        scenes_skipped: graph.scenes_skipped,
        excluded_pairs,
        ..LearnReport::default()
    };
    let mut templates = BTreeMap::new();
    for (pair, t) in extracted {
        match t {
            Ok(t) => {
                templates.insert(pair, t);
            }
            Err(e) => report.failed_templates.push((pair, e.to_string())),
        }
    }
    let mut wall_priors = BTreeMap::new();
    for (c, w) in walls {
        match w {
            Ok(w) => {
                wall_priors.insert(c, w);
            }
            Err(e) => report.failed_wall_priors.push((c, e.to_string())),
        }
    }
    let store = PriorStore {
        epsilon: params.epsilon,
        ssg,
        templates,
        wall_priors,
    };
    (store, report)
}
