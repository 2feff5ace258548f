//! Tests for complete spatial randomness by means of angles.
//!
//! Each category pair's relation samples are thinned, reduced to a set of
//! angles that are Uniform[0, 2π) when the pair is spatially unrelated, and
//! scored with the √m-scaled one-sample Kolmogorov–Smirnov statistic (the
//! "d-value"). Large d-values reject randomness and mark the pair as
//! spatially coherent.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{sorted_pair, PairKey, RelationGraph, RelationSample};
use crate::geometry::{wrap_angle, Point2};

/// 1% critical value of the asymptotic Kolmogorov distribution.
pub const DEFAULT_EPSILON: f64 = 1.628;
pub const DEFAULT_RATIO: f64 = 0.10;
pub const DEFAULT_MIN_SAMPLES: usize = 30;
pub const DEFAULT_MAX_SAMPLES: usize = 100;
const DUPLICATE_NUDGE: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CsrError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no angles to test")]
    Empty,
    #[error("subsampling ratio {0} is outside (0, 1]")]
    BadRatio(f64),
}

/// Which angle each relation sample contributes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleStatistic {
    /// Direction of the sample's planar offset as seen from the anchor.
    Bearing,
    /// Twice the bearing, so that directions `φ` and `φ + π` coincide.
    #[default]
    AxialBearing,
    /// Angle between the directions to the sample's two nearest neighbours.
    NearestNeighbor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrParams {
    pub ratio: f64,
    pub min_samples: usize,
    /// Upper bound on the thinned sample size, so that pairs with many
    /// instances per room are not flagged for negligible departures.
    pub max_samples: usize,
    pub statistic: AngleStatistic,
}

impl Default for CsrParams {
    fn default() -> Self {
        Self {
            ratio: DEFAULT_RATIO,
            min_samples: DEFAULT_MIN_SAMPLES,
            max_samples: DEFAULT_MAX_SAMPLES,
            statistic: AngleStatistic::AxialBearing,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrResult {
    pub d_value: f64,
    pub m: usize,
    pub angles_used: Vec<f64>,
}

/// For every point, the counter-clockwise angle in `[0, 2π)` from the
/// direction of its nearest neighbour to the direction of its second
/// nearest. Exact duplicates are nudged apart by 1e-9 first.
pub fn nn_angles(points: &[Point2]) -> Result<Vec<f64>, CsrError> {
    if points.len() < 3 {
        return Err(CsrError::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    let pts = separate_duplicates(points);
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .x
            .total_cmp(&pts[b].x)
            .then(pts[a].z.total_cmp(&pts[b].z))
    });
    let mut rank = vec![0; pts.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut angles = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        // (dist², index) of the two nearest so far
        let mut best = [(f64::INFINITY, usize::MAX); 2];
        let offer = |best: &mut [(f64, usize); 2], j: usize| {
            let d = (pts[j] - p).norm_sq();
            // ties go to the lower index
            if (d, j) < best[0] {
                best[1] = best[0];
                best[0] = (d, j);
            } else if (d, j) < best[1] {
                best[1] = (d, j);
            }
        };
        let r = rank[i];
        let (mut lo, mut hi) = (r, r + 1);
        loop {
            let reach = best[1].0;
            let left = (lo > 0)
                .then(|| order[lo - 1])
                .filter(|&j| (pts[j].x - p.x).powi(2) <= reach);
            let right = (hi < pts.len())
                .then(|| order[hi])
                .filter(|&j| (pts[j].x - p.x).powi(2) <= reach);
            if left.is_none() && right.is_none() {
                break;
            }
            if let Some(j) = left {
                offer(&mut best, j);
                lo -= 1;
            }
            if let Some(j) = right {
                offer(&mut best, j);
                hi += 1;
            }
        }
        let v1 = pts[best[0].1] - p;
        let v2 = pts[best[1].1] - p;
        angles.push(wrap_angle(v2.z.atan2(v2.x) - v1.z.atan2(v1.x)));
    }
    Ok(angles)
}

fn separate_duplicates(points: &[Point2]) -> Vec<Point2> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut seen: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    points
        .iter()
        .map(|p| {
            let key = (p.x.to_bits(), p.z.to_bits());
            let k = seen.entry(key).or_insert(0);
            let out = if *k == 0 {
                *p
            } else {
                let a = golden * *k as f64;
                *p + Point2::new(a.cos(), a.sin()) * DUPLICATE_NUDGE
            };
            *k += 1;
            out
        })
        .collect()
}

/// Direction of each sample's planar offset from the anchor, in `[0, 2π)`.
pub fn bearing_angles(samples: &[RelationSample]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| wrap_angle(s.p_z.atan2(s.p_x)))
        .collect()
}

/// Doubled bearings, in `[0, 2π)`.
pub fn axial_bearing_angles(samples: &[RelationSample]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| wrap_angle(2.0 * s.p_z.atan2(s.p_x)))
        .collect()
}

/// `√m · sup |F_e(θ) − θ/2π|`, with the supremum taken on both sides of
/// every jump of the empirical CDF.
pub fn ks_uniform_d(angles: &[f64]) -> Result<f64, CsrError> {
    if angles.is_empty() {
        return Err(CsrError::Empty);
    }
    let mut u: Vec<f64> = angles.iter().map(|a| a / TAU).collect();
    u.sort_by(f64::total_cmp);
    let m = u.len() as f64;
    let sup = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / m - x;
            let below = x - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(m.sqrt() * sup)
}

/// Survival function of the asymptotic Kolmogorov distribution,
/// `P(K > d)`.
pub fn kolmogorov_survival(d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * d * d).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Thins `samples` to `⌈ratio·n⌉` without replacement and scores them.
pub fn pair_d_value(
    samples: &[RelationSample],
    params: &CsrParams,
    seed: u64,
) -> Result<CsrResult, CsrError> {
    if !(params.ratio > 0.0 && params.ratio <= 1.0) {
        return Err(CsrError::BadRatio(params.ratio));
    }
    let n = samples.len();
    let m = ((params.ratio * n as f64).ceil() as usize)
        .min(params.max_samples)
        .min(n);
    let needed = params.min_samples.max(match params.statistic {
        AngleStatistic::Bearing | AngleStatistic::AxialBearing => 1,
        AngleStatistic::NearestNeighbor => 3,
    });
    if m < needed {
        return Err(CsrError::InsufficientData { needed, got: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    let chosen: Vec<RelationSample> = picked.iter().map(|&i| samples[i]).collect();
    let angles = match params.statistic {
        AngleStatistic::Bearing => bearing_angles(&chosen),
        AngleStatistic::AxialBearing => axial_bearing_angles(&chosen),
        AngleStatistic::NearestNeighbor => {
            let pts: Vec<Point2> = chosen.iter().map(RelationSample::translation).collect();
            nn_angles(&pts)?
        }
    };
    Ok(CsrResult {
        d_value: ks_uniform_d(&angles)?,
        m,
        angles_used: angles,
    })
}

/// Measured strength of one unordered category pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStrength {
    pub d_value: f64,
    pub n_samples: usize,
    pub m_used: usize,
    /// Rooms containing both categories; reported, never used for grouping.
    pub cooccurrence: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SsgRecord {
    a: String,
    b: String,
    #[serde(flatten)]
    strength: PairStrength,
}

/// Unordered category pair → d-value. A missing pair was not measured; it
/// does not mean zero strength.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<SsgRecord>", into = "Vec<SsgRecord>")]
pub struct SpatialStrengthGraph {
    weights: BTreeMap<PairKey, PairStrength>,
}

impl From<Vec<SsgRecord>> for SpatialStrengthGraph {
    fn from(records: Vec<SsgRecord>) -> Self {
        let mut g = SpatialStrengthGraph::default();
        for r in records {
            g.insert(&r.a, &r.b, r.strength);
        }
        g
    }
}

impl From<SpatialStrengthGraph> for Vec<SsgRecord> {
    fn from(g: SpatialStrengthGraph) -> Self {
        g.weights
            .into_iter()
            .map(|((a, b), strength)| SsgRecord { a, b, strength })
            .collect()
    }
}

impl SpatialStrengthGraph {
    pub fn insert(&mut self, a: &str, b: &str, strength: PairStrength) {
        self.weights.insert(sorted_pair(a, b), strength);
    }

    pub fn strength(&self, a: &str, b: &str) -> Option<&PairStrength> {
        self.weights.get(&sorted_pair(a, b))
    }

    pub fn d_value(&self, a: &str, b: &str) -> Option<f64> {
        self.strength(a, b).map(|s| s.d_value)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &PairStrength)> {
        self.weights.iter()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcludedPair {
    pub pair: PairKey,
    pub n_samples: usize,
    pub reason: CsrError,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Per-pair seed, stable under adding or removing other categories.
pub fn pair_seed(seed: u64, pair: &PairKey) -> u64 {
    let mut key = Vec::with_capacity(pair.0.len() + pair.1.len() + 1);
    key.extend_from_slice(pair.0.as_bytes());
    key.push(0x1f);
    key.extend_from_slice(pair.1.as_bytes());
    seed ^ fnv1a(&key)
}

/// Scores every unordered pair `{a, b}` (with `a ≤ b`) from the `a → b`
/// samples. Pairs without enough samples are returned separately.
pub fn build_ssg(
    graph: &RelationGraph,
    params: &CsrParams,
    seed: u64,
) -> (SpatialStrengthGraph, Vec<ExcludedPair>) {
    let cats: Vec<&String> = graph.categories().collect();
    let pairs: Vec<PairKey> = cats
        .iter()
        .enumerate()
        .flat_map(|(i, a)| cats[i..].iter().map(move |b| ((*a).clone(), (*b).clone())))
        .collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|pair| {
            let samples = graph.samples(&pair.0, &pair.1);
            (
                pair,
                samples.len(),
                pair_d_value(samples, params, pair_seed(seed, pair)),
            )
        })
        .collect();

    let mut ssg = SpatialStrengthGraph::default();
    let mut excluded = Vec::new();
    for (pair, n, result) in results {
        match result {
            Ok(r) => ssg.insert(
                &pair.0,
                &pair.1,
                PairStrength {
                    d_value: r.d_value,
                    n_samples: n,
                    m_used: r.m,
                    cooccurrence: graph.cooccurrence(&pair.0, &pair.1),
                },
            ),
            Err(reason) if n > 0 => excluded.push(ExcludedPair {
                pair: pair.clone(),
                n_samples: n,
                reason,
            }),
            Err(_) => {}
        }
    }
    (ssg, excluded)
}
