//! Scene data model and the relation multigraph built from a corpus.
//!
//! Every ordered pair of distinct objects in a room contributes one
//! [`RelationSample`] (the pose of the second object in the first one's
//! frame). Every object contributes one [`WallAttributeSample`] describing
//! where it sits relative to its nearest wall.

mod io;
pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    nearest_on_segment, point_in_polygon, wrap_angle, OrientedBox, Point2, Polygon,
};

pub use io::{parse_scenes, read_scenes, scenes_to_jsonl, write_scenes};

/// Ordered `(anchor category, other category)` key.
pub type PairKey = (String, String);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("object {index} ({category}) has its center outside the room")]
    OutsideRoom { index: usize, category: String },
    #[error("object {index} ({category}) has invalid {field}")]
    InvalidObject {
        index: usize,
        category: String,
        field: &'static str,
    },
    #[error("invalid pattern spec at `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("pattern spec is infeasible: {0}")]
    Infeasible(String),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Position and heading. `y` is height and never enters planar geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            z,
            theta: wrap_angle(theta),
        }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x, self.z)
    }

    /// Pose of the object described by `rel` in the frame of `self`.
    pub fn compose(&self, rel: &RelationSample) -> Pose {
        let offset = rel.translation().rotate(self.theta);
        Pose::new(
            self.x + offset.x,
            self.y + rel.p_y,
            self.z + offset.z,
            self.theta + rel.p_theta,
        )
    }

    /// Pose of `other` expressed in the frame of `self`.
    pub fn relative(&self, other: &Pose) -> RelationSample {
        let d = (other.center() - self.center()).rotate(-self.theta);
        RelationSample {
            p_x: d.x,
            p_y: other.y - self.y,
            p_z: d.z,
            p_theta: wrap_angle(other.theta - self.theta),
        }
    }
}

/// One posed piece of furniture. Field names follow the corpus file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    #[serde(rename = "cat")]
    pub category: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub hx: f64,
    pub hz: f64,
}

impl ObjectInstance {
    pub fn new(category: impl Into<String>, pose: Pose, half_extents: (f64, f64)) -> Self {
        Self {
            category: category.into(),
            x: pose.x,
            y: pose.y,
            z: pose.z,
            theta: wrap_angle(pose.theta),
            hx: half_extents.0,
            hz: half_extents.1,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            x: self.x,
            y: self.y,
            z: self.z,
            theta: self.theta,
        }
    }

    pub fn set_pose(&mut self, pose: Pose) {
        self.x = pose.x;
        self.y = pose.y;
        self.z = pose.z;
        self.theta = wrap_angle(pose.theta);
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x, self.z)
    }

    pub fn half_extents(&self) -> (f64, f64) {
        (self.hx, self.hz)
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.center(), (self.hx, self.hz), self.theta)
    }

    fn check(&self, index: usize) -> Result<(), CorpusError> {
        let bad = |field| CorpusError::InvalidObject {
            index,
            category: self.category.clone(),
            field,
        };
        if ![self.x, self.y, self.z].iter().all(|v| v.is_finite()) {
            return Err(bad("position"));
        }
        if !self.theta.is_finite() {
            return Err(bad("theta"));
        }
        if !(self.hx > 0.0 && self.hz > 0.0 && self.hx.is_finite() && self.hz.is_finite()) {
            return Err(bad("half extents"));
        }
        if self.category.is_empty() {
            return Err(bad("category"));
        }
        Ok(())
    }
}

/// A room and its contents: the corpus unit and the synthesis output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: Polygon,
    pub objects: Vec<ObjectInstance>,
    /// Doors, windows and other immovable items.
    #[serde(default)]
    pub fixtures: Vec<ObjectInstance>,
}

impl Scene {
    pub fn new(room: Polygon) -> Self {
        Self {
            room,
            objects: Vec::new(),
            fixtures: Vec::new(),
        }
    }

    /// Checks object records and that every movable object's center lies in
    /// the room. Fixtures may straddle walls.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (i, o) in self.objects.iter().enumerate() {
            o.check(i)?;
            if !point_in_polygon(o.center(), &self.room) {
                return Err(CorpusError::OutsideRoom {
                    index: i,
                    category: o.category.clone(),
                });
            }
        }
        for (i, o) in self.fixtures.iter().enumerate() {
            o.check(i)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSample {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub p_theta: f64,
}

impl RelationSample {
    pub fn new(p_x: f64, p_y: f64, p_z: f64, p_theta: f64) -> Self {
        Self {
            p_x,
            p_y,
            p_z,
            p_theta: wrap_angle(p_theta),
        }
    }

    /// Planar offset `(p_x, p_z)`.
    pub fn translation(&self) -> Point2 {
        Point2::new(self.p_x, self.p_z)
    }

    pub fn distance3(&self, other: &RelationSample) -> f64 {
        let dx = self.p_x - other.p_x;
        let dy = self.p_y - other.p_y;
        let dz = self.p_z - other.p_z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Where an object sits relative to its nearest wall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallAttributeSample {
    /// Center-to-segment distance.
    pub d_wall: f64,
    /// Heading relative to the wall's inward normal, in `[0, 2π)`.
    pub theta_wall: f64,
    /// Normalized position of the center's projection along the wall.
    pub t_wall: f64,
}

pub fn relative_pose(anchor: &ObjectInstance, other: &ObjectInstance) -> RelationSample {
    anchor.pose().relative(&other.pose())
}

/// Nearest wall segment of `room` to `center`, ties going to the lowest
/// edge index. Returns `(edge index, distance)`.
pub fn nearest_wall(center: Point2, room: &Polygon) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (r, (a, b)) in room.edges().enumerate() {
        let d = nearest_on_segment(center, a, b).distance(center);
        if d < best.1 - 1e-12 {
            best = (r, d);
        }
    }
    best
}

pub fn wall_attributes(
    obj: &ObjectInstance,
    room: &Polygon,
) -> Result<WallAttributeSample, CorpusError> {
    let c = obj.center();
    if !point_in_polygon(c, room) {
        return Err(CorpusError::OutsideRoom {
            index: 0,
            category: obj.category.clone(),
        });
    }
    let (r, d_wall) = nearest_wall(c, room);
    let (a, b) = room.edge(r);
    let n = room.inward_normal(r);
    let e = b - a;
    let t_wall = ((c - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
    Ok(WallAttributeSample {
        d_wall,
        theta_wall: wrap_angle(obj.theta - n.z.atan2(n.x)),
        t_wall,
    })
}

/// Relation multigraph aggregated per category.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationGraph {
    pub wall_samples: BTreeMap<String, Vec<WallAttributeSample>>,
    /// `(i, j)` holds poses of `j` expressed in `i`'s frame.
    pub pair_samples: BTreeMap<PairKey, Vec<RelationSample>>,
    /// Rooms containing both categories, keyed by the sorted pair. A
    /// same-category key counts rooms with at least two instances.
    pub cooccurrence: BTreeMap<PairKey, usize>,
    pub scenes_used: usize,
    pub scenes_skipped: usize,
}

impl RelationGraph {
    pub fn categories(&self) -> impl Iterator<Item = &String> {
        self.wall_samples.keys()
    }

    pub fn samples(&self, anchor: &str, other: &str) -> &[RelationSample] {
        self.pair_samples
            .get(&(anchor.to_owned(), other.to_owned()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn cooccurrence(&self, a: &str, b: &str) -> usize {
        let key = sorted_pair(a, b);
        self.cooccurrence.get(&key).copied().unwrap_or(0)
    }

    pub fn total_pair_samples(&self) -> usize {
        self.pair_samples.values().map(Vec::len).sum()
    }
}

pub fn sorted_pair(a: &str, b: &str) -> PairKey {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Scans every scene in order. Scenes failing validation are skipped and
/// counted in `scenes_skipped`.
pub fn build_relation_graph(corpus: &[Scene]) -> Result<RelationGraph, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut graph = RelationGraph::default();
    for (s, scene) in corpus.iter().enumerate() {
        let walls: Result<Vec<_>, _> = scene.validate().and_then(|()| {
            scene
                .objects
                .iter()
                .map(|o| wall_attributes(o, &scene.room))
                .collect()
        });
        let walls = match walls {
            Ok(w) => w,
            Err(e) => {
                log::warn!("skipping scene {s}: {e}");
                graph.scenes_skipped += 1;
                continue;
            }
        };
        graph.scenes_used += 1;
        for (o, w) in scene.objects.iter().zip(walls) {
            graph
                .wall_samples
                .entry(o.category.clone())
                .or_default()
                .push(w);
        }
        for (i, a) in scene.objects.iter().enumerate() {
            for (j, b) in scene.objects.iter().enumerate() {
                if i != j {
                    graph
                        .pair_samples
                        .entry((a.category.clone(), b.category.clone()))
                        .or_default()
                        .push(relative_pose(a, b));
                }
            }
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for o in &scene.objects {
            *counts.entry(o.category.as_str()).or_default() += 1;
        }
        let cats: BTreeSet<&str> = counts.keys().copied().collect();
        for &a in &cats {
            for &b in cats.range(a..) {
                if a != b || counts[a] >= 2 {
                    *graph.cooccurrence.entry(sorted_pair(a, b)).or_default() += 1;
                }
            }
        }
    }
    Ok(graph)
}
