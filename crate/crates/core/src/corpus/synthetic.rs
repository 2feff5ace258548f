//! Seeded synthetic corpora with recorded ground truth.
//!
//! A [`PatternSpec`] lists categories in placement order. Each category is
//! placed freely, against a wall, or relative to an earlier category through
//! a set of discrete offset modes. The generator records, for every object,
//! which rule placed it so tests can score denoising and clustering against
//! the truth.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CorpusError, ObjectInstance, Pose, RelationSample, Scene};
use crate::geometry::{point_in_polygon, OrientedBox, Point2, Polygon};

const PLACEMENT_ATTEMPTS: usize = 50;
const SCENE_ATTEMPTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub room: Polygon,
    pub categories: Vec<CategorySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub name: String,
    pub hx: f64,
    pub hz: f64,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub y: f64,
    pub placement: Placement,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Uniform position and heading anywhere the footprint fits.
    Free,
    Wall(WallRule),
    Relative(RelationRule),
}

/// Against a uniformly chosen wall at a uniform along-wall position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallRule {
    /// Candidate center-to-wall distances.
    pub distance: Vec<f64>,
    /// Candidate headings relative to the wall's inward normal.
    pub orientation: Vec<f64>,
    #[serde(default)]
    pub sigma: f64,
    /// Probability of ignoring the rule and placing freely.
    #[serde(default)]
    pub noise: f64,
}

/// Offset from the first instance of `anchor`, in the anchor's frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationRule {
    pub anchor: String,
    /// `(p_x, p_z, p_theta)` modes. Instances of one category take distinct
    /// modes while any remain.
    pub modes: Vec<[f64; 3]>,
    /// Gaussian jitter, meters on translation and radians on heading.
    #[serde(default)]
    pub sigma: f64,
    /// Probability of a distractor drawn uniformly in a disc of
    /// `noise_radius` around the anchor instead of a mode.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_noise_radius")]
    pub noise_radius: f64,
}

fn default_noise_radius() -> f64 {
    3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementKind {
    Free,
    Wall {
        wall: usize,
        distance_mode: usize,
        orientation_mode: usize,
    },
    WallNoise,
    Mode {
        anchor: usize,
        mode: usize,
    },
    Noise {
        anchor: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub n_scenes: usize,
    pub spec: PatternSpec,
    /// Per scene, per object.
    pub placements: Vec<Vec<PlacementKind>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub scenes: Vec<Scene>,
    pub ground_truth: GroundTruth,
}

impl PatternSpec {
    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let spec: PatternSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn category(&self, name: &str) -> Option<&CategorySpec> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |field: String, reason: &str| CorpusError::InvalidSpec {
            field,
            reason: reason.to_owned(),
        };
        if self.categories.is_empty() {
            return Err(invalid("categories".into(), "must not be empty"));
        }
        let (lo, hi) = self.room.bounds();
        let diameter = lo.distance(hi);
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, c) in self.categories.iter().enumerate() {
            let field = |f: &str| format!("categories[{i}].{f}");
            if c.name.is_empty() {
                return Err(invalid(field("name"), "must not be empty"));
            }
            if seen.insert(&c.name, i).is_some() {
                return Err(invalid(field("name"), "duplicate category"));
            }
            if !(c.hx > 0.0 && c.hx.is_finite()) {
                return Err(invalid(field("hx"), "must be positive"));
            }
            if !(c.hz > 0.0 && c.hz.is_finite()) {
                return Err(invalid(field("hz"), "must be positive"));
            }
            if c.count == 0 {
                return Err(invalid(field("count"), "must be at least 1"));
            }
            if !c.y.is_finite() {
                return Err(invalid(field("y"), "must be finite"));
            }
            match &c.placement {
                Placement::Free => {}
                Placement::Wall(w) => {
                    if w.distance.is_empty()
                        || w.distance.iter().any(|d| !(*d >= 0.0 && d.is_finite()))
                    {
                        return Err(invalid(
                            field("placement.wall.distance"),
                            "needs at least one finite non-negative value",
                        ));
                    }
                    if w.orientation.is_empty() || w.orientation.iter().any(|t| !t.is_finite()) {
                        return Err(invalid(
                            field("placement.wall.orientation"),
                            "needs at least one finite value",
                        ));
                    }
                    check_sigma_noise(&w.sigma, &w.noise, &field("placement.wall"))?;
                }
                Placement::Relative(r) => {
                    match seen.get(r.anchor.as_str()) {
                        Some(&j) if j < i => {}
                        Some(_) => {
                            return Err(invalid(
                                field("placement.relative.anchor"),
                                "anchor cannot be the category itself",
                            ))
                        }
                        None => {
                            return Err(invalid(
                                field("placement.relative.anchor"),
                                "unknown category or listed after its dependent",
                            ))
                        }
                    }
                    if r.modes.is_empty() || r.modes.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(invalid(
                            field("placement.relative.modes"),
                            "needs at least one finite mode",
                        ));
                    }
                    if let Some(k) = r
                        .modes
                        .iter()
                        .position(|m| Point2::new(m[0], m[1]).norm() > diameter)
                    {
                        return Err(CorpusError::Infeasible(format!(
                            "mode {k} of `{}` is farther from its anchor than the room is wide",
                            c.name
                        )));
                    }
                    if !(r.noise_radius > 0.0 && r.noise_radius.is_finite()) {
                        return Err(invalid(
                            field("placement.relative.noise_radius"),
                            "must be positive",
                        ));
                    }
                    check_sigma_noise(&r.sigma, &r.noise, &field("placement.relative"))?;
                }
            }
        }
        Ok(())
    }
}

fn check_sigma_noise(sigma: &f64, noise: &f64, prefix: &str) -> Result<(), CorpusError> {
    if !(*sigma >= 0.0 && sigma.is_finite()) {
        return Err(CorpusError::InvalidSpec {
            field: format!("{prefix}.sigma"),
            reason: "must be finite and non-negative".into(),
        });
    }
    if !(0.0..=1.0).contains(noise) {
        return Err(CorpusError::InvalidSpec {
            field: format!("{prefix}.noise"),
            reason: "must lie in [0, 1]".into(),
        });
    }
    Ok(())
}

/// Deterministic for a fixed `(spec, n_scenes, seed)`.
pub fn generate_synthetic_corpus(
    spec: &PatternSpec,
    n_scenes: usize,
    seed: u64,
) -> Result<SyntheticCorpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenes = Vec::with_capacity(n_scenes);
    let mut placements = Vec::with_capacity(n_scenes);
    for s in 0..n_scenes {
        let mut generated = None;
        for _ in 0..SCENE_ATTEMPTS {
            if let Some(g) = generate_scene(spec, &mut rng) {
                generated = Some(g);
                break;
            }
        }
        let (scene, kinds) = generated.ok_or_else(|| {
            CorpusError::Infeasible(format!(
                "could not place every category inside the room (scene {s})"
            ))
        })?;
        scenes.push(scene);
        placements.push(kinds);
    }
    Ok(SyntheticCorpus {
        scenes,
        ground_truth: GroundTruth {
            seed,
            n_scenes,
            spec: spec.clone(),
            placements,
        },
    })
}

fn generate_scene(spec: &PatternSpec, rng: &mut ChaCha8Rng) -> Option<(Scene, Vec<PlacementKind>)> {
    let room = &spec.room;
    let mut scene = Scene::new(room.clone());
    let mut kinds = Vec::new();
    let mut first_of: HashMap<&str, usize> = HashMap::new();
    for cat in &spec.categories {
        let he = (cat.hx, cat.hz);
        let mut mode_order: Vec<usize> = match &cat.placement {
            Placement::Relative(r) => (0..r.modes.len()).collect(),
            _ => Vec::new(),
        };
        mode_order.shuffle(rng);
        for k in 0..cat.count {
            let (pose, kind) = match &cat.placement {
                Placement::Free => (place_free(room, he, cat.y, rng)?, PlacementKind::Free),
                Placement::Wall(w) => {
                    if rng.random::<f64>() < w.noise {
                        (place_free(room, he, cat.y, rng)?, PlacementKind::WallNoise)
                    } else {
                        place_on_wall(room, he, cat.y, w, rng)?
                    }
                }
                Placement::Relative(r) => {
                    let anchor = first_of[r.anchor.as_str()];
                    let anchor_pose = scene.objects[anchor].pose();
                    if rng.random::<f64>() < r.noise {
                        let p = place_in_disc(room, &anchor_pose, r.noise_radius, cat.y, rng)?;
                        (p, PlacementKind::Noise { anchor })
                    } else {
                        let mode = if k < mode_order.len() {
                            mode_order[k]
                        } else {
                            rng.random_range(0..r.modes.len())
                        };
                        let p =
                            place_at_mode(room, &anchor_pose, r.modes[mode], r.sigma, cat.y, rng)?;
                        (p, PlacementKind::Mode { anchor, mode })
                    }
                }
            };
            first_of
                .entry(cat.name.as_str())
                .or_insert(scene.objects.len());
            scene
                .objects
                .push(ObjectInstance::new(cat.name.clone(), pose, he));
            kinds.push(kind);
        }
    }
    Some((scene, kinds))
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let n: f64 = rng.sample(StandardNormal);
    n * sigma
}

fn box_inside(room: &Polygon, pose: &Pose, he: (f64, f64)) -> bool {
    OrientedBox::new(pose.center(), he, pose.theta)
        .corners()
        .iter()
        .all(|c| point_in_polygon(*c, room))
}

fn place_free(room: &Polygon, he: (f64, f64), y: f64, rng: &mut ChaCha8Rng) -> Option<Pose> {
    let (lo, hi) = room.bounds();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let pose = Pose::new(
            rng.random_range(lo.x..=hi.x),
            y,
            rng.random_range(lo.z..=hi.z),
            rng.random_range(0.0..TAU),
        );
        if box_inside(room, &pose, he) {
            return Some(pose);
        }
    }
    None
}

fn place_on_wall(
    room: &Polygon,
    he: (f64, f64),
    y: f64,
    rule: &WallRule,
    rng: &mut ChaCha8Rng,
) -> Option<(Pose, PlacementKind)> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let wall = rng.random_range(0..room.len());
        let distance_mode = rng.random_range(0..rule.distance.len());
        let orientation_mode = rng.random_range(0..rule.orientation.len());
        let t: f64 = rng.random();
        let (a, b) = room.edge(wall);
        let n = room.inward_normal(wall);
        let d = (rule.distance[distance_mode] + gauss(rng, rule.sigma)).max(0.0);
        let heading = n.z.atan2(n.x) + rule.orientation[orientation_mode] + gauss(rng, rule.sigma);
        let c = a + (b - a) * t + n * d;
        let pose = Pose::new(c.x, y, c.z, heading);
        if box_inside(room, &pose, he) {
            let kind = PlacementKind::Wall {
                wall,
                distance_mode,
                orientation_mode,
            };
            return Some((pose, kind));
        }
    }
    None
}

fn place_at_mode(
    room: &Polygon,
    anchor: &Pose,
    mode: [f64; 3],
    sigma: f64,
    y: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Pose> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let rel = RelationSample::new(
            mode[0] + gauss(rng, sigma),
            y - anchor.y,
            mode[1] + gauss(rng, sigma),
            mode[2] + gauss(rng, sigma),
        );
        let pose = anchor.compose(&rel);
        if point_in_polygon(pose.center(), room) {
            return Some(pose);
        }
    }
    None
}

fn place_in_disc(
    room: &Polygon,
    anchor: &Pose,
    radius: f64,
    y: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Pose> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let r = radius * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..TAU);
        let rel = RelationSample::new(
            r * phi.cos(),
            y - anchor.y,
            r * phi.sin(),
            rng.random_range(0.0..TAU),
        );
        let pose = anchor.compose(&rel);
        if point_in_polygon(pose.center(), room) {
            return Some(pose);
        }
    }
    None
}

/// Ready-made pattern specs used by tests, benchmarks and the CLI.
pub mod presets {
    use std::f64::consts::PI;

    use super::*;

    fn cat(name: &str, hx: f64, hz: f64, count: usize, placement: Placement) -> CategorySpec {
        CategorySpec {
            name: name.into(),
            hx,
            hz,
            count,
            y: 0.0,
            placement,
        }
    }

    fn wall(distance: f64, sigma: f64) -> Placement {
        Placement::Wall(WallRule {
            distance: vec![distance],
            orientation: vec![0.0],
            sigma,
            noise: 0.0,
        })
    }

    fn relative(anchor: &str, modes: Vec<[f64; 3]>, sigma: f64, noise: f64) -> Placement {
        Placement::Relative(RelationRule {
            anchor: anchor.into(),
            modes,
            sigma,
            noise,
            noise_radius: default_noise_radius(),
        })
    }

    /// A freely placed bed with one nightstand at `(±1.2, 0)` in the bed's
    /// frame, plus an independent plant/lamp pair (lamp uniform in a disc
    /// around the plant).
    pub fn two_mode_pair(sigma: f64, noise: f64) -> PatternSpec {
        PatternSpec {
            room: Polygon::rectangle(0.0, 0.0, 14.0, 14.0).unwrap(),
            categories: vec![
                cat("bed", 1.0, 0.8, 1, Placement::Free),
                cat(
                    "nightstand",
                    0.2,
                    0.2,
                    1,
                    relative("bed", vec![[1.2, 0.0, 0.0], [-1.2, 0.0, 0.0]], sigma, noise),
                ),
                cat("plant", 0.2, 0.2, 1, Placement::Free),
                cat(
                    "lamp",
                    0.15,
                    0.15,
                    1,
                    relative("plant", vec![[0.0, 0.0, 0.0]], 0.0, 1.0),
                ),
            ],
        }
    }

    /// Bed against a wall with two nightstands at its head, a wardrobe, and
    /// a desk with its chair.
    pub fn bedroom() -> PatternSpec {
        PatternSpec {
            room: Polygon::rectangle(0.0, 0.0, 5.0, 4.5).unwrap(),
            categories: vec![
                cat("bed", 1.05, 0.8, 1, wall(1.05, 0.01)),
                cat(
                    "nightstand",
                    0.22,
                    0.22,
                    2,
                    relative("bed", vec![[-0.8, 1.1, 0.0], [-0.8, -1.1, 0.0]], 0.02, 0.0),
                ),
                cat("wardrobe", 0.3, 0.6, 1, wall(0.3, 0.01)),
                cat("desk", 0.3, 0.6, 1, wall(0.3, 0.01)),
                cat(
                    "chair",
                    0.25,
                    0.25,
                    1,
                    relative("desk", vec![[0.7, 0.0, PI]], 0.03, 0.05),
                ),
            ],
        }
    }

    /// 25 objects: a seating area, media wall, dining set and assorted
    /// storage and decoration.
    pub fn living_room() -> PatternSpec {
        PatternSpec {
            room: Polygon::rectangle(0.0, 0.0, 8.0, 7.0).unwrap(),
            categories: vec![
                cat("sofa", 0.45, 1.1, 1, wall(0.45, 0.01)),
                cat(
                    "coffee_table",
                    0.3,
                    0.6,
                    1,
                    relative("sofa", vec![[1.3, 0.0, 0.0]], 0.03, 0.0),
                ),
                cat(
                    "armchair",
                    0.4,
                    0.4,
                    2,
                    relative(
                        "coffee_table",
                        vec![[0.0, 1.3, 1.5 * PI], [0.0, -1.3, 0.5 * PI]],
                        0.03,
                        0.0,
                    ),
                ),
                cat(
                    "side_table",
                    0.22,
                    0.22,
                    2,
                    relative("sofa", vec![[0.0, 1.4, 0.0], [0.0, -1.4, 0.0]], 0.02, 0.0),
                ),
                cat(
                    "floor_lamp",
                    0.2,
                    0.2,
                    1,
                    relative("sofa", vec![[-0.1, 1.85, 0.0]], 0.03, 0.1),
                ),
                cat("tv_stand", 0.25, 0.9, 1, wall(0.25, 0.01)),
                cat(
                    "speaker",
                    0.15,
                    0.15,
                    2,
                    relative(
                        "tv_stand",
                        vec![[0.0, 1.15, 0.0], [0.0, -1.15, 0.0]],
                        0.02,
                        0.0,
                    ),
                ),
                cat("bookshelf", 0.18, 0.5, 2, wall(0.18, 0.01)),
                cat("cabinet", 0.22, 0.5, 2, wall(0.22, 0.01)),
                cat("dining_table", 0.8, 0.45, 1, Placement::Free),
                cat(
                    "dining_chair",
                    0.22,
                    0.22,
                    4,
                    relative(
                        "dining_table",
                        vec![
                            [0.35, 0.75, 1.5 * PI],
                            [-0.35, 0.75, 1.5 * PI],
                            [0.35, -0.75, 0.5 * PI],
                            [-0.35, -0.75, 0.5 * PI],
                        ],
                        0.02,
                        0.0,
                    ),
                ),
                cat("plant", 0.2, 0.2, 4, Placement::Free),
                cat("stool", 0.17, 0.17, 2, Placement::Free),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_relation_graph, relative_pose};

    #[test]
    fn zero_scenes_is_empty() {
        let c = generate_synthetic_corpus(&presets::bedroom(), 0, 1).unwrap();
        assert!(c.scenes.is_empty());
        assert!(c.ground_truth.placements.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = presets::bedroom();
        let a = generate_synthetic_corpus(&spec, 20, 7).unwrap();
        let b = generate_synthetic_corpus(&spec, 20, 7).unwrap();
        let c = generate_synthetic_corpus(&spec, 20, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.scenes, c.scenes);
    }

    #[test]
    fn scenes_respect_room() {
        for spec in [
            presets::bedroom(),
            presets::living_room(),
            presets::two_mode_pair(0.05, 0.2),
        ] {
            let c = generate_synthetic_corpus(&spec, 30, 3).unwrap();
            for s in &c.scenes {
                s.validate().unwrap();
            }
        }
        let lr = generate_synthetic_corpus(&presets::living_room(), 1, 0).unwrap();
        assert_eq!(lr.scenes[0].objects.len(), 25);
    }

    #[test]
    fn relative_modes_follow_ground_truth() {
        let spec = presets::two_mode_pair(0.05, 0.0);
        let c = generate_synthetic_corpus(&spec, 200, 11).unwrap();
        for (s, kinds) in c.scenes.iter().zip(&c.ground_truth.placements) {
            let PlacementKind::Mode { anchor, mode } = kinds[1] else {
                panic!("expected a mode placement");
            };
            let r = relative_pose(&s.objects[anchor], &s.objects[1]);
            let m = [[1.2, 0.0], [-1.2, 0.0]][mode];
            assert!(Point2::new(r.p_x - m[0], r.p_z - m[1]).norm() < 0.05 * 6.0);
        }
    }

    /// Plain Lloyd iterations from the two extreme samples.
    fn two_means(points: &[Point2]) -> [Point2; 2] {
        let mut c = [
            *points.iter().min_by(|a, b| a.x.total_cmp(&b.x)).unwrap(),
            *points.iter().max_by(|a, b| a.x.total_cmp(&b.x)).unwrap(),
        ];
        for _ in 0..20 {
            let mut sum = [Point2::ZERO; 2];
            let mut n = [0usize; 2];
            for p in points {
                let k = usize::from(p.distance(c[1]) < p.distance(c[0]));
                sum[k] = sum[k] + *p;
                n[k] += 1;
            }
            for k in 0..2 {
                c[k] = sum[k] * (1.0 / n[k] as f64);
            }
        }
        c
    }

    #[test]
    fn two_symmetric_modes_form_two_clusters() {
        let spec = presets::two_mode_pair(0.05, 0.0);
        let c = generate_synthetic_corpus(&spec, 500, 5).unwrap();
        let g = build_relation_graph(&c.scenes).unwrap();
        let pts: Vec<Point2> = g
            .samples("bed", "nightstand")
            .iter()
            .map(|r| r.translation())
            .collect();
        assert_eq!(pts.len(), 500);
        let centers = two_means(&pts);
        assert!(centers[0].distance(Point2::new(-1.2, 0.0)) < 0.02);
        assert!(centers[1].distance(Point2::new(1.2, 0.0)) < 0.02);
    }

    #[test]
    fn full_noise_fills_a_disc() {
        let spec = presets::two_mode_pair(0.05, 0.0);
        let c = generate_synthetic_corpus(&spec, 400, 9).unwrap();
        let g = build_relation_graph(&c.scenes).unwrap();
        let pts = g.samples("plant", "lamp");
        assert!(pts.iter().all(|r| r.translation().norm() <= 3.0 + 1e-9));
        // uniform in the disc: a quarter of the mass inside half the radius
        let inner = pts.iter().filter(|r| r.translation().norm() < 1.5).count() as f64;
        assert!((inner / pts.len() as f64 - 0.25).abs() < 0.07);
    }

    #[test]
    fn spec_errors_name_the_field() {
        let mut spec = presets::bedroom();
        spec.categories[1].placement = Placement::Relative(RelationRule {
            anchor: "sofa".into(),
            modes: vec![[0.0, 0.0, 0.0]],
            sigma: 0.0,
            noise: 0.0,
            noise_radius: 1.0,
        });
        let err = spec.validate().unwrap_err().to_string();
        assert!(
            err.contains("categories[1].placement.relative.anchor"),
            "{err}"
        );

        let mut spec = presets::bedroom();
        spec.categories[0].hx = -1.0;
        assert!(spec
            .validate()
            .unwrap_err()
            .to_string()
            .contains("categories[0].hx"));

        let mut spec = presets::two_mode_pair(0.05, 0.0);
        if let Placement::Relative(r) = &mut spec.categories[1].placement {
            r.modes[0] = [40.0, 0.0, 0.0];
        }
        assert!(matches!(spec.validate(), Err(CorpusError::Infeasible(_))));

        let err = PatternSpec::from_json(r#"{"room": [[0,0],[1,0],[1,1]], "categories": [{"name": "a", "hz": 1, "placement": "free"}]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("hx"), "{err}");
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = presets::living_room();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        assert_eq!(PatternSpec::from_json(&text).unwrap(), spec);
    }
}
