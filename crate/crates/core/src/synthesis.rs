//! Online layout synthesis.
//!
//! Requested objects are grouped by the connected components of the
//! thresholded strength graph. Each group's dominant object is placed from
//! its wall prior and every other member is drawn from the template of its
//! anchor. The arrangement is then refined by position-based projection
//! toward template points and away from collisions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ObjectInstance, Pose, Scene};
use crate::csr::{SpatialStrengthGraph, DEFAULT_EPSILON};
use crate::geometry::{
    ang_diff, boundary_violation, box_overlap_mtv, point_in_polygon, signed_angle_delta, t_left,
    OrientedBox, Point2, Polygon,
};
use crate::priors::{PriorStore, Template, WallPrior};

const WALL_ATTEMPTS: usize = 50;
const COLLISION_SKIN: f64 = 1e-6;
const WALL_SLOP: f64 = 1e-7;
const WALL_PASSES: usize = 4;
const CONSTRAINT_PASSES: usize = 200;
const IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("no wall prior for category {0:?}")]
    NoWallPrior(String),
    #[error("invalid solver parameter {name}: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error("object {index} ({category}) has invalid half extents")]
    InvalidObject { index: usize, category: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub epsilon: f64,
    pub stiffness: f64,
    pub max_iterations: usize,
    pub loss_tolerance: f64,
    pub collision_weight: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            stiffness: 0.2,
            max_iterations: 100,
            loss_tolerance: 1e-3,
            collision_weight: 1.0,
            seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |name, reason: &str| {
            Err(SynthesisError::InvalidParams {
                name,
                reason: reason.into(),
            })
        };
        if !(self.stiffness > 0.0 && self.stiffness <= 1.0) {
            return bad("stiffness", "must lie in (0, 1]");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if self.loss_tolerance.is_nan() || self.loss_tolerance < 0.0 {
            return bad("loss_tolerance", "must be non-negative");
        }
        if !(self.collision_weight >= 0.0 && self.collision_weight.is_finite()) {
            return bad("collision_weight", "must be finite and non-negative");
        }
        if !self.epsilon.is_finite() {
            return bad("epsilon", "must be finite");
        }
        Ok(())
    }
}

/// One object to place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRequest {
    #[serde(rename = "cat")]
    pub category: String,
    pub hx: f64,
    pub hz: f64,
}

impl ObjectRequest {
    pub fn new(category: impl Into<String>, hx: f64, hz: f64) -> Self {
        Self {
            category: category.into(),
            hx,
            hz,
        }
    }
}

/// Symmetric adjacency over object indices; each edge keeps its d-value.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    weights: Vec<Option<f64>>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            weights: vec![None; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn connect(&mut self, u: usize, v: usize, weight: f64) {
        assert!(u != v, "no self loops");
        self.weights[u * self.n + v] = Some(weight);
        self.weights[v * self.n + u] = Some(weight);
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.weights[u * self.n + v]
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.weight(u, v).is_some()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.is_adjacent(u, v))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors(u).count()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|w| w.is_some()).count() / 2
    }
}

/// Objects `u ≠ v` are adjacent when their categories' d-value is known and
/// at least `epsilon`.
pub fn build_adjacency(
    categories: &[impl AsRef<str>],
    ssg: &SpatialStrengthGraph,
    epsilon: f64,
) -> AdjacencyMatrix {
    let mut adj = AdjacencyMatrix::empty(categories.len());
    for u in 0..categories.len() {
        for v in (u + 1)..categories.len() {
            if let Some(d) = ssg.d_value(categories[u].as_ref(), categories[v].as_ref()) {
                if d >= epsilon {
                    adj.connect(u, v, d);
                }
            }
        }
    }
    adj
}

#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    /// Sorted ascending.
    pub members: Vec<usize>,
    pub dominant: Option<usize>,
    /// `(member, anchor)` for every non-dominant member, in placement order.
    pub anchors: Vec<(usize, usize)>,
}

impl Group {
    pub fn new(members: Vec<usize>) -> Self {
        Self {
            members,
            dominant: None,
            anchors: Vec::new(),
        }
    }
}

/// Connected components, ordered by smallest member.
pub fn form_groups(adj: &AdjacencyMatrix) -> Vec<Group> {
    let mut seen = vec![false; adj.len()];
    let mut groups = Vec::new();
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in adj.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        groups.push(Group::new(members));
    }
    groups
}

/// Uniform choice among the members of maximal degree.
pub fn choose_dominant<R: Rng + ?Sized>(
    group: &Group,
    adj: &AdjacencyMatrix,
    rng: &mut R,
) -> usize {
    choose_dominant_where(group, adj, rng, |_| true).expect("group is non-empty")
}

/// As [`choose_dominant`], restricted to members accepted by `eligible`.
pub fn choose_dominant_where<R: Rng + ?Sized>(
    group: &Group,
    adj: &AdjacencyMatrix,
    rng: &mut R,
    eligible: impl Fn(usize) -> bool,
) -> Option<usize> {
    let pool: Vec<usize> = group
        .members
        .iter()
        .copied()
        .filter(|&m| eligible(m))
        .collect();
    let dmax = pool.iter().map(|&m| adj.degree(m)).max()?;
    let top: Vec<usize> = pool
        .into_iter()
        .filter(|&m| adj.degree(m) == dmax)
        .collect();
    Some(top[rng.random_range(0..top.len())])
}

/// Maximum-weight spanning tree of the group grown from `root` (Prim).
/// Returns `(member, parent)` in the order members join the tree.
pub fn spanning_forest(group: &Group, adj: &AdjacencyMatrix, root: usize) -> Vec<(usize, usize)> {
    let mut in_tree = vec![root];
    let mut edges = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for &u in &in_tree {
            for &v in &group.members {
                if in_tree.contains(&v) {
                    continue;
                }
                if let Some(w) = adj.weight(u, v) {
                    let better = match best {
                        None => true,
                        Some((bw, bv, bu)) => w > bw || (w == bw && (v, u) < (bv, bu)),
                    };
                    if better {
                        best = Some((w, v, u));
                    }
                }
            }
        }
        match best {
            Some((_, v, u)) => {
                in_tree.push(v);
                edges.push((v, u));
            }
            None => return edges,
        }
    }
}

/// Sets the dominant and the anchors: members adjacent to the dominant
/// hang off it directly, the rest off their spanning-tree parent.
pub fn assign_anchors(group: &mut Group, adj: &AdjacencyMatrix, dominant: usize) {
    group.dominant = Some(dominant);
    group.anchors = spanning_forest(group, adj, dominant)
        .into_iter()
        .map(|(v, parent)| {
            if adj.is_adjacent(dominant, v) {
                (v, dominant)
            } else {
                (v, parent)
            }
        })
        .collect();
}

fn box_inside(room: &Polygon, b: &OrientedBox) -> bool {
    b.corners().iter().all(|c| point_in_polygon(*c, room))
}

fn wall_pose(room: &Polygon, wall: usize, t: f64, d: f64, theta_wall: f64) -> Pose {
    let (a, b) = room.edge(wall);
    let n = room.inward_normal(wall);
    let c = a + (b - a) * t + n * d;
    Pose::new(c.x, 0.0, c.z, n.z.atan2(n.x) + theta_wall)
}

/// Samples a pose against a uniformly chosen wall. After repeated misses
/// the longest wall's midpoint is used.
pub fn place_on_wall<R: Rng + ?Sized>(
    prior: &WallPrior,
    half_extents: (f64, f64),
    room: &Polygon,
    rng: &mut R,
) -> Pose {
    for _ in 0..WALL_ATTEMPTS {
        let wall = rng.random_range(0..room.len());
        let d = prior.sample_distance(rng);
        let theta = prior.sample_orientation(rng);
        let t: f64 = rng.random();
        let pose = wall_pose(room, wall, t, d, theta);
        if box_inside(
            room,
            &OrientedBox::new(pose.center(), half_extents, pose.theta),
        ) {
            return pose;
        }
    }
    let longest = (0..room.len())
        .map(|r| {
            let (a, b) = room.edge(r);
            (r, a.distance(b))
        })
        .fold(
            (0, f64::NEG_INFINITY),
            |best, e| if e.1 > best.1 { e } else { best },
        )
        .0;
    log::debug!("wall placement fell back to the longest wall");
    let d = prior.sample_distance(rng);
    let theta = prior.sample_orientation(rng);
    wall_pose(room, longest, 0.5, d, theta)
}

/// Initial poses for one group with its anchors assigned, as
/// `(object index, pose)` in placement order. A member's template draw is
/// repeated while it overlaps an already placed member.
pub fn heuristic_arrange<R: Rng + ?Sized>(
    group: &Group,
    requests: &[ObjectRequest],
    priors: &PriorStore,
    room: &Polygon,
    rng: &mut R,
) -> Result<Vec<(usize, Pose)>, SynthesisError> {
    let dominant = group.dominant.expect("dominant assigned");
    let on_wall = |i: usize, rng: &mut R| {
        let r = &requests[i];
        priors
            .wall_prior(&r.category)
            .map(|w| place_on_wall(w, (r.hx, r.hz), room, rng))
            .ok_or_else(|| SynthesisError::NoWallPrior(r.category.clone()))
    };
    let mut placed: BTreeMap<usize, Pose> = BTreeMap::new();
    let mut order = vec![(dominant, on_wall(dominant, rng)?)];
    placed.insert(dominant, order[0].1);
    for &(member, anchor) in &group.anchors {
        let anchor_pose = placed[&anchor];
        let pose = match priors.template(&requests[anchor].category, &requests[member].category) {
            Some(t) => {
                let half = (requests[member].hx, requests[member].hz);
                let mut pose = anchor_pose.compose(&t.sample(rng).sample);
                for _ in 1..WALL_ATTEMPTS {
                    let footprint = OrientedBox::new(pose.center(), half, pose.theta);
                    let clashes = order.iter().any(|&(other, p): &(usize, Pose)| {
                        let r = &requests[other];
                        box_overlap_mtv(
                            &footprint,
                            &OrientedBox::new(p.center(), (r.hx, r.hz), p.theta),
                        )
                        .is_some()
                    });
                    if !clashes {
                        break;
                    }
                    pose = anchor_pose.compose(&t.sample(rng).sample);
                }
                pose
            }
            None => {
                log::warn!(
                    "no template for {} -> {}; placing {} from its wall prior",
                    requests[anchor].category,
                    requests[member].category,
                    requests[member].category
                );
                on_wall(member, rng)?
            }
        };
        placed.insert(member, pose);
        order.push((member, pose));
    }
    Ok(order)
}

/// Poses being optimized, with the room and immovable fixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutState {
    pub room: Polygon,
    pub objects: Vec<ObjectInstance>,
    pub fixtures: Vec<ObjectInstance>,
}

impl LayoutState {
    pub fn from_scene(scene: Scene) -> Self {
        Self {
            room: scene.room,
            objects: scene.objects,
            fixtures: scene.fixtures,
        }
    }

    pub fn into_scene(self) -> Scene {
        Scene {
            room: self.room,
            objects: self.objects,
            fixtures: self.fixtures,
        }
    }
}

/// An ordered adjacent pair `(anchor, other)` with the template that
/// scores `other` in `anchor`'s frame.
#[derive(Clone, Copy, Debug)]
pub struct ActivePair<'a> {
    pub anchor: usize,
    pub other: usize,
    pub template: &'a Template,
}

pub fn active_pairs<'a>(
    objects: &[ObjectInstance],
    adj: &AdjacencyMatrix,
    priors: &'a PriorStore,
) -> Vec<ActivePair<'a>> {
    let mut pairs = Vec::new();
    for i in 0..objects.len() {
        for j in adj.neighbors(i) {
            if let Some(template) = priors.template(&objects[i].category, &objects[j].category) {
                pairs.push(ActivePair {
                    anchor: i,
                    other: j,
                    template,
                });
            }
        }
    }
    pairs
}

/// Distance from the pose of object `j` relative to object `i` to the
/// nearest template point, with that point's index.
pub fn hausdorff_term(
    state: &LayoutState,
    i: usize,
    j: usize,
    template: &Template,
) -> (f64, usize) {
    let rel = state.objects[i].pose().relative(&state.objects[j].pose());
    let mut best = (f64::INFINITY, 0);
    for (k, p) in template.points().iter().enumerate() {
        let s = p.sample;
        let planar_sq = (rel.p_x - s.p_x).powi(2) + (rel.p_z - s.p_z).powi(2);
        // the angular term is at least 1
        let reach = best.0 - 1.0;
        if best.0.is_finite() && (reach <= 0.0 || planar_sq >= reach * reach) {
            continue;
        }
        let d = planar_sq.sqrt() + ang_diff(rel.p_theta, s.p_theta).exp();
        if d < best.0 {
            best = (d, k);
        }
    }
    best
}

/// Object–object corner penetration and wall violation, separately.
pub fn collision_terms(state: &LayoutState) -> (f64, f64) {
    let movable = state.objects.len();
    let boxes: Vec<OrientedBox> = state
        .objects
        .iter()
        .chain(&state.fixtures)
        .map(ObjectInstance::footprint)
        .collect();
    let corners: Vec<[Point2; 4]> = boxes.iter().map(OrientedBox::corners).collect();
    let mut col_obj = 0.0;
    for a in 0..boxes.len() {
        for b in 0..boxes.len() {
            if a == b || (a >= movable && b >= movable) {
                continue;
            }
            let edges = &corners[b];
            for &c in &corners[a] {
                col_obj += (0..4)
                    .map(|l| t_left(c, edges[l], edges[(l + 1) % 4]))
                    .product::<f64>();
            }
        }
    }
    let col_wall = corners[..movable]
        .iter()
        .flatten()
        .map(|&c| boundary_violation(c, &state.room).norm())
        .sum();
    (col_obj, col_wall)
}

pub fn collision_cost(state: &LayoutState) -> f64 {
    let (o, w) = collision_terms(state);
    o + w
}

fn any_overlap(state: &LayoutState) -> bool {
    let movable: Vec<OrientedBox> = state
        .objects
        .iter()
        .map(ObjectInstance::footprint)
        .collect();
    let fixed: Vec<OrientedBox> = state
        .fixtures
        .iter()
        .map(ObjectInstance::footprint)
        .collect();
    movable.iter().enumerate().any(|(a, ba)| {
        movable[a + 1..]
            .iter()
            .chain(&fixed)
            .any(|bb| box_overlap_mtv(ba, bb).is_some())
    })
}

/// No corner penetration, no wall violation and no overlapping footprints.
pub fn is_feasible(state: &LayoutState) -> bool {
    collision_cost(state) == 0.0 && !any_overlap(state)
}

fn loss_with(state: &LayoutState, active: &[ActivePair], collision_weight: f64) -> f64 {
    let hausdorff: f64 = active
        .iter()
        .map(|p| hausdorff_term(state, p.anchor, p.other, p.template).0)
        .sum();
    hausdorff + collision_weight * collision_cost(state)
}

/// Template distance over all active ordered pairs plus weighted collision.
pub fn total_loss(
    state: &LayoutState,
    priors: &PriorStore,
    adj: &AdjacencyMatrix,
    collision_weight: f64,
) -> f64 {
    loss_with(
        state,
        &active_pairs(&state.objects, adj, priors),
        collision_weight,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    pub state: LayoutState,
    pub loss: f64,
    pub iterations: usize,
    pub feasible: bool,
}

fn project_templates(state: &mut LayoutState, active: &[ActivePair], stiffness: f64) {
    for p in active {
        let (_, k) = hausdorff_term(state, p.anchor, p.other, p.template);
        let target = state.objects[p.anchor]
            .pose()
            .compose(&p.template.points()[k].sample);
        let obj = &mut state.objects[p.other];
        let mut pose = obj.pose();
        pose.x += stiffness * (target.x - pose.x);
        pose.z += stiffness * (target.z - pose.z);
        pose.theta += stiffness * signed_angle_delta(pose.theta, target.theta);
        obj.set_pose(pose);
    }
}

fn shift(obj: &mut ObjectInstance, by: Point2) {
    obj.x += by.x;
    obj.z += by.z;
}

fn with_skin(m: Point2) -> Point2 {
    m + m * (COLLISION_SKIN / m.norm())
}

fn leaves_room(b: &OrientedBox, by: Point2, room: &Polygon) -> bool {
    let moved = OrientedBox::new(b.center + by, b.half_extents, b.theta);
    !box_inside(room, &moved)
}

/// Pairwise separation, splitting each push by inverse area. An object the
/// push would drive out of the room holds still and the other takes it all.
/// Returns whether anything moved.
fn project_collisions(state: &mut LayoutState) -> bool {
    let mut moved = false;
    let n = state.objects.len();
    for a in 0..n {
        for b in (a + 1)..n {
            let (fa, fb) = (state.objects[a].footprint(), state.objects[b].footprint());
            if let Some(m) = box_overlap_mtv(&fa, &fb) {
                moved = true;
                let m = with_skin(m);
                let (mut wa, mut wb) = (1.0 / fa.area(), 1.0 / fb.area());
                let share = wa / (wa + wb);
                let (pinned_a, pinned_b) = (
                    leaves_room(&fa, m * share, &state.room),
                    leaves_room(&fb, -m * (1.0 - share), &state.room),
                );
                if pinned_a != pinned_b {
                    if pinned_a {
                        wa = 0.0;
                    } else {
                        wb = 0.0;
                    }
                }
                shift(&mut state.objects[a], m * (wa / (wa + wb)));
                shift(&mut state.objects[b], -m * (wb / (wa + wb)));
            }
        }
        for f in 0..state.fixtures.len() {
            let fixed = state.fixtures[f].footprint();
            if let Some(m) = box_overlap_mtv(&state.objects[a].footprint(), &fixed) {
                moved = true;
                shift(&mut state.objects[a], with_skin(m));
            }
        }
    }
    moved
}

fn project_walls(state: &mut LayoutState) -> bool {
    let mut moved = false;
    for i in 0..state.objects.len() {
        for _ in 0..WALL_PASSES {
            let worst = state.objects[i]
                .footprint()
                .corners()
                .iter()
                .map(|&c| boundary_violation(c, &state.room))
                .fold(Point2::ZERO, |w, v| if v.norm() > w.norm() { v } else { w });
            if worst == Point2::ZERO {
                break;
            }
            moved = true;
            shift(
                &mut state.objects[i],
                worst + worst * (WALL_SLOP / worst.norm()),
            );
        }
    }
    moved
}

/// Alternates template, collision and wall projections. Returns the best
/// state seen, feasible states ranking above infeasible ones.
pub fn optimize(
    state: LayoutState,
    priors: &PriorStore,
    adj: &AdjacencyMatrix,
    params: &SolverParams,
) -> Optimized {
    let active = active_pairs(&state.objects, adj, priors);
    let loss = loss_with(&state, &active, params.collision_weight);
    let feasible = is_feasible(&state);
    let mut best = Optimized {
        state: state.clone(),
        loss,
        iterations: 0,
        feasible,
    };
    let mut current = state;
    let mut previous = loss;
    for it in 1..=params.max_iterations {
        project_templates(&mut current, &active, params.stiffness);
        for _ in 0..CONSTRAINT_PASSES {
            let collided = project_collisions(&mut current);
            if !project_walls(&mut current) && !collided {
                break;
            }
        }
        let loss = loss_with(&current, &active, params.collision_weight);
        let feasible = is_feasible(&current);
        let better = (feasible && !best.feasible)
            || (feasible == best.feasible && loss < best.loss - IMPROVEMENT);
        if better {
            best.state = current.clone();
            best.loss = loss;
            best.feasible = feasible;
        }
        best.iterations = it;
        if feasible && (loss - previous).abs() < params.loss_tolerance {
            break;
        }
        previous = loss;
    }
    best
}

/// One synthesized layout and how the optimizer fared on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedScene {
    pub scene: Scene,
    pub loss: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub seed: u64,
    pub variant: usize,
}

/// Groups the requested objects once, then arranges and optimizes
/// `n_variants` independent layouts. Variant `k` draws from stream `k` of
/// the generator seeded with `params.seed`.
pub fn synthesize(
    room: &Polygon,
    requests: &[ObjectRequest],
    fixtures: &[ObjectInstance],
    priors: &PriorStore,
    n_variants: usize,
    params: &SolverParams,
) -> Result<Vec<SynthesizedScene>, SynthesisError> {
    params.validate()?;
    for (index, r) in requests.iter().enumerate() {
        if !(r.hx > 0.0 && r.hz > 0.0 && r.hx.is_finite() && r.hz.is_finite()) {
            return Err(SynthesisError::InvalidObject {
                index,
                category: r.category.clone(),
            });
        }
    }
    let categories: Vec<&str> = requests.iter().map(|r| r.category.as_str()).collect();
    let adj = build_adjacency(&categories, &priors.ssg, params.epsilon);
    let groups = form_groups(&adj);
    for g in &groups {
        if g.members
            .iter()
            .all(|&m| priors.wall_prior(categories[m]).is_none())
        {
            return Err(SynthesisError::NoWallPrior(
                categories[g.members[0]].to_owned(),
            ));
        }
    }
    (0..n_variants)
        .into_par_iter()
        .map(|variant| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(variant as u64);
            let mut objects: Vec<ObjectInstance> = requests
                .iter()
                .map(|r| ObjectInstance::new(r.category.clone(), Pose::default(), (r.hx, r.hz)))
                .collect();
            for g in &groups {
                let mut g = g.clone();
                let dominant = choose_dominant_where(&g, &adj, &mut rng, |m| {
                    priors.wall_prior(categories[m]).is_some()
                })
                .expect("checked above");
                assign_anchors(&mut g, &adj, dominant);
                for (i, pose) in heuristic_arrange(&g, requests, priors, room, &mut rng)? {
                    objects[i].set_pose(pose);
                }
            }
            let state = LayoutState {
                room: room.clone(),
                objects,
                fixtures: fixtures.to_vec(),
            };
            let out = optimize(state, priors, &adj, params);
            Ok(SynthesizedScene {
                scene: out.state.into_scene(),
                loss: out.loss,
                iterations: out.iterations,
                feasible: out.feasible,
                seed: params.seed,
                variant,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RelationSample;
    use crate::csr::PairStrength;
    use crate::priors::TemplatePoint;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn strength(d: f64) -> PairStrength {
        PairStrength {
            d_value: d,
            n_samples: 100,
            m_used: 10,
            cooccurrence: 100,
        }
    }

    fn template(points: &[(f64, f64, f64, f64)]) -> Template {
        let w = 1.0 / points.len() as f64;
        Template::new(
            points
                .iter()
                .map(|&(x, z, t, _)| TemplatePoint {
                    sample: RelationSample::new(x, 0.0, z, t),
                    weight: w,
                })
                .collect(),
            vec![0],
        )
        .unwrap()
    }

    fn weighted_template(points: &[(f64, f64, f64, f64)]) -> Template {
        let total: f64 = points.iter().map(|p| p.3).sum();
        Template::new(
            points
                .iter()
                .map(|&(x, z, t, w)| TemplatePoint {
                    sample: RelationSample::new(x, 0.0, z, t),
                    weight: w / total,
                })
                .collect(),
            vec![0],
        )
        .unwrap()
    }

    fn wall_prior(d: f64, theta: f64) -> WallPrior {
        WallPrior {
            dist_modes: vec![crate::priors::Mode {
                value: d,
                probability: 1.0,
            }],
            orient_modes: vec![crate::priors::Mode {
                value: theta,
                probability: 1.0,
            }],
        }
    }

    fn store(
        pairs: &[(&str, &str, f64)],
        templates: Vec<(&str, &str, Template)>,
        walls: &[&str],
    ) -> PriorStore {
        let mut ssg = SpatialStrengthGraph::default();
        for &(a, b, d) in pairs {
            ssg.insert(a, b, strength(d));
        }
        PriorStore {
            epsilon: DEFAULT_EPSILON,
            ssg,
            templates: templates
                .into_iter()
                .map(|(a, b, t)| ((a.to_owned(), b.to_owned()), t))
                .collect(),
            wall_priors: walls
                .iter()
                .map(|w| (w.to_string(), wall_prior(0.5, 0.0)))
                .collect(),
        }
    }

    fn room(w: f64, h: f64) -> Polygon {
        Polygon::rectangle(0.0, 0.0, w, h).unwrap()
    }

    fn obj(cat: &str, x: f64, z: f64, theta: f64, he: (f64, f64)) -> ObjectInstance {
        ObjectInstance::new(cat, Pose::new(x, 0.0, z, theta), he)
    }

    #[test]
    fn adjacency_example() {
        let mut ssg = SpatialStrengthGraph::default();
        ssg.insert("bed", "nightstand", strength(2.47));
        ssg.insert("bed", "wardrobe", strength(1.12));
        let adj = build_adjacency(&["bed", "nightstand", "wardrobe"], &ssg, DEFAULT_EPSILON);
        assert!(adj.is_adjacent(0, 1) && adj.is_adjacent(1, 0));
        assert_eq!(adj.edge_count(), 1);
        assert_eq!(adj.weight(0, 1), Some(2.47));

        let dup = build_adjacency(&["bed", "nightstand", "nightstand"], &ssg, DEFAULT_EPSILON);
        assert!(dup.is_adjacent(0, 1) && dup.is_adjacent(0, 2) && !dup.is_adjacent(1, 2));
        let none = build_adjacency(&["bed", "nightstand"], &ssg, 3.0);
        assert_eq!(form_groups(&none).len(), 2);
    }

    #[test]
    fn same_category_pairs_connect() {
        let mut ssg = SpatialStrengthGraph::default();
        ssg.insert("chair", "chair", strength(3.0));
        let adj = build_adjacency(&["chair", "chair", "table"], &ssg, DEFAULT_EPSILON);
        assert!(adj.is_adjacent(0, 1));
        assert!(!adj.is_adjacent(0, 0));
    }

    #[test]
    fn group_examples() {
        let mut adj = AdjacencyMatrix::empty(5);
        adj.connect(0, 1, 2.0);
        adj.connect(1, 2, 2.0);
        let g: Vec<Vec<usize>> = form_groups(&adj).into_iter().map(|g| g.members).collect();
        assert_eq!(g, vec![vec![0, 1, 2], vec![3], vec![4]]);

        let mut full = AdjacencyMatrix::empty(4);
        for u in 0..4 {
            for v in (u + 1)..4 {
                full.connect(u, v, 2.0);
            }
        }
        assert_eq!(form_groups(&full).len(), 1);
    }

    fn union_find_groups(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut parent: Vec<usize> = (0..n).collect();
        for &(a, b) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in 0..n {
            let r = find(&mut parent, x);
            groups.entry(r).or_default().push(x);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    #[test]
    fn groups_match_union_find() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let n = rng.random_range(1..=50);
            let p = rng.random_range(0.0..0.1);
            let mut adj = AdjacencyMatrix::empty(n);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < p {
                        adj.connect(u, v, 2.0);
                        edges.push((u, v));
                    }
                }
            }
            let groups: Vec<Vec<usize>> =
                form_groups(&adj).into_iter().map(|g| g.members).collect();
            assert_eq!(groups, union_find_groups(n, &edges));
        }
    }

    #[test]
    fn dominant_examples() {
        let mut star = AdjacencyMatrix::empty(4);
        for leaf in 1..4 {
            star.connect(0, leaf, 2.0);
        }
        let g = &form_groups(&star)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| choose_dominant(g, &star, &mut rng) == 0));

        let single = Group::new(vec![2]);
        assert_eq!(
            choose_dominant(&single, &AdjacencyMatrix::empty(3), &mut rng),
            2
        );

        let mut pair = AdjacencyMatrix::empty(2);
        pair.connect(0, 1, 2.0);
        let g = &form_groups(&pair)[0];
        let first = (0..10_000)
            .filter(|_| choose_dominant(g, &pair, &mut rng) == 0)
            .count();
        // chi-square with one degree of freedom; 6.635 is the 1% critical value
        let e = 5000.0;
        let chi = ((first as f64 - e).powi(2) + ((10_000 - first) as f64 - e).powi(2)) / e;
        assert!(chi < 6.635, "{first}");
    }

    #[test]
    fn dominant_is_always_an_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let n = rng.random_range(1..=8);
            let mut adj = AdjacencyMatrix::empty(n);
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.4 {
                        adj.connect(u, v, 2.0);
                    }
                }
            }
            for g in form_groups(&adj) {
                let d = choose_dominant(&g, &adj, &mut rng);
                let dmax = g.members.iter().map(|&m| adj.degree(m)).max().unwrap();
                assert_eq!(adj.degree(d), dmax);
            }
        }
    }

    #[test]
    fn anchors_prefer_dominant_then_strongest_edge() {
        let mut adj = AdjacencyMatrix::empty(4);
        adj.connect(0, 1, 3.0);
        adj.connect(1, 2, 5.0);
        adj.connect(1, 3, 2.0);
        adj.connect(2, 3, 4.0);
        let mut g = form_groups(&adj).remove(0);
        assert_eq!(spanning_forest(&g, &adj, 0), vec![(1, 0), (2, 1), (3, 2)]);
        assign_anchors(&mut g, &adj, 1);
        assert_eq!(g.anchors, vec![(2, 1), (3, 1), (0, 1)]);
        assign_anchors(&mut g, &adj, 0);
        assert_eq!(g.anchors, vec![(1, 0), (2, 1), (3, 2)]);
    }

    fn chi_square_ok(counts: &[usize], probs: &[f64]) -> bool {
        let n: usize = counts.iter().sum();
        let chi: f64 = counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 1% critical values for 1 and 2 degrees of freedom
        let crit = [6.635, 9.210][counts.len() - 2];
        chi < crit
    }

    #[test]
    fn satellite_modes_follow_template_weights() {
        let t = weighted_template(&[(1.2, 0.0, 0.0, 0.3), (-1.2, 0.0, 0.0, 0.7)]);
        let priors = store(
            &[("bed", "nightstand", 2.5)],
            vec![("bed", "nightstand", t)],
            &["bed", "nightstand"],
        );
        let requests = vec![
            ObjectRequest::new("bed", 1.0, 0.8),
            ObjectRequest::new("nightstand", 0.2, 0.2),
        ];
        let adj = build_adjacency(&["bed", "nightstand"], &priors.ssg, DEFAULT_EPSILON);
        let mut g = form_groups(&adj).remove(0);
        assign_anchors(&mut g, &adj, 0);
        let r = room(10.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 2];
        for _ in 0..1000 {
            let poses = heuristic_arrange(&g, &requests, &priors, &r, &mut rng).unwrap();
            let rel = poses[0].1.relative(&poses[1].1);
            counts[(rel.p_x < 0.0) as usize] += 1;
        }
        assert!(chi_square_ok(&counts, &[0.3, 0.7]), "{counts:?}");
    }

    #[test]
    fn single_point_template_is_exact() {
        let t = template(&[(0.7, -0.3, 1.0, 1.0)]);
        let priors = store(
            &[("desk", "chair", 2.5)],
            vec![("desk", "chair", t)],
            &["desk"],
        );
        let requests = vec![
            ObjectRequest::new("desk", 0.3, 0.6),
            ObjectRequest::new("chair", 0.2, 0.2),
        ];
        let adj = build_adjacency(&["desk", "chair"], &priors.ssg, DEFAULT_EPSILON);
        let mut g = form_groups(&adj).remove(0);
        assign_anchors(&mut g, &adj, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let poses = heuristic_arrange(&g, &requests, &priors, &room(5.0, 5.0), &mut rng).unwrap();
        let expect = poses[0]
            .1
            .compose(&RelationSample::new(0.7, 0.0, -0.3, 1.0));
        assert_eq!(poses[1].1, expect);
    }

    #[test]
    fn wall_prior_orients_against_wall() {
        let priors = store(&[], vec![], &["wardrobe"]);
        let requests = vec![ObjectRequest::new("wardrobe", 0.3, 0.6)];
        let r = room(4.0, 3.0);
        let mut g = Group::new(vec![0]);
        assign_anchors(&mut g, &AdjacencyMatrix::empty(1), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let pose = heuristic_arrange(&g, &requests, &priors, &r, &mut rng).unwrap()[0].1;
            let (wall, d) = crate::corpus::nearest_wall(pose.center(), &r);
            let n = r.inward_normal(wall);
            assert!((d - 0.5).abs() < 1e-9);
            assert!(ang_diff(pose.theta, n.z.atan2(n.x)) < 1e-9);
        }
    }

    #[test]
    fn missing_prior_is_an_error() {
        let priors = store(&[], vec![], &[]);
        let requests = vec![ObjectRequest::new("lamp", 0.2, 0.2)];
        assert_eq!(
            synthesize(
                &room(4.0, 4.0),
                &requests,
                &[],
                &priors,
                1,
                &SolverParams::default()
            ),
            Err(SynthesisError::NoWallPrior("lamp".into()))
        );
    }

    #[test]
    fn missing_template_falls_back_to_wall() {
        let priors = store(&[("a", "b", 2.5)], vec![], &["a", "b"]);
        let requests = vec![
            ObjectRequest::new("a", 0.3, 0.3),
            ObjectRequest::new("b", 0.3, 0.3),
        ];
        let out = synthesize(
            &room(6.0, 6.0),
            &requests,
            &[],
            &priors,
            2,
            &SolverParams::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 2);
    }

    fn two_object_state(other: Pose) -> LayoutState {
        LayoutState {
            room: room(10.0, 10.0),
            objects: vec![
                obj("a", 5.0, 5.0, 0.3, (0.4, 0.3)),
                ObjectInstance::new("b", other, (0.2, 0.2)),
            ],
            fixtures: vec![],
        }
    }

    #[test]
    fn hausdorff_examples() {
        let t = template(&[(1.0, 0.0, 0.0, 1.0)]);
        let anchor = Pose::new(5.0, 0.0, 5.0, 0.3);
        let on = two_object_state(anchor.compose(&RelationSample::new(1.0, 0.0, 0.0, 0.0)));
        assert!((hausdorff_term(&on, 0, 1, &t).0 - 1.0).abs() < 1e-12);
        let off = two_object_state(anchor.compose(&RelationSample::new(2.0, 0.0, 0.0, 0.0)));
        assert!((hausdorff_term(&off, 0, 1, &t).0 - 2.0).abs() < 1e-12);

        // near but rotated against far but aligned
        let t2 = template(&[(1.1, 0.0, PI, 1.0), (2.0, 0.0, 0.0, 1.0)]);
        let s = two_object_state(anchor.compose(&RelationSample::new(1.0, 0.0, 0.0, 0.0)));
        let brute: Vec<f64> = t2
            .points()
            .iter()
            .map(|p| (1.0 - p.sample.p_x).abs() + ang_diff(0.0, p.sample.p_theta).exp())
            .collect();
        let (d, k) = hausdorff_term(&s, 0, 1, &t2);
        assert!((d - brute[1]).abs() < 1e-12 && brute[1] < brute[0]);
        assert_eq!(k, 1);
    }

    #[test]
    fn collision_examples() {
        let mut s = LayoutState {
            room: room(5.0, 5.0),
            objects: vec![
                obj("a", 1.0, 1.0, 0.0, (0.5, 0.5)),
                obj("b", 3.0, 3.0, 0.4, (0.5, 0.5)),
            ],
            fixtures: vec![],
        };
        assert_eq!(collision_cost(&s), 0.0);

        // unit box centered on the wall z = 0
        s.objects = vec![obj("a", 2.5, 0.0, 0.0, (0.5, 0.5))];
        let (o, w) = collision_terms(&s);
        assert_eq!(o, 0.0);
        assert!((w - 1.0).abs() < 1e-12);

        let a = obj("a", 2.0, 2.0, 0.0, (0.5, 0.5));
        let b = obj("b", 2.5, 2.3, 0.0, (0.5, 0.5));
        s.objects = vec![a.clone(), b.clone()];
        let brute = |p: &ObjectInstance, q: &ObjectInstance| -> f64 {
            let qc = q.footprint().corners();
            p.footprint()
                .corners()
                .iter()
                .map(|&c| {
                    (0..4)
                        .map(|l| t_left(c, qc[l], qc[(l + 1) % 4]))
                        .product::<f64>()
                })
                .sum()
        };
        let (o, w) = collision_terms(&s);
        assert_eq!(w, 0.0);
        assert!(o > 0.0);
        assert!((o - (brute(&a, &b) + brute(&b, &a))).abs() < 1e-12);
    }

    #[test]
    fn fixtures_collide_but_not_with_each_other() {
        let s = LayoutState {
            room: room(5.0, 5.0),
            objects: vec![],
            fixtures: vec![
                obj("door", 1.0, 0.0, 0.0, (0.5, 0.1)),
                obj("door", 1.2, 0.0, 0.0, (0.5, 0.1)),
            ],
        };
        assert_eq!(collision_cost(&s), 0.0);
        assert!(is_feasible(&s));
    }

    fn pair_setup(t: Template) -> (PriorStore, AdjacencyMatrix) {
        let priors = store(&[("a", "b", 2.5)], vec![("a", "b", t)], &["a", "b"]);
        let adj = build_adjacency(&["a", "b"], &priors.ssg, DEFAULT_EPSILON);
        (priors, adj)
    }

    #[test]
    fn loss_floor_and_perturbation() {
        let (priors, adj) = pair_setup(template(&[(1.5, 0.2, FRAC_PI_2, 1.0)]));
        let anchor = Pose::new(5.0, 0.0, 5.0, 0.3);
        let s = two_object_state(anchor.compose(&RelationSample::new(1.5, 0.0, 0.2, FRAC_PI_2)));
        let l = total_loss(&s, &priors, &adj, 1.0);
        assert!((l - 1.0).abs() < 1e-9);
        let mut moved = s.clone();
        moved.objects[1].x += 0.1;
        assert!(total_loss(&moved, &priors, &adj, 1.0) > l);
        assert_eq!(
            total_loss(&s, &priors, &AdjacencyMatrix::empty(2), 1.0),
            0.0
        );
    }

    #[test]
    fn satellite_converges() {
        let (priors, adj) = pair_setup(template(&[(1.5, 0.0, 0.5, 1.0)]));
        let anchor = Pose::new(5.0, 0.0, 5.0, 0.3);
        let target = anchor.compose(&RelationSample::new(1.5, 0.0, 0.0, 0.5));
        let mut start = target;
        start.z += 1.0;
        start.theta += 0.4;
        let out = optimize(
            two_object_state(start),
            &priors,
            &adj,
            &SolverParams::default(),
        );
        let got = out.state.objects[1].pose();
        assert!(out.feasible);
        assert!(out.iterations <= 50, "{}", out.iterations);
        assert!(got.center().distance(target.center()) < 1e-2);
        assert!(ang_diff(got.theta, target.theta) < 1e-2);
        assert_eq!(out.state.objects[0], two_object_state(start).objects[0]);
    }

    #[test]
    fn optimal_input_is_unchanged() {
        let (priors, adj) = pair_setup(template(&[(1.5, 0.0, 0.5, 1.0)]));
        let anchor = Pose::new(5.0, 0.0, 5.0, 0.3);
        let s = two_object_state(anchor.compose(&RelationSample::new(1.5, 0.0, 0.0, 0.5)));
        let out = optimize(s.clone(), &priors, &adj, &SolverParams::default());
        assert_eq!(out.state, s);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn overlapping_groups_separate() {
        let s = LayoutState {
            room: room(20.0, 20.0),
            objects: vec![
                obj("a", 10.0, 10.0, 0.2, (1.0, 0.6)),
                obj("b", 10.5, 10.2, 1.0, (0.8, 0.5)),
            ],
            fixtures: vec![obj("door", 9.0, 9.5, 0.0, (0.5, 0.1))],
        };
        let priors = store(&[], vec![], &[]);
        let out = optimize(
            s.clone(),
            &priors,
            &AdjacencyMatrix::empty(2),
            &SolverParams::default(),
        );
        assert!(out.feasible);
        assert_eq!(collision_cost(&out.state), 0.0);
        assert_eq!(out.state.fixtures, s.fixtures);
    }

    #[test]
    fn walls_push_objects_inside() {
        let s = LayoutState {
            room: room(4.0, 4.0),
            objects: vec![obj("a", 0.1, 3.9, 0.7, (0.5, 0.3))],
            fixtures: vec![],
        };
        let out = optimize(
            s,
            &store(&[], vec![], &[]),
            &AdjacencyMatrix::empty(1),
            &SolverParams::default(),
        );
        assert!(out.feasible);
        for c in out.state.objects[0].footprint().corners() {
            assert!(point_in_polygon(c, &out.state.room));
        }
    }

    #[test]
    fn bad_params_are_rejected() {
        let p = SolverParams {
            stiffness: 0.0,
            ..SolverParams::default()
        };
        assert!(matches!(
            p.validate(),
            Err(SynthesisError::InvalidParams {
                name: "stiffness",
                ..
            })
        ));
        let p = SolverParams {
            max_iterations: 0,
            ..SolverParams::default()
        };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn adjacency_is_permutation_equivariant(
            cats in proptest::collection::vec(0usize..4, 1..10),
            d in proptest::collection::vec(0.0..4.0f64, 10),
            seed in any::<u64>(),
        ) {
            let names = ["a", "b", "c", "d"];
            let mut ssg = SpatialStrengthGraph::default();
            let mut k = 0;
            for i in 0..4 {
                for j in i..4 {
                    ssg.insert(names[i], names[j], strength(d[k]));
                    k += 1;
                }
            }
            let labels: Vec<&str> = cats.iter().map(|&c| names[c]).collect();
            let adj = build_adjacency(&labels, &ssg, DEFAULT_EPSILON);
            let mut perm: Vec<usize> = (0..labels.len()).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<&str> = perm.iter().map(|&p| labels[p]).collect();
            let padj = build_adjacency(&permuted, &ssg, DEFAULT_EPSILON);
            for u in 0..labels.len() {
                for v in 0..labels.len() {
                    prop_assert_eq!(adj.weight(u, v), adj.weight(v, u));
                    prop_assert_eq!(padj.weight(u, v), adj.weight(perm[u], perm[v]));
                }
            }
        }

        #[test]
        fn hausdorff_has_exp_floor(x in -3.0..3.0f64, z in -3.0..3.0f64, t in 0.0..TAU) {
            let tmpl = template(&[(1.0, 0.5, 0.3, 1.0), (-1.0, 0.0, 2.0, 1.0)]);
            let anchor = Pose::new(5.0, 0.0, 5.0, 0.3);
            let s = two_object_state(anchor.compose(&RelationSample::new(x, 0.0, z, t)));
            prop_assert!(hausdorff_term(&s, 0, 1, &tmpl).0 >= 1.0 - 1e-12);
        }

        #[test]
        fn loss_is_invariant_under_rigid_motion(
            dx in -5.0..5.0f64, dz in -5.0..5.0f64, rot in 0.0..TAU,
            x in 3.0..7.0f64, z in 3.0..7.0f64,
        ) {
            let (priors, adj) = pair_setup(template(&[(1.0, 0.5, 0.3, 1.0)]));
            let s = LayoutState {
                room: room(10.0, 10.0),
                objects: vec![obj("a", 5.0, 5.0, 0.3, (0.4, 0.3)), obj("b", x, z, 1.1, (0.6, 0.2))],
                fixtures: vec![],
            };
            let motion = |p: Point2| p.rotate(rot) + Point2::new(dx, dz);
            let moved = LayoutState {
                room: Polygon::new(s.room.vertices().iter().map(|&v| motion(v)).collect()).unwrap(),
                objects: s.objects.iter().map(|o| {
                    let c = motion(o.center());
                    ObjectInstance::new(o.category.clone(), Pose::new(c.x, o.y, c.z, o.theta + rot), o.half_extents())
                }).collect(),
                fixtures: vec![],
            };
            let a = total_loss(&s, &priors, &adj, 1.0);
            let b = total_loss(&moved, &priors, &adj, 1.0);
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{} {}", a, b);
        }
    }
}
