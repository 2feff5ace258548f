use roomgen::corpus::synthetic::{generate_synthetic_corpus, presets, PatternSpec};
use roomgen::corpus::{parse_scenes, scenes_to_jsonl};
use roomgen::geometry::point_in_polygon;
use roomgen::priors::{learn, LearnParams, PriorStore};
use roomgen::synthesis::{collision_cost, synthesize, LayoutState, ObjectRequest, SolverParams};

fn learned(spec: &PatternSpec) -> PriorStore {
    let corpus = generate_synthetic_corpus(spec, 1000, 7).unwrap();
    learn(&corpus.scenes, &LearnParams::default()).unwrap().0
}

fn requests(spec: &PatternSpec) -> Vec<ObjectRequest> {
    spec.categories
        .iter()
        .flat_map(|c| (0..c.count).map(move |_| ObjectRequest::new(c.name.clone(), c.hx, c.hz)))
        .collect()
}

#[test]
fn bedroom_variants_are_feasible_with_nightstands_flanking_the_bed() {
    let spec = presets::bedroom();
    let priors = learned(&spec);
    let reqs = requests(&spec);
    let out = synthesize(&spec.room, &reqs, &[], &priors, 8, &SolverParams::default()).unwrap();
    assert_eq!(out.len(), 8);
    for s in &out {
        assert!(s.feasible, "variant {} infeasible", s.variant);
        let state = LayoutState::from_scene(s.scene.clone());
        assert_eq!(collision_cost(&state), 0.0);
        for o in &s.scene.objects {
            for c in o.footprint().corners() {
                assert!(point_in_polygon(c, &s.scene.room));
            }
        }
        let bed = s
            .scene
            .objects
            .iter()
            .find(|o| o.category == "bed")
            .unwrap()
            .pose();
        let sides: Vec<f64> = s
            .scene
            .objects
            .iter()
            .filter(|o| o.category == "nightstand")
            .map(|o| bed.relative(&o.pose()).p_z)
            .collect();
        assert_eq!(sides.len(), 2);
        assert!(
            sides[0] * sides[1] < 0.0,
            "variant {}: {sides:?}",
            s.variant
        );
    }
}

#[test]
fn variants_differ() {
    let spec = presets::bedroom();
    let priors = learned(&spec);
    let out = synthesize(
        &spec.room,
        &requests(&spec),
        &[],
        &priors,
        3,
        &SolverParams::default(),
    )
    .unwrap();
    for a in 0..3 {
        for b in (a + 1)..3 {
            let spread = out[a]
                .scene
                .objects
                .iter()
                .zip(&out[b].scene.objects)
                .map(|(p, q)| p.center().distance(q.center()))
                .fold(0.0, f64::max);
            assert!(spread > 0.1, "variants {a} and {b} move at most {spread}");
        }
    }
}

#[test]
fn synthesis_is_deterministic_and_round_trips() {
    let spec = presets::living_room();
    let priors = learned(&spec);
    let text = priors.to_json().unwrap();
    assert_eq!(PriorStore::from_json(&text).unwrap(), priors);
    assert_eq!(learned(&spec).to_json().unwrap(), text);

    let params = SolverParams {
        seed: 3,
        ..SolverParams::default()
    };
    let reqs = requests(&spec);
    let a = synthesize(&spec.room, &reqs, &[], &priors, 4, &params).unwrap();
    let b = synthesize(&spec.room, &reqs, &[], &priors, 4, &params).unwrap();
    assert_eq!(a, b);
    let scenes: Vec<_> = a.iter().map(|s| s.scene.clone()).collect();
    let jsonl = scenes_to_jsonl(&scenes).unwrap();
    assert_eq!(parse_scenes(&jsonl).unwrap(), scenes);
    assert_eq!(
        scenes_to_jsonl(&parse_scenes(&jsonl).unwrap()).unwrap(),
        jsonl
    );
}
