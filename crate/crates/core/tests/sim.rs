use propplan_core::sim::{
    generate_world, DetectMode, DetectorNoise, Direction, LowLevelOp, OperatorEffect,
    WorldConfig, WorldError,
};
use std::collections::BTreeMap;

fn base_cfg(seed: u64) -> WorldConfig {
    WorldConfig {
        seed,
        width: 10,
        height: 10,
        objects: BTreeMap::from([("Tv".to_string(), 4)]),
        applicable: BTreeMap::from([(
            "Tv".to_string(),
            vec!["Is_Turned_On".to_string()],
        )]),
        priors: BTreeMap::new(),
        feature_dim: 6,
        signal: BTreeMap::new(),
        default_signal: 1.0,
        view_sigma: 0.0,
        detector: DetectorNoise::default(),
        act_failure_rate: 0.0,
        max_steps: 10_000,
        interaction_range: 1.5,
        sensing_range: 6.0,
        fov_half_deg: 60.0,
        prototype_spread: 0.3,
        operator_effects: BTreeMap::from([(
            "Turn_On".to_string(),
            OperatorEffect { property: "Is_Turned_On".into(), value: true },
        )]),
    }
}

#[test]
fn generation_is_deterministic_in_the_seed() {
    let a = generate_world(&base_cfg(5)).unwrap();
    let b = generate_world(&base_cfg(5)).unwrap();
    assert_eq!(a.dump_json(), b.dump_json());
    let c = generate_world(&base_cfg(6)).unwrap();
    assert_ne!(a.dump_json(), c.dump_json());
}

#[test]
fn objects_occupy_distinct_cells_with_applicable_props_only() {
    let w = generate_world(&base_cfg(1)).unwrap();
    let positions: std::collections::BTreeSet<(i32, i32)> =
        w.objects.iter().map(|o| o.pos).collect();
    assert_eq!(positions.len(), w.objects.len());
    for o in &w.objects {
        assert_eq!(o.ty, "Tv");
        assert_eq!(o.props.keys().collect::<Vec<_>>(), vec!["Is_Turned_On"]);
        assert_eq!(o.prototype.len(), 6);
        assert!((0..10).contains(&o.pos.0) && (0..10).contains(&o.pos.1));
    }
}

#[test]
fn property_priors_match_observed_frequency() {
    // 300 worlds x 4 objects = 1200 Bernoulli(0.3) draws; 3 sigma ~ 0.04
    let mut cfg = base_cfg(0);
    cfg.priors = BTreeMap::from([(
        "Tv".to_string(),
        BTreeMap::from([("Is_Turned_On".to_string(), 0.3)]),
    )]);
    let mut on = 0usize;
    let mut total = 0usize;
    for seed in 0..300 {
        cfg.seed = seed;
        let w = generate_world(&cfg).unwrap();
        for o in &w.objects {
            total += 1;
            if o.props["Is_Turned_On"] {
                on += 1;
            }
        }
    }
    let freq = on as f64 / total as f64;
    assert!((freq - 0.3).abs() < 0.045, "frequency {freq}");
}

#[test]
fn visibility_is_a_cone_around_the_heading() {
    let mut w = generate_world(&base_cfg(2)).unwrap();
    w.pose.x = 5;
    w.pose.y = 5;
    w.pose.heading = 0; // east
    assert!(w.cell_visible((5, 5)), "own cell always visible");
    assert!(w.cell_visible((8, 5)), "straight ahead within range");
    assert!(w.cell_visible((7, 7)), "45 degrees within a 60-degree half-angle");
    assert!(!w.cell_visible((5, 8)), "90 degrees off-axis is outside the cone");
    assert!(!w.cell_visible((3, 5)), "behind the agent");
    // beyond sensing range even if on-axis
    let mut far = w.clone();
    far.pose.x = 0;
    assert!(!far.cell_visible((7, 5)), "distance 7 > sensing range 6");
}

#[test]
fn gtd_detections_report_every_visible_object_exactly() {
    let mut w = generate_world(&base_cfg(3)).unwrap();
    let percept = w.detect(DetectMode::Gtd);
    let visible = w.visible_objects().len();
    assert_eq!(percept.detections.len(), visible);
    for det in &percept.detections {
        let obj = w.objects.iter().find(|o| o.pos == det.pos).unwrap();
        assert_eq!(det.reported_type, obj.ty);
        assert_eq!(det.features, w.noiseless_view(obj));
    }
}

#[test]
fn move_steps_clamp_at_the_boundary() {
    let mut w = generate_world(&base_cfg(4)).unwrap();
    w.pose.x = 0;
    w.pose.y = 0;
    let res = w.step(&LowLevelOp::Move(Direction::West), DetectMode::Gtd);
    assert!(res.out_of_bounds);
    assert_eq!((w.pose.x, w.pose.y), (0, 0));
    let res = w.step(&LowLevelOp::Move(Direction::East), DetectMode::Gtd);
    assert!(!res.out_of_bounds);
    assert_eq!((w.pose.x, w.pose.y), (1, 0));
}

#[test]
fn rotation_wraps_modulo_four() {
    let mut w = generate_world(&base_cfg(4)).unwrap();
    w.pose.heading = 3;
    w.step(&LowLevelOp::Rotate { quarter_turns: 1 }, DetectMode::Gtd);
    assert_eq!(w.pose.heading, 0);
    w.step(&LowLevelOp::Rotate { quarter_turns: -1 }, DetectMode::Gtd);
    assert_eq!(w.pose.heading, 3);
}

#[test]
fn act_flips_ground_truth_when_in_range() {
    let mut w = generate_world(&base_cfg(7)).unwrap();
    let target = w.objects[0].id.clone();
    let pos = w.objects[0].pos;
    w.pose.x = pos.0;
    w.pose.y = (pos.1 - 1).max(0);
    let res = w.step(
        &LowLevelOp::Act { object: target.clone(), operator: "Turn_On".into() },
        DetectMode::Gtd,
    );
    assert!(!res.failed);
    assert!(w.object(&target).unwrap().props["Is_Turned_On"]);
}

#[test]
fn act_out_of_range_fails_visibly() {
    let mut w = generate_world(&base_cfg(7)).unwrap();
    let target = w.objects[0].id.clone();
    let pos = w.objects[0].pos;
    // stand far away
    w.pose.x = if pos.0 < 5 { 9 } else { 0 };
    w.pose.y = if pos.1 < 5 { 9 } else { 0 };
    let before = w.object(&target).unwrap().props.clone();
    let res = w.step(
        &LowLevelOp::Act { object: target.clone(), operator: "Turn_On".into() },
        DetectMode::Gtd,
    );
    assert!(res.failed);
    assert_eq!(w.object(&target).unwrap().props, before);
}

#[test]
fn unknown_operator_fails_visibly() {
    let mut w = generate_world(&base_cfg(7)).unwrap();
    let target = w.objects[0].id.clone();
    let res = w.step(
        &LowLevelOp::Act { object: target, operator: "Explode".into() },
        DetectMode::Gtd,
    );
    assert!(res.failed);
}

#[test]
fn act_failures_are_silent_and_match_the_configured_rate() {
    let mut cfg = base_cfg(0);
    cfg.act_failure_rate = 0.4;
    // start every tv off so Turn_On is the only way it becomes true
    cfg.priors = BTreeMap::from([(
        "Tv".to_string(),
        BTreeMap::from([("Is_Turned_On".to_string(), 0.0)]),
    )]);
    let mut silent_failures = 0usize;
    let trials = 600;
    for seed in 0..trials {
        cfg.seed = seed as u64;
        let mut w = generate_world(&cfg).unwrap();
        let target = w.objects[0].id.clone();
        let pos = w.objects[0].pos;
        w.pose.x = pos.0;
        w.pose.y = pos.1;
        let res = w.step(
            &LowLevelOp::Act { object: target.clone(), operator: "Turn_On".into() },
            DetectMode::Gtd,
        );
        // a silent failure reports success but leaves ground truth unchanged
        assert!(!res.failed, "silent failures must not be visible");
        if !w.object(&target).unwrap().props["Is_Turned_On"] {
            silent_failures += 1;
        }
    }
    let rate = silent_failures as f64 / trials as f64;
    // 3 sigma of Binomial(600, 0.4) ~ 0.06
    assert!((rate - 0.4).abs() < 0.07, "silent failure rate {rate}");
}

#[test]
fn nd_miss_rate_matches_statistics() {
    let mut cfg = base_cfg(0);
    cfg.detector.miss_rate = 0.25;
    let mut seen = 0usize;
    let mut possible = 0usize;
    for seed in 0..300 {
        cfg.seed = seed;
        let mut w = generate_world(&cfg).unwrap();
        for heading in 0..4 {
            w.pose.heading = heading;
            possible += w.visible_objects().len();
            seen += w.detect(DetectMode::Nd).detections.len();
        }
    }
    let rate = 1.0 - seen as f64 / possible.max(1) as f64;
    assert!(possible > 500, "sample too small: {possible}");
    assert!((rate - 0.25).abs() < 0.05, "miss rate {rate}, n={possible}");
}

#[test]
fn nd_misclassification_needs_a_second_type() {
    let mut cfg = base_cfg(0);
    cfg.objects.insert("Box".into(), 4);
    cfg.applicable.insert("Box".into(), vec![]);
    cfg.detector.misclass_rate = 0.3;
    let mut wrong = 0usize;
    let mut total = 0usize;
    for seed in 0..200 {
        cfg.seed = seed;
        let mut w = generate_world(&cfg).unwrap();
        let percept = w.detect(DetectMode::Nd);
        for det in percept.detections {
            let true_ty =
                &w.objects.iter().find(|o| o.pos == det.pos).unwrap().ty;
            total += 1;
            if &det.reported_type != true_ty {
                wrong += 1;
            }
        }
    }
    let rate = wrong as f64 / total.max(1) as f64;
    assert!((rate - 0.3).abs() < 0.06, "misclass rate {rate}, n={total}");
}

#[test]
fn nd_feature_jitter_perturbs_views_gtd_does_not() {
    let mut cfg = base_cfg(9);
    cfg.detector.feature_jitter = 0.2;
    let mut w = generate_world(&cfg).unwrap();
    let gtd = w.detect(DetectMode::Gtd);
    for det in &gtd.detections {
        let obj = w.objects.iter().find(|o| o.pos == det.pos).unwrap();
        assert_eq!(det.features, w.noiseless_view(obj));
    }
    let nd = w.detect(DetectMode::Nd);
    for det in &nd.detections {
        let obj = w.objects.iter().find(|o| o.pos == det.pos).unwrap();
        assert_ne!(det.features, w.noiseless_view(obj));
    }
}

#[test]
fn render_views_requires_visibility() {
    let mut w = generate_world(&base_cfg(11)).unwrap();
    let id = w.objects[0].id.clone();
    let pos = w.objects[0].pos;
    // look straight away from the object
    w.pose.x = pos.0;
    w.pose.y = pos.1 + 1;
    w.pose.heading = 1; // north, object is south
    match w.render_views(&id, 1) {
        Err(WorldError::NotVisible(o)) => assert_eq!(o, id),
        other => panic!("expected NotVisible, got {other:?}"),
    }
    w.pose.heading = 3; // south
    assert_eq!(w.render_views(&id, 3).unwrap().len(), 3);
}

#[test]
fn reseeded_clone_shares_ground_truth_but_not_the_rng() {
    let w = generate_world(&base_cfg(13)).unwrap();
    let clone = w.reseeded(99);
    assert_eq!(w.objects, clone.objects);
    assert_eq!(w.pose, clone.pose);
}

#[test]
fn resample_props_hits_the_requested_probability() {
    let mut w = generate_world(&base_cfg(0)).unwrap();
    let mut on = 0usize;
    let mut total = 0usize;
    for _ in 0..500 {
        w.resample_props(0.5);
        for o in &w.objects {
            total += 1;
            if o.props["Is_Turned_On"] {
                on += 1;
            }
        }
    }
    let freq = on as f64 / total as f64;
    assert!((freq - 0.5).abs() < 0.04, "frequency {freq}");
}

#[test]
fn infeasible_population_is_rejected() {
    let mut cfg = base_cfg(0);
    cfg.width = 2;
    cfg.height = 1;
    assert!(matches!(
        generate_world(&cfg),
        Err(WorldError::InfeasiblePopulation { objects: 4, cells: 2 })
    ));
}

#[test]
fn bad_rates_are_rejected() {
    let mut cfg = base_cfg(0);
    cfg.act_failure_rate = 1.5;
    assert!(matches!(generate_world(&cfg), Err(WorldError::BadConfig(_))));
}
