use propplan_core::learn::{
    add_learning_schemas, augment_known_effects, build_goal, extend, reified,
    reified_neg, reify_names, LearnError, TypePropertyPair,
};
use propplan_core::pddl::{
    apply, ground, parse_domain, print_domain, print_formula, Domain, GroundAtom, State,
};
use proptest::prelude::*;
use std::collections::BTreeSet;

const TV_BASE: &str = include_str!("../fixtures/tv_base.pddl");
const GOLDEN: &str = include_str!("../fixtures/tv_extended_golden.pddl");

fn tv_base() -> Domain {
    parse_domain(TV_BASE).unwrap()
}

fn tv_pair() -> TypePropertyPair {
    TypePropertyPair::new("Tv", "Is_Turned_On")
}

#[test]
fn extension_matches_the_golden_file() {
    let (ext, _) = extend(&tv_base(), &[tv_pair()], 50, "Close_To").unwrap();
    assert_eq!(print_domain(&ext), GOLDEN);
    // and the golden text itself parses back to the same domain
    assert_eq!(parse_domain(GOLDEN).unwrap(), ext);
}

#[test]
fn reified_names_keep_their_quotes() {
    assert_eq!(reified("Is_Turned_On"), "\"is_turned_on\"");
    assert_eq!(reified_neg("Is_Turned_On"), "\"not_is_turned_on\"");
    assert_eq!(tv_pair().type_name(), "\"tv\"");
}

#[test]
fn extension_report_lists_everything_added() {
    let (ext, report) = extend(&tv_base(), &[tv_pair()], 50, "Close_To").unwrap();
    assert_eq!(report.n_min, 50);
    let consts: BTreeSet<(String, String)> = report.added_constants.into_iter().collect();
    assert_eq!(
        consts,
        BTreeSet::from([
            ("\"tv\"".to_string(), "Type".to_string()),
            ("\"is_turned_on\"".to_string(), "Property".to_string()),
            ("\"not_is_turned_on\"".to_string(), "Property".to_string()),
        ])
    );
    let preds: BTreeSet<String> = report.added_predicates.into_iter().collect();
    assert_eq!(
        preds,
        ["Explored_for", "Known", "Learned", "Property", "Sufficient_Obs", "Type", "Viewed"]
            .into_iter()
            .map(str::to_string)
            .collect()
    );
    assert_eq!(report.added_schemas, vec!["Observe", "Explore_for", "Train"]);
    let modified: Vec<&str> =
        report.modified_schemas.iter().map(|m| m.schema.as_str()).collect();
    assert_eq!(modified, vec!["Turn_Off", "Turn_On"]);
    // base content is untouched
    let base = tv_base();
    for (name, schema) in &base.schemas {
        let ext_schema = &ext.schemas[name];
        assert_eq!(schema.pre, ext_schema.pre, "{name} precondition changed");
        assert!(schema.eff_add.is_subset(&ext_schema.eff_add));
        assert!(schema.eff_del.is_subset(&ext_schema.eff_del));
    }
}

#[test]
fn known_augmentation_is_symmetric_on_turn_on_and_off() {
    let (d1, _) = reify_names(&tv_base()).unwrap();
    let (d2, modified) = augment_known_effects(&d1).unwrap();
    let on = &d2.schemas["Turn_On"];
    let on_add: Vec<String> = on.eff_add.iter().map(|a| a.to_string()).collect();
    let on_del: Vec<String> = on.eff_del.iter().map(|a| a.to_string()).collect();
    assert!(on_add.contains(&"(Known ?x \"tv\" \"is_turned_on\")".to_string()), "{on_add:?}");
    assert!(on_del.contains(&"(Known ?x \"tv\" \"not_is_turned_on\")".to_string()), "{on_del:?}");
    let off = &d2.schemas["Turn_Off"];
    let off_add: Vec<String> = off.eff_add.iter().map(|a| a.to_string()).collect();
    let off_del: Vec<String> = off.eff_del.iter().map(|a| a.to_string()).collect();
    assert!(off_add.contains(&"(Known ?x \"tv\" \"not_is_turned_on\")".to_string()));
    assert!(off_del.contains(&"(Known ?x \"tv\" \"is_turned_on\")".to_string()));
    assert_eq!(modified.len(), 2);
}

#[test]
fn goal_is_a_conjunction_of_learned_or_explored_disjunctions() {
    let goal = build_goal(&[tv_pair()]).unwrap();
    assert_eq!(
        print_formula(&goal),
        "(and (or (Learned \"tv\" \"is_turned_on\" \"not_is_turned_on\") (Explored_for \"tv\")))"
    );
    assert!(matches!(build_goal(&[]), Err(LearnError::EmptyPairs)));
}

#[test]
fn extending_twice_is_rejected() {
    let (ext, _) = extend(&tv_base(), &[tv_pair()], 50, "Close_To").unwrap();
    match extend(&ext, &[tv_pair()], 50, "Close_To") {
        Err(LearnError::AlreadyExtended(_)) => {}
        other => panic!("expected already-extended error, got {other:?}"),
    }
}

#[test]
fn reified_name_collision_is_rejected() {
    let mut base = tv_base();
    base.constants.insert("\"tv\"".into(), "Tv".into());
    match reify_names(&base) {
        Err(LearnError::NameCollision(name)) => assert_eq!(name, "\"tv\""),
        other => panic!("expected collision, got {other:?}"),
    }
}

#[test]
fn missing_flip_action_is_rejected() {
    let mut base = tv_base();
    base.schemas.remove("Turn_Off");
    match extend(&base, &[tv_pair()], 50, "Close_To") {
        Err(LearnError::MissingFlipAction { prop, dir, .. }) => {
            assert_eq!(prop, "Is_Turned_On");
            assert_eq!(dir, "making false");
        }
        other => panic!("expected missing-flip error, got {other:?}"),
    }
}

#[test]
fn unknown_pair_members_are_rejected() {
    assert!(matches!(
        extend(&tv_base(), &[TypePropertyPair::new("Fridge", "Is_Turned_On")], 50, "Close_To"),
        Err(LearnError::UnknownTypePredicate(_))
    ));
    assert!(matches!(
        extend(&tv_base(), &[TypePropertyPair::new("Tv", "Is_Open")], 50, "Close_To"),
        Err(LearnError::UnknownPropertyPredicate(_))
    ));
}

#[test]
fn missing_closeness_predicate_is_rejected() {
    let base = tv_base();
    assert!(matches!(
        add_learning_schemas(&base, "Near"),
        Err(LearnError::MissingClosenessPredicate(_))
    ));
}

#[test]
fn untyped_property_effect_is_rejected() {
    let text = "(define (domain d)\n  (:types Tv)\n  (:properties Is_On)\n  (:predicates (Close_To ?x))\n  (:action Flip\n    :parameters (?x)\n    :precondition (Close_To ?x)\n    :effect (Is_On ?x)))";
    let base = parse_domain(text).unwrap();
    let (d1, _) = reify_names(&base).unwrap();
    match augment_known_effects(&d1) {
        Err(LearnError::UntypedPropertyEffect { schema, var }) => {
            assert_eq!(schema, "Flip");
            assert_eq!(var, "x");
        }
        other => panic!("expected untyped-property error, got {other:?}"),
    }
}

fn known(o: &str, t: &str, p: &str) -> GroundAtom {
    GroundAtom::new("Known", &[o, t, p])
}

/// Known polarity exclusivity: no reachable state holds both
/// `Known(o,t,"p")` and `Known(o,t,"not_p")`.
fn polarity_exclusive(s: &State) -> bool {
    for a in &s.atoms {
        if a.pred == "Known" && a.args[2].starts_with("\"not_") {
            let pos = a.args[2].replacen("\"not_", "\"", 1);
            if s.contains(&known(&a.args[0], &a.args[1], &pos)) {
                return false;
            }
        }
    }
    true
}

proptest! {
    /// Applying any executable sequence of ground actions of the extended
    /// domain preserves Known polarity exclusivity.
    #[test]
    fn known_polarities_stay_mutually_exclusive(
        choices in prop::collection::vec(0usize..64, 0..12),
        start_on in any::<bool>(),
    ) {
        let mut base = tv_base();
        base.constants.insert("tv0".into(), "Tv".into());
        base.constants.insert("tv1".into(), "Tv".into());
        let (ext, _) = extend(&base, &[tv_pair()], 50, "Close_To").unwrap();
        let actions = {
            let mut a = ground(&ext).unwrap();
            a.sort();
            a
        };
        let mut atoms = vec![
            GroundAtom::new("Tv", &["tv0"]),
            GroundAtom::new("Tv", &["tv1"]),
            GroundAtom::new("Discovered", &["tv0"]),
            GroundAtom::new("Discovered", &["tv1"]),
            known("tv0", "\"tv\"", "\"not_is_turned_on\""),
        ];
        if start_on {
            atoms.push(GroundAtom::new("Is_Turned_On", &["tv1"]));
            atoms.push(known("tv1", "\"tv\"", "\"is_turned_on\""));
        }
        let mut s = State::from_atoms(atoms);
        prop_assert!(polarity_exclusive(&s));
        for c in choices {
            let applicable: Vec<_> = actions
                .iter()
                .filter(|a| apply(&s, a).is_ok())
                .collect();
            if applicable.is_empty() {
                break;
            }
            let a = applicable[c % applicable.len()];
            s = apply(&s, a).unwrap();
            prop_assert!(polarity_exclusive(&s), "after {} in {}", a.id(), s);
        }
    }
}
