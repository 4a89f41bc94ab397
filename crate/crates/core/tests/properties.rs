use imitation_core::dynamics::{mother_field, replicator_field, smith_field, VectorField};
use imitation_core::games::PayoffFunction;
use imitation_core::protocols::{AdoptionRule, RevisionProtocol, SelectionRule};
use imitation_core::simplex::PopulationState;
use proptest::prelude::*;

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

fn matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), n)
}

fn selection() -> impl Strategy<Value = SelectionRule> {
    prop_oneof![
        Just(SelectionRule::Fair),
        (1usize..6).prop_map(|m| SelectionRule::list_sample(m).unwrap()),
        (1usize..6).prop_map(|m| SelectionRule::majority(m).unwrap()),
        (1usize..6).prop_map(|m| SelectionRule::retry_other(m).unwrap()),
        (1usize..6).prop_map(|m| SelectionRule::confirmation(m).unwrap()),
    ]
}

fn adoption() -> impl Strategy<Value = AdoptionRule> {
    prop_oneof![
        Just(AdoptionRule::Pairwise),
        Just(AdoptionRule::Success { k: None }),
        Just(AdoptionRule::Dissatisfaction { k: None }),
        Just(AdoptionRule::AboveAverage { f: None }),
        Just(AdoptionRule::BelowAverage { g: None }),
    ]
}

fn field(sel: SelectionRule, ad: AdoptionRule, rows: Vec<Vec<f64>>) -> VectorField {
    mother_field(RevisionProtocol::new(sel, ad), PayoffFunction::matrix(rows).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn velocity_is_tangent(sel in selection(), ad in adoption(), rows in matrix(4), x in state(4)) {
        let v = field(sel, ad, rows).eval(&x).unwrap();
        prop_assert!(v.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn imitative_fields_keep_faces(sel in selection(), ad in adoption(), rows in matrix(4), mut x in state(4), k in 0usize..4) {
        x[k] = 0.0;
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= s);
        let v = field(sel, ad, rows).eval(&x).unwrap();
        prop_assert_eq!(v[k], 0.0);
    }

    #[test]
    fn common_payoff_shift_changes_nothing(sel in selection(), rows in matrix(3), c in -1.0f64..1.0, x in state(3)) {
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
        let a = field(sel.clone(), AdoptionRule::Pairwise, rows).eval(&x).unwrap();
        let b = field(sel, AdoptionRule::Pairwise, shifted).eval(&x).unwrap();
        for (u, w) in a.iter().zip(&b) {
            prop_assert!((u - w).abs() < 1e-12);
        }
    }

    #[test]
    fn fair_pairwise_is_replicator(rows in matrix(3), x in state(3)) {
        let game = PayoffFunction::matrix(rows).unwrap();
        let a = mother_field(RevisionProtocol::new(SelectionRule::Fair, AdoptionRule::Pairwise), game.clone()).unwrap();
        let b = replicator_field(game);
        for (u, w) in a.eval(&x).unwrap().iter().zip(&b.eval(&x).unwrap()) {
            prop_assert!((u - w).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_pairwise_is_scaled_smith(rows in matrix(4), x in state(4)) {
        let game = PayoffFunction::matrix(rows).unwrap();
        let a = mother_field(
            RevisionProtocol::new(SelectionRule::UniformOverStrategies, AdoptionRule::Pairwise),
            game.clone(),
        ).unwrap();
        let b = smith_field(game);
        for (u, w) in a.eval(&x).unwrap().iter().zip(&b.eval(&x).unwrap()) {
            prop_assert!((u - w / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_probabilities_are_substochastic(sel in selection(), x in state(4), i in 0usize..4) {
        let p = sel.selection_prob(i, &x).unwrap();
        prop_assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(p[i], 0.0);
    }

    #[test]
    fn validated_states_sum_to_one(x in state(5)) {
        let s = PopulationState::validate(&x, 1e-9).unwrap();
        prop_assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
