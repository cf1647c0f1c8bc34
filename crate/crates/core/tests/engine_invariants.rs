use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use chrono::DateTime;
use proptest::prelude::*;
use transition_core::balance::{AnnualBalance, CarrierKind, TechParams, TechnologyKind as T};
use transition_core::engine::*;
use transition_core::metrics::{annual_metrics, YearExtras};
use transition_core::params::{PolicyId, SiteClass};
use transition_core::ObjectiveFrame;

fn model() -> Arc<Model> {
    static MODEL: OnceLock<Arc<Model>> = OnceLock::new();
    MODEL.get_or_init(|| Arc::new(Model::bundled())).clone()
}

fn any_action() -> impl Strategy<Value = Action> {
    let tech = prop::sample::select(T::ALL.to_vec());
    let site = prop::sample::select(SiteClass::ALL.to_vec());
    let policy = prop::sample::select(PolicyId::ALL.to_vec());
    let choice = prop::sample::select(vec![
        ShockChoice::EmergencyImports,
        ShockChoice::GasPeakers,
        ShockChoice::Conservation,
        ShockChoice::Reintroduce,
        ShockChoice::PhaseOut,
    ]);
    prop_oneof![
        4 => (tech, site).prop_map(|(technology, site)| Action::Build { technology, site }),
        4 => (1u32..40).prop_map(|plant_id| Action::Upgrade { plant_id }),
        2 => (1u32..40).prop_map(|plant_id| Action::Decommission { plant_id }),
        4 => (-1000.0..30_000.0f64).prop_map(|tj_per_season| Action::SetImport { tj_per_season }),
        3 => (0.0..6000.0f64).prop_map(|mchf| Action::Borrow { mchf }),
        3 => policy.clone().prop_map(|policy| Action::ProposePolicy { policy }),
        3 => policy.prop_map(|policy| Action::Campaign { policy }),
        2 => (0.0..6e6f64).prop_map(|t_per_year| Action::SetSequester { t_per_year }),
        4 => choice.prop_map(|choice| Action::RespondShock { choice }),
        10 => Just(Action::EndTurn),
        1 => Just(Action::Abandon),
    ]
}

fn play(seed: u64, actions: &[Action]) -> Game {
    let at = DateTime::from_timestamp(1_700_000_000, 0).unwrap();
    let mut game = Game::new(model(), seed, ObjectiveFrame::TransitionFocus);
    for a in actions {
        game.act(a.clone(), at);
    }
    game
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reachable_states_respect_money_and_support(seed in any::<u64>(), actions in prop::collection::vec(any_action(), 0..120)) {
        let at = DateTime::from_timestamp(1_700_000_000, 0).unwrap();
        let mut game = Game::new(model(), seed, ObjectiveFrame::SupplyOnly);
        let mut ends = 0;
        for a in actions {
            let rec = game.act(a, at).clone();
            if matches!(rec.outcome, ActionOutcome::Accepted { detail: ActionDetail::TurnEnded { .. }, .. }) {
                ends += 1;
            }
            let s = game.state();
            prop_assert!(s.treasury.budget_mchf >= 0.0);
            prop_assert!(s.treasury.loan_outstanding_mchf <= s.treasury.loan_cap_per_turn_mchf);
            prop_assert!((0.0..=100.0).contains(&s.support));
            prop_assert!(s.fleet.iter().all(|p| p.upgrades_applied <= p.max_upgrades));
            prop_assert!((1..=10).contains(&s.turn));
        }
        prop_assert!(ends <= 10);
        let seqs: Vec<u64> = game.log().iter().map(|r| r.seq).collect();
        prop_assert_eq!(seqs, (0..game.log().len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn replay_is_bit_identical(seed in any::<u64>(), actions in prop::collection::vec(any_action(), 0..80)) {
        let game = play(seed, &actions);
        let again = play(seed, &actions);
        prop_assert_eq!(again.state(), game.state());
        prop_assert_eq!(again.log(), game.log());
        let replayed = Game::replay(model(), seed, ObjectiveFrame::TransitionFocus, game.log()).unwrap();
        prop_assert_eq!(replayed.state(), game.state());
        prop_assert_eq!(
            format!("{:?}", replayed.score()),
            format!("{:?}", game.score())
        );
    }
}

#[test]
fn upgrade_caps_by_enumeration() {
    let model = model();
    let params = model.params();
    for kind in T::ALL.iter().copied() {
        let mut state = model.new_game(1, ObjectiveFrame::SupplyOnly);
        state.treasury.budget_mchf = 1e9;
        let id = state.fleet.iter().find(|p| p.kind == kind).unwrap().id;
        let cap = params.tech(kind).max_upgrades;
        for n in 0..cap {
            let (next, _) = model.apply_action(&state, &Action::Upgrade { plant_id: id }).unwrap();
            let plant = next.plant(id).unwrap();
            let expected = plant.base_capacity * (1.0 + params.tech(kind).upgrade_pct / 100.0 * (n + 1) as f64);
            assert!((plant.capacity() - expected).abs() <= 1e-9 * expected, "{kind} upgrade {n}");
            state = next;
        }
        assert!(matches!(
            model.apply_action(&state, &Action::Upgrade { plant_id: id }),
            Err(ActionError::UpgradeCapReached { .. })
        ), "{kind}");
    }
}

#[test]
fn upgrade_cap_policies_add_exactly_three() {
    let model = model();
    for (policy, kind) in [(PolicyId::EnableAlpinePv, T::Solar), (PolicyId::WindParkRegulation, T::Wind)] {
        let mut state = model.new_game(1, ObjectiveFrame::SupplyOnly);
        state.policies.get_mut(&policy).unwrap().status = PolicyStatus::Enacted;
        for other in T::ALL.iter().copied() {
            let base = model.params().tech(other).max_upgrades;
            let expected = if other == kind { base + 3 } else { base };
            assert_eq!(model.upgrade_cap(&state, other), expected, "{policy} / {other}");
        }
    }
}

#[test]
fn build_delays_gate_supply() {
    let model = model();
    for (kind, site, delay) in [(T::Wind, SiteClass::Land, 2), (T::River, SiteClass::Water, 3), (T::Reservoir, SiteClass::Water, 6)] {
        let mut state = model.new_game(4, ObjectiveFrame::SupplyOnly);
        state.import_level_tj = model.params().imports.cap_tj_per_season;
        state.treasury.budget_mchf = 1e6;
        let base = state.active_capacity(kind);
        let (mut s, _) = model.apply_action(&state, &Action::Build { technology: kind, site }).unwrap();
        for turn in 0..=delay {
            let expected = if turn < delay { base } else { base + model.build_capacity(kind) };
            assert_eq!(s.active_capacity(kind), expected, "{kind} after {turn} turn ends");
            if turn < delay {
                if let Some(shock) = &s.active_shock {
                    if shock.kind.choices().contains(&ShockChoice::Conservation) {
                        s = model.apply_action(&s, &Action::RespondShock { choice: ShockChoice::Conservation }).unwrap().0;
                    }
                }
                s = model.apply_action(&s, &Action::EndTurn).unwrap().0;
            }
        }
    }
}

#[test]
fn fast_track_shortens_wind_delay_by_one() {
    let model = model();
    let mut state = model.new_game(4, ObjectiveFrame::SupplyOnly);
    assert_eq!(model.build_delay(&state, T::Wind), 2);
    state.policies.get_mut(&PolicyId::FastTrackWind).unwrap().status = PolicyStatus::Enacted;
    assert_eq!(model.build_delay(&state, T::Wind), 1);
    assert_eq!(model.build_delay(&state, T::River), 3);
}

proptest! {
    #[test]
    fn swapping_gas_for_solar_never_raises_emissions(
        gas in 0.0..1e5f64,
        moved in 0.0..1.0f64,
        consumption in 0.0..1e5f64,
    ) {
        let model = model();
        let techs: BTreeMap<T, TechParams> = model.technologies().clone();
        let factors: BTreeMap<CarrierKind, f64> = CarrierKind::ALL.iter().map(|&c| (c, model.calibration().emission_factor(c))).collect();
        let record = |gas_out: f64, solar_out: f64| {
            let mut b = AnnualBalance::empty(2030);
            b.generation.insert(T::Gas, gas_out);
            b.generation.insert(T::Solar, solar_out);
            b.flows.get_mut(&CarrierKind::Gas).unwrap().final_consumption.insert(transition_core::Sector::Industry, consumption);
            annual_metrics(&b, &techs, &factors, YearExtras::default())
        };
        let shifted = gas * moved;
        let before = record(gas, 0.0);
        let after = record(gas - shifted, shifted);
        prop_assert!(after.emissions_mt <= before.emissions_mt + 1e-12);
    }
}
