use pskhad::detection::{build_confusion, ConfusionKind, Splitting};
use pskhad::simulator::{simulate, Scenario, SimConfig};
use pskhad::QuadratureConfig;

fn check(scenario: Scenario, kind: ConfusionKind, phases: usize, energy: f64, steps: usize) {
    let config = SimConfig {
        phases,
        pulse_energy: energy,
        steps,
        trials: 50_000,
        seed: 99,
        scenario,
    };
    let empirical = simulate(&config).unwrap();
    let analytic = build_confusion(kind, phases, energy, Splitting::finite(steps).unwrap(), &QuadratureConfig::default()).unwrap();
    let fit = empirical.compare(&analytic).unwrap();
    assert!(fit.passes(1e-3), "{scenario:?} M={phases}: {fit:?}");
}

#[test]
fn vp_helstrom_proxy_matches_finite_table() {
    check(Scenario::VpHelstromProxy, ConfusionKind::VpHelstrom, 3, 1.0, 30);
    check(Scenario::VpHelstromProxy, ConfusionKind::VpHelstrom, 4, 0.5, 10);
}

#[test]
fn vp_realistic_matches_finite_table() {
    check(Scenario::VpRealistic, ConfusionKind::VpRealistic, 3, 1.0, 100);
}

#[test]
fn nulling_hierarchy_matches_realistic_psk_table() {
    check(Scenario::RealisticPskOnly, ConfusionKind::RealisticPsk, 3, 1.5, 50);
    check(Scenario::RealisticPskOnly, ConfusionKind::RealisticPsk, 4, 1.0, 50);
}

#[test]
fn different_seeds_give_different_counts() {
    let mut config = SimConfig {
        phases: 3,
        pulse_energy: 1.0,
        steps: 20,
        trials: 2_000,
        seed: 1,
        scenario: Scenario::VpRealistic,
    };
    let a = simulate(&config).unwrap();
    config.seed = 2;
    assert_ne!(a, simulate(&config).unwrap());
}
