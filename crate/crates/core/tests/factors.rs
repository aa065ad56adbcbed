use outage_core::fixtures;
use outage_core::grid::{
    apply_outage, dc_power_flow, kcl_residual, lodf, ptdf, BranchFlows, DcSolver, GridError,
    NetworkModel, Transaction,
};
use proptest::prelude::*;

fn check_lodf_against_resolve(net: &NetworkModel) {
    let solver = DcSolver::new(net).unwrap();
    let pre = solver.base_flows().unwrap();
    for m in net.non_islanding_outages() {
        let predicted = solver.predicted_flow_change(&pre, m).unwrap();
        let post_net = apply_outage(net, m).unwrap();
        let post = dc_power_flow(&post_net).unwrap();
        for br in net.branches() {
            let actual = post.get(br.id).unwrap_or(0.0) - pre.get(br.id).unwrap();
            let err_pu = (predicted[&br.id] - actual).abs() / net.mva_base();
            assert!(err_pu <= 1e-9, "outage {m} branch {}: {err_pu}", br.id);
        }
    }
}

fn check_kcl(net: &NetworkModel, flows: &BranchFlows) {
    for bus in net.buses() {
        let r = kcl_residual(net, flows, bus.id).unwrap();
        assert!(r <= 1e-9, "bus {}: {r}", bus.id);
    }
}

#[test]
fn lodf_matches_resolve_on_fixtures() {
    for (name, net) in fixtures::all() {
        eprintln!("{name}");
        check_lodf_against_resolve(&net);
    }
}

#[test]
fn islanding_outages_are_rejected() {
    let net = fixtures::ne39();
    for br in net.branches() {
        if !net.is_non_islanding(br.id) {
            assert_eq!(
                lodf(&net, br.id).unwrap_err(),
                GridError::IslandingOutage(br.id)
            );
        }
    }
}

#[test]
fn kcl_holds_pre_and_post() {
    for (_, net) in fixtures::all() {
        check_kcl(&net, &dc_power_flow(&net).unwrap());
        for m in net.non_islanding_outages() {
            let post = apply_outage(&net, m).unwrap();
            check_kcl(&post, &dc_power_flow(&post).unwrap());
        }
    }
}

#[test]
fn ptdf_superposition() {
    // transfer a->c equals a->b plus b->c
    let net = fixtures::ring8();
    let ab = ptdf(&net, &Transaction::new(1, 4, 1.0)).unwrap();
    let bc = ptdf(&net, &Transaction::new(4, 7, 1.0)).unwrap();
    let ac = ptdf(&net, &Transaction::new(1, 7, 1.0)).unwrap();
    for (id, v) in &ac.values {
        assert!((v - ab.values[id] - bc.values[id]).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_networks_lodf_exact(seed in 0u64..10_000, n in 5usize..40, chords in 0usize..30) {
        let net = fixtures::random_network(n, chords, seed);
        check_lodf_against_resolve(&net);
        check_kcl(&net, &dc_power_flow(&net).unwrap());
    }

    #[test]
    fn factor_bounds(seed in 0u64..10_000, n in 5usize..30, chords in 0usize..20) {
        let net = fixtures::random_network(n, chords, seed);
        let solver = DcSolver::new(&net).unwrap();
        for a in net.buses().iter().take(5) {
            for b in net.buses().iter().rev().take(5) {
                if a.id == b.id {
                    continue;
                }
                let phi = solver.ptdf(&Transaction::new(a.id, b.id, 1.0)).unwrap();
                prop_assert!(phi.max_abs() <= 1.0 + 1e-12);
            }
        }
        for m in net.non_islanding_outages() {
            prop_assert!(solver.lodf(m).unwrap().max_abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn flows_scale_with_injections(seed in 0u64..10_000, k in 0.1f64..10.0) {
        let net = fixtures::random_network(12, 6, seed);
        let solver = DcSolver::new(&net).unwrap();
        let inj: Vec<f64> = net.buses().iter().map(|b| b.injection).collect();
        let scaled: Vec<f64> = inj.iter().map(|p| p * k).collect();
        let a = solver.flows(&inj).unwrap();
        let b = solver.flows(&scaled).unwrap();
        for (id, f) in &a.flows {
            prop_assert!((b.flows[id] - k * f).abs() <= 1e-9 * (1.0 + f.abs() * k));
        }
    }
}
