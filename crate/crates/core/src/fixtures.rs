//! Shipped test networks and seeded network generators.
//!
//! The small fixtures (parallel pair, triangle, K4, ring of eight) have
//! closed-form flows and factors. `ne39` is a synthetic New England-style
//! system: 39 buses, 46 branches, a 14-bus meshed backbone with radial
//! generator and load pockets hanging off it. Its JSON is produced by
//! [`synthetic_new_england`] with [`NE39_SEED`] and checked in.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{build_network, Branch, Bus, BusId, NetworkModel, DEFAULT_MVA_BASE};

pub const NE39_SEED: u64 = 39;

const PARALLEL_PAIR: &str = include_str!("../fixtures/parallel_pair.json");
const TRIANGLE: &str = include_str!("../fixtures/triangle.json");
const K4: &str = include_str!("../fixtures/k4.json");
const RING8: &str = include_str!("../fixtures/ring8.json");
const NE39: &str = include_str!("../fixtures/ne39.json");

pub const NAMES: [&str; 5] = ["parallel_pair", "triangle", "k4", "ring8", "ne39"];

fn load(text: &str) -> NetworkModel {
    NetworkModel::from_json(text).expect("shipped fixture is valid")
}

pub fn parallel_pair() -> NetworkModel {
    load(PARALLEL_PAIR)
}

pub fn triangle() -> NetworkModel {
    load(TRIANGLE)
}

pub fn k4() -> NetworkModel {
    load(K4)
}

pub fn ring8() -> NetworkModel {
    load(RING8)
}

pub fn ne39() -> NetworkModel {
    load(NE39)
}

/// Two buses joined by one line carrying 100 MW.
pub fn two_bus() -> NetworkModel {
    build_network(
        vec![
            Bus {
                id: 1,
                lat: 41.51,
                lon: -72.56,
                injection: 100.0,
            },
            Bus {
                id: 2,
                lat: 41.29,
                lon: -72.90,
                injection: -100.0,
            },
        ],
        vec![Branch::new(1, 1, 2, 0.05)],
        1,
        DEFAULT_MVA_BASE,
    )
    .expect("valid two-bus network")
}

pub fn by_name(name: &str) -> Option<NetworkModel> {
    match name {
        "parallel_pair" => Some(parallel_pair()),
        "triangle" => Some(triangle()),
        "k4" => Some(k4()),
        "ring8" => Some(ring8()),
        "ne39" => Some(ne39()),
        _ => None,
    }
}

pub fn all() -> Vec<(&'static str, NetworkModel)> {
    NAMES
        .iter()
        .map(|&n| (n, by_name(n).expect("known fixture")))
        .collect()
}

fn round_to(x: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (x * s).round() / s
}

/// Random connected network: a random spanning tree plus `extra_chords`
/// additional branches between distinct, not yet adjacent bus pairs.
/// Reactances are uniform in [0.01, 0.1] pu; injections uniform in
/// [-100, 100] MW with bus 1 as slack absorbing the balance.
pub fn random_network(n_buses: usize, extra_chords: usize, seed: u64) -> NetworkModel {
    assert!(n_buses >= 2, "need at least two buses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses: Vec<Bus> = (0..n_buses)
        .map(|i| Bus {
            id: i as BusId + 1,
            lat: rng.random_range(40.0..46.0),
            lon: rng.random_range(-74.0..-68.0),
            injection: if i == 0 {
                0.0
            } else {
                rng.random_range(-100.0..100.0)
            },
        })
        .collect();
    let others: f64 = buses[1..].iter().map(|b| b.injection).sum();
    buses[0].injection = -others;

    let mut edges: Vec<(BusId, BusId)> = Vec::new();
    for i in 1..n_buses {
        let parent = rng.random_range(0..i);
        edges.push((parent as BusId + 1, i as BusId + 1));
    }
    let max_edges = n_buses * (n_buses - 1) / 2;
    let target = (edges.len() + extra_chords).min(max_edges);
    while edges.len() < target {
        let a = rng.random_range(0..n_buses) as BusId + 1;
        let b = rng.random_range(0..n_buses) as BusId + 1;
        if a == b
            || edges
                .iter()
                .any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a))
        {
            continue;
        }
        edges.push((a, b));
    }
    let branches = edges
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| Branch::new(i as u32 + 1, a, b, rng.random_range(0.01..=0.1)))
        .collect();
    build_network(buses, branches, 1, DEFAULT_MVA_BASE).expect("generator builds a valid network")
}

/// Generator behind the shipped `ne39` fixture.
///
/// Backbone: generalized Petersen graph GP(7, 2) (14 buses, 21 lines, every
/// bus of degree three, no two-line cut), laid out over southern New
/// England. 25 radial buses attach to random earlier buses; ten of them
/// are generators, the rest loads scaled so the slack (bus 1) supplies 300 MW.
pub fn synthetic_new_england(seed: u64) -> NetworkModel {
    const CORE: usize = 7;
    const RADIAL: usize = 25;
    const GENERATORS: usize = 10;
    const SLACK_MW: f64 = 300.0;
    let (lat0, lon0) = (42.6, -71.9);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = Vec::with_capacity(2 * CORE + RADIAL);
    for ring in 0..2 {
        let (r_lat, r_lon) = if ring == 0 { (1.2, 1.6) } else { (0.55, 0.75) };
        for i in 0..CORE {
            let a = std::f64::consts::TAU * (i as f64 + 0.5 * ring as f64) / CORE as f64;
            buses.push(Bus {
                id: (ring * CORE + i) as BusId + 1,
                lat: round_to(lat0 + r_lat * a.cos() + rng.random_range(-0.08..0.08), 4),
                lon: round_to(lon0 + r_lon * a.sin() + rng.random_range(-0.08..0.08), 4),
                injection: 0.0,
            });
        }
    }

    let mut branches = Vec::new();
    let mut add = |from: usize, to: usize, kv: f64, rng: &mut ChaCha8Rng| {
        let id = branches.len() as u32 + 1;
        let mut br = Branch::new(
            id,
            from as BusId,
            to as BusId,
            round_to(rng.random_range(0.01..=0.1), 4),
        );
        br.voltage_kv = Some(kv);
        branches.push(br);
    };
    for i in 0..CORE {
        add(i + 1, (i + 1) % CORE + 1, 345.0, &mut rng);
    }
    for i in 0..CORE {
        add(i + 1, CORE + i + 1, 345.0, &mut rng);
    }
    for i in 0..CORE {
        add(CORE + i + 1, CORE + (i + 2) % CORE + 1, 345.0, &mut rng);
    }

    for k in 0..RADIAL {
        let id = 2 * CORE + k + 1;
        let parent = rng.random_range(1..id);
        let p = buses[parent - 1].clone();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let dist = rng.random_range(0.08..0.3);
        buses.push(Bus {
            id: id as BusId,
            lat: round_to(p.lat + dist * angle.cos(), 4),
            lon: round_to(p.lon + 1.3 * dist * angle.sin(), 4),
            injection: 0.0,
        });
        let kv = if rng.random_bool(0.5) { 230.0 } else { 115.0 };
        add(parent, id, kv, &mut rng);
    }

    let mut radial: Vec<usize> = (2 * CORE..2 * CORE + RADIAL).collect();
    radial.shuffle(&mut rng);
    let generators = &radial[..GENERATORS];
    let mut generation = SLACK_MW;
    for &g in generators {
        let mw = round_to(rng.random_range(150.0..650.0), 1);
        buses[g].injection = mw;
        generation += mw;
    }
    let loads: Vec<usize> = (1..buses.len())
        .filter(|i| !generators.contains(i))
        .collect();
    let raw: Vec<f64> = loads
        .iter()
        .map(|_| rng.random_range(20.0..250.0))
        .collect();
    let raw_total: f64 = raw.iter().sum();
    for (&bus, w) in loads.iter().zip(&raw) {
        buses[bus].injection = -round_to(generation * w / raw_total, 1);
    }
    let others: f64 = buses[1..].iter().map(|b| b.injection).sum();
    buses[0].injection = -others;

    build_network(buses, branches, 1, DEFAULT_MVA_BASE).expect("generator builds a valid network")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_fixtures_load() {
        for (name, net) in all() {
            assert!(net.branches().len() >= 2, "{name}");
        }
        let ne = ne39();
        assert_eq!(ne.buses().len(), 39);
        assert_eq!(ne.branches().len(), 46);
    }

    #[test]
    fn ne39_matches_generator() {
        assert_eq!(
            synthetic_new_england(NE39_SEED).to_json_pretty(),
            NE39.trim_end()
        );
    }

    #[test]
    fn ne39_backbone_has_no_bridges() {
        let net = ne39();
        let outages = net.non_islanding_outages();
        assert_eq!(outages, (1..=21).collect::<Vec<_>>());
    }

    #[test]
    fn random_network_is_deterministic() {
        let a = random_network(50, 20, 7);
        let b = random_network(50, 20, 7);
        assert_eq!(a, b);
        assert_eq!(a.buses().len(), 50);
        assert_eq!(a.branches().len(), 69);
        assert!(a
            .branches()
            .iter()
            .all(|b| (0.01..=0.1).contains(&b.reactance)));
    }
}
