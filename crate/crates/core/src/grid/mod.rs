//! Lossless DC network model.
//!
//! A [`NetworkModel`] is an immutable, validated set of geo-located buses and
//! reactive branches. Everything downstream (power flow, distribution
//! factors, the scenario simulator) borrows it and never mutates it in
//! place; an outage produces a new model via [`apply_outage`].

mod factors;
mod solver;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use factors::{
    kcl_residual, lodf, net_outflow, predicted_flow_change, ptdf, DistributionFactors, FactorKind,
    Transaction,
};
pub use solver::{dc_power_flow, DcSolver};

pub type BusId = u32;
pub type BranchId = u32;

/// Balance mismatch that [`build_network`] silently moves onto the slack bus.
pub const REBALANCE_LIMIT_MW: f64 = 1e-6;

pub const DEFAULT_MVA_BASE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("network has no buses or no branches")]
    EmptyNetwork,
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("bus {bus}: coordinate ({lat}, {lon}) out of range")]
    InvalidCoordinate { bus: BusId, lat: f64, lon: f64 },
    #[error("branch {branch}: reactance {reactance} must be positive")]
    NonpositiveReactance { branch: BranchId, reactance: f64 },
    #[error("branch {branch} connects bus {bus} to itself")]
    SelfLoop { branch: BranchId, bus: BusId },
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("unknown branch {0}")]
    UnknownBranch(BranchId),
    #[error("slack bus {0} is not in the network")]
    UnknownSlack(BusId),
    #[error("MVA base {0} must be positive")]
    InvalidBase(f64),
    #[error("in-service network splits into {components} islands")]
    DisconnectedGraph { components: usize },
    #[error("injections do not balance: net {mismatch_mw} MW")]
    Unbalanced { mismatch_mw: f64 },
    #[error("outage of branch {0} islands the network")]
    IslandingOutage(BranchId),
    #[error("branch {0} is already out of service")]
    BranchOutOfService(BranchId),
    #[error("reduced susceptance matrix is singular")]
    SingularSystem,
    #[error("invalid transaction: {0}")]
    InvalidTransaction(String),
    #[error("no flow given for in-service branch {0}")]
    MissingFlow(BranchId),
    #[error("network file: {0}")]
    Io(String),
    #[error("network JSON: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub lat: f64,
    pub lon: f64,
    /// Generation minus load, MW.
    #[serde(rename = "injection_mw")]
    pub injection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    #[serde(rename = "from")]
    pub from_bus: BusId,
    #[serde(rename = "to")]
    pub to_bus: BusId,
    #[serde(rename = "reactance_pu")]
    pub reactance: f64,
    #[serde(default = "in_service_default")]
    pub in_service: bool,
    #[serde(default)]
    pub monitored: bool,
    /// Optional nominal voltage, used only for report labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_kv: Option<f64>,
}

fn in_service_default() -> bool {
    true
}

impl Branch {
    pub fn new(id: BranchId, from_bus: BusId, to_bus: BusId, reactance: f64) -> Self {
        Self {
            id,
            from_bus,
            to_bus,
            reactance,
            in_service: true,
            monitored: true,
            voltage_kv: None,
        }
    }

    pub fn touches(&self, bus: BusId) -> bool {
        self.from_bus == bus || self.to_bus == bus
    }
}

/// On-disk network layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub slack_bus: BusId,
    #[serde(default = "mva_base_default")]
    pub mva_base: f64,
}

fn mva_base_default() -> f64 {
    DEFAULT_MVA_BASE
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    slack_bus: BusId,
    mva_base: f64,
    bus_index: HashMap<BusId, usize>,
    branch_index: HashMap<BranchId, usize>,
}

pub fn build_network(
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    slack_bus: BusId,
    mva_base: f64,
) -> Result<NetworkModel, GridError> {
    if buses.is_empty() || branches.is_empty() {
        return Err(GridError::EmptyNetwork);
    }
    if !(mva_base.is_finite() && mva_base > 0.0) {
        return Err(GridError::InvalidBase(mva_base));
    }

    let mut bus_index = HashMap::with_capacity(buses.len());
    for (i, bus) in buses.iter().enumerate() {
        if bus_index.insert(bus.id, i).is_some() {
            return Err(GridError::DuplicateId {
                kind: "bus",
                id: bus.id,
            });
        }
        let lat_ok = bus.lat.is_finite() && (-90.0..=90.0).contains(&bus.lat);
        let lon_ok = bus.lon.is_finite() && (-180.0..=180.0).contains(&bus.lon);
        if !lat_ok || !lon_ok {
            return Err(GridError::InvalidCoordinate {
                bus: bus.id,
                lat: bus.lat,
                lon: bus.lon,
            });
        }
        if !bus.injection.is_finite() {
            return Err(GridError::Unbalanced {
                mismatch_mw: bus.injection,
            });
        }
    }

    let mut branch_index = HashMap::with_capacity(branches.len());
    for (i, br) in branches.iter().enumerate() {
        if branch_index.insert(br.id, i).is_some() {
            return Err(GridError::DuplicateId {
                kind: "branch",
                id: br.id,
            });
        }
        for end in [br.from_bus, br.to_bus] {
            if !bus_index.contains_key(&end) {
                return Err(GridError::UnknownBus(end));
            }
        }
        if br.from_bus == br.to_bus {
            return Err(GridError::SelfLoop {
                branch: br.id,
                bus: br.from_bus,
            });
        }
        if !(br.reactance.is_finite() && br.reactance > 0.0) {
            return Err(GridError::NonpositiveReactance {
                branch: br.id,
                reactance: br.reactance,
            });
        }
    }

    let Some(&slack_idx) = bus_index.get(&slack_bus) else {
        return Err(GridError::UnknownSlack(slack_bus));
    };

    let mut net = NetworkModel {
        buses,
        branches,
        slack_bus,
        mva_base,
        bus_index,
        branch_index,
    };

    let components = net.component_count(None);
    if components != 1 {
        return Err(GridError::DisconnectedGraph { components });
    }

    let mismatch: f64 = net.buses.iter().map(|b| b.injection).sum();
    if mismatch.abs() > REBALANCE_LIMIT_MW {
        return Err(GridError::Unbalanced {
            mismatch_mw: mismatch,
        });
    }
    net.buses[slack_idx].injection -= mismatch;
    Ok(net)
}

/// Take a branch out of service, refusing outages that island the grid.
pub fn apply_outage(net: &NetworkModel, branch: BranchId) -> Result<NetworkModel, GridError> {
    let idx = net.branch_position(branch)?;
    if !net.branches[idx].in_service {
        return Err(GridError::BranchOutOfService(branch));
    }
    if net.component_count(Some(idx)) != 1 {
        return Err(GridError::IslandingOutage(branch));
    }
    let mut out = net.clone();
    out.branches[idx].in_service = false;
    Ok(out)
}

impl NetworkModel {
    pub fn from_file(file: NetworkFile) -> Result<Self, GridError> {
        build_network(file.buses, file.branches, file.slack_bus, file.mva_base)
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            buses: self.buses.clone(),
            branches: self.branches.clone(),
            slack_bus: self.slack_bus,
            mva_base: self.mva_base,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network serializes")
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn slack_bus(&self) -> BusId {
        self.slack_bus
    }

    pub fn mva_base(&self) -> f64 {
        self.mva_base
    }

    pub fn bus(&self, id: BusId) -> Result<&Bus, GridError> {
        self.bus_index
            .get(&id)
            .map(|&i| &self.buses[i])
            .ok_or(GridError::UnknownBus(id))
    }

    pub fn branch(&self, id: BranchId) -> Result<&Branch, GridError> {
        self.branch_position(id).map(|i| &self.branches[i])
    }

    pub fn bus_position(&self, id: BusId) -> Result<usize, GridError> {
        self.bus_index
            .get(&id)
            .copied()
            .ok_or(GridError::UnknownBus(id))
    }

    pub fn branch_position(&self, id: BranchId) -> Result<usize, GridError> {
        self.branch_index
            .get(&id)
            .copied()
            .ok_or(GridError::UnknownBranch(id))
    }

    pub fn in_service(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.in_service)
    }

    pub fn monitored(&self) -> impl Iterator<Item = &Branch> {
        self.in_service().filter(|b| b.monitored)
    }

    /// Both terminal coordinates of a branch as `[lat, lon]` pairs.
    pub fn terminals(&self, id: BranchId) -> Result<[[f64; 2]; 2], GridError> {
        let br = self.branch(id)?;
        let a = self.bus(br.from_bus)?;
        let b = self.bus(br.to_bus)?;
        Ok([[a.lat, a.lon], [b.lat, b.lon]])
    }

    /// Copy of the model with the monitored flags replaced.
    pub fn with_monitored(&self, monitored: impl Fn(&Branch) -> bool) -> NetworkModel {
        let mut out = self.clone();
        for br in &mut out.branches {
            br.monitored = monitored(br);
        }
        out
    }

    /// Whether removing `branch` keeps the in-service graph connected.
    pub fn is_non_islanding(&self, branch: BranchId) -> bool {
        match self.branch_position(branch) {
            Ok(idx) => self.branches[idx].in_service && self.component_count(Some(idx)) == 1,
            Err(_) => false,
        }
    }

    /// In-service branches whose single outage leaves the grid connected.
    pub fn non_islanding_outages(&self) -> Vec<BranchId> {
        self.in_service()
            .map(|b| b.id)
            .filter(|&id| self.is_non_islanding(id))
            .collect()
    }

    /// Number of connected components of the in-service graph, optionally
    /// pretending one more branch (by position) is open.
    fn component_count(&self, skip: Option<usize>) -> usize {
        let n = self.buses.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for (pos, br) in self.branches.iter().enumerate() {
            if !br.in_service || Some(pos) == skip {
                continue;
            }
            let a = find(&mut parent, self.bus_index[&br.from_bus]);
            let b = find(&mut parent, self.bus_index[&br.to_bus]);
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components
    }
}

/// Signed MW flow per in-service branch, positive from `from` to `to`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchFlows {
    pub flows: BTreeMap<BranchId, f64>,
}

impl BranchFlows {
    pub fn get(&self, id: BranchId) -> Option<f64> {
        self.flows.get(&id).copied()
    }

    /// `post - pre` per branch; branches missing on one side count as zero flow.
    pub fn difference(post: &BranchFlows, pre: &BranchFlows) -> BranchFlows {
        let mut flows = BTreeMap::new();
        for (&id, &p) in &pre.flows {
            flows.insert(id, post.get(id).unwrap_or(0.0) - p);
        }
        for (&id, &p) in &post.flows {
            flows.entry(id).or_insert(p);
        }
        BranchFlows { flows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: BusId, injection: f64) -> Bus {
        Bus {
            id,
            lat: 42.0,
            lon: -72.0 + id as f64 * 0.1,
            injection,
        }
    }

    #[test]
    fn two_bus_network_is_valid() {
        let net = build_network(
            vec![bus(1, 100.0), bus(2, -100.0)],
            vec![Branch::new(1, 1, 2, 0.1)],
            1,
            100.0,
        )
        .unwrap();
        assert_eq!(net.buses().len(), 2);
        assert_eq!(net.slack_bus(), 1);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let err = build_network(
            vec![bus(1, 10.0), bus(2, -10.0), bus(3, 5.0), bus(4, -5.0)],
            vec![Branch::new(1, 1, 2, 0.1), Branch::new(2, 3, 4, 0.1)],
            1,
            100.0,
        )
        .unwrap_err();
        assert_eq!(err, GridError::DisconnectedGraph { components: 2 });
    }

    #[test]
    fn validation_errors() {
        let buses = || vec![bus(1, 0.0), bus(2, 0.0)];
        assert!(matches!(
            build_network(
                vec![bus(1, 0.0), bus(1, 0.0)],
                vec![Branch::new(1, 1, 1, 0.1)],
                1,
                100.0
            ),
            Err(GridError::DuplicateId { kind: "bus", .. })
        ));
        assert!(matches!(
            build_network(buses(), vec![Branch::new(1, 1, 2, 0.0)], 1, 100.0),
            Err(GridError::NonpositiveReactance { .. })
        ));
        assert!(matches!(
            build_network(buses(), vec![Branch::new(1, 1, 2, -0.2)], 1, 100.0),
            Err(GridError::NonpositiveReactance { .. })
        ));
        assert_eq!(
            build_network(buses(), vec![Branch::new(1, 1, 2, 0.1)], 7, 100.0).unwrap_err(),
            GridError::UnknownSlack(7)
        );
        assert_eq!(
            build_network(buses(), vec![Branch::new(1, 1, 9, 0.1)], 1, 100.0).unwrap_err(),
            GridError::UnknownBus(9)
        );
        assert!(matches!(
            build_network(
                buses(),
                vec![Branch::new(1, 1, 2, 0.1), Branch::new(1, 2, 1, 0.1)],
                1,
                100.0
            ),
            Err(GridError::DuplicateId { kind: "branch", .. })
        ));
        assert_eq!(
            build_network(vec![], vec![], 1, 100.0).unwrap_err(),
            GridError::EmptyNetwork
        );
        let mut far = bus(2, 0.0);
        far.lat = 91.0;
        assert!(matches!(
            build_network(
                vec![bus(1, 0.0), far],
                vec![Branch::new(1, 1, 2, 0.1)],
                1,
                100.0
            ),
            Err(GridError::InvalidCoordinate { bus: 2, .. })
        ));
    }

    #[test]
    fn small_mismatch_moves_to_slack() {
        let net = build_network(
            vec![bus(1, 100.0), bus(2, -100.0 + 5e-7)],
            vec![Branch::new(1, 1, 2, 0.1)],
            1,
            100.0,
        )
        .unwrap();
        let total: f64 = net.buses().iter().map(|b| b.injection).sum();
        assert!(total.abs() < 1e-9);
        assert!((net.bus(1).unwrap().injection - (100.0 - 5e-7)).abs() < 1e-12);
    }

    #[test]
    fn large_mismatch_rejected() {
        let err = build_network(
            vec![bus(1, 100.0), bus(2, -90.0)],
            vec![Branch::new(1, 1, 2, 0.1)],
            1,
            100.0,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Unbalanced { .. }));
    }

    #[test]
    fn outage_of_bridge_islands() {
        let net = build_network(
            vec![bus(1, 100.0), bus(2, -100.0)],
            vec![Branch::new(1, 1, 2, 0.1)],
            1,
            100.0,
        )
        .unwrap();
        assert_eq!(
            apply_outage(&net, 1).unwrap_err(),
            GridError::IslandingOutage(1)
        );
        assert_eq!(
            apply_outage(&net, 5).unwrap_err(),
            GridError::UnknownBranch(5)
        );
    }

    #[test]
    fn outage_marks_branch_and_rejects_repeat() {
        let net = build_network(
            vec![bus(1, 100.0), bus(2, -100.0)],
            vec![Branch::new(1, 1, 2, 0.1), Branch::new(2, 1, 2, 0.1)],
            1,
            100.0,
        )
        .unwrap();
        let post = apply_outage(&net, 1).unwrap();
        assert!(!post.branch(1).unwrap().in_service);
        assert_eq!(post.in_service().count(), 1);
        assert_eq!(
            apply_outage(&post, 1).unwrap_err(),
            GridError::BranchOutOfService(1)
        );
        // the remaining line is now a bridge
        assert_eq!(
            apply_outage(&post, 2).unwrap_err(),
            GridError::IslandingOutage(2)
        );
    }

    #[test]
    fn json_roundtrip_keeps_wire_names() {
        let text = r#"{
            "buses": [{"id": 1, "lat": 41.5, "lon": -72.5, "injection_mw": 50},
                      {"id": 2, "lat": 41.3, "lon": -72.9, "injection_mw": -50}],
            "branches": [{"id": 7, "from": 1, "to": 2, "reactance_pu": 0.05, "monitored": true}],
            "slack_bus": 1,
            "mva_base": 100
        }"#;
        let net = NetworkModel::from_json(text).unwrap();
        assert!(net.branch(7).unwrap().in_service);
        let back = NetworkModel::from_json(&net.to_json_pretty()).unwrap();
        assert_eq!(back, net);
        assert!(net.to_json_pretty().contains("\"reactance_pu\""));
    }
}
