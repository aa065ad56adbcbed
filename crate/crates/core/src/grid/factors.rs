//! Power transfer and line outage distribution factors.
//!
//! PTDF: share of a bus-to-bus transfer that shows up on each branch.
//! LODF: share of an outaged branch's pre-outage flow that moves onto each
//! remaining branch, obtained from the PTDF of a transfer between the
//! outaged branch's own terminals as `phi_k / (1 - phi_m)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::solver::DcSolver;
use super::{BranchFlows, BranchId, BusId, GridError, NetworkModel};

/// `phi_m` closer than this to one means the outaged branch is a bridge.
const BRIDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Transfer size in MW.
    pub amount: f64,
}

impl Transaction {
    pub fn new(from_bus: BusId, to_bus: BusId, amount: f64) -> Self {
        Self {
            from_bus,
            to_bus,
            amount,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorKind {
    Ptdf { transaction: Transaction },
    Lodf { outaged: BranchId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFactors {
    pub kind: FactorKind,
    pub values: BTreeMap<BranchId, f64>,
}

impl DistributionFactors {
    pub fn get(&self, id: BranchId) -> Option<f64> {
        self.values.get(&id).copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl DcSolver<'_> {
    pub fn ptdf(&self, transaction: &Transaction) -> Result<DistributionFactors, GridError> {
        let net = self.network();
        if transaction.from_bus == transaction.to_bus {
            return Err(GridError::InvalidTransaction(format!(
                "both ends at bus {}",
                transaction.from_bus
            )));
        }
        if !(transaction.amount.is_finite() && transaction.amount != 0.0) {
            return Err(GridError::InvalidTransaction(format!(
                "amount {} MW",
                transaction.amount
            )));
        }
        let src = net.bus_position(transaction.from_bus)?;
        let dst = net.bus_position(transaction.to_bus)?;
        let mut injections = vec![0.0; net.buses().len()];
        injections[src] = transaction.amount;
        injections[dst] = -transaction.amount;
        let flows = self.flows(&injections)?;
        let values = flows
            .flows
            .into_iter()
            .map(|(id, f)| (id, f / transaction.amount))
            .collect();
        Ok(DistributionFactors {
            kind: FactorKind::Ptdf {
                transaction: *transaction,
            },
            values,
        })
    }

    pub fn lodf(&self, outaged: BranchId) -> Result<DistributionFactors, GridError> {
        let net = self.network();
        let br = net.branch(outaged)?;
        if !br.in_service {
            return Err(GridError::BranchOutOfService(outaged));
        }
        if !net.is_non_islanding(outaged) {
            return Err(GridError::IslandingOutage(outaged));
        }
        let phi = self.ptdf(&Transaction::new(br.from_bus, br.to_bus, 1.0))?;
        let phi_m = phi.values[&outaged];
        let denom = 1.0 - phi_m;
        if denom.abs() <= BRIDGE_TOLERANCE {
            return Err(GridError::IslandingOutage(outaged));
        }
        let values = phi
            .values
            .into_iter()
            .filter(|&(id, _)| id != outaged)
            .map(|(id, phi_k)| (id, phi_k / denom))
            .collect();
        Ok(DistributionFactors {
            kind: FactorKind::Lodf { outaged },
            values,
        })
    }

    /// Flow change on every in-service branch after `outaged` trips, given
    /// the pre-outage flows.
    pub fn predicted_flow_change(
        &self,
        pre: &BranchFlows,
        outaged: BranchId,
    ) -> Result<BTreeMap<BranchId, f64>, GridError> {
        let zeta = self.lodf(outaged)?;
        let p_m = pre.get(outaged).ok_or(GridError::MissingFlow(outaged))?;
        let mut out: BTreeMap<BranchId, f64> =
            zeta.values.iter().map(|(&id, z)| (id, z * p_m)).collect();
        out.insert(outaged, -p_m);
        Ok(out)
    }
}

pub fn ptdf(
    net: &NetworkModel,
    transaction: &Transaction,
) -> Result<DistributionFactors, GridError> {
    DcSolver::new(net)?.ptdf(transaction)
}

pub fn lodf(net: &NetworkModel, outaged: BranchId) -> Result<DistributionFactors, GridError> {
    DcSolver::new(net)?.lodf(outaged)
}

pub fn predicted_flow_change(
    net: &NetworkModel,
    outaged: BranchId,
) -> Result<BTreeMap<BranchId, f64>, GridError> {
    let solver = DcSolver::new(net)?;
    let pre = solver.base_flows()?;
    solver.predicted_flow_change(&pre, outaged)
}

/// Signed MW leaving `bus` through in-service branches. Branches missing
/// from `flows` are an error.
pub fn net_outflow(net: &NetworkModel, flows: &BranchFlows, bus: BusId) -> Result<f64, GridError> {
    net.bus(bus)?;
    let mut out = 0.0;
    for br in net.in_service().filter(|b| b.touches(bus)) {
        let f = flows.get(br.id).ok_or(GridError::MissingFlow(br.id))?;
        if br.from_bus == bus {
            out += f;
        } else {
            out -= f;
        }
    }
    Ok(out)
}

/// `|injection - sum of signed incident flows|` at one bus, MW.
pub fn kcl_residual(net: &NetworkModel, flows: &BranchFlows, bus: BusId) -> Result<f64, GridError> {
    let injection = net.bus(bus)?.injection;
    Ok((injection - net_outflow(net, flows, bus)?).abs())
}
