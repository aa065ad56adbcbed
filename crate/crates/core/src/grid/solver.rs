use std::collections::BTreeMap;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::{BranchFlows, GridError, NetworkModel};

/// Smallest accepted squared Cholesky pivot relative to the largest diagonal
/// entry of the reduced susceptance matrix.
const PIVOT_RATIO: f64 = 1e-14;

/// Factorized reduced susceptance matrix of one network state.
///
/// The slack row and column are dropped, so the factor is positive definite
/// for any connected network with positive reactances. One factorization
/// serves any number of injection patterns (power flow, PTDF columns).
pub struct DcSolver<'a> {
    net: &'a NetworkModel,
    /// Bus position -> reduced row, `None` for the slack.
    reduced: Vec<Option<usize>>,
    factor: Option<CscCholesky<f64>>,
}

impl<'a> DcSolver<'a> {
    pub fn new(net: &'a NetworkModel) -> Result<Self, GridError> {
        let slack = net.bus_position(net.slack_bus())?;
        let mut reduced = Vec::with_capacity(net.buses().len());
        let mut next = 0;
        for pos in 0..net.buses().len() {
            if pos == slack {
                reduced.push(None);
            } else {
                reduced.push(Some(next));
                next += 1;
            }
        }
        let dim = next;
        if dim == 0 {
            return Ok(Self {
                net,
                reduced,
                factor: None,
            });
        }

        let mut coo = CooMatrix::new(dim, dim);
        let mut max_diag = vec![0.0f64; dim];
        for br in net.in_service() {
            let b = 1.0 / br.reactance;
            let i = reduced[net.bus_position(br.from_bus)?];
            let j = reduced[net.bus_position(br.to_bus)?];
            if let Some(i) = i {
                coo.push(i, i, b);
                max_diag[i] += b;
            }
            if let Some(j) = j {
                coo.push(j, j, b);
                max_diag[j] += b;
            }
            if let (Some(i), Some(j)) = (i, j) {
                coo.push(i, j, -b);
                coo.push(j, i, -b);
            }
        }
        let csc = CscMatrix::from(&coo);
        let factor = CscCholesky::factor(&csc).map_err(|_| GridError::SingularSystem)?;

        let scale = max_diag.iter().cloned().fold(0.0, f64::max);
        let l = factor.l();
        for k in 0..dim {
            let col = l.col(k);
            let diag = col
                .row_indices()
                .iter()
                .zip(col.values())
                .find(|(&r, _)| r == k)
                .map(|(_, &v)| v)
                .unwrap_or(0.0);
            if diag.is_nan() || diag * diag <= PIVOT_RATIO * scale {
                return Err(GridError::SingularSystem);
            }
        }

        Ok(Self {
            net,
            reduced,
            factor: Some(factor),
        })
    }

    pub fn network(&self) -> &NetworkModel {
        self.net
    }

    /// Bus voltage angles (radians, slack = 0) for per-bus injections in MW,
    /// ordered like [`NetworkModel::buses`].
    pub fn angles(&self, injections_mw: &[f64]) -> Result<Vec<f64>, GridError> {
        let base = self.net.mva_base();
        let mut angles = vec![0.0; self.reduced.len()];
        let Some(factor) = &self.factor else {
            return Ok(angles);
        };
        let dim = factor.l().nrows();
        let mut rhs = DMatrix::zeros(dim, 1);
        for (pos, r) in self.reduced.iter().enumerate() {
            if let Some(r) = r {
                rhs[(*r, 0)] = injections_mw[pos] / base;
            }
        }
        let theta = factor.solve(&rhs);
        for (pos, r) in self.reduced.iter().enumerate() {
            if let Some(r) = r {
                let v = theta[(*r, 0)];
                if !v.is_finite() {
                    return Err(GridError::SingularSystem);
                }
                angles[pos] = v;
            }
        }
        Ok(angles)
    }

    /// In-service branch flows in MW for the given bus angles.
    pub fn flows_from_angles(&self, angles: &[f64]) -> Result<BranchFlows, GridError> {
        let base = self.net.mva_base();
        let mut flows = BTreeMap::new();
        for br in self.net.in_service() {
            let i = self.net.bus_position(br.from_bus)?;
            let j = self.net.bus_position(br.to_bus)?;
            flows.insert(br.id, (angles[i] - angles[j]) / br.reactance * base);
        }
        Ok(BranchFlows { flows })
    }

    pub fn flows(&self, injections_mw: &[f64]) -> Result<BranchFlows, GridError> {
        let angles = self.angles(injections_mw)?;
        self.flows_from_angles(&angles)
    }

    /// Base-case flows using the bus injections stored in the model.
    pub fn base_flows(&self) -> Result<BranchFlows, GridError> {
        let injections: Vec<f64> = self.net.buses().iter().map(|b| b.injection).collect();
        self.flows(&injections)
    }
}

/// Lossless DC power flow for the model's own injections.
pub fn dc_power_flow(net: &NetworkModel) -> Result<BranchFlows, GridError> {
    DcSolver::new(net)?.base_flows()
}
