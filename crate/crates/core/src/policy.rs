//! Primal feedback policies read off the dual surface.
//!
//! For wealth `x` at factor level `beta` the dual state is `zhat` with
//! `v(zhat, beta) = -x`. Then:
//!
//! * consumption is `zhat^(-1/gamma)`;
//! * the risky position is `(beta/sigma^2) zhat v_z + (sigma_beta/sigma) v_beta`;
//! * the primal value is `Vtilde(zhat, beta) + zhat x`.

use crate::dual::DualValue;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;

/// Wealth carried by dual state `z`: `x = -v(z, beta)`.
pub fn wealth_from_dual<D: DualValue + ?Sized>(z: f64, beta: f64, dual: &D) -> f64 {
    -dual.v(z, beta)
}

/// Optimal consumption at wealth `x`.
pub fn consumption_policy<D: DualValue + ?Sized>(x: f64, beta: f64, dual: &D) -> Result<f64> {
    let z = dual.invert_marginal(x, beta)?;
    Ok(z.powf(-1.0 / dual.params().gamma))
}

/// Risky position at a given dual state.
pub fn investment_at<D: DualValue + ?Sized>(z: f64, beta: f64, dual: &D) -> f64 {
    let p = dual.params();
    beta / (p.sigma * p.sigma) * z * dual.v_z(z, beta) + p.sigma_beta / p.sigma * dual.v_beta(z, beta)
}

/// Optimal risky position (amount invested) at wealth `x`.
pub fn investment_policy<D: DualValue + ?Sized>(x: f64, beta: f64, dual: &D) -> Result<f64> {
    let z = dual.invert_marginal(x, beta)?;
    Ok(investment_at(z, beta, dual))
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCell {
    pub z_hat: f64,
    pub c_star: f64,
    pub pi_star: f64,
    /// Primal value `Vtilde(zhat, beta) + zhat x`.
    pub value: f64,
    /// Set when the cell could not be evaluated; numeric fields are NaN then.
    pub error: Option<String>,
}

impl PolicyCell {
    fn failed(e: Error) -> Self {
        Self {
            z_hat: f64::NAN,
            c_star: f64::NAN,
            pi_star: f64::NAN,
            value: f64::NAN,
            error: Some(e.to_string()),
        }
    }
}

/// Which policy column a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Consumption,
    Investment,
}

/// Policies on a wealth grid for several factor levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub x_nodes: Vec<f64>,
    pub beta_values: Vec<f64>,
    /// `cells[k][i]`: factor level `k`, wealth node `i`.
    pub cells: Vec<Vec<PolicyCell>>,
}

/// Evaluate the policies cell by cell. Cell failures are recorded, not returned.
pub fn build_policy_table<D: DualValue + ?Sized>(x_grid: &[f64], betas: &[f64], dual: &D) -> PolicyTable {
    let nx = x_grid.len();
    let flat = map_indexed(nx * betas.len(), |c| {
        let (beta, x) = (betas[c / nx], x_grid[c % nx]);
        match dual.invert_marginal(x, beta) {
            Ok(z) => PolicyCell {
                z_hat: z,
                c_star: z.powf(-1.0 / dual.params().gamma),
                pi_star: investment_at(z, beta, dual),
                value: dual.v_tilde(z, beta) + z * x,
                error: None,
            },
            Err(e) => PolicyCell::failed(e),
        }
    });
    let mut it = flat.into_iter();
    let cells = (0..betas.len()).map(|_| it.by_ref().take(nx).collect()).collect();
    PolicyTable {
        x_nodes: x_grid.to_vec(),
        beta_values: betas.to_vec(),
        cells,
    }
}

/// `n` wealth nodes evenly spaced on `[lo, hi]`.
pub fn wealth_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl PolicyTable {
    pub fn column(&self, k: usize, col: Column) -> Vec<f64> {
        self.cells[k]
            .iter()
            .map(|c| match col {
                Column::Consumption => c.c_star,
                Column::Investment => c.pi_star,
            })
            .collect()
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.error.is_some()).count()
    }

    /// Per factor level, the number of wealth steps where `col` fails to
    /// increase strictly.
    pub fn x_monotonicity_violations(&self, col: Column) -> Vec<usize> {
        (0..self.beta_values.len())
            .map(|k| self.column(k, col).windows(2).filter(|w| !(w[1] > w[0])).count())
            .collect()
    }

    /// Per wealth node, whether `col` increases strictly along the factor levels
    /// as listed. Returns the number of wealth nodes where it does not.
    pub fn beta_ordering_violations(&self, col: Column) -> usize {
        let cols: Vec<Vec<f64>> = (0..self.beta_values.len()).map(|k| self.column(k, col)).collect();
        (0..self.x_nodes.len())
            .filter(|&i| cols.windows(2).any(|w| !(w[1][i] > w[0][i])))
            .count()
    }

    /// Wealth levels where the sign of `col[k1] - col[k0]` changes, by
    /// linear interpolation between nodes.
    pub fn crossovers(&self, k0: usize, k1: usize, col: Column) -> Vec<f64> {
        let (a, b) = (self.column(k0, col), self.column(k1, col));
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        let mut out = Vec::new();
        for i in 0..d.len().saturating_sub(1) {
            if d[i] == 0.0 && i > 0 {
                continue;
            }
            if d[i] * d[i + 1] < 0.0 || (d[i + 1] == 0.0 && i + 2 < d.len() && d[i] * d[i + 2] < 0.0) {
                let w = d[i] / (d[i] - d[i + 1]);
                out.push(self.x_nodes[i] + w * (self.x_nodes[i + 1] - self.x_nodes[i]));
            }
        }
        out
    }

    /// CSV rows `x, beta, z_hat, c_star, pi_star, V`.
    pub fn csv_rows(&self) -> Vec<[f64; 6]> {
        let mut rows = Vec::with_capacity(self.x_nodes.len() * self.beta_values.len());
        for (k, &beta) in self.beta_values.iter().enumerate() {
            for (i, &x) in self.x_nodes.iter().enumerate() {
                let c = &self.cells[k][i];
                rows.push([x, beta, c.z_hat, c.c_star, c.pi_star, c.value]);
            }
        }
        rows
    }
}

/// Number of wealth nodes where `col` of `high` fails to exceed that of
/// `low`, for tables on the same grid (factor level `k` in each).
pub fn dominance_violations(low: &PolicyTable, high: &PolicyTable, k: usize, col: Column) -> Result<usize> {
    if low.x_nodes != high.x_nodes {
        return Err(Error::Domain("tables use different wealth grids".into()));
    }
    let (a, b) = (low.column(k, col), high.column(k, col));
    Ok(a.iter().zip(&b).filter(|(x, y)| !(y > x)).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::oracle::ConstBetaSolution;

    fn closed() -> ConstBetaSolution {
        ConstBetaSolution::at_beta_bar(&ModelParams::reference().constant_beta()).unwrap()
    }

    #[test]
    fn zero_wealth_limit_is_boundary_consumption() {
        let s = closed();
        let c = consumption_policy(1e-9, s.beta, &s).unwrap();
        let floor = s.z_star_1d.powf(-1.0 / s.params.gamma);
        assert!((c - floor).abs() < 1e-3 * floor);
        assert!(c > 0.0);
        let pi = investment_policy(1e-9, s.beta, &s).unwrap();
        assert!(pi.abs() < 1e-3);
    }

    #[test]
    fn wealth_round_trip() {
        let s = closed();
        for x in [0.3, 1.0, 4.0] {
            let z = s.invert_marginal(x, s.beta).unwrap();
            assert!((wealth_from_dual(z, s.beta, &s) - x).abs() < 1e-10);
        }
        assert_eq!(wealth_from_dual(2.0 * s.z_star_1d, s.beta, &s), 0.0);
        assert!(wealth_from_dual(1e-8, s.beta, &s) > 1e3);
    }

    #[test]
    fn frozen_factor_table_is_increasing() {
        let s = closed();
        let t = build_policy_table(&wealth_grid(0.1, 10.0, 50), &[s.beta], &s);
        assert_eq!(t.failed_cells(), 0);
        assert_eq!(t.x_monotonicity_violations(Column::Consumption), vec![0]);
        assert_eq!(t.x_monotonicity_violations(Column::Investment), vec![0]);
        for c in &t.cells[0] {
            assert!(c.c_star > 0.0 && c.value < 0.0 && c.z_hat < s.z_star_1d);
        }
    }

    #[test]
    fn single_cell_matches_direct_calls() {
        let s = closed();
        let t = build_policy_table(&[2.0], &[s.beta], &s);
        let c = &t.cells[0][0];
        assert_eq!(c.c_star, consumption_policy(2.0, s.beta, &s).unwrap());
        assert_eq!(c.pi_star, investment_policy(2.0, s.beta, &s).unwrap());
    }

    #[test]
    fn primal_value_is_the_dual_infimum() {
        let s = closed();
        let x = 1.5;
        let t = build_policy_table(&[x], &[s.beta], &s);
        let v = t.cells[0][0].value;
        for k in 0..40 {
            let z = 0.05 * (s.z_star_1d * 2.0 / 0.05).powf(k as f64 / 39.0);
            assert!(s.value_tilde(z) + z * x >= v - 1e-9);
        }
    }

    #[test]
    fn bad_cells_are_recorded() {
        let s = closed();
        let t = build_policy_table(&[-1.0, 1.0], &[s.beta], &s);
        assert_eq!(t.failed_cells(), 1);
        assert!(t.cells[0][0].c_star.is_nan());
    }

    #[test]
    fn crossover_detection() {
        let t = PolicyTable {
            x_nodes: vec![0.0, 1.0, 2.0, 3.0],
            beta_values: vec![0.0, 1.0],
            cells: [[1.0, 1.0, 1.0, 1.0], [0.5, 0.9, 1.1, 1.5]]
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&c| PolicyCell {
                            z_hat: 1.0,
                            c_star: c,
                            pi_star: 0.0,
                            value: -1.0,
                            error: None,
                        })
                        .collect()
                })
                .collect(),
        };
        let x = t.crossovers(0, 1, Column::Consumption);
        assert_eq!(x.len(), 1);
        assert!((x[0] - 1.5).abs() < 1e-12);
    }
}
