use crate::dynamics::{q_beta_drift, q_log_z_drift};
use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::model::ModelParams;

use super::boundary::TailCoefficients;
use super::grid::{CoordMode, GridSpec, Layout};
use super::psi_drift;

/// Sparse approximation of `L - r` on the grid nodes.
///
/// Couplings to nodes outside the band are kept separately as Dirichlet
/// terms so that the operator can also be applied to arbitrary test
/// functions.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub layout: Layout,
    /// Couplings among grid nodes, including the `-r` on the diagonal.
    pub matrix: Csr,
    /// Dirichlet couplings of node `k` live in `bnd_ptr[k]..bnd_ptr[k+1]`.
    pub bnd_ptr: Vec<usize>,
    /// `(ln z, beta)` of each Dirichlet point.
    pub bnd_points: Vec<(f64, f64)>,
    pub bnd_coef: Vec<f64>,
    /// Nodes whose stencil has a negative off-diagonal weight or a
    /// non-negative diagonal.
    pub nonmonotone: Vec<usize>,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.layout.n_nodes
    }

    /// Dirichlet value at each coupling: `0` beyond `z_max`, the never-stop
    /// asymptote below `z_min`.
    pub fn dirichlet_values(&self, tail: &TailCoefficients) -> Vec<f64> {
        let mid = 0.5 * (self.layout.y_min + self.layout.y_max);
        self.bnd_points
            .iter()
            .map(|&(y, beta)| if y > mid { 0.0 } else { tail.g(y.exp(), beta) })
            .collect()
    }

    /// Per-node sum of Dirichlet contributions.
    pub fn dirichlet_rhs(&self, bvals: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|k| {
                (self.bnd_ptr[k]..self.bnd_ptr[k + 1])
                    .map(|m| self.bnd_coef[m] * bvals[m])
                    .sum()
            })
            .collect()
    }

    /// `L_h v` given node values and Dirichlet values.
    pub fn apply(&self, v: &[f64], bvals: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.matrix.mul_vec(v, &mut out);
        for (o, b) in out.iter_mut().zip(self.dirichlet_rhs(bvals)) {
            *o += b;
        }
        out
    }

    /// `L_h phi` for a test function `phi(z, beta)` sampled everywhere.
    pub fn apply_fn(&self, phi: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let lay = &self.layout;
        let mut v = Vec::with_capacity(self.n());
        for (j, row) in lay.rows.iter().enumerate() {
            for i in 0..row.len {
                v.push(phi(lay.y(j, i).exp(), row.beta));
            }
        }
        let b: Vec<f64> = self.bnd_points.iter().map(|&(y, beta)| phi(y.exp(), beta)).collect();
        self.apply(&v, &b)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Pos {
    j: usize,
    k: i64,
}

/// Assemble `L_h` for the given grid.
///
/// Characteristic mode: first-order upwind along `psi`; in beta a central
/// second difference and a drift difference that is central where that keeps
/// the stencil monotone and upwind otherwise. Edge rows in beta carry no
/// diffusion and an inward one-sided drift. Any non-monotone node is an error.
///
/// Direct mode: the same treatment of beta plus a three-point stencil in
/// `ln z` and a seven-point cross-derivative stencil oriented by the sign of
/// beta. Non-monotone nodes are only reported.
pub fn assemble_operator(grid: &GridSpec, p: &ModelParams) -> Result<DiscreteOperator> {
    let lay = Layout::new(grid, p)?;
    let n_beta = grid.n_beta;
    let d_beta = grid.d_beta();
    let dy = lay.dy;
    let sb2 = p.sigma_beta * p.sigma_beta;

    let mut rows = Vec::with_capacity(lay.n_nodes);
    let mut bnd_ptr = Vec::with_capacity(lay.n_nodes + 1);
    let mut bnd_points = Vec::new();
    let mut bnd_coef = Vec::new();
    let mut nonmonotone = Vec::new();
    bnd_ptr.push(0);

    let mut stencil: Vec<(Pos, f64)> = Vec::with_capacity(9);
    for (j, row) in lay.rows.iter().enumerate() {
        let beta = row.beta;
        let mu_b = q_beta_drift(p, beta);
        for i in 0..row.len {
            let k = row.k_start + i as i64;
            let here = Pos { j, k };
            stencil.clear();
            let mut diag = -p.r;
            let add = |s: &mut Vec<(Pos, f64)>, d: &mut f64, pos: Pos, c: f64| {
                s.push((pos, c));
                *d -= c;
            };

            // along the z-like axis
            match grid.mode {
                CoordMode::Characteristic => {
                    let mu = psi_drift(p, beta);
                    if mu > 0.0 {
                        add(&mut stencil, &mut diag, Pos { j, k: k + 1 }, mu / dy);
                    } else if mu < 0.0 {
                        add(&mut stencil, &mut diag, Pos { j, k: k - 1 }, -mu / dy);
                    }
                }
                CoordMode::Direct => {
                    let th2 = p.theta(beta).powi(2);
                    let mu = q_log_z_drift(p, beta);
                    let dif = 0.5 * th2 / (dy * dy);
                    let (mut lo, mut up) = (dif, dif);
                    if mu.abs() * dy <= th2 {
                        lo -= mu / (2.0 * dy);
                        up += mu / (2.0 * dy);
                    } else if mu > 0.0 {
                        up += mu / dy;
                    } else {
                        lo -= mu / dy;
                    }
                    add(&mut stencil, &mut diag, Pos { j, k: k - 1 }, lo);
                    add(&mut stencil, &mut diag, Pos { j, k: k + 1 }, up);
                }
            }

            // along beta
            if n_beta > 1 {
                let up = Pos { j: j + 1, k };
                if j == 0 {
                    add(&mut stencil, &mut diag, up, mu_b / d_beta);
                } else if j == n_beta - 1 {
                    add(&mut stencil, &mut diag, Pos { j: j - 1, k }, -mu_b / d_beta);
                } else {
                    let dn = Pos { j: j - 1, k };
                    let dif = 0.5 * sb2 / (d_beta * d_beta);
                    let (mut lo, mut hi) = (dif, dif);
                    if mu_b.abs() * d_beta <= sb2 {
                        lo -= mu_b / (2.0 * d_beta);
                        hi += mu_b / (2.0 * d_beta);
                    } else if mu_b > 0.0 {
                        hi += mu_b / d_beta;
                    } else {
                        lo -= mu_b / d_beta;
                    }
                    add(&mut stencil, &mut diag, dn, lo);
                    add(&mut stencil, &mut diag, up, hi);

                    if grid.mode == CoordMode::Direct {
                        let c = p.theta(beta) * p.sigma_beta / (2.0 * dy * d_beta);
                        let at = |dj: i64, dk: i64| Pos {
                            j: (j as i64 + dj) as usize,
                            k: k + dk,
                        };
                        if c > 0.0 {
                            // v_yb ~ [v(+,+) + v(-,-) + 2v - v(+,0) - v(-,0) - v(0,+) - v(0,-)] / (2 dy db)
                            for (dj, dk, w) in [
                                (1, 1, 1.0),
                                (-1, -1, 1.0),
                                (0, 1, -1.0),
                                (0, -1, -1.0),
                                (1, 0, -1.0),
                                (-1, 0, -1.0),
                            ] {
                                add(&mut stencil, &mut diag, at(dj, dk), c * w);
                            }
                        } else if c < 0.0 {
                            // v_yb ~ [v(+,0) + v(-,0) + v(0,+) + v(0,-) - v(+,-) - v(-,+) - 2v] / (2 dy db)
                            for (dj, dk, w) in [
                                (1, -1, -1.0),
                                (-1, 1, -1.0),
                                (0, 1, 1.0),
                                (0, -1, 1.0),
                                (1, 0, 1.0),
                                (-1, 0, 1.0),
                            ] {
                                add(&mut stencil, &mut diag, at(dj, dk), c * w);
                            }
                        }
                    }
                }
            }

            // merge duplicate neighbours, then split into grid / Dirichlet couplings
            stencil.sort_by(|a, b| a.0.cmp(&b.0));
            let node = rows.len();
            let mut entries = vec![(node, 0.0)];
            let mut monotone = true;
            let mut idx = 0;
            while idx < stencil.len() {
                let pos = stencil[idx].0;
                let mut c = 0.0;
                while idx < stencil.len() && stencil[idx].0 == pos {
                    c += stencil[idx].1;
                    idx += 1;
                }
                if pos == here {
                    diag += c;
                    continue;
                }
                if c < -1e-12 * (1.0 + diag.abs()) {
                    monotone = false;
                }
                match lay.index(pos.j, pos.k) {
                    Some(col) => entries.push((col, c)),
                    None => {
                        bnd_points.push((lay.y_lattice(pos.j, pos.k), lay.rows[pos.j].beta));
                        bnd_coef.push(c);
                    }
                }
            }
            entries[0].1 = diag;
            if !(diag < 0.0) {
                monotone = false;
            }
            if !monotone {
                nonmonotone.push(node);
            }
            rows.push(entries);
            bnd_ptr.push(bnd_coef.len());
        }
    }

    if grid.mode == CoordMode::Characteristic && !nonmonotone.is_empty() {
        return Err(Error::NonMonotone {
            count: nonmonotone.len(),
            first: nonmonotone[0],
        });
    }
    Ok(DiscreteOperator {
        layout: lay,
        matrix: Csr::from_rows(rows),
        bnd_ptr,
        bnd_points,
        bnd_coef,
        nonmonotone,
    })
}
