//! Free boundary, dual value `Vtilde(z, beta) = int_0^z v(y, beta) dy`, its
//! derivatives, and inversion of the marginal `v(zhat, beta) = -x`.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::vi::ValueSurface;

/// Sampled free boundary `beta -> z*(beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundary {
    pub beta_nodes: Vec<f64>,
    /// `+inf` marks a row without any stopping node.
    pub z_star: Vec<f64>,
    /// Rows that carry the `+inf` sentinel.
    pub unbounded_rows: Vec<usize>,
}

impl FreeBoundary {
    /// Piecewise linear in beta, clamped outside the nodes.
    pub fn at(&self, beta: f64) -> f64 {
        let n = self.beta_nodes.len();
        if n == 1 || beta <= self.beta_nodes[0] {
            return self.z_star[0];
        }
        if beta >= self.beta_nodes[n - 1] {
            return self.z_star[n - 1];
        }
        let d = self.beta_nodes[1] - self.beta_nodes[0];
        let s = (beta - self.beta_nodes[0]) / d;
        let j = (s.floor() as usize).min(n - 2);
        let w = s - j as f64;
        self.z_star[j] * (1.0 - w) + self.z_star[j + 1] * w
    }

    /// CSV rows `beta, z_star`.
    pub fn csv_rows(&self) -> Vec<[f64; 2]> {
        self.beta_nodes.iter().zip(&self.z_star).map(|(&b, &z)| [b, z]).collect()
    }

    /// Largest finite boundary value.
    pub fn max_finite(&self) -> f64 {
        self.z_star.iter().copied().filter(|z| z.is_finite()).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.z_star.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Per row: the first stopping node, refined inside the crossing cell.
///
/// Near the boundary `v` behaves like `-(z* - z)^2` (smooth fit), so `sqrt(-v)`
/// is extrapolated linearly from the last two continuation nodes. The
/// discrete stopping decision can fall up to a cell short of the continuous
/// boundary, so the root may land at most one cell past the first stopping node.
pub fn extract_boundary(surface: &ValueSurface) -> Result<FreeBoundary> {
    if let Some(&row) = surface.single_crossing_failures().first() {
        return Err(Error::NotSingleCrossing { row });
    }
    let mut beta_nodes = Vec::with_capacity(surface.n_rows());
    let mut z_star = Vec::with_capacity(surface.n_rows());
    let mut unbounded_rows = Vec::new();
    for j in 0..surface.n_rows() {
        beta_nodes.push(surface.row_beta(j));
        let Some(ia) = surface.first_active(j) else {
            z_star.push(f64::INFINITY);
            unbounded_rows.push(j);
            continue;
        };
        let za = surface.node_z(j, ia);
        let z_cap = za * surface.layout.dy.exp();
        if ia < 2 {
            z_star.push(za);
            continue;
        }
        let v = surface.row_v(j);
        let (s1, s2) = ((-v[ia - 1]).max(0.0).sqrt(), (-v[ia - 2]).max(0.0).sqrt());
        let (z1, z2) = (surface.node_z(j, ia - 1), surface.node_z(j, ia - 2));
        let root = if s2 > s1 { z1 + s1 * (z1 - z2) / (s2 - s1) } else { za };
        z_star.push(root.clamp(z1, z_cap));
    }
    Ok(FreeBoundary {
        beta_nodes,
        z_star,
        unbounded_rows,
    })
}

/// Common query interface of the numerical dual surface and the frozen-factor
/// closed form.
pub trait DualValue: Sync {
    fn params(&self) -> &ModelParams;
    fn v(&self, z: f64, beta: f64) -> f64;
    fn v_z(&self, z: f64, beta: f64) -> f64;
    fn v_beta(&self, z: f64, beta: f64) -> f64;
    fn v_tilde(&self, z: f64, beta: f64) -> f64;
    fn z_star(&self, beta: f64) -> f64;
    /// The never-stop tail coefficient `h(beta)` (`v <= ell/r - z^(-1/gamma) h`).
    fn tail_h(&self, beta: f64) -> f64;
    /// A point where `v = 0` is known to hold, bracketing inversions from above.
    fn upper_bracket(&self, beta: f64) -> f64;
    /// Largest dual state the representation covers.
    fn z_limit(&self) -> f64;
    /// Largest finite boundary value over all factor levels.
    fn z_star_sup(&self) -> f64;

    /// Root `zhat` of `v(zhat, beta) = -x`, strictly below the boundary.
    ///
    /// The lower bracket comes from `v <= g`: at `z = ((x + ell/r)/h)^(-gamma)`
    /// the never-stop value already equals `-x`.
    fn invert_marginal(&self, x: f64, beta: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("wealth must be positive, got {x}")));
        }
        let p = self.params();
        let mut lo = ((x + p.ell / p.r) / self.tail_h(beta)).powf(-p.gamma);
        let mut expansions = 0;
        while self.v(lo, beta) + x > 0.0 {
            lo *= 0.5;
            expansions += 1;
            if expansions > 200 {
                return Err(Error::Bracket(format!(
                    "no lower bracket for x = {x}, beta = {beta}"
                )));
            }
        }
        let mut hi = self.upper_bracket(beta);
        if !(self.v(hi, beta) + x > 0.0) || !(hi > lo) {
            return Err(Error::Bracket(format!(
                "bad upper bracket for x = {x}, beta = {beta}: v({hi}) = {}",
                self.v(hi, beta)
            )));
        }
        let (mut a, mut b) = (lo.ln(), hi.ln());
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.v(m.exp(), beta) + x > 0.0 {
                b = m;
            } else {
                a = m;
            }
            if b - a < 1e-14 {
                break;
            }
        }
        hi = (0.5 * (a + b)).exp();
        Ok(hi)
    }
}

/// Numerical dual surface.
#[derive(Debug, Clone)]
pub struct DualSurface {
    pub surface: ValueSurface,
    pub boundary: FreeBoundary,
    /// `Vtilde` per node.
    pub v_tilde: Vec<f64>,
    /// `dv/dz` per node.
    pub v_z: Vec<f64>,
    /// `dv/dbeta` at fixed `z` per node.
    pub v_beta: Vec<f64>,
}

/// Quadratic interpolation of row `j` at `ln z = y` where three nodes are
/// available, the surface's own rule otherwise.
fn row_value_quadratic(s: &ValueSurface, j: usize, y: f64) -> f64 {
    let row = s.row_v(j);
    match s.row_position(j, y) {
        Some((i, w)) if row.len() >= 3 && i + 1 < row.len() => {
            // nodes i-1, i, i+1 (or i, i+1, i+2 at the lower end)
            let (c, t) = if i == 0 { (1, w - 1.0) } else { (i, w) };
            let (a, b, d) = (row[c - 1], row[c], row[c + 1]);
            b + 0.5 * t * (d - a) + 0.5 * t * t * (d - 2.0 * b + a)
        }
        _ => s.row_value(j, y),
    }
}

/// Node-wise `(v_z, v_beta)`.
///
/// `v_z`: central differences in `ln z`; within two cells of the boundary a
/// second-order backward difference so the flat stopping region does not
/// leak into the stencil. Zero on stopping nodes.
///
/// `v_beta` at fixed `z`: neighbouring rows are sampled at the node's `z` by
/// quadratic interpolation; central where both neighbours are in the
/// continuation region, one-sided towards the continuation side otherwise.
pub fn differentiate_surface(s: &ValueSurface) -> (Vec<f64>, Vec<f64>) {
    let n = s.v.len();
    let mut vz = vec![0.0; n];
    let mut vb = vec![0.0; n];
    let dy = s.layout.dy;
    let nr = s.n_rows();
    let db = s.grid().d_beta();
    for j in 0..nr {
        let row = s.row_v(j);
        let act = s.row_active(j);
        let off = s.layout.rows[j].offset;
        let ia = s.first_active(j).unwrap_or(row.len());
        for i in 0..row.len() {
            if act[i] {
                continue;
            }
            let vy = if i >= 2 && i + 2 >= ia {
                (3.0 * row[i] - 4.0 * row[i - 1] + row[i - 2]) / (2.0 * dy)
            } else if i == 0 {
                if row.len() >= 3 {
                    (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * dy)
                } else {
                    (row[1] - row[0]) / dy
                }
            } else if i + 1 < row.len() {
                (row[i + 1] - row[i - 1]) / (2.0 * dy)
            } else {
                (row[i] - row[i - 1]) / dy
            };
            vz[off + i] = vy / s.node_z(j, i);

            if nr < 3 {
                continue;
            }
            let y = s.layout.y(j, i);
            let at = |jj: usize| row_value_quadratic(s, jj, y);
            let here = row[i];
            let up_ok = j + 1 < nr && at(j + 1) < 0.0;
            let dn_ok = j >= 1 && at(j - 1) < 0.0;
            vb[off + i] = if up_ok && dn_ok {
                (at(j + 1) - at(j - 1)) / (2.0 * db)
            } else if dn_ok {
                if j >= 2 && at(j - 2) < 0.0 {
                    (3.0 * here - 4.0 * at(j - 1) + at(j - 2)) / (2.0 * db)
                } else {
                    (here - at(j - 1)) / db
                }
            } else if up_ok {
                if j + 2 < nr && at(j + 2) < 0.0 {
                    (-3.0 * here + 4.0 * at(j + 1) - at(j + 2)) / (2.0 * db)
                } else {
                    (at(j + 1) - here) / db
                }
            } else if j + 1 < nr && j >= 1 {
                (at(j + 1) - at(j - 1)) / (2.0 * db)
            } else if j + 1 < nr {
                (at(j + 1) - here) / db
            } else {
                (here - at(j - 1)) / db
            };
        }
    }
    (vz, vb)
}

/// Build the dual surface: boundary, derivatives, and the cumulative
/// trapezoid integral of `v` in `z` plus the closed-form tail below `z_min`.
pub fn integrate_dual_value(surface: ValueSurface) -> Result<DualSurface> {
    let p = surface.params;
    if !(p.gamma > 1.0) {
        return Err(Error::InvalidParams("tail integral needs gamma > 1".into()));
    }
    let boundary = extract_boundary(&surface)?;
    let (v_z, v_beta) = differentiate_surface(&surface);
    let mut v_tilde = vec![0.0; surface.v.len()];
    for j in 0..surface.n_rows() {
        let off = surface.layout.rows[j].offset;
        let row = surface.row_v(j);
        let beta = surface.row_beta(j);
        let z0 = surface.node_z(j, 0);
        let mut acc = surface.tail.g_integral(z0, beta) + surface.row_offset(j) * z0;
        v_tilde[off] = acc;
        for i in 1..row.len() {
            let dz = surface.node_z(j, i) - surface.node_z(j, i - 1);
            acc += 0.5 * (row[i] + row[i - 1]) * dz;
            v_tilde[off + i] = acc;
        }
    }
    Ok(DualSurface {
        surface,
        boundary,
        v_tilde,
        v_z,
        v_beta,
    })
}

impl DualSurface {
    pub fn solve(grid: &crate::vi::GridSpec, p: &ModelParams, opts: &crate::vi::SolverOptions) -> Result<Self> {
        integrate_dual_value(crate::vi::solve_vi(grid, p, opts)?)
    }

    /// Row-wise linear interpolation of a node field in `ln z`, with the given
    /// fallbacks below and above the row.
    fn row_field(&self, field: &[f64], j: usize, y: f64, below: impl Fn() -> f64) -> f64 {
        let r = &self.surface.layout.rows[j];
        let row = &field[r.offset..r.offset + r.len];
        match self.surface.row_position(j, y) {
            None => below(),
            Some((i, _)) if i + 1 >= row.len() => 0.0,
            Some((i, w)) => row[i] + w * (row[i + 1] - row[i]),
        }
    }

    fn blend(&self, beta: f64, f: impl Fn(usize) -> f64) -> f64 {
        let (j0, j1, w) = self.surface.beta_weights(beta);
        let a = f(j0);
        if w == 0.0 {
            a
        } else {
            a + w * (f(j1) - a)
        }
    }

    fn row_tilde(&self, j: usize, z: f64) -> f64 {
        let s = &self.surface;
        let y = z.ln();
        let r = &s.layout.rows[j];
        let beta = r.beta;
        match s.row_position(j, y) {
            None => s.tail.g_integral(z, beta) + s.row_offset(j) * z,
            Some((i, _)) => {
                let zi = s.node_z(j, i);
                let vi = s.v[r.offset + i];
                self.v_tilde[r.offset + i] + 0.5 * (vi + s.row_value(j, y)) * (z - zi)
            }
        }
    }

    /// Dual CSV rows: `z, beta, v, v_tilde, v_z, v_beta`.
    pub fn csv_rows(&self) -> Vec<[f64; 6]> {
        let s = &self.surface;
        let mut out = Vec::with_capacity(s.v.len());
        for (j, r) in s.layout.rows.iter().enumerate() {
            for i in 0..r.len {
                let k = r.offset + i;
                out.push([s.node_z(j, i), r.beta, s.v[k], self.v_tilde[k], self.v_z[k], self.v_beta[k]]);
            }
        }
        out
    }
}

impl DualValue for DualSurface {
    fn params(&self) -> &ModelParams {
        &self.surface.params
    }

    fn v(&self, z: f64, beta: f64) -> f64 {
        self.surface.value(z, beta)
    }

    fn v_z(&self, z: f64, beta: f64) -> f64 {
        let y = z.ln();
        let s = &self.surface;
        self.blend(beta, |j| {
            self.row_field(&self.v_z, j, y, || s.tail.g_z(z, s.row_beta(j)))
        })
    }

    fn v_beta(&self, z: f64, beta: f64) -> f64 {
        let y = z.ln();
        let s = &self.surface;
        self.blend(beta, |j| {
            self.row_field(&self.v_beta, j, y, || s.tail.g_beta(z, s.row_beta(j)))
        })
    }

    fn v_tilde(&self, z: f64, beta: f64) -> f64 {
        self.blend(beta, |j| self.row_tilde(j, z))
    }

    fn z_star(&self, beta: f64) -> f64 {
        self.boundary.at(beta)
    }

    fn tail_h(&self, beta: f64) -> f64 {
        self.surface.tail.h(beta)
    }

    fn upper_bracket(&self, _beta: f64) -> f64 {
        self.surface.grid().z_max
    }

    fn z_limit(&self) -> f64 {
        self.surface.grid().z_max
    }
    fn z_star_sup(&self) -> f64 {
        self.boundary.max_finite()
    }
}
