use crate::model::ModelParams;

use super::boundary::TailCoefficients;
use super::grid::{GridSpec, Layout};
use super::solve::SolveDiagnostics;

/// Solved stopping value on the grid.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub params: ModelParams,
    pub layout: Layout,
    /// Small-`z` asymptote used below the grid.
    pub tail: TailCoefficients,
    /// `v` per node (row-major in beta), `<= 0`.
    pub v: Vec<f64>,
    /// Stopping flag per node.
    pub active: Vec<bool>,
    /// `L_h v + f` per node: `>= 0` on stopping nodes, `~0` elsewhere.
    pub residual: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
    /// Per row, `v - g` at the first node (continuity offset below the grid).
    offsets: Vec<f64>,
}

impl ValueSurface {
    pub(crate) fn new(
        params: ModelParams,
        layout: Layout,
        tail: TailCoefficients,
        v: Vec<f64>,
        active: Vec<bool>,
        residual: Vec<f64>,
        diagnostics: SolveDiagnostics,
    ) -> Self {
        let offsets = layout
            .rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                if r.len == 0 {
                    0.0
                } else {
                    v[r.offset] - tail.g(layout.y(j, 0).exp(), r.beta)
                }
            })
            .collect();
        Self {
            params,
            layout,
            tail,
            v,
            active,
            residual,
            diagnostics,
            offsets,
        }
    }

    /// Surface CSV rows `z, beta, v, active, residual`.
    pub fn csv_rows(&self) -> Vec<[f64; 5]> {
        let mut out = Vec::with_capacity(self.v.len());
        for (j, r) in self.layout.rows.iter().enumerate() {
            for i in 0..r.len {
                let k = r.offset + i;
                let flag = if self.active[k] { 1.0 } else { 0.0 };
                out.push([self.node_z(j, i), r.beta, self.v[k], flag, self.residual[k]]);
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.layout.spec
    }

    pub fn n_rows(&self) -> usize {
        self.layout.rows.len()
    }

    pub fn row_beta(&self, j: usize) -> f64 {
        self.layout.rows[j].beta
    }

    pub fn row_v(&self, j: usize) -> &[f64] {
        let r = &self.layout.rows[j];
        &self.v[r.offset..r.offset + r.len]
    }

    pub fn row_active(&self, j: usize) -> &[bool] {
        let r = &self.layout.rows[j];
        &self.active[r.offset..r.offset + r.len]
    }

    pub fn row_residual(&self, j: usize) -> &[f64] {
        let r = &self.layout.rows[j];
        &self.residual[r.offset..r.offset + r.len]
    }

    /// `z` of node `i` on row `j`.
    pub fn node_z(&self, j: usize, i: usize) -> f64 {
        self.layout.y(j, i).exp()
    }

    /// Continuity offset `v - g` at the first node of row `j`.
    pub fn row_offset(&self, j: usize) -> f64 {
        self.offsets[j]
    }

    /// Position of `y` within row `j`: `(i, w)` with `y = y_i + w dy`, or
    /// `None` below the first node.
    #[inline]
    pub(crate) fn row_position(&self, j: usize, y: f64) -> Option<(usize, f64)> {
        let r = &self.layout.rows[j];
        let s = (y - self.layout.y(j, 0)) / self.layout.dy;
        if s < 0.0 {
            return None;
        }
        let i = s.floor() as usize;
        if i + 1 >= r.len {
            return Some((r.len - 1, s - (r.len - 1) as f64));
        }
        Some((i, s - i as f64))
    }

    /// `v` on row `j` at `ln z = y`: linear in `y` inside the row, the
    /// shifted asymptote below it, and zero above it.
    pub fn row_value(&self, j: usize, y: f64) -> f64 {
        let row = self.row_v(j);
        match self.row_position(j, y) {
            None => self.tail.g(y.exp(), self.row_beta(j)) + self.offsets[j],
            Some((i, w)) if i + 1 >= row.len() => row[i] * (1.0 - w).max(0.0),
            Some((i, w)) => row[i] + w * (row[i + 1] - row[i]),
        }
    }

    /// Row pair and weight for linear interpolation in beta (clamped).
    #[inline]
    pub fn beta_weights(&self, beta: f64) -> (usize, usize, f64) {
        let g = self.grid();
        let n = self.n_rows();
        if n == 1 {
            return (0, 0, 0.0);
        }
        let s = ((beta - g.beta_lo) / g.d_beta()).clamp(0.0, (n - 1) as f64);
        let j = (s.floor() as usize).min(n - 2);
        (j, j + 1, s - j as f64)
    }

    /// `v(z, beta)` by linear interpolation in `ln z` then in beta.
    pub fn value(&self, z: f64, beta: f64) -> f64 {
        let y = z.ln();
        let (j0, j1, w) = self.beta_weights(beta);
        let a = self.row_value(j0, y);
        if w == 0.0 {
            return a;
        }
        a + w * (self.row_value(j1, y) - a)
    }

    /// Largest complementarity error `max |min(L_h v + f, -v)|`.
    pub fn complementarity_error(&self) -> f64 {
        self.v
            .iter()
            .zip(&self.residual)
            .map(|(v, r)| r.min(-v).abs())
            .fold(0.0, f64::max)
    }

    /// Nodes violating `-z^(-1/gamma)/(r + (delta-r)/gamma) <= v <= 0`.
    pub fn bound_violations(&self) -> (usize, usize) {
        let p = &self.params;
        let (mut lo, mut hi) = (0, 0);
        for (j, r) in self.layout.rows.iter().enumerate() {
            for i in 0..r.len {
                let v = self.v[r.offset + i];
                let z = self.node_z(j, i);
                if v < -z.powf(-1.0 / p.gamma) / p.moment_rate() {
                    lo += 1;
                }
                if v > 0.0 {
                    hi += 1;
                }
            }
        }
        (lo, hi)
    }

    /// Per row, the number of consecutive node pairs where `v` decreases in `z`.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        (0..self.n_rows())
            .map(|j| {
                self.row_v(j)
                    .windows(2)
                    .filter(|w| w[1] < w[0] - 1e-14 * (1.0 + w[0].abs()))
                    .count()
            })
            .collect()
    }

    /// Index of the first stopping node of row `j`.
    pub fn first_active(&self, j: usize) -> Option<usize> {
        self.row_active(j).iter().position(|&a| a)
    }

    /// Rows whose stopping set is not an up-set in `z`.
    pub fn single_crossing_failures(&self) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&j| {
                let a = self.row_active(j);
                match a.iter().position(|&x| x) {
                    Some(i) => a[i..].iter().any(|&x| !x),
                    None => false,
                }
            })
            .collect()
    }
}
