use crate::dual::extract_boundary;
use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::grid::GridSpec;
use super::solve::{solve_vi, SolverOptions};
use super::surface::ValueSurface;

/// Differences between a coarse solution and its nested refinement,
/// measured on the coarse nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub sup_diff: f64,
    pub l2_diff: f64,
    /// `max |v|` on the compared nodes, for relative statements.
    pub scale: f64,
    /// Largest change of the extracted boundary over coarse rows.
    pub boundary_shift: f64,
    pub n_compared: usize,
}

impl ConvergenceReport {
    /// Observed order from two successive reports (coarse/mid, mid/fine).
    pub fn observed_order(&self, finer: &ConvergenceReport) -> f64 {
        (self.sup_diff / finer.sup_diff).log2()
    }
}

fn nested(c: &GridSpec, f: &GridSpec) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    c.mode == f.mode
        && f.n_z == 2 * c.n_z - 1
        && (f.n_beta == 2 * c.n_beta - 1 || (c.n_beta == 1 && f.n_beta == 1))
        && close(c.z_min, f.z_min)
        && close(c.z_max, f.z_max)
        && close(c.beta_lo, f.beta_lo)
        && close(c.beta_hi, f.beta_hi)
}

/// Compare two solutions on nested grids (identical solutions compare as zero).
pub fn refine_and_compare(coarse: &ValueSurface, fine: &ValueSurface) -> Result<ConvergenceReport> {
    let (cg, fg) = (coarse.grid(), fine.grid());
    let same = cg == fg;
    if !same && !nested(cg, fg) {
        return Err(Error::NotNested(format!(
            "coarse {}x{} vs fine {}x{}",
            cg.n_z, cg.n_beta, fg.n_z, fg.n_beta
        )));
    }
    let (sj, sk) = if same { (1, 1) } else { (if cg.n_beta > 1 { 2 } else { 1 }, 2) };
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    let mut scale = 0.0f64;
    let mut n = 0usize;
    for (j, row) in coarse.layout.rows.iter().enumerate() {
        for i in 0..row.len {
            let k = row.k_start + i as i64;
            let Some(fi) = fine.layout.index(sj * j, sk * k) else {
                continue;
            };
            let vc = coarse.v[row.offset + i];
            let d = (vc - fine.v[fi]).abs();
            sup = sup.max(d);
            sq += d * d;
            scale = scale.max(vc.abs());
            n += 1;
        }
    }
    let bc = extract_boundary(coarse)?;
    let bf = extract_boundary(fine)?;
    let mut shift = 0.0f64;
    for (j, &zc) in bc.z_star.iter().enumerate() {
        let zf = bf.z_star[sj * j];
        if zc.is_finite() && zf.is_finite() {
            shift = shift.max((zc - zf).abs());
        }
    }
    Ok(ConvergenceReport {
        sup_diff: sup,
        l2_diff: if n > 0 { (sq / n as f64).sqrt() } else { 0.0 },
        scale,
        boundary_shift: shift,
        n_compared: n,
    })
}

/// Relative change of `v` on the original rows' central half when the beta
/// range is doubled at fixed spacing.
pub fn domain_sensitivity(grid: &GridSpec, p: &ModelParams, opts: &SolverOptions) -> Result<f64> {
    if grid.n_beta < 3 || grid.n_beta % 2 == 0 {
        return Err(Error::InvalidGrid("domain doubling needs an odd n_beta >= 3".into()));
    }
    let base = solve_vi(grid, p, opts)?;
    let c = 0.5 * (grid.beta_lo + grid.beta_hi);
    let w = 0.5 * (grid.beta_hi - grid.beta_lo);
    let wide_grid = GridSpec {
        beta_lo: c - 2.0 * w,
        beta_hi: c + 2.0 * w,
        n_beta: 2 * (grid.n_beta - 1) + 1,
        ..*grid
    };
    let wide = solve_vi(&wide_grid, p, opts)?;
    let shift = (grid.n_beta - 1) / 2;
    let (lo, hi) = ((grid.n_beta - 1) / 4, 3 * (grid.n_beta - 1) / 4);
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for j in lo..=hi {
        let row = &base.layout.rows[j];
        for i in 0..row.len {
            let k = row.k_start + i as i64;
            if let Some(wi) = wide.layout.index(j + shift, k) {
                let v = base.v[row.offset + i];
                diff = diff.max((v - wide.v[wi]).abs());
                scale = scale.max(v.abs());
            }
        }
    }
    Ok(if scale > 0.0 { diff / scale } else { 0.0 })
}
