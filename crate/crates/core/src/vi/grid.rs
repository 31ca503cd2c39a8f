use crate::dynamics::{ou_exact_moments, Measure};
use crate::error::{Error, Result};
use crate::model::{boundary_floor, ModelParams};

use super::psi_shift;

/// Coordinates in which the generator is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordMode {
    /// Log-z and beta, seven-point stencil for the cross derivative.
    Direct,
    /// `psi = ln z - beta^2 / (2 sigma sigma_beta)` and beta: the diffusion
    /// acts along beta only, so the scheme has no cross term.
    Characteristic,
}

impl std::str::FromStr for CoordMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "characteristic" => Ok(Self::Characteristic),
            other => Err(Error::Config(format!("unknown coordinate mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for CoordMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Characteristic => "characteristic",
        })
    }
}

/// Truncated computational rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub z_min: f64,
    pub z_max: f64,
    /// Nodes per beta row, uniformly spaced in `ln z`.
    pub n_z: usize,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub n_beta: usize,
    pub mode: CoordMode,
}

impl GridSpec {
    /// Default rectangle: `z` in `[1e-3, 40] * ell^-gamma`, beta within six
    /// stationary standard deviations of the stopping-measure mean. A frozen
    /// factor collapses to a single row at `beta_bar`.
    pub fn default_for(p: &ModelParams) -> Self {
        let floor = boundary_floor(p);
        if p.is_constant_beta() {
            return Self {
                z_min: 1e-3 * floor,
                z_max: 40.0 * floor,
                n_z: 600,
                beta_lo: p.beta_bar,
                beta_hi: p.beta_bar,
                n_beta: 1,
                mode: CoordMode::Direct,
            };
        }
        let (b, sd) = ou_exact_moments(p, Measure::Q, 0.0, f64::INFINITY)
            .unwrap_or((p.beta_bar, p.sigma_beta.max(1e-3)));
        Self {
            z_min: 1e-3 * floor,
            z_max: 40.0 * floor,
            n_z: 600,
            beta_lo: b - 6.0 * sd,
            beta_hi: b + 6.0 * sd,
            n_beta: 201,
            mode: CoordMode::Characteristic,
        }
    }

    pub fn with_resolution(mut self, n_z: usize, n_beta: usize) -> Self {
        self.n_z = n_z;
        self.n_beta = n_beta;
        self
    }

    /// Beta range `b +/- n_sd` stationary standard deviations (stochastic factor only).
    pub fn with_beta_span(mut self, p: &ModelParams, n_sd: f64) -> Self {
        if let Ok((b, sd)) = ou_exact_moments(p, Measure::Q, 0.0, f64::INFINITY) {
            self.beta_lo = b - n_sd * sd;
            self.beta_hi = b + n_sd * sd;
        }
        self
    }

    pub fn with_mode(mut self, mode: CoordMode) -> Self {
        self.mode = mode;
        self
    }

    /// Nested refinement: every coarse node is a fine node.
    pub fn refined(&self) -> Self {
        Self {
            n_z: 2 * self.n_z - 1,
            n_beta: if self.n_beta > 1 { 2 * self.n_beta - 1 } else { 1 },
            ..*self
        }
    }

    pub fn dy(&self) -> f64 {
        (self.z_max.ln() - self.z_min.ln()) / (self.n_z - 1) as f64
    }

    pub fn d_beta(&self) -> f64 {
        if self.n_beta > 1 {
            (self.beta_hi - self.beta_lo) / (self.n_beta - 1) as f64
        } else {
            0.0
        }
    }

    pub fn beta(&self, j: usize) -> f64 {
        if self.n_beta == 1 {
            0.5 * (self.beta_lo + self.beta_hi)
        } else {
            self.beta_lo + j as f64 * self.d_beta()
        }
    }

    /// Structural checks only (no model-dependent coverage checks).
    pub fn check_shape(&self) -> Result<()> {
        if !(self.z_min > 0.0 && self.z_min < self.z_max) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < z_min < z_max, got [{}, {}]",
                self.z_min, self.z_max
            )));
        }
        if self.n_z < 3 {
            return Err(Error::InvalidGrid("n_z must be >= 3".into()));
        }
        if self.n_beta == 0 || (self.n_beta > 1 && self.beta_hi <= self.beta_lo) {
            return Err(Error::InvalidGrid("empty beta range".into()));
        }
        if self.n_beta == 2 {
            return Err(Error::InvalidGrid("n_beta must be 1 or >= 3".into()));
        }
        Ok(())
    }

    /// Full construction-time checks: `z_max` at least ten times the
    /// boundary floor and, for a stochastic factor, a beta range covering at
    /// least five stationary standard deviations on each side of `b`.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        self.check_shape()?;
        let floor = boundary_floor(p);
        if self.z_max < 10.0 * floor {
            return Err(Error::InvalidGrid(format!(
                "z_max = {} must be at least 10 * ell^-gamma = {}",
                self.z_max,
                10.0 * floor
            )));
        }
        if p.is_constant_beta() {
            if self.mode == CoordMode::Characteristic {
                return Err(Error::InvalidGrid(
                    "characteristic coordinates need sigma_beta > 0".into(),
                ));
            }
            return Ok(());
        }
        if self.n_beta < 3 {
            return Err(Error::InvalidGrid("stochastic factor needs n_beta >= 3".into()));
        }
        let (b, sd) = ou_exact_moments(p, Measure::Q, 0.0, f64::INFINITY)?;
        let need = 5.0 * sd * (1.0 - 1e-12);
        if b - self.beta_lo < need || self.beta_hi - b < need {
            return Err(Error::InvalidGrid(format!(
                "beta range [{}, {}] must cover b +/- 5 sd = [{}, {}]",
                self.beta_lo,
                self.beta_hi,
                b - 5.0 * sd,
                b + 5.0 * sd
            )));
        }
        Ok(())
    }
}

/// One beta row of unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowLayout {
    pub beta: f64,
    /// Characteristic shift `beta^2/(2 sigma sigma_beta)` (zero in direct mode).
    pub shift: f64,
    /// Lattice index of the first node along the psi axis.
    pub k_start: i64,
    pub len: usize,
    /// Global index of the first node.
    pub offset: usize,
}

/// Node layout: row `j` holds nodes at `ln z = ln z_min + (k_start + i) dy + shift_j`,
/// `i in 0..len`, restricted to `[ln z_min, ln z_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub spec: GridSpec,
    pub dy: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub rows: Vec<RowLayout>,
    pub n_nodes: usize,
}

impl Layout {
    pub fn new(spec: &GridSpec, p: &ModelParams) -> Result<Self> {
        spec.check_shape()?;
        if spec.mode == CoordMode::Characteristic && p.sigma_beta <= 0.0 {
            return Err(Error::InvalidGrid(
                "characteristic coordinates need sigma_beta > 0".into(),
            ));
        }
        let dy = spec.dy();
        let y_min = spec.z_min.ln();
        let y_max = spec.z_max.ln();
        let span = (spec.n_z - 1) as f64;
        let mut rows = Vec::with_capacity(spec.n_beta);
        let mut offset = 0;
        for j in 0..spec.n_beta {
            let beta = spec.beta(j);
            let shift = match spec.mode {
                CoordMode::Direct => 0.0,
                CoordMode::Characteristic => psi_shift(p, beta),
            };
            let s = shift / dy;
            let k_start = (-s - 1e-9).ceil() as i64;
            let k_end = (span - s + 1e-9).floor() as i64;
            let len = (k_end - k_start + 1).max(0) as usize;
            rows.push(RowLayout {
                beta,
                shift,
                k_start,
                len,
                offset,
            });
            offset += len;
        }
        Ok(Self {
            spec: *spec,
            dy,
            y_min,
            y_max,
            rows,
            n_nodes: offset,
        })
    }

    #[inline]
    pub fn y(&self, j: usize, i: usize) -> f64 {
        let r = &self.rows[j];
        self.y_min + (r.k_start + i as i64) as f64 * self.dy + r.shift
    }

    #[inline]
    pub fn y_lattice(&self, j: usize, k: i64) -> f64 {
        self.y_min + k as f64 * self.dy + self.rows[j].shift
    }

    /// Global node index of lattice point `(j, k)` if it lies in the band.
    #[inline]
    pub fn index(&self, j: usize, k: i64) -> Option<usize> {
        let r = &self.rows[j];
        let i = k - r.k_start;
        if i >= 0 && (i as usize) < r.len {
            Some(r.offset + i as usize)
        } else {
            None
        }
    }

    /// `(row, position in row)` of a global node index.
    pub fn locate(&self, idx: usize) -> (usize, usize) {
        let j = self.rows.partition_point(|r| r.offset + r.len <= idx);
        (j, idx - self.rows[j].offset)
    }

    /// The `ln z` values of row `j`.
    pub fn row_y(&self, j: usize) -> Vec<f64> {
        (0..self.rows[j].len).map(|i| self.y(j, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_validates() {
        let p = ModelParams::reference();
        let g = GridSpec::default_for(&p);
        g.validate(&p).unwrap();
        assert_eq!(g.n_z, 600);
        assert_eq!(g.n_beta, 201);
        let c = p.constant_beta();
        let gc = GridSpec::default_for(&c);
        gc.validate(&c).unwrap();
        assert_eq!(gc.n_beta, 1);
        assert_eq!(gc.beta(0), 0.05);
    }

    #[test]
    fn narrow_beta_range_rejected() {
        let p = ModelParams::reference();
        let mut g = GridSpec::default_for(&p);
        g.beta_hi = 0.2;
        assert!(g.validate(&p).is_err());
        let mut g = GridSpec::default_for(&p);
        g.z_max = 5.0;
        assert!(g.validate(&p).is_err());
    }

    #[test]
    fn layout_rows_cover_band() {
        let p = ModelParams::reference();
        let g = GridSpec::default_for(&p).with_resolution(101, 21);
        let lay = Layout::new(&g, &p).unwrap();
        for j in 0..g.n_beta {
            let ys = lay.row_y(j);
            assert!(ys[0] >= lay.y_min - 1e-9);
            assert!(ys[0] - lay.dy < lay.y_min + 1e-9);
            assert!(*ys.last().unwrap() <= lay.y_max + 1e-9);
            assert!(*ys.last().unwrap() + lay.dy > lay.y_max - 1e-9);
        }
        let (j, i) = lay.locate(lay.rows[7].offset + 3);
        assert_eq!((j, i), (7, 3));
    }

    #[test]
    fn direct_layout_is_rectangular() {
        let p = ModelParams::reference();
        let g = GridSpec::default_for(&p)
            .with_resolution(51, 11)
            .with_mode(CoordMode::Direct);
        let lay = Layout::new(&g, &p).unwrap();
        assert!(lay.rows.iter().all(|r| r.len == 51 && r.k_start == 0));
        assert_eq!(lay.n_nodes, 51 * 11);
    }

    #[test]
    fn refinement_is_nested() {
        let p = ModelParams::reference();
        let g = GridSpec::default_for(&p).with_resolution(51, 11);
        let f = g.refined();
        assert_eq!((f.n_z, f.n_beta), (101, 21));
        assert!((f.beta(2 * 3) - g.beta(3)).abs() < 1e-14);
        assert!((2.0 * f.dy() - g.dy()).abs() < 1e-14);
    }
}
