//! Uniform time grids, sampled complex fields, and trapezoid quadrature.
//!
//! All times are measured in units of the source support length `t0`.
//! A [`JointAmplitude`] stores `A(t1, t2)` with row index `i` for `t1` and
//! column index `j` for `t2`, both on the same [`TimeGrid`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a delay as a grid multiple.
pub const COMMENSURATE_TOL: f64 = 1e-9;

/// Samples pushed off the grid are tolerated when their modulus is at most
/// this fraction of the largest sample.
pub const CLIP_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
    t_min: f64,
    t_max: f64,
}

impl TimeGrid {
    pub fn new(n: usize, t_min: f64, t_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs n >= 2, got {n}")));
        }
        if !(t_min.is_finite() && t_max.is_finite()) || t_max <= t_min {
            return Err(Error::InvalidParameter(format!(
                "grid needs t_max > t_min, got [{t_min}, {t_max}]"
            )));
        }
        Ok(Self { n, t_min, t_max })
    }

    /// Grid of `n` points starting at `t_min` with spacing `dt`.
    pub fn with_spacing(n: usize, t_min: f64, dt: f64) -> Result<Self> {
        Self::new(n, t_min, t_min + dt * (n - 1) as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_min + k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.time(k)).collect()
    }

    /// Trapezoid weight of sample `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.n {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.weight(k)).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * self.dt();
        t >= self.t_min - slack && t <= self.t_max + slack
    }

    /// Number of grid steps in `delay`, or `NonCommensurateDelay`.
    pub fn delay_steps(&self, delay: f64) -> Result<isize> {
        let dt = self.dt();
        let steps = (delay / dt).round();
        if (delay - steps * dt).abs() > COMMENSURATE_TOL * dt || !delay.is_finite() {
            return Err(Error::NonCommensurateDelay { delay, dt });
        }
        Ok(steps as isize)
    }

    /// Nearest grid multiple to a requested delay.
    pub fn snap(&self, requested: f64) -> SnappedDelay {
        let steps = (requested / self.dt()).round() as isize;
        SnappedDelay { requested, snapped: steps as f64 * self.dt(), steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnappedDelay {
    pub requested: f64,
    pub snapped: f64,
    pub steps: isize,
}

impl SnappedDelay {
    pub fn was_moved(&self) -> bool {
        self.requested != self.snapped
    }
}

/// Closed-interval support of an amplitude in the difference coordinate
/// `t- = t1 - t2`. Samples on the end points may be non-zero only where a
/// kernel jump lands exactly on a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBand {
    pub lo: f64,
    pub hi: f64,
}

impl SupportBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("support band needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Intersection of the open intervals, if it has positive length.
    pub fn intersect(&self, other: &SupportBand) -> Option<SupportBand> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(SupportBand { lo, hi })
    }

    pub fn shifted(&self, by: f64) -> SupportBand {
        SupportBand { lo: self.lo + by, hi: self.hi + by }
    }

    pub fn mirrored(&self) -> SupportBand {
        SupportBand { lo: -self.hi, hi: -self.lo }
    }

    pub fn contains(&self, t: f64, slack: f64) -> bool {
        t >= self.lo - slack && t <= self.hi + slack
    }
}

/// Gaussian pump envelope carried along with an amplitude, in `t+ = (t1 + t2)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub center: f64,
    pub sigma_p: f64,
}

impl Envelope {
    /// Five standard deviations of the amplitude envelope `exp(-sigma_p^2 t^2 / 2)`.
    pub fn five_sigma(&self) -> (f64, f64) {
        let half = 5.0 / self.sigma_p;
        (self.center - half, self.center + half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl Field1D {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n()).map(|k| f(grid.time(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    /// Trapezoid inner product `<self, other> = ∫ conj(self) other dt`.
    pub fn inner(&self, other: &Field1D) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(k, (a, b))| a.conj() * b * self.grid.weight(k))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// Trapezoid L1 norm of the real parts.
    pub fn l1_real(&self) -> f64 {
        self.values.iter().enumerate().map(|(k, v)| v.re.abs() * self.grid.weight(k)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAmplitude {
    grid: TimeGrid,
    values: DMatrix<Complex64>,
    band: Option<SupportBand>,
    envelope: Option<Envelope>,
    post_splitter: bool,
}

impl JointAmplitude {
    pub fn new(grid: TimeGrid, values: DMatrix<Complex64>) -> Result<Self> {
        if values.nrows() != grid.n() || values.ncols() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "joint amplitude must be {n}x{n}, got {}x{}",
                values.nrows(),
                values.ncols(),
                n = grid.n()
            )));
        }
        Ok(Self { grid, values, band: None, envelope: None, post_splitter: false })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: DMatrix::from_element(grid.n(), grid.n(), ZERO), band: None, envelope: None, post_splitter: false }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let t = grid.times();
        let values = DMatrix::from_fn(grid.n(), grid.n(), |i, j| f(t[i], t[j]));
        Self { grid, values, band: None, envelope: None, post_splitter: false }
    }

    /// Outer product `f(t1) g(t2)`.
    pub fn product(f: &Field1D, g: &Field1D) -> Result<Self> {
        if f.grid() != g.grid() {
            return Err(Error::InvalidParameter("factors live on different grids".into()));
        }
        let grid = *f.grid();
        let values = DMatrix::from_fn(grid.n(), grid.n(), |i, j| f.at(i) * g.at(j));
        Ok(Self { grid, values, band: None, envelope: None, post_splitter: false })
    }

    pub fn with_band(mut self, band: Option<SupportBand>) -> Self {
        self.band = band;
        self
    }

    pub fn with_envelope(mut self, envelope: Option<Envelope>) -> Self {
        self.envelope = envelope;
        self
    }

    pub(crate) fn mark_post_splitter(mut self) -> Self {
        self.post_splitter = true;
        self
    }

    /// True for amplitudes produced by summing beam-splitter output terms.
    pub fn is_post_splitter(&self) -> bool {
        self.post_splitter
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<Complex64> {
        self.values
    }

    /// Analytic support in `t-`, when the amplitude came from a source model.
    pub fn band(&self) -> Option<SupportBand> {
        self.band
    }

    pub fn envelope(&self) -> Option<Envelope> {
        self.envelope
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn norm_sq(&self) -> f64 {
        integrate_2d(self, None::<fn(f64, f64) -> f64>, |v| Complex64::new(v.norm_sqr(), 0.0)).re
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Rescale to unit trapezoid L2 norm.
    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroAmplitude);
        }
        self.values /= Complex64::new(norm, 0.0);
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.values *= factor;
        self
    }

    /// Trapezoid inner product `∬ conj(self) other`, optionally weighted.
    pub fn inner(&self, other: &JointAmplitude, weight: Option<&dyn Fn(f64, f64) -> f64>) -> Complex64 {
        let (w, t) = (self.grid.weights(), self.grid.times());
        let mut acc = ZERO;
        for j in 0..self.grid.n() {
            for i in 0..self.grid.n() {
                let a = self.values[(i, j)];
                let b = other.values[(i, j)];
                if a == ZERO || b == ZERO {
                    continue;
                }
                let mut q = w[i] * w[j];
                if let Some(f) = weight {
                    q *= f(t[i], t[j]);
                }
                acc += a.conj() * b * q;
            }
        }
        acc
    }

    pub fn add(&self, other: &JointAmplitude) -> JointAmplitude {
        JointAmplitude {
            grid: self.grid,
            values: &self.values + &other.values,
            band: None,
            envelope: self.envelope,
            post_splitter: self.post_splitter || other.post_splitter,
        }
    }

    pub fn sub(&self, other: &JointAmplitude) -> JointAmplitude {
        JointAmplitude {
            grid: self.grid,
            values: &self.values - &other.values,
            band: None,
            envelope: self.envelope,
            post_splitter: self.post_splitter || other.post_splitter,
        }
    }

    pub fn l2_distance(&self, other: &JointAmplitude) -> f64 {
        self.sub(other).norm()
    }
}

/// Trapezoid double integral of `map(A) * weight(t1, t2)` over the grid square.
pub fn integrate_2d<W, M>(a: &JointAmplitude, weight: Option<W>, map: M) -> Complex64
where
    W: Fn(f64, f64) -> f64,
    M: Fn(Complex64) -> Complex64,
{
    let g = a.grid();
    let (w, t) = (g.weights(), g.times());
    let mut acc = ZERO;
    for j in 0..g.n() {
        let mut col = ZERO;
        for i in 0..g.n() {
            let mut q = w[i];
            if let Some(f) = &weight {
                q *= f(t[i], t[j]);
            }
            if q != 0.0 {
                col += map(a.values[(i, j)]) * q;
            }
        }
        acc += col * w[j];
    }
    acc
}

/// `∬ weight · A dt1 dt2` with the trapezoid rule; `weight` defaults to 1.
pub fn integrate(a: &JointAmplitude, weight: Option<&dyn Fn(f64, f64) -> f64>) -> Complex64 {
    match weight {
        Some(f) => integrate_2d(a, Some(f), |v| v),
        None => integrate_2d(a, None::<fn(f64, f64) -> f64>, |v| v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    T1,
    T2,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::T1 => 1,
            Axis::T2 => 2,
        }
    }
}

/// `A'(t1, t2) = A(t1 + delta, t2)` for `Axis::T1` (and analogously for `T2`).
///
/// Samples shifted in from outside the grid are zero. Fails with
/// `SupportClipped` when a sample above `CLIP_TOL · max|A|` would leave the grid.
pub fn shift_axis(a: &JointAmplitude, axis: Axis, delta: f64) -> Result<JointAmplitude> {
    let g = *a.grid();
    let steps = g.delay_steps(delta)?;
    if steps == 0 {
        return Ok(a.clone());
    }
    let n = g.n() as isize;
    let limit = CLIP_TOL * a.max_abs();
    // Samples with source index outside [0, n) after the shift are dropped.
    let dropped = |k: isize| k - steps < 0 || k - steps >= n;
    for k in 0..n {
        if !dropped(k) {
            continue;
        }
        let lost = match axis {
            Axis::T1 => a.values.row(k as usize).iter().any(|v| v.norm() > limit),
            Axis::T2 => a.values.column(k as usize).iter().any(|v| v.norm() > limit),
        };
        if lost {
            return Err(Error::SupportClipped { axis: axis.index(), delta });
        }
    }
    let values = DMatrix::from_fn(g.n(), g.n(), |i, j| {
        let (si, sj) = match axis {
            Axis::T1 => (i as isize + steps, j as isize),
            Axis::T2 => (i as isize, j as isize + steps),
        };
        if si < 0 || sj < 0 || si >= n || sj >= n {
            ZERO
        } else {
            a.values[(si as usize, sj as usize)]
        }
    });
    let snapped = steps as f64 * g.dt();
    let band = a.band.map(|b| match axis {
        Axis::T1 => b.shifted(-snapped),
        Axis::T2 => b.shifted(snapped),
    });
    let envelope = a.envelope.map(|e| Envelope { center: e.center - snapped / 2.0, ..e });
    Ok(JointAmplitude { grid: g, values, band, envelope, post_splitter: a.post_splitter })
}

/// `A'(t1, t2) = A(t2, t1)`.
pub fn swap_axes(a: &JointAmplitude) -> JointAmplitude {
    JointAmplitude {
        grid: a.grid,
        values: a.values.transpose(),
        band: a.band.map(|b| b.mirrored()),
        envelope: a.envelope,
        post_splitter: a.post_splitter,
    }
}
