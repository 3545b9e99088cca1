//! Biphoton amplitudes from a Gaussian pump and finite-support source kernels.
//!
//! Two constructions are provided:
//!
//! * factored: `A(t1, t2) = v(t+) u(t-)` with `t+ = (t1 + t2)/2`, `t- = t1 - t2`;
//! * kernel integral: `A(t1, t2) = ∫ v(t) V_s(t1 - t) V_i(t2 - t) dt`, where `t`
//!   is the emission time.
//!
//! Kernels vanish outside `[0, t0]`. A kernel with a jump at an end point
//! (Rect, GaussianWindowed) takes the mean of its one-sided limits there, so
//! a sample landing exactly on `0` or `t0` carries half the inside value. On a
//! grid, samples next to a jump are weighted by the fraction of their cell
//! `[t - dt/2, t + dt/2]` lying inside `[0, t0]`.
//! Both builders return amplitudes normalized to unit trapezoid L2 norm.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Envelope, Field1D, JointAmplitude, SupportBand, TimeGrid};

/// Pump terms below this fraction of the peak are dropped from the emission-time sum.
pub const PUMP_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub sigma_p: f64,
    pub omega_p: f64,
    pub amp: f64,
}

impl PumpSpec {
    pub fn new(sigma_p: f64, omega_p: f64, amp: f64) -> Result<Self> {
        let p = Self { sigma_p, omega_p, amp };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p > 0.0 && self.sigma_p.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_p must be positive, got {}", self.sigma_p)));
        }
        if !(self.omega_p >= 0.0 && self.omega_p.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_p must be non-negative, got {}", self.omega_p)));
        }
        if !(self.amp > 0.0 && self.amp.is_finite()) {
            return Err(Error::InvalidParameter(format!("amp must be positive, got {}", self.amp)));
        }
        Ok(())
    }

    /// `v(t) = A exp(-sigma_p^2 t^2 / 2) exp(-i omega_p t)`.
    pub fn value(&self, t: f64) -> Complex64 {
        let envelope = self.amp * (-0.5 * self.sigma_p * self.sigma_p * t * t).exp();
        Complex64::from_polar(envelope, -self.omega_p * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum KernelShape {
    Rect,
    /// Peak 1 at `t0/2`, linear to zero at both ends.
    Triangle,
    /// `exp(-(t - t0/2)^2 / (2 width^2))`, hard-truncated to `[0, t0]`.
    GaussianWindowed { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub t0: f64,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, t0: f64) -> Result<Self> {
        let k = Self { shape, t0 };
        k.validate()?;
        Ok(k)
    }

    pub fn rect(t0: f64) -> Self {
        Self { shape: KernelShape::Rect, t0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidParameter("t0 must be positive".into()));
        }
        if let KernelShape::GaussianWindowed { width } = self.shape {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidParameter("gaussian width must be positive".into()));
            }
        }
        Ok(())
    }

    fn inside(&self, t: f64) -> f64 {
        match self.shape {
            KernelShape::Rect => 1.0,
            KernelShape::Triangle => 1.0 - (2.0 * t / self.t0 - 1.0).abs(),
            KernelShape::GaussianWindowed { width } => {
                let x = t - 0.5 * self.t0;
                (-x * x / (2.0 * width * width)).exp()
            }
        }
    }

    /// Kernel value at `t`; zero outside `[0, t0]`, mean of one-sided limits at the ends.
    pub fn value(&self, t: f64) -> f64 {
        let edge = 1e-9 * self.t0;
        if t < -edge || t > self.t0 + edge {
            0.0
        } else if t.abs() <= edge {
            0.5 * self.inside(0.0)
        } else if (t - self.t0).abs() <= edge {
            0.5 * self.inside(self.t0)
        } else {
            self.inside(t)
        }
    }

    /// Value at `t` on a grid of spacing `dt`, cell-averaging the end-point jumps.
    pub fn sample(&self, t: f64, dt: f64) -> f64 {
        if let KernelShape::Triangle = self.shape {
            return self.value(t);
        }
        let snap = |x: f64| if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
        let (x, end) = (snap(t / dt), snap(self.t0 / dt));
        let cover = ((x + 0.5).min(end) - (x - 0.5).max(0.0)).clamp(0.0, 1.0);
        if cover == 0.0 {
            0.0
        } else {
            cover * self.inside(t.clamp(0.0, self.t0))
        }
    }

    /// Samples at lags `k · dt` for `k = 0..=K`, with `K` the last lag whose cell touches `[0, t0]`.
    fn lags(&self, dt: f64) -> Vec<f64> {
        let mut last = (self.t0 / dt + 0.5 - 1e-9).floor() as usize;
        let mut out: Vec<f64> = (0..=last).map(|k| self.sample(k as f64 * dt, dt)).collect();
        while last > 0 && out[last] == 0.0 {
            out.pop();
            last -= 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SourceForm {
    Factored { u: KernelSpec },
    KernelIntegral { v_s: KernelSpec, v_i: KernelSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonModel {
    pub pump: PumpSpec,
    pub form: SourceForm,
}

impl BiphotonModel {
    pub fn factored(pump: PumpSpec, u: KernelSpec) -> Self {
        Self { pump, form: SourceForm::Factored { u } }
    }

    pub fn kernel_integral(pump: PumpSpec, v_s: KernelSpec, v_i: KernelSpec) -> Self {
        Self { pump, form: SourceForm::KernelIntegral { v_s, v_i } }
    }

    pub fn validate(&self) -> Result<()> {
        self.pump.validate()?;
        match &self.form {
            SourceForm::Factored { u } => u.validate(),
            SourceForm::KernelIntegral { v_s, v_i } => v_s.validate().and(v_i.validate()),
        }
    }

    /// Support length of the (signal) kernel, the unit the interference window is quoted in.
    pub fn t0(&self) -> f64 {
        match &self.form {
            SourceForm::Factored { u } => u.t0,
            SourceForm::KernelIntegral { v_s, .. } => v_s.t0,
        }
    }

    /// Closed support in `t- = t1 - t2`.
    pub fn band(&self) -> SupportBand {
        match &self.form {
            SourceForm::Factored { u } => SupportBand { lo: 0.0, hi: u.t0 },
            SourceForm::KernelIntegral { v_s, v_i } => SupportBand { lo: -v_i.t0, hi: v_s.t0 },
        }
    }

    /// Offsets `(t1_lo, t1_hi, t2_lo, t2_hi)` of the support relative to an
    /// emission window `[a, b]`: `t1 ∈ [a + t1_lo, b + t1_hi]`, likewise for `t2`.
    pub fn emission_offsets(&self) -> (f64, f64, f64, f64) {
        match &self.form {
            SourceForm::Factored { u } => (0.0, 0.5 * u.t0, -0.5 * u.t0, 0.0),
            SourceForm::KernelIntegral { v_s, v_i } => (0.0, v_s.t0, 0.0, v_i.t0),
        }
    }

    pub fn build(&self, grid: &TimeGrid) -> Result<JointAmplitude> {
        self.build_gated(grid, None)
    }

    /// Build with an optional emission-time gate `[a, b]`: pump samples
    /// outside the gate are set to zero. For the factored form the emission
    /// time is `t+`.
    pub fn build_gated(&self, grid: &TimeGrid, gate: Option<(f64, f64)>) -> Result<JointAmplitude> {
        self.validate()?;
        match &self.form {
            SourceForm::Factored { u } => factored(&self.pump, u, grid, gate),
            SourceForm::KernelIntegral { v_s, v_i } => kernel_integral(&self.pump, v_s, v_i, grid, gate),
        }
    }
}

pub fn sample_pump(p: &PumpSpec, g: &TimeGrid) -> Field1D {
    Field1D::from_fn(*g, |t| p.value(t))
}

pub fn sample_kernel(k: &KernelSpec, g: &TimeGrid) -> Result<Field1D> {
    k.validate()?;
    if !(g.contains(0.0) && g.contains(k.t0)) {
        return Err(Error::GridTooSmall(format!(
            "kernel support [0, {}] is not inside [{}, {}]",
            k.t0,
            g.t_min(),
            g.t_max()
        )));
    }
    let dt = g.dt();
    // When t = 0 is a grid point, evaluate at exact multiples of dt so the
    // end points are recognized without rounding noise.
    let offset = g.t_min() / dt;
    let on_lattice = (offset - offset.round()).abs() < 1e-9;
    let values = (0..g.n())
        .map(|idx| {
            let t = if on_lattice { (offset.round() + idx as f64) * dt } else { g.time(idx) };
            Complex64::new(k.sample(t, dt), 0.0)
        })
        .collect();
    Field1D::new(*g, values)
}

fn check_span(g: &TimeGrid, t0: f64) -> Result<()> {
    if g.t_max() - g.t_min() < t0 {
        return Err(Error::GridTooSmall(format!(
            "grid span {} is shorter than the kernel support {t0}",
            g.t_max() - g.t_min()
        )));
    }
    Ok(())
}

fn in_gate(gate: Option<(f64, f64)>, t: f64) -> bool {
    gate.map_or(true, |(a, b)| t >= a && t <= b)
}

pub fn build_biphoton_factored(pump: &PumpSpec, u: &KernelSpec, g: &TimeGrid) -> Result<JointAmplitude> {
    BiphotonModel::factored(*pump, *u).build(g)
}

pub fn build_biphoton_kernel(
    pump: &PumpSpec,
    v_s: &KernelSpec,
    v_i: &KernelSpec,
    g: &TimeGrid,
) -> Result<JointAmplitude> {
    BiphotonModel::kernel_integral(*pump, *v_s, *v_i).build(g)
}

/// Unnormalized factored product `v(t+) u(t-)` on the grid.
pub fn factored_raw(pump: &PumpSpec, u: &KernelSpec, g: &TimeGrid, gate: Option<(f64, f64)>) -> DMatrix<Complex64> {
    let n = g.n();
    let dt = g.dt();
    let lags = u.lags(dt);
    DMatrix::from_fn(n, n, |i, j| {
        if i < j || i - j >= lags.len() {
            return Complex64::new(0.0, 0.0);
        }
        let w = lags[i - j];
        let t_plus = g.t_min() + 0.5 * (i + j) as f64 * dt;
        if w == 0.0 || !in_gate(gate, t_plus) {
            return Complex64::new(0.0, 0.0);
        }
        pump.value(t_plus) * w
    })
}

fn factored(pump: &PumpSpec, u: &KernelSpec, g: &TimeGrid, gate: Option<(f64, f64)>) -> Result<JointAmplitude> {
    check_span(g, u.t0)?;
    let raw = factored_raw(pump, u, g, gate);
    JointAmplitude::new(*g, raw)?
        .normalized()
        .map(|a| {
            a.with_band(Some(SupportBand { lo: 0.0, hi: u.t0 }))
                .with_envelope(Some(Envelope { center: 0.0, sigma_p: pump.sigma_p }))
        })
}

fn kernel_integral(
    pump: &PumpSpec,
    v_s: &KernelSpec,
    v_i: &KernelSpec,
    g: &TimeGrid,
    gate: Option<(f64, f64)>,
) -> Result<JointAmplitude> {
    check_span(g, v_s.t0.max(v_i.t0))?;
    let n = g.n();
    let dt = g.dt();
    let vs = v_s.lags(dt);
    let vi = v_i.lags(dt);
    let ks = vs.len() - 1;
    // Emission time t = t1_i - k dt has lattice index i - k, offset by ks.
    let pump_at: Vec<Complex64> = (0..n + ks)
        .map(|p| {
            let t = g.t_min() + (p as f64 - ks as f64) * dt;
            let v = pump.value(t);
            if v.norm() < PUMP_CUTOFF * pump.amp || !in_gate(gate, t) {
                Complex64::new(0.0, 0.0)
            } else {
                v
            }
        })
        .collect();
    let values = DMatrix::from_fn(n, n, |i, j| {
        let m = i as isize - j as isize;
        // V_s(k dt) V_i((k - m) dt), both lags within their supports.
        let k_lo = m.max(0);
        let k_hi = (ks as isize).min(vi.len() as isize - 1 + m).min(i as isize + ks as isize);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut k = k_lo;
        while k <= k_hi {
            let w = vs[k as usize] * vi[(k - m) as usize];
            if w != 0.0 {
                acc += pump_at[(i as isize - k + ks as isize) as usize] * w;
            }
            k += 1;
        }
        acc * dt
    });
    let center = pump_center_kernel(v_s, v_i);
    JointAmplitude::new(*g, values)?.normalized().map(|a| {
        a.with_band(Some(SupportBand { lo: -v_i.t0, hi: v_s.t0 }))
            .with_envelope(Some(Envelope { center, sigma_p: pump.sigma_p }))
    })
}

// t+ = t + (lag_s + lag_i)/2; use the lag midpoints.
fn pump_center_kernel(v_s: &KernelSpec, v_i: &KernelSpec) -> f64 {
    0.25 * (v_s.t0 + v_i.t0)
}
