//! Coincidence densities and rates, delay scans, and single-detector correlations.
//!
//! The coincidence density is `|A_total(t1, t2)|^2`. Rates integrate it over a
//! coincidence window `|t1 - t2| <= W` (optionally gated in `t+`). Scanned rates
//! are reported relative to a baseline run at a delay where the two
//! post-splitter terms are disjoint, so the overall source constant drops out.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field1D, JointAmplitude, SnappedDelay, TimeGrid};
use crate::optics::{beam_splitter, compensate, delay_signal, total_amplitude, TermSum};
use crate::overlap::overlap_report;
use crate::source::BiphotonModel;

/// Default half width of the coincidence window, in units of `t0`.
pub const DEFAULT_WINDOW: f64 = 4.0;

/// Spectral samples below this fraction of the peak are outside the occupied band.
pub const OCCUPIED_BAND_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceWindow {
    pub half_width: f64,
    /// Optional acceptance range in `t+ = (t1 + t2)/2`.
    pub t_plus: Option<(f64, f64)>,
}

impl Default for CoincidenceWindow {
    fn default() -> Self {
        Self { half_width: DEFAULT_WINDOW, t_plus: None }
    }
}

impl CoincidenceWindow {
    pub fn new(half_width: f64) -> Result<Self> {
        let w = Self { half_width, t_plus: None };
        w.validate()?;
        Ok(w)
    }

    pub fn with_t_plus(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.t_plus = Some((lo, hi));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "window half width must be positive, got {}",
                self.half_width
            )));
        }
        if let Some((lo, hi)) = self.t_plus {
            if !(lo < hi) {
                return Err(Error::InvalidParameter("t+ acceptance range needs lo < hi".into()));
            }
        }
        Ok(())
    }

    /// Acceptance weight (0 or 1) at `(t1, t2)`.
    pub fn accepts(&self, t1: f64, t2: f64, slack: f64) -> bool {
        if (t1 - t2).abs() > self.half_width + slack {
            return false;
        }
        match self.t_plus {
            Some((lo, hi)) => {
                let tp = 0.5 * (t1 + t2);
                tp >= lo - slack && tp <= hi + slack
            }
            None => true,
        }
    }

    pub(crate) fn weight_fn(&self, grid: &TimeGrid) -> impl Fn(f64, f64) -> f64 + '_ {
        let slack = 1e-9 * grid.dt();
        move |t1, t2| if self.accepts(t1, t2, slack) { 1.0 } else { 0.0 }
    }
}

/// Real-valued field on the grid square.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2D {
    pub grid: TimeGrid,
    pub values: DMatrix<f64>,
}

impl Density2D {
    pub fn integrate(&self) -> f64 {
        let w = self.grid.weights();
        let n = self.grid.n();
        (0..n).map(|j| (0..n).map(|i| self.values[(i, j)] * w[i]).sum::<f64>() * w[j]).sum()
    }
}

/// `|total_amplitude(s)|^2` pointwise.
pub fn g2_density(s: &TermSum) -> Result<Density2D> {
    let total = total_amplitude(s)?;
    Ok(Density2D { grid: *total.grid(), values: total.values().map(|v| v.norm_sqr()) })
}

/// `∬_window |A_total|^2`.
pub fn coincidence_rate(s: &TermSum, w: &CoincidenceWindow) -> Result<f64> {
    w.validate()?;
    let total = total_amplitude(s)?;
    let weight = w.weight_fn(total.grid());
    Ok(total.inner(&total, Some(&weight)).re)
}

/// Split of the windowed rate into term norms and interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    /// `Σ_i ‖term_i‖^2` inside the window.
    pub incoherent: f64,
    /// `2 Re Σ_{i<j} <sign_i A_i, sign_j A_j>` inside the window.
    pub cross: f64,
}

impl RateBreakdown {
    pub fn total(&self) -> f64 {
        self.incoherent + self.cross
    }
}

pub fn rate_breakdown(s: &TermSum, w: &CoincidenceWindow) -> Result<RateBreakdown> {
    w.validate()?;
    let grid = *s.grid().ok_or_else(|| Error::InvalidParameter("empty term sum".into()))?;
    let weight = w.weight_fn(&grid);
    let signed: Vec<JointAmplitude> = s.terms().iter().map(|t| t.signed()).collect();
    let incoherent = signed.iter().map(|a| a.inner(a, Some(&weight)).re).sum();
    let mut cross = 0.0;
    for i in 0..signed.len() {
        for j in i + 1..signed.len() {
            cross += 2.0 * signed[i].inner(&signed[j], Some(&weight)).re;
        }
    }
    Ok(RateBreakdown { incoherent, cross })
}

/// Source, grid, and detection window for a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub model: BiphotonModel,
    pub grid: TimeGrid,
    pub window: CoincidenceWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variable", rename_all = "snake_case")]
pub enum ScanVariable {
    /// Scan the pre-splitter signal delay, with an optional fixed compensation.
    Tau1 { delta: Option<f64> },
    /// Scan the compensation at a fixed pre-splitter delay.
    Delta { tau1: f64 },
}

impl ScanVariable {
    pub fn name(&self) -> &'static str {
        match self {
            ScanVariable::Tau1 { .. } => "tau1",
            ScanVariable::Delta { .. } => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCurve {
    pub variable: String,
    /// Scanned values after snapping to the grid.
    pub tau_values: Vec<f64>,
    /// Normalized rates `R / R_baseline`.
    pub rates: Vec<f64>,
    pub baseline: f64,
    pub baseline_delay: f64,
    /// Every delay the scan snapped, including fixed ones, in scan order.
    pub snapped: Vec<SnappedDelay>,
}

impl DipCurve {
    /// Index and value of the smallest rate (first one on ties).
    pub fn minimum(&self) -> Option<(usize, f64)> {
        self.rates
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (k, r)| match best {
                Some((_, b)) if b <= r => best,
                _ => Some((k, r)),
            })
    }
}

/// Closed-form normalized rate for a Rect kernel with an open window.
pub fn rect_dip(tau1: f64, t0: f64) -> f64 {
    if tau1 <= 0.0 || tau1 >= t0 {
        1.0
    } else {
        1.0 - 2.0 * tau1.min(t0 - tau1) / t0
    }
}

/// A pipeline evaluation: signal delay before the splitter, compensation after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub tau1: f64,
    pub delta: Option<f64>,
}

impl Setting {
    pub fn net_delay(&self) -> f64 {
        self.tau1 - self.delta.unwrap_or(0.0)
    }
}

/// Emission-time gate keeping every delayed copy of the source on the grid.
pub fn emission_gate(model: &BiphotonModel, grid: &TimeGrid, shifts: &[f64]) -> Result<(f64, f64)> {
    let (t1_lo, t1_hi, t2_lo, t2_hi) = model.emission_offsets();
    let max_shift = shifts.iter().copied().fold(0.0f64, f64::max);
    let min_shift = shifts.iter().copied().fold(0.0f64, f64::min);
    let dt = grid.dt();
    // Shift d moves the t1 support to [a + t1_lo - d, b + t1_hi - d]; after the
    // splitter swap both supports occupy both axes.
    let a = grid.t_min() + (max_shift - t1_lo).max(-t2_lo).max(0.0) + dt;
    let b = grid.t_max() - (t1_hi - min_shift).max(t2_hi).max(0.0) - dt;
    if a >= b {
        return Err(Error::GridTooSmall(format!(
            "delays in [{min_shift}, {max_shift}] do not fit on [{}, {}] with the source support",
            grid.t_min(),
            grid.t_max()
        )));
    }
    Ok((a, b))
}

/// Delay at which the two post-splitter terms are disjoint in `t-`.
pub fn baseline_delay(model: &BiphotonModel, grid: &TimeGrid) -> f64 {
    let band = model.band();
    let dt = grid.dt();
    // Two steps of margin: samples next to a jump reach half a cell past the band.
    let below = ((band.lo / dt + 1e-9).floor() - 2.0) * dt;
    let above = ((band.hi / dt - 1e-9).ceil() + 2.0) * dt;
    if below.abs() <= above.abs() {
        below
    } else {
        above
    }
}

/// Builds the source once and evaluates pipeline settings against it.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub experiment: Experiment,
    pub source: JointAmplitude,
    pub gate: (f64, f64),
}

impl Pipeline {
    /// Prepare a source gated so that all listed settings stay on the grid.
    pub fn new(experiment: &Experiment, settings: &[Setting]) -> Result<Self> {
        experiment.window.validate()?;
        let grid = &experiment.grid;
        let mut shifts = vec![baseline_delay(&experiment.model, grid)];
        for s in settings {
            shifts.push(s.tau1);
            shifts.push(s.net_delay());
        }
        let gate = emission_gate(&experiment.model, grid, &shifts)?;
        let source = experiment.model.build_gated(grid, Some(gate))?;
        Ok(Self { experiment: *experiment, source, gate })
    }

    pub fn terms(&self, setting: Setting) -> Result<TermSum> {
        let split = beam_splitter(&delay_signal(&self.source, setting.tau1)?)?;
        match setting.delta {
            Some(d) => compensate(&split, d),
            None => Ok(split),
        }
    }

    pub fn rate(&self, setting: Setting) -> Result<f64> {
        coincidence_rate(&self.terms(setting)?, &self.experiment.window)
    }

    /// Rate at the disjoint-support baseline delay; fails if that delay still overlaps.
    pub fn baseline(&self) -> Result<(f64, f64)> {
        let tau_b = baseline_delay(&self.experiment.model, &self.experiment.grid);
        let terms = self.terms(Setting { tau1: tau_b, delta: None })?;
        let report = overlap_report(&terms, &self.experiment.window)?;
        if report.interferes {
            return Err(Error::InvalidParameter(format!("baseline delay {tau_b} does not separate the terms")));
        }
        let rate = coincidence_rate(&terms, &self.experiment.window)?;
        if rate <= 0.0 {
            return Err(Error::ZeroAmplitude);
        }
        Ok((tau_b, rate))
    }
}

/// Normalized coincidence rate versus a scanned delay.
pub fn dip_scan(exp: &Experiment, variable: ScanVariable, values: &[f64]) -> Result<DipCurve> {
    let grid = exp.grid;
    let mut snapped = Vec::new();
    let fixed = match variable {
        ScanVariable::Tau1 { delta } => delta.map(|d| grid.snap(d)),
        ScanVariable::Delta { tau1 } => Some(grid.snap(tau1)),
    };
    snapped.extend(fixed);
    let scanned: Vec<SnappedDelay> = values.iter().map(|&v| grid.snap(v)).collect();
    snapped.extend(scanned.iter().copied());

    let settings: Vec<Setting> = scanned
        .iter()
        .map(|s| match variable {
            ScanVariable::Tau1 { .. } => Setting { tau1: s.snapped, delta: fixed.map(|f| f.snapped) },
            ScanVariable::Delta { .. } => Setting { tau1: fixed.expect("fixed tau1").snapped, delta: Some(s.snapped) },
        })
        .collect();

    let pipeline = Pipeline::new(exp, &settings)?;
    let (baseline_delay, baseline) = pipeline.baseline()?;
    let rates = settings
        .par_iter()
        .map(|&s| pipeline.rate(s).map(|r| r / baseline))
        .collect::<Result<Vec<_>>>()?;
    Ok(DipCurve {
        variable: variable.name().to_string(),
        tau_values: scanned.iter().map(|s| s.snapped).collect(),
        rates,
        baseline,
        baseline_delay,
        snapped,
    })
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps < 2 {
        return vec![lo];
    }
    (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
}

/// Reduced state of photon 1 in the time basis, `ρ1(t, t') = ∫ A(t, t2) A*(t', t2) dt2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    pub grid: TimeGrid,
    pub rho: DMatrix<Complex64>,
}

impl ReducedDensity {
    /// `G1(t) = ρ1(t, t)`.
    pub fn diagonal(&self) -> Field1D {
        let values = (0..self.grid.n()).map(|i| self.rho[(i, i)]).collect();
        Field1D::new(self.grid, values).expect("diagonal length matches grid")
    }

    pub fn trace(&self) -> f64 {
        (0..self.grid.n()).map(|i| self.rho[(i, i)].re * self.grid.weight(i)).sum()
    }

    /// `W^{1/2} ρ W^{1/2}`, whose eigenvalues are those of ρ1 as an integral operator.
    pub fn weighted(&self) -> DMatrix<Complex64> {
        let sw: Vec<f64> = self.grid.weights().iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(self.grid.n(), self.grid.n(), |i, j| self.rho[(i, j)] * (sw[i] * sw[j]))
    }

    /// Eigenvalues of ρ1 (descending).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.weighted());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `tr ρ1^2` as an operator.
    pub fn purity(&self) -> f64 {
        let m = self.weighted();
        m.iter().map(|v| v.norm_sqr()).sum()
    }
}

pub fn g1_reduced(a: &JointAmplitude) -> ReducedDensity {
    let g = *a.grid();
    let w: Vec<f64> = g.weights();
    let values = a.values();
    let weighted = DMatrix::from_fn(g.n(), g.n(), |i, j| values[(i, j)] * w[j]);
    let rho = weighted * values.adjoint();
    ReducedDensity { grid: g, rho }
}

#[derive(Debug, Clone, PartialEq)]
pub struct G1Report {
    /// `∫ |A|^2 dt2`, L1-normalized.
    pub unweighted: Field1D,
    /// Frequency-weighted marginal of photon 2, L1-normalized.
    pub weighted: Field1D,
    pub l2_discrepancy: f64,
    /// Spectral centroid of photon 2.
    pub mean_omega: f64,
    /// Gaussian-equivalent FWHM of photon 2 over its centroid.
    pub relative_bandwidth: f64,
}

/// Per-row power spectra of photon 2, `|∫ A(t1, t2) e^{i ω t2} dt2|^2`, and the frequency axis.
fn photon2_spectra(a: &JointAmplitude) -> (Vec<f64>, DMatrix<f64>) {
    let g = a.grid();
    let n = g.n();
    let dt = g.dt();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut power = DMatrix::zeros(n, n);
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = a.at(i, j);
        }
        fft.process(&mut row);
        for (k, v) in row.iter().enumerate() {
            // Parseval: Σ_j |a_j|^2 dt = Σ_k |X_k|^2 dt / n
            power[(i, k)] = v.norm_sqr() * dt / n as f64;
        }
    }
    let omegas = (0..n)
        .map(|k| {
            let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            2.0 * std::f64::consts::PI * kk / (n as f64 * dt)
        })
        .collect();
    (omegas, power)
}

/// Spectral centroid and Gaussian-equivalent relative FWHM of photon 2.
pub fn photon2_bandwidth(a: &JointAmplitude) -> (f64, f64) {
    let (omegas, power) = photon2_spectra(a);
    spectral_moments(a.grid(), &omegas, &power)
}

fn marginal_spectrum(grid: &TimeGrid, power: &DMatrix<f64>) -> Vec<f64> {
    let w = grid.weights();
    (0..power.ncols()).map(|k| (0..power.nrows()).map(|i| w[i] * power[(i, k)]).sum()).collect()
}

fn spectral_moments(grid: &TimeGrid, omegas: &[f64], power: &DMatrix<f64>) -> (f64, f64) {
    let s = marginal_spectrum(grid, power);
    let total: f64 = s.iter().sum();
    let mean = omegas.iter().zip(&s).map(|(w, p)| w * p).sum::<f64>() / total;
    let var = omegas.iter().zip(&s).map(|(w, p)| (w - mean).powi(2) * p).sum::<f64>() / total;
    let fwhm = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * var.sqrt();
    (mean, fwhm / mean.abs())
}

/// Unweighted vs frequency-weighted single-detector marginals of photon 1.
///
/// The weight `1 + weight_scale (ω - ω̄)/ω̄` multiplies the photon-2 power
/// spectrum before photon 2 is traced out; `weight_scale = 0` gives the plain
/// partial trace. Both marginals go through the same spectral sum, so they
/// agree bit for bit when the weight is 1.
pub fn g1_vs_integrated_g2(a: &JointAmplitude, weight_scale: f64) -> Result<G1Report> {
    if !(weight_scale >= 0.0 && weight_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("weight_scale must be >= 0, got {weight_scale}")));
    }
    let g = *a.grid();
    let n = g.n();
    let (omegas, power) = photon2_spectra(a);
    let (mean_omega, relative_bandwidth) = spectral_moments(&g, &omegas, &power);

    let weights: Vec<f64> = if weight_scale == 0.0 {
        vec![1.0; n]
    } else {
        if !(mean_omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency weighting needs a positive mean frequency, got {mean_omega}"
            )));
        }
        let spectrum = marginal_spectrum(&g, &power);
        let peak = spectrum.iter().copied().fold(0.0, f64::max);
        let w: Vec<f64> = omegas.iter().map(|om| 1.0 + weight_scale * (om - mean_omega) / mean_omega).collect();
        for k in 0..n {
            if spectrum[k] >= OCCUPIED_BAND_FLOOR * peak && w[k] < 0.0 {
                return Err(Error::NegativeWeight { omega: omegas[k], weight: w[k] });
            }
        }
        w
    };

    let marginal = |wts: &[f64]| -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|k| wts[k] * power[(i, k)]).sum()).collect()
    };
    let unweighted = l1_normalize(&g, marginal(&vec![1.0; n]))?;
    let weighted = l1_normalize(&g, marginal(&weights))?;
    let l2_discrepancy = (0..n)
        .map(|i| g.weight(i) * (weighted[i] - unweighted[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let to_field = |v: Vec<f64>| Field1D::new(g, v.into_iter().map(|x| Complex64::new(x, 0.0)).collect());
    Ok(G1Report {
        unweighted: to_field(unweighted)?,
        weighted: to_field(weighted)?,
        l2_discrepancy,
        mean_omega,
        relative_bandwidth,
    })
}

fn l1_normalize(g: &TimeGrid, v: Vec<f64>) -> Result<Vec<f64>> {
    let norm: f64 = v.iter().enumerate().map(|(i, x)| x.abs() * g.weight(i)).sum();
    if norm == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{Sign, Term};
    use crate::grid::Axis;
    use crate::source::{KernelSpec, PumpSpec};

    fn rect_experiment(n: usize, t_min: f64, dt: f64) -> Experiment {
        let pump = PumpSpec::new(0.1, 0.0, 1.0).unwrap();
        Experiment {
            model: BiphotonModel::factored(pump, KernelSpec::rect(1.0)),
            grid: TimeGrid::with_spacing(n, t_min, dt).unwrap(),
            window: CoincidenceWindow::default(),
        }
    }

    #[test]
    fn window_validation() {
        assert!(CoincidenceWindow::new(0.0).is_err());
        assert!(CoincidenceWindow::new(1.0).unwrap().with_t_plus(1.0, 0.0).is_err());
    }

    #[test]
    fn density_of_single_normalized_term() {
        let g = TimeGrid::new(41, -1.0, 1.0).unwrap();
        let a = JointAmplitude::from_fn(g, |t1, t2| Complex64::new((-(t1 * t1 + t2 * t2)).exp(), 0.0))
            .normalized()
            .unwrap();
        let s = TermSum::new(vec![Term::new(a, Sign::Plus, Axis::T1)]).unwrap();
        assert!((g2_density(&s).unwrap().integrate() - 1.0).abs() < 1e-12);
        let zero = TermSum::new(vec![Term::new(JointAmplitude::zeros(g), Sign::Plus, Axis::T1)]).unwrap();
        assert!(g2_density(&zero).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rect_dip_closed_form() {
        assert_eq!(rect_dip(-0.2, 1.0), 1.0);
        assert_eq!(rect_dip(0.0, 1.0), 1.0);
        assert!((rect_dip(0.25, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(rect_dip(0.5, 1.0), 0.0);
        assert_eq!(rect_dip(1.5, 1.0), 1.0);
    }

    #[test]
    fn coincidence_rate_examples() {
        // dt = 1/64: tau = 0.5 lands on the lattice.
        let exp = rect_experiment(321, -2.5, 1.0 / 64.0);
        let settings = [0.0, 0.5, 1.5].map(|tau1| Setting { tau1, delta: None });
        let p = Pipeline::new(&exp, &settings).unwrap();
        let (_, base) = p.baseline().unwrap();
        let r_half = p.rate(settings[1]).unwrap() / base;
        let r_far = p.rate(settings[2]).unwrap() / base;
        let r_zero = p.rate(settings[0]).unwrap() / base;
        let n = exp.grid.n() as f64;
        assert!(r_half.abs() < 2.0 / n, "{r_half}");
        assert!((r_far - 1.0).abs() < 1e-12);
        assert!((r_zero - 1.0).abs() < 2.0 / n * 2.0, "{r_zero}");
    }

    #[test]
    fn dip_scan_examples() {
        let exp = rect_experiment(321, -2.5, 1.0 / 64.0);
        let c = dip_scan(&exp, ScanVariable::Tau1 { delta: None }, &[0.25, -0.3, 0.5]).unwrap();
        let n = exp.grid.n() as f64;
        assert!((c.rates[0] - 0.5).abs() < 2.0 / n);
        assert!((c.rates[1] - 1.0).abs() < 1e-12);
        assert!(c.rates[2].abs() < 2.0 / n);
    }

    #[test]
    fn breakdown_matches_direct_rate() {
        let exp = rect_experiment(257, -2.0, 1.0 / 64.0);
        let p = Pipeline::new(&exp, &[Setting { tau1: 0.3125, delta: None }]).unwrap();
        let terms = p.terms(Setting { tau1: 0.3125, delta: None }).unwrap();
        let w = CoincidenceWindow::new(0.5).unwrap();
        let direct = coincidence_rate(&terms, &w).unwrap();
        let parts = rate_breakdown(&terms, &w).unwrap();
        assert!((parts.total() - direct).abs() <= 1e-10 * direct.abs().max(1e-300));
        assert!(parts.cross < 0.0);
    }

    #[test]
    fn reduced_density_basics() {
        let g = TimeGrid::new(61, -3.0, 3.0).unwrap();
        let f = Field1D::from_fn(g, |t| Complex64::new((-t * t).exp(), 0.3 * t));
        let h = Field1D::from_fn(g, |t| Complex64::new((-(t - 0.5).powi(2)).exp(), 0.0));
        let a = JointAmplitude::product(&f, &h).unwrap().normalized().unwrap();
        let rho = g1_reduced(&a);
        assert!((rho.trace() - 1.0).abs() < 1e-9);
        assert!((rho.purity() - 1.0).abs() < 1e-9);
        // rank one: ρ ∝ f f*
        let ev = rho.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-9 && ev[1].abs() < 1e-9);
        let diag = rho.diagonal();
        for i in 0..g.n() {
            let marginal: f64 = (0..g.n()).map(|j| a.at(i, j).norm_sqr() * g.weight(j)).sum();
            assert!((diag.at(i).re - marginal).abs() < 1e-12);
        }
    }

    #[test]
    fn g1_weighting_off_means_no_discrepancy() {
        let g = TimeGrid::new(64, -2.0, 2.0).unwrap();
        let a = JointAmplitude::from_fn(g, |t1, t2| Complex64::from_polar((-(t1 * t1 + 2.0 * t2 * t2)).exp(), -5.0 * t2))
            .normalized()
            .unwrap();
        let r = g1_vs_integrated_g2(&a, 0.0).unwrap();
        assert_eq!(r.l2_discrepancy, 0.0);
        assert!(g1_vs_integrated_g2(&a, -1.0).is_err());
    }

    #[test]
    fn g1_flags_negative_weight() {
        // Carrier comparable to the bandwidth puts negative frequencies in the band.
        let g = TimeGrid::new(128, -3.0, 3.0).unwrap();
        let a = JointAmplitude::from_fn(g, |t1, t2| {
            Complex64::from_polar((-(t1 * t1) - 8.0 * (t2 - t1).powi(2)).exp(), -1.0 * t2)
        })
        .normalized()
        .unwrap();
        assert!(matches!(g1_vs_integrated_g2(&a, 1.0), Err(Error::NegativeWeight { .. })));
    }

    #[test]
    fn emission_gate_rejects_small_grid() {
        let exp = rect_experiment(65, -1.0, 1.0 / 32.0);
        let settings = [Setting { tau1: 1.5, delta: None }];
        assert!(matches!(Pipeline::new(&exp, &settings), Err(Error::GridTooSmall(_))));
    }
}
