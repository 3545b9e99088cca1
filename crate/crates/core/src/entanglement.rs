//! Schmidt decomposition, reduced state, and entanglement measures.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{g1_reduced, ReducedDensity};
use crate::error::{Error, Result};
use crate::grid::{Field1D, JointAmplitude, TimeGrid};

pub const DEFAULT_THRESHOLD: f64 = 1e-10;

const NORM_TOL: f64 = 1e-6;
const SVD_MAX_ITER: usize = 10_000;

/// `A(t1, t2) = Σ_j c_j φ_j(t1) χ_j(t2)` truncated to coefficients above the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub coeffs: Vec<f64>,
    pub modes_1: Vec<Field1D>,
    pub modes_2: Vec<Field1D>,
    pub rank: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementMetrics {
    /// Von Neumann entropy of either reduced state, in bits.
    pub entropy: f64,
    pub purity: f64,
    pub schmidt_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSummary {
    pub coeffs: Vec<f64>,
    pub rank: usize,
    pub threshold: f64,
    pub entropy: f64,
    pub purity: f64,
    pub schmidt_number: f64,
}

impl SchmidtSpectrum {
    pub fn grid(&self) -> Option<&TimeGrid> {
        self.modes_1.first().map(|f| f.grid())
    }

    pub fn metrics(&self) -> EntanglementMetrics {
        entanglement_metrics(self)
    }

    pub fn summary(&self) -> SchmidtSummary {
        let m = self.metrics();
        SchmidtSummary {
            coeffs: self.coeffs.clone(),
            rank: self.rank,
            threshold: self.threshold,
            entropy: m.entropy,
            purity: m.purity,
            schmidt_number: m.schmidt_number,
        }
    }

    /// Sum of the first `terms` products `c_j φ_j ⊗ χ_j`.
    pub fn reconstruct(&self, terms: usize) -> Result<JointAmplitude> {
        let grid = *self.grid().ok_or(Error::ZeroAmplitude)?;
        let n = grid.n();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..terms.min(self.coeffs.len()) {
            let (phi, chi) = (self.modes_1[k].values(), self.modes_2[k].values());
            let c = self.coeffs[k];
            for j in 0..n {
                let cj = chi[j] * c;
                for i in 0..n {
                    m[(i, j)] += phi[i] * cj;
                }
            }
        }
        JointAmplitude::new(grid, m)
    }

    /// Best rank-1 approximation `c_1 φ_1 ⊗ χ_1`.
    pub fn best_rank_one(&self) -> Result<JointAmplitude> {
        self.reconstruct(1)
    }
}

fn check_normalized(a: &JointAmplitude) -> Result<()> {
    let norm = a.norm();
    if norm == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidParameter(format!("amplitude must be normalized, norm = {norm}")));
    }
    Ok(())
}

/// Trapezoid-weighted SVD of the sampled amplitude.
pub fn schmidt_decompose(a: &JointAmplitude, threshold: f64) -> Result<SchmidtSpectrum> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be >= 0, got {threshold}")));
    }
    check_normalized(a)?;
    let grid = *a.grid();
    let n = grid.n();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| a.at(i, j) * (sw[i] * sw[j]));
    let svd = nalgebra::SVD::try_new(m, true, true, f64::EPSILON, SVD_MAX_ITER).ok_or(Error::ConvergenceFailure)?;
    let (u, v_t) = (svd.u.ok_or(Error::ConvergenceFailure)?, svd.v_t.ok_or(Error::ConvergenceFailure)?);

    let mut modes: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > threshold)
        .map(|k| {
            let mut phi: Vec<Complex64> = (0..n).map(|i| u[(i, k)] / sw[i]).collect();
            let mut chi: Vec<Complex64> = (0..n).map(|j| v_t[(k, j)] / sw[j]).collect();
            fix_phase(&mut phi, &mut chi);
            (svd.singular_values[k], phi, chi)
        })
        .collect();
    modes.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| first_phase(&x.1).total_cmp(&first_phase(&y.1))));

    let rank = modes.len();
    let mut spectrum = SchmidtSpectrum { coeffs: Vec::with_capacity(rank), modes_1: vec![], modes_2: vec![], rank, threshold };
    for (c, phi, chi) in modes {
        spectrum.coeffs.push(c);
        spectrum.modes_1.push(Field1D::new(grid, phi)?);
        spectrum.modes_2.push(Field1D::new(grid, chi)?);
    }
    Ok(spectrum)
}

/// Decompose several amplitudes in parallel, preserving order.
pub fn schmidt_decompose_many(amps: &[JointAmplitude], threshold: f64) -> Vec<Result<SchmidtSpectrum>> {
    amps.par_iter().map(|a| schmidt_decompose(a, threshold)).collect()
}

/// Rotate φ so its largest sample is real positive, with the inverse rotation on χ.
fn fix_phase(phi: &mut [Complex64], chi: &mut [Complex64]) {
    let peak = phi.iter().copied().fold(Complex64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() { z } else { best });
    if peak.norm() == 0.0 {
        return;
    }
    let rot = peak.conj() / peak.norm();
    phi.iter_mut().for_each(|z| *z *= rot);
    let inv = rot.conj();
    chi.iter_mut().for_each(|z| *z *= inv);
}

fn first_phase(phi: &[Complex64]) -> f64 {
    phi.iter().find(|z| z.norm() > 0.0).map_or(0.0, |z| z.arg())
}

/// `ρ1 = tr_2 |Ψ><Ψ|` in the time basis.
pub fn reduced_density(a: &JointAmplitude) -> Result<ReducedDensity> {
    check_normalized(a)?;
    Ok(g1_reduced(a))
}

pub fn entanglement_metrics(s: &SchmidtSpectrum) -> EntanglementMetrics {
    let probs: Vec<f64> = s.coeffs.iter().map(|c| c * c).collect();
    let entropy = -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>();
    let purity: f64 = probs.iter().map(|p| p * p).sum();
    EntanglementMetrics { entropy: entropy.max(0.0), purity, schmidt_number: 1.0 / purity }
}

/// Apply a unitary `q` (acting on the weighted photon-2 basis) to the amplitude.
pub fn rotate_axis2(a: &JointAmplitude, q: &DMatrix<Complex64>) -> Result<JointAmplitude> {
    let grid = *a.grid();
    let n = grid.n();
    if q.shape() != (n, n) {
        return Err(Error::InvalidParameter(format!("basis change must be {n}x{n}")));
    }
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| a.at(i, j) * sw[j]) * q;
    JointAmplitude::new(grid, DMatrix::from_fn(n, n, |i, j| m[(i, j)] / sw[j]))
}
