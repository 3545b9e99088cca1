//! Overlap of the two post-splitter amplitudes and the support geometry in the
//! `(t+, t-)` plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlations::CoincidenceWindow;
use crate::error::{Error, Result};
use crate::grid::SupportBand;
use crate::optics::TermSum;

/// Relative threshold separating exact disjointness from genuine overlap.
pub const OVERLAP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// `<A_a, A_b>` inside the window, without the term signs.
    pub inner_product: Complex64,
    /// `∬ |A_a| |A_b|` inside the window.
    pub pointwise_overlap_mass: f64,
    /// Analytic `t-` band of each term.
    pub bands: Vec<Option<SupportBand>>,
    pub intersection: Option<SupportBand>,
    /// Five-sigma `t+` extent of each term's pump envelope (not a hard support).
    pub t_plus_five_sigma: Vec<Option<(f64, f64)>>,
    /// Mass threshold used for `interferes`.
    pub epsilon: f64,
    pub interferes: bool,
}

pub fn overlap_report(s: &TermSum, w: &CoincidenceWindow) -> Result<OverlapReport> {
    if s.len() != 2 {
        return Err(Error::WrongTermCount(s.len()));
    }
    w.validate()?;
    let (a, b) = (s.terms()[0].amp(), s.terms()[1].amp());
    let grid = *a.grid();
    let weight = w.weight_fn(&grid);
    let inner_product = a.inner(b, Some(&weight));
    let (wq, t) = (grid.weights(), grid.times());
    let mut pointwise_overlap_mass = 0.0;
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let q = wq[i] * wq[j] * weight(t[i], t[j]);
            if q != 0.0 {
                pointwise_overlap_mass += a.at(i, j).norm() * b.at(i, j).norm() * q;
            }
        }
    }
    let epsilon = OVERLAP_EPS * a.norm() * b.norm();
    let bands: Vec<Option<SupportBand>> = s.terms().iter().map(|t| t.band()).collect();
    let intersection = match (bands[0], bands[1]) {
        (Some(x), Some(y)) => x.intersect(&y),
        _ => None,
    };
    let t_plus_five_sigma = s.terms().iter().map(|t| t.amp().envelope().map(|e| e.five_sigma())).collect();
    Ok(OverlapReport {
        inner_product,
        pointwise_overlap_mass,
        bands,
        intersection,
        t_plus_five_sigma,
        epsilon,
        interferes: pointwise_overlap_mass > epsilon,
    })
}

/// `0 < tau1 < t0`.
pub fn interference_predicate(tau1: f64, t0: f64) -> Result<bool> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidParameter(format!("t0 must be positive, got {t0}")));
    }
    Ok(tau1 > 0.0 && tau1 < t0)
}

/// Rectangle `t' ∈ t_plus`, `t- ∈ t_minus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t_plus: (f64, f64),
    pub t_minus: SupportBand,
}

impl Region {
    /// Corners, counter-clockwise from `(t'_lo, t-_lo)`, as `(t', t-)`.
    pub fn vertices(&self) -> [(f64, f64); 4] {
        let (p0, p1) = self.t_plus;
        let (m0, m1) = (self.t_minus.lo, self.t_minus.hi);
        [(p0, m0), (p1, m0), (p1, m1), (p0, m1)]
    }

    pub fn area(&self) -> f64 {
        (self.t_plus.1 - self.t_plus.0) * self.t_minus.length()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Regions {
    pub tau1: f64,
    pub t0: f64,
    pub terms: [Region; 2],
    pub intersection_area: f64,
}

/// Supports of the two post-splitter terms for a Rect kernel delayed by `tau1`.
///
/// Term 1 occupies `-tau1 < t- < t0 - tau1`, term 2 its mirror image
/// `tau1 - t0 < t- < tau1`; both span `t_plus_range` in `t'`.
pub fn figure1_regions(tau1: f64, t0: f64, t_plus_range: (f64, f64)) -> Result<Figure1Regions> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidParameter(format!("t0 must be positive, got {t0}")));
    }
    if !(t_plus_range.0 < t_plus_range.1) || !tau1.is_finite() {
        return Err(Error::InvalidParameter("t' range needs lo < hi and a finite delay".into()));
    }
    let first = SupportBand::new(-tau1, t0 - tau1)?;
    let second = first.mirrored();
    let overlap = first.intersect(&second).map_or(0.0, |b| b.length());
    Ok(Figure1Regions {
        tau1,
        t0,
        terms: [
            Region { t_plus: t_plus_range, t_minus: first },
            Region { t_plus: t_plus_range, t_minus: second },
        ],
        intersection_area: overlap * (t_plus_range.1 - t_plus_range.0),
    })
}
