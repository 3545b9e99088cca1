//! Delay line, 50:50 beam splitter, and post-splitter compensation.
//!
//! Delay convention: a signal delay `tau1` maps `A(t1, t2)` to
//! `A(t1 + tau1, t2)`, i.e. the signal kernel argument becomes `t1 - t + tau1`.
//! The splitter produces the antisymmetric pair
//! `(A(t1, t2) - A(t2, t1)) / sqrt(2)`, recording for each term which
//! detector coordinate carries the signal photon. Compensation shifts each
//! term along its own signal axis, so the net delay is `tau1 - delta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{shift_axis, swap_axes, Axis, JointAmplitude, SupportBand, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    amp: JointAmplitude,
    sign: Sign,
    signal_axis: Axis,
}

impl Term {
    pub fn new(amp: JointAmplitude, sign: Sign, signal_axis: Axis) -> Self {
        Self { amp, sign, signal_axis }
    }

    pub fn amp(&self) -> &JointAmplitude {
        &self.amp
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn signal_axis(&self) -> Axis {
        self.signal_axis
    }

    /// The term's contribution to the total, `sign · amp`.
    pub fn signed(&self) -> JointAmplitude {
        match self.sign {
            Sign::Plus => self.amp.clone(),
            Sign::Minus => self.amp.clone().scaled(Complex64::new(-1.0, 0.0)),
        }
    }

    /// Analytic `t-` support of the term, if known.
    pub fn band(&self) -> Option<SupportBand> {
        self.amp.band()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermSum {
    terms: Vec<Term>,
}

impl TermSum {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if let Some(first) = terms.first() {
            if terms.iter().any(|t| t.amp.grid() != first.amp.grid()) {
                return Err(Error::InvalidParameter("terms must share one time grid".into()));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.terms.first().map(|t| t.amp.grid())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElementSpec {
    DelaySignal { tau1: f64 },
    BeamSplitter,
    Compensate { delta: f64 },
}

/// `A'(t1, t2) = A(t1 + tau1, t2)`.
pub fn delay_signal(a: &JointAmplitude, tau1: f64) -> Result<JointAmplitude> {
    if a.is_post_splitter() {
        return Err(Error::InvalidParameter("delays act before the beam splitter".into()));
    }
    shift_axis(a, Axis::T1, tau1)
}

pub fn beam_splitter(a: &JointAmplitude) -> Result<TermSum> {
    if a.is_post_splitter() {
        return Err(Error::SplitterAlreadyApplied);
    }
    let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let direct = a.clone().scaled(half);
    let exchanged = swap_axes(a).scaled(half);
    TermSum::new(vec![
        Term::new(direct, Sign::Plus, Axis::T1),
        Term::new(exchanged, Sign::Minus, Axis::T2),
    ])
}

/// Shift every term by `delta` against its signal axis: `A(t1 - delta, t2)`
/// for signal on axis 1, `A(t1, t2 - delta)` for signal on axis 2.
pub fn compensate(s: &TermSum, delta: f64) -> Result<TermSum> {
    let terms = s
        .terms
        .iter()
        .map(|t| {
            Ok(Term {
                amp: shift_axis(&t.amp, t.signal_axis, -delta)?,
                sign: t.sign,
                signal_axis: t.signal_axis,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TermSum { terms })
}

/// `Σ sign · amp` over the terms.
pub fn total_amplitude(s: &TermSum) -> Result<JointAmplitude> {
    let grid = *s.grid().ok_or_else(|| Error::InvalidParameter("empty term sum".into()))?;
    let mut total = JointAmplitude::zeros(grid);
    for t in &s.terms {
        total = match t.sign {
            Sign::Plus => total.add(&t.amp),
            Sign::Minus => total.sub(&t.amp),
        };
    }
    Ok(total.with_envelope(s.terms[0].amp.envelope()).mark_post_splitter())
}

/// Apply a sequence of elements to a source amplitude.
pub fn apply_elements(source: &JointAmplitude, elements: &[ElementSpec]) -> Result<TermSum> {
    let mut pre = source.clone();
    let mut post: Option<TermSum> = None;
    for el in elements {
        match (*el, post.as_ref()) {
            (ElementSpec::DelaySignal { tau1 }, None) => pre = delay_signal(&pre, tau1)?,
            (ElementSpec::DelaySignal { .. }, Some(_)) => {
                return Err(Error::InvalidParameter("delay after the beam splitter".into()))
            }
            (ElementSpec::BeamSplitter, None) => post = Some(beam_splitter(&pre)?),
            (ElementSpec::BeamSplitter, Some(_)) => return Err(Error::SplitterAlreadyApplied),
            (ElementSpec::Compensate { delta }, Some(s)) => post = Some(compensate(s, delta)?),
            (ElementSpec::Compensate { .. }, None) => {
                return Err(Error::InvalidParameter("compensation before the beam splitter".into()))
            }
        }
    }
    post.ok_or_else(|| Error::InvalidParameter("pipeline has no beam splitter".into()))
}
