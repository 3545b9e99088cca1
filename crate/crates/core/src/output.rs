//! CSV and JSON renderings of results. Column order and JSON field names are
//! part of the public interface; bump [`SCHEMA_VERSION`] when they change.

use std::fmt::Write;

use serde::Serialize;

use crate::correlations::DipCurve;
use crate::entanglement::SchmidtSummary;
use crate::overlap::{Figure1Regions, OverlapReport};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: &'static str,
    kind: &'a str,
    #[serde(flatten)]
    data: &'a T,
}

fn versioned<T: Serialize>(kind: &str, data: &T) -> String {
    let v = Versioned { schema_version: SCHEMA_VERSION, kind, data };
    let mut s = serde_json::to_string_pretty(&v).expect("results serialize to JSON");
    s.push('\n');
    s
}

/// `tau1,rate` or `delta,rate`, one row per scan point.
pub fn dip_csv(c: &DipCurve) -> String {
    let mut s = format!("{},rate\n", c.variable);
    for (x, r) in c.tau_values.iter().zip(&c.rates) {
        writeln!(s, "{x},{r}").unwrap();
    }
    s
}

pub fn dip_json(c: &DipCurve) -> String {
    versioned("dip", c)
}

pub fn overlap_json(r: &OverlapReport) -> String {
    versioned("overlap", r)
}

pub fn schmidt_json(s: &SchmidtSummary) -> String {
    versioned("schmidt", s)
}

/// `term,vertex_index,t_prime,t_minus`, four vertices per term.
pub fn regions_csv(r: &Figure1Regions) -> String {
    let mut s = String::from("term,vertex_index,t_prime,t_minus\n");
    for (k, region) in r.terms.iter().enumerate() {
        for (v, (tp, tm)) in region.vertices().iter().enumerate() {
            writeln!(s, "{},{v},{tp},{tm}", k + 1).unwrap();
        }
    }
    s
}

pub fn regions_json(r: &Figure1Regions) -> String {
    versioned("regions", r)
}

pub fn to_json<T: Serialize>(kind: &str, data: &T) -> String {
    versioned(kind, data)
}
