//! Benchmark problems addressable by string id.

pub mod affine;
pub mod cf;
pub mod conv;
pub mod dtlz;
pub mod front;
pub mod zdt;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DpnError, Result};
use crate::mop::{AutoDiffMop, SharedMop};

pub use front::{nondominated_filter, sample_front, sample_front_cached};

use dtlz::DtlzVariant;
use zdt::ZdtVariant;

/// Dimension overrides applied on top of the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemOverrides {
    pub n: Option<usize>,
    pub k: Option<usize>,
}

impl ProblemOverrides {
    pub fn with_n(n: usize) -> Self {
        Self { n: Some(n), k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInfo {
    pub id: &'static str,
    pub n: usize,
    pub k: usize,
    pub constrained: bool,
}

const IDS: [&str; 27] = [
    "zdt1", "zdt2", "zdt3", "zdt4", "zdt6", "dtlz1", "dtlz2", "dtlz3", "dtlz4", "dtlz5", "dtlz6", "dtlz7",
    "idtlz1", "idtlz2", "idtlz3", "idtlz4", "cf1", "cf2", "cf3", "cf4", "cf5", "cf6", "cf7", "cf8", "cf9",
    "cf10", "conv4_2f",
];

pub fn known_ids() -> &'static [&'static str] {
    &IDS
}

/// Lower-cases and normalizes separators (`CONV4-2F` → `conv4_2f`).
pub fn canonical_id(id: &str) -> Result<String> {
    let c = id.trim().to_ascii_lowercase().replace('-', "_");
    if IDS.contains(&c.as_str()) {
        Ok(c)
    } else {
        Err(DpnError::UnknownProblem {
            id: id.to_string(),
            known: IDS.join(", "),
        })
    }
}

pub fn catalog() -> Vec<ProblemInfo> {
    IDS.iter()
        .map(|id| {
            let mop = make_problem(id, &ProblemOverrides::default()).expect("registered id");
            ProblemInfo {
                id,
                n: mop.n(),
                k: mop.k(),
                constrained: mop.m() > 0 || mop.p() > 0,
            }
        })
        .collect()
}

fn zdt_variant(id: &str) -> Option<ZdtVariant> {
    Some(match id {
        "zdt1" => ZdtVariant::Zdt1,
        "zdt2" => ZdtVariant::Zdt2,
        "zdt3" => ZdtVariant::Zdt3,
        "zdt4" => ZdtVariant::Zdt4,
        "zdt6" => ZdtVariant::Zdt6,
        _ => return None,
    })
}

fn dtlz_variant(id: &str) -> Option<DtlzVariant> {
    Some(match id.trim_start_matches('i') {
        "dtlz1" => DtlzVariant::Dtlz1,
        "dtlz2" => DtlzVariant::Dtlz2,
        "dtlz3" => DtlzVariant::Dtlz3,
        "dtlz4" => DtlzVariant::Dtlz4,
        "dtlz5" => DtlzVariant::Dtlz5,
        "dtlz6" => DtlzVariant::Dtlz6,
        "dtlz7" => DtlzVariant::Dtlz7,
        _ => return None,
    })
}

fn fixed_k(id: &str, k: usize, overrides: &ProblemOverrides) -> Result<()> {
    match overrides.k {
        Some(req) if req != k => Err(DpnError::Config(format!(
            "{id} has a fixed number of objectives ({k}), cannot use k = {req}"
        ))),
        _ => Ok(()),
    }
}

/// Builds a benchmark problem with its default dimensions unless overridden.
pub fn make_problem(id: &str, overrides: &ProblemOverrides) -> Result<SharedMop> {
    let id = canonical_id(id)?;
    if let Some(v) = zdt_variant(&id) {
        fixed_k(&id, 2, overrides)?;
        let n = overrides.n.unwrap_or(v.default_n());
        if n < 2 {
            return Err(DpnError::Config(format!("{id} needs n >= 2")));
        }
        return Ok(Arc::new(zdt::Zdt::new(v, n)));
    }
    if let Some(v) = dtlz_variant(&id) {
        let inverted = id.starts_with('i');
        let k = overrides.k.unwrap_or(3);
        let n = overrides.n.unwrap_or(if inverted { 11 } else { v.default_n() });
        if k < 2 || n < k {
            return Err(DpnError::Config(format!("{id} needs k >= 2 and n >= k (got n={n}, k={k})")));
        }
        return Ok(dtlz::make_dtlz(v, n, k, inverted));
    }
    if let Some(num) = id.strip_prefix("cf") {
        let num: usize = num.parse().expect("registered cf id");
        fixed_k(&id, if num >= 8 { 3 } else { 2 }, overrides)?;
        let n = overrides.n.unwrap_or(10);
        let min_n = if num >= 8 { 5 } else { 4 };
        if n < min_n {
            return Err(DpnError::Config(format!("{id} needs n >= {min_n}")));
        }
        return Ok(Arc::new(AutoDiffMop::new(cf::Cf::new(num, n))));
    }
    fixed_k(&id, 4, overrides)?;
    if overrides.n.is_some_and(|n| n != 4) {
        return Err(DpnError::Config("conv4_2f is defined for n = 4 only".into()));
    }
    Ok(Arc::new(conv::Conv42f::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dimensions() {
        let z = make_problem("zdt1", &ProblemOverrides::default()).unwrap();
        assert_eq!((z.n(), z.k(), z.m()), (30, 2, 0));
        let c = make_problem("CONV4-2F", &ProblemOverrides::default()).unwrap();
        assert_eq!((c.n(), c.k()), (4, 4));
        assert_eq!(c.bounds().lower, vec![-3.0; 4]);
        assert_eq!(c.bounds().upper, vec![3.0; 4]);
        let z3 = make_problem("zdt1", &ProblemOverrides::with_n(3)).unwrap();
        assert_eq!(z3.n(), 3);
        assert_eq!(make_problem("dtlz1", &ProblemOverrides::default()).unwrap().n(), 7);
        assert_eq!(make_problem("idtlz3", &ProblemOverrides::default()).unwrap().n(), 11);
        let cf = make_problem("cf9", &ProblemOverrides::default()).unwrap();
        assert_eq!((cf.n(), cf.k(), cf.m()), (10, 3, 1));
    }

    #[test]
    fn unknown_id_lists_known() {
        let Err(err) = make_problem("zdt5", &ProblemOverrides::default()) else {
            panic!("zdt5 should be unknown");
        };
        let err = err.to_string();
        assert!(err.contains("zdt1") && err.contains("conv4_2f"), "{err}");
    }

    #[test]
    fn catalog_covers_all() {
        assert_eq!(catalog().len(), known_ids().len());
    }
}
