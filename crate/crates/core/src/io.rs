//! JSON encodings of models, inverses and discrete models.
//!
//! ```json
//! {"variables":[{"name":"D","observed":false}], "edges":[["D","G"]],
//!  "elim_order":["D"], "mode":"forward",
//!  "cpds":{"G":{"parents":["D","I"],"card":3,"table":[...]}}}
//! ```
//!
//! `elim_order`/`mode` appear on inverses and `cpds` on discrete models.
//! CPD tables are row-major over (parents in the listed order, child).
//! Malformed documents give [`Error::Json`]; well-formed ones that name
//! unknown variables, contain cycles and so on give the structural error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::discrete::{DiscreteBN, Factor};
use crate::error::{Error, Result};
use crate::graph::{BayesNet, VarId};
use crate::inversion::{InverseStructure, Mode};

#[derive(Debug, Serialize, Deserialize)]
struct VarEntry {
    name: String,
    #[serde(default)]
    observed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CpdEntry {
    parents: Vec<String>,
    card: usize,
    table: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BnFile {
    variables: Vec<VarEntry>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elim_order: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpds: Option<BTreeMap<String, CpdEntry>>,
}

impl BnFile {
    fn of(bn: &BayesNet) -> Self {
        BnFile {
            variables: bn
                .vars()
                .map(|v| VarEntry { name: bn.name(v).to_string(), observed: bn.is_observed(v) })
                .collect(),
            edges: bn.edges().into_iter().map(|(a, b)| (bn.name(a).to_string(), bn.name(b).to_string())).collect(),
            elim_order: None,
            mode: None,
            cpds: None,
        }
    }

    fn structure(&self) -> Result<BayesNet> {
        let vars: Vec<(&str, bool)> = self.variables.iter().map(|v| (v.name.as_str(), v.observed)).collect();
        let edges: Vec<(&str, &str)> = self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        BayesNet::from_names(&vars, &edges)
    }
}

fn to_value(f: &BnFile) -> Value {
    serde_json::to_value(f).expect("plain data serializes")
}

pub fn bn_from_json(text: &str) -> Result<BayesNet> {
    serde_json::from_str::<BnFile>(text)?.structure()
}

pub fn bn_to_json(bn: &BayesNet) -> Value {
    to_value(&BnFile::of(bn))
}

pub fn inverse_to_json(h: &InverseStructure) -> Value {
    let mut f = BnFile::of(&h.graph);
    f.elim_order = Some(h.elim_order.iter().map(|&v| h.graph.name(v).to_string()).collect());
    f.mode = Some(h.mode.to_string());
    to_value(&f)
}

/// Loads an inverse written by [`inverse_to_json`]. A missing `mode` or
/// `elim_order` is a parse error; use [`bn_from_json`] for bare structures.
pub fn inverse_from_json(text: &str) -> Result<InverseStructure> {
    let f: BnFile = serde_json::from_str(text)?;
    let graph = f.structure()?;
    let mode: Mode = f
        .mode
        .as_deref()
        .ok_or_else(|| Error::Json("inverse is missing \"mode\"".into()))?
        .parse()
        .map_err(Error::Json)?;
    let elim_order = f
        .elim_order
        .as_ref()
        .ok_or_else(|| Error::Json("inverse is missing \"elim_order\"".into()))?
        .iter()
        .map(|n| graph.id(n))
        .collect::<Result<Vec<_>>>()?;
    Ok(InverseStructure { graph, elim_order, mode, trace: None })
}

pub fn discrete_from_json(text: &str) -> Result<DiscreteBN> {
    let f: BnFile = serde_json::from_str(text)?;
    let bn = f.structure()?;
    let cpds = f.cpds.as_ref().ok_or_else(|| Error::Json("model has no \"cpds\"".into()))?;
    if let Some(name) = cpds.keys().find(|k| bn.id(k).is_err()) {
        return Err(Error::UnknownName(name.clone()));
    }
    let missing = |v: VarId| Error::InvalidCpd { var: bn.name(v).to_string(), reason: "no CPD given".into() };
    let card: Vec<usize> =
        bn.vars().map(|v| cpds.get(bn.name(v)).map(|c| c.card).ok_or_else(|| missing(v))).collect::<Result<_>>()?;
    let factors = bn
        .vars()
        .map(|v| {
            let c = &cpds[bn.name(v)];
            let mut scope = c.parents.iter().map(|p| bn.id(p)).collect::<Result<Vec<_>>>()?;
            scope.push(v);
            let cards = scope.iter().map(|u| card[u.0]).collect();
            let f = Factor::new(scope, cards, c.table.clone()).map_err(|e| Error::InvalidCpd {
                var: bn.name(v).to_string(),
                reason: e.to_string(),
            })?;
            let mut canonical = bn.parents(v).to_vec();
            canonical.push(v);
            // a parent list that disagrees with the edges is caught by DiscreteBN::new
            Ok(f.reorder(&canonical).unwrap_or(f))
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteBN::new(bn, card, factors)
}

pub fn discrete_to_json(d: &DiscreteBN) -> Value {
    let bn = &d.structure;
    let mut f = BnFile::of(bn);
    f.cpds = Some(
        bn.vars()
            .map(|v| {
                let cpd = &d.cpds[v.0];
                let parents = cpd.scope()[..cpd.scope().len() - 1].iter().map(|&u| bn.name(u).to_string()).collect();
                (bn.name(v).to_string(), CpdEntry { parents, card: d.card[v.0], table: cpd.values().to_vec() })
            })
            .collect(),
    );
    to_value(&f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::inversion::{nami, Direction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn structure_round_trips() {
        let g = fixtures::student();
        let text = bn_to_json(&g).to_string();
        assert_eq!(bn_from_json(&text).unwrap(), g);
    }

    #[test]
    fn inverse_round_trips() {
        let h = nami(&fixtures::fig1a(), Direction::Forward).unwrap();
        let back = inverse_from_json(&inverse_to_json(&h).to_string()).unwrap();
        assert_eq!(back.graph, h.graph);
        assert_eq!(back.elim_order, h.elim_order);
        assert_eq!(back.mode, h.mode);
    }

    #[test]
    fn discrete_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = DiscreteBN::random(fixtures::student(), vec![2, 2, 3, 2, 2, 2, 3], &mut rng).unwrap();
        let back = discrete_from_json(&discrete_to_json(&d).to_string()).unwrap();
        assert_eq!(back.card, d.card);
        assert_eq!(back.cpds, d.cpds);
    }

    #[test]
    fn parent_order_in_file_is_free() {
        let text = r#"{"variables":[{"name":"a"},{"name":"b"},{"name":"c","observed":true}],
            "edges":[["a","c"],["b","c"]],
            "cpds":{"a":{"parents":[],"card":2,"table":[0.5,0.5]},
                    "b":{"parents":[],"card":2,"table":[0.3,0.7]},
                    "c":{"parents":["b","a"],"card":2,"table":[1,0, 0,1, 0.5,0.5, 0.2,0.8]}}}"#;
        let d = discrete_from_json(text).unwrap();
        // canonical scope is (a, b, c); entry a=0,b=1 was listed as b=1,a=0
        assert_eq!(d.cpds[2].get(&[0, 1, 0]), 0.5);
        assert_eq!(d.cpds[2].get(&[1, 0, 1]), 1.0);
    }

    #[test]
    fn parse_and_semantic_errors_differ() {
        assert!(matches!(bn_from_json("{\"variables\": 3}"), Err(Error::Json(_))));
        assert!(matches!(bn_from_json("not json"), Err(Error::Json(_))));
        let unknown = r#"{"variables":[{"name":"a"}],"edges":[["a","b"]]}"#;
        assert!(matches!(bn_from_json(unknown), Err(Error::UnknownName(_))));
        let dup = r#"{"variables":[{"name":"a"},{"name":"b"}],"edges":[["a","b"],["a","b"]]}"#;
        assert!(matches!(bn_from_json(dup), Err(Error::DuplicateEdge(..))));
        let cyc = r#"{"variables":[{"name":"a"},{"name":"b"}],"edges":[["a","b"],["b","a"]]}"#;
        assert!(matches!(bn_from_json(cyc), Err(Error::Cyclic(_))));
    }

    #[test]
    fn bad_cpd_rows_are_rejected() {
        let text = r#"{"variables":[{"name":"a"}],"edges":[],"cpds":{"a":{"parents":[],"card":2,"table":[0.5,0.6]}}}"#;
        assert!(matches!(discrete_from_json(text), Err(Error::InvalidCpd { .. })));
        let short = r#"{"variables":[{"name":"a"}],"edges":[],"cpds":{"a":{"parents":[],"card":2,"table":[1]}}}"#;
        assert!(matches!(discrete_from_json(short), Err(Error::InvalidCpd { .. })));
    }
}
