//! JSON interchange for structure-coefficient tables.
//!
//! Accepted forms: a bare array `[{"alpha", "gamma", "poly"}]` or an object
//! `{"default_zero": bool, "entries": [...]}`. Polynomials use the text
//! grammar of [`MPoly`]; emission always writes the object form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratpoly::MPoly;
use crate::repmod::{RepError, StructureCoeffTable};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("malformed table JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("entry ({alpha}, {gamma}): {msg}")]
    BadPoly { alpha: i64, gamma: i64, msg: String },
    #[error("duplicate entry for (alpha, gamma) = ({0}, {1})")]
    Duplicate(i64, i64),
    #[error(transparent)]
    Table(#[from] RepError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub alpha: i64,
    pub gamma: i64,
    pub poly: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDocument {
    #[serde(default)]
    pub default_zero: bool,
    pub entries: Vec<TableEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyTable {
    Bare(Vec<TableEntry>),
    Doc(TableDocument),
}

/// Parsed entries plus the zero-fallback flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTable {
    pub entries: BTreeMap<(i64, i64), MPoly>,
    pub default_zero: bool,
}

impl ParsedTable {
    pub fn into_table(self) -> StructureCoeffTable {
        StructureCoeffTable::from_entries(self.entries, self.default_zero)
    }
}

/// `default_zero` from the command line is or-ed with the document's flag.
pub fn parse_table(text: &str, default_zero: bool) -> Result<ParsedTable, TableError> {
    let doc = match serde_json::from_str::<AnyTable>(text) {
        Ok(AnyTable::Bare(entries)) => TableDocument {
            default_zero: false,
            entries,
        },
        Ok(AnyTable::Doc(doc)) => doc,
        Err(_) => {
            // Re-parse strictly as the object form for a precise message.
            serde_json::from_str::<TableDocument>(text)?
        }
    };
    let mut entries = BTreeMap::new();
    for e in doc.entries {
        let p: MPoly = e
            .poly
            .parse()
            .map_err(|err: crate::ratpoly::ParsePolyError| TableError::BadPoly {
                alpha: e.alpha,
                gamma: e.gamma,
                msg: err.to_string(),
            })?;
        if entries.insert((e.alpha, e.gamma), p).is_some() {
            return Err(TableError::Duplicate(e.alpha, e.gamma));
        }
    }
    Ok(ParsedTable {
        entries,
        default_zero: default_zero || doc.default_zero,
    })
}

/// Object-form JSON of the entries with `|α|, |γ| ≤ radius`.
pub fn emit_table(
    table: &StructureCoeffTable,
    radius: i64,
    default_zero: bool,
) -> Result<String, TableError> {
    let entries = table
        .entries(radius)?
        .into_iter()
        .map(|((alpha, gamma), p)| TableEntry {
            alpha,
            gamma,
            poly: p.to_string(),
        })
        .collect();
    let doc = TableDocument {
        default_zero,
        entries,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::rint;
    use crate::repmod::ModuleFamily;

    #[test]
    fn empty_array_with_default_zero_is_trivial() {
        let t = parse_table("[]", true).unwrap().into_table();
        assert!(t.equal_on(&StructureCoeffTable::zero(), 3));
    }

    #[test]
    fn round_trip() {
        let t = StructureCoeffTable::from_family(&ModuleFamily::Vcd {
            c: rint(0),
            d: rint(0),
        });
        let text = emit_table(&t, 4, false).unwrap();
        let back = parse_table(&text, false).unwrap().into_table();
        assert!(back.equal_on(&t, 4));
        assert_eq!(emit_table(&back, 4, false).unwrap(), text);
    }

    #[test]
    fn duplicates_are_named() {
        let text = r#"[{"alpha":1,"gamma":0,"poly":"lam"},{"alpha":1,"gamma":0,"poly":"del"}]"#;
        let err = parse_table(text, false).unwrap_err();
        assert!(matches!(err, TableError::Duplicate(1, 0)));
        assert!(err.to_string().contains("(1, 0)"));
    }

    #[test]
    fn bad_input() {
        assert!(matches!(parse_table("{", false), Err(TableError::Json(_))));
        let text = r#"[{"alpha":1,"gamma":0,"poly":"lam + x"}]"#;
        assert!(matches!(
            parse_table(text, false),
            Err(TableError::BadPoly { .. })
        ));
        let text = r#"[{"alpha":1,"gamma":0,"poly":"0.5*lam"}]"#;
        assert!(parse_table(text, false).is_err());
    }

    #[test]
    fn object_form_flag() {
        let text = r#"{"default_zero": true, "entries": [{"alpha":1,"gamma":0,"poly":"lam"}]}"#;
        let t = parse_table(text, false).unwrap();
        assert!(t.default_zero);
        assert_eq!(t.into_table().coeff(1, 0), MPoly::lambda());
    }
}
