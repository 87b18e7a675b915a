//! Document assembly and emission: CSV tables with pinned headers,
//! round-trip-stable JSON, and the shared metadata block.
//!
//! JSON documents are built as [`serde_json::Value`] objects, whose map
//! keys serialize in sorted order; together with shortest-round-trip float
//! formatting this makes parse-then-re-emit the identity on bytes.

use std::fs;

use serde_json::{json, Value};

use crate::settings::Settings;
use crate::Failure;

/// Formats a float as its shortest representation that parses back to the
/// same value — the cell format for CSV columns.
pub fn cell(v: f64) -> String {
    format!("{v}")
}

/// Assembles a CSV document: header, one line per row, `\n` endings,
/// trailing newline.
pub fn csv_document(header: &str, rows: &[Vec<String>]) -> String {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Serializes a JSON document: pretty-printed, sorted keys, trailing
/// newline.
pub fn json_document(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("document values are finite");
    text.push('\n');
    text
}

/// The metadata block shared by every machine-readable document: resolved
/// run parameters, library version, and wall time.
pub fn base_meta(settings: &Settings, wall_ms: u64) -> Value {
    json!({
        "kmax": settings.kmax,
        "quad_points": settings.quad_points,
        "quad_tail": settings.quad().tail,
        "seed": settings.seed,
        "tol": settings.tol,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_ms": wall_ms,
    })
}

/// Extends a metadata block with command-specific keys.
pub fn meta_with(settings: &Settings, wall_ms: u64, extra: &[(&str, Value)]) -> Value {
    let mut meta = base_meta(settings, wall_ms);
    let map = meta.as_object_mut().expect("base_meta is an object");
    for (key, value) in extra {
        map.insert((*key).to_string(), value.clone());
    }
    meta
}

/// Writes a finished document to `--out` when given, otherwise to stdout.
pub fn emit(settings: &Settings, text: &str) -> Result<(), Failure> {
    match &settings.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_trailing_newline_and_unix_endings() {
        let doc = csv_document(
            "a,b",
            &[vec!["1".into(), "2".into()], vec!["0.5".into(), "1.5".into()]],
        );
        assert_eq!(doc, "a,b\n1,2\n0.5,1.5\n");
        assert!(!doc.contains('\r'), "no carriage returns");
    }

    #[test]
    fn cell_round_trips_shortest() {
        for v in [0.1, 2.25, 1.0, 0.153515576491, 1e-9] {
            let text = cell(v);
            let back: f64 = text.parse().expect("cell parses");
            assert!(back == v, "round trip {v} -> {text} -> {back}");
        }
    }

    #[test]
    fn json_reemission_is_identity() {
        let doc = json_document(&json!({
            "rows": [{"axis": 0.5, "c_causal_nats": 0.1535}],
            "meta": {"tol": 1e-6, "version": "0.1.0"},
        }));
        let parsed: Value = serde_json::from_str(&doc).expect("document parses");
        assert_eq!(json_document(&parsed), doc, "parse then re-emit is the identity");
        let meta_pos = doc.find("\"meta\"").expect("meta key present");
        let rows_pos = doc.find("\"rows\"").expect("rows key present");
        assert!(meta_pos < rows_pos, "keys serialize sorted");
    }
}
