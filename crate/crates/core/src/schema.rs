//! Version headers carried by every file the crate writes.

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub(crate) const MAJOR: u32 = 1;
pub(crate) const VERSION: &str = "1.0";

pub(crate) const HISTORY: &str = "curvequant/history";
pub(crate) const CHECKPOINT: &str = "curvequant/checkpoint";
pub(crate) const SUMMARY: &str = "curvequant/summary";
pub(crate) const RANKING: &str = "curvequant/ranking";
pub(crate) const SCATTER: &str = "curvequant/scatter";
pub(crate) const PARETO: &str = "curvequant/pareto";
pub(crate) const REPORT: &str = "curvequant/report";

/// `{"schema": name, "version": VERSION}` followed by `body`'s fields.
pub(crate) fn with_header(name: &str, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), Value::String(name.into()));
    map.insert("version".into(), Value::String(VERSION.into()));
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

fn check_version(name: &str, version: &str) -> Result<()> {
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok())
        .ok_or_else(|| Error::format(format!("{name}: malformed version {version:?}")))?;
    if major > MAJOR {
        return Err(Error::UnsupportedVersion {
            schema: name.into(),
            found: version.into(),
            supported: MAJOR,
        });
    }
    Ok(())
}

/// Checks a JSON object's header.
pub(crate) fn check(name: &str, value: &Value) -> Result<()> {
    let found = value.get("schema").and_then(Value::as_str);
    if found != Some(name) {
        return Err(Error::format(format!(
            "expected a {name} document, found schema {found:?}"
        )));
    }
    let version = value
        .get("version")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::format(format!("{name}: missing version")))?;
    check_version(name, version)
}

/// Comment line opening a CSV file.
pub(crate) fn csv_header(name: &str) -> String {
    format!("# schema={name} version={VERSION}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn header_round_trip() {
        let v = with_header(SUMMARY, json!({"a": 1}));
        assert_eq!(v["a"], 1);
        check(SUMMARY, &v).unwrap();
        assert!(check(HISTORY, &v).is_err());
        assert_eq!(csv_header(RANKING), "# schema=curvequant/ranking version=1.0");
    }

    #[test]
    fn newer_major_is_refused() {
        let v = json!({"schema": SUMMARY, "version": "2.0"});
        assert!(matches!(check(SUMMARY, &v), Err(Error::UnsupportedVersion { .. })));
        assert!(check(SUMMARY, &json!({"schema": SUMMARY, "version": "1.7"})).is_ok());
    }
}
