//! Path-tracked JSON decoding helpers.
//!
//! The scenario, map, and campaign parsers all want the same behavior: walk a
//! `serde_json::Value`, collect *every* problem instead of stopping at the
//! first, attach a JSON path to each message, reject unknown keys, and fill
//! defaults for absent optional fields. serde's derive can't do multi-error
//! reporting, so the walking is done by hand through these helpers.

use crate::diag::Issue;
use serde_json::{Map, Value};

/// Accumulates issues found while decoding one document.
pub(crate) struct Cx {
    pub errors: Vec<Issue>,
}

impl Cx {
    pub fn new() -> Self {
        Cx { errors: Vec::new() }
    }

    pub fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue::new(path, message));
    }

    /// `Ok(value)` when no errors were recorded, `Err(all issues)` otherwise.
    pub fn finish<T>(self, value: T) -> Result<T, Vec<Issue>> {
        if self.errors.is_empty() {
            Ok(value)
        } else {
            Err(self.errors)
        }
    }
}

pub(crate) fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// `base.key`, or just `key` at the document root.
pub(crate) fn key_path(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

/// `base[idx]`.
pub(crate) fn idx_path(base: &str, idx: usize) -> String {
    format!("{base}[{idx}]")
}

fn display_path(path: &str) -> &str {
    if path.is_empty() {
        "$"
    } else {
        path
    }
}

/// Reader over one JSON object. Tracks which keys were claimed so
/// [`ObjReader::deny_unknown`] can flag the rest. A reader backed by an
/// absent value behaves as an empty object: optional fields fall back to
/// their defaults, required fields error.
pub(crate) struct ObjReader<'a> {
    map: Option<&'a Map<String, Value>>,
    path: String,
    seen: Vec<&'a str>,
}

impl<'a> ObjReader<'a> {
    /// Reader for a value that must be an object if present. A present
    /// non-object records an error and yields the empty-object behavior.
    pub fn new(cx: &mut Cx, v: Option<&'a Value>, path: impl Into<String>) -> Self {
        let path = path.into();
        let map = match v {
            Some(Value::Object(m)) => Some(m),
            Some(other) => {
                cx.err(display_path(&path), format!("expected object, found {}", type_name(other)));
                None
            }
            None => None,
        };
        ObjReader { map, path, seen: Vec::new() }
    }

    /// Like [`ObjReader::new`] but an absent value is itself an error.
    pub fn required(cx: &mut Cx, v: Option<&'a Value>, path: impl Into<String>) -> Self {
        let path = path.into();
        if v.is_none() {
            cx.err(display_path(&path), "missing required field");
        }
        ObjReader::new(cx, v, path)
    }

    pub fn child_path(&self, key: &str) -> String {
        key_path(&self.path, key)
    }

    /// Claims `key` and returns its value if present.
    pub fn opt(&mut self, key: &str) -> Option<&'a Value> {
        let map = self.map?;
        let (k, v) = map.get_key_value(key)?;
        self.seen.push(k.as_str());
        Some(v)
    }

    /// Claims `key`; records an error if absent.
    pub fn req(&mut self, cx: &mut Cx, key: &str) -> Option<&'a Value> {
        // Only complain about a missing field when the object itself exists;
        // a missing or mistyped parent has already been reported.
        match self.opt(key) {
            Some(v) => Some(v),
            None => {
                if self.map.is_some() {
                    cx.err(self.child_path(key), "missing required field");
                }
                None
            }
        }
    }

    pub fn f64_opt(&mut self, cx: &mut Cx, key: &str) -> Option<f64> {
        let v = self.opt(key)?;
        f64_at(cx, v, &self.child_path(key))
    }

    pub fn f64_or(&mut self, cx: &mut Cx, key: &str, default: f64) -> f64 {
        self.f64_opt(cx, key).unwrap_or(default)
    }

    pub fn f64_req(&mut self, cx: &mut Cx, key: &str) -> Option<f64> {
        let v = self.req(cx, key)?;
        f64_at(cx, v, &self.child_path(key))
    }

    pub fn u64_opt(&mut self, cx: &mut Cx, key: &str) -> Option<u64> {
        let v = self.opt(key)?;
        u64_at(cx, v, &self.child_path(key))
    }

    pub fn u64_or(&mut self, cx: &mut Cx, key: &str, default: u64) -> u64 {
        self.u64_opt(cx, key).unwrap_or(default)
    }

    pub fn usize_req(&mut self, cx: &mut Cx, key: &str) -> Option<usize> {
        let v = self.req(cx, key)?;
        u64_at(cx, v, &self.child_path(key)).map(|n| n as usize)
    }

    pub fn bool_or(&mut self, cx: &mut Cx, key: &str, default: bool) -> bool {
        match self.opt(key) {
            Some(Value::Bool(b)) => *b,
            Some(other) => {
                cx.err(self.child_path(key), format!("expected boolean, found {}", type_name(other)));
                default
            }
            None => default,
        }
    }

    pub fn str_opt(&mut self, cx: &mut Cx, key: &str) -> Option<String> {
        let v = self.opt(key)?;
        str_at(cx, v, &self.child_path(key))
    }

    pub fn str_or(&mut self, cx: &mut Cx, key: &str, default: &str) -> String {
        self.str_opt(cx, key).unwrap_or_else(|| default.to_string())
    }

    pub fn str_req(&mut self, cx: &mut Cx, key: &str) -> Option<String> {
        let v = self.req(cx, key)?;
        str_at(cx, v, &self.child_path(key))
    }

    pub fn arr_opt(&mut self, cx: &mut Cx, key: &str) -> Option<&'a Vec<Value>> {
        let v = self.opt(key)?;
        arr_at(cx, v, &self.child_path(key))
    }

    pub fn arr_req(&mut self, cx: &mut Cx, key: &str) -> Option<&'a Vec<Value>> {
        let v = self.req(cx, key)?;
        arr_at(cx, v, &self.child_path(key))
    }

    /// Records an error for every key not claimed by a prior read. serde_json
    /// maps iterate in sorted key order, so the error list is deterministic.
    pub fn deny_unknown(&self, cx: &mut Cx) {
        let Some(map) = self.map else { return };
        for key in map.keys() {
            if !self.seen.contains(&key.as_str()) {
                cx.err(self.child_path(key), "unknown field");
            }
        }
    }
}

pub(crate) fn f64_at(cx: &mut Cx, v: &Value, path: &str) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        other => {
            cx.err(path, format!("expected number, found {}", type_name(other)));
            None
        }
    }
}

pub(crate) fn u64_at(cx: &mut Cx, v: &Value, path: &str) -> Option<u64> {
    match v {
        Value::Number(n) => match n.as_u64() {
            Some(u) => Some(u),
            None => {
                cx.err(path, format!("expected unsigned integer, found {n}"));
                None
            }
        },
        other => {
            cx.err(path, format!("expected unsigned integer, found {}", type_name(other)));
            None
        }
    }
}

pub(crate) fn str_at(cx: &mut Cx, v: &Value, path: &str) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        other => {
            cx.err(path, format!("expected string, found {}", type_name(other)));
            None
        }
    }
}

pub(crate) fn arr_at<'a>(cx: &mut Cx, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
    match v {
        Value::Array(a) => Some(a),
        other => {
            cx.err(path, format!("expected array, found {}", type_name(other)));
            None
        }
    }
}

/// Decodes a fixed-length array of numbers, e.g. an NED triple.
pub(crate) fn f64_tuple<const N: usize>(cx: &mut Cx, v: &Value, path: &str) -> Option<[f64; N]> {
    let arr = arr_at(cx, v, path)?;
    if arr.len() != N {
        cx.err(path, format!("expected array of {N} numbers, found {} elements", arr.len()));
        return None;
    }
    let mut out = [0.0; N];
    let mut ok = true;
    for (i, item) in arr.iter().enumerate() {
        match f64_at(cx, item, &idx_path(path, i)) {
            Some(x) => out[i] = x,
            None => ok = false,
        }
    }
    ok.then_some(out)
}

/// Parses document text to a `Value`, mapping syntax errors to a single
/// issue at `$` that carries serde's line/column description.
pub(crate) fn parse_document(cx: &mut Cx, text: &str) -> Option<Value> {
    match serde_json::from_str(text) {
        Ok(v) => Some(v),
        Err(e) => {
            cx.err("$", format!("invalid JSON: {e}"));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn collects_multiple_errors_with_paths() {
        let mut cx = Cx::new();
        let doc = json!({"a": "x", "b": {"c": true}, "junk": 1});
        let mut root = ObjReader::new(&mut cx, Some(&doc), "");
        root.f64_req(&mut cx, "a");
        let mut b = ObjReader::new(&mut cx, root.opt("b"), "b");
        b.f64_req(&mut cx, "c");
        b.str_req(&mut cx, "d");
        b.deny_unknown(&mut cx);
        root.deny_unknown(&mut cx);
        let errs = cx.finish(()).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, vec!["a", "b.c", "b.d", "junk"]);
    }

    #[test]
    fn absent_section_uses_defaults_silently() {
        let mut cx = Cx::new();
        let doc = json!({});
        let mut root = ObjReader::new(&mut cx, Some(&doc), "");
        let mut env = ObjReader::new(&mut cx, root.opt("environment"), "environment");
        assert_eq!(env.f64_or(&mut cx, "speed_mps", 5.0), 5.0);
        assert!(cx.finish(()).is_ok());
    }

    #[test]
    fn missing_parent_reports_once() {
        // A missing required object reports itself, not every child field.
        let mut cx = Cx::new();
        let doc = json!({});
        let mut root = ObjReader::new(&mut cx, Some(&doc), "");
        let mut plan = ObjReader::required(&mut cx, root.opt("plan"), "plan");
        plan.arr_req(&mut cx, "waypoints");
        let errs = cx.finish(()).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].path, "plan");
    }

    #[test]
    fn u64_rejects_negative_and_fractional() {
        let mut cx = Cx::new();
        let doc = json!({"a": -3, "b": 1.5, "c": 7});
        let mut root = ObjReader::new(&mut cx, Some(&doc), "");
        assert_eq!(root.u64_opt(&mut cx, "a"), None);
        assert_eq!(root.u64_opt(&mut cx, "b"), None);
        assert_eq!(root.u64_opt(&mut cx, "c"), Some(7));
        assert_eq!(cx.errors.len(), 2);
    }

    #[test]
    fn tuple_length_mismatch() {
        let mut cx = Cx::new();
        let v = json!([1.0, 2.0]);
        assert_eq!(f64_tuple::<3>(&mut cx, &v, "home.ned"), None);
        assert!(cx.errors[0].message.contains("3 numbers"));
    }

    #[test]
    fn syntax_error_lands_at_dollar() {
        let mut cx = Cx::new();
        assert!(parse_document(&mut cx, "{ nope").is_none());
        assert_eq!(cx.errors[0].path, "$");
        assert!(cx.errors[0].message.contains("invalid JSON"));
    }
}
