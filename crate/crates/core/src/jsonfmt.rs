//! Canonical JSON writer.
//!
//! Emitted files (environments, trajectories, reports, bench tables) must be
//! byte-identical across runs, so objects are written with sorted keys, fixed
//! indentation, and shortest round-trip float formatting. Re-serializing a
//! loaded canonical file reproduces it exactly.

use serde_json::Value;

/// Render `value` canonically: sorted object keys, two-space indent, leaf
/// arrays inline, floats in shortest round-trip form.
pub fn canonical(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out),
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization"))
        }
        Value::Array(items) => write_array(items, indent, out),
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, key) in keys.iter().enumerate() {
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("key serialization"));
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn write_array(items: &[Value], indent: usize, out: &mut String) {
    if items.is_empty() {
        out.push_str("[]");
        return;
    }
    let leaf = items
        .iter()
        .all(|i| !matches!(i, Value::Array(_) | Value::Object(_)));
    if leaf {
        out.push('[');
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_value(item, indent, out);
        }
        out.push(']');
        return;
    }
    out.push_str("[\n");
    for (i, item) in items.iter().enumerate() {
        push_indent(indent + 1, out);
        write_value(item, indent + 1, out);
        if i + 1 < items.len() {
            out.push(',');
        }
        out.push('\n');
    }
    push_indent(indent, out);
    out.push(']');
}

fn write_number(n: &serde_json::Number, out: &mut String) {
    if let Some(i) = n.as_i64() {
        out.push_str(&i.to_string());
    } else if let Some(u) = n.as_u64() {
        out.push_str(&u.to_string());
    } else {
        let f = n.as_f64().expect("finite JSON number");
        // Shortest representation that parses back to the same f64.
        out.push_str(&format!("{f}"));
        debug_assert_eq!(format!("{f}").parse::<f64>().unwrap(), f);
    }
}

fn push_indent(levels: usize, out: &mut String) {
    for _ in 0..levels {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_floats_round_trip() {
        let v = json!({"zeta": 0.1, "alpha": [1.0, 2.5, -3.0e-7], "mid": {"b": true, "a": null}});
        let s = canonical(&v);
        let a = s.find("\"alpha\"").unwrap();
        let m = s.find("\"mid\"").unwrap();
        let z = s.find("\"zeta\"").unwrap();
        assert!(a < m && m < z);
        let reparsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(canonical(&reparsed), s);
    }

    #[test]
    fn save_load_save_is_stable() {
        let v = json!({"x": [0.30000000000000004, 1e300, 17.0], "n": 42});
        let once = canonical(&v);
        let twice = canonical(&serde_json::from_str::<serde_json::Value>(&once).unwrap());
        assert_eq!(once, twice);
    }
}
