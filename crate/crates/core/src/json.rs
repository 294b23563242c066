//! Pretty JSON with numeric arrays kept on one line, so matrices read row by row.

use serde::Serialize;
use serde_json::Value;

fn scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(scalar) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&item.to_string());
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write(item, indent + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write(item, indent + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Pretty-prints `value` with a trailing newline. Non-finite floats become `null`.
pub fn to_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serialises to JSON");
    let mut out = String::new();
    write(&v, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_rows_stay_on_one_line_and_parse_back() {
        let v = serde_json::json!({"m": [[1.0, 2.5], [0.1, -3e-7]], "s": "x", "e": [], "o": {"k": null}});
        let text = to_pretty(&v);
        assert!(text.contains("[1.0, 2.5]"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn infinity_is_null() {
        assert_eq!(to_pretty(&[f64::INFINITY]), "[null]\n");
    }
}
