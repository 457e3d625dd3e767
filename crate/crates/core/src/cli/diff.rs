use serde_json::Value;

use super::DiffArgs;
use crate::checkpoint::read_json;
use crate::error::{Error, Result};

/// `(path, value)` for every number in a JSON tree.
fn numbers(v: &Value, prefix: &str, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Number(n) => out.push((prefix.to_string(), n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                numbers(x, &format!("{prefix}[{i}]"), out);
            }
        }
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                numbers(x, &p, out);
            }
        }
        _ => {}
    }
}

pub(super) fn run(args: &DiffArgs) -> Result<()> {
    let left: Value = read_json(&args.left)?;
    let right: Value = read_json(&args.right)?;
    let hash = |v: &Value| {
        v.get("config_hash")
            .and_then(Value::as_str)
            .map(str::to_string)
    };
    match (hash(&left), hash(&right)) {
        (Some(a), Some(b)) if a == b => {}
        (a, b) => {
            return Err(Error::invalid(format!(
                "refusing to compare outputs of different configs ({} vs {})",
                a.as_deref().unwrap_or("none"),
                b.as_deref().unwrap_or("none")
            )))
        }
    }
    let (mut l, mut r) = (Vec::new(), Vec::new());
    numbers(&left, "", &mut l);
    numbers(&right, "", &mut r);
    let mut differing = 0;
    for (path, a) in &l {
        match r.iter().find(|(p, _)| p == path) {
            Some((_, b)) if a.to_bits() != b.to_bits() => {
                differing += 1;
                super::say(format_args!("{path}: {a} -> {b} (Δ {:+.3e})", b - a));
            }
            Some(_) => {}
            None => {
                differing += 1;
                super::say(format_args!("{path}: {a} -> (missing)"));
            }
        }
    }
    for (path, b) in &r {
        if !l.iter().any(|(p, _)| p == path) {
            differing += 1;
            super::say(format_args!("{path}: (missing) -> {b}"));
        }
    }
    super::say(format_args!("{differing} differing numeric fields"));
    Ok(())
}
