use std::io::Write;

use serde_json::{Map, Value};

/// JSONL event stream on stderr, silent unless enabled.
pub struct Progress {
    enabled: bool,
    command: &'static str,
}

impl Progress {
    pub fn new(enabled: bool, command: &'static str) -> Self {
        Self { enabled, command }
    }

    pub fn emit(&self, event: &str, fields: Value) {
        if !self.enabled {
            return;
        }
        let mut obj = match fields {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => Map::from_iter([("value".to_string(), other)]),
        };
        obj.insert("event".into(), event.into());
        obj.insert("command".into(), self.command.into());
        let line = transpref::jsonl::to_canonical_string(&Value::Object(obj))
            .unwrap_or_else(|_| format!("{{\"event\":\"{event}\"}}"));
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{line}");
    }
}
