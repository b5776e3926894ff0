// SPDX-License-Identifier: Apache-2.0
//! Compiler output to structured diagnostics.

use std::sync::LazyLock;

use regex::Regex;

use crate::model::{Diagnostic, Severity};

// %Error: dut.v:7:5: message   /   %Warning-WIDTH: dut.v:3:9: message
static VERILATOR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^%(Error|Warning)(?:-[A-Za-z0-9_]+)?:\s*(?:([^\s:]+):(\d+):(?:\d+:)?\s*)?(.*)$").unwrap()
});
// dut.v:7: syntax error   /   dut.v:3: warning: implicit wire
static LOCATED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([^\s:]+):(\d+):(?:\d+:)?\s*(?:(error|warning|sorry|internal error|fatal error|note):\s*)?(.*)$").unwrap()
});
static SUMMARY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:%Error: Exiting due to \d+|%Error: Cannot continue|\d+ error\(s\)|I give up\.|Elaboration failed|make(?:\[\d+\])?: \*\*\*)").unwrap()
});

fn severity_of(label: &str) -> Severity {
    match label.to_ascii_lowercase().as_str() {
        "warning" | "note" => Severity::Warning,
        _ => Severity::Error,
    }
}

/// Parses compiler output into diagnostics, in tool order.
///
/// Indented lines, summary lines and location lines whose message starts
/// with `:` (a pointer back to an earlier declaration) extend the previous
/// diagnostic's `raw`. Unrecognized text before any diagnostic becomes a
/// raw diagnostic of its own.
pub fn parse_diagnostics(output: &str) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = Vec::new();
    for line in output.lines() {
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() {
            continue;
        }
        let parsed = if let Some(c) = VERILATOR.captures(trimmed) {
            if SUMMARY.is_match(trimmed) {
                None
            } else {
                Some(Diagnostic {
                    severity: severity_of(&c[1]),
                    file: c.get(2).map(|m| m.as_str().to_string()),
                    line: c.get(3).and_then(|m| m.as_str().parse().ok()),
                    message: c[4].trim().to_string(),
                    raw: trimmed.to_string(),
                })
            }
        } else if let Some(c) = LOCATED.captures(trimmed) {
            let msg = c[4].trim();
            if msg.starts_with(':') || (msg.is_empty() && c.get(3).is_none()) {
                None
            } else {
                Some(Diagnostic {
                    severity: c.get(3).map_or(Severity::Error, |m| severity_of(m.as_str())),
                    file: Some(c[1].to_string()),
                    line: c[2].parse().ok(),
                    message: msg.to_string(),
                    raw: trimmed.to_string(),
                })
            }
        } else {
            None
        };
        match (parsed, out.last_mut()) {
            (Some(d), _) => out.push(d),
            (None, Some(prev)) => {
                prev.raw.push('\n');
                prev.raw.push_str(trimmed);
            }
            (None, None) => {
                let text = trimmed.trim();
                let severity = if text.to_ascii_lowercase().contains("error") {
                    Severity::Error
                } else {
                    Severity::Warning
                };
                out.push(Diagnostic {
                    severity,
                    file: None,
                    line: None,
                    message: text.to_string(),
                    raw: trimmed.to_string(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty() {
        assert!(parse_diagnostics("").is_empty());
        assert!(parse_diagnostics("\n  \n").is_empty());
    }

    #[test]
    fn located_shapes() {
        let d = parse_diagnostics("dut.v:7: syntax error");
        assert_eq!(
            d,
            vec![Diagnostic {
                severity: Severity::Error,
                file: Some("dut.v".into()),
                line: Some(7),
                message: "syntax error".into(),
                raw: "dut.v:7: syntax error".into(),
            }]
        );
        let d = parse_diagnostics("dut.v:3: warning: implicit wire");
        assert_eq!(d[0].severity, Severity::Warning);
        assert_eq!(d[0].message, "implicit wire");
    }

    #[test]
    fn verilator_with_continuations() {
        let text = "%Error: dut.v:4:3: syntax error, unexpected endmodule\n    4 |   endmodule\n      |   ^~~~~~~~~\n%Error: Exiting due to 1 error(s)\n";
        let d = parse_diagnostics(text);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, Some(4));
        assert_eq!(d[0].message, "syntax error, unexpected endmodule");
        assert_eq!(d[0].raw.lines().count(), 4);
    }

    #[test]
    fn leading_garbage_is_raw() {
        let d = parse_diagnostics("Segmentation fault\ndut.v:1: error: boom");
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].file, None);
        assert_eq!(d[0].severity, Severity::Warning);
        assert_eq!(d[1].severity, Severity::Error);
        let d = parse_diagnostics("fatal error in tool");
        assert!(d[0].is_error());
    }

    #[test]
    fn back_pointer_is_continuation() {
        let d = parse_diagnostics("dut.v:5: error: 'q' has already been declared.\ndut.v:3:      : It was declared here as a variable.");
        assert_eq!(d.len(), 1);
        assert!(d[0].raw.ends_with("as a variable."));
    }
}
