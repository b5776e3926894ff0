// SPDX-License-Identifier: Apache-2.0
//! Frozen simulator outputs against hand-checked structured records.

use std::fs;
use std::path::PathBuf;

use autoverifix::model::Severity;
use autoverifix::toolchain::parse_diagnostics;
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    severity: String,
    file: String,
    line: u32,
    message: String,
}

#[derive(Deserialize)]
struct Case {
    fixture: String,
    diagnostics: Vec<Expected>,
}

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/diagnostics")
}

/// Parses every frozen output and compares it with its golden records;
/// panics on the first difference. Returns the number of cases.
pub fn check_diagnostics_corpus() -> usize {
    let cases: Vec<Case> = serde_json::from_str(&fs::read_to_string(corpus().join("expected.json")).unwrap()).unwrap();
    assert!(cases.len() >= 20);
    let n = cases.len();
    for case in cases {
        let text = fs::read_to_string(corpus().join(format!("{}.out", case.fixture))).unwrap();
        let got = parse_diagnostics(&text);
        assert_eq!(got.len(), case.diagnostics.len(), "{}", case.fixture);
        for (g, e) in got.iter().zip(&case.diagnostics) {
            let sev = match g.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            assert_eq!(sev, e.severity, "{}", case.fixture);
            assert_eq!(g.file.as_deref(), Some(e.file.as_str()), "{}", case.fixture);
            assert_eq!(g.line, Some(e.line), "{}", case.fixture);
            assert_eq!(g.message, e.message, "{}", case.fixture);
        }
        // every nonblank tool line lands in exactly one raw, in order
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()).collect();
        let raws: Vec<&str> = got.iter().flat_map(|d| d.raw.lines()).collect();
        assert_eq!(raws, lines, "{}", case.fixture);
        let errors = got.iter().filter(|d| d.is_error()).count();
        let expect_errors = case.diagnostics.iter().filter(|d| d.severity == "error").count();
        assert_eq!(errors, expect_errors);
    }
    n
}
