// SPDX-License-Identifier: Apache-2.0
//! Template assets and `{{name}}` substitution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    RefModelGen,
    CoverageRefine,
    VerilogGen,
    SyntaxFixPython,
    SyntaxFixVerilog,
    FunctionFix,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::RefModelGen,
        PromptKind::CoverageRefine,
        PromptKind::VerilogGen,
        PromptKind::SyntaxFixPython,
        PromptKind::SyntaxFixVerilog,
        PromptKind::FunctionFix,
    ];

    pub fn file_stem(&self) -> &'static str {
        match self {
            PromptKind::RefModelGen => "ref_model_gen",
            PromptKind::CoverageRefine => "coverage_refine",
            PromptKind::VerilogGen => "verilog_gen",
            PromptKind::SyntaxFixPython => "syntax_fix_python",
            PromptKind::SyntaxFixVerilog => "syntax_fix_verilog",
            PromptKind::FunctionFix => "function_fix",
        }
    }

    /// Placeholders the renderer binds for this kind.
    fn bindings(&self) -> &'static [&'static str] {
        match self {
            PromptKind::RefModelGen => &["description", "module_name", "kind", "port_table", "model_contract", "input_names"],
            PromptKind::CoverageRefine => &[
                "coverage_percent",
                "threshold_percent",
                "uncovered_line_count",
                "uncovered_lines",
                "uncovered_branch_count",
                "model_source",
                "current_tests",
                "input_names",
            ],
            PromptKind::VerilogGen => &["description", "module_name", "module_header", "clocking"],
            PromptKind::SyntaxFixPython | PromptKind::SyntaxFixVerilog => &["source", "diagnostics"],
            PromptKind::FunctionFix => &["feedback", "source", "clocking", "module_name"],
        }
    }
}

/// Shared text pieces spliced into several prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Fragment {
    ClockingSequential,
    ClockingCombinational,
    ContractSequential,
    ContractCombinational,
}

impl Fragment {
    const ALL: [Fragment; 4] = [
        Fragment::ClockingSequential,
        Fragment::ClockingCombinational,
        Fragment::ContractSequential,
        Fragment::ContractCombinational,
    ];

    fn file_stem(&self) -> &'static str {
        match self {
            Fragment::ClockingSequential => "clocking_sequential",
            Fragment::ClockingCombinational => "clocking_combinational",
            Fragment::ContractSequential => "model_contract_sequential",
            Fragment::ContractCombinational => "model_contract_combinational",
        }
    }

    fn bindings(&self) -> &'static [&'static str] {
        match self {
            Fragment::ClockingSequential => &["clock", "reset_clause"],
            Fragment::ClockingCombinational => &[],
            Fragment::ContractSequential => &["reset_note", "output_names"],
            Fragment::ContractCombinational => &["output_names"],
        }
    }

    fn builtin(&self) -> &'static str {
        match self {
            Fragment::ClockingSequential => include_str!("../../templates/clocking_sequential.txt"),
            Fragment::ClockingCombinational => include_str!("../../templates/clocking_combinational.txt"),
            Fragment::ContractSequential => include_str!("../../templates/model_contract_sequential.txt"),
            Fragment::ContractCombinational => include_str!("../../templates/model_contract_combinational.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub system_text: String,
    pub user_template: String,
}

fn builtin_pair(kind: PromptKind) -> (&'static str, &'static str) {
    match kind {
        PromptKind::RefModelGen => (
            include_str!("../../templates/ref_model_gen.system.txt"),
            include_str!("../../templates/ref_model_gen.user.txt"),
        ),
        PromptKind::CoverageRefine => (
            include_str!("../../templates/coverage_refine.system.txt"),
            include_str!("../../templates/coverage_refine.user.txt"),
        ),
        PromptKind::VerilogGen => (
            include_str!("../../templates/verilog_gen.system.txt"),
            include_str!("../../templates/verilog_gen.user.txt"),
        ),
        PromptKind::SyntaxFixPython => (
            include_str!("../../templates/syntax_fix_python.system.txt"),
            include_str!("../../templates/syntax_fix_python.user.txt"),
        ),
        PromptKind::SyntaxFixVerilog => (
            include_str!("../../templates/syntax_fix_verilog.system.txt"),
            include_str!("../../templates/syntax_fix_verilog.user.txt"),
        ),
        PromptKind::FunctionFix => (
            include_str!("../../templates/function_fix.system.txt"),
            include_str!("../../templates/function_fix.user.txt"),
        ),
    }
}

/// Every template and fragment, either embedded or read from a directory.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<PromptKind, PromptTemplate>,
    fragments: BTreeMap<Fragment, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = PromptKind::ALL
            .iter()
            .map(|&kind| {
                let (system, user) = builtin_pair(kind);
                (
                    kind,
                    PromptTemplate {
                        kind,
                        system_text: system.trim_end().to_string(),
                        user_template: user.to_string(),
                    },
                )
            })
            .collect();
        let fragments = Fragment::ALL
            .iter()
            .map(|&f| (f, f.builtin().trim_end().to_string()))
            .collect();
        Self { templates, fragments }
    }

    /// Built-in set with any file present in `dir` taking precedence. File
    /// names follow `<kind>.system.txt`, `<kind>.user.txt`, `<fragment>.txt`.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::builtin();
        let read = |name: String| -> Result<Option<String>, PromptError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(text) => Ok(Some(text)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(source) => Err(PromptError::Io { path, source }),
            }
        };
        for kind in PromptKind::ALL {
            let t = set.templates.get_mut(&kind).expect("all kinds present");
            if let Some(s) = read(format!("{}.system.txt", kind.file_stem()))? {
                t.system_text = s.trim_end().to_string();
            }
            if let Some(u) = read(format!("{}.user.txt", kind.file_stem()))? {
                t.user_template = u;
            }
        }
        for f in Fragment::ALL {
            if let Some(text) = read(format!("{}.txt", f.file_stem()))? {
                set.fragments.insert(f, text.trim_end().to_string());
            }
        }
        set.check()?;
        Ok(set)
    }

    /// Rejects templates that use placeholders the renderer never binds.
    pub fn check(&self) -> Result<(), PromptError> {
        let mut sources: Vec<(&str, &str, &[&str])> = Vec::new();
        for t in self.templates.values() {
            sources.push((t.kind.file_stem(), &t.user_template, t.kind.bindings()));
            sources.push((t.kind.file_stem(), &t.system_text, &[]));
        }
        for (f, text) in &self.fragments {
            sources.push((f.file_stem(), text, f.bindings()));
        }
        for (name, text, allowed) in sources {
            for ph in placeholders(text)? {
                if !allowed.contains(&ph) {
                    return Err(PromptError::UnknownPlaceholder {
                        template: name.to_string(),
                        name: ph.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn template(&self, kind: PromptKind) -> &PromptTemplate {
        &self.templates[&kind]
    }

    pub(crate) fn fragment(&self, f: Fragment) -> &str {
        &self.fragments[&f]
    }
}

/// Placeholder names in template order.
pub fn placeholders(template: &str) -> Result<Vec<&str>, PromptError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| PromptError::Malformed(template_excerpt(rest, start)))?;
        let name = after[..end].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(PromptError::Malformed(template_excerpt(rest, start)));
        }
        out.push(name);
        rest = &after[end + 2..];
    }
    Ok(out)
}

fn template_excerpt(text: &str, at: usize) -> String {
    text[at..].chars().take(40).collect()
}

/// Substitutes every `{{name}}` in one pass; substituted values are not
/// rescanned, so they may contain braces freely.
pub fn render(template: &str, bindings: &[(&str, String)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| PromptError::Malformed(template_excerpt(rest, start)))?;
        let name = after[..end].trim();
        let value = bindings
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v)
            .ok_or_else(|| PromptError::MissingField(name.to_string()))?;
        if value.trim().is_empty() {
            return Err(PromptError::MissingField(name.to_string()));
        }
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_once() {
        let got = render("a={{a}} b={{ b }}", &[("a", "{{b}}".into()), ("b", "2".into())]).unwrap();
        assert_eq!(got, "a={{b}} b=2");
    }

    #[test]
    fn unbound_and_empty_are_errors() {
        assert!(matches!(render("{{x}}", &[]), Err(PromptError::MissingField(n)) if n == "x"));
        assert!(matches!(render("{{x}}", &[("x", "  ".into())]), Err(PromptError::MissingField(_))));
        assert!(matches!(render("{{x", &[]), Err(PromptError::Malformed(_))));
    }

    #[test]
    fn builtin_set_is_consistent() {
        TemplateSet::builtin().check().unwrap();
        for kind in PromptKind::ALL {
            let t = TemplateSet::builtin().template(kind).clone();
            let used = placeholders(&t.user_template).unwrap();
            for b in kind.bindings() {
                assert!(used.contains(b), "{} never uses {b}", kind.file_stem());
            }
        }
    }

    #[test]
    fn overrides_replace_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("verilog_gen.system.txt"), "Be brief.\n").unwrap();
        let set = TemplateSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.template(PromptKind::VerilogGen).system_text, "Be brief.");
        assert_eq!(
            set.template(PromptKind::FunctionFix),
            TemplateSet::builtin().template(PromptKind::FunctionFix)
        );
        fs::write(dir.path().join("function_fix.user.txt"), "{{nonsense}}").unwrap();
        assert!(matches!(
            TemplateSet::with_overrides(dir.path()),
            Err(PromptError::UnknownPlaceholder { .. })
        ));
    }
}
