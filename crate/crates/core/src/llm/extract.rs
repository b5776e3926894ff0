// SPDX-License-Identifier: Apache-2.0
//! Pulling fenced code out of model responses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeTag {
    Python,
    Verilog,
    Json,
}

impl CodeTag {
    fn matches(&self, info: &str) -> bool {
        let lang = info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
        match self {
            CodeTag::Python => matches!(lang.as_str(), "python" | "py" | "python3"),
            CodeTag::Verilog => matches!(lang.as_str(), "verilog" | "v" | "systemverilog" | "sv"),
            CodeTag::Json => lang == "json",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CodeTag::Python => "python",
            CodeTag::Verilog => "verilog",
            CodeTag::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no {0} code block found in response")]
    NoCodeBlock(&'static str),
}

struct Block<'a> {
    info: &'a str,
    body: Vec<&'a str>,
}

fn fence(line: &str) -> Option<&str> {
    let t = line.trim_start();
    if line.len() - t.len() > 3 {
        return None;
    }
    t.strip_prefix("```").map(str::trim)
}

fn blocks(text: &str) -> Vec<Block<'_>> {
    let mut out = Vec::new();
    let mut open: Option<Block<'_>> = None;
    for line in text.lines() {
        match (&mut open, fence(line)) {
            (None, Some(info)) => open = Some(Block { info, body: Vec::new() }),
            (Some(_), Some("")) => out.push(open.take().unwrap()),
            // a tagged fence inside a block: the previous one was left open
            (Some(_), Some(info)) => {
                out.push(open.take().unwrap());
                open = Some(Block { info, body: Vec::new() });
            }
            (Some(b), None) => b.body.push(line),
            (None, None) => {}
        }
    }
    // an unterminated fence is dropped: its contents may be truncated
    out
}

/// Returns the first fenced block tagged `tag`, falling back to the first
/// untagged block. The result ends in exactly one newline.
pub fn extract_code_block(response: &str, tag: CodeTag) -> Result<String, ExtractError> {
    let all = blocks(response);
    let chosen = all
        .iter()
        .find(|b| tag.matches(b.info))
        .or_else(|| all.iter().find(|b| b.info.is_empty()))
        .ok_or(ExtractError::NoCodeBlock(tag.as_str()))?;
    let body = chosen.body.join("\n");
    let trimmed = body.trim_end_matches(['\n', '\r', ' ', '\t']);
    if trimmed.trim().is_empty() {
        return Err(ExtractError::NoCodeBlock(tag.as_str()));
    }
    Ok(format!("{trimmed}\n"))
}
