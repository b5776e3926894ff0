// SPDX-License-Identifier: Apache-2.0
//! Self-checking Verilog testbenches built from reference traces.
//!
//! Sequential timing: the clock has period 10 and starts high, so falling
//! edges fall at 5, 15, 25 and rising edges at 10, 20, 30. Reset is held
//! through the first rising edge. Trace cycle `c` drives its inputs 1 unit
//! after the falling edge that opens it and compares 3 units later, just
//! before the rising edge that closes it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BitVec, CycleRecord, DesignKind, Direction, Logic, PortRole, ProblemSpec, SimTrace, TraceError};

pub const TB_TOP: &str = "tb_top";
pub const TB_INSTANCE: &str = "tb_dut";
pub const MISMATCH_FORMAT: &str = "MISMATCH cycle=%0d signal=%s expected=%h observed=%h";
/// Printed by a trace-replay module when the stimulus leaves the traced path.
pub const REPLAY_MISS: &str = "REPLAY miss";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestbenchError {
    #[error("trace has no cycles")]
    EmptyTrace,
    #[error("trace does not fit the interface: {0}")]
    PortMismatch(#[from] TraceError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestbenchOptions {
    /// Emit `$dumpvars` into `tb.vcd` for manual debugging.
    pub dump_vcd: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestbenchSource {
    pub source: String,
    pub top: String,
    pub mismatch_line_format: String,
    pub expected_cycle_count: usize,
}

fn range(width: u32) -> String {
    if width == 1 {
        String::new()
    } else {
        format!("[{}:0] ", width - 1)
    }
}

fn compare(out: &mut String, indent: &str, cycle: u64, name: &str, expected: &BitVec) {
    let lit = expected.to_verilog();
    let _ = writeln!(
        out,
        "{indent}if ({name} !== {lit}) begin $display(\"{MISMATCH_FORMAT}\", {cycle}, \"{name}\", {lit}, {name}); tb_mismatches = tb_mismatches + 1; end"
    );
}

/// Builds a testbench that drives `trace` into the module declared by
/// `spec` and reports every differing output.
pub fn synthesize_testbench(spec: &ProblemSpec, trace: &SimTrace, opts: &TestbenchOptions) -> Result<TestbenchSource, TestbenchError> {
    if trace.is_empty() {
        return Err(TestbenchError::EmptyTrace);
    }
    trace.validate_against(spec)?;
    let mut s = String::new();
    let _ = writeln!(s, "module {TB_TOP};");
    for p in &spec.ports {
        match p.role {
            PortRole::Clock => {
                let _ = writeln!(s, "  reg {} = 1'b1;", p.name);
            }
            PortRole::Reset => {
                let _ = writeln!(s, "  reg {} = 1'b1;", p.name);
            }
            PortRole::Data => match p.direction {
                Direction::Input => {
                    let _ = writeln!(s, "  reg {}{} = {};", range(p.width), p.name, BitVec::zero(p.width).expect("validated width").to_verilog());
                }
                Direction::Output => {
                    let _ = writeln!(s, "  wire {}{};", range(p.width), p.name);
                }
            },
        }
    }
    let _ = writeln!(s, "  integer tb_mismatches = 0;");
    let conns: Vec<String> = spec.ports.iter().map(|p| format!(".{0}({0})", p.name)).collect();
    let _ = writeln!(s, "  {} {TB_INSTANCE} ({});", spec.module_name, conns.join(", "));
    if let Some(clk) = spec.clock() {
        let _ = writeln!(s, "  always #5 {0} = ~{0};", clk.name);
    }
    let _ = writeln!(s, "  initial begin");
    if opts.dump_vcd {
        let _ = writeln!(s, "    $dumpfile(\"tb.vcd\");\n    $dumpvars(0, {TB_TOP});");
    }
    let ind = "    ";
    match spec.kind {
        DesignKind::Sequential => {
            let clk = &spec.clock().expect("validated sequential spec has a clock").name;
            if spec.reset().is_some() {
                let _ = writeln!(s, "{ind}@(posedge {clk});");
            }
            for (i, rec) in trace.cycles.iter().enumerate() {
                let _ = writeln!(s, "{ind}// cycle {}", rec.cycle_index);
                let _ = writeln!(s, "{ind}@(negedge {clk}); #1;");
                if i == 0 {
                    if let Some(rst) = spec.reset() {
                        let _ = writeln!(s, "{ind}{} = 1'b0;", rst.name);
                    }
                }
                for (name, v) in &rec.inputs {
                    let _ = writeln!(s, "{ind}{name} = {};", v.to_verilog());
                }
                let _ = writeln!(s, "{ind}#3;");
                for (name, v) in &rec.outputs {
                    if let Logic::Known(b) = v {
                        compare(&mut s, ind, rec.cycle_index, name, b);
                    }
                }
            }
        }
        DesignKind::Combinational => {
            for rec in &trace.cycles {
                let _ = writeln!(s, "{ind}// cycle {}", rec.cycle_index);
                for (name, v) in &rec.inputs {
                    let _ = writeln!(s, "{ind}{name} = {};", v.to_verilog());
                }
                let _ = writeln!(s, "{ind}#1;");
                for (name, v) in &rec.outputs {
                    if let Logic::Known(b) = v {
                        compare(&mut s, ind, rec.cycle_index, name, b);
                    }
                }
            }
        }
    }
    let _ = writeln!(s, "{ind}if (tb_mismatches == 0) $display(\"RESULT pass mismatches=0\");");
    let _ = writeln!(s, "{ind}else $display(\"RESULT fail mismatches=%0d\", tb_mismatches);");
    let _ = writeln!(s, "{ind}$finish;");
    let _ = writeln!(s, "  end");
    let _ = writeln!(s, "endmodule");
    Ok(TestbenchSource {
        source: s,
        top: TB_TOP.to_string(),
        mismatch_line_format: MISMATCH_FORMAT.to_string(),
        expected_cycle_count: trace.len(),
    })
}

fn concat(names: &[&str]) -> String {
    if names.len() == 1 {
        names[0].to_string()
    } else {
        format!("{{{}}}", names.join(", "))
    }
}

/// Renders the trace as a module with the spec's interface that plays the
/// recorded outputs back.
///
/// Stimulus that leaves the recorded path (a different input at some cycle,
/// or more cycles than were recorded) prints a `REPLAY miss` line and
/// drives unknown outputs from then on. Combinational traces are replayed
/// as a lookup table, so vector order does not matter there.
pub fn render_trace_replay(spec: &ProblemSpec, trace: &SimTrace) -> Result<String, TestbenchError> {
    if trace.is_empty() {
        return Err(TestbenchError::EmptyTrace);
    }
    trace.validate_against(spec)?;
    let mut s = String::new();
    let decls: Vec<String> = spec
        .ports
        .iter()
        .map(|p| match p.direction {
            Direction::Input => format!("  input {}{}", range(p.width), p.name),
            Direction::Output => format!("  output reg {}{}", range(p.width), p.name),
        })
        .collect();
    let _ = writeln!(s, "module {} (\n{}\n);", spec.module_name, decls.join(",\n"));
    let inputs: Vec<&str> = spec.inputs().map(|p| p.name.as_str()).collect();
    let in_width: u32 = spec.inputs().map(|p| p.width).sum();
    let unknown = |s: &mut String, ind: &str| {
        for p in spec.outputs() {
            let _ = writeln!(s, "{ind}{} = {}'bx;", p.name, p.width);
        }
    };
    let assign = |s: &mut String, ind: &str, rec: &CycleRecord| {
        for (name, v) in &rec.outputs {
            let lit = match v {
                Logic::Known(b) => b.to_verilog(),
                Logic::Unknown { width } => format!("{width}'bx"),
            };
            let _ = writeln!(s, "{ind}{name} = {lit};");
        }
    };
    let key_lit = |rec: &CycleRecord| -> String {
        let bits: String = spec
            .inputs()
            .map(|p| format!("{:0w$b}", rec.inputs[&p.name].value(), w = p.width as usize))
            .collect();
        format!("{in_width}'b{bits}")
    };
    let _ = writeln!(s, "  reg tb_hit;");
    match spec.kind {
        DesignKind::Combinational if inputs.is_empty() => {
            let _ = writeln!(s, "  initial tb_hit = 1'b1;\n  always @* begin");
            assign(&mut s, "    ", &trace.cycles[0]);
            let _ = writeln!(s, "  end");
        }
        DesignKind::Combinational => {
            let _ = writeln!(s, "  always @* begin\n    tb_hit = 1'b1;\n    case ({})", concat(&inputs));
            let mut seen = std::collections::BTreeSet::new();
            for rec in &trace.cycles {
                let key = key_lit(rec);
                if !seen.insert(key.clone()) {
                    continue;
                }
                let _ = writeln!(s, "      {key}: begin");
                assign(&mut s, "        ", rec);
                let _ = writeln!(s, "      end");
            }
            let _ = writeln!(s, "      default: begin\n        tb_hit = 1'b0;");
            unknown(&mut s, "        ");
            let _ = writeln!(s, "      end\n    endcase\n  end");
            let _ = writeln!(
                s,
                "  always @({}) begin\n    #1;\n    if (!tb_hit) $display(\"{REPLAY_MISS} inputs=%h\", {});\n  end",
                inputs.join(" or "),
                concat(&inputs)
            );
        }
        DesignKind::Sequential => {
            let clk = &spec.clock().expect("validated sequential spec has a clock").name;
            let _ = writeln!(s, "  reg tb_ok = 1'b1;\n  integer tb_cycle = 0;");
            let _ = writeln!(s, "  always @* begin\n    tb_hit = 1'b0;");
            unknown(&mut s, "    ");
            let _ = writeln!(s, "    if (tb_ok) begin\n      case (tb_cycle)");
            for rec in &trace.cycles {
                let cond = if inputs.is_empty() {
                    "1'b1".to_string()
                } else {
                    format!("{} == {}", concat(&inputs), key_lit(rec))
                };
                let _ = writeln!(s, "        {}: if ({cond}) begin\n          tb_hit = 1'b1;", rec.cycle_index);
                assign(&mut s, "          ", rec);
                let _ = writeln!(s, "        end");
            }
            let _ = writeln!(s, "        default: ;\n      endcase\n    end\n  end");
            let _ = writeln!(s, "  always @(posedge {clk}) begin");
            match spec.reset() {
                Some(rst) => {
                    let _ = writeln!(s, "    if ({}) begin\n      tb_cycle <= 0;\n      tb_ok <= 1'b1;\n    end else if (tb_ok) begin", rst.name);
                }
                None => {
                    let _ = writeln!(s, "    if (tb_ok) begin");
                }
            }
            let _ = writeln!(
                s,
                "      if (!tb_hit) begin\n        tb_ok <= 1'b0;\n        $display(\"{REPLAY_MISS} cycle=%0d\", tb_cycle);\n      end\n      tb_cycle <= tb_cycle + 1;\n    end\n  end"
            );
        }
    }
    let _ = writeln!(s, "endmodule");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PortDecl;

    fn bv(w: u32, v: u64) -> BitVec {
        BitVec::new(w, v).unwrap()
    }

    fn counter() -> ProblemSpec {
        ProblemSpec {
            id: "c".into(),
            description: "counter".into(),
            module_name: "counter3".into(),
            ports: vec![
                PortDecl::clock("clk"),
                PortDecl::reset("rst"),
                PortDecl::data_in("en", 1),
                PortDecl::data_out("count", 3),
            ],
            kind: DesignKind::Sequential,
            golden_testbench: None,
        }
    }

    fn counter_trace(en: &[u64]) -> SimTrace {
        let mut n = 0;
        SimTrace::new(
            en.iter()
                .enumerate()
                .map(|(i, &e)| {
                    let rec = CycleRecord {
                        cycle_index: i as u64,
                        inputs: [("en".to_string(), bv(1, e))].into(),
                        outputs: [("count".to_string(), Logic::Known(bv(3, n)))].into(),
                        state: None,
                    };
                    n = (n + e) % 8;
                    rec
                })
                .collect(),
        )
    }

    #[test]
    fn sequential_layout() {
        let tb = synthesize_testbench(&counter(), &counter_trace(&[1, 1, 0]), &TestbenchOptions::default()).unwrap();
        assert_eq!(tb.expected_cycle_count, 3);
        assert_eq!(tb.source.matches("$display(\"MISMATCH").count(), 3);
        assert!(tb.source.contains("counter3 tb_dut (.clk(clk), .rst(rst), .en(en), .count(count));"));
        assert!(tb.source.contains("always #5 clk = ~clk;"));
        assert!(tb.source.contains("if (count !== 3'h2) begin"));
        let reset = tb.source.find("@(posedge clk);").unwrap();
        let first = tb.source.find("@(negedge clk)").unwrap();
        assert!(reset < first);
        assert_eq!(tb.source.matches("rst = 1'b0;").count(), 1);
        assert!(!tb.source.contains("$dumpvars"));
    }

    #[test]
    fn empty_and_mismatched_traces() {
        assert_eq!(
            synthesize_testbench(&counter(), &SimTrace::default(), &TestbenchOptions::default()),
            Err(TestbenchError::EmptyTrace)
        );
        let mut t = counter_trace(&[1]);
        t.cycles[0].inputs.insert("bogus".into(), bv(1, 0));
        assert!(matches!(
            synthesize_testbench(&counter(), &t, &TestbenchOptions::default()),
            Err(TestbenchError::PortMismatch(_))
        ));
    }

    #[test]
    fn only_ports_and_tb_locals() {
        let tb = synthesize_testbench(&counter(), &counter_trace(&[1, 0, 1]), &TestbenchOptions { dump_vcd: true }).unwrap();
        let allowed = [
            "module", "endmodule", "reg", "wire", "integer", "always", "initial", "begin", "end", "if", "else", "posedge",
            "negedge", "h0", "h1", "h2", "b1", "b0", "clk", "rst", "en", "count", "counter3", "cycle", "pass", "fail",
        ];
        let stripped: String = tb
            .source
            .lines()
            .map(|l| l.split("//").next().unwrap())
            .map(|l| {
                // drop string literals
                l.split('"').step_by(2).collect::<Vec<_>>().join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n");
        for word in stripped.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '$')) {
            if word.is_empty() || word.starts_with('$') || word.starts_with("tb_") || word.chars().all(|c| c.is_ascii_digit()) {
                continue;
            }
            assert!(allowed.contains(&word), "unexpected identifier {word}");
        }
    }
}
