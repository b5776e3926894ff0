// SPDX-License-Identifier: Apache-2.0
//! Two-stage LLM pipeline for Verilog generation.
//!
//! Stage 1 asks a model for an executable Python reference model plus input
//! vectors, repairs it until it runs, and extends the vectors until line
//! coverage reaches a threshold. The resulting trace becomes a
//! self-checking Verilog testbench. Stage 2 asks for the Verilog design and
//! repairs it against compiler diagnostics and testbench mismatches.

pub mod model;
pub mod llm;
pub mod prompt;
pub mod exec;
pub mod harness;
pub mod testbench;
pub mod toolchain;
pub mod pipeline;
pub mod eval;
pub mod config;
