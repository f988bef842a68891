//! Compilation of graph roots into a flat evaluation tape.
//!
//! [`compile`] lowers the sub-DAG reachable from a set of roots into a
//! [`Program`]: a single-assignment instruction list over value slots.
//! Slots `0..n_inputs` hold the inputs (one per entry of the caller's
//! input layout, in order); each instruction writes exactly one fresh
//! slot. Shared subexpressions are computed once — the graph is already
//! hash-consed, and compilation emits one instruction per reachable
//! non-variable node, in ascending node-id order. Compiling the same
//! graph with the same roots and layout therefore yields byte-identical
//! programs, and evaluation order is fixed, so results are deterministic
//! down to the bit.
//!
//! Definedness follows a poison discipline: a slot is poisoned when any
//! of its operands is poisoned, when the operation hits a domain
//! violation (division by zero, `ln <= 0`, `sqrt < 0`), or when the
//! result is non-finite (including non-finite bindings). An output is
//! defined exactly when its slot is unpoisoned. This is transitive on
//! purpose: `sigmoid(1/0)` evaluates to the finite value 1.0 but is still
//! flagged undefined.
//!
//! Batch evaluation maps rows independently and collects results in row
//! order, so the parallel path (feature `parallel`) is bit-identical to
//! [`Program::evaluate_batch_sequential`].

use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{ExprGraph, NodeId, NodeKind};
use crate::par;

/// Errors from compilation or evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("root {0:?} does not belong to this graph")]
    ForeignRoot(NodeId),
    #[error("expression references variable {0:?} which is not in the input layout")]
    MissingInput(String),
    #[error("duplicate input variable {0:?}")]
    DuplicateInput(String),
    #[error("binding arity mismatch: program takes {expected} inputs, got {got}")]
    BindingArity { expected: usize, got: usize },
}

/// Unary opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnOp {
    Neg,
    Exp,
    Ln,
    Sqrt,
    Sigmoid,
}

/// Binary opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// One tape instruction; `out` is always a fresh slot.
#[derive(Clone, Copy, Debug)]
enum Instr {
    Const { value: f64, out: u32 },
    Un { op: UnOp, a: u32, out: u32 },
    Bin { op: BinOp, a: u32, b: u32, out: u32 },
    Pow { a: u32, exponent: f64, out: u32 },
}

/// Compiled single-assignment program.
#[derive(Clone, Debug)]
pub struct Program {
    instrs: Vec<Instr>,
    inputs: Vec<String>,
    /// Slot of each output, in root order. May point at an input slot
    /// (bare-variable root) or an instruction result.
    outputs: Vec<u32>,
    n_slots: usize,
}

/// Result of evaluating a program at one binding row: one value and one
/// definedness flag per output, in root order.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
}

/// Reusable evaluation buffers; see [`Program::evaluate_into`].
#[derive(Clone, Debug, Default)]
pub struct EvalScratch {
    slots: Vec<f64>,
    poison: Vec<bool>,
}

/// Compiles the sub-DAG reachable from `roots` against an input layout.
///
/// `input_vars` fixes the binding order for evaluation; it must cover
/// every variable reachable from the roots (unused layout entries are
/// allowed and simply occupy an input slot). Output `k` of the program
/// corresponds to `roots[k]`.
pub fn compile(
    g: &ExprGraph,
    roots: &[NodeId],
    input_vars: &[String],
) -> Result<Program, ExecError> {
    for &r in roots {
        if !g.contains(r) {
            return Err(ExecError::ForeignRoot(r));
        }
    }
    // Input layout: variable node -> slot.
    let mut slot_of: Vec<Option<u32>> = vec![None; g.len()];
    for (i, name) in input_vars.iter().enumerate() {
        if input_vars[..i].contains(name) {
            return Err(ExecError::DuplicateInput(name.clone()));
        }
        if let Some(vid) = g.var(name) {
            slot_of[vid.index()] = Some(i as u32);
        }
    }

    // Mark the reachable sub-DAG. Children have smaller ids than parents,
    // so one descending sweep from the maximal root suffices.
    let mut live = vec![false; g.len()];
    let mut max_id = 0usize;
    for &r in roots {
        live[r.index()] = true;
        max_id = max_id.max(r.index());
    }
    for i in (0..=max_id).rev() {
        if live[i] {
            for &c in g.children(NodeId::from_index(i)) {
                live[c.index()] = true;
            }
        }
    }

    // Emit one instruction per live non-variable node, ascending id order.
    let mut instrs = Vec::new();
    let mut next_slot = input_vars.len() as u32;
    for i in 0..=max_id.min(g.len().saturating_sub(1)) {
        if !live[i] {
            continue;
        }
        let id = NodeId::from_index(i);
        match g.kind(id) {
            NodeKind::Var(name) => {
                if slot_of[i].is_none() {
                    return Err(ExecError::MissingInput(name.clone()));
                }
            }
            NodeKind::Const(v) => {
                instrs.push(Instr::Const { value: *v, out: next_slot });
                slot_of[i] = Some(next_slot);
                next_slot += 1;
            }
            kind => {
                let ch = g.children(id);
                let a = slot_of[ch[0].index()].expect("child compiled before parent");
                let out = next_slot;
                let instr = match kind {
                    NodeKind::Neg => Instr::Un { op: UnOp::Neg, a, out },
                    NodeKind::Exp => Instr::Un { op: UnOp::Exp, a, out },
                    NodeKind::Ln => Instr::Un { op: UnOp::Ln, a, out },
                    NodeKind::Sqrt => Instr::Un { op: UnOp::Sqrt, a, out },
                    NodeKind::Sigmoid => Instr::Un { op: UnOp::Sigmoid, a, out },
                    NodeKind::Pow(k) => Instr::Pow { a, exponent: *k, out },
                    NodeKind::Add | NodeKind::Sub | NodeKind::Mul | NodeKind::Div => {
                        let b = slot_of[ch[1].index()].expect("child compiled before parent");
                        let op = match kind {
                            NodeKind::Add => BinOp::Add,
                            NodeKind::Sub => BinOp::Sub,
                            NodeKind::Mul => BinOp::Mul,
                            NodeKind::Div => BinOp::Div,
                            _ => unreachable!(),
                        };
                        Instr::Bin { op, a, b, out }
                    }
                    NodeKind::Const(_) | NodeKind::Var(_) => unreachable!(),
                };
                instrs.push(instr);
                slot_of[i] = Some(next_slot);
                next_slot += 1;
            }
        }
    }

    let outputs = roots
        .iter()
        .map(|r| slot_of[r.index()].expect("root compiled"))
        .collect();

    Ok(Program {
        instrs,
        inputs: input_vars.to_vec(),
        outputs,
        n_slots: next_slot as usize,
    })
}

impl NodeId {
    /// Internal: id from a dense index (indexes are only produced by the
    /// owning graph, so this stays crate-private).
    pub(crate) fn from_index(i: usize) -> NodeId {
        // Reconstructing from a previously valid index cannot overflow.
        unsafe { std::mem::transmute::<u32, NodeId>(i as u32) }
    }
}

impl Program {
    /// Number of instructions (input slots are not instructions).
    pub fn instruction_count(&self) -> usize {
        self.instrs.len()
    }

    /// Input layout, in binding order.
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    /// Number of outputs.
    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates at one binding row (values for `inputs()`, in order).
    pub fn evaluate(&self, bindings: &[f64]) -> Result<EvalOutcome, ExecError> {
        let mut scratch = EvalScratch::default();
        let mut values = vec![0.0; self.outputs.len()];
        let mut defined = vec![false; self.outputs.len()];
        self.evaluate_into(bindings, &mut scratch, &mut values, &mut defined)?;
        Ok(EvalOutcome { values, defined })
    }

    /// Allocation-free evaluation into caller buffers; the hot path for
    /// batch work. `values` and `defined` must have `output_count()`
    /// entries each.
    pub fn evaluate_into(
        &self,
        bindings: &[f64],
        scratch: &mut EvalScratch,
        values: &mut [f64],
        defined: &mut [bool],
    ) -> Result<(), ExecError> {
        if bindings.len() != self.inputs.len() {
            return Err(ExecError::BindingArity {
                expected: self.inputs.len(),
                got: bindings.len(),
            });
        }
        assert_eq!(values.len(), self.outputs.len(), "values buffer size");
        assert_eq!(defined.len(), self.outputs.len(), "defined buffer size");

        scratch.slots.resize(self.n_slots, 0.0);
        scratch.poison.resize(self.n_slots, false);
        let slots = &mut scratch.slots;
        let poison = &mut scratch.poison;
        for (i, &v) in bindings.iter().enumerate() {
            slots[i] = v;
            poison[i] = !v.is_finite();
        }

        for instr in &self.instrs {
            match *instr {
                Instr::Const { value, out } => {
                    slots[out as usize] = value;
                    poison[out as usize] = false;
                }
                Instr::Un { op, a, out } => {
                    let x = slots[a as usize];
                    let (v, violation) = match op {
                        UnOp::Neg => (-x, false),
                        UnOp::Exp => (x.exp(), false),
                        UnOp::Ln => (x.ln(), x <= 0.0),
                        UnOp::Sqrt => (x.sqrt(), x < 0.0),
                        UnOp::Sigmoid => (crate::expr::sigmoid(x), false),
                    };
                    slots[out as usize] = v;
                    poison[out as usize] = poison[a as usize] || violation || !v.is_finite();
                }
                Instr::Bin { op, a, b, out } => {
                    let x = slots[a as usize];
                    let y = slots[b as usize];
                    let (v, violation) = match op {
                        BinOp::Add => (x + y, false),
                        BinOp::Sub => (x - y, false),
                        BinOp::Mul => (x * y, false),
                        BinOp::Div => (x / y, y == 0.0),
                    };
                    slots[out as usize] = v;
                    poison[out as usize] =
                        poison[a as usize] || poison[b as usize] || violation || !v.is_finite();
                }
                Instr::Pow { a, exponent, out } => {
                    let x = slots[a as usize];
                    let v = x.powf(exponent);
                    slots[out as usize] = v;
                    poison[out as usize] = poison[a as usize] || !v.is_finite();
                }
            }
        }

        for (k, &slot) in self.outputs.iter().enumerate() {
            values[k] = slots[slot as usize];
            defined[k] = !poison[slot as usize];
        }
        Ok(())
    }

    /// Evaluates a batch of rows. Results are in row order and identical
    /// to evaluating row-wise; with the `parallel` feature the rows are
    /// processed concurrently.
    pub fn evaluate_batch<R>(&self, rows: &[R]) -> Result<Vec<EvalOutcome>, ExecError>
    where
        R: AsRef<[f64]> + Sync,
    {
        let results = par::map_indexed_init(rows.len(), EvalScratch::default, |scratch, i| {
            let row = rows[i].as_ref();
            let mut values = vec![0.0; self.outputs.len()];
            let mut defined = vec![false; self.outputs.len()];
            self.evaluate_into(row, scratch, &mut values, &mut defined)
                .map(|()| EvalOutcome { values, defined })
        });
        results.into_iter().collect()
    }

    /// Sequential batch evaluation; always available, primarily for the
    /// benchmark suite and for documenting the fallback semantics.
    pub fn evaluate_batch_sequential<R>(&self, rows: &[R]) -> Result<Vec<EvalOutcome>, ExecError>
    where
        R: AsRef<[f64]>,
    {
        let mut scratch = EvalScratch::default();
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let mut values = vec![0.0; self.outputs.len()];
            let mut defined = vec![false; self.outputs.len()];
            self.evaluate_into(row.as_ref(), &mut scratch, &mut values, &mut defined)?;
            out.push(EvalOutcome { values, defined });
        }
        Ok(out)
    }

    /// Text listing of the tape: one `slot <- op args` line per
    /// instruction, with input and output slot mappings as `#` comment
    /// lines. The format is stable and covered by a golden test.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        write!(out, "# inputs:").unwrap();
        for (i, name) in self.inputs.iter().enumerate() {
            write!(out, " s{i}={name}").unwrap();
        }
        out.push('\n');
        for instr in &self.instrs {
            match *instr {
                Instr::Const { value, out: o } => writeln!(out, "s{o} <- const {value}").unwrap(),
                Instr::Un { op, a, out: o } => {
                    let name = match op {
                        UnOp::Neg => "neg",
                        UnOp::Exp => "exp",
                        UnOp::Ln => "ln",
                        UnOp::Sqrt => "sqrt",
                        UnOp::Sigmoid => "sigmoid",
                    };
                    writeln!(out, "s{o} <- {name} s{a}").unwrap();
                }
                Instr::Bin { op, a, b, out: o } => {
                    let name = match op {
                        BinOp::Add => "add",
                        BinOp::Sub => "sub",
                        BinOp::Mul => "mul",
                        BinOp::Div => "div",
                    };
                    writeln!(out, "s{o} <- {name} s{a} s{b}").unwrap();
                }
                Instr::Pow { a, exponent, out: o } => {
                    writeln!(out, "s{o} <- pow s{a} {exponent}").unwrap();
                }
            }
        }
        write!(out, "# outputs:").unwrap();
        for slot in &self.outputs {
            write!(out, " s{slot}").unwrap();
        }
        out.push('\n');
        out
    }
}
