//! Standard-form semidefinite feasibility problems.
//!
//! Variables live in blocks: symmetric PSD matrices, free vectors and
//! nonnegative vectors. Each linear equality constraint is a sparse list of
//! block entries with the SDPA convention: an entry `(i, j, v)` with `i < j`
//! in a PSD block stands for the symmetric pair, so it contributes
//! `2 v X[i][j]` to the row; diagonal and vector entries contribute `v x`.

mod sdpa;
mod solver;

pub use sdpa::{export_standard, import_standard, SdpaError};
pub use solver::{solve_feasibility, Diagnostics, SolveOutcome, SolveStatus, SolverOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("constraint {row} references block {block}, which does not exist")]
    BlockOutOfRange { row: usize, block: usize },
    #[error("constraint {row} references entry ({i}, {j}) outside block {block}")]
    EntryOutOfRange { row: usize, block: usize, i: usize, j: usize },
    #[error("constraint {row} has a non-finite coefficient")]
    NonFinite { row: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    Psd,
    Free,
    NonNeg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub size: usize,
}

/// One coefficient of a constraint row. For vector blocks `i == j` is the
/// element index; for PSD blocks `i <= j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl Entry {
    pub fn new(block: usize, i: usize, j: usize, value: f64) -> Self {
        Self { block, i: i.min(j), j: i.max(j), value }
    }

    pub fn scalar(block: usize, i: usize, value: f64) -> Self {
        Self { block, i, j: i, value }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Constraint {
    pub entries: Vec<Entry>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub constraints: Vec<Constraint>,
    /// Linear objective to minimize; `None` for pure feasibility.
    pub objective: Option<Vec<Entry>>,
}

/// Value of one variable block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockValue {
    Psd(DMatrix<f64>),
    Vector(DVector<f64>),
}

impl BlockValue {
    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            BlockValue::Psd(m) => m,
            BlockValue::Vector(_) => panic!("vector block has no matrix value"),
        }
    }

    pub fn vector(&self) -> &DVector<f64> {
        match self {
            BlockValue::Vector(v) => v,
            BlockValue::Psd(_) => panic!("PSD block has no vector value"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub blocks: Vec<BlockValue>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, kind: BlockKind, size: usize) -> usize {
        self.blocks.push(Block { kind, size });
        self.blocks.len() - 1
    }

    pub fn add_constraint(&mut self, entries: Vec<Entry>, rhs: f64) -> usize {
        self.constraints.push(Constraint { entries, rhs });
        self.constraints.len() - 1
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let check = |row: usize, e: &Entry| -> Result<(), ConicError> {
            let b = self.blocks.get(e.block).ok_or(ConicError::BlockOutOfRange { row, block: e.block })?;
            let ok = match b.kind {
                BlockKind::Psd => e.i <= e.j && e.j < b.size,
                _ => e.i == e.j && e.i < b.size,
            };
            if !ok {
                return Err(ConicError::EntryOutOfRange { row, block: e.block, i: e.i, j: e.j });
            }
            if !e.value.is_finite() {
                return Err(ConicError::NonFinite { row });
            }
            Ok(())
        };
        for (row, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(ConicError::NonFinite { row });
            }
            for e in &c.entries {
                check(row, e)?;
            }
        }
        if let Some(obj) = &self.objective {
            for e in obj {
                check(usize::MAX, e)?;
            }
        }
        Ok(())
    }

    /// Sorts entries, merges duplicates and drops zeros, so that two
    /// problems describing the same data compare equal.
    pub fn canonicalize(&mut self) {
        fn canon(entries: &mut Vec<Entry>) {
            entries.sort_by_key(|e| (e.block, e.i, e.j));
            let mut out: Vec<Entry> = Vec::with_capacity(entries.len());
            for e in entries.drain(..) {
                match out.last_mut() {
                    Some(last) if (last.block, last.i, last.j) == (e.block, e.i, e.j) => last.value += e.value,
                    _ => out.push(e),
                }
            }
            out.retain(|e| e.value != 0.0);
            *entries = out;
        }
        for c in &mut self.constraints {
            canon(&mut c.entries);
        }
        if let Some(obj) = &mut self.objective {
            canon(obj);
            if obj.is_empty() {
                self.objective = None;
            }
        }
    }

    pub fn canonical(&self) -> SdpProblem {
        let mut p = self.clone();
        p.canonicalize();
        p
    }

    fn entry_value(&self, sol: &Solution, e: &Entry) -> f64 {
        match &sol.blocks[e.block] {
            BlockValue::Psd(m) => {
                let w = if e.i == e.j { 1.0 } else { 2.0 };
                w * e.value * m[(e.i, e.j)]
            }
            BlockValue::Vector(v) => e.value * v[e.i],
        }
    }

    /// `A(x) - b` for every constraint row.
    pub fn residuals(&self, sol: &Solution) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.entries.iter().map(|e| self.entry_value(sol, e)).sum::<f64>() - c.rhs)
            .collect()
    }

    pub fn objective_value(&self, sol: &Solution) -> f64 {
        self.objective
            .as_ref()
            .map_or(0.0, |obj| obj.iter().map(|e| self.entry_value(sol, e)).sum())
    }

    /// Smallest eigenvalue over PSD blocks and smallest entry over
    /// nonnegative blocks (`+inf` when there is no conic block).
    pub fn cone_floor(&self, sol: &Solution) -> f64 {
        let mut floor = f64::INFINITY;
        for (b, v) in self.blocks.iter().zip(&sol.blocks) {
            match (b.kind, v) {
                (BlockKind::Psd, BlockValue::Psd(m)) if b.size > 0 => {
                    let sym = (m + m.transpose()) * 0.5;
                    floor = floor.min(sym.symmetric_eigenvalues().min());
                }
                (BlockKind::NonNeg, BlockValue::Vector(x)) if b.size > 0 => floor = floor.min(x.min()),
                _ => {}
            }
        }
        floor
    }
}
