//! SDPA sparse format (`.dat-s`).
//!
//! Constraint `k` becomes `F_k` with `c_k = b_k`; the objective `min <C, X>`
//! is written as `F_0 = -C` so that the file reads as the SDPA dual
//! `max <F_0, Y>`. Free blocks have no SDPA counterpart and are written as a
//! nonnegative block of twice the size (`x = x⁺ - x⁻`). A
//! `* pathcert-blocks:` comment records the original block kinds so that
//! [`import_standard`] can undo the split; files without it import with
//! plain PSD and nonnegative blocks.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Block, BlockKind, Constraint, Entry, SdpProblem};

const ANNOTATION: &str = "* pathcert-blocks:";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpaError {
    #[error("unexpected end of SDPA data while reading {0}")]
    Truncated(&'static str),
    #[error("malformed SDPA token {0:?}")]
    BadToken(String),
    #[error("entry references matrix {mat}, block {block}, index ({i}, {j}) out of range")]
    OutOfRange { mat: usize, block: usize, i: usize, j: usize },
    #[error("block annotation disagrees with the block structure")]
    Annotation,
    #[error("split free block {0} has inconsistent halves")]
    FreeSplit(usize),
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Writes `problem` in SDPA sparse format.
pub fn export_standard(problem: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\"pathcert conic program: {} constraints, {} blocks", problem.constraints.len(), problem.blocks.len());
    let kinds: Vec<String> = problem
        .blocks
        .iter()
        .map(|b| {
            let k = match b.kind {
                BlockKind::Psd => "psd",
                BlockKind::Free => "free",
                BlockKind::NonNeg => "nonneg",
            };
            format!("{k}:{}", b.size)
        })
        .collect();
    let _ = writeln!(out, "{ANNOTATION} {}", kinds.join(" "));
    let _ = writeln!(out, "{}", problem.constraints.len());
    let _ = writeln!(out, "{}", problem.blocks.len());
    let sizes: Vec<String> = problem
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.size.to_string(),
            BlockKind::NonNeg => format!("-{}", b.size),
            BlockKind::Free => format!("-{}", 2 * b.size),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = problem.constraints.iter().map(|c| fmt_f64(c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let mut write_entries = |mat: usize, entries: &[Entry], sign: f64| {
        for e in entries {
            let v = sign * e.value;
            let b = &problem.blocks[e.block];
            let _ = writeln!(out, "{mat} {} {} {} {}", e.block + 1, e.i + 1, e.j + 1, fmt_f64(v));
            if b.kind == BlockKind::Free {
                let k = e.i + b.size + 1;
                let _ = writeln!(out, "{mat} {} {k} {k} {}", e.block + 1, fmt_f64(-v));
            }
        }
    };
    if let Some(obj) = &problem.objective {
        write_entries(0, obj, -1.0);
    }
    for (k, c) in problem.constraints.iter().enumerate() {
        write_entries(k + 1, &c.entries, 1.0);
    }
    out
}

/// Parses SDPA sparse format produced by [`export_standard`] or any other
/// writer.
pub fn import_standard(text: &str) -> Result<SdpProblem, SdpaError> {
    let mut annotated: Option<Vec<Block>> = None;
    let mut tokens: Vec<&str> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix(ANNOTATION) {
            let blocks = rest
                .split_whitespace()
                .map(|tok| {
                    let (k, n) = tok.split_once(':').ok_or_else(|| SdpaError::BadToken(tok.into()))?;
                    let kind = match k {
                        "psd" => BlockKind::Psd,
                        "free" => BlockKind::Free,
                        "nonneg" => BlockKind::NonNeg,
                        _ => return Err(SdpaError::BadToken(tok.into())),
                    };
                    let size = n.parse().map_err(|_| SdpaError::BadToken(tok.into()))?;
                    Ok(Block { kind, size })
                })
                .collect::<Result<Vec<_>, _>>()?;
            annotated = Some(blocks);
            continue;
        }
        if t.starts_with('"') || t.starts_with('*') {
            continue;
        }
        tokens.extend(t.split(|c: char| c.is_whitespace() || ",(){}".contains(c)).filter(|s| !s.is_empty()));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &'static str| it.next().ok_or(SdpaError::Truncated(what));
    let int = |s: &str| s.parse::<i64>().map_err(|_| SdpaError::BadToken(s.into()));
    let float = |s: &str| s.parse::<f64>().map_err(|_| SdpaError::BadToken(s.into()));

    let m = usize::try_from(int(next("constraint count")?)?).map_err(|_| SdpaError::BadToken("m".into()))?;
    let nb = usize::try_from(int(next("block count")?)?).map_err(|_| SdpaError::BadToken("nBlocks".into()))?;
    let mut raw = Vec::with_capacity(nb);
    for _ in 0..nb {
        raw.push(int(next("block structure")?)?);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(float(next("right-hand side")?)?);
    }

    let blocks: Vec<Block> = match annotated {
        Some(blocks) => {
            let consistent = blocks.len() == nb
                && blocks.iter().zip(&raw).all(|(b, &r)| match b.kind {
                    BlockKind::Psd => r == b.size as i64,
                    BlockKind::NonNeg => r == -(b.size as i64),
                    BlockKind::Free => r == -2 * b.size as i64,
                });
            if !consistent {
                return Err(SdpaError::Annotation);
            }
            blocks
        }
        None => raw
            .iter()
            .map(|&r| {
                if r < 0 {
                    Block { kind: BlockKind::NonNeg, size: (-r) as usize }
                } else {
                    Block { kind: BlockKind::Psd, size: r as usize }
                }
            })
            .collect(),
    };

    let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); m + 1];
    // free blocks: coefficients of the x⁻ half, checked against x⁺ below
    let mut negative_half: Vec<Vec<Entry>> = vec![Vec::new(); m + 1];
    while let Ok(tok) = next("entry matrix") {
        let mat = int(tok)?;
        let blk = int(next("entry block")?)?;
        let i = int(next("entry row")?)?;
        let j = int(next("entry column")?)?;
        let v = float(next("entry value")?)?;
        let bad = || SdpaError::OutOfRange { mat: mat.max(0) as usize, block: blk.max(0) as usize, i: i.max(0) as usize, j: j.max(0) as usize };
        if mat < 0 || mat as usize > m || blk < 1 || blk as usize > nb || i < 1 || j < 1 {
            return Err(bad());
        }
        let (mat, block, i, j) = (mat as usize, blk as usize - 1, i as usize - 1, j as usize - 1);
        let b = blocks[block];
        let v = if mat == 0 { -v } else { v };
        match b.kind {
            BlockKind::Psd => {
                if i.max(j) >= b.size {
                    return Err(bad());
                }
                rows[mat].push(Entry::new(block, i, j, v));
            }
            BlockKind::NonNeg => {
                if i != j || i >= b.size {
                    return Err(bad());
                }
                rows[mat].push(Entry::scalar(block, i, v));
            }
            BlockKind::Free => {
                if i != j || i >= 2 * b.size {
                    return Err(bad());
                }
                if i < b.size {
                    rows[mat].push(Entry::scalar(block, i, v));
                } else {
                    negative_half[mat].push(Entry::scalar(block, i - b.size, -v));
                }
            }
        }
    }
    for (mat, neg) in negative_half.into_iter().enumerate() {
        let plus: Vec<Entry> = rows[mat].iter().filter(|e| blocks[e.block].kind == BlockKind::Free).copied().collect();
        let mut a = SdpProblem { blocks: blocks.clone(), constraints: vec![Constraint { entries: plus, rhs: 0.0 }], objective: None };
        let mut b = SdpProblem { blocks: blocks.clone(), constraints: vec![Constraint { entries: neg, rhs: 0.0 }], objective: None };
        a.canonicalize();
        b.canonicalize();
        if a != b {
            let block = a.constraints[0].entries.first().or(b.constraints[0].entries.first()).map_or(0, |e| e.block);
            return Err(SdpaError::FreeSplit(block));
        }
    }

    let mut rows = rows.into_iter();
    let objective = rows.next().filter(|o| !o.is_empty());
    let constraints = rows.zip(rhs).map(|(entries, rhs)| Constraint { entries, rhs }).collect();
    Ok(SdpProblem { blocks, constraints, objective })
}
