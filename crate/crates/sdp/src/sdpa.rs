//! SDPA sparse (`.dat-s`) problem files and CSDP-style solution files.
//!
//! A maximization problem `max <C,X> s.t. <A_i,X> = b_i` is written in the
//! SDPA dual layout: `c = b`, `F_0 = C`, `F_i = A_i`. Free variables are split
//! into `f+ - f-` and placed in a trailing diagonal block of size `2 nf`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::problem::{
    Block, BlockKind, Constraint, LinearForm, SdpError, SdpProblem, SdpSolution, SolveStatus,
    SparseSym,
};

/// Rewrite free variables as differences of nonnegative diagonal entries.
pub fn split_free(p: &SdpProblem) -> SdpProblem {
    if p.num_free == 0 {
        return p.clone();
    }
    let nf = p.num_free;
    let extra = p.blocks.len();
    let mut blocks = p.blocks.clone();
    blocks.push(Block { size: 2 * nf, kind: BlockKind::Diagonal });
    let convert = |form: &LinearForm| -> LinearForm {
        let mut out = LinearForm { blocks: form.blocks.clone(), free: vec![] };
        if !form.free.is_empty() {
            let mut m = SparseSym::new();
            for &(k, v) in &form.free {
                m.push(k, k, v);
                m.push(nf + k, nf + k, -v);
            }
            m.normalize();
            out.blocks.push((extra, m));
        }
        out
    };
    SdpProblem {
        blocks,
        num_free: 0,
        constraints: p
            .constraints
            .iter()
            .map(|c| Constraint { form: convert(&c.form), rhs: c.rhs })
            .collect(),
        objective: convert(&p.objective),
    }
}

fn block_size_token(b: &Block) -> String {
    match b.kind {
        BlockKind::Psd => format!("{}", b.size),
        BlockKind::Diagonal => format!("-{}", b.size),
    }
}

fn write_form(out: &mut String, matno: usize, form: &LinearForm) {
    let mut blocks: Vec<&(usize, SparseSym)> = form.blocks.iter().collect();
    blocks.sort_by_key(|(k, _)| *k);
    for (k, m) in blocks {
        let mut m = m.clone();
        m.normalize();
        for &(i, j, v) in &m.entries {
            let _ = writeln!(out, "{} {} {} {} {}", matno, k + 1, i + 1, j + 1, v + 0.0);
        }
    }
}

/// SDPA sparse text for `p` (free variables split).
pub fn export_sdpa(p: &SdpProblem) -> String {
    let q = split_free(p);
    let mut out = String::new();
    let _ = writeln!(out, "{}", q.constraints.len());
    let _ = writeln!(out, "{}", q.blocks.len());
    let sizes: Vec<String> = q.blocks.iter().map(block_size_token).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = q.constraints.iter().map(|c| format!("{}", c.rhs + 0.0)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    write_form(&mut out, 0, &q.objective);
    for (i, c) in q.constraints.iter().enumerate() {
        write_form(&mut out, i + 1, &c.form);
    }
    out
}

/// Non-comment lines with their 1-based line numbers. Braces, commas and
/// parentheses are treated as whitespace, as SDPA readers do.
fn content_lines(doc: &str) -> Vec<(usize, String)> {
    doc.lines()
        .enumerate()
        .filter_map(|(k, l)| {
            let t = l.trim();
            if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
                None
            } else {
                let cleaned: String = t
                    .chars()
                    .map(|c| if matches!(c, '{' | '}' | ',' | '(' | ')') { ' ' } else { c })
                    .collect();
                Some((k + 1, cleaned))
            }
        })
        .collect()
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, SdpError> {
    tok.parse::<f64>()
        .map_err(|_| SdpError::Parse { line, msg: format!("expected a number, found `{tok}`") })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, SdpError> {
    tok.parse::<usize>()
        .map_err(|_| SdpError::Parse { line, msg: format!("expected an index, found `{tok}`") })
}

fn parse_tuple(line: usize, text: &str) -> Result<(usize, usize, usize, usize, f64), SdpError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 5 {
        return Err(SdpError::Parse { line, msg: format!("expected 5 fields, found {}", toks.len()) });
    }
    Ok((
        parse_usize(toks[0], line)?,
        parse_usize(toks[1], line)?,
        parse_usize(toks[2], line)?,
        parse_usize(toks[3], line)?,
        parse_f64(toks[4], line)?,
    ))
}

fn missing(doc: &str, what: &str) -> SdpError {
    SdpError::Parse { line: doc.lines().count() + 1, msg: format!("unexpected end of file: missing {what}") }
}

/// Parse an SDPA sparse problem. The result has no free variables.
pub fn import_sdpa(doc: &str) -> Result<SdpProblem, SdpError> {
    let lines = content_lines(doc);
    let mut it = lines.iter();
    let (l1, t1) = it.next().ok_or_else(|| missing(doc, "constraint count"))?;
    let m = parse_usize(t1.split_whitespace().next().unwrap_or(""), *l1)?;
    let (l2, t2) = it.next().ok_or_else(|| missing(doc, "block count"))?;
    let nb = parse_usize(t2.split_whitespace().next().unwrap_or(""), *l2)?;
    let (l3, t3) = it.next().ok_or_else(|| missing(doc, "block sizes"))?;
    let sizes: Vec<&str> = t3.split_whitespace().collect();
    if sizes.len() < nb {
        return Err(SdpError::Parse { line: *l3, msg: format!("expected {nb} block sizes") });
    }
    let mut blocks = Vec::with_capacity(nb);
    for s in &sizes[..nb] {
        let v: i64 = s
            .parse()
            .map_err(|_| SdpError::Parse { line: *l3, msg: format!("bad block size `{s}`") })?;
        if v == 0 {
            return Err(SdpError::Parse { line: *l3, msg: "block size 0".into() });
        }
        blocks.push(Block {
            size: v.unsigned_abs() as usize,
            kind: if v < 0 { BlockKind::Diagonal } else { BlockKind::Psd },
        });
    }
    let (l4, t4) = it.next().ok_or_else(|| missing(doc, "objective vector"))?;
    let rhs: Vec<f64> = t4
        .split_whitespace()
        .map(|t| parse_f64(t, *l4))
        .collect::<Result<_, _>>()?;
    if rhs.len() != m {
        return Err(SdpError::Parse { line: *l4, msg: format!("expected {m} objective values, found {}", rhs.len()) });
    }
    let mut forms: Vec<Vec<SparseSym>> = vec![vec![SparseSym::new(); nb]; m + 1];
    for (line, text) in it {
        let (mat, blk, i, j, v) = parse_tuple(*line, text)?;
        if mat > m || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(SdpError::Parse { line: *line, msg: "entry index out of range".into() });
        }
        let b = blocks[blk - 1];
        if i > b.size || j > b.size {
            return Err(SdpError::Parse { line: *line, msg: "entry outside its block".into() });
        }
        forms[mat][blk - 1].push(i - 1, j - 1, v);
    }
    let to_form = |mats: Vec<SparseSym>| LinearForm {
        blocks: mats
            .into_iter()
            .enumerate()
            .filter_map(|(k, mut s)| {
                s.normalize();
                (!s.entries.is_empty()).then_some((k, s))
            })
            .collect(),
        free: vec![],
    };
    let mut forms = forms.into_iter();
    let objective = to_form(forms.next().unwrap_or_default());
    let constraints = forms
        .zip(rhs)
        .map(|(f, rhs)| Constraint { form: to_form(f), rhs })
        .collect();
    Ok(SdpProblem { blocks, num_free: 0, constraints, objective })
}

/// Solution file: an objective pair, the multiplier vector, then 5-tuples
/// with matrix 1 = `Z` and matrix 2 = `X` over the split problem.
pub fn export_solution(p: &SdpProblem, sol: &SdpSolution) -> String {
    let nf = p.num_free;
    let mut x = sol.x.clone();
    let mut z = sol.z.clone();
    if nf > 0 {
        let mut xd = DMatrix::zeros(2 * nf, 2 * nf);
        for (k, &v) in sol.free.iter().enumerate() {
            if v >= 0.0 {
                xd[(k, k)] = v;
            } else {
                xd[(nf + k, nf + k)] = -v;
            }
        }
        x.push(xd);
        z.push(DMatrix::zeros(2 * nf, 2 * nf));
    }
    let mut out = String::new();
    let _ = writeln!(out, "* status {:?}", sol.status);
    let _ = writeln!(out, "{} {}", sol.primal_objective, sol.dual_objective);
    let ys: Vec<String> = sol.y.iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(out, "{}", ys.join(" "));
    for (matno, mats) in [(1usize, &z), (2usize, &x)] {
        for (k, m) in mats.iter().enumerate() {
            for j in 0..m.ncols() {
                for i in 0..=j {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        let _ = writeln!(out, "{} {} {} {} {}", matno, k + 1, i + 1, j + 1, v + 0.0);
                    }
                }
            }
        }
    }
    out
}

/// Read a solution file for `p`. Residuals are recomputed locally and the
/// status is set from them against `tol`.
pub fn import_solution(doc: &str, p: &SdpProblem, tol: f64) -> Result<SdpSolution, SdpError> {
    let q = split_free(p);
    let nf = p.num_free;
    let m = p.constraints.len();
    let lines = content_lines(doc);
    let mut it = lines.iter();
    let (l1, t1) = it.next().ok_or_else(|| missing(doc, "objective pair"))?;
    let obj: Vec<f64> = t1.split_whitespace().map(|t| parse_f64(t, *l1)).collect::<Result<_, _>>()?;
    if obj.len() != 2 {
        return Err(SdpError::Parse { line: *l1, msg: "expected primal and dual objective".into() });
    }
    let (l2, t2) = it.next().ok_or_else(|| missing(doc, "multiplier vector"))?;
    let y: Vec<f64> = t2.split_whitespace().map(|t| parse_f64(t, *l2)).collect::<Result<_, _>>()?;
    if y.len() != m {
        return Err(SdpError::Dimension(format!("expected {m} multipliers, found {}", y.len())));
    }
    let mut x: Vec<DMatrix<f64>> = q.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect();
    let mut z = x.clone();
    for (line, text) in it {
        let (mat, blk, i, j, v) = parse_tuple(*line, text)?;
        if !(1..=2).contains(&mat) {
            return Err(SdpError::Parse { line: *line, msg: format!("matrix number {mat}, expected 1 or 2") });
        }
        if blk == 0 || blk > q.blocks.len() {
            return Err(SdpError::Dimension(format!("line {line}: block {blk} out of range")));
        }
        let size = q.blocks[blk - 1].size;
        if i == 0 || j == 0 || i > size || j > size {
            return Err(SdpError::Dimension(format!("line {line}: entry ({i},{j}) outside block {blk}")));
        }
        let target = if mat == 1 { &mut z[blk - 1] } else { &mut x[blk - 1] };
        target[(i - 1, j - 1)] = v;
        target[(j - 1, i - 1)] = v;
    }
    let mut free = vec![0.0; nf];
    if nf > 0 {
        let xd = x.pop().expect("split block");
        z.pop();
        for (k, f) in free.iter_mut().enumerate() {
            *f = xd[(k, k)] - xd[(nf + k, nf + k)];
        }
    }
    let mut sol = SdpSolution {
        x,
        free,
        y,
        z,
        primal_objective: 0.0,
        dual_objective: 0.0,
        status: SolveStatus::Stalled,
        residuals: Default::default(),
        iterations: 0,
    };
    sol.primal_objective = SdpProblem::eval_form(&p.objective, &sol.x, &sol.free);
    sol.dual_objective = p.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum();
    sol.residuals = p.residuals(&sol);
    if sol.residuals.max() <= tol && sol.min_primal_eig() >= -1e-8 {
        sol.status = SolveStatus::Optimal;
    }
    Ok(sol)
}
