//! Sparse SDPA (`.dat-s`) files.
//!
//! A problem `min <C, X>  s.t. <A_i, X> = b_i` is written as the SDPA dual
//! with `c = b`, `F_0 = -C` and `F_i = A_i`. Nonnegative variables form a
//! diagonal (LP) block of negative size. Free scalars are split as
//! `u_k = v_{p+2k} - v_{p+2k+1}` at the tail of the LP block and announced
//! with a `* free=<count>` comment so that reading restores them.

use std::fmt::Write as _;
use std::path::Path;

use super::{ConicProblem, Var};
use crate::error::{Error, Result};

fn block_layout(p: &ConicProblem) -> (Vec<i64>, Option<usize>) {
    let mut sizes: Vec<i64> = p.psd_blocks.iter().map(|&n| n as i64).collect();
    let lp = p.nonneg_count + 2 * p.free_count;
    let lp_block = if lp > 0 {
        sizes.push(-(lp as i64));
        Some(sizes.len())
    } else {
        None
    };
    (sizes, lp_block)
}

/// Renders `p` as sparse SDPA text.
pub fn export_sdpa(p: &ConicProblem) -> String {
    let p = p.canonical();
    let (sizes, lp_block) = block_layout(&p);
    let mut out = String::new();
    out.push_str("\"polynorm conic problem\n");
    if p.free_count > 0 {
        let _ = writeln!(out, "* free={}", p.free_count);
    }
    let _ = writeln!(out, "{}", p.equalities.len());
    let _ = writeln!(out, "{}", sizes.len());
    let sizes_s: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "{}", sizes_s.join(" "));
    let rhs: Vec<String> = p.equalities.iter().map(|e| format!("{:e}", e.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let entry = |out: &mut String, mat: usize, var: &Var, c: f64| match *var {
        Var::Psd { block, i, j } => {
            let v = if i == j { c } else { c / 2.0 };
            let _ = writeln!(out, "{} {} {} {} {:e}", mat, block + 1, i + 1, j + 1, v);
        }
        Var::Nonneg(l) => {
            let b = lp_block.expect("LP block exists");
            let _ = writeln!(out, "{} {} {} {} {:e}", mat, b, l + 1, l + 1, c);
        }
        Var::Free(k) => {
            let b = lp_block.expect("LP block exists");
            let pos = p.nonneg_count + 2 * k + 1;
            let _ = writeln!(out, "{} {} {} {} {:e}", mat, b, pos, pos, c);
            let _ = writeln!(out, "{} {} {} {} {:e}", mat, b, pos + 1, pos + 1, -c);
        }
    };
    for (v, c) in &p.objective {
        entry(&mut out, 0, v, -c);
    }
    for (r, eq) in p.equalities.iter().enumerate() {
        for (v, c) in &eq.terms {
            entry(&mut out, r + 1, v, *c);
        }
    }
    out
}

pub fn write_sdpa(p: &ConicProblem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, export_sdpa(p))?;
    Ok(())
}

pub fn read_sdpa(path: impl AsRef<Path>) -> Result<ConicProblem> {
    import_sdpa(&std::fs::read_to_string(path)?)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

/// Parses sparse SDPA text produced by [`export_sdpa`] or another writer.
pub fn import_sdpa(text: &str) -> Result<ConicProblem> {
    let mut free_count = 0usize;
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('*') {
            if let Some(v) = rest.trim().strip_prefix("free=") {
                free_count = v
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(ln + 1, "bad free count"))?;
            }
            continue;
        }
        if line.starts_with('"') || line.is_empty() {
            continue;
        }
        let cleaned: String = line
            .chars()
            .map(|c| if "{}(),".contains(c) { ' ' } else { c })
            .collect();
        tokens.extend(cleaned.split_whitespace().map(|t| (ln + 1, t.to_string())));
    }
    let mut it = tokens.into_iter();
    fn take(it: &mut impl Iterator<Item = (usize, String)>, what: &str) -> Result<(usize, String)> {
        it.next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file reading {what}")))
    }
    fn num<T: std::str::FromStr>(tok: (usize, String), what: &str) -> Result<T> {
        tok.1
            .parse()
            .map_err(|_| parse_err(tok.0, format!("cannot parse {what} from {:?}", tok.1)))
    }
    let m: usize = num(take(&mut it, "constraint count")?, "constraint count")?;
    let nblocks: usize = num(take(&mut it, "block count")?, "block count")?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let s: i64 = num(take(&mut it, "block size")?, "block size")?;
        if s == 0 {
            return Err(parse_err(0, "block size 0"));
        }
        sizes.push(s);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(num::<f64>(take(&mut it, "objective vector")?, "objective entry")?);
    }

    let mut p = ConicProblem::new();
    // Maps SDPA block number to (kind, index): PSD block or LP block.
    let mut psd_of = vec![None; nblocks];
    let mut lp_size = None;
    let mut lp_index = None;
    for (b, &s) in sizes.iter().enumerate() {
        if s > 0 {
            psd_of[b] = Some(p.add_psd_block(s as usize));
        } else {
            if lp_size.is_some() {
                return Err(parse_err(0, "more than one LP block"));
            }
            lp_size = Some((-s) as usize);
            lp_index = Some(b);
        }
    }
    let lp = lp_size.unwrap_or(0);
    if 2 * free_count > lp {
        return Err(parse_err(0, "free count exceeds LP block size"));
    }
    p.nonneg_count = lp - 2 * free_count;
    p.free_count = free_count;
    for r in rhs {
        p.add_equality(Vec::new(), r);
    }

    loop {
        let Some(first) = it.next() else { break };
        let line = first.0;
        let mat: usize = num(first, "matrix number")?;
        let blk: usize = num(take(&mut it, "block number")?, "block number")?;
        let i: usize = num(take(&mut it, "row index")?, "row index")?;
        let j: usize = num(take(&mut it, "column index")?, "column index")?;
        let v: f64 = num(take(&mut it, "entry value")?, "entry value")?;
        if mat > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(parse_err(line, "index out of range"));
        }
        let b = blk - 1;
        let terms: Vec<(Var, f64)> = if let Some(k) = psd_of[b] {
            let n = sizes[b] as usize;
            if i > n || j > n {
                return Err(parse_err(line, "entry outside its block"));
            }
            let c = if i == j { v } else { 2.0 * v };
            vec![(Var::psd(k, i - 1, j - 1), c)]
        } else {
            debug_assert_eq!(Some(b), lp_index);
            if i != j || i > lp {
                return Err(parse_err(line, "LP block entries must be diagonal"));
            }
            let l = i - 1;
            if l < p.nonneg_count {
                vec![(Var::Nonneg(l), v)]
            } else {
                let off = l - p.nonneg_count;
                let sign = if off.is_multiple_of(2) { 1.0 } else { -1.0 };
                vec![(Var::Free(off / 2), sign * v)]
            }
        };
        for (var, c) in terms {
            if mat == 0 {
                p.objective.push((var, -c));
            } else {
                p.equalities[mat - 1].terms.push((var, c));
            }
        }
    }
    // A split free pair contributes +c and -(-c); halve back to one term.
    let mut out = p.canonical();
    for eq in out.equalities.iter_mut() {
        for (v, c) in eq.terms.iter_mut() {
            if matches!(v, Var::Free(_)) {
                *c /= 2.0;
            }
        }
    }
    for (v, c) in out.objective.iter_mut() {
        if matches!(v, Var::Free(_)) {
            *c /= 2.0;
        }
    }
    Ok(out)
}
