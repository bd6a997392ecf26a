//! Text form of a diagram.
//!
//! ```text
//! lvd <k> <edge_count> <answer_count>
//! answer <idx> <id_1> ... <id_k>
//! L <edge> <breakpoint_count>
//! start <idx>
//! bp <offset> <at_idx> <after_idx>
//! ```
//!
//! Offsets are written as exact decimal expansions so a parsed diagram
//! answers every query exactly like the original. Edge lengths are not
//! stored.

use std::fmt::Write;

use super::build::{Breakpoint, EdgeList, Lvd};
use crate::error::{parse_err, Result};
use crate::length::Length;
use crate::tree_space::PointId;

pub fn serialize_lvd(lvd: &Lvd) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lvd {} {} {}", lvd.k(), lvd.edge_count(), lvd.answer_count());
    for i in 0..lvd.answer_count() {
        let _ = write!(s, "answer {i}");
        for id in lvd.answer(i as u32) {
            let _ = write!(s, " {id}");
        }
        s.push('\n');
    }
    for e in 0..lvd.edge_count() {
        let list = lvd.edge_list(e);
        let _ = writeln!(s, "L {e} {}", list.breakpoints.len());
        let _ = writeln!(s, "start {}", list.start);
        for b in &list.breakpoints {
            let _ = writeln!(s, "bp {} {} {}", b.offset.to_exact_decimal(), b.at, b.after);
        }
    }
    s
}

fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{field}'")))
}

pub fn parse_lvd(text: &str) -> Result<Lvd> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of input, expected {what}")))
    };
    let arity = |line: usize, f: &[&str], n: usize| {
        if f.len() == n {
            Ok(())
        } else {
            Err(parse_err(line, format!("'{}' expects {n} fields, got {}", f[0], f.len())))
        }
    };

    let (ln, f) = next("header")?;
    if f[0] != "lvd" {
        return Err(parse_err(ln, "expected 'lvd' header"));
    }
    arity(ln, &f, 4)?;
    let k: usize = num(ln, f[1], "k")?;
    let edges: usize = num(ln, f[2], "edge count")?;
    let count: usize = num(ln, f[3], "answer count")?;
    if k == 0 {
        return Err(parse_err(ln, "k must be positive"));
    }

    let mut answers: Vec<PointId> = Vec::with_capacity(k * count);
    for i in 0..count {
        let (ln, f) = next("'answer'")?;
        if f[0] != "answer" {
            return Err(parse_err(ln, "expected 'answer'"));
        }
        arity(ln, &f, k + 2)?;
        if num::<usize>(ln, f[1], "answer index")? != i {
            return Err(parse_err(ln, format!("answers must be numbered in order, expected {i}")));
        }
        for field in &f[2..] {
            answers.push(num(ln, field, "point id")?);
        }
    }
    let idx = |ln: usize, field: &str| -> Result<u32> {
        let i: u32 = num(ln, field, "answer index")?;
        if i as usize >= count {
            return Err(parse_err(ln, format!("answer index {i} out of range")));
        }
        Ok(i)
    };

    let mut lists = Vec::with_capacity(edges);
    for e in 0..edges {
        let (ln, f) = next("'L'")?;
        if f[0] != "L" {
            return Err(parse_err(ln, "expected 'L'"));
        }
        arity(ln, &f, 3)?;
        if num::<usize>(ln, f[1], "edge index")? != e {
            return Err(parse_err(ln, format!("edge lists must be in order, expected {e}")));
        }
        let bps: usize = num(ln, f[2], "breakpoint count")?;
        let (ln, f) = next("'start'")?;
        if f[0] != "start" {
            return Err(parse_err(ln, "expected 'start'"));
        }
        arity(ln, &f, 2)?;
        let mut list = EdgeList {
            start: idx(ln, f[1])?,
            breakpoints: Vec::with_capacity(bps),
        };
        for _ in 0..bps {
            let (ln, f) = next("'bp'")?;
            if f[0] != "bp" {
                return Err(parse_err(ln, "expected 'bp'"));
            }
            arity(ln, &f, 4)?;
            let offset = Length::parse_exact(f[1])
                .filter(|o| *o >= Length::ZERO)
                .ok_or_else(|| parse_err(ln, format!("invalid offset '{}'", f[1])))?;
            if list.breakpoints.last().is_some_and(|b: &Breakpoint| b.offset >= offset) {
                return Err(parse_err(ln, "breakpoint offsets must increase"));
            }
            list.breakpoints.push(Breakpoint {
                offset,
                at: idx(ln, f[2])?,
                after: idx(ln, f[3])?,
            });
        }
        lists.push(list);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content"));
    }
    Ok(Lvd::from_parts(k, answers, lists, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lvd::build_lvd;
    use crate::tree_space::{generate_random, ProbModel};

    #[test]
    fn round_trip_preserves_queries() {
        let inst = generate_random(12, 9, 5, ProbModel::Uniform).unwrap();
        let (lvd, _) = build_lvd(&inst, 2).unwrap();
        let text = serialize_lvd(&lvd);
        let back = parse_lvd(&text).unwrap();
        assert_eq!(serialize_lvd(&back), text);
        for e in 0..lvd.edge_count() {
            for b in &lvd.edge_list(e).breakpoints {
                assert_eq!(back.query(e, b.offset).unwrap(), lvd.query(e, b.offset).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_index() {
        let err = parse_lvd("lvd 1 1 1\nanswer 0 3\nL 0 1\nstart 0\nbp 1.5 0 1\n").unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
        assert!(parse_lvd("lvd 1 1 1\nanswer 0 3\nL 0 0\nstart 0\nextra\n").is_err());
    }
}
