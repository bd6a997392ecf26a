use std::fmt::Write as _;

use super::{Dsu, Edge, Instance, Location, StochasticPoint, WeightedTree};
use crate::error::{parse_err, Error, Result};
use crate::length::Length;

/// Non-empty lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse_num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{field}'")))
}

pub(crate) fn parse_length(line: usize, field: &str, what: &str) -> Result<Length> {
    let x: f64 = parse_num(line, field, what)?;
    Length::from_input(x).ok_or_else(|| parse_err(line, format!("{what} '{field}' out of range")))
}

fn parse_prob(line: usize, field: &str) -> Result<f64> {
    let p: f64 = parse_num(line, field, "probability")?;
    if !(0.0..=1.0).contains(&p) {
        return Err(parse_err(line, format!("probability {p} outside [0,1]")));
    }
    Ok(p)
}

fn expect_arity(line: usize, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(parse_err(
            line,
            format!("'{}' expects {} fields, got {}", fields[0], n, fields.len()),
        ));
    }
    Ok(())
}

/// Parses the line-oriented instance format.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = content_lines(text);
    let eof = |what: &str| parse_err(text.lines().count().max(1), format!("unexpected end of input, expected {what}"));

    let (ln, fields) = lines.next().ok_or_else(|| eof("'tree'"))?;
    if fields[0] != "tree" {
        return Err(parse_err(ln, format!("expected 'tree', found '{}'", fields[0])));
    }
    expect_arity(ln, &fields, 2)?;
    let t: usize = parse_num(ln, fields[1], "vertex count")?;
    if t == 0 {
        return Err(parse_err(ln, "tree needs at least one vertex"));
    }

    let mut edges = Vec::with_capacity(t - 1);
    let mut dsu = Dsu::new(t);
    for _ in 1..t {
        let (ln, fields) = lines.next().ok_or_else(|| eof("'edge'"))?;
        if fields[0] != "edge" {
            return Err(parse_err(ln, format!("expected 'edge', found '{}'", fields[0])));
        }
        expect_arity(ln, &fields, 4)?;
        let u: usize = parse_num(ln, fields[1], "vertex")?;
        let v: usize = parse_num(ln, fields[2], "vertex")?;
        if u >= t || v >= t {
            return Err(parse_err(ln, format!("edge endpoint out of range 0..{t}")));
        }
        let weight = parse_length(ln, fields[3], "weight")?;
        if !weight.is_positive() {
            return Err(parse_err(ln, format!("nonpositive weight {}", fields[3])));
        }
        if !dsu.union(u, v) {
            return Err(parse_err(ln, format!("edge {u}-{v} closes a cycle")));
        }
        edges.push(Edge { u, v, weight });
    }
    let tree = WeightedTree::new(t, edges)?;

    let (ln, fields) = lines.next().ok_or_else(|| eof("'points'"))?;
    if fields[0] != "points" {
        return Err(parse_err(ln, format!("expected 'points', found '{}'", fields[0])));
    }
    expect_arity(ln, &fields, 2)?;
    let n: usize = parse_num(ln, fields[1], "point count")?;

    let mut points = Vec::with_capacity(n);
    let mut ids = std::collections::HashSet::with_capacity(n);
    for _ in 0..n {
        let (ln, fields) = lines.next().ok_or_else(|| eof("'point'"))?;
        if fields[0] != "point" || fields.len() < 2 {
            return Err(parse_err(ln, format!("expected 'point', found '{}'", fields[0])));
        }
        let id = parse_num(ln, fields[1], "point id")?;
        if !ids.insert(id) {
            return Err(parse_err(ln, format!("duplicate point id {id}")));
        }
        let (location, prob) = match fields.get(2).copied() {
            Some("v") => {
                expect_arity(ln, &fields, 5)?;
                let v: usize = parse_num(ln, fields[3], "vertex")?;
                (Location::Vertex(v), parse_prob(ln, fields[4])?)
            }
            Some("e") => {
                expect_arity(ln, &fields, 6)?;
                let edge = parse_num(ln, fields[3], "edge index")?;
                let offset = parse_length(ln, fields[4], "offset")?;
                (Location::EdgePoint { edge, offset }, parse_prob(ln, fields[5])?)
            }
            _ => return Err(parse_err(ln, "location kind must be 'v' or 'e'")),
        };
        let location = tree.canonical(location).map_err(|e| match e {
            Error::InvalidLocation(m) => parse_err(ln, m),
            other => other,
        })?;
        points.push(StochasticPoint { id, location, prob });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after the last point"));
    }
    Instance::new(tree, points)
}

/// Renders an instance in the format read by [`parse_instance`], using the
/// shortest round-trip decimal for every number.
pub fn serialize_instance(inst: &Instance) -> String {
    let tree = inst.tree();
    let mut out = String::new();
    writeln!(out, "tree {}", tree.vertex_count()).unwrap();
    for e in tree.edges() {
        writeln!(out, "edge {} {} {}", e.u, e.v, e.weight.to_f64()).unwrap();
    }
    writeln!(out, "points {}", inst.len()).unwrap();
    for p in inst.points() {
        match p.location {
            Location::Vertex(v) => writeln!(out, "point {} v {} {}", p.id, v, p.prob),
            Location::EdgePoint { edge, offset } => {
                writeln!(out, "point {} e {} {} {}", p.id, edge, offset.to_f64(), p.prob)
            }
        }
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let inst = parse_instance("tree 2\nedge 0 1 5.0\npoints 1\npoint 0 v 0 1.0").unwrap();
        assert_eq!(inst.tree().vertex_count(), 2);
        assert_eq!(inst.points()[0].location, Location::Vertex(0));
        assert_eq!(inst.points()[0].prob, 1.0);
    }

    fn line_of(text: &str) -> usize {
        match parse_instance(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("tree 2\nedge 0 1 -5.0\npoints 1\npoint 0 v 0 1.0"), 2);
        assert_eq!(line_of("tree 3\nedge 0 1 1\nedge 1 0 1\npoints 0"), 3);
        assert_eq!(line_of("tree 2\nedge 0 1 1\npoints 1\npoint 0 e 0 2 0.5"), 4);
        assert_eq!(line_of("tree 2\nedge 0 1 1\npoints 1\npoint 0 v 0 1.5"), 4);
        assert_eq!(line_of("tree 2\n# c\nedge 0 1 1\npoints 1\npoint 0 v 7 0.5"), 5);
        assert_eq!(line_of("tree 2\nedge 0 1 x\npoints 0"), 2);
        assert_eq!(line_of("tree 2\nedge 0 1 1\npoints 2\npoint 0 v 0 0.5\npoint 0 v 1 0.5"), 5);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let inst = parse_instance(
            "# header\ntree 2\n\nedge 0 1 2.5 # weight\npoints 1\npoint 4 e 0 1.25 0.3\n",
        )
        .unwrap();
        assert_eq!(inst.points()[0].id, 4);
    }

    #[test]
    fn round_trips_text() {
        let text = "tree 3\nedge 0 1 3\nedge 2 1 0.1\npoints 3\npoint 0 v 0 0.5\npoint 7 e 0 1.7 0.25\npoint 2 e 1 0.05 1\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(serialize_instance(&inst), text);
    }
}
