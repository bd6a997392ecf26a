//! Threshold probability `Pr[closest-pair distance >= ell]` by dynamic
//! programming over witnesses on the reduced tree.
//!
//! `P_y(x)` is stored per vertex `x` as a row over the subtree of the parent
//! of `x` (the root's row covers the whole tree). Realizations with fewer
//! than two points have closest-pair distance 0 and never count.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::length::Length;
use crate::reduction::{reduce, ReducedSpace};
use crate::tree_space::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Cubic,
    Quadratic,
    Chain,
    /// Chain when the original tree has fewer vertices than there are
    /// points, quadratic otherwise.
    Auto,
}

impl Algorithm {
    pub const EXPLICIT: [Algorithm; 3] = [Algorithm::Cubic, Algorithm::Quadratic, Algorithm::Chain];

    fn resolve(self, space: &ReducedSpace, n: usize) -> Algorithm {
        match self {
            Algorithm::Auto if space.original_vertex_count() < n => Algorithm::Chain,
            Algorithm::Auto => Algorithm::Quadratic,
            a => a,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Cubic => "cubic",
            Algorithm::Quadratic => "quadratic",
            Algorithm::Chain => "chain",
            Algorithm::Auto => "auto",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic" => Ok(Algorithm::Cubic),
            "quadratic" => Ok(Algorithm::Quadratic),
            "chain" => Ok(Algorithm::Chain),
            "auto" => Ok(Algorithm::Auto),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// Double-double accumulator: keeps the rounding error of every addition.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub(crate) fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        self.lo += (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
    }

    pub(crate) fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Product of many factors in `[0, 1]`, kept as mantissa, binary exponent
/// and a count of exact zeros so that long products neither underflow nor
/// turn ratios into `0/0`.
#[derive(Clone, Copy, Debug)]
struct Scaled {
    mant: f64,
    exp: i32,
    zeros: u32,
}

impl Scaled {
    const ONE: Scaled = Scaled {
        mant: 1.0,
        exp: 0,
        zeros: 0,
    };
    const RESCALE: i32 = 512;

    fn times(self, f: f64) -> Scaled {
        if f == 0.0 {
            return Scaled {
                zeros: self.zeros + 1,
                ..self
            };
        }
        let mut out = Scaled {
            mant: self.mant * f,
            ..self
        };
        if out.mant < 2f64.powi(-Self::RESCALE) {
            out.mant *= 2f64.powi(Self::RESCALE);
            out.exp -= Self::RESCALE;
        }
        out
    }

    /// `self / den` where `den` is a prefix of the product `self`.
    fn ratio(self, den: Scaled) -> f64 {
        if self.zeros > den.zeros {
            return 0.0;
        }
        (self.mant / den.mant) * 2f64.powi(self.exp - den.exp)
    }
}

struct ChainState {
    /// `sigma[i]` is the product of `1 - pi` over the first `i` chain vertices.
    sigma: Vec<Scaled>,
    /// `anchor[i] = P_{b_{i-1}}(b_i)` for `i` in `1..=k` (1-based).
    anchor: Vec<f64>,
    /// `P_{b_k}(b_{k+1})`, or 1 when `b_k` is a leaf.
    tail: f64,
    next: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Cubic,
    Quadratic,
    Chain,
}

struct Engine<'a> {
    space: &'a ReducedSpace,
    ell: Length,
    mode: Mode,
    checked: bool,
    keep_rows: bool,
    rows: Vec<Option<Vec<f64>>>,
    chains: Vec<Option<ChainState>>,
    absent: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(space: &'a ReducedSpace, ell: Length, mode: Mode) -> Self {
        Engine {
            space,
            ell,
            mode,
            checked: false,
            keep_rows: false,
            rows: vec![None; space.len()],
            chains: (0..space.chains().len()).map(|_| None).collect(),
            absent: vec![1.0; space.len()],
        }
    }

    /// `P_y(x)` for `y` in the subtree of the parent of `x`.
    fn get(&self, x: usize, y: usize) -> f64 {
        if let Some(row) = &self.rows[x] {
            return row[y - self.space.parent(x)];
        }
        let (c, pos) = self
            .space
            .chain_position(x)
            .expect("row of a processed vertex");
        self.chain_get(c, pos, y)
    }

    fn chain_get(&self, c: usize, pos: usize, y: usize) -> f64 {
        let s = self.space;
        let st = self.chains[c].as_ref().expect("chain processed");
        let verts = &s.chains()[c].vertices;
        let k = verts.len();
        let bi = verts[pos];
        if y == s.parent(bi) && y != bi {
            return st.anchor[pos + 1];
        }
        match s.chain_position(y) {
            Some((c2, j)) if c2 == c => {
                debug_assert!(j >= pos);
                let below = if j + 1 == k { st.tail } else { st.anchor[j + 2] };
                below * s.prob(y) * st.sigma[j].ratio(st.sigma[pos])
            }
            _ => {
                let next = st.next.expect("vertex below the chain");
                self.get(next, y) * st.sigma[k].ratio(st.sigma[pos])
            }
        }
    }

    fn run(&mut self) -> f64 {
        let s = self.space;
        for &x in s.prec_order().iter().rev() {
            if self.mode == Mode::Chain {
                if let Some((c, pos)) = s.chain_position(x) {
                    if pos + 1 == s.chains()[c].vertices.len() {
                        self.process_chain(c);
                    }
                    continue;
                }
            }
            self.process_vertex(x);
        }
        let root = s.root();
        let mut total = Dd::default();
        for y in s.subtree(root) {
            total.add(self.get(root, y));
        }
        total.add(-p0(s));
        total.value().clamp(0.0, 1.0)
    }

    fn process_vertex(&mut self, x: usize) {
        let s = self.space;
        let range = s.subtree(x);
        let px = s.prob(x);
        let mut part: Vec<f64> = range
            .clone()
            .map(|y| if y == x { px } else { 1.0 - px })
            .collect();
        let mut absent = 1.0 - px;
        for &c in s.children(x) {
            for y in range.clone() {
                part[y - x] *= self.get(c, y);
            }
            absent *= self.absent[c];
        }
        self.absent[x] = absent;

        let row = if x == s.root() {
            part
        } else {
            self.outside_row(x, part)
        };
        self.rows[x] = Some(row);

        if !self.keep_rows {
            for &c in s.children(x) {
                self.rows[c] = None;
                if let Some((ch, 0)) = s.chain_position(c) {
                    if let Some(st) = self.chains[ch].take() {
                        if let Some(next) = st.next {
                            self.rows[next] = None;
                        }
                    }
                }
            }
        }
    }

    /// Extends the in-subtree values of `x` with `P_y(x)` for every `y` in
    /// the parent's subtree outside `T_x`.
    fn outside_row(&self, x: usize, part: Vec<f64>) -> Vec<f64> {
        let s = self.space;
        let p = s.parent(x);
        let mut row = vec![0.0; s.subtree_size(p)];
        row[x - p..x - p + part.len()].copy_from_slice(&part);

        let zs: Vec<usize> = s
            .prec_order()
            .iter()
            .copied()
            .filter(|&z| s.in_subtree(x, z))
            .collect();
        let ys = s
            .prec_order()
            .iter()
            .copied()
            .filter(|&y| s.in_subtree(p, y) && !s.in_subtree(x, y));
        let base = self.absent[x];
        // dist(z, y) = dep(z) + dep(y) - 2 dep(p) for z inside, y outside T_x
        let twice_p = s.depth(p) + s.depth(p);
        let pz = |z: usize| part[z - x];

        match self.mode {
            Mode::Cubic => {
                for y in ys {
                    let mut sum = base;
                    for &z in &zs {
                        if s.prec_rank(y) < s.prec_rank(z)
                            && s.depth(z) + s.depth(y) - twice_p >= self.ell
                        {
                            sum += pz(z);
                        }
                    }
                    row[y - p] = sum;
                }
            }
            Mode::Quadratic | Mode::Chain => {
                let m = zs.len();
                let (mut after_y, mut far_enough) = (0, m);
                let mut start = m;
                let mut sum = Dd::default();
                let mut shrinking = false;
                for y in ys {
                    while after_y < m && s.prec_rank(zs[after_y]) < s.prec_rank(y) {
                        after_y += 1;
                    }
                    let thr = self.ell + twice_p - s.depth(y);
                    while far_enough > 0 && s.depth(zs[far_enough - 1]) >= thr {
                        far_enough -= 1;
                    }
                    let target = after_y.max(far_enough);
                    if target < start {
                        if self.checked {
                            assert!(!shrinking, "candidate suffix grew after shrinking");
                        }
                        for &z in &zs[target..start] {
                            sum.add(pz(z));
                        }
                    } else if target > start {
                        shrinking = true;
                        for &z in &zs[start..target] {
                            sum.add(-pz(z));
                        }
                    }
                    start = target;
                    let mut v = sum;
                    v.add(base);
                    row[y - p] = v.value().max(0.0);
                }
            }
        }
        row
    }

    fn process_chain(&mut self, c: usize) {
        let s = self.space;
        let verts = s.chains()[c].vertices.clone();
        let k = verts.len();
        let bk = verts[k - 1];
        let next = s.children(bk).first().copied();
        let tail = next.map_or(1.0, |nx| self.get(nx, bk));

        let mut sigma = Vec::with_capacity(k + 1);
        sigma.push(Scaled::ONE);
        for &b in &verts {
            let last = *sigma.last().expect("nonempty");
            sigma.push(last.times(1.0 - s.prob(b)));
        }
        let mut absent = next.map_or(1.0, |nx| self.absent[nx]);
        for &b in verts.iter().rev() {
            absent *= 1.0 - s.prob(b);
            self.absent[b] = absent;
        }
        self.chains[c] = Some(ChainState {
            sigma,
            anchor: vec![0.0; k + 1],
            tail,
            next,
        });

        let b1 = verts[0];
        let sorted: Vec<usize> = s
            .prec_order()
            .iter()
            .copied()
            .filter(|&z| s.in_subtree(b1, z))
            .collect();
        let first_at_least =
            |thr: Length| sorted.partition_point(|&z| s.depth(z) < thr);
        let mut suffix = first_at_least(s.depth(bk) + self.ell);

        for i in (1..=k).rev() {
            let bi = verts[i - 1];
            if bi == s.root() {
                break;
            }
            let thr = s.depth(s.parent(bi)) + self.ell;
            let mut new_suffix = suffix;
            while new_suffix > 0 && s.depth(sorted[new_suffix - 1]) >= thr {
                new_suffix -= 1;
            }
            let st = self.chains[c].as_ref().expect("just stored");
            let own = if i == k { st.tail } else { st.anchor[i + 1] };
            let pi = s.prob(bi);
            let mut acc = Dd::default();
            acc.add((1.0 - pi) * own);
            for &z in &sorted[new_suffix..suffix] {
                let v = if z == bi {
                    pi * own
                } else if i == k {
                    (1.0 - pi) * self.get(next.expect("z below the chain"), z)
                } else {
                    (1.0 - pi) * self.chain_get(c, i, z)
                };
                acc.add(v);
            }
            self.chains[c].as_mut().expect("just stored").anchor[i] = acc.value();
            suffix = new_suffix;
        }
    }
}

/// Probability that a realization contains exactly one point.
fn p0(space: &ReducedSpace) -> f64 {
    let n = space.len();
    let mut suffix = vec![1.0; n + 1];
    for v in (0..n).rev() {
        suffix[v] = suffix[v + 1] * (1.0 - space.prob(v));
    }
    let mut prefix = 1.0;
    let mut total = Dd::default();
    for v in 0..n {
        total.add(space.prob(v) * prefix * suffix[v + 1]);
        prefix *= 1.0 - space.prob(v);
    }
    total.value()
}

fn check_ell(ell: Length) -> Result<()> {
    if !ell.is_positive() {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    Ok(())
}

pub(crate) fn length_arg(x: f64, what: &str) -> Result<Length> {
    Length::from_f64(x).ok_or_else(|| Error::InvalidArgument(format!("{what} {x} is not a finite length")))
}

fn solve(space: &ReducedSpace, ell: Length, mode: Mode, checked: bool) -> Result<f64> {
    check_ell(ell)?;
    let mut e = Engine::new(space, ell, mode);
    e.checked = checked;
    Ok(e.run())
}

pub fn threshold_cubic(space: &ReducedSpace, ell: Length) -> Result<f64> {
    solve(space, ell, Mode::Cubic, false)
}

pub fn threshold_quadratic(space: &ReducedSpace, ell: Length) -> Result<f64> {
    solve(space, ell, Mode::Quadratic, false)
}

/// Quadratic variant that asserts the grow-then-shrink shape of the
/// candidate suffixes while it runs.
pub fn threshold_quadratic_checked(space: &ReducedSpace, ell: Length) -> Result<f64> {
    solve(space, ell, Mode::Quadratic, true)
}

pub fn threshold_chain(space: &ReducedSpace, ell: Length) -> Result<f64> {
    solve(space, ell, Mode::Chain, false)
}

/// Dispatches on a reduced space; `n` is the number of real points.
pub fn threshold_on(space: &ReducedSpace, n: usize, ell: Length, algo: Algorithm) -> Result<f64> {
    match algo.resolve(space, n) {
        Algorithm::Cubic => threshold_cubic(space, ell),
        Algorithm::Quadratic => threshold_quadratic(space, ell),
        _ => threshold_chain(space, ell),
    }
}

/// Normalizes, reduces and evaluates the threshold probability.
pub fn threshold_probability(instance: &Instance, ell: f64, algo: Algorithm) -> Result<f64> {
    let ell = length_arg(ell, "threshold")?;
    check_ell(ell)?;
    if instance.is_empty() {
        return Ok(0.0);
    }
    let inst = instance.normalize();
    let space = reduce(&inst)?;
    threshold_on(&space, inst.len(), ell, algo)
}

/// All `P_y(x)` values of the cubic recurrence, kept for inspection.
#[derive(Clone, Debug)]
pub struct DpTable {
    rows: Vec<Vec<f64>>,
    starts: Vec<usize>,
    p0: f64,
    value: f64,
}

impl DpTable {
    /// `P_y(x)` for reduced vertices, `None` when `y` is outside the subtree
    /// of the parent of `x`.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let row = self.rows.get(x)?;
        y.checked_sub(self.starts[x]).and_then(|i| row.get(i)).copied()
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }
}

/// Runs the cubic recurrence keeping every row.
pub fn dp_table(space: &ReducedSpace, ell: Length) -> Result<DpTable> {
    check_ell(ell)?;
    let mut e = Engine::new(space, ell, Mode::Cubic);
    e.checked = true;
    e.keep_rows = true;
    let value = e.run();
    let rows = e.rows.into_iter().map(|r| r.expect("every row kept")).collect();
    Ok(DpTable {
        rows,
        starts: (0..space.len()).map(|v| space.parent(v)).collect(),
        p0: p0(space),
        value,
    })
}

/// Whether the closest-pair distance of `subset` (reduced vertices) is at
/// least `ell`, decided through witnesses: every non-root vertex must have
/// no witness, the same witness as its parent, or a witness at distance
/// `>= ell` from the parent's.
pub fn is_legal(space: &ReducedSpace, subset: &[usize], ell: Length) -> Result<bool> {
    check_ell(ell)?;
    let n = space.len();
    let mut member = vec![false; n];
    for &v in subset {
        if v >= n {
            return Err(Error::InvalidArgument(format!("vertex {v} not in the space")));
        }
        member[v] = true;
    }
    let mut witness: Vec<Option<usize>> = vec![None; n];
    for v in (0..n).rev() {
        let mut best = member[v].then_some(v);
        for &c in space.children(v) {
            best = match (best, witness[c]) {
                (Some(a), Some(b)) if space.prec_rank(b) < space.prec_rank(a) => Some(b),
                (None, w) => w,
                (b, _) => b,
            };
        }
        witness[v] = best;
    }
    Ok((1..n).all(|v| match (witness[v], witness[space.parent(v)]) {
        (None, _) => true,
        (Some(a), Some(b)) => a == b || space.dist(a, b) >= ell,
        (Some(_), None) => unreachable!("parent subtree contains the child's"),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_space::{generate_random, parse_instance, ProbModel};

    const INSTANCE_A: &str =
        "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n";

    fn len(x: f64) -> Length {
        Length::from_input(x).unwrap()
    }

    fn space_a() -> ReducedSpace {
        reduce(&parse_instance(INSTANCE_A).unwrap()).unwrap()
    }

    #[test]
    fn instance_a_values() {
        let s = space_a();
        for f in [threshold_cubic, threshold_quadratic, threshold_chain] {
            assert_eq!(f(&s, len(3.5)).unwrap(), 0.5);
            assert_eq!(f(&s, len(5.0)).unwrap(), 0.25);
        }
        let inst = parse_instance(INSTANCE_A).unwrap();
        assert_eq!(threshold_probability(&inst, 3.5, Algorithm::Auto).unwrap(), 0.5);
        assert_eq!(threshold_probability(&inst, 100.0, Algorithm::Auto).unwrap(), 0.0);
    }

    #[test]
    fn instance_a_table() {
        let t = dp_table(&space_a(), len(3.5)).unwrap();
        // vertices are a1, a2, a3 in order; get(x, y) is P_y(x)
        assert_eq!(t.get(2, 1), Some(1.0));
        assert_eq!(t.get(1, 1), Some(0.5));
        assert_eq!(t.get(1, 2), Some(0.5));
        assert_eq!(t.get(1, 0), Some(0.5));
        assert_eq!(t.row(0), &[0.25, 0.25, 0.25]);
        assert_eq!(t.p0(), 0.25);
        assert_eq!(t.get(2, 0), None);
    }

    #[test]
    fn legality_by_witnesses() {
        let s = space_a();
        assert!(is_legal(&s, &[0, 2], len(5.0)).unwrap());
        assert!(!is_legal(&s, &[0, 1, 2], len(3.5)).unwrap());
        assert!(is_legal(&s, &[1], len(100.0)).unwrap());
        assert!(is_legal(&s, &[0], Length::ZERO).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        let one = parse_instance("tree 2\nedge 0 1 1\npoints 1\npoint 0 v 0 0.7\n").unwrap();
        assert_eq!(threshold_probability(&one, 0.5, Algorithm::Auto).unwrap(), 0.0);
        let none = parse_instance("tree 2\nedge 0 1 1\npoints 0\n").unwrap();
        assert_eq!(threshold_probability(&none, 0.5, Algorithm::Auto).unwrap(), 0.0);
        assert!(threshold_probability(&one, -1.0, Algorithm::Auto).is_err());
    }

    #[test]
    fn certain_points_give_one_up_to_closest_distance() {
        let inst = generate_random(10, 6, 9, ProbModel::Fixed(1.0)).unwrap();
        let mut closest = f64::INFINITY;
        for i in 0..6 {
            for j in 0..i {
                closest = closest.min(inst.point_dist(i, j).to_f64());
            }
        }
        for algo in Algorithm::EXPLICIT {
            assert_eq!(threshold_probability(&inst, closest, algo).unwrap(), 1.0);
        }
    }

    #[test]
    fn chain_with_certain_point_agrees() {
        // a long path with a pi = 1 point in the middle
        let inst = parse_instance(
            "tree 2\nedge 0 1 20\npoints 6\npoint 0 v 0 0.4\npoint 1 e 0 3 0.6\npoint 2 e 0 7 1\npoint 3 e 0 9 0.3\npoint 4 e 0 15 0.8\npoint 5 v 1 0.5\n",
        )
        .unwrap();
        let s = reduce(&inst).unwrap();
        for ell in [1.0, 2.5, 4.0, 6.0, 8.0, 12.0] {
            let c = threshold_cubic(&s, len(ell)).unwrap();
            let q = threshold_quadratic_checked(&s, len(ell)).unwrap();
            let h = threshold_chain(&s, len(ell)).unwrap();
            assert!((c - q).abs() < 1e-15 && (c - h).abs() < 1e-15, "{ell}: {c} {q} {h}");
        }
    }

    #[test]
    fn witness_events_are_disjoint() {
        for seed in 0..20 {
            let inst = generate_random(8, 9, seed, ProbModel::Uniform).unwrap();
            let s = reduce(&inst).unwrap();
            let t = dp_table(&s, len(2.0)).unwrap();
            let total: f64 = t.row(0).iter().sum();
            assert!(total <= 1.0 + 1e-12);
            assert!(t.row(0).iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        }
    }
}
