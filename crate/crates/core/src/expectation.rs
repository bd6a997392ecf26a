//! Expected closest-pair distance.
//!
//! The exact value sums threshold probabilities over the distinct pairwise
//! distances. The approximation queries a sparse schedule instead: edge
//! weights of a spanning tree, sorted, split where a weight exceeds the sum
//! of all smaller ones; each block contributes one geometric run of
//! thresholds from its smallest weight to its prefix sum. No pairwise
//! distance falls between two blocks, so the sum is within `1 + eps`.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::closest_pair::{threshold_on, Algorithm, Dd};
use crate::error::{parse_err, Error, Result};
use crate::length::Length;
use crate::oracle::enum_threshold_matrix;
use crate::reduction::{reduce, ReducedSpace};
use crate::tree_space::Instance;

/// Scalar type of a schedule: exact tree lengths or plain metric values.
pub trait Magnitude: Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    fn to_f64(self) -> f64;
    fn from_f64(x: f64) -> Option<Self>;
}

impl Magnitude for Length {
    const ZERO: Length = Length::ZERO;
    fn to_f64(self) -> f64 {
        Length::to_f64(self)
    }
    fn from_f64(x: f64) -> Option<Length> {
        Length::from_f64(x)
    }
}

impl Magnitude for f64 {
    const ZERO: f64 = 0.0;
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(x: f64) -> Option<f64> {
        x.is_finite().then_some(x)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon {eps} must be positive")))
    }
}

/// `{alpha, tau*alpha, tau^2*alpha, ..., beta}`: the geometric run from
/// `alpha` while below `beta`, then `beta`. A run with `alpha == beta` is
/// `{alpha}`.
pub fn jump<T: Magnitude>(alpha: T, beta: T, tau: f64) -> Result<Vec<T>> {
    if !(alpha > T::ZERO) || alpha > beta {
        return Err(Error::InvalidArgument(format!("jump needs 0 < alpha <= beta, got {alpha:?}, {beta:?}")));
    }
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("jump ratio {tau} must exceed 1")));
    }
    let mut out = vec![alpha];
    let mut x = alpha.to_f64();
    loop {
        x *= tau;
        match T::from_f64(x) {
            Some(l) if l < beta => {
                if l > out[out.len() - 1] {
                    out.push(l);
                }
            }
            _ => break,
        }
    }
    if beta > out[out.len() - 1] {
        out.push(beta);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSchedule<T> {
    /// Strictly increasing thresholds.
    pub thresholds: Vec<T>,
    /// Block (jump) of each threshold.
    pub jump_of: Vec<usize>,
    /// Sorted spanning-tree weights `w_1 <= ... <= w_{N-1}`.
    pub weights: Vec<T>,
    /// One-based block starts `m_1 < ... < m_k`.
    pub index_set: Vec<usize>,
    /// `s_i`: sum of the weights before the next block start.
    pub partial_sums: Vec<T>,
}

impl<T: Magnitude> ThresholdSchedule<T> {
    /// Builds the schedule of a spanning tree given by its edge weights.
    pub fn from_weights(mut weights: Vec<T>, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if weights.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one edge".into()));
        }
        if weights.iter().any(|w| !(*w > T::ZERO)) {
            return Err(Error::InvalidArgument("schedule weights must be positive".into()));
        }
        weights.sort_unstable_by(|a, b| a.partial_cmp(b).expect("weights are comparable"));
        let mut index_set = Vec::new();
        let mut prefix = Vec::with_capacity(weights.len() + 1);
        let mut sum = T::ZERO;
        prefix.push(sum);
        for (j, &w) in weights.iter().enumerate() {
            if sum < w {
                index_set.push(j + 1);
            }
            sum = sum + w;
            prefix.push(sum);
        }
        let k = index_set.len();
        let mut partial_sums = Vec::with_capacity(k);
        let mut thresholds = Vec::new();
        let mut jump_of = Vec::new();
        for i in 0..k {
            let next = index_set.get(i + 1).copied().unwrap_or(weights.len() + 1);
            let s = prefix[next - 1];
            partial_sums.push(s);
            for l in jump(weights[index_set[i] - 1], s, 1.0 + eps)? {
                thresholds.push(l);
                jump_of.push(i);
            }
        }
        Ok(ThresholdSchedule {
            thresholds,
            jump_of,
            weights,
            index_set,
            partial_sums,
        })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// `sum_i (ceil(log_{1+eps} 2) * (m_{i+1} - m_i) + 2)` with
    /// `m_{k+1} = N`, the vertex count of the spanning tree.
    pub fn query_bound(&self, eps: f64) -> usize {
        let per = (std::f64::consts::LN_2 / eps.ln_1p()).ceil() as usize;
        let end = self.weights.len() + 1;
        (0..self.index_set.len())
            .map(|i| {
                let next = self.index_set.get(i + 1).copied().unwrap_or(end);
                per * (next - self.index_set[i]) + 2
            })
            .sum()
    }

    /// Thresholds adjacent in the schedule but in different blocks.
    pub fn block_gaps(&self) -> impl Iterator<Item = (T, T)> + '_ {
        (1..self.len())
            .filter(|&i| self.jump_of[i] != self.jump_of[i - 1])
            .map(|i| (self.thresholds[i - 1], self.thresholds[i]))
    }
}

/// Schedule from the reduced tree's edge weights.
pub fn build_schedule(space: &ReducedSpace, eps: f64) -> Result<ThresholdSchedule<Length>> {
    if space.len() < 2 {
        return Err(Error::InvalidArgument("schedule needs a reduced tree with two vertices".into()));
    }
    ThresholdSchedule::from_weights((1..space.len()).map(|v| space.edge_weight(v)).collect(), eps)
}

/// The single run from the shortest edge to the total edge length.
pub fn bounded_spread_schedule(space: &ReducedSpace, eps: f64) -> Result<Vec<Length>> {
    check_eps(eps)?;
    let w: Vec<Length> = (1..space.len()).map(|v| space.edge_weight(v)).collect();
    let min = w.iter().copied().min().ok_or_else(|| Error::InvalidArgument("no edges".into()))?;
    jump(min, w.iter().copied().sum(), 1.0 + eps)
}

/// Sum of `C(l_i) * (l_i - l_{i-1})` over increasing thresholds, `l_0 = 0`.
fn integrate<T: Magnitude>(thresholds: &[T], mut c: impl FnMut(T) -> Result<f64>) -> Result<f64> {
    let mut acc = Dd::default();
    let mut prev = T::ZERO;
    for &l in thresholds {
        acc.add(c(l)? * (l - prev).to_f64());
        prev = l;
    }
    Ok(acc.value())
}

/// Exact `E[closest-pair distance]` through one threshold query per
/// distinct pairwise distance.
pub fn expected_exact(instance: &Instance) -> Result<f64> {
    let inst = instance.normalize();
    let n = inst.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut ds: Vec<Length> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| inst.point_dist(i, j))
        .collect();
    ds.sort_unstable();
    ds.dedup();
    let space = reduce(&inst)?;
    integrate(&ds, |l| threshold_on(&space, n, l, Algorithm::Auto))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Approximation {
    pub value: f64,
    /// Threshold-probability queries issued.
    pub queries: usize,
    /// The bound the query count must respect.
    pub query_bound: usize,
}

/// `E` with `E <= E[closest-pair distance] <= (1 + eps) E`.
pub fn expected_approx(instance: &Instance, eps: f64) -> Result<Approximation> {
    check_eps(eps)?;
    let inst = instance.normalize();
    let n = inst.len();
    if n < 2 {
        return Ok(Approximation {
            value: 0.0,
            queries: 0,
            query_bound: 0,
        });
    }
    let space = reduce(&inst)?;
    let schedule = build_schedule(&space, eps)?;
    let value = integrate(&schedule.thresholds, |l| threshold_on(&space, n, l, Algorithm::Auto))?;
    Ok(Approximation {
        value,
        queries: schedule.len(),
        query_bound: schedule.query_bound(eps),
    })
}

/// Largest point count the built-in metric threshold oracle enumerates.
pub const METRIC_ENUMERATION_CAP: usize = 20;

/// Points of a finite metric space with existence probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricInstance {
    dist: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl MetricInstance {
    /// Validates a distance matrix: square, symmetric, zero diagonal,
    /// positive off-diagonal and the triangle inequality within relative
    /// slack `1e-9`.
    pub fn new(dist: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let n = dist.len();
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if probs.len() != n {
            return bad(format!("{} probabilities for {n} points", probs.len()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("probability {p} outside [0,1]"));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return bad(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            if row[i] != 0.0 {
                return bad(format!("diagonal entry {i} is not zero"));
            }
            for j in 0..n {
                let d = row[j];
                if i != j && !(d.is_finite() && d > 0.0) {
                    return bad(format!("distance ({i},{j}) = {d} must be positive and finite"));
                }
                if d != dist[j][i] {
                    return bad(format!("matrix is not symmetric at ({i},{j})"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (dist[i][k], dist[i][j], dist[j][k]);
                    if a > (b + c) * (1.0 + 1e-9) {
                        return bad(format!("triangle inequality fails for ({i},{j},{k})"));
                    }
                }
            }
        }
        Ok(MetricInstance { dist, probs })
    }

    /// Distance matrix of the normalized points of a tree instance.
    pub fn from_instance(instance: &Instance) -> Result<Self> {
        let inst = instance.normalize();
        let n = inst.len();
        let dist = (0..n)
            .map(|i| (0..n).map(|j| inst.point_dist(i, j).to_f64()).collect())
            .collect();
        MetricInstance::new(dist, inst.points().iter().map(|p| p.prob).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn dist(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Minimum spanning tree edges `(i, j, weight)` by dense Prim.
    pub fn mst(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        if n == 0 {
            return out;
        }
        let mut done = vec![false; n];
        let mut best: Vec<(f64, usize)> = self.dist[0].iter().map(|&d| (d, 0)).collect();
        done[0] = true;
        for _ in 1..n {
            let v = (0..n)
                .filter(|&v| !done[v])
                .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
                .expect("a vertex remains");
            done[v] = true;
            out.push((best[v].1, v, best[v].0));
            for u in 0..n {
                if !done[u] && self.dist[v][u] < best[u].0 {
                    best[u] = (self.dist[v][u], v);
                }
            }
        }
        out
    }
}

/// Text form: `metric <n>`, `n` rows of distances, `probs`, `n`
/// probabilities.
pub fn parse_metric(text: &str) -> Result<MetricInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 2 || f[0] != "metric" {
        return Err(parse_err(ln, "expected 'metric <n>'"));
    }
    let n: usize = f[1]
        .parse()
        .map_err(|_| parse_err(ln, format!("invalid point count '{}'", f[1])))?;
    let num = |ln: usize, t: &str| -> Result<f64> {
        t.parse()
            .map_err(|_| parse_err(ln, format!("invalid number '{t}'")))
    };
    let mut dist = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, row) = lines.next().ok_or_else(|| parse_err(0, "missing matrix row"))?;
        let row: Vec<f64> = row.split_whitespace().map(|t| num(ln, t)).collect::<Result<_>>()?;
        if row.len() != n {
            return Err(parse_err(ln, format!("row has {} entries, expected {n}", row.len())));
        }
        dist.push(row);
    }
    let (ln, p) = lines.next().ok_or_else(|| parse_err(0, "missing 'probs'"))?;
    let mut tokens: Vec<(usize, &str)> = p.split_whitespace().map(|t| (ln, t)).collect();
    if tokens.first().map(|t| t.1) != Some("probs") {
        return Err(parse_err(ln, "expected 'probs'"));
    }
    tokens.remove(0);
    for (ln, l) in lines {
        tokens.extend(l.split_whitespace().map(|t| (ln, t)));
    }
    if tokens.len() != n {
        let ln = tokens.last().map_or(ln, |t| t.0);
        return Err(parse_err(ln, format!("{} probabilities, expected {n}", tokens.len())));
    }
    let probs = tokens.iter().map(|&(ln, t)| num(ln, t)).collect::<Result<_>>()?;
    MetricInstance::new(dist, probs)
}

pub fn serialize_metric(m: &MetricInstance) -> String {
    let mut s = format!("metric {}\n", m.len());
    for row in &m.dist {
        let r: Vec<String> = row.iter().map(|d| d.to_string()).collect();
        s.push_str(&r.join(" "));
        s.push('\n');
    }
    s.push_str("probs");
    for p in &m.probs {
        s.push_str(&format!(" {p}"));
    }
    s.push('\n');
    s
}

/// Source of threshold probabilities for metric instances.
pub trait MetricThresholdOracle {
    fn threshold(&self, metric: &MetricInstance, ell: f64) -> Result<f64>;
}

/// Realization enumeration, for at most [`METRIC_ENUMERATION_CAP`] points.
#[derive(Clone, Copy, Debug, Default)]
pub struct EnumerationOracle;

impl MetricThresholdOracle for EnumerationOracle {
    fn threshold(&self, metric: &MetricInstance, ell: f64) -> Result<f64> {
        if metric.len() > METRIC_ENUMERATION_CAP {
            return Err(Error::TooLarge(format!(
                "{} points exceed the metric enumeration cap of {METRIC_ENUMERATION_CAP}; supply a threshold oracle",
                metric.len()
            )));
        }
        enum_threshold_matrix(&metric.dist, &metric.probs, ell)
    }
}

/// Schedule of a metric instance from its minimum spanning tree.
pub fn metric_schedule(metric: &MetricInstance, eps: f64) -> Result<ThresholdSchedule<f64>> {
    ThresholdSchedule::from_weights(metric.mst().into_iter().map(|e| e.2).collect(), eps)
}

pub fn expected_approx_metric(metric: &MetricInstance, eps: f64) -> Result<Approximation> {
    expected_approx_metric_with(metric, eps, &EnumerationOracle)
}

pub fn expected_approx_metric_with(
    metric: &MetricInstance,
    eps: f64,
    oracle: &dyn MetricThresholdOracle,
) -> Result<Approximation> {
    check_eps(eps)?;
    if metric.len() < 2 {
        return Ok(Approximation {
            value: 0.0,
            queries: 0,
            query_bound: 0,
        });
    }
    let schedule = metric_schedule(metric, eps)?;
    let value = integrate(&schedule.thresholds, |l| oracle.threshold(metric, l))?;
    Ok(Approximation {
        value,
        queries: schedule.len(),
        query_bound: schedule.query_bound(eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enum_expected, enum_expected_matrix};
    use crate::tree_space::{generate_random, parse_instance, ProbModel};

    fn instance_a() -> Instance {
        parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap()
    }

    #[test]
    fn jumps() {
        assert_eq!(jump(1.0, 10.0, 2.0).unwrap(), vec![1.0, 2.0, 4.0, 8.0, 10.0]);
        assert_eq!(jump(5.0, 6.0, 10.0).unwrap(), vec![5.0, 6.0]);
        assert_eq!(jump(1.0, 8.0, 2.0).unwrap(), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(jump(3.0, 3.0, 2.0).unwrap(), vec![3.0]);
        assert!(jump(0.0, 1.0, 2.0).is_err());
        assert!(jump(2.0, 1.0, 2.0).is_err());
        assert!(jump(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn schedule_blocks() {
        let s = ThresholdSchedule::from_weights(vec![10.0, 1.0, 3.0, 1.0], 0.5).unwrap();
        assert_eq!(s.index_set, vec![1, 3, 4]);
        assert_eq!(s.partial_sums, vec![2.0, 5.0, 15.0]);
        let mut want = jump(1.0, 2.0, 1.5).unwrap();
        want.extend(jump(3.0, 5.0, 1.5).unwrap());
        want.extend(jump(10.0, 15.0, 1.5).unwrap());
        assert_eq!(s.thresholds, want);

        let single = ThresholdSchedule::from_weights(vec![4.0], 0.1).unwrap();
        assert_eq!(single.thresholds, vec![4.0]);

        let equal = ThresholdSchedule::from_weights(vec![1.0; 8], 0.1).unwrap();
        assert_eq!(equal.index_set, vec![1]);
        assert_eq!(equal.len(), jump(1.0, 8.0, 1.1).unwrap().len());
        assert_eq!(equal.len(), (8f64.ln() / 1.1f64.ln()).ceil() as usize + 1);
    }

    #[test]
    fn instance_a_expectations() {
        let a = instance_a();
        assert_eq!(expected_exact(&a).unwrap(), 3.5);
        let r = expected_approx(&a, 0.01).unwrap();
        assert!(r.value <= 3.5 && 3.5 <= 1.01 * r.value);
        assert!(r.queries <= r.query_bound);
    }

    #[test]
    fn certain_pair() {
        let p = parse_instance("tree 2\nedge 0 1 5\npoints 2\npoint 0 v 0 1\npoint 1 v 1 1\n").unwrap();
        assert_eq!(expected_exact(&p).unwrap(), 5.0);
        for eps in [0.5, 0.1, 0.01] {
            assert_eq!(expected_approx(&p, eps).unwrap().value, 5.0);
        }
        let single = parse_instance("tree 2\nedge 0 1 5\npoints 1\npoint 0 v 0 0.4\n").unwrap();
        assert_eq!(expected_exact(&single).unwrap(), 0.0);
    }

    #[test]
    fn exact_matches_enumeration() {
        for seed in 0..15 {
            let inst = generate_random(3 + seed as usize % 6, 2 + seed as usize % 8, seed, ProbModel::Uniform).unwrap();
            let e = expected_exact(&inst).unwrap();
            let o = enum_expected(&inst).unwrap();
            assert!((e - o).abs() <= 1e-9 * o.max(1e-4), "seed {seed}: {e} vs {o}");
        }
    }

    #[test]
    fn metric_triangle_and_round_trip() {
        let m = MetricInstance::new(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]], vec![1.0; 3])
            .unwrap();
        for eps in [0.5, 0.01] {
            assert_eq!(expected_approx_metric(&m, eps).unwrap().value, 1.0);
        }
        assert_eq!(parse_metric(&serialize_metric(&m)).unwrap(), m);
        assert!(MetricInstance::new(vec![vec![0.0, 5.0, 1.0], vec![5.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]], vec![0.5; 3]).is_err());
        assert!(MetricInstance::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![0.5; 2]).is_err());
    }

    #[test]
    fn metric_from_tree_instance() {
        let a = instance_a();
        let m = MetricInstance::from_instance(&a).unwrap();
        let r = expected_approx_metric(&m, 0.1).unwrap();
        assert!(r.value <= 3.5 && 3.5 <= 1.1 * r.value);
        assert_eq!(enum_expected_matrix(m.dist(), m.probs()).unwrap(), 3.5);
    }

    #[test]
    fn metric_cap() {
        let n = 21;
        let d = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let m = MetricInstance::new(d, vec![0.5; n]).unwrap();
        assert!(matches!(expected_approx_metric(&m, 0.1), Err(Error::TooLarge(_))));
    }
}
