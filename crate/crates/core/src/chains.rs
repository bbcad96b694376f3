//! Chains, chain graphs and chain recurrence on a sampled discrete system.
//!
//! A chain graph has an edge `x → y` exactly when `d(φ(x), y) < ε(φ(x))`, so
//! paths are ε-chains with unit times. Strongly connected components are
//! computed once with an iterative Tarjan pass and cached.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::errfn::{calibrate_pushforward_flow, calibrate_ratio, check_snap_bound, ErrorFunction};
use crate::error::{ChainError, Error, SpaceError, SystemError};
use crate::space::{MetricKind, MetricSample, PointSet};
use crate::systems::{SampledMap, System, TimeKind};

/// A chain through sample points with integer times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleChain {
    pub points: Vec<usize>,
    pub times: Vec<usize>,
}

/// A chain through raw coordinates with real times, for continuous systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowChain {
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

/// Outcome of a chain validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainCheck {
    Pass,
    /// Index of the first link whose jump inequality fails.
    Fail(usize),
}

impl ChainCheck {
    pub fn passed(self) -> bool {
        self == ChainCheck::Pass
    }
}

fn check_structure(points: usize, times: usize) -> Result<(), ChainError> {
    if points == 0 || points != times + 1 {
        return Err(ChainError::Structure { points, times });
    }
    Ok(())
}

/// Checks `d(φ^{t_j}(x_j), x_{j+1}) < ε(φ^{t_j}(x_j))` link by link.
pub fn validate_sample_chain(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    t_min: usize,
    chain: &SampleChain,
) -> Result<ChainCheck, ChainError> {
    check_structure(chain.points.len(), chain.times.len())?;
    if let Some(&bad) = chain.points.iter().find(|&&p| p >= map.len()) {
        return Err(ChainError::BadPoint(bad));
    }
    for (index, &t) in chain.times.iter().enumerate() {
        if t < t_min {
            return Err(ChainError::ShortTime { index, time: t as f64, min: t_min as f64 });
        }
    }
    for j in 0..chain.times.len() {
        let a = map.apply_n(chain.points[j], chain.times[j]);
        if !(space.d(a, chain.points[j + 1]) < eps.get(a)) {
            return Ok(ChainCheck::Fail(j));
        }
    }
    Ok(ChainCheck::Pass)
}

/// Rewrites a variable-time chain as a unit-time chain by inserting the
/// intermediate images as zero-jump links.
pub fn unit_steps(map: &SampledMap, chain: &SampleChain) -> Result<SampleChain, ChainError> {
    check_structure(chain.points.len(), chain.times.len())?;
    let mut points = vec![chain.points[0]];
    for j in 0..chain.times.len() {
        let mut x = chain.points[j];
        for _ in 1..chain.times[j] {
            x = map.apply(x);
            points.push(x);
        }
        points.push(chain.points[j + 1]);
    }
    let times = vec![1; points.len() - 1];
    Ok(SampleChain { points, times })
}

fn flow_metric(space: &MetricSample) -> Result<MetricKind, Error> {
    Ok(space.metric_kind().ok_or(SpaceError::NoCoordinates)?)
}

/// Checks `d(Φ(t_j, x_j), x_{j+1}) < ε(Φ(t_j, x_j))` with ε read at the
/// nearest sample point.
pub fn validate_flow_chain(
    space: &MetricSample,
    flow: &System,
    eps: &ErrorFunction,
    t_min: f64,
    chain: &FlowChain,
) -> Result<ChainCheck, Error> {
    check_structure(chain.points.len(), chain.times.len())?;
    if flow.time_kind() != TimeKind::Continuous {
        return Err(SystemError::NotContinuous.into());
    }
    for (index, &t) in chain.times.iter().enumerate() {
        if !(t >= t_min) {
            return Err(ChainError::ShortTime { index, time: t, min: t_min }.into());
        }
    }
    let metric = flow_metric(space)?;
    for j in 0..chain.times.len() {
        let a = flow.flow(chain.times[j], &chain.points[j])?;
        if a.iter().any(|v| !v.is_finite()) {
            return Ok(ChainCheck::Fail(j));
        }
        if !(metric.eval(&a, &chain.points[j + 1]) < eps.at_coords(space, &a)) {
            return Ok(ChainCheck::Fail(j));
        }
    }
    Ok(ChainCheck::Pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RectifyMethod {
    /// The input already had every time equal to `T₀`.
    Unchanged,
    /// Points read off the concatenated trajectory at multiples of `T₀`.
    Literal,
    /// Points read off at `i·total/N`, absorbing the time remainder.
    Dilated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rectified {
    pub chain: FlowChain,
    /// Number of `T₀` links in the output.
    pub links: usize,
    pub method: RectifyMethod,
    /// Smallest calibrated tolerance the padded input was certified against.
    pub certified_min: f64,
}

/// Splits links with `t ≥ 2T₀` into `⌊t/T₀⌋` equal zero-jump pieces.
fn pad_chain(flow: &System, t0: f64, chain: &FlowChain) -> Result<FlowChain, SystemError> {
    let mut points = vec![chain.points[0].clone()];
    let mut times = Vec::new();
    for j in 0..chain.times.len() {
        let t = chain.times[j];
        let p = if t >= 2.0 * t0 { (t / t0).floor() as usize } else { 1 };
        let piece = t / p as f64;
        for k in 1..p {
            points.push(flow.flow(k as f64 * piece, &chain.points[j])?);
            times.push(piece);
        }
        points.push(chain.points[j + 1].clone());
        times.push(piece);
    }
    Ok(FlowChain { points, times })
}

/// Position on the concatenated chain trajectory at elapsed time `tau`,
/// taking the post-jump point at link boundaries.
fn position(flow: &System, chain: &FlowChain, starts: &[f64], tau: f64) -> Result<Vec<f64>, SystemError> {
    let k = chain.times.len();
    let j = match starts[..k].iter().rposition(|&s| s <= tau) {
        Some(j) => j,
        None => 0,
    };
    flow.flow(tau - starts[j], &chain.points[j])
}

fn resample(
    flow: &System,
    chain: &FlowChain,
    t0: f64,
    taus: &[f64],
) -> Result<FlowChain, SystemError> {
    let mut starts = Vec::with_capacity(chain.times.len() + 1);
    let mut acc = 0.0;
    for &t in &chain.times {
        starts.push(acc);
        acc += t;
    }
    starts.push(acc);
    let n = taus.len();
    let mut points = vec![chain.points[0].clone()];
    for &tau in &taus[1..n - 1] {
        points.push(position(flow, chain, &starts, tau)?);
    }
    points.push(chain.points.last().unwrap().clone());
    Ok(FlowChain { points, times: vec![t0; n - 1] })
}

/// Turns a chain with times in `[T₀, ∞)` into one with every time exactly
/// `T₀`, the same start and the same end.
///
/// The padded input must validate at `ε′ = min(ε/8, δ₂)`, where `δ₂` is the
/// pushforward calibration over `[0, 3T₀]` of `min(ε/4, δ₁/2)` and `δ₁` the
/// ratio calibration of `ε`.
pub fn rectify_chain(
    space: &MetricSample,
    flow: &System,
    eps: &ErrorFunction,
    t0: f64,
    chain: &FlowChain,
) -> Result<Rectified, Error> {
    if flow.time_kind() != TimeKind::Continuous {
        return Err(SystemError::NotContinuous.into());
    }
    if !(t0 > 0.0) {
        return Err(SystemError::NonpositivePeriod(t0).into());
    }
    check_structure(chain.points.len(), chain.times.len())?;
    if chain.times.iter().all(|&t| t == t0) {
        return match validate_flow_chain(space, flow, eps, t0, chain)? {
            ChainCheck::Pass => Ok(Rectified {
                chain: chain.clone(),
                links: chain.times.len(),
                method: RectifyMethod::Unchanged,
                certified_min: eps.min_real(space),
            }),
            ChainCheck::Fail(index) => Err(ChainError::Uncertified { index }.into()),
        };
    }
    for (index, &t) in chain.times.iter().enumerate() {
        if !(t >= t0) {
            return Err(ChainError::ShortTime { index, time: t, min: t0 }.into());
        }
    }
    let padded = pad_chain(flow, t0, chain)?;

    let d1 = calibrate_ratio(space, eps);
    let target = eps.scaled(0.25).min_with(&d1.scaled(0.5));
    let d2 = calibrate_pushforward_flow(space, flow, &target, 3.0 * t0, 60)?;
    let tight = eps.scaled(0.125).min_with(&d2);
    if let ChainCheck::Fail(index) = validate_flow_chain(space, flow, &tight, t0, &padded)? {
        return Err(ChainError::Uncertified { index }.into());
    }

    let total: f64 = padded.times.iter().sum();
    let literal_n = ((total / t0) + 1e-9).floor().max(1.0) as usize;
    let mut taus = vec![0.0; literal_n + 1];
    for j in 1..=literal_n {
        taus[j] = taus[j - 1] + t0;
    }
    let literal = resample(flow, &padded, t0, &taus)?;
    let first_failure = match validate_flow_chain(space, flow, eps, t0, &literal)? {
        ChainCheck::Pass => {
            return Ok(Rectified {
                chain: literal,
                links: literal_n,
                method: RectifyMethod::Literal,
                certified_min: tight.min_real(space),
            })
        }
        ChainCheck::Fail(i) => i,
    };
    let n = (total / t0).round().max(1.0) as usize;
    let taus: Vec<f64> = (0..=n).map(|i| total * i as f64 / n as f64).collect();
    let dilated = resample(flow, &padded, t0, &taus)?;
    match validate_flow_chain(space, flow, eps, t0, &dilated)? {
        ChainCheck::Pass => Ok(Rectified {
            chain: dilated,
            links: n,
            method: RectifyMethod::Dilated,
            certified_min: tight.min_real(space),
        }),
        ChainCheck::Fail(_) => Err(ChainError::Rectification { index: first_failure }.into()),
    }
}

/// A sequence of pairs `(x_j, y_j)` with `x_{j+1} = φ(y_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaChain {
    pub pairs: Vec<(usize, usize)>,
}

/// `Σ d(x_j, y_j) / ε(x_j)`.
pub fn sigma_cost(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    chain: &SigmaChain,
) -> Result<f64, ChainError> {
    for j in 0..chain.pairs.len().saturating_sub(1) {
        if chain.pairs[j + 1].0 != map.apply(chain.pairs[j].1) {
            return Err(ChainError::SigmaStructure(j));
        }
    }
    Ok(chain.pairs.iter().map(|&(x, y)| space.d(x, y) / eps.get(x)).sum())
}

/// Directed ε-chain graph in compressed row form, with its condensation.
#[derive(Debug, Clone)]
pub struct ChainGraph {
    images: Vec<usize>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    comp: Vec<usize>,
    cyclic: Vec<bool>,
    dag: Vec<Vec<usize>>,
    label: Vec<Option<usize>>,
    components: Vec<Vec<usize>>,
    outside: Option<usize>,
}

impl ChainGraph {
    /// Builds the graph of `x → y ⇔ d(φ(x), y) < ε(φ(x))` over all states.
    pub fn build(space: &MetricSample, map: &SampledMap, eps: &ErrorFunction) -> ChainGraph {
        let n = space.states();
        let rows: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|x| {
                let a = map.apply(x);
                let r = eps.get(a);
                (0..n).filter(|&y| y == a || space.d(a, y) < r).map(|y| y as u32).collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for r in &rows {
            offsets.push(offsets.last().unwrap() + r.len());
        }
        let targets: Vec<u32> = rows.into_iter().flatten().collect();
        Self::from_csr(map.images.clone(), offsets, targets, space.outside())
    }

    fn from_csr(images: Vec<usize>, offsets: Vec<usize>, targets: Vec<u32>, outside: Option<usize>) -> ChainGraph {
        let n = images.len();
        let (comp, count) = tarjan(n, &offsets, &targets);
        let mut size = vec![0usize; count];
        let mut cyclic = vec![false; count];
        for v in 0..n {
            size[comp[v]] += 1;
        }
        for v in 0..n {
            if targets[offsets[v]..offsets[v + 1]].iter().any(|&w| w as usize == v) {
                cyclic[comp[v]] = true;
            }
        }
        for c in 0..count {
            cyclic[c] |= size[c] >= 2;
        }
        let mut dag = vec![Vec::new(); count];
        for v in 0..n {
            for &w in &targets[offsets[v]..offsets[v + 1]] {
                let (a, b) = (comp[v], comp[w as usize]);
                if a != b {
                    dag[a].push(b);
                }
            }
        }
        for row in &mut dag {
            row.sort_unstable();
            row.dedup();
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
        for v in 0..n {
            if Some(v) != outside && cyclic[comp[v]] {
                members[comp[v]].push(v);
            }
        }
        let mut components: Vec<(usize, Vec<usize>)> =
            members.into_iter().enumerate().filter(|(_, m)| !m.is_empty()).collect();
        components.sort_by_key(|(_, m)| m[0]);
        let mut by_comp = vec![None; count];
        for (l, (c, _)) in components.iter().enumerate() {
            by_comp[*c] = Some(l);
        }
        let label = (0..n).map(|v| if Some(v) == outside { None } else { by_comp[comp[v]] }).collect();
        ChainGraph {
            images,
            offsets,
            targets,
            comp,
            cyclic,
            dag,
            label,
            components: components.into_iter().map(|(_, m)| m).collect(),
            outside,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// The sampled image `φ(x)` the graph was built from.
    pub fn image(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn successors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.targets[self.offsets[x]..self.offsets[x + 1]].iter().map(|&w| w as usize)
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.targets[self.offsets[x]..self.offsets[x + 1]].binary_search(&(y as u32)).is_ok()
    }

    /// Strongly connected component id; ids follow a reverse topological order.
    pub fn scc(&self, x: usize) -> usize {
        self.comp[x]
    }

    pub fn scc_count(&self) -> usize {
        self.cyclic.len()
    }

    /// Successor components in the condensation.
    pub fn scc_successors(&self, c: usize) -> &[usize] {
        &self.dag[c]
    }

    /// Whether the condensation is acyclic; true by construction and kept as a checkable claim.
    pub fn condensation_is_dag(&self) -> bool {
        self.dag.iter().enumerate().all(|(a, row)| row.iter().all(|&b| b < a))
    }

    pub fn is_recurrent(&self, x: usize) -> bool {
        Some(x) != self.outside && self.cyclic[self.comp[x]]
    }

    /// Chain component label of a recurrent point; labels are ordered by smallest member.
    pub fn component_of(&self, x: usize) -> Option<usize> {
        self.label[x]
    }

    /// Recurrent components, each sorted, ordered by smallest member.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Nodes reachable from `from` by paths of length zero or more.
    pub fn reach(&self, from: &PointSet) -> PointSet {
        let mut seen = from.clone();
        let mut stack: Vec<usize> = from.iter().collect();
        while let Some(v) = stack.pop() {
            for w in self.successors(v) {
                if seen.put(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Nodes at the end of some path of length exactly one from `from`.
    pub fn step(&self, from: &PointSet) -> PointSet {
        let mut out = PointSet::empty(self.len());
        for v in from.iter() {
            for w in self.successors(v) {
                out.insert(w);
            }
        }
        out
    }

    /// Whether label `b` is reachable from label `a` through the graph.
    pub fn component_reaches(&self, a: usize, b: usize) -> bool {
        let start = self.comp[self.components[a][0]];
        let goal = self.comp[self.components[b][0]];
        let mut seen = vec![false; self.scc_count()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(c) = stack.pop() {
            if c == goal {
                return true;
            }
            for &d in &self.dag[c] {
                if !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
        false
    }
}

/// Iterative Tarjan; roots are taken in index order and successors in row order.
fn tarjan(n: usize, offsets: &[usize], targets: &[u32]) -> (Vec<usize>, usize) {
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0;
    let mut count = 0;
    for s in 0..n {
        if index[s] != UNSET {
            continue;
        }
        index[s] = counter;
        low[s] = counter;
        counter += 1;
        stack.push(s);
        on_stack[s] = true;
        call.push((s, offsets[s]));
        while let Some(top) = call.last_mut() {
            let v = top.0;
            if top.1 < offsets[v + 1] {
                let w = targets[top.1] as usize;
                top.1 += 1;
                if index[w] == UNSET {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, offsets[w]));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    (comp, count)
}

pub fn build_chain_graph(space: &MetricSample, map: &SampledMap, eps: &ErrorFunction) -> ChainGraph {
    ChainGraph::build(space, map, eps)
}

/// Points on a directed cycle of the graph.
pub fn chain_recurrent_set(graph: &ChainGraph) -> PointSet {
    PointSet::from_indices(graph.len(), (0..graph.len()).filter(|&x| graph.is_recurrent(x)))
}

/// The partition of the chain recurrent set into chain components.
pub fn chain_components(graph: &ChainGraph) -> Vec<Vec<usize>> {
    graph.components().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    /// Multiplier applied to `ε₀` at this level.
    pub scale: f64,
    pub recurrent: Vec<usize>,
    pub components: usize,
    /// Points recurrent here but not at the previous, coarser level.
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ChainLadder {
    pub levels: Vec<LadderLevel>,
    /// Graph at the finest level.
    pub graph: ChainGraph,
    /// Tolerance at the finest level.
    pub floor: ErrorFunction,
}

impl ChainLadder {
    /// The chain recurrent set at the finest level.
    pub fn estimate(&self) -> PointSet {
        chain_recurrent_set(&self.graph)
    }

    pub fn is_monotone(&self) -> bool {
        self.levels.iter().all(|l| l.violations.is_empty())
    }
}

/// Chain recurrent sets at `ε₀, ε₀/2, …, ε₀/2^(levels−1)`.
pub fn chain_recurrent_limit(
    space: &MetricSample,
    map: &SampledMap,
    eps0: &ErrorFunction,
    levels: usize,
) -> Result<ChainLadder, ChainError> {
    if levels == 0 {
        return Err(ChainError::NoLevels);
    }
    let floor_scale = 0.5f64.powi(levels as i32 - 1);
    let floor = eps0.scaled(floor_scale);
    if check_snap_bound(space, &floor, map.snap).is_err() {
        return Err(ChainError::FloorBelowSnap {
            floor: floor.min_real(space),
            bound: crate::errfn::snap_bound(space, map.snap),
        });
    }
    let mut out = Vec::with_capacity(levels);
    let mut previous: Option<PointSet> = None;
    let mut graph = None;
    for k in 0..levels {
        let scale = 0.5f64.powi(k as i32);
        let g = ChainGraph::build(space, map, &eps0.scaled(scale));
        let rec = chain_recurrent_set(&g);
        let violations = match &previous {
            Some(p) => rec.difference(p).to_vec(),
            None => Vec::new(),
        };
        out.push(LadderLevel { scale, recurrent: rec.to_vec(), components: g.components().len(), violations });
        previous = Some(rec);
        graph = Some(g);
    }
    Ok(ChainLadder { levels: out, graph: graph.unwrap(), floor })
}

/// The largest ladder depth whose floor respects the snap bound; for
/// spaces without a resolution the floor also drops below half the minimum
/// separation so that only zero jumps survive. Capped at 60.
pub fn auto_levels(space: &MetricSample, eps0: &ErrorFunction, snap: f64) -> usize {
    let bound = crate::errfn::snap_bound(space, snap) * (1.0 + 1e-12);
    let mut levels = 1;
    let m = eps0.min_real(space);
    while levels < 60 {
        let next = m * 0.5f64.powi(levels as i32);
        if space.h() > 0.0 {
            if next < bound {
                break;
            }
        } else if m * 0.5f64.powi(levels as i32 - 1) < 0.5 * space.min_separation() {
            break;
        }
        levels += 1;
    }
    levels
}

/// Points `x` whose sampled ε-ball `U` meets `φ^t(U)` for some `1 ≤ t ≤ horizon`.
pub fn nonwandering_set(space: &MetricSample, map: &SampledMap, eps: &ErrorFunction, horizon: usize) -> PointSet {
    let n = space.states();
    let flags: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|x| {
            if space.is_outside(x) {
                return false;
            }
            let r = eps.get(x);
            space.ball(x, r).into_iter().any(|y| {
                let mut z = y;
                (0..horizon).any(|_| {
                    z = map.apply(z);
                    space.d(x, z) < r
                })
            })
        })
        .collect();
    PointSet::from_indices(n, (0..n).filter(|&x| flags[x]))
}
