//! Trapping regions, attracting and repelling sets, basins, and the Conley
//! decomposition of a sampled discrete system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::{chain_recurrent_limit, ChainGraph};
use crate::errfn::ErrorFunction;
use crate::error::{ConleyError, Error, SystemError};
use crate::space::{MetricSample, PointSet};
use crate::systems::{discrete_orbit, orbit, OrbitDir, SampledMap, System, TimeKind};

const UNSET: usize = usize::MAX;

/// Time ladder used by continuous sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Length `H` of the ladder beyond its first time.
    pub horizon: f64,
    pub step: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { horizon: 30.0, step: 0.05 }
    }
}

impl SweepOptions {
    fn rungs(&self) -> Result<usize, SystemError> {
        if !(self.step > 0.0) {
            return Err(SystemError::NonpositivePeriod(self.step));
        }
        Ok((self.horizon / self.step).floor().max(1.0) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapKind {
    /// `closure(Φ(𝕋≥T × 𝒯)) ⊆ interior(𝒯)`.
    Trapping,
    /// `closure(φ(𝒯)) ⊆ interior(𝒯)`; evaluated at time `T` for flows.
    Strong,
    /// `closure(Φ_T(𝒯)) ⊆ interior(𝒯)`.
    TimeT,
}

impl TrapKind {
    pub fn parse(name: &str) -> Option<TrapKind> {
        match name {
            "trapping" => Some(TrapKind::Trapping),
            "strong" => Some(TrapKind::Strong),
            "time-t" | "time-T" => Some(TrapKind::TimeT),
            _ => None,
        }
    }
}

/// A region together with the swept image that certifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrappingRegion {
    pub region: PointSet,
    pub horizon: f64,
    pub kind: TrapKind,
    pub sweep: PointSet,
}

impl TrappingRegion {
    /// Re-evaluates `closure(sweep) ⊆ interior(region)`.
    pub fn recheck(&self, space: &MetricSample) -> bool {
        space.closure(&self.sweep).is_subset(&space.interior(&self.region))
    }
}

/// A sampled image that breaks the inclusion, with the state that produced
/// it and a point of its closure outside the interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refutation {
    pub source: usize,
    pub image: usize,
    pub offender: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrapVerdict {
    Certified(TrappingRegion),
    Refuted(Refutation),
}

impl TrapVerdict {
    pub fn certified(&self) -> Option<&TrappingRegion> {
        match self {
            TrapVerdict::Certified(r) => Some(r),
            TrapVerdict::Refuted(_) => None,
        }
    }
}

fn integer_time(t: f64) -> Result<usize, SystemError> {
    if t < 0.0 {
        return Err(SystemError::NegativeTime(t));
    }
    if t.fract() != 0.0 {
        return Err(SystemError::FractionalTime(t));
    }
    Ok(t as usize)
}

/// Sampled images of `set` at time `t`, paired with their sources.
fn images_at(space: &MetricSample, system: &System, set: &[usize], t: f64) -> Result<Vec<usize>, SystemError> {
    set.par_iter().map(|&i| system.evaluate(space, t, i).map(|im| im.state)).collect()
}

/// Swept image of `region` with, for each image state, the first source that reached it.
fn sweep_sources(
    space: &MetricSample,
    system: &System,
    region: &PointSet,
    kind: TrapKind,
    t: f64,
    opts: &SweepOptions,
) -> Result<Vec<usize>, Error> {
    let n = space.states();
    let mut src = vec![UNSET; n];
    let members = region.to_vec();
    match system.time_kind() {
        TimeKind::Discrete => {
            let map = system.sample(space)?;
            let k = match kind {
                TrapKind::Strong => 1,
                _ => integer_time(t)?,
            };
            let mut frontier = Vec::new();
            for &i in &members {
                let j = map.apply_n(i, k);
                if src[j] == UNSET {
                    src[j] = i;
                    frontier.push(j);
                }
            }
            if kind == TrapKind::Trapping {
                while let Some(j) = frontier.pop() {
                    let next = map.apply(j);
                    if src[next] == UNSET {
                        src[next] = src[j];
                        frontier.push(next);
                    }
                }
            }
        }
        TimeKind::Continuous => {
            if t < 0.0 {
                return Err(SystemError::NegativeTime(t).into());
            }
            let times: Vec<f64> = match kind {
                TrapKind::Trapping => {
                    let r = opts.rungs()?;
                    (0..=r).map(|i| t + i as f64 * opts.step).collect()
                }
                TrapKind::Strong | TrapKind::TimeT => vec![t],
            };
            for &s in &times {
                let imgs = images_at(space, system, &members, s)?;
                for (&i, &j) in members.iter().zip(&imgs) {
                    if src[j] == UNSET {
                        src[j] = i;
                    }
                }
            }
        }
    }
    Ok(src)
}

fn collect(src: &[usize]) -> PointSet {
    PointSet::from_indices(src.len(), (0..src.len()).filter(|&j| src[j] != UNSET))
}

/// `Φ(𝕋≥T × region)` on the sample: the exact forward orbit of `φ^T(region)`
/// for discrete systems, the ladder `T, T+step, …, T+H` for flows.
pub fn forward_sweep(
    space: &MetricSample,
    system: &System,
    region: &PointSet,
    t: f64,
    opts: &SweepOptions,
) -> Result<PointSet, Error> {
    Ok(collect(&sweep_sources(space, system, region, TrapKind::Trapping, t, opts)?))
}

fn conventional_dist(space: &MetricSample, x: usize, set: &PointSet) -> f64 {
    if set.contains(x) {
        return 0.0;
    }
    set.iter().map(|s| space.d(x, s)).fold(f64::INFINITY, f64::min)
}

/// Certifies `region` as a trapping region of the requested kind, or returns
/// the image farthest from its interior.
pub fn is_trapping(
    space: &MetricSample,
    system: &System,
    region: &PointSet,
    t: f64,
    kind: TrapKind,
    opts: &SweepOptions,
) -> Result<TrapVerdict, Error> {
    if region.is_empty() {
        return Err(ConleyError::EmptyRegion.into());
    }
    let src = sweep_sources(space, system, region, kind, t, opts)?;
    let sweep = collect(&src);
    let interior = space.interior(region);
    let mut worst: Option<(f64, usize)> = None;
    for s in sweep.iter() {
        if space.neighborhood(s).iter().all(|&j| interior.contains(j)) {
            continue;
        }
        let d = conventional_dist(space, s, &interior);
        if worst.map_or(true, |(w, _)| d > w) {
            worst = Some((d, s));
        }
    }
    let horizon = if kind == TrapKind::Strong && system.time_kind() == TimeKind::Discrete { 1.0 } else { t };
    Ok(match worst {
        None => TrapVerdict::Certified(TrappingRegion { region: region.clone(), horizon, kind, sweep }),
        Some((_, image)) => {
            let offender = space.neighborhood(image).into_iter().filter(|&j| !interior.contains(j)).min().unwrap();
            TrapVerdict::Refuted(Refutation { source: src[image], image, offender })
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractingSet {
    /// Real states of the set; the outside state is never reported.
    pub set: PointSet,
    /// Sweeps until the result was read off.
    pub iterations: usize,
}

/// Intersection of the closures of `Φ(𝕋≥t × start)` over `t ≥ 0`.
///
/// Discrete systems iterate `S ← φ(S)` from the forward orbit of `start`
/// until it repeats. Flows use the ladder `t_i = i·step`; the answer is the
/// closure of the tail sweep from the middle of the ladder, and the closures
/// from the middle to three quarters must agree.
fn attract(space: &MetricSample, system: &System, start: &PointSet, opts: &SweepOptions) -> Result<AttractingSet, Error> {
    match system.time_kind() {
        TimeKind::Discrete => {
            let map = system.sample(space)?;
            let mut s = discrete_orbit(&map, start, OrbitDir::Forward, space.states() + 1).set;
            let mut iterations = 0;
            loop {
                let next = map.image_set(&s);
                iterations += 1;
                if next == s {
                    break;
                }
                s = next;
            }
            Ok(AttractingSet { set: space.closure(&s).real(space), iterations })
        }
        TimeKind::Continuous => {
            let m = opts.rungs()?;
            let members = start.to_vec();
            let mut last = vec![UNSET; space.states()];
            for i in 0..=m {
                let imgs = images_at(space, system, &members, i as f64 * opts.step)?;
                for j in imgs {
                    last[j] = i;
                }
            }
            let tail = |i: usize| {
                let s = PointSet::from_indices(last.len(), (0..last.len()).filter(|&p| last[p] != UNSET && last[p] >= i));
                space.closure(&s).real(space)
            };
            let mid = m / 2;
            let a = tail(mid);
            for i in mid + 1..=(3 * m) / 4 {
                let b = tail(i);
                if b != a {
                    return Err(ConleyError::NoStabilization { iterations: i, last: b.to_vec(), previous: a.to_vec() }.into());
                }
            }
            Ok(AttractingSet { set: a, iterations: mid })
        }
    }
}

/// The attracting set of a certified region.
pub fn attracting_set(
    space: &MetricSample,
    system: &System,
    region: &TrappingRegion,
    opts: &SweepOptions,
) -> Result<AttractingSet, Error> {
    attract(space, system, &region.region, opts)
}

/// The attracting set of `X ∖ region` under the time-reversed flow.
pub fn repelling_set(
    space: &MetricSample,
    flow: &System,
    region: &TrappingRegion,
    opts: &SweepOptions,
) -> Result<AttractingSet, Error> {
    if !flow.is_flow() {
        return Err(SystemError::Semiflow.into());
    }
    let reversed = flow.reverse_time()?;
    attract(space, &reversed, &region.region.complement(), opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Basin {
    /// Real states whose forward orbit meets the region.
    pub set: PointSet,
    pub stabilized: bool,
}

/// `Orb⁻(region)`: exact preimage closure for discrete systems, the sweep
/// ladder for flows.
pub fn basin(space: &MetricSample, system: &System, region: &PointSet, opts: &SweepOptions) -> Result<Basin, Error> {
    let r = match system.time_kind() {
        TimeKind::Discrete => {
            let map = system.sample(space)?;
            discrete_orbit(&map, region, OrbitDir::Backward, space.states() + 1)
        }
        TimeKind::Continuous => orbit(space, system, region, OrbitDir::Backward, opts.horizon, opts.step)?,
    };
    Ok(Basin { set: r.set.real(space), stabilized: r.stabilized })
}

/// A strong trapping region generated by chains from a seed point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrap {
    pub region: TrappingRegion,
    pub seed: usize,
    /// True when the seed reaches itself, which the construction is meant to exclude.
    pub seed_inside: bool,
}

/// Endpoints of graph chains of length at least `m` starting at `x`,
/// rechecked to be closed under graph successors and sampled images.
pub fn trapping_from_chain(graph: &ChainGraph, x: usize, m: usize) -> Result<ChainTrap, ConleyError> {
    if m == 0 {
        return Err(ConleyError::BadLength);
    }
    let mut layer = PointSet::from_indices(graph.len(), [x]);
    for _ in 0..m {
        layer = graph.step(&layer);
    }
    let region = graph.reach(&layer);
    for v in region.iter() {
        if !region.contains(graph.image(v)) || graph.successors(v).any(|w| !region.contains(w)) {
            return Err(ConleyError::Recheck(v));
        }
    }
    let sweep = PointSet::from_indices(graph.len(), region.iter().map(|v| graph.image(v)));
    let seed_inside = region.contains(x);
    Ok(ChainTrap { region: TrappingRegion { region, horizon: 1.0, kind: TrapKind::Strong, sweep }, seed: x, seed_inside })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub seed: usize,
    pub region: Vec<usize>,
    pub attractor: Vec<usize>,
    pub basin: Vec<usize>,
    /// `ChRec ∩ Orb⁻(𝒯) = A_𝒯` exactly.
    pub lemma_exact: bool,
    /// The same identity up to a one-cell dilation on each side.
    pub lemma_within_cell: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub recurrent: Vec<usize>,
    pub transient: usize,
    pub regions: Vec<RegionReport>,
    /// Transient points not in any `Orb⁻(𝒯) ∖ A_𝒯`.
    pub uncovered: Vec<usize>,
    /// Recurrent points found in some `Orb⁻(𝒯) ∖ A_𝒯`.
    pub recurrent_in_difference: Vec<usize>,
    pub ladder_levels: usize,
    pub ladder_monotone: bool,
}

impl DecompositionReport {
    pub fn coverage(&self) -> f64 {
        if self.transient == 0 {
            1.0
        } else {
            1.0 - self.uncovered.len() as f64 / self.transient as f64
        }
    }

    /// Full coverage, no recurrent point in a difference, and every region satisfying the identity.
    pub fn exact(&self) -> bool {
        self.uncovered.is_empty() && self.recurrent_in_difference.is_empty() && self.regions.iter().all(|r| r.lemma_exact)
    }
}

/// Seeds transient states round-robin across the recurrent component their
/// orbit settles in, deepest first within each group.
fn seed_order(graph: &ChainGraph, map: &SampledMap, transient: &[usize]) -> Vec<usize> {
    let n = graph.len();
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for &x in transient {
        let mut z = x;
        let mut depth = 0;
        while !graph.is_recurrent(z) && depth <= n {
            z = map.apply(z);
            depth += 1;
        }
        let key = graph.component_of(z).unwrap_or(n);
        groups.entry(key).or_default().push((depth, x));
    }
    let mut lists: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            g.into_iter().map(|(_, x)| x).collect()
        })
        .collect();
    let mut order = Vec::with_capacity(transient.len());
    let mut round = 0;
    loop {
        let mut any = false;
        for l in &mut lists {
            if let Some(&x) = l.get(round) {
                order.push(x);
                any = true;
            }
        }
        if !any {
            break;
        }
        round += 1;
    }
    order
}

fn exact_attractor(space: &MetricSample, map: &SampledMap, region: &PointSet) -> PointSet {
    let mut s = region.clone();
    loop {
        let next = map.image_set(&s);
        if next == s {
            break;
        }
        s = next;
    }
    space.closure(&s).real(space)
}

/// Chain recurrence from an ε-ladder plus a certified family of chain
/// generated trapping regions covering the transient states.
pub fn conley_decomposition(
    space: &MetricSample,
    map: &SampledMap,
    eps0: &ErrorFunction,
    levels: usize,
    budget: usize,
) -> Result<DecompositionReport, Error> {
    let ladder = chain_recurrent_limit(space, map, eps0, levels)?;
    let graph = &ladder.graph;
    let rec = ladder.estimate();
    let n = space.len();
    let transient: Vec<usize> = (0..n).filter(|&x| !rec.contains(x)).collect();
    let pre = map.preimages();
    let mut covered = PointSet::empty(space.states());
    let mut bad_rec = PointSet::empty(space.states());
    let mut regions = Vec::new();
    for x in seed_order(graph, map, &transient) {
        if regions.len() >= budget {
            break;
        }
        if covered.contains(x) {
            continue;
        }
        let trap = trapping_from_chain(graph, x, 1)?;
        let region = &trap.region.region;
        // images of a closed region keep it closed, so it is its own forward orbit
        let attractor = exact_attractor(space, map, region);
        let mut basin = region.clone();
        let mut stack = region.to_vec();
        while let Some(v) = stack.pop() {
            for &u in &pre[v] {
                if basin.put(u) {
                    stack.push(u);
                }
            }
        }
        let basin = basin.real(space);
        let diff = basin.difference(&attractor);
        covered.union_with(&diff);
        bad_rec.union_with(&diff.intersection(&rec));
        let lhs = rec.intersection(&basin);
        let lemma_exact = lhs == attractor;
        let lemma_within_cell = attractor.is_subset(&space.closure(&lhs)) && lhs.is_subset(&space.closure(&attractor));
        regions.push(RegionReport {
            seed: x,
            region: region.real(space).to_vec(),
            attractor: attractor.to_vec(),
            basin: basin.to_vec(),
            lemma_exact,
            lemma_within_cell,
        });
    }
    let uncovered = transient.iter().copied().filter(|&x| !covered.contains(x)).collect();
    Ok(DecompositionReport {
        recurrent: rec.to_vec(),
        transient: transient.len(),
        regions,
        uncovered,
        recurrent_in_difference: bad_rec.to_vec(),
        ladder_levels: ladder.levels.len(),
        ladder_monotone: ladder.is_monotone(),
    })
}
