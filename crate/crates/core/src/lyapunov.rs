//! Lyapunov synthesis: effort fields, region Lyapunov functions, a global
//! complete Lyapunov function for sampled maps, and its integral lift to flows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xsum::{Xsum, XsumSmall};

use crate::chains::{auto_levels, ChainGraph};
use crate::conley::trapping_from_chain;
use crate::errfn::{snap_bound, trap_tolerance, ErrorFunction};
use crate::error::{Error, LyapunovError, SystemError};
use crate::space::{MetricSample, PointSet};
use crate::systems::{SampledMap, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Effort,
    Averaged,
    RegionEnergy,
    RegionLyapunov,
    Global,
    FlowLift,
}

impl FieldKind {
    /// Whether values are confined to `[0, 1]`.
    pub fn unit_range(self) -> bool {
        !matches!(self, FieldKind::Effort | FieldKind::Averaged)
    }
}

/// One real value per sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

impl ScalarField {
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Range tag respected and every value finite.
    pub fn well_formed(&self) -> bool {
        self.values.iter().all(|v| v.is_finite() && *v >= 0.0 && (!self.kind.unit_range() || *v <= 1.0))
    }
}

fn plain(space: &MetricSample) -> Result<(), LyapunovError> {
    if space.outside().is_some() {
        return Err(LyapunovError::Outside);
    }
    Ok(())
}

fn exact_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = XsumSmall::new();
    for v in values {
        acc.add(v);
    }
    acc.sum()
}

/// Minimal σchain cost from `c` to every point, by a dense Dijkstra pass over
/// the states a chain can occupy.
pub fn effort_field(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    c: &PointSet,
) -> Result<ScalarField, LyapunovError> {
    plain(space)?;
    if c.is_empty() {
        return Err(LyapunovError::EmptySource);
    }
    let n = space.len();
    let mut dist = vec![f64::INFINITY; n];
    for s in c.iter() {
        dist[s] = 0.0;
    }
    let mut done = vec![false; n];
    loop {
        let mut best = None;
        for z in 0..n {
            if !done[z] && dist[z].is_finite() && best.map_or(true, |b: usize| dist[z] < dist[b]) {
                best = Some(z);
            }
        }
        let Some(z) = best else { break };
        done[z] = true;
        let (base, e) = (dist[z], eps.get(z));
        for y in 0..n {
            let cand = base + space.d(z, y) / e;
            let t = map.apply(y);
            if cand < dist[t] {
                dist[t] = cand;
            }
        }
    }
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            (0..n)
                .filter(|&z| dist[z].is_finite())
                .map(|z| dist[z] + space.d(z, x) / eps.get(z))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(ScalarField { values, kind: FieldKind::Effort })
}

/// Effort under `φ^k` from the closure of `φ^k(region)`.
pub fn effort_k(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    region: &PointSet,
    k: usize,
) -> Result<ScalarField, LyapunovError> {
    if k == 0 {
        return Err(LyapunovError::Budget("k"));
    }
    let pk = map.power(k);
    let c = space.closure(&pk.image_set(region));
    effort_field(space, &pk, eps, &c)
}

fn average_along(map: &SampledMap, e: &[f64], k: usize) -> Vec<f64> {
    (0..e.len())
        .map(|x| {
            let mut z = x;
            let s = exact_sum((0..k).map(|_| {
                let v = e[z];
                z = map.apply(z);
                v
            }));
            s / k as f64
        })
        .collect()
}

/// `(1/k) Σ_{j<k} E_k(φ^j x)`, summed exactly so that it cannot increase along φ.
pub fn averaged_effort(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    region: &PointSet,
    k: usize,
) -> Result<ScalarField, LyapunovError> {
    let e = effort_k(space, map, eps, region, k)?;
    Ok(ScalarField { values: average_along(map, &e.values, k), kind: FieldKind::Averaged })
}

/// `Σ_{k=1}^{K} min(Ē_k, 1) / 2^k`.
pub fn region_energy(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    region: &PointSet,
    k_max: usize,
) -> Result<ScalarField, LyapunovError> {
    if k_max == 0 {
        return Err(LyapunovError::Budget("K_max"));
    }
    let terms: Vec<Vec<f64>> = (1..=k_max)
        .into_par_iter()
        .map(|k| averaged_effort(space, map, eps, region, k).map(|f| f.values))
        .collect::<Result<_, _>>()?;
    let n = space.len();
    let mut values = vec![0.0; n];
    for (k, t) in terms.iter().enumerate() {
        let w = 0.5f64.powi(k as i32 + 1);
        for x in 0..n {
            values[x] += t[x].min(1.0) * w;
        }
    }
    Ok(ScalarField { values, kind: FieldKind::RegionEnergy })
}

/// `½ Σ_{j<J} E_𝒯(φ^j x) / 2^j`, with values in `[0, 1]`.
pub fn region_lyapunov(
    space: &MetricSample,
    map: &SampledMap,
    eps: &ErrorFunction,
    region: &PointSet,
    k_max: usize,
    j_max: usize,
) -> Result<ScalarField, LyapunovError> {
    if j_max == 0 {
        return Err(LyapunovError::Budget("J_max"));
    }
    let e = region_energy(space, map, eps, region, k_max)?;
    Ok(ScalarField { values: lift_orbit(map, &e.values, j_max), kind: FieldKind::RegionLyapunov })
}

fn lift_orbit(map: &SampledMap, e: &[f64], j_max: usize) -> Vec<f64> {
    (0..e.len())
        .map(|x| {
            let mut z = x;
            let mut acc = 0.0;
            for j in 0..j_max {
                acc += e[z] * 0.5f64.powi(j as i32 + 1);
                z = map.apply(z);
            }
            acc
        })
        .collect()
}

/// Tolerance on the zero and one sets of a truncated region Lyapunov function.
pub fn truncation_tolerance(k_max: usize, j_max: usize) -> f64 {
    0.5f64.powi(k_max.min(j_max) as i32 - 2)
}

/// Trap-derived tolerance for a strong region followed by its Lyapunov function.
pub fn strong_region_lyapunov(
    space: &MetricSample,
    map: &SampledMap,
    region: &PointSet,
    k_max: usize,
    j_max: usize,
) -> Result<ScalarField, Error> {
    let tol = trap_tolerance(space, region, &map.image_set(region))?;
    Ok(region_lyapunov(space, map, &tol.eps, region, k_max, j_max)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalOptions {
    /// Size of the seed subsample `D`; every `⌈n/seeds⌉`-th point is used.
    pub seeds: usize,
    /// Number of tolerances in the ladder `ε₀/2^m`; chosen from the space when `None`.
    pub levels: Option<usize>,
    pub k_max: usize,
    pub j_max: usize,
    pub region_cap: usize,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions { seeds: usize::MAX, levels: None, k_max: 20, j_max: 20, region_cap: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub seed: usize,
    /// Constant chain tolerance the region was generated at.
    pub eps: f64,
    pub region: Vec<usize>,
    pub attractor: Vec<usize>,
    pub field: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFamily {
    pub regions: Vec<RegionEntry>,
    /// The tolerance ladder, finest first.
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub label: usize,
    pub members: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct GlobalLyapunov {
    pub field: ScalarField,
    pub family: RegionFamily,
    pub components: Vec<ComponentRow>,
    pub recurrent: PointSet,
    /// Chain graph at the finest tolerance, used for the ordering checks.
    pub graph: ChainGraph,
    /// Transient points left without a strict decrease when the cap was hit.
    pub unresolved: Vec<usize>,
    /// Component label pairs left with equal values.
    pub unseparated: Vec<(usize, usize)>,
    pub k_max: usize,
    pub j_max: usize,
}

/// Smallest per-region gap, after ternary weighting, that counts as a strict decrease.
const STRICT_GAP: f64 = 1e-14;

fn ternary_weight(r: usize) -> f64 {
    2.0 / 3f64.powi(r as i32)
}

fn orbit_depth(graph: &ChainGraph, map: &SampledMap, x: usize) -> usize {
    let mut z = x;
    let mut depth = 0;
    while !graph.is_recurrent(z) && depth <= map.len() {
        z = map.apply(z);
        depth += 1;
    }
    depth
}

fn attractor_of(space: &MetricSample, map: &SampledMap, region: &PointSet) -> PointSet {
    let mut s = region.clone();
    loop {
        let next = map.image_set(&s);
        if next == s {
            return space.closure(&s);
        }
        s = next;
    }
}

fn basin_of(map: &SampledMap, pre: &[Vec<usize>], region: &PointSet) -> PointSet {
    let mut b = region.clone();
    let mut stack = region.to_vec();
    while let Some(v) = stack.pop() {
        for &u in &pre[v] {
            if b.put(u) {
                stack.push(u);
            }
        }
    }
    debug_assert!(b.universe() == map.len());
    b
}

/// Greedy complete Lyapunov function `L = Σ_r 2 L_r / 3^r`.
///
/// Candidate regions are chain-generated from seeds at every ladder
/// tolerance, finest first. A candidate is kept only if its field gives a
/// strict decrease at a transient point still lacking one, or separates two
/// chain components that still share a value.
pub fn global_lyapunov(space: &MetricSample, map: &SampledMap, opts: &GlobalOptions) -> Result<GlobalLyapunov, Error> {
    plain(space)?;
    for (name, v) in [("seed budget", opts.seeds), ("K_max", opts.k_max), ("J_max", opts.j_max), ("region cap", opts.region_cap)] {
        if v == 0 {
            return Err(LyapunovError::Budget(name).into());
        }
    }
    let n = space.len();
    let eps0 = space.diameter() / 4.0;
    let eps0 = if eps0 > 0.0 { eps0 } else { 1.0 };
    let base = ErrorFunction::constant(space, eps0);
    let levels = opts.levels.unwrap_or_else(|| auto_levels(space, &base, map.snap)).max(1);
    let bound = snap_bound(space, map.snap) * (1.0 - 1e-12);
    let ladder: Vec<f64> = (0..levels)
        .rev()
        .map(|m| eps0 * 0.5f64.powi(m as i32))
        .filter(|&e| e >= bound)
        .collect();
    if ladder.is_empty() {
        return Err(crate::error::ChainError::FloorBelowSnap { floor: eps0, bound }.into());
    }
    let graphs: Vec<ChainGraph> = ladder
        .iter()
        .map(|&e| ChainGraph::build(space, map, &ErrorFunction::constant(space, e)))
        .collect();
    let graph = graphs[0].clone();
    let recurrent = PointSet::from_indices(n, (0..n).filter(|&x| graph.is_recurrent(x)));
    let comps = graph.components().to_vec();
    let pre = map.preimages();

    let mut strict = vec![false; n];
    for x in 0..n {
        if recurrent.contains(x) {
            strict[x] = true;
        }
    }
    let mut separated = vec![vec![false; comps.len()]; comps.len()];
    for (a, row) in separated.iter_mut().enumerate() {
        row[a] = true;
    }
    let stride = n.div_ceil(opts.seeds.min(n).max(1));
    let d: Vec<usize> = (0..n).step_by(stride).collect();

    let mut regions: Vec<RegionEntry> = Vec::new();
    let mut seen: Vec<PointSet> = Vec::new();
    let mut total = vec![0.0; n];
    loop {
        let all_done = strict.iter().all(|&s| s) && separated.iter().all(|r| r.iter().all(|&s| s));
        if all_done || regions.len() >= opts.region_cap {
            break;
        }
        let mut order: Vec<(usize, usize)> = d
            .iter()
            .filter(|&&x| !strict[x])
            .map(|&x| (orbit_depth(&graph, map, x), x))
            .collect();
        order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut seeds: Vec<usize> = order.into_iter().map(|(_, x)| x).collect();
        for (a, row) in separated.iter().enumerate() {
            if row.iter().any(|&s| !s) {
                seeds.extend(d.iter().copied().filter(|&x| graph.component_of(x) == Some(a)));
            }
        }
        seeds.extend(d.iter().copied());
        let mut accepted = false;
        'seeds: for &s in &seeds {
            for g in &graphs {
                let Ok(trap) = trapping_from_chain(g, s, 2) else { continue };
                let region = trap.region.region;
                if region.is_empty() || seen.contains(&region) {
                    continue;
                }
                let attractor = attractor_of(space, map, &region);
                let basin = basin_of(map, &pre, &region);
                let covers = (0..n).any(|x| !strict[x] && basin.contains(x) && !attractor.contains(x));
                let splits = (0..comps.len()).any(|a| {
                    (0..comps.len()).any(|b| {
                        !separated[a][b]
                            && comps[a].iter().all(|&c| attractor.contains(c))
                            && comps[b].iter().all(|&c| !basin.contains(c))
                    })
                });
                if !covers && !splits {
                    continue;
                }
                let Ok(field) = strong_region_lyapunov(space, map, &region, opts.k_max, opts.j_max) else { continue };
                let r = regions.len() + 1;
                let w = ternary_weight(r);
                let mut gain = false;
                for x in 0..n {
                    if !strict[x] && (field.values[x] - field.values[map.apply(x)]) * w > STRICT_GAP {
                        strict[x] = true;
                        gain = true;
                    }
                }
                for a in 0..comps.len() {
                    for b in 0..comps.len() {
                        if !separated[a][b] && (field.values[comps[a][0]] - field.values[comps[b][0]]).abs() > 0.5 {
                            separated[a][b] = true;
                            separated[b][a] = true;
                            gain = true;
                        }
                    }
                }
                if !gain {
                    continue;
                }
                for x in 0..n {
                    total[x] += w * field.values[x];
                }
                seen.push(region.clone());
                regions.push(RegionEntry {
                    seed: s,
                    eps: ladder[graphs.iter().position(|h| std::ptr::eq(h, g)).unwrap()],
                    region: region.to_vec(),
                    attractor: attractor.to_vec(),
                    field: field.values,
                });
                accepted = true;
                break 'seeds;
            }
        }
        if !accepted {
            break;
        }
    }
    let components = comps
        .iter()
        .enumerate()
        .map(|(label, m)| ComponentRow { label, members: m.clone(), value: total[m[0]] })
        .collect();
    let unresolved = (0..n).filter(|&x| !strict[x]).collect();
    let mut unseparated = Vec::new();
    for a in 0..comps.len() {
        for b in a + 1..comps.len() {
            if !separated[a][b] {
                unseparated.push((a, b));
            }
        }
    }
    Ok(GlobalLyapunov {
        field: ScalarField { values: total, kind: FieldKind::Global },
        family: RegionFamily { regions, ladder },
        components,
        recurrent,
        graph,
        unresolved,
        unseparated,
        k_max: opts.k_max,
        j_max: opts.j_max,
    })
}

/// Pass/fail per property of a complete Lyapunov function, with witnesses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Points with `L(φ(x)) > L(x)`.
    pub monotone: Vec<usize>,
    /// Transient points with `L(φ(x)) = L(x)`.
    pub strict: Vec<usize>,
    /// Component labels whose members disagree.
    pub constant: Vec<usize>,
    /// Label pairs sharing a value.
    pub injective: Vec<(usize, usize)>,
    /// Label pairs `(a, b)` with a chain path `a → b` but `L(a) ≤ L(b)`.
    pub order: Vec<(usize, usize)>,
    /// Recurrent points with a region value away from both 0 and 1.
    pub ternary: Vec<usize>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.monotone.is_empty()
            && self.strict.is_empty()
            && self.constant.is_empty()
            && self.injective.is_empty()
            && self.order.is_empty()
            && self.ternary.is_empty()
    }

    /// One `(name, pass)` pair per property.
    pub fn summary(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("monotone", self.monotone.is_empty()),
            ("strict-off-chrec", self.strict.is_empty()),
            ("constant-per-component", self.constant.is_empty()),
            ("injective-across-components", self.injective.is_empty()),
            ("dag-order", self.order.is_empty()),
            ("ternary-digits", self.ternary.is_empty()),
        ]
    }
}

/// Checks a field on samples against the chain structure of `graph`:
/// monotonicity, strict decrease off the recurrent set, constancy and
/// injectivity on components, and ordering along condensation paths.
pub fn verify_field(map: &SampledMap, graph: &ChainGraph, values: &[f64]) -> Verification {
    let l = values;
    let n = l.len().min(map.len());
    let mut v = Verification::default();
    for x in 0..n {
        let y = map.apply(x);
        if y >= n {
            continue;
        }
        if l[y] > l[x] {
            v.monotone.push(x);
        }
        if !graph.is_recurrent(x) && !(l[y] < l[x]) {
            v.strict.push(x);
        }
    }
    let comps = graph.components();
    let value = |c: &[usize]| l[c[0]];
    for (label, c) in comps.iter().enumerate() {
        if c.iter().any(|&m| l[m] != value(c)) {
            v.constant.push(label);
        }
    }
    for a in 0..comps.len() {
        for b in 0..comps.len() {
            if a == b {
                continue;
            }
            if a < b && value(&comps[a]) == value(&comps[b]) {
                v.injective.push((a, b));
            }
            if graph.component_reaches(a, b) && !(value(&comps[a]) > value(&comps[b])) {
                v.order.push((a, b));
            }
        }
    }
    v
}

/// Runs every check of the verification bundle against a global result,
/// including the ternary digit pattern on the recurrent set.
pub fn verify_global(map: &SampledMap, g: &GlobalLyapunov) -> Verification {
    let l = &g.field.values;
    let mut v = verify_field(map, &g.graph, l);
    let tol = truncation_tolerance(g.k_max, g.j_max);
    for x in g.recurrent.iter() {
        let mut digits = 0.0;
        let mut ok = true;
        for (r, reg) in g.family.regions.iter().enumerate() {
            let value = reg.field[x];
            let digit = if value <= tol {
                0.0
            } else if value >= 1.0 - tol {
                1.0
            } else {
                ok = false;
                break;
            };
            digits += ternary_weight(r + 1) * digit;
        }
        if !ok || (digits - l[x]).abs() > tol {
            v.ternary.push(x);
        }
    }
    v
}

/// How a field on samples is read at raw coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Value at the nearest sample point.
    Nearest,
    /// Multilinear interpolation between grid cell centers, clamped at the faces.
    #[default]
    Linear,
}

/// Reads a sample field at arbitrary coordinates.
pub fn extend(space: &MetricSample, values: &[f64], ext: Extension, x: &[f64]) -> Result<f64, Error> {
    if ext == Extension::Linear {
        if let Some(g) = space.grid_info() {
            let dim = g.dim();
            let mut base = vec![0usize; dim];
            let mut frac = vec![0.0; dim];
            for a in 0..dim {
                let u = ((x[a] - g.lo[a]) / g.width[a] - 0.5).clamp(0.0, (g.cells[a] - 1) as f64);
                let i = (u.floor() as usize).min(g.cells[a].saturating_sub(2));
                base[a] = i;
                frac[a] = if g.cells[a] > 1 { u - i as f64 } else { 0.0 };
            }
            let mut acc = 0.0;
            for corner in 0..(1usize << dim) {
                let mut w = 1.0;
                let mut idx = base.clone();
                for a in 0..dim {
                    if corner >> a & 1 == 1 {
                        if g.cells[a] == 1 {
                            w = 0.0;
                        } else {
                            idx[a] += 1;
                            w *= frac[a];
                        }
                    } else {
                        w *= 1.0 - frac[a];
                    }
                }
                if w != 0.0 {
                    acc += w * values[g.index_of(&idx)];
                }
            }
            return Ok(acc);
        }
    }
    let s = space.nearest(x)?;
    Ok(values[s.index])
}

/// `L(x) = ∫₀¹ ℓ(Φ(s, x)) ds` by composite Simpson.
#[derive(Debug, Clone)]
pub struct FlowLift<'a> {
    space: &'a MetricSample,
    flow: &'a System,
    ell: &'a [f64],
    nodes: usize,
    ext: Extension,
}

impl<'a> FlowLift<'a> {
    /// Value at raw coordinates.
    pub fn eval(&self, x: &[f64]) -> Result<f64, Error> {
        let m = self.nodes;
        let h = 1.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let y = self.flow.flow(i as f64 * h, x)?;
            acc += w * extend(self.space, self.ell, self.ext, &y)?;
        }
        Ok(acc * h / 3.0)
    }

    /// `L(Φ(t, x))`.
    pub fn along(&self, t: f64, x: &[f64]) -> Result<f64, Error> {
        self.eval(&self.flow.flow(t, x)?)
    }

    /// Values at every sample point.
    pub fn field(&self) -> Result<ScalarField, Error> {
        let values = (0..self.space.len())
            .into_par_iter()
            .map(|i| self.eval(self.space.coords(i)))
            .collect::<Result<Vec<f64>, Error>>()?;
        Ok(ScalarField { values, kind: FieldKind::FlowLift })
    }
}

/// Lifts a sample field `ℓ` for the time-one map to the flow.
pub fn flow_lyapunov<'a>(
    space: &'a MetricSample,
    flow: &'a System,
    ell: &'a ScalarField,
    nodes: usize,
    ext: Extension,
) -> Result<FlowLift<'a>, Error> {
    if nodes < 8 {
        return Err(LyapunovError::Nodes(nodes).into());
    }
    if flow.time_kind() != crate::systems::TimeKind::Continuous {
        return Err(SystemError::NotContinuous.into());
    }
    if ell.len() < space.len() {
        return Err(LyapunovError::Length { got: ell.len(), expected: space.len() }.into());
    }
    let nodes = nodes + nodes % 2;
    Ok(FlowLift { space, flow, ell: &ell.values, nodes, ext })
}

/// Witnesses from sampling a lifted field along trajectories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LiftCheck {
    /// `(start, t)` with `L(Φ(t + Δt, x)) > L(Φ(t, x))`.
    pub increases: Vec<(usize, f64)>,
    /// `(start, t)` with no strict decrease while still above the terminal value plus tolerance.
    pub flats: Vec<(usize, f64)>,
    /// Stationary sample points where `|L − ℓ|` exceeds the tolerance.
    pub fixed: Vec<usize>,
}

impl LiftCheck {
    pub fn passed(&self) -> bool {
        self.increases.is_empty() && self.flats.is_empty() && self.fixed.is_empty()
    }
}

impl FlowLift<'_> {
    /// Samples `t ↦ L(Φ(t, x))` at `0, Δt, …, t_end` from every start, and
    /// compares `L` with `ℓ` at sample points that the flow leaves fixed.
    ///
    /// A step may fail to decrease only once the trajectory is within `tol`
    /// of its terminal value.
    pub fn check(&self, starts: &[Vec<f64>], dt: f64, t_end: f64, tol: f64) -> Result<LiftCheck, Error> {
        if !(dt > 0.0) {
            return Err(SystemError::NonpositivePeriod(dt).into());
        }
        let steps = (t_end / dt).round().max(1.0) as usize;
        let rows = starts
            .par_iter()
            .map(|x| (0..=steps).map(|i| self.along(i as f64 * dt, x)).collect::<Result<Vec<f64>, Error>>())
            .collect::<Result<Vec<_>, Error>>()?;
        let mut out = LiftCheck::default();
        for (s, v) in rows.iter().enumerate() {
            let terminal = v[steps];
            for i in 0..steps {
                let t = i as f64 * dt;
                if v[i + 1] > v[i] {
                    out.increases.push((s, t));
                } else if !(v[i + 1] < v[i]) && v[i] > terminal + tol {
                    out.flats.push((s, t));
                }
            }
        }
        for i in 0..self.space.len() {
            let x = self.space.coords(i);
            let y = self.flow.flow(1.0, x)?;
            if self.space.d_coords(x, &y)? <= 1e-12 && (self.eval(x)? - self.ell[i]).abs() > tol {
                out.fixed.push(i);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{GridSpec, MetricKind};
    use crate::systems::Builtin;

    fn points(n: usize) -> MetricSample {
        let p: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        MetricSample::from_points(&p, MetricKind::Euclidean).unwrap()
    }

    /// Cheapest σchain from `c` ending at each point, over chains of at most `len` pairs.
    fn brute_effort(s: &MetricSample, map: &SampledMap, eps: &ErrorFunction, c: &[usize], len: usize) -> Vec<f64> {
        let n = s.len();
        let mut best = vec![f64::INFINITY; n];
        fn walk(
            s: &MetricSample,
            map: &SampledMap,
            eps: &ErrorFunction,
            x: usize,
            cost: f64,
            left: usize,
            best: &mut [f64],
        ) {
            for y in 0..s.len() {
                let c = cost + s.d(x, y) / eps.get(x);
                best[y] = best[y].min(c);
                if left > 1 {
                    walk(s, map, eps, map.apply(y), c, left - 1, best);
                }
            }
        }
        for &x in c {
            walk(s, map, eps, x, 0.0, len, &mut best);
        }
        best
    }

    #[test]
    fn effort_examples() {
        let two = MetricSample::finite(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let id = SampledMap::from_table(vec![0, 1]);
        let e = ErrorFunction::constant(&two, 0.5);
        let f = effort_field(&two, &id, &e, &PointSet::from_indices(2, [0])).unwrap();
        assert_eq!(f.values, vec![0.0, 2.0]);
        assert!(matches!(effort_field(&two, &id, &e, &PointSet::empty(2)), Err(LyapunovError::EmptySource)));

        let s = points(5);
        let map = SampledMap::from_table(vec![1, 2, 0, 4, 3]);
        let e = ErrorFunction::constant(&s, 1.0);
        let c = PointSet::from_indices(5, [4]);
        let f = effort_field(&s, &map, &e, &c).unwrap();
        let b = brute_effort(&s, &map, &e, &[4], 6);
        for x in 0..5 {
            assert!((f.get(x) - b[x]).abs() < 1e-12, "{x}: {} vs {}", f.get(x), b[x]);
            assert!(f.get(map.apply(x)) <= f.get(x));
        }
    }

    fn double_well() -> (MetricSample, SampledMap) {
        let n = 41;
        let table = (0..n)
            .map(|i| match i {
                0..=9 => i + 1,
                10 => 10,
                11..=19 => i - 1,
                20 => 20,
                21..=29 => i + 1,
                30 => 30,
                _ => i - 1,
            })
            .collect();
        (points(n), SampledMap::from_table(table))
    }

    #[test]
    fn effort_k_and_average_properties() {
        let (s, map) = double_well();
        let region = PointSet::from_indices(41, 0..=15);
        let tol = trap_tolerance(&s, &region, &map.image_set(&region)).unwrap().eps;
        for k in [1, 2, 3, 5] {
            let e = effort_k(&s, &map, &tol, &region, k).unwrap();
            let pk = map.power(k);
            let zero = pk.image_set(&region);
            for x in 0..41 {
                assert_eq!(e.get(x) == 0.0, zero.contains(x));
                if !region.contains(x) {
                    assert!(e.get(x) >= 1.0);
                }
                assert!(e.get(pk.apply(x)) <= e.get(x));
            }
            let a = averaged_effort(&s, &map, &tol, &region, k).unwrap();
            for x in 0..41 {
                assert!(a.get(map.apply(x)) <= a.get(x));
            }
            if k == 1 {
                assert_eq!(a.values, e.values);
            }
        }
    }

    #[test]
    fn region_lyapunov_sets_and_decrease() {
        let (s, map) = double_well();
        let region = PointSet::from_indices(41, 0..=15);
        let (k, j) = (20, 20);
        let l = strong_region_lyapunov(&s, &map, &region, k, j).unwrap();
        assert!(l.well_formed());
        let tol = truncation_tolerance(k, j);
        assert!(l.get(10) <= tol);
        for x in 21..41 {
            assert!(l.get(x) >= 1.0 - tol);
        }
        for x in (0..=19).filter(|&x| x != 10) {
            assert!(l.get(map.apply(x)) < l.get(x), "{x}");
        }
        let en = region_energy(&s, &map, &trap_tolerance(&s, &region, &map.image_set(&region)).unwrap().eps, &region, k)
            .unwrap();
        assert_eq!(en.get(10), 0.0);
        assert_eq!(en.get(35), 1.0 - 0.5f64.powi(k as i32));
    }

    #[test]
    fn path_map_strict_decrease() {
        let s = points(3);
        let map = SampledMap::from_table(vec![1, 2, 2]);
        let g = global_lyapunov(&s, &map, &GlobalOptions::default()).unwrap();
        let v = verify_global(&map, &g);
        assert!(v.passed(), "{v:?}");
        assert!(g.field.get(1) < g.field.get(0) && g.field.get(2) < g.field.get(1));
    }

    #[test]
    fn identity_three_values() {
        let s = points(3);
        let map = SampledMap::from_table(vec![0, 1, 2]);
        let g = global_lyapunov(&s, &map, &GlobalOptions::default()).unwrap();
        assert!(verify_global(&map, &g).passed());
        let mut vals: Vec<f64> = g.components.iter().map(|c| c.value).collect();
        vals.dedup();
        assert_eq!(vals.len(), 3);
    }

    #[test]
    fn double_well_global() {
        let (s, map) = double_well();
        let g = global_lyapunov(&s, &map, &GlobalOptions::default()).unwrap();
        let v = verify_global(&map, &g);
        assert!(v.passed(), "{v:?}");
        assert_eq!(g.components.len(), 3);
    }

    #[test]
    fn flow_lift_basics() {
        let s = GridSpec::centered(0.0, 1.0, 21).build().unwrap();
        let f = System::builtin(Builtin::Logistic);
        let c = ScalarField { values: vec![0.3; 21], kind: FieldKind::Global };
        let lift = flow_lyapunov(&s, &f, &c, 32, Extension::Nearest).unwrap();
        assert!((lift.eval(&[0.4]).unwrap() - 0.3).abs() < 1e-12);
        let ell = ScalarField { values: (0..21).map(|i| 1.0 - i as f64 / 20.0).collect(), kind: FieldKind::Global };
        let lift = flow_lyapunov(&s, &f, &ell, 32, Extension::Linear).unwrap();
        assert_eq!(lift.eval(&[0.0]).unwrap(), ell.get(0));
        assert!((lift.eval(&[1.0]).unwrap() - ell.get(20)).abs() < 1e-15);
        assert!(matches!(flow_lyapunov(&s, &f, &ell, 4, Extension::Linear), Err(Error::Lyapunov(LyapunovError::Nodes(4)))));
    }
}
