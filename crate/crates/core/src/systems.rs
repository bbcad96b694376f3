//! Discrete-time maps and continuous-time flows over a [`MetricSample`].
//!
//! A [`System`] evaluates `Φ(t, x)` on coordinates (closed forms, RK4, point
//! maps) or on indices (tabulated maps). Sampling a discrete system on a space
//! yields a [`SampledMap`]: one image state per state, snapped to the nearest
//! sample point, plus the largest snap distance seen.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SystemError;
use crate::space::{Boundary, MetricSample, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directionality {
    Flow,
    Semiflow,
}

/// What happens to an image that leaves a grid through a window face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Escape {
    Clamp,
    #[default]
    Absorb,
    Error,
}

/// Flows with exact closed-form evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// `ẋ = x(1 − x)`.
    Logistic,
    /// `Φ(t, x) = x e^(−t)`.
    ExpDecay,
    /// `Φ(t, x) = x e^t`.
    ExpGrowth,
    /// `Φ(t, x) = x + t e₁`; on the half-plane this is `(x + t, y)`.
    Translation,
}

/// Right-hand sides integrated by fixed-step RK4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ode {
    Logistic,
    /// `ẋ = x − x³`.
    DoubleWell,
    /// `ẋ = a x`.
    Linear(f64),
}

impl Ode {
    fn rhs(self, x: f64) -> f64 {
        match self {
            Ode::Logistic => x * (1.0 - x),
            Ode::DoubleWell => x - x * x * x,
            Ode::Linear(a) => a * x,
        }
    }
}

/// Discrete maps defined pointwise on coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointMap {
    Identity,
    /// `x ↦ c x`.
    Scale(f64),
    /// `x ↦ x + c e₁`.
    Shift(f64),
    /// `x ↦ 2x mod 1`.
    Doubling,
    /// `x ↦ x + a mod 1`.
    Rotation(f64),
}

impl PointMap {
    fn apply(self, x: &mut [f64]) {
        match self {
            PointMap::Identity => {}
            PointMap::Scale(c) => x.iter_mut().for_each(|v| *v *= c),
            PointMap::Shift(c) => x[0] += c,
            PointMap::Doubling => x[0] = (2.0 * x[0]).rem_euclid(1.0),
            PointMap::Rotation(a) => x[0] = (x[0] + a).rem_euclid(1.0),
        }
    }

    fn inverse(self) -> Option<PointMap> {
        match self {
            PointMap::Identity => Some(PointMap::Identity),
            PointMap::Scale(c) if c != 0.0 => Some(PointMap::Scale(1.0 / c)),
            PointMap::Shift(c) => Some(PointMap::Shift(-c)),
            PointMap::Rotation(a) => Some(PointMap::Rotation(-a)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Rule {
    Closed(Builtin),
    Ode(Ode),
    Map(PointMap),
    Table(Arc<Vec<usize>>),
    Discretized(Box<System>, f64),
    Power(Box<System>, usize),
    Reversed(Box<System>),
}

/// A discrete map or continuous flow, with its escape policy.
#[derive(Debug, Clone)]
pub struct System {
    rule: Rule,
    time: TimeKind,
    direction: Directionality,
    pub escape: Escape,
}

/// A position during evaluation: either a sample index or raw coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Pos {
    Index(usize),
    Coord(Vec<f64>),
}

/// A sampled image state and the distance it was snapped by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Image {
    pub state: usize,
    pub snap: f64,
}

impl System {
    pub fn builtin(b: Builtin) -> Self {
        System { rule: Rule::Closed(b), time: TimeKind::Continuous, direction: Directionality::Flow, escape: Escape::default() }
    }

    pub fn ode(rhs: Ode) -> Self {
        System { rule: Rule::Ode(rhs), time: TimeKind::Continuous, direction: Directionality::Flow, escape: Escape::default() }
    }

    pub fn map(m: PointMap) -> Self {
        let direction = if m.inverse().is_some() { Directionality::Flow } else { Directionality::Semiflow };
        System { rule: Rule::Map(m), time: TimeKind::Discrete, direction, escape: Escape::default() }
    }

    /// Tabulated map `i ↦ table[i]`; a flow exactly when the table is a bijection.
    pub fn table(table: Vec<usize>) -> Self {
        let direction = if is_bijection(&table) { Directionality::Flow } else { Directionality::Semiflow };
        System { rule: Rule::Table(Arc::new(table)), time: TimeKind::Discrete, direction, escape: Escape::default() }
    }

    pub fn with_escape(mut self, escape: Escape) -> Self {
        self.escape = escape;
        self
    }

    /// The same system, forced to forward-only time.
    pub fn as_semiflow(mut self) -> Self {
        self.direction = Directionality::Semiflow;
        self
    }

    pub fn time_kind(&self) -> TimeKind {
        self.time
    }

    pub fn directionality(&self) -> Directionality {
        self.direction
    }

    pub fn is_flow(&self) -> bool {
        self.direction == Directionality::Flow
    }

    pub fn table_images(&self) -> Option<&[usize]> {
        match &self.rule {
            Rule::Table(t) => Some(t),
            _ => None,
        }
    }

    fn required_dim(&self) -> Option<usize> {
        match &self.rule {
            Rule::Closed(Builtin::Translation) => None,
            Rule::Closed(_) | Rule::Ode(_) => Some(1),
            Rule::Map(PointMap::Doubling | PointMap::Rotation(_)) => Some(1),
            Rule::Map(_) | Rule::Table(_) => None,
            Rule::Discretized(b, _) | Rule::Power(b, _) | Rule::Reversed(b) => b.required_dim(),
        }
    }

    fn uses_index(&self) -> bool {
        match &self.rule {
            Rule::Table(_) => true,
            Rule::Discretized(b, _) | Rule::Power(b, _) | Rule::Reversed(b) => b.uses_index(),
            _ => false,
        }
    }

    /// The time-`period` discretization of a continuous system.
    pub fn discretize(&self, period: f64) -> Result<System, SystemError> {
        if self.time != TimeKind::Continuous {
            return Err(SystemError::NotContinuous);
        }
        if !(period > 0.0) {
            return Err(SystemError::NonpositivePeriod(period));
        }
        Ok(System {
            rule: Rule::Discretized(Box::new(self.clone()), period),
            time: TimeKind::Discrete,
            direction: self.direction,
            escape: self.escape,
        })
    }

    /// `Φ^σ(t, x) = Φ(−t, x)`.
    pub fn reverse_time(&self) -> Result<System, SystemError> {
        if self.direction != Directionality::Flow {
            return Err(SystemError::Semiflow);
        }
        let rule = match &self.rule {
            Rule::Reversed(inner) => return Ok(inner.as_ref().clone().with_escape(self.escape)),
            Rule::Closed(_) | Rule::Ode(_) => Rule::Reversed(Box::new(self.clone())),
            Rule::Map(m) => Rule::Map(m.inverse().ok_or(SystemError::NotInvertible)?),
            Rule::Table(t) => {
                let mut inv = vec![0; t.len()];
                for (i, &j) in t.iter().enumerate() {
                    inv[j] = i;
                }
                Rule::Table(Arc::new(inv))
            }
            Rule::Discretized(f, p) => Rule::Discretized(Box::new(f.reverse_time()?), *p),
            Rule::Power(b, k) => Rule::Power(Box::new(b.reverse_time()?), *k),
        };
        Ok(System { rule, time: self.time, direction: self.direction, escape: self.escape })
    }

    /// The k-fold composition of a discrete system.
    pub fn power(&self, k: usize) -> Result<System, SystemError> {
        if self.time != TimeKind::Discrete {
            return Err(SystemError::NotDiscrete);
        }
        if k < 1 {
            return Err(SystemError::BadPower(k));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let rule = match &self.rule {
            Rule::Power(b, j) => Rule::Power(b.clone(), j * k),
            _ => Rule::Power(Box::new(self.clone()), k),
        };
        Ok(System { rule, time: self.time, direction: self.direction, escape: self.escape })
    }

    /// Raw flow evaluation on coordinates.
    pub fn flow(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, SystemError> {
        if self.time != TimeKind::Continuous {
            return Err(SystemError::NotContinuous);
        }
        if t < 0.0 && self.direction == Directionality::Semiflow {
            return Err(SystemError::NegativeTime(t));
        }
        if let Some(d) = self.required_dim() {
            if x.len() != d {
                return Err(SystemError::Dimension { system: d, space: x.len() });
            }
        }
        Ok(self.flow_unchecked(t, x))
    }

    fn flow_unchecked(&self, t: f64, x: &[f64]) -> Vec<f64> {
        if t == 0.0 {
            return x.to_vec();
        }
        match &self.rule {
            Rule::Closed(b) => {
                let mut y = x.to_vec();
                match b {
                    Builtin::Logistic => y[0] = logistic(t, x[0]),
                    Builtin::ExpDecay => y[0] = x[0] * (-t).exp(),
                    Builtin::ExpGrowth => y[0] = x[0] * t.exp(),
                    Builtin::Translation => y[0] = x[0] + t,
                }
                y
            }
            Rule::Ode(rhs) => vec![rk4(*rhs, t, x[0])],
            Rule::Reversed(inner) => inner.flow_unchecked(-t, x),
            _ => unreachable!("continuous rules only"),
        }
    }

    /// Evaluate at time `t` from a position; tabulated rules need an index.
    pub fn advance(&self, space: &MetricSample, t: f64, p: Pos) -> Result<Pos, SystemError> {
        if t < 0.0 && self.direction == Directionality::Semiflow {
            return Err(SystemError::NegativeTime(t));
        }
        match self.time {
            TimeKind::Continuous => {
                let x = self.coords_of(space, &p)?;
                Ok(Pos::Coord(self.flow(t, &x)?))
            }
            TimeKind::Discrete => {
                if t.fract() != 0.0 {
                    return Err(SystemError::FractionalTime(t));
                }
                if t < 0.0 {
                    return self.reverse_time()?.advance(space, -t, p);
                }
                self.iterate(space, t as usize, p)
            }
        }
    }

    fn coords_of(&self, space: &MetricSample, p: &Pos) -> Result<Vec<f64>, SystemError> {
        match p {
            Pos::Coord(c) => Ok(c.clone()),
            Pos::Index(i) if space.has_coords() && *i < space.len() => Ok(space.coords(*i).to_vec()),
            Pos::Index(_) => Err(SystemError::NoCoordinates),
        }
    }

    fn iterate(&self, space: &MetricSample, k: usize, p: Pos) -> Result<Pos, SystemError> {
        if k == 0 {
            return Ok(p);
        }
        match &self.rule {
            Rule::Table(t) => {
                let Pos::Index(mut i) = p else { return Err(SystemError::NoCoordinates) };
                for _ in 0..k {
                    if i >= t.len() {
                        return Ok(Pos::Index(i));
                    }
                    i = t[i];
                }
                Ok(Pos::Index(i))
            }
            Rule::Map(m) => {
                let mut x = self.coords_of(space, &p)?;
                for _ in 0..k {
                    m.apply(&mut x);
                }
                Ok(Pos::Coord(x))
            }
            Rule::Discretized(f, period) => {
                let x = self.coords_of(space, &p)?;
                Ok(Pos::Coord(f.flow_unchecked(k as f64 * period, &x)))
            }
            Rule::Power(b, j) => b.iterate(space, k * j, p),
            _ => unreachable!("discrete rules only"),
        }
    }

    /// Sampled image of state `i` at time `t`, snapped to the nearest sample point.
    pub fn evaluate(&self, space: &MetricSample, t: f64, i: usize) -> Result<Image, SystemError> {
        if space.is_outside(i) {
            return Ok(Image { state: i, snap: 0.0 });
        }
        if t == 0.0 {
            return Ok(Image { state: i, snap: 0.0 });
        }
        if !self.uses_index() {
            if let Some(d) = self.required_dim() {
                if space.dim() != d {
                    return Err(SystemError::Dimension { system: d, space: space.dim() });
                }
            }
        }
        match self.advance(space, t, Pos::Index(i))? {
            Pos::Index(j) => {
                if j >= space.states() {
                    return Err(SystemError::TableImage { point: i, image: j });
                }
                Ok(Image { state: j, snap: 0.0 })
            }
            Pos::Coord(y) => self.snap(space, &y),
        }
    }

    /// Snap raw coordinates to a state, honoring grid faces and the escape policy.
    pub fn snap(&self, space: &MetricSample, y: &[f64]) -> Result<Image, SystemError> {
        if y.iter().any(|v| !v.is_finite()) {
            return self.escape_to(space, y);
        }
        if let Some(g) = space.grid_info() {
            for a in 0..g.dim() {
                let window_low = y[a] < g.lo[a] && g.bounds[a][0] == Boundary::Window;
                let window_high = y[a] > g.hi[a] && g.bounds[a][1] == Boundary::Window;
                if window_low || window_high {
                    if self.escape != Escape::Clamp {
                        return self.escape_to(space, y);
                    }
                }
            }
        }
        let s = space.nearest(y).map_err(|_| SystemError::NoCoordinates)?;
        Ok(Image { state: s.index, snap: s.dist })
    }

    fn escape_to(&self, space: &MetricSample, y: &[f64]) -> Result<Image, SystemError> {
        match (self.escape, space.outside()) {
            (Escape::Absorb, Some(o)) => Ok(Image { state: o, snap: 0.0 }),
            (Escape::Clamp, _) if y.iter().all(|v| !v.is_nan()) => {
                let clamped: Vec<f64> = y.iter().map(|v| v.clamp(-f64::MAX, f64::MAX)).collect();
                let s = space.nearest(&clamped).map_err(|_| SystemError::NoCoordinates)?;
                Ok(Image { state: s.index, snap: s.dist })
            }
            _ => Err(SystemError::Escape(y.to_vec())),
        }
    }

    /// Table of sampled images at time `t` for every state.
    pub fn sample_at(&self, space: &MetricSample, t: f64) -> Result<SampledMap, SystemError> {
        if let Rule::Table(tab) = &self.rule {
            if tab.len() != space.len() && tab.len() != space.states() {
                return Err(SystemError::TableSize { table: tab.len(), space: space.len() });
            }
            if let Some((point, &image)) = tab.iter().enumerate().find(|(_, &j)| j >= space.states()) {
                return Err(SystemError::TableImage { point, image });
            }
        }
        let states = space.states();
        let imgs: Vec<Image> = (0..states)
            .into_par_iter()
            .map(|i| self.evaluate(space, t, i))
            .collect::<Result<_, _>>()?;
        let mut snap: f64 = 0.0;
        let mut absorbed = 0;
        for (i, im) in imgs.iter().enumerate() {
            if !space.is_outside(i) {
                if space.is_outside(im.state) {
                    absorbed += 1;
                } else {
                    snap = snap.max(im.snap);
                }
            }
        }
        Ok(SampledMap { images: imgs.iter().map(|im| im.state).collect(), snap, absorbed })
    }

    /// One-step sampled map of a discrete system.
    pub fn sample(&self, space: &MetricSample) -> Result<SampledMap, SystemError> {
        if self.time != TimeKind::Discrete {
            return Err(SystemError::NotDiscrete);
        }
        self.sample_at(space, 1.0)
    }
}

fn logistic(t: f64, x: f64) -> f64 {
    if t >= 0.0 {
        x / (x + (1.0 - x) * (-t).exp())
    } else {
        let e = t.exp();
        x * e / (1.0 - x + x * e)
    }
}

/// Fixed-step RK4 with step `min(0.01, |t|/100)`.
fn rk4(rhs: Ode, t: f64, x0: f64) -> f64 {
    let span = t.abs();
    let h0 = (0.01f64).min(span / 100.0);
    let steps = (span / h0).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = rhs.rhs(x);
        let k2 = rhs.rhs(x + 0.5 * h * k1);
        let k3 = rhs.rhs(x + 0.5 * h * k2);
        let k4 = rhs.rhs(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !x.is_finite() {
            break;
        }
    }
    x
}

fn is_bijection(t: &[usize]) -> bool {
    let mut seen = vec![false; t.len()];
    for &j in t {
        if j >= t.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// A map on states given by its image table.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMap {
    pub images: Vec<usize>,
    /// Largest snap distance over real points that stayed in the sample.
    pub snap: f64,
    /// Number of real points mapped to the outside state.
    pub absorbed: usize,
}

impl SampledMap {
    pub fn from_table(images: Vec<usize>) -> Self {
        SampledMap { images, snap: 0.0, absorbed: 0 }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn apply_n(&self, mut i: usize, k: usize) -> usize {
        for _ in 0..k {
            i = self.images[i];
        }
        i
    }

    /// The k-fold composition of the table.
    pub fn power(&self, k: usize) -> SampledMap {
        let images = (0..self.len()).map(|i| self.apply_n(i, k)).collect();
        SampledMap { images, snap: self.snap, absorbed: self.absorbed }
    }

    pub fn image_set(&self, s: &PointSet) -> PointSet {
        PointSet::from_indices(s.universe(), s.iter().map(|i| self.images[i]))
    }

    pub fn preimage_set(&self, s: &PointSet) -> PointSet {
        PointSet::from_indices(s.universe(), (0..self.len()).filter(|&i| s.contains(self.images[i])))
    }

    /// Preimage lists, indexed by image state.
    pub fn preimages(&self) -> Vec<Vec<usize>> {
        let mut pre = vec![Vec::new(); self.len()];
        for (i, &j) in self.images.iter().enumerate() {
            pre[j].push(i);
        }
        pre
    }

    pub fn is_bijection(&self) -> bool {
        is_bijection(&self.images)
    }

    /// Points lying on a cycle of the table.
    pub fn periodic_points(&self) -> PointSet {
        let n = self.len();
        // 0 = unvisited, 1 = on the current walk, 2 = finished
        let mut mark = vec![0u8; n];
        let mut periodic = PointSet::empty(n);
        let mut walk = Vec::new();
        for s in 0..n {
            if mark[s] != 0 {
                continue;
            }
            let mut x = s;
            while mark[x] == 0 {
                mark[x] = 1;
                walk.push(x);
                x = self.images[x];
            }
            if mark[x] == 1 {
                let mut y = x;
                loop {
                    periodic.insert(y);
                    y = self.images[y];
                    if y == x {
                        break;
                    }
                }
            }
            for w in walk.drain(..) {
                mark[w] = 2;
            }
        }
        periodic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitDir {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitResult {
    pub set: PointSet,
    /// Last ladder time that added a new state.
    pub last_growth: f64,
    /// Whether the orbit stopped growing before the horizon.
    pub stabilized: bool,
}

/// Forward or backward orbit of `a` up to `horizon`.
///
/// Discrete systems use every integer time; continuous systems use the ladder
/// `0, step, 2·step, …` with images evaluated directly from each state.
pub fn orbit(
    space: &MetricSample,
    system: &System,
    a: &PointSet,
    dir: OrbitDir,
    horizon: f64,
    step: f64,
) -> Result<OrbitResult, SystemError> {
    match system.time_kind() {
        TimeKind::Discrete => {
            let map = system.sample(space)?;
            Ok(discrete_orbit(&map, a, dir, horizon.floor() as usize))
        }
        TimeKind::Continuous => {
            if !(step > 0.0) {
                return Err(SystemError::NonpositivePeriod(step));
            }
            let rungs = (horizon / step).floor() as usize;
            let mut set = a.clone();
            let mut last_growth = 0.0;
            for r in 1..=rungs {
                let t = r as f64 * step;
                let map = system.sample_at(space, t)?;
                let mut grew = false;
                match dir {
                    OrbitDir::Forward => {
                        for i in a.iter() {
                            grew |= set.put(map.apply(i));
                        }
                    }
                    OrbitDir::Backward => {
                        for i in 0..space.states() {
                            if a.contains(map.apply(i)) {
                                grew |= set.put(i);
                            }
                        }
                    }
                }
                if grew {
                    last_growth = t;
                }
            }
            Ok(OrbitResult { set, last_growth, stabilized: last_growth < horizon - step })
        }
    }
}

/// Exact orbit on a table, stopping once the union stops growing.
pub fn discrete_orbit(map: &SampledMap, a: &PointSet, dir: OrbitDir, horizon: usize) -> OrbitResult {
    let mut set = a.clone();
    let mut layer = a.clone();
    let pre = (dir == OrbitDir::Backward).then(|| map.preimages());
    let mut last_growth = 0usize;
    let mut stabilized = false;
    for t in 1..=horizon {
        layer = match &pre {
            None => map.image_set(&layer),
            Some(pre) => PointSet::from_indices(map.len(), layer.iter().flat_map(|j| pre[j].iter().copied())),
        };
        let before = set.count();
        set.union_with(&layer);
        if set.count() == before {
            stabilized = true;
            break;
        }
        last_growth = t;
    }
    OrbitResult { set, last_growth: last_growth as f64, stabilized }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::GridSpec;
    use approx::assert_abs_diff_eq;

    fn line(lo: f64, hi: f64, n: usize) -> MetricSample {
        GridSpec::new(&[(lo, hi)], &[n]).build().unwrap()
    }

    #[test]
    fn time_zero_is_identity() {
        let s = line(0.0, 1.0, 20);
        for b in [Builtin::Logistic, Builtin::ExpDecay, Builtin::ExpGrowth, Builtin::Translation] {
            let sys = System::builtin(b);
            for i in 0..20 {
                assert_eq!(sys.evaluate(&s, 0.0, i).unwrap().state, i);
                assert_eq!(sys.flow(0.0, s.coords(i)).unwrap(), s.coords(i));
            }
        }
    }

    #[test]
    fn logistic_fixed_point_and_closed_form() {
        let sys = System::builtin(Builtin::Logistic);
        for t in [0.3, 1.0, 7.0, -2.0] {
            assert_eq!(sys.flow(t, &[1.0]).unwrap()[0], 1.0);
        }
        let y = sys.flow(1.0, &[0.5]).unwrap()[0];
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(y, 0.5 * e / (0.5 + 0.5 * e), epsilon = 1e-15);
        assert_abs_diff_eq!(y, 0.731_058_578_6, epsilon = 1e-9);
        let rk = System::ode(Ode::Logistic).flow(1.0, &[0.5]).unwrap()[0];
        assert_abs_diff_eq!(rk, y, epsilon = 1e-6);
    }

    #[test]
    fn discretize_examples() {
        let s = line(0.0, 10.0, 10);
        let m = System::builtin(Builtin::Translation).discretize(1.0).unwrap();
        for i in 0..9 {
            let p = m.advance(&s, 1.0, Pos::Coord(vec![i as f64])).unwrap();
            assert_eq!(p, Pos::Coord(vec![i as f64 + 1.0]));
        }
        let half = System::builtin(Builtin::ExpDecay).discretize(std::f64::consts::LN_2).unwrap();
        let Pos::Coord(y) = half.advance(&s, 1.0, Pos::Coord(vec![-3.0])).unwrap() else { panic!() };
        assert_abs_diff_eq!(y[0], -1.5, epsilon = 1e-15);
        assert_eq!(m.discretize(1.0).unwrap_err(), SystemError::NotContinuous);
        assert_eq!(
            System::builtin(Builtin::Logistic).discretize(0.0).unwrap_err(),
            SystemError::NonpositivePeriod(0.0)
        );
    }

    #[test]
    fn reverse_examples() {
        let s = line(-2.0, 0.0, 200);
        let f = System::builtin(Builtin::ExpDecay);
        let r = f.reverse_time().unwrap();
        let y = r.flow(1.0, &[-0.5]).unwrap()[0];
        assert_abs_diff_eq!(y, -0.5 * std::f64::consts::E, epsilon = 1e-15);
        let rr = r.reverse_time().unwrap();
        for i in 0..s.len() {
            for t in [0.5, 2.0] {
                assert_eq!(rr.evaluate(&s, t, i).unwrap(), f.evaluate(&s, t, i).unwrap());
            }
        }
        let semi = System::builtin(Builtin::Logistic).as_semiflow();
        assert_eq!(semi.reverse_time().unwrap_err(), SystemError::Semiflow);
        assert_eq!(semi.flow(-1.0, &[0.5]).unwrap_err(), SystemError::NegativeTime(-1.0));
    }

    #[test]
    fn power_of_cycle_is_identity() {
        let s = MetricSample::finite(&[
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let cyc = System::table(vec![1, 2, 0]);
        assert_eq!(cyc.power(1).unwrap().sample(&s).unwrap().images, vec![1, 2, 0]);
        assert_eq!(cyc.power(3).unwrap().sample(&s).unwrap().images, vec![0, 1, 2]);
        assert_eq!(cyc.power(0).unwrap_err(), SystemError::BadPower(0));
        assert!(cyc.is_flow());
        assert_eq!(cyc.reverse_time().unwrap().sample(&s).unwrap().images, vec![2, 0, 1]);
    }

    #[test]
    fn path_map_orbits() {
        let map = SampledMap::from_table(vec![1, 2, 2]);
        let fwd = discrete_orbit(&map, &PointSet::from_indices(3, [0]), OrbitDir::Forward, 2);
        assert_eq!(fwd.set.to_vec(), vec![0, 1, 2]);
        let bwd = discrete_orbit(&map, &PointSet::from_indices(3, [2]), OrbitDir::Backward, 2);
        assert_eq!(bwd.set.to_vec(), vec![0, 1, 2]);
        let fixed = discrete_orbit(&map, &PointSet::from_indices(3, [2]), OrbitDir::Forward, 50);
        assert_eq!(fixed.set.to_vec(), vec![2]);
        assert!(fixed.stabilized);
    }

    #[test]
    fn window_escape_policies() {
        let s = GridSpec::new(&[(0.0, 10.0)], &[10]).windowed().build().unwrap();
        let o = s.outside().unwrap();
        let tr = System::builtin(Builtin::Translation);
        assert_eq!(tr.evaluate(&s, 3.0, 9).unwrap().state, o);
        let clamp = tr.clone().with_escape(Escape::Clamp);
        assert_eq!(clamp.evaluate(&s, 3.0, 9).unwrap().state, 9);
        let err = tr.with_escape(Escape::Error);
        assert!(matches!(err.evaluate(&s, 3.0, 9), Err(SystemError::Escape(_))));
        let closed = line(0.0, 10.0, 10);
        let absorb = System::builtin(Builtin::Translation);
        // a domain face clamps regardless of policy
        assert_eq!(absorb.evaluate(&closed, 3.0, 9).unwrap().state, 9);
    }

    #[test]
    fn periodic_points_of_rho_shape() {
        let map = SampledMap::from_table(vec![1, 2, 3, 1, 4]);
        assert_eq!(map.periodic_points().to_vec(), vec![1, 2, 3, 4]);
    }
}
