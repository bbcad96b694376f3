//! Finite metric spaces and grid discretizations of boxes in ℝⁿ.
//!
//! Every computation in the crate runs over a [`MetricSample`]: a finite list
//! of states with a metric. Grids may carry one extra *outside* state that
//! collects trajectories leaving an artificial window; it is infinitely far
//! from every real point and never counts as recurrent.

use std::fmt;

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SpaceError;

/// Largest point count for which the full distance matrix of a formula metric is cached.
pub const DENSE_CACHE_LIMIT: usize = 2048;

/// Largest point count for which the triangle inequality is checked on every triple.
pub const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 1000;

const TRIANGLE_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    HyperbolicHalfPlane,
}

impl MetricKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "euclidean" => Some(MetricKind::Euclidean),
            "hyperbolic-half-plane" | "hyperbolic" => Some(MetricKind::HyperbolicHalfPlane),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::HyperbolicHalfPlane => "hyperbolic-half-plane",
        }
    }

    /// Distance between two coordinate vectors.
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            MetricKind::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            MetricKind::HyperbolicHalfPlane => {
                let dx = a[0] - b[0];
                let dy = a[1] - b[1];
                // arcosh(1 + r²/(2 y₁ y₂)) written in the cancellation-free form
                let r = (dx * dx + dy * dy).sqrt();
                2.0 * (r / (2.0 * (a[1] * b[1]).sqrt())).asinh()
            }
        }
    }
}

/// How a grid face relates to the underlying state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// The face is an edge of the true state space; images beyond it are clamped.
    Domain,
    /// The face cuts a larger space; images beyond it are subject to the escape policy.
    Window,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub width: Vec<f64>,
    pub bounds: Vec<[Boundary; 2]>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in 0..self.dim() {
            out[a] = idx % self.cells[a];
            idx /= self.cells[a];
        }
        out
    }

    pub fn center(&self, multi: &[usize]) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.lo[a] + (multi[a] as f64 + 0.5) * self.width[a])
            .collect()
    }

    fn on_window_face(&self, multi: &[usize]) -> bool {
        (0..self.dim()).any(|a| {
            (multi[a] == 0 && self.bounds[a][0] == Boundary::Window)
                || (multi[a] + 1 == self.cells[a] && self.bounds[a][1] == Boundary::Window)
        })
    }

    fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        let multi = self.multi_index(idx);
        let d = self.dim();
        let total = 3usize.pow(d as u32);
        let mut probe = vec![0usize; d];
        'outer: for code in 0..total {
            let mut c = code;
            for a in 0..d {
                let off = (c % 3) as isize - 1;
                c /= 3;
                let v = multi[a] as isize + off;
                if v < 0 || v >= self.cells[a] as isize {
                    continue 'outer;
                }
                probe[a] = v as usize;
            }
            f(self.index_of(&probe));
        }
    }
}

/// Builder for grid spaces.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub metric: MetricKind,
    pub bounds: Vec<[Boundary; 2]>,
}

impl GridSpec {
    pub fn new(bx: &[(f64, f64)], cells: &[usize]) -> Self {
        GridSpec {
            lo: bx.iter().map(|b| b.0).collect(),
            hi: bx.iter().map(|b| b.1).collect(),
            cells: cells.to_vec(),
            metric: MetricKind::Euclidean,
            bounds: vec![[Boundary::Domain; 2]; bx.len()],
        }
    }

    /// One-dimensional grid whose cell centers are `lo, lo + h, …, hi`.
    pub fn centered(lo: f64, hi: f64, cells: usize) -> Self {
        let h = (hi - lo) / (cells.max(2) - 1) as f64;
        GridSpec::new(&[(lo - 0.5 * h, hi + 0.5 * h)], &[cells])
    }

    pub fn metric(mut self, metric: MetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn boundary(mut self, axis: usize, lo: Boundary, hi: Boundary) -> Self {
        self.bounds[axis] = [lo, hi];
        self
    }

    pub fn windowed(mut self) -> Self {
        for b in &mut self.bounds {
            *b = [Boundary::Window; 2];
        }
        self
    }

    pub fn build(self) -> Result<MetricSample, SpaceError> {
        MetricSample::grid(self)
    }
}

#[derive(Debug, Clone)]
enum Metric {
    Matrix(Vec<f64>),
    Formula(MetricKind),
}

/// Result of snapping a coordinate vector to the nearest sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct Snap {
    pub index: usize,
    pub dist: f64,
    /// Axis and side (`false` = low, `true` = high) of the first face the
    /// coordinate lies beyond, if any.
    pub beyond: Option<(usize, bool)>,
}

/// A finite set of states with a metric.
#[derive(Clone)]
pub struct MetricSample {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    metric: Metric,
    h: f64,
    grid: Option<Grid>,
    outside: bool,
    cache: Option<Vec<f64>>,
    diameter: f64,
    min_sep: f64,
}

impl fmt::Debug for MetricSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSample")
            .field("points", &self.n)
            .field("dim", &self.dim)
            .field("h", &self.h)
            .field("outside", &self.outside)
            .field("diameter", &self.diameter)
            .finish()
    }
}

impl MetricSample {
    /// Validated finite space from an explicit distance matrix; `h = 0`.
    pub fn finite(matrix: &[Vec<f64>]) -> Result<Self, SpaceError> {
        let n = matrix.len();
        if n == 0 {
            return Err(SpaceError::Shape { rows: 0, cols: 0, n: 0 });
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in matrix {
            if row.len() != n {
                return Err(SpaceError::Shape { rows: n, cols: row.len(), n });
            }
            flat.extend_from_slice(row);
        }
        validate_matrix(n, &flat, |i, j| flat[i * n + j])?;
        let (diameter, min_sep) = pair_extremes(n, |i, j| flat[i * n + j]);
        Ok(MetricSample {
            n,
            dim: 0,
            coords: Vec::new(),
            metric: Metric::Matrix(flat),
            h: 0.0,
            grid: None,
            outside: false,
            cache: None,
            diameter,
            min_sep,
        })
    }

    /// Finite space of coordinate points under a formula metric; `h = 0`.
    pub fn from_points(points: &[Vec<f64>], metric: MetricKind) -> Result<Self, SpaceError> {
        let n = points.len();
        if n == 0 {
            return Err(SpaceError::Shape { rows: 0, cols: 0, n: 0 });
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(SpaceError::Grid("points of mixed dimension".into()));
        }
        if metric == MetricKind::HyperbolicHalfPlane {
            if dim != 2 {
                return Err(SpaceError::Grid("hyperbolic metric needs 2D points".into()));
            }
            if let Some(p) = points.iter().find(|p| p[1] <= 0.0) {
                return Err(SpaceError::NonpositiveHeight(p[1]));
            }
        }
        let coords: Vec<f64> = points.iter().flatten().copied().collect();
        let at = |i: usize| &coords[i * dim..(i + 1) * dim];
        let (diameter, min_sep) = pair_extremes(n, |i, j| metric.eval(at(i), at(j)));
        if min_sep <= 0.0 {
            let (i, j) = first_duplicate(n, |i, j| metric.eval(at(i), at(j)));
            return Err(SpaceError::ZeroDistance { i, j });
        }
        let mut space = MetricSample {
            n,
            dim,
            coords,
            metric: Metric::Formula(metric),
            h: 0.0,
            grid: None,
            outside: false,
            cache: None,
            diameter,
            min_sep,
        };
        space.fill_cache();
        Ok(space)
    }

    /// Grid of cell centers; `h` is the cell diameter in the chosen metric.
    pub fn grid(spec: GridSpec) -> Result<Self, SpaceError> {
        let d = spec.cells.len();
        if d == 0 || spec.lo.len() != d || spec.hi.len() != d || spec.bounds.len() != d {
            return Err(SpaceError::Grid("box and cell counts disagree".into()));
        }
        for a in 0..d {
            if !(spec.lo[a] < spec.hi[a]) {
                return Err(SpaceError::Grid(format!("axis {a}: need lo < hi")));
            }
            if spec.cells[a] == 0 {
                return Err(SpaceError::Grid(format!("axis {a}: need at least one cell")));
            }
        }
        if spec.metric == MetricKind::HyperbolicHalfPlane {
            if d != 2 {
                return Err(SpaceError::Grid("hyperbolic metric needs a 2D box".into()));
            }
            if spec.lo[1] <= 0.0 {
                return Err(SpaceError::NonpositiveHeight(spec.lo[1]));
            }
        }
        let width: Vec<f64> = (0..d)
            .map(|a| (spec.hi[a] - spec.lo[a]) / spec.cells[a] as f64)
            .collect();
        let mut strides = vec![1; d];
        for a in 1..d {
            strides[a] = strides[a - 1] * spec.cells[a - 1];
        }
        let grid = Grid {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
            cells: spec.cells.clone(),
            width: width.clone(),
            bounds: spec.bounds.clone(),
            strides,
        };
        let n: usize = spec.cells.iter().product();
        let mut coords = Vec::with_capacity(n * d);
        for i in 0..n {
            coords.extend(grid.center(&grid.multi_index(i)));
        }
        let metric = spec.metric;
        let (h, min_sep) = match metric {
            MetricKind::Euclidean => (
                width.iter().map(|w| w * w).sum::<f64>().sqrt(),
                width.iter().copied().fold(f64::INFINITY, f64::min),
            ),
            MetricKind::HyperbolicHalfPlane => {
                // cells are largest in the bottom row and smallest in the top row
                let (wx, wy) = (width[0], width[1]);
                let y0 = spec.lo[1];
                let corners = [[0.0, y0], [wx, y0], [0.0, y0 + wy], [wx, y0 + wy]];
                let mut h: f64 = 0.0;
                for p in &corners {
                    for q in &corners {
                        h = h.max(metric.eval(p, q));
                    }
                }
                let yt = spec.hi[1] - 0.5 * wy;
                let mut sep = f64::INFINITY;
                if spec.cells[0] > 1 {
                    sep = sep.min(metric.eval(&[0.0, yt], &[wx, yt]));
                }
                if spec.cells[1] > 1 {
                    sep = sep.min(metric.eval(&[0.0, yt - wy], &[0.0, yt]));
                }
                (h, sep)
            }
        };
        let diameter = {
            let mut lo_c = vec![0; d];
            let corners: Vec<Vec<f64>> = (0..(1usize << d))
                .map(|mask| {
                    for a in 0..d {
                        lo_c[a] = if mask >> a & 1 == 1 { spec.cells[a] - 1 } else { 0 };
                    }
                    grid.center(&lo_c)
                })
                .collect();
            let mut diam: f64 = 0.0;
            for p in &corners {
                for q in &corners {
                    diam = diam.max(metric.eval(p, q));
                }
            }
            diam
        };
        let min_sep = if n == 1 { 0.0 } else { min_sep };
        let outside = spec.bounds.iter().flatten().any(|b| *b == Boundary::Window);
        let mut space = MetricSample {
            n,
            dim: d,
            coords,
            metric: Metric::Formula(metric),
            h,
            grid: Some(grid),
            outside,
            cache: None,
            diameter,
            min_sep,
        };
        space.fill_cache();
        Ok(space)
    }

    fn fill_cache(&mut self) {
        if self.n > DENSE_CACHE_LIMIT {
            return;
        }
        if let Metric::Formula(kind) = self.metric {
            let n = self.n;
            let dim = self.dim;
            let coords = &self.coords;
            let mut m = vec![0.0; n * n];
            m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                let a = &coords[i * dim..(i + 1) * dim];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 0.0 } else { kind.eval(a, &coords[j * dim..(j + 1) * dim]) };
                }
            });
            self.cache = Some(m);
        }
    }

    /// Number of real sample points.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of states: the real points plus the outside sink when present.
    pub fn states(&self) -> usize {
        self.n + usize::from(self.outside)
    }

    pub fn outside(&self) -> Option<usize> {
        self.outside.then_some(self.n)
    }

    pub fn is_outside(&self, i: usize) -> bool {
        self.outside && i == self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest distance between two distinct real points (0 for a singleton).
    pub fn min_separation(&self) -> f64 {
        self.min_sep
    }

    pub fn grid_info(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn metric_kind(&self) -> Option<MetricKind> {
        match self.metric {
            Metric::Formula(k) => Some(k),
            Metric::Matrix(_) => None,
        }
    }

    pub fn has_coords(&self) -> bool {
        self.dim > 0
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Distance between states; the outside state is infinitely far from every real point.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        if i >= self.n || j >= self.n {
            return f64::INFINITY;
        }
        match (&self.metric, &self.cache) {
            (Metric::Matrix(m), _) => m[i * self.n + j],
            (_, Some(c)) => c[i * self.n + j],
            (Metric::Formula(k), None) => k.eval(self.coords(i), self.coords(j)),
        }
    }

    /// Distance between arbitrary coordinate vectors under the formula metric.
    pub fn d_coords(&self, a: &[f64], b: &[f64]) -> Result<f64, SpaceError> {
        match self.metric {
            Metric::Formula(k) => Ok(k.eval(a, b)),
            Metric::Matrix(_) => Err(SpaceError::NoCoordinates),
        }
    }

    /// Distance from a coordinate vector to a real sample point.
    pub fn d_to_point(&self, a: &[f64], j: usize) -> Result<f64, SpaceError> {
        if j >= self.n {
            return Err(SpaceError::OutOfRange(j));
        }
        self.d_coords(a, self.coords(j))
    }

    /// Nearest real sample point to a coordinate vector.
    pub fn nearest(&self, x: &[f64]) -> Result<Snap, SpaceError> {
        if !self.has_coords() {
            return Err(SpaceError::NoCoordinates);
        }
        if x.len() != self.dim {
            return Err(SpaceError::Grid(format!(
                "point of dimension {} on a space of dimension {}",
                x.len(),
                self.dim
            )));
        }
        let kind = self.metric_kind().ok_or(SpaceError::NoCoordinates)?;
        if let Some(g) = &self.grid {
            let mut multi = vec![0; self.dim];
            let mut beyond = None;
            for a in 0..self.dim {
                let v = x[a];
                if v.is_nan() {
                    return Err(SpaceError::Grid("NaN coordinate".into()));
                }
                if v < g.lo[a] && beyond.is_none() {
                    beyond = Some((a, false));
                } else if v > g.hi[a] && beyond.is_none() {
                    beyond = Some((a, true));
                }
                let raw = ((v - g.lo[a]) / g.width[a]).floor();
                multi[a] = raw.clamp(0.0, (g.cells[a] - 1) as f64) as usize;
            }
            let index = g.index_of(&multi);
            if kind == MetricKind::HyperbolicHalfPlane && beyond.is_none() {
                // the Euclidean cell is not always the hyperbolic nearest; check the ring
                let mut best = (kind.eval(x, self.coords(index)), index);
                g.for_each_neighbor(index, |j| {
                    let dj = kind.eval(x, self.coords(j));
                    if dj < best.0 || (dj == best.0 && j < best.1) {
                        best = (dj, j);
                    }
                });
                return Ok(Snap { index: best.1, dist: best.0, beyond });
            }
            let dist = if kind == MetricKind::HyperbolicHalfPlane && !(x[1] > 0.0) {
                f64::INFINITY
            } else {
                kind.eval(x, self.coords(index))
            };
            return Ok(Snap { index, dist, beyond });
        }
        let mut best = (f64::INFINITY, 0);
        for j in 0..self.n {
            let dj = kind.eval(x, self.coords(j));
            if dj < best.0 {
                best = (dj, j);
            }
        }
        Ok(Snap { index: best.1, dist: best.0, beyond: None })
    }

    /// `min over s ∈ S of d(x, s)`; the outside state only matches itself.
    pub fn dist_to_set(&self, x: usize, set: &PointSet) -> Result<f64, SpaceError> {
        if x >= self.states() {
            return Err(SpaceError::OutOfRange(x));
        }
        if set.is_empty() {
            return Err(SpaceError::EmptySet);
        }
        if set.contains(x) {
            return Ok(0.0);
        }
        let mut best = f64::INFINITY;
        for s in set.iter() {
            best = best.min(self.d(x, s));
        }
        Ok(best)
    }

    /// The set of all states.
    pub fn full_set(&self) -> PointSet {
        PointSet::full(self.states())
    }

    pub fn empty_set(&self) -> PointSet {
        PointSet::empty(self.states())
    }

    /// Real points whose coordinates satisfy `pred`.
    pub fn select(&self, pred: impl Fn(&[f64]) -> bool) -> PointSet {
        let mut s = self.empty_set();
        for i in 0..self.n {
            if self.has_coords() && pred(self.coords(i)) {
                s.insert(i);
            }
        }
        s
    }

    /// One-cell dilation on grids; the identity on abstract finite spaces.
    pub fn closure(&self, set: &PointSet) -> PointSet {
        let Some(g) = &self.grid else { return set.clone() };
        let mut out = set.clone();
        for i in set.iter() {
            if i < self.n {
                g.for_each_neighbor(i, |j| out.insert(j));
            }
        }
        out
    }

    /// One-cell erosion on grids; window-face cells also need the outside state.
    pub fn interior(&self, set: &PointSet) -> PointSet {
        let Some(g) = &self.grid else { return set.clone() };
        let has_out = self.outside().is_some_and(|o| set.contains(o));
        let mut out = self.empty_set();
        for i in set.iter() {
            if i >= self.n {
                out.insert(i);
                continue;
            }
            let mut keep = true;
            g.for_each_neighbor(i, |j| keep &= set.contains(j));
            if keep && !has_out && g.on_window_face(&g.multi_index(i)) {
                keep = false;
            }
            if keep {
                out.insert(i);
            }
        }
        out
    }

    /// Moore neighbors of a real grid point, including the point itself.
    pub fn neighborhood(&self, i: usize) -> Vec<usize> {
        match &self.grid {
            Some(g) if i < self.n => {
                let mut v = Vec::new();
                g.for_each_neighbor(i, |j| v.push(j));
                v
            }
            _ => vec![i],
        }
    }

    /// Real points within distance `< r` of `i` (the sampled open ball).
    pub fn ball(&self, i: usize, r: f64) -> Vec<usize> {
        if i >= self.n {
            return vec![i];
        }
        (0..self.n).filter(|&j| self.d(i, j) < r).collect()
    }
}

fn validate_matrix(n: usize, flat: &[f64], d: impl Fn(usize, usize) -> f64 + Sync) -> Result<(), SpaceError> {
    for i in 0..n {
        if flat[i * n + i] != 0.0 {
            return Err(SpaceError::NonzeroDiagonal { i, value: flat[i * n + i] });
        }
        for j in 0..n {
            let v = flat[i * n + j];
            if !v.is_finite() || v < 0.0 {
                return Err(SpaceError::Negative { i, j, value: v });
            }
            if i != j && v == 0.0 {
                return Err(SpaceError::ZeroDistance { i: i.min(j), j: i.max(j) });
            }
            if j > i && v != flat[j * n + i] {
                return Err(SpaceError::Asymmetric { i, j, a: v, b: flat[j * n + i] });
            }
        }
    }
    let slack = |s: f64| 1e-12 * s.max(1.0);
    if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
        let bad = (0..n).into_par_iter().find_map_first(|i| {
            for j in 0..n {
                let dij = d(i, j);
                for k in 0..n {
                    let sum = dij + d(j, k);
                    let dik = d(i, k);
                    if dik > sum + slack(sum) {
                        return Some(SpaceError::Triangle { i, j, k, dik, sum });
                    }
                }
            }
            None
        });
        if let Some(e) = bad {
            return Err(e);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7269_616e);
        for _ in 0..TRIANGLE_SAMPLES {
            let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            let sum = d(i, j) + d(j, k);
            let dik = d(i, k);
            if dik > sum + slack(sum) {
                return Err(SpaceError::Triangle { i, j, k, dik, sum });
            }
        }
    }
    Ok(())
}

fn pair_extremes(n: usize, d: impl Fn(usize, usize) -> f64 + Sync) -> (f64, f64) {
    if n < 2 {
        return (0.0, 0.0);
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut hi: f64 = 0.0;
            let mut lo = f64::INFINITY;
            for j in i + 1..n {
                let v = d(i, j);
                hi = hi.max(v);
                lo = lo.min(v);
            }
            (hi, lo)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)))
}

fn first_duplicate(n: usize, d: impl Fn(usize, usize) -> f64) -> (usize, usize) {
    for i in 0..n {
        for j in i + 1..n {
            if d(i, j) <= 0.0 {
                return (i, j);
            }
        }
    }
    (0, 0)
}

/// Membership bitset over the states of a [`MetricSample`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PointSet {
    bits: FixedBitSet,
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl PointSet {
    pub fn empty(universe: usize) -> Self {
        PointSet { bits: FixedBitSet::with_capacity(universe) }
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        PointSet { bits }
    }

    pub fn from_indices(universe: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = PointSet::empty(universe);
        for i in idx {
            s.insert(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.bits.contains(i)
    }

    /// Panics when `i` is outside the universe.
    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.bits.insert(i);
    }

    /// Inserts and reports whether `i` was new.
    #[inline]
    pub fn put(&mut self, i: usize) -> bool {
        !self.bits.put(i)
    }

    pub fn remove(&mut self, i: usize) {
        self.bits.set(i, false);
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut b = self.bits.clone();
        b.union_with(&other.bits);
        PointSet { bits: b }
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        let mut b = self.bits.clone();
        b.intersect_with(&other.bits);
        PointSet { bits: b }
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        let mut b = self.bits.clone();
        b.difference_with(&other.bits);
        PointSet { bits: b }
    }

    pub fn complement(&self) -> PointSet {
        let mut b = self.bits.clone();
        b.toggle_range(..);
        PointSet { bits: b }
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn union_with(&mut self, other: &PointSet) {
        self.bits.union_with(&other.bits);
    }

    /// The same set with the outside state dropped, if the space has one.
    pub fn real(&self, space: &MetricSample) -> PointSet {
        let mut s = self.clone();
        if let Some(o) = space.outside() {
            s.remove(o);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square_cycle() -> Vec<Vec<f64>> {
        // shortest paths on the 4-cycle 0-1-2-3-0, computed by Floyd–Warshall
        let mut m = vec![vec![f64::INFINITY; 4]; 4];
        for i in 0..4 {
            m[i][i] = 0.0;
            m[i][(i + 1) % 4] = 1.0;
            m[(i + 1) % 4][i] = 1.0;
        }
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    if m[i][k] + m[k][j] < m[i][j] {
                        m[i][j] = m[i][k] + m[k][j];
                    }
                }
            }
        }
        m
    }

    #[test]
    fn singleton_space() {
        let s = MetricSample::finite(&[vec![0.0]]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.h(), 0.0);
        assert_eq!(s.diameter(), 0.0);
    }

    #[test]
    fn triangle_violation_is_rejected() {
        let m = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(matches!(MetricSample::finite(&m), Err(SpaceError::Triangle { .. })));
    }

    #[test]
    fn square_cycle_metric() {
        let s = MetricSample::finite(&square_cycle()).unwrap();
        assert_eq!(s.d(0, 2), 2.0);
        assert_eq!(s.d(1, 3), 2.0);
        assert_eq!(s.diameter(), 2.0);
    }

    #[test]
    fn rejects_bad_matrices() {
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(MetricSample::finite(&asym), Err(SpaceError::Asymmetric { .. })));
        let neg = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(matches!(MetricSample::finite(&neg), Err(SpaceError::Negative { .. })));
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(matches!(MetricSample::finite(&zero), Err(SpaceError::ZeroDistance { .. })));
        let ragged = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(MetricSample::finite(&ragged), Err(SpaceError::Shape { .. })));
    }

    #[test]
    fn unit_grid_centers() {
        let s = GridSpec::new(&[(0.0, 1.0)], &[10]).build().unwrap();
        for i in 0..10 {
            assert_abs_diff_eq!(s.coords(i)[0], 0.05 + 0.1 * i as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.h(), 0.1, epsilon = 1e-12);
        assert!(s.outside().is_none());
    }

    #[test]
    fn euclidean_pythagoras() {
        assert_eq!(MetricKind::Euclidean.eval(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn hyperbolic_vertical_distance() {
        let e = std::f64::consts::E;
        let d = MetricKind::HyperbolicHalfPlane.eval(&[0.0, 1.0], &[0.0, e]);
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-14);
        // the vertical segment is the geodesic: its length ∫ dy / y
        let steps = 20_000;
        let mut len = 0.0;
        for k in 0..steps {
            let y0 = 1.0 + (e - 1.0) * k as f64 / steps as f64;
            let y1 = 1.0 + (e - 1.0) * (k + 1) as f64 / steps as f64;
            let ym = 0.5 * (y0 + y1);
            len += (y1 - y0) / ym;
        }
        assert_abs_diff_eq!(len, d, epsilon = 1e-8);
    }

    #[test]
    fn hyperbolic_needs_positive_heights() {
        let r = GridSpec::new(&[(0.0, 1.0), (0.0, 1.0)], &[4, 4])
            .metric(MetricKind::HyperbolicHalfPlane)
            .build();
        assert!(matches!(r, Err(SpaceError::NonpositiveHeight(_))));
    }

    #[test]
    fn hyperbolic_grid_h_is_largest_cell() {
        let s = GridSpec::new(&[(0.0, 1.0), (0.5, 4.5)], &[4, 8])
            .metric(MetricKind::HyperbolicHalfPlane)
            .build()
            .unwrap();
        let g = s.grid_info().unwrap();
        for i in 0..s.len() {
            let m = g.multi_index(i);
            let lo: Vec<f64> = (0..2).map(|a| g.lo[a] + m[a] as f64 * g.width[a]).collect();
            let hi: Vec<f64> = (0..2).map(|a| lo[a] + g.width[a]).collect();
            let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [lo[0], hi[1]], [hi[0], hi[1]]];
            for p in &corners {
                for q in &corners {
                    assert!(MetricKind::HyperbolicHalfPlane.eval(p, q) <= s.h() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn dist_to_set_examples() {
        let s = GridSpec::new(&[(0.0, 1.0)], &[10]).build().unwrap();
        let set = s.select(|x| x[0] >= 0.75);
        assert_abs_diff_eq!(s.dist_to_set(0, &set).unwrap(), 0.7, epsilon = 1e-12);
        assert_eq!(s.dist_to_set(8, &set).unwrap(), 0.0);
        let single = PointSet::from_indices(s.states(), [3]);
        assert_abs_diff_eq!(s.dist_to_set(0, &single).unwrap(), s.d(0, 3), epsilon = 0.0);
        assert_eq!(s.dist_to_set(0, &s.empty_set()), Err(SpaceError::EmptySet));
    }

    #[test]
    fn closure_and_interior_on_a_line() {
        let s = GridSpec::new(&[(0.0, 1.0)], &[10]).build().unwrap();
        let set = PointSet::from_indices(10, [3, 4, 5]);
        assert_eq!(s.closure(&set).to_vec(), vec![2, 3, 4, 5, 6]);
        assert_eq!(s.interior(&set).to_vec(), vec![4]);
        // a domain face never erodes
        assert_eq!(s.interior(&s.full_set()), s.full_set());
    }

    #[test]
    fn window_faces_need_the_outside_state() {
        let s = GridSpec::new(&[(0.0, 1.0)], &[10])
            .boundary(0, Boundary::Domain, Boundary::Window)
            .build()
            .unwrap();
        let o = s.outside().unwrap();
        assert_eq!(s.states(), 11);
        let right = PointSet::from_indices(11, 5..10);
        assert!(!s.interior(&right).contains(9));
        let with_out = PointSet::from_indices(11, (5..10).chain([o]));
        let int = s.interior(&with_out);
        assert!(int.contains(9) && int.contains(o) && !int.contains(5));
        // the outside state adds nothing to a closure
        assert_eq!(s.closure(&PointSet::from_indices(11, [o])).to_vec(), vec![o]);
        assert_eq!(s.d(o, 3), f64::INFINITY);
    }

    #[test]
    fn nearest_reports_faces() {
        let s = GridSpec::new(&[(0.0, 1.0)], &[10]).windowed().build().unwrap();
        let snap = s.nearest(&[1.3]).unwrap();
        assert_eq!(snap.index, 9);
        assert_eq!(snap.beyond, Some((0, true)));
        let snap = s.nearest(&[0.31]).unwrap();
        assert_eq!(snap.index, 3);
        assert!(snap.beyond.is_none());
    }

    #[test]
    fn point_cloud_space() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 0.0]];
        let s = MetricSample::from_points(&pts, MetricKind::Euclidean).unwrap();
        assert_eq!(s.d(0, 1), 5.0);
        assert_eq!(s.min_separation(), 3.0);
        assert_eq!(s.diameter(), 5.0);
        let dup = vec![vec![1.0], vec![1.0]];
        assert!(MetricSample::from_points(&dup, MetricKind::Euclidean).is_err());
    }
}
