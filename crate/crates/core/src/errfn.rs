//! Error functions: strictly positive tolerances per state, and the finite
//! calibration searches that produce them.
//!
//! Each calibration returns, per point `x`, the largest rung `r` of a fixed
//! radius ladder such that every sampled `y` with `d(x, y) < r` satisfies the
//! relevant implication. The smallest rung is the minimum separation of the
//! space, so the result is always positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conley::{forward_sweep, SweepOptions};
use crate::error::{Error, ErrFnError};
use crate::space::{MetricSample, PointSet};
use crate::systems::{SampledMap, System, TimeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Constant,
    Formula,
    Values,
    Calibrated,
    TrapDerived,
}

/// Closed-form tolerance profiles on coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    /// `ε(x) = offset + slope · x[axis]`.
    Affine { axis: usize, offset: f64, slope: f64 },
    /// `ε(x) = offset + slope · |x[axis]|`.
    Abs { axis: usize, offset: f64, slope: f64 },
}

impl Formula {
    /// `x`, `y`, `|x|`, `|y|`.
    pub fn parse(name: &str) -> Option<Formula> {
        let f = |axis| Formula::Affine { axis, offset: 0.0, slope: 1.0 };
        let g = |axis| Formula::Abs { axis, offset: 0.0, slope: 1.0 };
        match name.trim() {
            "x" => Some(f(0)),
            "y" => Some(f(1)),
            "|x|" => Some(g(0)),
            "|y|" => Some(g(1)),
            _ => None,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Formula::Affine { axis, offset, slope } => offset + slope * x[axis],
            Formula::Abs { axis, offset, slope } => offset + slope * x[axis].abs(),
        }
    }

    fn axis(self) -> usize {
        match self {
            Formula::Affine { axis, .. } | Formula::Abs { axis, .. } => axis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ErrorSpec {
    Constant(f64),
    Values(Vec<f64>),
    Formula(Formula),
}

/// A strictly positive tolerance per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFunction {
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl ErrorFunction {
    /// Per-state values; the outside state, if any, is last.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The constant function `c`; `c` must be positive.
    pub fn constant(space: &MetricSample, c: f64) -> ErrorFunction {
        ErrorFunction { values: vec![c; space.states()], provenance: Provenance::Constant }
    }

    /// Smallest value over the real points.
    pub fn min_real(&self, space: &MetricSample) -> f64 {
        self.values[..space.len()].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> ErrorFunction {
        ErrorFunction { values: self.values.iter().map(|v| v * factor).collect(), provenance: self.provenance }
    }

    /// Pointwise minimum.
    pub fn min_with(&self, other: &ErrorFunction) -> ErrorFunction {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.min(*b)).collect();
        ErrorFunction { values, provenance: Provenance::Calibrated }
    }

    /// Value at the sample point nearest to raw coordinates (clamped to the grid).
    pub fn at_coords(&self, space: &MetricSample, x: &[f64]) -> f64 {
        match space.nearest(x) {
            Ok(s) => self.values[s.index],
            Err(_) => self.min_real(space),
        }
    }

    fn from_values(space: &MetricSample, mut real: Vec<f64>, provenance: Provenance) -> ErrorFunction {
        if space.outside().is_some() {
            let top = real.iter().copied().fold(0.0, f64::max);
            real.push(if top > 0.0 { top } else { 1.0 });
        }
        ErrorFunction { values: real, provenance }
    }
}

/// Validated error function from a constant, explicit values, or a formula.
pub fn make_error(space: &MetricSample, spec: &ErrorSpec) -> Result<ErrorFunction, ErrFnError> {
    let n = space.len();
    let (values, provenance) = match spec {
        ErrorSpec::Constant(c) => (vec![*c; n], Provenance::Constant),
        ErrorSpec::Values(v) => {
            if v.len() != n && v.len() != space.states() {
                return Err(ErrFnError::Length { got: v.len(), expected: n });
            }
            (v[..n].to_vec(), Provenance::Values)
        }
        ErrorSpec::Formula(f) => {
            if !space.has_coords() || f.axis() >= space.dim() {
                return Err(ErrFnError::UnknownFormula(format!("{f:?} on a space of dimension {}", space.dim())));
            }
            ((0..n).map(|i| f.eval(space.coords(i))).collect(), Provenance::Formula)
        }
    };
    if let Some((point, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(ErrFnError::Nonpositive { point, value });
    }
    Ok(ErrorFunction::from_values(space, values, provenance))
}

/// `2 · (snap + h)`: the smallest tolerance that cannot be an artifact of snapping.
pub fn snap_bound(space: &MetricSample, snap: f64) -> f64 {
    2.0 * (snap + space.h())
}

/// Rejects tolerances below the snap bound at any real point.
pub fn check_snap_bound(space: &MetricSample, eps: &ErrorFunction, snap: f64) -> Result<(), ErrFnError> {
    let bound = snap_bound(space, snap);
    let slack = bound * 1e-12;
    for i in 0..space.len() {
        if eps.get(i) + slack < bound {
            return Err(ErrFnError::BelowSnapBound { point: i, value: eps.get(i), bound });
        }
    }
    Ok(())
}

/// Radius rungs `{min separation} ∪ {b · 2^m : m = 0..40}` capped at the diameter,
/// where `b` is the resolution (or the minimum separation on finite spaces).
pub fn radius_ladder(space: &MetricSample) -> Vec<f64> {
    let diam = space.diameter();
    let sep = space.min_separation();
    if diam <= 0.0 {
        return vec![1.0];
    }
    let base = if space.h() > 0.0 { space.h() } else { sep };
    let mut rungs: Vec<f64> = (0..=40).map(|m| (base * 2f64.powi(m)).min(diam)).collect();
    rungs.push(sep);
    rungs.sort_by(f64::total_cmp);
    rungs.dedup();
    rungs
}

/// Largest rung not exceeding the nearest violator's distance.
fn pick_rung(ladder: &[f64], nearest_violator: f64) -> f64 {
    let cap = *ladder.last().unwrap();
    if !nearest_violator.is_finite() {
        return cap;
    }
    ladder.iter().rev().copied().find(|&r| r <= nearest_violator).unwrap_or(ladder[0])
}

fn calibrate(space: &MetricSample, violates: impl Fn(usize, usize) -> bool + Sync) -> ErrorFunction {
    let ladder = radius_ladder(space);
    let n = space.len();
    let real: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut nearest = f64::INFINITY;
            for y in 0..n {
                let d = space.d(x, y);
                if d < nearest && violates(x, y) {
                    nearest = d;
                }
            }
            pick_rung(&ladder, nearest)
        })
        .collect();
    ErrorFunction::from_values(space, real, Provenance::Calibrated)
}

/// `δ` with `d(x, y) < δ(x) ⇒ ½ε(x) < ε(y) < (3/2)ε(x)`.
pub fn calibrate_ratio(space: &MetricSample, eps: &ErrorFunction) -> ErrorFunction {
    calibrate(space, |x, y| {
        let (ex, ey) = (eps.get(x), eps.get(y));
        !(0.5 * ex < ey && ey < 1.5 * ex)
    })
}

/// `δ` with `d(x, y) < δ(x) ⇒ d(φ(x), φ(y)) < ε(φ(x))` for a sampled map.
pub fn calibrate_pushforward_map(space: &MetricSample, map: &SampledMap, eps: &ErrorFunction) -> ErrorFunction {
    calibrate(space, |x, y| {
        let (fx, fy) = (map.apply(x), map.apply(y));
        !(space.d(fx, fy) < eps.get(fx))
    })
}

/// `δ` with `d(x, y) < δ(x) ⇒ d(Φ(t,x), Φ(t,y)) < ε(Φ(t,x))` at `steps + 1`
/// equally spaced times in `[0, horizon]`, on unsnapped flow positions.
pub fn calibrate_pushforward_flow(
    space: &MetricSample,
    flow: &System,
    eps: &ErrorFunction,
    horizon: f64,
    steps: usize,
) -> Result<ErrorFunction, Error> {
    let n = space.len();
    let steps = steps.max(1);
    let times: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
    let mut pos: Vec<Vec<Vec<f64>>> = Vec::with_capacity(times.len());
    let mut tol: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for &t in &times {
        let p: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| flow.flow(t, space.coords(i)))
            .collect::<Result<_, _>>()?;
        tol.push(p.iter().map(|q| eps.at_coords(space, q)).collect());
        pos.push(p);
    }
    let metric = space.metric_kind().ok_or(crate::error::SpaceError::NoCoordinates)?;
    Ok(calibrate(space, |x, y| {
        (0..times.len()).any(|k| !(metric.eval(&pos[k][x], &pos[k][y]) < tol[k][x]))
    }))
}

/// Per-system dispatch: one map step for discrete systems, a 20-step time
/// ladder over `[0, horizon]` for flows.
pub fn calibrate_pushforward(
    space: &MetricSample,
    system: &System,
    eps: &ErrorFunction,
    horizon: f64,
) -> Result<ErrorFunction, Error> {
    match system.time_kind() {
        TimeKind::Discrete => Ok(calibrate_pushforward_map(space, &system.sample(space)?, eps)),
        TimeKind::Continuous => calibrate_pushforward_flow(space, system, eps, horizon, 20),
    }
}

/// Distance with the conventions used for trap-derived tolerances: the
/// outside state only sees itself, and an empty target is `diameter + 1` away.
fn conventional_dist(space: &MetricSample, x: usize, set: &PointSet) -> f64 {
    let empty = space.diameter() + 1.0;
    if space.is_outside(x) {
        return if set.contains(x) { 0.0 } else { empty };
    }
    let mut best = f64::INFINITY;
    for s in set.iter() {
        if !space.is_outside(s) {
            best = best.min(space.d(x, s));
        }
    }
    if best.is_finite() {
        best
    } else {
        empty
    }
}

#[derive(Debug, Clone)]
pub struct TrapTolerance {
    pub eps: ErrorFunction,
    /// Sampled forward images whose tolerance balls were checked.
    pub checked_images: usize,
}

/// `ε(x) = min{½(dist(x, closure(Φ(𝕋≥T×𝒯))) + dist(x, X∖𝒯)), 1}`, verified so
/// that every sampled forward image has its ε-ball inside the region.
pub fn trapping_error(
    space: &MetricSample,
    system: &System,
    region: &PointSet,
    horizon: f64,
    opts: &SweepOptions,
) -> Result<TrapTolerance, Error> {
    let sweep = forward_sweep(space, system, region, horizon, opts)?;
    let closed = space.closure(&sweep);
    if !closed.is_subset(&space.interior(region)) {
        let witness = closed.difference(&space.interior(region)).iter().next().unwrap_or(0);
        return Err(ErrFnError::NotTrapping { horizon, witness }.into());
    }
    Ok(trap_tolerance(space, region, &sweep)?)
}

/// The trap-derived tolerance for a region whose swept image is already known.
pub fn trap_tolerance(space: &MetricSample, region: &PointSet, sweep: &PointSet) -> Result<TrapTolerance, ErrFnError> {
    let closed = space.closure(sweep);
    let outside_region = region.complement();
    let values: Vec<f64> = (0..space.states())
        .into_par_iter()
        .map(|x| {
            let e = 0.5 * (conventional_dist(space, x, &closed) + conventional_dist(space, x, &outside_region));
            e.min(1.0)
        })
        .collect();
    if let Some((point, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(ErrFnError::Nonpositive { point, value });
    }
    let eps = ErrorFunction { values, provenance: Provenance::TrapDerived };
    let mut checked = 0;
    for s in sweep.iter() {
        checked += 1;
        if space.is_outside(s) {
            continue;
        }
        let r = eps.get(s);
        if let Some(escapee) = (0..space.len()).find(|&y| space.d(s, y) < r && !region.contains(y)) {
            return Err(ErrFnError::Verification { image: s, escapee });
        }
    }
    Ok(TrapTolerance { eps, checked_images: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::GridSpec;
    use crate::systems::{Builtin, PointMap};

    fn line(lo: f64, hi: f64, n: usize) -> MetricSample {
        GridSpec::new(&[(lo, hi)], &[n]).build().unwrap()
    }

    #[test]
    fn make_error_examples() {
        let s = line(0.0, 1.0, 10);
        let c = make_error(&s, &ErrorSpec::Constant(0.1)).unwrap();
        assert_eq!(c.values(), &[0.1; 10]);
        let g = line(1.0, 2.0, 10);
        let f = make_error(&g, &ErrorSpec::Formula(Formula::parse("x").unwrap())).unwrap();
        for i in 0..10 {
            assert_eq!(f.get(i), g.coords(i)[0]);
        }
        assert!(matches!(
            make_error(&s, &ErrorSpec::Constant(0.0)),
            Err(ErrFnError::Nonpositive { point: 0, .. })
        ));
    }

    #[test]
    fn constant_ratio_gives_the_cap() {
        let s = line(0.0, 1.0, 50);
        let e = make_error(&s, &ErrorSpec::Constant(0.3)).unwrap();
        let d = calibrate_ratio(&s, &e);
        let cap = *radius_ladder(&s).last().unwrap();
        assert!(d.values().iter().all(|&v| v == cap));
    }

    #[test]
    fn ratio_band_by_exhaustive_scan() {
        let s = line(1.0, 2.0, 100);
        let e = make_error(&s, &ErrorSpec::Formula(Formula::parse("x").unwrap())).unwrap();
        let d = calibrate_ratio(&s, &e);
        for x in 0..100 {
            assert!(d.get(x) > 0.0);
            for y in 0..100 {
                if s.d(x, y) < d.get(x) {
                    let (ex, ey) = (e.get(x), e.get(y));
                    assert!(0.5 * ex < ey && ey < 1.5 * ex);
                }
            }
        }
    }

    #[test]
    fn two_point_ratio() {
        let s = MetricSample::finite(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = make_error(&s, &ErrorSpec::Values(vec![1.0, 10.0])).unwrap();
        let d = calibrate_ratio(&s, &e);
        assert!(d.get(0) <= 1.0 && d.get(1) <= 1.0);
    }

    #[test]
    fn identity_pushforward() {
        let s = line(0.0, 1.0, 40);
        let id = System::map(PointMap::Identity).sample(&s).unwrap();
        let cap = *radius_ladder(&s).last().unwrap();
        let wide = make_error(&s, &ErrorSpec::Constant(2.0 * s.diameter())).unwrap();
        assert!(calibrate_pushforward_map(&s, &id, &wide).values().iter().all(|&v| v == cap));
        // with a small tolerance the first excluded pair sits at distance ≥ ε
        let e = make_error(&s, &ErrorSpec::Constant(0.05)).unwrap();
        let d = calibrate_pushforward_map(&s, &id, &e);
        for x in 0..40 {
            assert!(d.get(x) >= s.min_separation());
            for y in 0..40 {
                if s.d(x, y) < d.get(x) {
                    assert!(s.d(x, y) < 0.05);
                }
            }
        }
    }

    #[test]
    fn doubling_pushforward_band() {
        let s = line(0.0, 1.0, 100);
        let e = make_error(&s, &ErrorSpec::Constant(0.1)).unwrap();
        let map = System::map(PointMap::Doubling).sample(&s).unwrap();
        let d = calibrate_pushforward_map(&s, &map, &e);
        for x in 0..100 {
            assert!(d.get(x) > 0.0 && d.get(x) <= 0.05 + 1e-12);
            for y in 0..100 {
                if s.d(x, y) < d.get(x) {
                    assert!(s.d(map.apply(x), map.apply(y)) < e.get(map.apply(x)));
                }
            }
        }
    }

    #[test]
    fn trap_tolerance_on_logistic() {
        let s = GridSpec::centered(0.0, 1.0, 101).build().unwrap();
        let sys = System::builtin(Builtin::Logistic);
        let region = s.select(|x| x[0] > 0.5);
        let opts = SweepOptions::default();
        let tt = trapping_error(&s, &sys, &region, 1.0, &opts).unwrap();
        assert!(tt.eps.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        let sweep = forward_sweep(&s, &sys, &region, 1.0, &opts).unwrap();
        for p in sweep.iter() {
            for y in s.ball(p, tt.eps.get(p)) {
                assert!(region.contains(y));
            }
        }
    }

    #[test]
    fn whole_space_uses_the_empty_convention() {
        let s = line(-1.0, 1.0, 20);
        let sys = System::map(PointMap::Scale(0.5));
        let full = s.full_set();
        let opts = SweepOptions::default();
        let tt = trapping_error(&s, &sys, &full, 1.0, &opts).unwrap();
        // X∖𝒯 is empty, so its distance is diameter + 1 and every value clips to 1
        assert!(0.5 * (s.diameter() + 1.0) > 1.0);
        assert!(tt.eps.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn non_trapping_is_rejected() {
        let s = line(0.0, 1.0, 20);
        let sys = System::map(PointMap::Doubling);
        let region = s.select(|x| x[0] < 0.3);
        let r = trapping_error(&s, &sys, &region, 1.0, &SweepOptions::default());
        assert!(matches!(r, Err(Error::ErrFn(ErrFnError::NotTrapping { .. }))));
    }

    #[test]
    fn snap_bound_enforced() {
        let s = line(0.0, 1.0, 10);
        let e = make_error(&s, &ErrorSpec::Constant(0.1)).unwrap();
        assert!(check_snap_bound(&s, &e, 0.0).is_err());
        let e = make_error(&s, &ErrorSpec::Constant(0.2)).unwrap();
        assert!(check_snap_bound(&s, &e, 0.0).is_ok());
    }
}
