//! Pipeline orchestration behind `chainrec run`: builds the space, system
//! and tolerance from a [`RunConfig`], runs one pipeline, and writes
//! `summary.json`, `report.txt`, result CSVs and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chains::{auto_levels, chain_recurrent_limit, ChainGraph};
use crate::conley::{attracting_set, basin, conley_decomposition, is_trapping, TrapKind, TrapVerdict};
use crate::config::{Pipeline, RunConfig, SpaceKind, SystemKind};
use crate::errfn::{make_error, snap_bound, ErrorFunction, ErrorSpec, Formula};
use crate::error::{ErrFnError, Error, Result, SystemError};
use crate::lyapunov::{
    flow_lyapunov, global_lyapunov, strong_region_lyapunov, truncation_tolerance, verify_field, verify_global,
    GlobalOptions, Verification,
};
use crate::space::{GridSpec, MetricSample, PointSet};
use crate::systems::{Builtin, Ode, PointMap, SampledMap, System, TimeKind};

/// Witnesses kept per check in the summary and report.
const WITNESS_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Hard checks decide the exit status.
    pub hard: bool,
    /// Total number of witnesses; only the first few are listed.
    pub failures: usize,
    pub witnesses: Vec<Value>,
}

impl Check {
    fn new<T: Serialize>(name: &str, hard: bool, witnesses: &[T]) -> Check {
        Check {
            name: name.to_string(),
            passed: witnesses.is_empty(),
            hard,
            failures: witnesses.len(),
            witnesses: witnesses.iter().take(WITNESS_LIMIT).map(|w| json!(w)).collect(),
        }
    }
}

/// Result of a run: the summary document and the exit status it implies.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Value,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    /// 0 when every hard check passed, 2 otherwise.
    pub exit: i32,
}

struct Ctx {
    space: MetricSample,
    system: System,
    step: System,
    map: SampledMap,
}

#[derive(Default)]
struct Run {
    sets: BTreeMap<String, usize>,
    components: Option<usize>,
    checks: Vec<Check>,
    files: Vec<String>,
    notes: Vec<String>,
    extra: serde_json::Map<String, Value>,
    epsilon: Option<Value>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// Numeric rows of a CSV; a first row that does not parse is taken as a header.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match rec.iter().map(str::parse::<f64>).collect::<std::result::Result<Vec<_>, _>>() {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Config(format!("{}: row {} is not numeric", path.display(), i + 1))),
        }
    }
    Ok(rows)
}

fn index(v: f64, what: &str, path: &Path) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{}: {what} {v} is not an index", path.display())))
    }
}

fn build_space(cfg: &RunConfig) -> Result<MetricSample> {
    let s = &cfg.space;
    Ok(match s.kind {
        SpaceKind::Grid => {
            let bx: Vec<(f64, f64)> = (0..s.cells.len())
                .map(|a| {
                    if s.centered {
                        let h = (s.hi[a] - s.lo[a]) / (s.cells[a] - 1) as f64;
                        (s.lo[a] - 0.5 * h, s.hi[a] + 0.5 * h)
                    } else {
                        (s.lo[a], s.hi[a])
                    }
                })
                .collect();
            let mut spec = GridSpec::new(&bx, &s.cells).metric(s.metric);
            for (a, b) in s.boundary.iter().enumerate() {
                spec = spec.boundary(a, b[0], b[1]);
            }
            spec.build()?
        }
        SpaceKind::Finite => {
            let path = s.matrix.as_deref().unwrap();
            MetricSample::finite(&read_rows(path)?)?
        }
        SpaceKind::Points => {
            let path = s.points.as_deref().unwrap();
            MetricSample::from_points(&read_rows(path)?, s.metric)?
        }
    })
}

fn unknown_name(kind: &str, name: &str, known: &[&str]) -> Error {
    let near = known.iter().min_by_key(|k| strsim::damerau_levenshtein(name, k)).unwrap();
    Error::Config(format!("unknown {kind} `{name}`; did you mean `{near}`? (known: {})", known.join(", ")))
}

fn build_system(cfg: &RunConfig) -> Result<System> {
    let c = &cfg.system;
    let param = |what: &str| {
        c.param.ok_or_else(|| Error::Config(format!("system `{}` needs `param` ({what})", c.name)))
    };
    let sys = match c.kind {
        SystemKind::Builtin => {
            let b = match c.name.as_str() {
                "logistic" => Builtin::Logistic,
                "exp-decay" => Builtin::ExpDecay,
                "exp-growth" => Builtin::ExpGrowth,
                "translation" => Builtin::Translation,
                n => return Err(unknown_name("builtin", n, &["logistic", "exp-decay", "exp-growth", "translation"])),
            };
            System::builtin(b)
        }
        SystemKind::Ode => {
            let o = match c.name.as_str() {
                "logistic" => Ode::Logistic,
                "double-well" => Ode::DoubleWell,
                "linear" => Ode::Linear(param("rate a in x' = a x")?),
                n => return Err(unknown_name("ode", n, &["logistic", "double-well", "linear"])),
            };
            System::ode(o)
        }
        SystemKind::Map => {
            let m = match c.name.as_str() {
                "identity" => PointMap::Identity,
                "scale" => PointMap::Scale(param("factor")?),
                "shift" => PointMap::Shift(param("offset")?),
                "doubling" => PointMap::Doubling,
                "rotation" => PointMap::Rotation(param("angle as a fraction of a turn")?),
                n => return Err(unknown_name("map", n, &["identity", "scale", "shift", "doubling", "rotation"])),
            };
            System::map(m)
        }
        SystemKind::Table => {
            let path = c.table.as_deref().unwrap();
            let rows = read_rows(path)?;
            let mut table = vec![usize::MAX; rows.len()];
            for (r, row) in rows.iter().enumerate() {
                let (i, j) = match row.as_slice() {
                    [j] => (r, index(*j, "image", path)?),
                    [i, j, ..] => (index(*i, "point", path)?, index(*j, "image", path)?),
                    [] => unreachable!(),
                };
                if i >= table.len() || table[i] != usize::MAX {
                    return Err(Error::Config(format!("{}: point {i} is out of range or listed twice", path.display())));
                }
                table[i] = j;
            }
            System::table(table)
        }
    };
    let sys = sys.with_escape(c.escape);
    Ok(if c.semiflow { sys.as_semiflow() } else { sys })
}

fn build_context(cfg: &RunConfig) -> Result<Ctx> {
    let space = build_space(cfg)?;
    let system = build_system(cfg)?;
    let step = match system.time_kind() {
        TimeKind::Continuous => system.discretize(cfg.system.period)?,
        TimeKind::Discrete => system.power(cfg.system.power)?,
    };
    let map = step.sample(&space)?;
    Ok(Ctx { space, system, step, map })
}

/// `ε₀` and the ladder depth from the `[epsilon]` table.
fn build_eps(cfg: &RunConfig, ctx: &Ctx) -> Result<(ErrorFunction, usize)> {
    let e = &cfg.epsilon;
    let space = &ctx.space;
    let spec = if let Some(c) = e.constant {
        ErrorSpec::Constant(c)
    } else if let Some(name) = &e.formula {
        let f = Formula::parse(name).ok_or_else(|| ErrFnError::UnknownFormula(name.clone()))?;
        let (offset, slope) = (e.offset.unwrap_or(0.0), e.slope.unwrap_or(1.0));
        ErrorSpec::Formula(match f {
            Formula::Affine { axis, .. } => Formula::Affine { axis, offset, slope },
            Formula::Abs { axis, .. } => Formula::Abs { axis, offset, slope },
        })
    } else if let Some(path) = &e.values {
        ErrorSpec::Values(read_rows(path)?.into_iter().map(|r| *r.last().unwrap()).collect())
    } else {
        let d = space.diameter() / 4.0;
        ErrorSpec::Constant(if d > 0.0 && d.is_finite() { d } else { 1.0 })
    };
    let base = make_error(space, &spec)?;
    if e.snap_floor {
        let levels = e.levels.unwrap_or(4);
        let bound = snap_bound(space, ctx.map.snap);
        let factor = 1.0001 * bound * 2f64.powi(levels as i32 - 1) / base.min_real(space);
        return Ok((base.scaled(factor), levels));
    }
    let levels = e.levels.unwrap_or_else(|| auto_levels(space, &base, ctx.map.snap));
    Ok((base, levels))
}

fn eps_summary(ctx: &Ctx, eps0: &ErrorFunction, levels: usize) -> Value {
    let floor = eps0.min_real(&ctx.space) * 0.5f64.powi(levels as i32 - 1);
    json!({
        "levels": levels,
        "eps0_min": eps0.min_real(&ctx.space),
        "floor_min": floor,
        "snap_bound": snap_bound(&ctx.space, ctx.map.snap),
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// `point-index, x0.., <columns>` for every real point.
fn write_points(out: &Path, name: &str, space: &MetricSample, columns: &[(&str, Vec<String>)], run: &mut Run) -> Result<()> {
    let path = out.join(name);
    let mut w = csv_writer(&path)?;
    let dim = if space.has_coords() { space.dim() } else { 0 };
    let mut header = vec!["point-index".to_string()];
    header.extend((0..dim).map(|a| format!("x{a}")));
    header.extend(columns.iter().map(|c| c.0.to_string()));
    w.write_record(&header)?;
    for i in 0..space.len() {
        let mut row = vec![i.to_string()];
        if dim > 0 {
            row.extend(space.coords(i).iter().map(|v| v.to_string()));
        }
        row.extend(columns.iter().map(|c| c.1[i].clone()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io(&path))?;
    run.files.push(name.to_string());
    Ok(())
}

/// `x, y, value` triples; spaces without coordinates use the point index as `x`.
fn write_plot(out: &Path, name: &str, space: &MetricSample, values: &[f64], run: &mut Run) -> Result<()> {
    let path = out.join(name);
    let mut w = csv_writer(&path)?;
    w.write_record(["x", "y", "value"])?;
    for (i, v) in values.iter().enumerate().take(space.len()) {
        let (x, y) = if space.has_coords() {
            let c = space.coords(i);
            (c[0], c.get(1).copied().unwrap_or(0.0))
        } else {
            (i as f64, 0.0)
        };
        w.write_record([x.to_string(), y.to_string(), v.to_string()])?;
    }
    w.flush().map_err(io(&path))?;
    run.files.push(name.to_string());
    Ok(())
}

fn write_table(out: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>, run: &mut Run) -> Result<()> {
    let path = out.join(name);
    let mut w = csv_writer(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io(&path))?;
    run.files.push(name.to_string());
    Ok(())
}

fn joined(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn flags(n: usize, set: impl Fn(usize) -> bool) -> Vec<String> {
    (0..n).map(|i| if set(i) { "1" } else { "0" }.to_string()).collect()
}

fn describe(space: &MetricSample, members: &[usize]) -> String {
    let lo = members[0];
    let hi = *members.last().unwrap();
    if space.has_coords() {
        format!("{} point(s), indices {lo}..={hi}, first at {:?}", members.len(), space.coords(lo))
    } else {
        format!("{} point(s): {}", members.len(), joined(members))
    }
}

fn component_ids(graph: &ChainGraph, n: usize) -> Vec<String> {
    (0..n).map(|i| graph.component_of(i).map_or("-1".to_string(), |c| c.to_string())).collect()
}

fn chain_pipeline(cfg: &RunConfig, ctx: &Ctx, out: &Path, run: &mut Run, table: bool) -> Result<()> {
    let (eps0, levels) = build_eps(cfg, ctx)?;
    run.epsilon = Some(eps_summary(ctx, &eps0, levels));
    let ladder = chain_recurrent_limit(&ctx.space, &ctx.map, &eps0, levels)?;
    let g = &ladder.graph;
    let n = ctx.space.len();
    let comps = g.components();
    let rec = (0..n).filter(|&i| g.is_recurrent(i)).count();
    run.sets.insert("recurrent".into(), rec);
    run.sets.insert("transient".into(), n - rec);
    run.components = Some(comps.len());
    write_points(
        out,
        "chain.csv",
        &ctx.space,
        &[("recurrent", flags(n, |i| g.is_recurrent(i))), ("component-id", component_ids(g, n))],
        run,
    )?;
    let plot: Vec<f64> = (0..n).map(|i| g.component_of(i).map_or(-1.0, |c| c as f64)).collect();
    write_plot(out, "plot_components.csv", &ctx.space, &plot, run)?;
    if table {
        let rows = comps
            .iter()
            .enumerate()
            .map(|(a, m)| {
                let reaches: Vec<usize> = (0..comps.len()).filter(|&b| b != a && g.component_reaches(a, b)).collect();
                vec![a.to_string(), m.len().to_string(), joined(m), joined(&reaches)]
            })
            .collect();
        write_table(out, "components.csv", &["component-id", "size", "members", "reaches"], rows, run)?;
    } else {
        let rows = ladder
            .levels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                vec![
                    k.to_string(),
                    l.scale.to_string(),
                    (eps0.min_real(&ctx.space) * l.scale).to_string(),
                    l.recurrent.len().to_string(),
                    l.components.to_string(),
                    l.violations.len().to_string(),
                ]
            })
            .collect();
        write_table(out, "ladder.csv", &["level", "scale", "eps-min", "recurrent", "components", "violations"], rows, run)?;
    }
    let violations: Vec<usize> = ladder.levels.iter().flat_map(|l| l.violations.iter().copied()).collect();
    run.checks.push(Check::new("ladder-monotone", true, &violations));
    let dag: Vec<usize> = if g.condensation_is_dag() { vec![] } else { vec![0] };
    run.checks.push(Check::new("condensation-dag", true, &dag));
    for (a, m) in comps.iter().enumerate() {
        run.notes.push(format!("component {a}: {}", describe(&ctx.space, m)));
    }
    Ok(())
}

fn decomposition_pipeline(cfg: &RunConfig, ctx: &Ctx, out: &Path, run: &mut Run) -> Result<()> {
    let (eps0, levels) = build_eps(cfg, ctx)?;
    run.epsilon = Some(eps_summary(ctx, &eps0, levels));
    let r = conley_decomposition(&ctx.space, &ctx.map, &eps0, levels, cfg.params.budget)?;
    let n = ctx.space.len();
    let sets: Vec<(PointSet, PointSet, PointSet)> = r
        .regions
        .iter()
        .map(|g| {
            let mk = |v: &[usize]| PointSet::from_indices(ctx.space.states(), v.iter().copied());
            (mk(&g.region), mk(&g.attractor), mk(&g.basin))
        })
        .collect();
    let recurrent = PointSet::from_indices(ctx.space.states(), r.recurrent.iter().copied());
    let covered_by: Vec<String> = (0..n)
        .map(|x| {
            sets.iter()
                .position(|(_, a, b)| b.contains(x) && !a.contains(x))
                .map_or("-1".to_string(), |k| k.to_string())
        })
        .collect();
    write_points(
        out,
        "decomposition.csv",
        &ctx.space,
        &[("recurrent", flags(n, |i| recurrent.contains(i))), ("covered-by", covered_by)],
        run,
    )?;
    for (k, (reg, a, b)) in sets.iter().enumerate() {
        write_points(
            out,
            &format!("region_{k:03}.csv"),
            &ctx.space,
            &[
                ("region", flags(n, |i| reg.contains(i))),
                ("attractor", flags(n, |i| a.contains(i))),
                ("basin", flags(n, |i| b.contains(i))),
            ],
            run,
        )?;
    }
    let rows = r
        .regions
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let real = |v: &[usize]| v.iter().filter(|&&x| x < n).count().to_string();
            vec![
                k.to_string(),
                g.seed.to_string(),
                real(&g.region),
                real(&g.attractor),
                real(&g.basin),
                (g.lemma_exact as u8).to_string(),
                (g.lemma_within_cell as u8).to_string(),
            ]
        })
        .collect();
    write_table(
        out,
        "regions.csv",
        &["region-id", "seed", "region", "attractor", "basin", "lemma-exact", "lemma-within-cell"],
        rows,
        run,
    )?;
    let plot: Vec<f64> = (0..n).map(|x| sets.iter().filter(|(_, a, b)| b.contains(x) && !a.contains(x)).count() as f64).collect();
    write_plot(out, "plot_coverage.csv", &ctx.space, &plot, run)?;
    run.sets.insert("recurrent".into(), r.recurrent.iter().filter(|&&x| x < n).count());
    run.sets.insert("transient".into(), r.transient);
    run.sets.insert("regions".into(), r.regions.len());
    run.sets.insert("uncovered".into(), r.uncovered.len());
    run.extra.insert("coverage".into(), json!(r.coverage()));
    run.extra.insert("exact".into(), json!(r.exact()));
    run.checks.push(Check::new("coverage", true, &r.uncovered));
    let loose: Vec<usize> = (0..r.regions.len()).filter(|&k| !r.regions[k].lemma_within_cell).collect();
    run.checks.push(Check::new("recurrent-basin-is-attractor-within-cell", true, &loose));
    let inexact: Vec<usize> = (0..r.regions.len()).filter(|&k| !r.regions[k].lemma_exact).collect();
    run.checks.push(Check::new("recurrent-basin-is-attractor-exact", false, &inexact));
    run.checks.push(Check::new("recurrent-outside-differences", false, &r.recurrent_in_difference));
    run.checks.push(Check::new("ladder-monotone", true, &if r.ladder_monotone { vec![] } else { vec![0usize] }));
    run.notes.push(format!("coverage {:.4} over {} transient point(s)", r.coverage(), r.transient));
    Ok(())
}

fn region_set(cfg: &RunConfig, space: &MetricSample) -> Result<PointSet> {
    let rc = cfg.params.region.as_ref().unwrap();
    let mut set = space.empty_set();
    if !rc.lo.is_empty() || !rc.hi.is_empty() {
        let d = space.dim();
        if !space.has_coords() || rc.lo.len() != d || rc.hi.len() != d {
            return Err(Error::Config(format!("region lo/hi need {d} coordinates on this space")));
        }
        set = space.select(|x| (0..d).all(|a| rc.lo[a] < x[a] && x[a] <= rc.hi[a]));
    }
    for &p in &rc.points {
        if p >= space.len() {
            return Err(Error::Config(format!("region point {p} is out of range")));
        }
        set.insert(p);
    }
    if rc.outside {
        let o = space.outside().ok_or_else(|| Error::Config("region includes the outside state, but the space has none".into()))?;
        set.insert(o);
    }
    Ok(set)
}

fn field_checks(run: &mut Run, v: &Verification, ternary: bool) {
    let witnesses: [(&str, Vec<Value>); 6] = [
        ("monotone", v.monotone.iter().map(|w| json!(w)).collect()),
        ("strict-off-chrec", v.strict.iter().map(|w| json!(w)).collect()),
        ("constant-per-component", v.constant.iter().map(|w| json!(w)).collect()),
        ("injective-across-components", v.injective.iter().map(|w| json!(w)).collect()),
        ("dag-order", v.order.iter().map(|w| json!(w)).collect()),
        ("ternary-digits", v.ternary.iter().map(|w| json!(w)).collect()),
    ];
    for (name, w) in witnesses {
        if name == "ternary-digits" && !ternary {
            continue;
        }
        run.checks.push(Check::new(name, true, &w));
    }
}

fn region_pipeline(cfg: &RunConfig, ctx: &Ctx, out: &Path, run: &mut Run) -> Result<()> {
    let space = &ctx.space;
    let region = region_set(cfg, space)?;
    let sweep = cfg.params.sweep();
    let trap = match is_trapping(space, &ctx.step, &region, 1.0, TrapKind::Strong, &sweep)? {
        TrapVerdict::Certified(t) => t,
        TrapVerdict::Refuted(r) => {
            return Err(ErrFnError::NotTrapping { horizon: 1.0, witness: r.image }.into());
        }
    };
    let (k_max, j_max) = (cfg.params.k_max, cfg.params.j_max);
    let field = strong_region_lyapunov(space, &ctx.map, &region, k_max, j_max)?;
    let a = attracting_set(space, &ctx.step, &trap, &sweep)?.set;
    let b = basin(space, &ctx.step, &region, &sweep)?.set;
    let l = &field.values;
    let n = space.len();
    let tol = truncation_tolerance(k_max, j_max);
    let range: Vec<usize> = (0..n).filter(|&x| !(0.0..=1.0).contains(&l[x])).collect();
    let zero: Vec<usize> = (0..n).filter(|&x| (l[x] <= tol) != a.contains(x)).collect();
    let one: Vec<usize> = (0..n).filter(|&x| (l[x] >= 1.0 - tol) != !b.contains(x)).collect();
    let mut monotone = Vec::new();
    let mut strict = Vec::new();
    for x in 0..n {
        let y = ctx.map.apply(x);
        if y >= n {
            continue;
        }
        if l[y] > l[x] {
            monotone.push(x);
        }
        if b.contains(x) && !a.contains(x) && !(l[y] < l[x]) {
            strict.push(x);
        }
    }
    run.checks.push(Check::new("unit-range", true, &range));
    run.checks.push(Check::new("zero-set-is-attractor", true, &zero));
    run.checks.push(Check::new("one-set-is-basin-complement", true, &one));
    run.checks.push(Check::new("monotone", true, &monotone));
    run.checks.push(Check::new("strict-on-basin-minus-attractor", true, &strict));
    run.sets.insert("region".into(), region.real(space).count());
    run.sets.insert("attractor".into(), a.count());
    run.sets.insert("basin".into(), b.count());
    run.extra.insert("tolerance".into(), json!(tol));
    write_points(
        out,
        "field.csv",
        space,
        &[
            ("region", flags(n, |i| region.contains(i))),
            ("attractor", flags(n, |i| a.contains(i))),
            ("basin", flags(n, |i| b.contains(i))),
            ("value", l.iter().map(|v| v.to_string()).collect()),
        ],
        run,
    )?;
    write_plot(out, "plot_field.csv", space, l, run)
}

fn global_pipeline_on(cfg: &RunConfig, space: &MetricSample, map: &SampledMap) -> Result<crate::lyapunov::GlobalLyapunov> {
    let p = &cfg.params;
    let opts = GlobalOptions {
        seeds: p.seeds.unwrap_or(usize::MAX),
        levels: cfg.epsilon.levels,
        k_max: p.k_max,
        j_max: p.j_max,
        region_cap: p.region_cap,
    };
    global_lyapunov(space, map, &opts)
}

fn write_global(out: &Path, space: &MetricSample, g: &crate::lyapunov::GlobalLyapunov, run: &mut Run) -> Result<()> {
    let n = space.len();
    write_points(
        out,
        "field.csv",
        space,
        &[
            ("recurrent", flags(n, |i| g.recurrent.contains(i))),
            ("component-id", component_ids(&g.graph, n)),
            ("value", g.field.values.iter().map(|v| v.to_string()).collect()),
        ],
        run,
    )?;
    let rows = g
        .components
        .iter()
        .map(|c| vec![c.label.to_string(), c.value.to_string(), c.members.len().to_string(), joined(&c.members)])
        .collect();
    write_table(out, "components.csv", &["component-id", "value", "size", "members"], rows, run)?;
    let rows = g
        .family
        .regions
        .iter()
        .enumerate()
        .map(|(r, e)| {
            vec![(r + 1).to_string(), e.seed.to_string(), e.eps.to_string(), e.region.len().to_string(), e.attractor.len().to_string()]
        })
        .collect();
    write_table(out, "regions.csv", &["region-id", "seed", "eps", "region", "attractor"], rows, run)?;
    run.sets.insert("recurrent".into(), g.recurrent.count());
    run.sets.insert("regions".into(), g.family.regions.len());
    run.sets.insert("unresolved".into(), g.unresolved.len());
    run.components = Some(g.components.len());
    Ok(())
}

fn global_pipeline(cfg: &RunConfig, ctx: &Ctx, out: &Path, run: &mut Run) -> Result<()> {
    let g = global_pipeline_on(cfg, &ctx.space, &ctx.map)?;
    let v = verify_global(&ctx.map, &g);
    field_checks(run, &v, true);
    write_global(out, &ctx.space, &g, run)?;
    write_plot(out, "plot_field.csv", &ctx.space, &g.field.values, run)
}

fn flow_pipeline(cfg: &RunConfig, ctx: &Ctx, out: &Path, run: &mut Run) -> Result<()> {
    if ctx.system.time_kind() != TimeKind::Continuous {
        return Err(SystemError::NotContinuous.into());
    }
    let space = &ctx.space;
    let map = ctx.system.discretize(1.0)?.sample(space)?;
    let g = global_pipeline_on(cfg, space, &map)?;
    let v = verify_global(&map, &g);
    for (name, ok) in v.summary() {
        run.checks.push(Check::new(&format!("time-one-{name}"), false, if ok { &[][..] } else { &[0usize][..] }));
    }
    let p = &cfg.params;
    let lift = flow_lyapunov(space, &ctx.system, &g.field, p.nodes, p.extension)?;
    let field = lift.field()?;
    let transient: Vec<usize> = (0..space.len()).filter(|&i| !g.recurrent.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, transient.len(), p.trajectories.min(transient.len()))
        .into_iter()
        .map(|k| transient[k])
        .collect();
    picks.sort_unstable();
    let starts: Vec<Vec<f64>> = picks.iter().map(|&i| space.coords(i).to_vec()).collect();
    let check = lift.check(&starts, p.dt, p.t_end, p.tolerance)?;
    let at = |w: &[(usize, f64)]| w.iter().map(|&(s, t)| json!({"point": picks[s], "t": t})).collect::<Vec<_>>();
    run.checks.push(Check::new("lift-monotone", true, &at(&check.increases)));
    run.checks.push(Check::new("lift-strict-until-terminal", true, &at(&check.flats)));
    run.checks.push(Check::new("fixed-point-constancy", true, &check.fixed));
    run.sets.insert("trajectories".into(), picks.len());
    run.sets.insert("recurrent".into(), g.recurrent.count());
    run.components = Some(g.components.len());
    write_points(out, "field.csv", space, &[("value", field.values.iter().map(|v| v.to_string()).collect())], run)?;
    write_points(out, "ell.csv", space, &[("value", g.field.values.iter().map(|v| v.to_string()).collect())], run)?;
    write_plot(out, "plot_field.csv", space, &field.values, run)
}

/// Reads a field CSV whose first column is the point index and last column the value.
pub fn read_field(path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut values = vec![f64::NAN; n];
    for row in read_rows(path)? {
        let i = index(row[0], "point", path)?;
        if i >= n || !values[i].is_nan() || row.len() < 2 {
            return Err(Error::Config(format!("{}: point {i} is out of range, repeated or has no value", path.display())));
        }
        values[i] = *row.last().unwrap();
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Config(format!("{}: no value for point {i}", path.display())));
    }
    Ok(values)
}

fn verify_pipeline(cfg: &RunConfig, ctx: &Ctx, out: &Path, run: &mut Run) -> Result<()> {
    let (eps0, levels) = build_eps(cfg, ctx)?;
    run.epsilon = Some(eps_summary(ctx, &eps0, levels));
    let values = read_field(cfg.params.field.as_deref().unwrap(), ctx.space.len())?;
    let ladder = chain_recurrent_limit(&ctx.space, &ctx.map, &eps0, levels)?;
    let v = verify_field(&ctx.map, &ladder.graph, &values);
    field_checks(run, &v, false);
    let n = ctx.space.len();
    run.sets.insert("recurrent".into(), (0..n).filter(|&i| ladder.graph.is_recurrent(i)).count());
    run.components = Some(ladder.graph.components().len());
    let mut bad = vec![0.0; n];
    for &x in v.monotone.iter().chain(&v.strict) {
        bad[x] = 1.0;
    }
    write_plot(out, "plot_witnesses.csv", &ctx.space, &bad, run)
}

fn render_report(outcome: &Outcome, run: &Run, cfg: &RunConfig) -> String {
    let mut s = String::new();
    let status = if outcome.exit == 0 { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "chainrec {}: {status} (exit {})", cfg.pipeline.name(), outcome.exit);
    let _ = writeln!(s, "\n[sets]");
    for (k, v) in &run.sets {
        let _ = writeln!(s, "  {k}: {v}");
    }
    if let Some(c) = run.components {
        let _ = writeln!(s, "  components: {c}");
    }
    let _ = writeln!(s, "\n[checks]");
    for c in &outcome.checks {
        let tag = match (c.passed, c.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "NOTE",
        };
        let _ = write!(s, "  {tag}  {}", c.name);
        if !c.passed {
            let w: Vec<String> = c.witnesses.iter().map(|w| w.to_string()).collect();
            let _ = write!(s, "  ({} witness(es): {})", c.failures, w.join(", "));
        }
        let _ = writeln!(s);
    }
    if !run.notes.is_empty() {
        let _ = writeln!(s, "\n[notes]");
        for n in &run.notes {
            let _ = writeln!(s, "  {n}");
        }
    }
    let _ = writeln!(s, "\n[effective configuration]\n{}", cfg.echo());
    s
}

/// Runs the configured pipeline and writes every artifact into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out).map_err(io(out))?;
    let ctx = build_context(cfg)?;
    let mut r = Run::default();
    match cfg.pipeline {
        Pipeline::ChainRecurrence => chain_pipeline(cfg, &ctx, out, &mut r, false)?,
        Pipeline::Components => chain_pipeline(cfg, &ctx, out, &mut r, true)?,
        Pipeline::ConleyDecomposition => decomposition_pipeline(cfg, &ctx, out, &mut r)?,
        Pipeline::RegionLyapunov => region_pipeline(cfg, &ctx, out, &mut r)?,
        Pipeline::GlobalLyapunov => global_pipeline(cfg, &ctx, out, &mut r)?,
        Pipeline::FlowLyapunov => flow_pipeline(cfg, &ctx, out, &mut r)?,
        Pipeline::Verify => verify_pipeline(cfg, &ctx, out, &mut r)?,
    }
    let passed = r.checks.iter().all(|c| c.passed || !c.hard);
    let exit = if passed { 0 } else { 2 };
    r.files.push("report.txt".into());
    r.files.sort();
    let space = &ctx.space;
    let mut summary = json!({
        "schema": "chainrec-summary/1",
        "pipeline": cfg.pipeline.name(),
        "parameters": serde_json::to_value(cfg).unwrap_or(Value::Null),
        "space": {
            "kind": cfg.space.kind,
            "points": space.len(),
            "dim": if space.has_coords() { space.dim() } else { 0 },
            "h": space.h(),
            "diameter": space.diameter(),
            "outside": space.outside().is_some(),
        },
        "system": {
            "kind": cfg.system.kind,
            "name": cfg.system.name,
            "time": ctx.system.time_kind(),
            "snap": ctx.map.snap,
            "absorbed": ctx.map.absorbed,
        },
        "epsilon": r.epsilon.clone().unwrap_or(Value::Null),
        "sets": r.sets,
        "components": r.components,
        "checks": r.checks,
        "passed": passed,
        "exit_status": exit,
        "files": r.files,
    });
    let obj = summary.as_object_mut().unwrap();
    for (k, v) in &r.extra {
        obj.insert(k.clone(), v.clone());
    }
    let outcome = Outcome { summary: summary.clone(), checks: r.checks.clone(), files: r.files.clone(), exit };
    let report = render_report(&outcome, &r, cfg);
    let rp = out.join("report.txt");
    std::fs::write(&rp, report).map_err(io(&rp))?;
    let sp = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).unwrap() + "\n";
    std::fs::write(&sp, text).map_err(io(&sp))?;
    Ok(outcome)
}

/// Output directory: the command-line value, then the config's `out`, then `./out`.
pub fn output_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}
