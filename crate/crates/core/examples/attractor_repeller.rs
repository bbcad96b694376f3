//! Trapping regions, attracting and repelling sets, and basins on grids.
use chainrec::conley::{attracting_set, basin, is_trapping, repelling_set, SweepOptions, TrapKind, TrapVerdict};
use chainrec::space::{Boundary, GridSpec, MetricSample, PointSet};
use chainrec::systems::{Builtin, System};

fn show(space: &MetricSample, set: &PointSet) -> String {
    let xs: Vec<String> = set.iter().map(|i| format!("{:.2}", space.coords(i)[0])).collect();
    format!("[{}]", xs.join(" "))
}

fn report(name: &str, space: &MetricSample, flow: &System, region: &PointSet) -> Result<(), Box<dyn std::error::Error>> {
    let opts = SweepOptions::default();
    match is_trapping(space, flow, region, 1.0, TrapKind::Trapping, &opts)? {
        TrapVerdict::Certified(r) => {
            let a = attracting_set(space, flow, &r, &opts)?;
            let rep = repelling_set(space, flow, &r, &opts)?;
            let b = basin(space, flow, region, &opts)?;
            println!("{name}: A = {}, R = {}, basin has {} cells", show(space, &a.set), show(space, &rep.set), b.set.count());
        }
        TrapVerdict::Refuted(w) => println!("{name}: not trapping, image {} reaches {}", w.image, w.offender),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = GridSpec::centered(0.0, 1.0, 101).build()?;
    report("logistic, x > 1/2", &s, &System::builtin(Builtin::Logistic), &s.select(|x| x[0] > 0.5))?;

    let s = GridSpec::centered(-2.0, 0.0, 201).boundary(0, Boundary::Window, Boundary::Domain).build()?;
    let mut t = s.select(|x| x[0] > -1.0);
    t.insert(s.outside().unwrap());
    report("exp-decay, x > -1", &s, &System::builtin(Builtin::ExpDecay), &t)?;

    let s = GridSpec::centered(0.0, 10.0, 1001).boundary(0, Boundary::Domain, Boundary::Window).build()?;
    let mut t = s.select(|x| x[0] > 1.0);
    t.insert(s.outside().unwrap());
    report("exp-growth, x > 1", &s, &System::builtin(Builtin::ExpGrowth), &t)?;

    Ok(())
}
