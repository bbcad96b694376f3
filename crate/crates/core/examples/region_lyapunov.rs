//! Effort fields and the Lyapunov function of one strong trapping region.
use chainrec::errfn::trap_tolerance;
use chainrec::lyapunov::{effort_field, region_lyapunov};
use chainrec::space::{MetricKind, MetricSample, PointSet};
use chainrec::systems::SampledMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // sinks at 4 and 12, source at 8
    let n = 17;
    let table: Vec<usize> = (0..n)
        .map(|i| match i {
            4 | 8 | 12 => i,
            0..=3 | 9..=11 => i + 1,
            _ => i - 1,
        })
        .collect();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let space = MetricSample::from_points(&pts, MetricKind::Euclidean)?;
    let map = SampledMap::from_table(table);

    let region = PointSet::from_indices(n, 0..=6);
    let tol = trap_tolerance(&space, &region, &map.image_set(&region))?;
    let effort = effort_field(&space, &map, &tol.eps, &region)?;
    let l = region_lyapunov(&space, &map, &tol.eps, &region, 20, 20)?;
    for x in 0..n {
        println!("x = {x:2}  effort {:7.3}  L {:.6}", effort.get(x), l.get(x));
    }
    Ok(())
}
