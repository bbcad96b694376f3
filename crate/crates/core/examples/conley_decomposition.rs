//! Every transient point lies in the basin of some chain-built trapping
//! region and outside its attractor.
use chainrec::chains::auto_levels;
use chainrec::conley::conley_decomposition;
use chainrec::errfn::{snap_bound, ErrorFunction};
use chainrec::space::{GridSpec, MetricKind, MetricSample};
use chainrec::systems::{Builtin, SampledMap, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
    let space = MetricSample::from_points(&pts, MetricKind::Euclidean)?;
    let map = SampledMap::from_table(vec![1, 2, 2, 2, 5, 4]);
    let eps0 = ErrorFunction::constant(&space, 1.0);
    let r = conley_decomposition(&space, &map, &eps0, auto_levels(&space, &eps0, map.snap), 16)?;
    println!("finite: recurrent {:?}, {} regions, coverage {}, exact {}", r.recurrent, r.regions.len(), r.coverage(), r.exact());
    for g in &r.regions {
        println!("  seed {}: region {:?}, attractor {:?}, basin {:?}", g.seed, g.region, g.attractor, g.basin);
    }

    let space = GridSpec::centered(0.0, 1.0, 101).build()?;
    let map = System::builtin(Builtin::Logistic).discretize(2.0)?.sample(&space)?;
    let floor = 1.0001 * snap_bound(&space, map.snap);
    let r = conley_decomposition(&space, &map, &ErrorFunction::constant(&space, 8.0 * floor), 4, 64)?;
    println!("logistic grid: recurrent {:?}, coverage {}, uncovered {:?}", r.recurrent, r.coverage(), r.uncovered);
    for g in &r.regions {
        println!("  attractor {:?}, matches recurrent part of basin within a cell: {}", g.attractor, g.lemma_within_cell);
    }
    Ok(())
}
