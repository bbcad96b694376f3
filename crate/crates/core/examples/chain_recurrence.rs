//! Chain recurrent set and chain components of the time-two logistic map,
//! refined along a tolerance ladder down to the snap bound.
use chainrec::chains::chain_recurrent_limit;
use chainrec::errfn::{snap_bound, ErrorFunction};
use chainrec::space::GridSpec;
use chainrec::systems::{Builtin, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = GridSpec::centered(0.0, 1.0, 200).build()?;
    let map = System::builtin(Builtin::Logistic).discretize(2.0)?.sample(&space)?;
    let floor = 1.0001 * snap_bound(&space, map.snap);
    let ladder = chain_recurrent_limit(&space, &map, &ErrorFunction::constant(&space, 8.0 * floor), 4)?;
    for (k, l) in ladder.levels.iter().enumerate() {
        println!("level {k}: eps = {:.4}, {} recurrent, {} components", 8.0 * floor * l.scale, l.recurrent.len(), l.components);
    }
    println!("monotone in eps: {}", ladder.is_monotone());
    for (c, members) in ladder.graph.components().iter().enumerate() {
        let xs: Vec<String> = members.iter().map(|&i| format!("{:.3}", space.coords(i)[0])).collect();
        println!("component {c}: {}", xs.join(" "));
    }
    Ok(())
}
