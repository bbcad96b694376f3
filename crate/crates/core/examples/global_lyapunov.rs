//! A complete Lyapunov function for a random tabulated map, with its
//! verification bundle.
use chainrec::lyapunov::{global_lyapunov, verify_global, GlobalOptions};
use chainrec::space::{MetricKind, MetricSample};
use chainrec::systems::SampledMap;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let n = 60;
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let space = MetricSample::from_points(&pts, MetricKind::Euclidean)?;
    let map = SampledMap::from_table((0..n).map(|_| rng.gen_range(0..n)).collect());

    let g = global_lyapunov(&space, &map, &GlobalOptions::default())?;
    println!("{} regions, {} chain components", g.family.regions.len(), g.components.len());
    for c in &g.components {
        println!("  component {} {:?}: L = {:.9}", c.label, c.members, c.value);
    }
    for (name, ok) in verify_global(&map, &g).summary() {
        println!("{name}: {}", if ok { "pass" } else { "fail" });
    }
    Ok(())
}
