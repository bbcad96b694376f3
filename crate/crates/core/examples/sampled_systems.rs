//! Flows, their discretizations and sampled image tables.
use chainrec::space::GridSpec;
use chainrec::systems::{Builtin, Ode, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = GridSpec::centered(0.0, 1.0, 21).build()?;
    let logistic = System::builtin(Builtin::Logistic);
    println!("Phi(1, 0.1) = {:.6}", logistic.flow(1.0, &[0.1])?[0]);
    println!("Phi(-1, Phi(1, 0.1)) = {:.6}", logistic.flow(-1.0, &logistic.flow(1.0, &[0.1])?)?[0]);

    let map = logistic.discretize(1.0)?.sample(&space)?;
    println!("time-one images: {:?}", map.images);
    println!("largest snap distance: {:.4}", map.snap);

    let rk = System::ode(Ode::Logistic).discretize(1.0)?.sample(&space)?;
    let agree = rk.images.iter().zip(&map.images).filter(|(a, b)| a == b).count();
    println!("RK4 table agrees with the closed form at {agree} of {} cells", space.len());

    let back = logistic.reverse_time()?.discretize(1.0)?.sample(&space)?;
    println!("reversed images: {:?}", back.images);
    println!("two steps: {:?}", map.power(2).images);
    Ok(())
}
