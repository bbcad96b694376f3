//! Tolerance fields: formulas, the snap bound, calibrations and trap-derived tolerances.
use chainrec::errfn::{calibrate_pushforward_map, calibrate_ratio, make_error, snap_bound, trap_tolerance, ErrorSpec, Formula};
use chainrec::space::GridSpec;
use chainrec::systems::{Builtin, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = GridSpec::centered(0.0, 1.0, 51).build()?;
    let map = System::builtin(Builtin::Logistic).discretize(2.0)?.sample(&space)?;
    let eps = make_error(&space, &ErrorSpec::Formula(Formula::Affine { axis: 0, offset: 0.05, slope: 0.1 }))?;
    println!("eps at 0 and 1: {:.3} {:.3}", eps.get(0), eps.get(50));
    println!("snap bound: {:.4}", snap_bound(&space, map.snap));

    let ratio = calibrate_ratio(&space, &eps);
    let push = calibrate_pushforward_map(&space, &map, &eps);
    println!("ratio calibration min {:.4}, pushforward min {:.4}", ratio.min_real(&space), push.min_real(&space));

    let region = space.select(|x| x[0] > 0.3);
    let tol = trap_tolerance(&space, &region, &map.image_set(&region))?;
    println!("trap tolerance on x > 0.3: min {:.4}, {} images checked", tol.eps.min_real(&space), tol.checked_images);
    Ok(())
}
