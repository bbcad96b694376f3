//! Lifting the time-one Lyapunov function of the logistic flow to the flow.
use chainrec::lyapunov::{flow_lyapunov, global_lyapunov, Extension, GlobalOptions};
use chainrec::space::GridSpec;
use chainrec::systems::{Builtin, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = GridSpec::centered(0.0, 1.0, 101).build()?;
    let flow = System::builtin(Builtin::Logistic);
    let map = flow.discretize(1.0)?.sample(&space)?;
    let ell = global_lyapunov(&space, &map, &GlobalOptions::default())?.field;
    let lift = flow_lyapunov(&space, &flow, &ell, 32, Extension::Linear)?;

    for k in 0..=10 {
        let t = 0.5 * k as f64;
        println!("t = {t:3.1}  x = {:.4}  L = {:.9}", flow.flow(t, &[0.1])?[0], lift.along(t, &[0.1])?);
    }
    let check = lift.check(&[vec![0.1], vec![0.5], vec![0.9]], 0.1, 5.0, 1e-6)?;
    println!("trajectory checks pass: {}", check.passed());
    println!("L(0) = {}, L(1) = {}", lift.eval(&[0.0])?, lift.eval(&[1.0])?);
    Ok(())
}
