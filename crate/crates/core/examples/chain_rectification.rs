//! Turning a variable-time pseudo-orbit of a flow into one with unit times.
use chainrec::chains::{rectify_chain, validate_flow_chain, FlowChain};
use chainrec::errfn::ErrorFunction;
use chainrec::space::GridSpec;
use chainrec::systems::{Builtin, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = GridSpec::centered(0.0, 1.0, 201).build()?;
    let flow = System::builtin(Builtin::Logistic);
    let eps = ErrorFunction::constant(&space, 0.05);

    let mut points = vec![vec![0.2]];
    let times = vec![1.3, 1.7, 1.1, 1.5, 1.9, 1.2];
    for &t in &times {
        let y = flow.flow(t, points.last().unwrap())?[0];
        points.push(vec![y + 1e-6]);
    }
    let chain = FlowChain { points, times };
    println!("input valid at T0 = 1: {:?}", validate_flow_chain(&space, &flow, &eps, 1.0, &chain)?);

    let r = rectify_chain(&space, &flow, &eps, 1.0, &chain)?;
    println!("{:?} resample, {} unit links, certified against {:.2e}", r.method, r.links, r.certified_min);
    println!("output valid: {:?}", validate_flow_chain(&space, &flow, &eps, 1.0, &r.chain)?);
    println!("end {:.6} -> {:.6}", chain.points.last().unwrap()[0], r.chain.points.last().unwrap()[0]);
    Ok(())
}
