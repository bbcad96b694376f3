//! Grids, finite samples and the hyperbolic half-plane metric.
use chainrec::space::{Boundary, GridSpec, MetricKind, MetricSample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::centered(0.0, 1.0, 11).boundary(0, Boundary::Domain, Boundary::Window).build()?;
    println!("grid: {} cells, h = {}, outside state = {:?}", grid.len(), grid.h(), grid.outside());

    let upper = grid.select(|x| x[0] > 0.5);
    println!("x > 0.5: {:?}", upper.to_vec());
    println!("closure: {:?}", grid.closure(&upper).to_vec());
    println!("interior: {:?}", grid.interior(&upper).to_vec());

    let finite = MetricSample::finite(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]])?;
    println!("finite: diameter {}, min separation {}", finite.diameter(), finite.min_separation());

    let plane = MetricSample::from_points(&[vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 10.0], vec![1.0, 10.0]], MetricKind::HyperbolicHalfPlane)?;
    println!("unit shift at height 1: {:.4}", plane.d(0, 1));
    println!("unit shift at height 10: {:.4}", plane.d(2, 3));
    Ok(())
}
