//! The same translation is chain recurrent under the hyperbolic metric and
//! not under the Euclidean one.
use chainrec::chains::ChainGraph;
use chainrec::errfn::ErrorFunction;
use chainrec::space::{GridSpec, MetricKind};
use chainrec::systems::{Builtin, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = System::builtin(Builtin::Translation).discretize(1.0)?;
    for metric in [MetricKind::Euclidean, MetricKind::HyperbolicHalfPlane] {
        let space = GridSpec::new(&[(0.0, 10.0), (0.1, 100.0)], &[20, 200]).metric(metric).windowed().build()?;
        let g = ChainGraph::build(&space, &f.sample(&space)?, &ErrorFunction::constant(&space, 0.5));
        let rec: Vec<usize> = (0..space.len()).filter(|&x| g.is_recurrent(x)).collect();
        let lowest = rec.iter().map(|&x| space.coords(x)[1]).fold(f64::INFINITY, f64::min);
        println!("{}: {} recurrent cells, lowest at height {lowest:.2}", metric.name(), rec.len());
    }
    Ok(())
}
