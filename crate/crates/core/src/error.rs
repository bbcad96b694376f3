use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("distance matrix is {rows}x{cols}, expected {n}x{n}")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("distance matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("negative or non-finite distance {value} at ({i}, {j})")]
    Negative { i: usize, j: usize, value: f64 },
    #[error("distinct points {i} and {j} are at distance zero")]
    ZeroDistance { i: usize, j: usize },
    #[error("nonzero self-distance {value} at point {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("triangle inequality violated: d({i},{k})={dik} > d({i},{j})+d({j},{k})={sum}")]
    Triangle { i: usize, j: usize, k: usize, dik: f64, sum: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("hyperbolic half-plane metric needs positive heights, got lower bound {0}")]
    NonpositiveHeight(f64),
    #[error("distance query on an empty set")]
    EmptySet,
    #[error("space has no coordinates for point queries")]
    NoCoordinates,
    #[error("point index {0} out of range")]
    OutOfRange(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("negative time {0} on a semiflow")]
    NegativeTime(f64),
    #[error("state left the sampled window at {0:?}")]
    Escape(Vec<f64>),
    #[error("time step must be positive, got {0}")]
    NonpositivePeriod(f64),
    #[error("power must be at least 1, got {0}")]
    BadPower(usize),
    #[error("operation needs a continuous-time system")]
    NotContinuous,
    #[error("operation needs a discrete-time system")]
    NotDiscrete,
    #[error("operation needs a flow; semiflows cannot run backward")]
    Semiflow,
    #[error("tabulated map has {table} entries for a space of {space} points")]
    TableSize { table: usize, space: usize },
    #[error("tabulated image {image} of point {point} is out of range")]
    TableImage { point: usize, image: usize },
    #[error("discrete time must be an integer, got {0}")]
    FractionalTime(f64),
    #[error("tabulated map is not invertible; backward time undefined")]
    NotInvertible,
    #[error("system of dimension {system} evaluated on a space of dimension {space}")]
    Dimension { system: usize, space: usize },
    #[error("space has no coordinates; only tabulated maps can be sampled on it")]
    NoCoordinates,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrFnError {
    #[error("error function value {value} at point {point} is not strictly positive")]
    Nonpositive { point: usize, value: f64 },
    #[error("error function has {got} values for a space of {expected} points")]
    Length { got: usize, expected: usize },
    #[error("tolerance {value} at point {point} is below the snap bound {bound}")]
    BelowSnapBound { point: usize, value: f64, bound: f64 },
    #[error("region is not trapping at horizon {horizon}: witness point {witness}")]
    NotTrapping { horizon: f64, witness: usize },
    #[error("trap-derived tolerance failed its ball check at image point {image} (ball reaches {escapee}); resolution too coarse")]
    Verification { image: usize, escapee: usize },
    #[error("unknown error-function formula `{0}`")]
    UnknownFormula(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain has {points} points and {times} times")]
    Structure { points: usize, times: usize },
    #[error("sigma chain breaks x_(j+1) = phi(y_j) at pair {0}")]
    SigmaStructure(usize),
    #[error("ladder floor {floor} is below the snap bound {bound}")]
    FloorBelowSnap { floor: f64, bound: f64 },
    #[error("need at least one ladder level")]
    NoLevels,
    #[error("input chain is not certified at the calibrated tolerance: link {index}")]
    Uncertified { index: usize },
    #[error("rectified chain fails validation at link {index}")]
    Rectification { index: usize },
    #[error("link {index} has time {time}, below the minimum {min}")]
    ShortTime { index: usize, time: f64, min: f64 },
    #[error("chain point {0} is not a state of the space")]
    BadPoint(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConleyError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("attracting set did not stabilize after {iterations} sweeps")]
    NoStabilization { iterations: usize, last: Vec<usize>, previous: Vec<usize> },
    #[error("chain-generated region failed its trapping recheck at point {0}")]
    Recheck(usize),
    #[error("chain length bound must be at least 1")]
    BadLength,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("effort source set is empty")]
    EmptySource,
    #[error("{0} must be at least 1")]
    Budget(&'static str),
    #[error("Lyapunov synthesis needs a space without an outside sink")]
    Outside,
    #[error("quadrature needs at least 8 nodes, got {0}")]
    Nodes(usize),
    #[error("field has {got} values for a space of {expected} points")]
    Length { got: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("space: {0}")]
    Space(#[from] SpaceError),
    #[error("systems: {0}")]
    System(#[from] SystemError),
    #[error("errfn: {0}")]
    ErrFn(#[from] ErrFnError),
    #[error("chains: {0}")]
    Chain(#[from] ChainError),
    #[error("conley: {0}")]
    Conley(#[from] ConleyError),
    #[error("lyapunov: {0}")]
    Lyapunov(#[from] LyapunovError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
