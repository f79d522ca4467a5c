//! Energy functional and mountain-pass solver.

mod deflation;
mod energy;
mod mountain;
mod nonlinearity;

pub use deflation::{deflate_and_continue, is_odd_on_samples, solve_many};
pub use energy::{energy, energy_gradient, Problem};
pub use mountain::{
    compactness_warning, find_endpoint, initial_bump, mountain_pass, mountain_pass_on, GridSpec, MountainPassConfig, Solution,
    ENDPOINT_LEVEL, NEGATIVE_PART_TOL,
};
pub use nonlinearity::{ar_check, ar_check_with, default_samples, ArReport, Nonlinearity, NonlinearityKind, AR_TOLERANCE};
