pub mod cantor;
pub mod cell;
pub mod covering;
pub mod error;
pub mod expr;
pub mod gauge;
pub mod indefinite;
pub mod integrand;
pub mod integrate;
pub mod library;
pub mod recover;
pub mod rule;
pub mod sum;
pub mod transport;

/// Version of the engine, echoed in every command-line result.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cell::{AdditiveCellFn, Cell, PFamily, TaggedCell};
pub use error::{Error, Result};
pub use gauge::{Gauge, TagPolicy};
pub use integrand::Integrand;
pub use integrate::{kh_integrate, kh_integrate_with, IntegralResult, KhOptions};
pub use indefinite::{alexiewicz_distance, alexiewicz_norm, indefinite_integral, GridSpec, SampledCurve};
pub use transport::{transport_apply, BiACMap, SignFlag};
pub use recover::{recover_sigma_phi, verify_recovery, BlackBoxOperator, Recovery, VerifyReport};
