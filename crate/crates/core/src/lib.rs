pub mod calibrate;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod golden;
pub mod hilbert;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod perturbation;
pub mod pulse;
pub mod scenario;
pub mod schema;
pub mod xeb;
pub mod params;

pub use error::{Error, Result};
pub use params::{BareLabel, CouplingForm, Element, SystemParams};
