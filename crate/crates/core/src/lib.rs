pub mod betadist;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod optim;
pub mod estimation;
pub mod montecarlo;
pub mod diagnostics;
