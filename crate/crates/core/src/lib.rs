//! Tree evaluation problem lab: instances, branching programs, pebbling
//! games, pebbling-to-program compilation and the trace analyses that turn
//! computation paths back into pebblings.

pub mod amount;
pub mod analysis;
pub mod bp;
pub mod error;
pub mod fixtures;
pub mod pebbling;
pub mod space;
pub mod synthesis;
pub mod tep;

pub use error::{Error, Result};
