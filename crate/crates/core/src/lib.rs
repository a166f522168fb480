pub mod error;
pub mod funcspace;
pub mod lookup;
pub mod milp;
pub mod paraboloid;
pub mod relax;
pub mod parafit;
pub mod verify;

pub use error::{Error, Result};
pub use funcspace::{Approximable, BoxDomain, FuncDef, FuncId, ZigzagData};
pub use paraboloid::{Paraboloid, ParaboloidSet, Side};
