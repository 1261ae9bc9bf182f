pub mod bench;
pub mod conic;
pub mod dhcore;
pub mod fixtures;
pub mod lmi;
pub mod matcore;
pub mod random;
pub mod stab;

#[cfg(test)]
pub(crate) mod testutil {
    pub use crate::random::*;
}
