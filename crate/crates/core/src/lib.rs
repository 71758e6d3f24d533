pub mod bounds;
pub mod continuum;
pub mod dynamics;
pub mod geometry;
pub mod rng;
pub mod stats;
pub mod toyenv;
