pub mod anatomy;
pub mod datasets;
pub mod imageio;
pub mod losses;
pub mod metrics;
pub mod phantom;
pub mod pseudo;
pub mod rng;
pub mod view;
