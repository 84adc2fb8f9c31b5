pub mod check;
pub mod cloud;
pub mod collusion;
pub mod learn;
pub mod region;
