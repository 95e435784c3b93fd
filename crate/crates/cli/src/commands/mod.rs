pub mod estimate;
pub mod fillsim;
pub mod forecast;
pub mod invariant;
pub mod simulate;
