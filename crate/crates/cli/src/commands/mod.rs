pub mod exponents;
pub mod solve;
pub mod sweep;
pub mod verify;
