pub mod ars;
pub mod grpo;
pub mod lge;
pub mod memory;
pub mod policy;
pub mod trainer;
pub mod trajectory;
pub mod world;
