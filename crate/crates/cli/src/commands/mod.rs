pub mod density;
pub mod eval;
pub mod gradcheck;
pub mod joint;
pub mod residual;
pub mod sample;
pub mod train;
