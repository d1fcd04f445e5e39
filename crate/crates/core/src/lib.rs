//! Reach-avoid verification of polynomial ODEs with guidance-barrier
//! functions computed by sum-of-squares programming.

pub mod certify;
pub mod driver;
pub mod par;
pub mod poly;
pub mod problem;
pub mod sdp;
pub mod semialg;
pub mod sim;
pub mod sosbuild;
