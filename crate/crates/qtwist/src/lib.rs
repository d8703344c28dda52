pub mod cgx;
pub mod cli;
pub mod coiso;
pub mod kernel;
pub mod liebialg;
pub mod linalg;
pub mod que;
