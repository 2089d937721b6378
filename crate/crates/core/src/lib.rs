pub mod bloch;
pub mod cli;
pub mod ensemble;
pub mod io;
pub mod protocol;
