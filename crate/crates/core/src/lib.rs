pub mod confidence;
pub mod jpeg;
pub mod lossmodel;
pub mod oracle;
pub mod recovery;
pub mod servsim;
pub mod trace;
pub mod wire;
