pub mod elgamal;
pub mod encodings;
pub mod group;
pub mod ledger;
pub mod protocols;
pub mod query;
pub mod sign;
pub mod wire;
pub mod zkp;
