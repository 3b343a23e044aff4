pub mod arith;
pub mod benaloh;
pub mod shamir;
pub mod credentials;
pub mod lcp;
pub mod zk;
pub mod wire;
pub mod protocol;
pub mod safety;
pub mod sim;
pub mod snapshot;
pub mod bench;
pub mod suite;
