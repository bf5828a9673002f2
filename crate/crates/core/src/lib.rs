pub mod cli;
pub mod exactarith;
pub mod quadforms;
pub mod hauptmodul;
pub mod classpoly;
pub mod modpoly;
pub mod sssearch;
pub mod ssverify;
