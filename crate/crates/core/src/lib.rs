pub mod broker;
pub mod capture;
pub mod clock;
pub mod eventlog;
pub mod feed;
pub mod monitor;
pub mod resp;
pub mod tools;
