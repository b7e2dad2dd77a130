#![allow(clippy::result_large_err)]

pub mod environment;
pub mod script;
pub mod validator;
pub mod provider;
pub mod collaboration;
pub mod crew;
pub mod workflow;
pub mod cli;
