pub mod config;
pub mod cost;
pub mod error;
pub mod ig;
pub mod optimize;
pub mod output;
pub mod overshoot;
pub mod passage;
pub mod penalty;
pub mod quad;
pub mod resolvent;
pub mod sim;
pub mod special;
pub mod validate;
