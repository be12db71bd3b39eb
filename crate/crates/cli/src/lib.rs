//! Service and command-line front end for the persuasion chatbot.

pub mod commands;
pub mod config;
pub mod server;
