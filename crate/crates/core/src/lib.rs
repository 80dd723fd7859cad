//! Edge-IoT simulator for estimating indoor environmental parameters.
//!
//! The crate reproduces two edge architectures in software: a centralized
//! one (nodes publish sensor frames to a central trainer over a topic
//! broker) and a distributed parallel one (every node trains locally and a
//! master averages the weights over rank-addressed message passing).
//!
//! Module map:
//!
//! - [`frame`]: bit-exact sensor data frame codec
//! - [`sensors`]: sensor transfer functions and synthetic stimulus profiles
//! - [`mlp`]: multilayer perceptron with Adam training and weight averaging
//! - [`labeling`]: expected-output construction, estimate labels, data split
//! - [`metrics`]: confusion matrix, regression and parallel metrics
//! - [`transport`]: in-process pub/sub broker and message-passing communicator
//! - [`store`]: embedded timestamp-ordered measurement log
//! - [`methods`]: the centralized and distributed estimation state machines
//! - [`experiments`]: dataset builders, plans and result tables for the CLI

pub mod experiments;
pub mod frame;
pub mod labeling;
pub mod methods;
pub mod metrics;
pub mod mlp;
pub mod sensors;
pub mod store;
pub mod transport;

mod cputime;
