//! Optimal scheduling of price-making energy stores.
//!
//! A store buys energy when it is cheap and sells it when it is dear, but
//! its own trades move the market price. This crate computes profit
//! maximising schedules for one store together with a checkable optimality
//! certificate, Cournot (Nash) and cooperative schedules for several
//! stores, consumer-surplus effects, and cost models for stores owned by
//! consumers, generators or a social planner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod data;
pub mod dispatch;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod store;
pub mod welfare;

pub use error::{Error, Result};
