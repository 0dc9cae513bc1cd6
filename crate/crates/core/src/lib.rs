//! Taxi/bus trip shareability analysis.
//!
//! The crate turns a road network, taxi GPS traces and bus demand into an
//! optimal one-to-one assignment of bus trips to concurrently running taxi
//! trips, and summarizes how many bus trips could have been served and how
//! much travel time that would save.

pub mod bus_synth;
pub mod geo_network;
pub mod map_match;
pub mod match_engine;
pub mod report;
pub mod synthetic;
