//! Litter-collection mission simulator: aerial survey, detection fusion,
//! occupancy mapping, tour planning, standoff navigation and Greedy Pickup
//! on a seeded 2D world.

pub mod clusterfilter;
pub mod geometry;
pub mod gridmap;
pub mod mission;
pub mod par;
pub mod pickup;
pub mod planner;
pub mod posebuffer;
pub mod simworld;
