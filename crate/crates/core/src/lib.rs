pub mod raster_geo;
pub mod dataset;
pub mod metrics;
pub mod reconcile;
pub mod baseline;
pub mod annotation;
pub mod cli;
