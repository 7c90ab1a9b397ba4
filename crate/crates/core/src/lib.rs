pub mod catalog;
pub mod cluster;
pub mod combiner;
pub mod detector;
pub mod evaluation;
pub mod experiment;
pub mod history;
pub mod ku;
pub mod pipeline;
pub mod profiles;
pub mod prs;
pub mod recommenders;
pub mod synthetic;
