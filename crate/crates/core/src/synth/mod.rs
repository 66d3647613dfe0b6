//! Synthetic catalog, query intents and session simulation with known
//! ground-truth utility.

mod catalog;
mod queries;
mod simulate;
mod spec;
mod utility;
mod world;

pub use catalog::{
    appeal, attribute_key, attribute_name, department_name, derive_popularity_fields, filler_word,
    generate_catalog, is_filler, value_token, SyntheticProduct,
};
pub use queries::{draw_sessions, generate_queries, QueryIntent, RequiredAttribute};
pub use simulate::{derive_seed, retrieve, simulate_sessions};
pub use spec::{CatalogSpec, QuerySpec, SimulationSpec, SynthSpec, UserModel};
pub use utility::{attribute_match, title_utility, true_utility};
pub use world::{generate_world, SyntheticWorld};
