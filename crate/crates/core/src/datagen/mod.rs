//! Synthetic training data: random programs, pruning, action recovery,
//! persisted episode streams and held-out string templates.

mod csg;
mod dataset;
mod strings;
mod templates;

pub use csg::{
    prune_dead_subtrees, recover_csg_actions, sample_csg_episode, sample_csg_program, sample_csg_task,
    sample_primitive, sample_tree, CsgSample,
};
pub use dataset::{
    build_dataset, csg_episodes, load_episodes, string_episodes, DatagenError, DomainKind, Episode, GenConfig,
    Manifest,
};
pub use strings::{
    sample_expr, sample_format, sample_input, sample_string_episode, sample_string_program, InputFormat,
    StringGenConfig, StringSample,
};
pub use templates::{generate_string_templates, template_names};
