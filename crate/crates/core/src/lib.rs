pub mod bench;
pub mod csg;
pub mod datagen;
pub mod learner;
pub mod mdp;
pub mod nn;
pub mod search;
pub mod strings;
