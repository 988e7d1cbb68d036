//! Chord diagrams, trivalent graphs based on a circle, and the operations on
//! them used by weight systems and integrals.

mod chord;
mod contract;
mod graph;
mod product;

pub use chord::{enumerate_chord_diagrams, perfect_matchings, ChordDiagram};
pub(crate) use contract::relation_triple;
pub use contract::{contract_edge, uncontract_partners, Contracted, EdgeRef, Merge, Resolution, ResolutionKind};
pub use graph::{enumerate_trivalent_graphs, permutation_sign, permutations, TrivalentGraph};
pub use product::{graph_product, is_split, GraphSum};
