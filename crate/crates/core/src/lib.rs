//! Simulation of a synchronous anonymous network in which every vertex runs
//! the same constant-alphabet automaton. A leader builds a BFS tree, numbers
//! the vertices along a walk of the tree, and then one wave per vertex gives
//! every vertex its distance vector, from which diameter, girth, cut edges
//! and cut vertices follow.

pub mod bfs;
pub mod corpus;
pub mod engine;
pub mod enumeration;
pub mod error;
pub mod graph;
pub mod node;
pub mod oracles;
pub mod pipeline;
pub mod unary;
pub mod verify;
pub mod waves;

pub use engine::{Metrics, Signal, Trace};
pub use error::{GraphError, ProtocolError, RunError};
pub use graph::{Graph, GraphKind, GeneratorSpec, Port, PortMap, PortPolicy};
pub use node::GlobalValues;
pub use pipeline::{run_pipeline, PipelineOptions, PipelineResult};
pub use verify::{run_and_verify, verify, Verification};
