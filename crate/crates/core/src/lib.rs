//! Parallel k-nearest-neighbor search on zd-trees.
//!
//! A zd-tree is a kd-tree over Morton-ordered points in which every
//! internal node splits at the highest key bit its points disagree on. The
//! tree is built by a single pass over sorted keys, searched root-down,
//! leaf-up, or key-located, and updated by parallel batch insert and delete
//! that leave the tree exactly as a fresh build of the same points.
//!
//! ```
//! use zdtree::{datagen, Quantizer, Variant, ZdTree, DEFAULT_LEAF_CUTOFF};
//!
//! let cloud = datagen::gen_uniform_cube(2_000, 3, 7).unwrap();
//! let q = Quantizer::unit_cube(3, 7).unwrap();
//! let tree = ZdTree::from_raw(&cloud.points, q, DEFAULT_LEAF_CUTOFF).unwrap();
//! let graph = tree.knn_graph(5, Variant::Leaf).unwrap();
//! assert_eq!(graph.len(), 2_000);
//! assert!(graph.iter().all(|r| r.neighbors.len() == 5));
//! ```

pub mod bench;
pub mod cli;
pub mod datagen;
pub mod dynamic;
pub mod error;
pub mod io;
pub mod knn;
pub mod morton;
pub mod oracle;
pub mod sort;
pub mod tree;
pub mod verify;

pub use dynamic::{UpdateBatch, UpdateOp, UpdateSummary};
pub use error::{Error, Result};
pub use knn::{KnnResult, Neighbor, NeighborSet, Query, Variant, VisitStats};
pub use morton::{GridBox, MortonKey, PointId, QuantizedPoint, Quantizer, RawPoint};
pub use tree::{NodeId, NodeKind, TreeViolation, ZdNode, ZdTree, DEFAULT_LEAF_CUTOFF};
