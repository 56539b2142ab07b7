//! State machines for Snowflake⁺, Snowman and Frosty, plus the shared
//! bit-string, block and sampling primitives they run on.

pub mod bits;
pub mod block;
pub mod error;
pub mod frosty;
pub mod sampling;
pub mod snowflake;
pub mod snowman;

pub use bits::BitString;
pub use block::{Block, BlockFactory, BlockId, BlockStore, LabelCodec, ReportedChain};
pub use error::CoreError;
