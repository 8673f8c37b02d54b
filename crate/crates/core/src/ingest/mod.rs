//! Record shards, embedding files and deterministic subsampling.

mod embeddings;
mod record;
mod sample;
mod shards;

pub use embeddings::{load_embeddings, EmbeddingError, EmbeddingMatrix};
pub use record::{parse_record, FaceBox, RecordError, SampleRecord};
pub use sample::reservoir_sample;
pub use shards::{read_shard, read_shards, stream_shards, IngestError, IngestTally, ShardManifest, ShardStream};
