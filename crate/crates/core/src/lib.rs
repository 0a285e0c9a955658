//! Encrypted, compressed FM-index for collections of genomic sequences.
//!
//! ```
//! use encfm::block_store::IndexReader;
//! use encfm::crypto::IndexKey;
//! use encfm::fasta::parse_fasta_bytes;
//! use encfm::pipeline::{build_collection_index, BuildOptions};
//! use encfm::search::{MatchPosition, Searcher};
//!
//! let collection = parse_fasta_bytes(b">a\nACGTACGTTAGC\n>b\nGGATTACA\n").unwrap();
//! let key = IndexKey::from_bytes([7; 64]);
//! let index = build_collection_index(&collection, &key, &BuildOptions::default()).unwrap();
//! let searcher = Searcher::new(IndexReader::new(index, &key), &key).unwrap();
//! assert_eq!(searcher.count(b"ACGT").unwrap(), 2);
//! assert_eq!(searcher.locate(b"TACA").unwrap(), [MatchPosition { item: 1, offset: 4 }]);
//! assert_eq!(searcher.extract(1, 2, 4).unwrap(), b"ATTA");
//! ```

pub mod alphabet;
pub mod block_store;
pub mod bwt;
pub mod cli;
pub mod corpus;
pub mod crypto;
pub mod fasta;
pub mod pipeline;
pub mod search;
