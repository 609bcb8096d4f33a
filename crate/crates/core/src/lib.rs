//! Core pipeline stages for specification-derived security property auditing.
//!
//! The pipeline turns natural-language protocol specifications into typed
//! security properties and checks target implementations against them:
//! document discovery and indexing ([`ingest`]), program-graph extraction
//! with RFC 2119 invariant tagging ([`ingest`]), trust-model analysis and
//! property synthesis ([`propgen`]), symbol-level code resolution
//! ([`resolve`]), proof-attempt auditing ([`engine`]), and a mechanical,
//! recall-safe review filter ([`review`]). Every reasoning step goes through
//! the [`backend`] abstraction, which has a live HTTP implementation and a
//! deterministic scripted one for offline replay.

pub mod backend;
pub mod engine;
pub mod ingest;
pub mod model;
pub mod propgen;
pub mod resolve;
pub mod review;
pub mod schema;
