//! Core of the analytics service framework: a metadata registry with
//! catalog projection and federation, FAIR-style auditing, a YAML workflow
//! engine, a parameter-study experiment executor, a multi-provider
//! translation facade, archive-based data staging, and token/RBAC security.

pub mod catalog;
pub mod config;
pub mod experiment;
pub mod fair;
pub mod federation;
pub mod nlp;
pub mod registry;
pub mod security;
pub mod staging;
pub mod timefmt;
pub mod workflow;
