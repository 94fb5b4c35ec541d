//! Bundle persistence, typeahead sessions and the line-protocol service.

mod bundle_io;
mod service;
mod typeahead;

pub use bundle_io::{
    bundle_checksum, bundle_from_bytes, bundle_to_bytes, load_bundle, save_bundle,
};
pub use service::{handle_line, serve_lines, ServiceBundles, ServiceRequest, ServiceResponse};
pub use typeahead::{Edit, TypeaheadSession};
