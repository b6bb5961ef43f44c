//! Regenerates the committed fixture directories.
//!
//! ```text
//! cargo run -p eeio-core --example write_fixtures -- fixtures
//! ```

fn main() -> std::io::Result<()> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    eeio_core::synthetic::write_fixtures(std::path::Path::new(&root))
}
