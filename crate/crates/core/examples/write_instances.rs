//! Writes the built-in instances as topology and demand documents.
//!
//! `cargo run -p qflow --example write_instances -- data`

use std::path::PathBuf;

use qflow::instances::{backbone_instance, shared_link_instance, Instance};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let instances = [
        ("backbone", backbone_instance(2020)),
        ("shared-link", shared_link_instance()),
    ];
    for (name, Instance { graph, demands }) in instances {
        std::fs::write(dir.join(format!("{name}.topology.json")), graph.to_json())?;
        let mut text = serde_json::to_string_pretty(&demands).expect("demands serialize");
        text.push('\n');
        std::fs::write(dir.join(format!("{name}.demands.json")), text)?;
    }
    Ok(())
}
