//! Replays every fixture script with the rule-based provider and rewrites
//! the matching `.jsonl` log. Run after changing the world or rule tables:
//!
//!     cargo run -p dejaboom-core --example regen_fixtures

use std::fs;
use std::path::Path;
use std::sync::Arc;

use dejaboom_core::session::to_jsonl;
use dejaboom_core::{dejaboom, Gateway, GameRuntime, PlayerMetadata};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let rt = GameRuntime::new(Arc::new(dejaboom()), Gateway::rule_based());
    for dir in ["scripts", "designer", "players"] {
        let mut scripts: Vec<_> = fs::read_dir(root.join(dir))
            .expect("fixture dir")
            .map(|e| e.expect("dir entry").path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        scripts.sort();
        for script in scripts {
            let id = script.file_stem().and_then(|s| s.to_str()).expect("utf-8 name").to_string();
            let text = fs::read_to_string(&script).expect("read script");
            let session = rt.play_script(PlayerMetadata::new(id), text.lines());
            fs::write(script.with_extension("jsonl"), to_jsonl(&session.log)).expect("write log");
            println!("{:<40} {:?} day {} step {}", script.display(), session.status, session.world.day, session.world.step_in_day);
        }
    }
}
