//! Driving a pipeline from a TOML config, as the `chainrec run` binary does.
use chainrec::cli;
use chainrec::config::RunConfig;

const CONFIG: &str = r#"
pipeline = "components"

[space]
cells = [101]
centered = true

[system]
name = "logistic"
period = 2.0

[epsilon]
snap_floor = true
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::parse(CONFIG, std::path::Path::new("."), &["space.cells=[151]".into()])?;
    print!("{}", cfg.echo());
    let out = std::env::temp_dir().join("chainrec-run-config");
    let outcome = cli::run(&cfg, &out)?;
    println!("exit {} with {} components; files in {}", outcome.exit, outcome.summary["components"], out.display());
    Ok(())
}
