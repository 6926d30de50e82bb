//! Drive the harness from a TOML string and read back the manifest.

use relational::harness::{run, ExperimentConfig};

fn main() -> relational::Result<()> {
    let dir = std::env::temp_dir().join("relational-example");
    let src = format!(
        r#"scenario = "bec"
seed = 7
n_runs = 200

[output]
dir = "{}"

[bec]
detections = 20
"#,
        dir.display()
    );
    let cfg = ExperimentConfig::from_toml(&src)?;
    let m = run(&cfg)?;
    for p in &m.outputs {
        println!("wrote {}", p.display());
    }
    println!("{} record hashes, summary {:?}", m.record_hashes.len(), m.summary);
    match ExperimentConfig::from_toml("scenario = \"bec\"\nn_run = 5\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
