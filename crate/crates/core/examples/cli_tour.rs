//! Drive the batch CLI in-process: write a scenario, run a few commands and
//! list the artifacts.

use jumplab::cli::run_command;

fn main() -> jumplab::Result<()> {
    let dir = std::env::temp_dir().join("jumplab_cli_tour");
    std::fs::create_dir_all(&dir)?;
    let scenario = dir.join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{
  "model": {"name": "ou_jump", "params": {"theta": 1.0}, "form": "raw"},
  "measure": {"atoms": [{"mark": [1.0], "weight": 1.0}]},
  "sim": {"dt": 0.01, "horizon": 5.0, "n_paths": 2000, "seed": 7},
  "tv": {"t_grid": [0.5, 1, 1.5, 2, 3, 4]}
}"#,
    )?;
    let out = dir.join("out");
    let base = ["jumplab", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    for cmd in [vec!["tv-curve"], vec!["rate-bound"], vec!["check-n", "--route", "static"], vec!["report"]] {
        let code = run_command(base.iter().copied().chain(cmd.iter().copied()));
        println!("{:<24} exit {code}", cmd.join(" "));
    }
    let code = run_command(["jumplab", "--out", out.to_str().unwrap(), "gallery", "5.3", "--p", "0.2"]);
    println!("{:<24} exit {code}", "gallery 5.3 --p 0.2");
    let mut files: Vec<_> = std::fs::read_dir(&out)?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
    files.sort();
    println!("artifacts: {files:?}");
    println!("{}", std::fs::read_to_string(out.join("tv_curve.csv"))?);
    Ok(())
}
