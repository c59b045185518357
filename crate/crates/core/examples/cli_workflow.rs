//! The command-line workflow driven in-process: simulate a snapshot to a file, then fit it.

fn main() {
    let dir = std::env::temp_dir().join("lindfit-cli-workflow");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let snapshot = dir.join("xgate.json");
    let report = dir.join("report.json");
    let s = snapshot.to_str().unwrap();
    let code = lindfit::cli::run(["lindfit", "simulate", "--channel", "xgate", "--shots", "10000", "--seed", "7", "--out", s]);
    println!("simulate exit code {code}, wrote {s}");
    let r = report.to_str().unwrap();
    let code = lindfit::cli::run(["lindfit", "fit", "--in", s, "--epsilon", "1", "--samples", "200", "--report", r]);
    println!("fit exit code {code}, report at {r}");
    let text = std::fs::read_to_string(&report).expect("report");
    let v: serde_json::Value = serde_json::from_str(&text).expect("json");
    println!("verdict {} with distance {}", v["verdict"]["kind"], v["verdict"]["distance"]);
}
