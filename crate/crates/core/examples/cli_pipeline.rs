//! Drives the command-line front end in-process: simulate, screen against the
//! truth file, then classify the held-out rows.

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path().to_str().expect("utf-8 path").to_owned();
    let steps: Vec<Vec<String>> = vec![
        vec!["simulate", "--example", "1", "--p", "1500", "--seed", "4"],
        vec!["screen", "--train", "train.csv", "--pair", "1-2", "--tau", "1.5", "--truth", "truth.csv"],
        vec!["classify", "--train", "train.csv", "--test", "test.csv", "--pair", "1-2", "--tau", "1.5"],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(|a| resolve(a, &out)).collect())
    .collect();

    for args in steps {
        let mut argv = vec!["cislda".to_owned()];
        argv.extend(args.iter().cloned());
        argv.extend(["--out-dir".to_owned(), out.clone()]);
        let code = cislda::cli::run(argv);
        println!("cislda {} -> exit {code}", args.join(" "));
        if code != 0 {
            std::process::exit(code.into());
        }
    }
    let summary = std::fs::read_to_string(dir.path().join("classify.json")).expect("classify.json");
    println!("{summary}");
}

fn resolve(arg: &str, dir: &str) -> String {
    if arg.ends_with(".csv") {
        format!("{dir}/{arg}")
    } else {
        arg.to_owned()
    }
}
