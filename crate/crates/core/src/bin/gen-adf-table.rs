//! Regenerates the quadratic-variant unit-root critical value table shipped
//! at `crates/core/data/adf_quadratic_critical_values.csv`.
//!
//! Usage: gen-adf-table [--seed S] [--replications R] [--out PATH]

use std::io::Write;

use trendpipe::detrend::generate_quadratic_cv_table;

const SIZES: [usize; 3] = [100, 250, 500];

fn main() {
    let mut seed: u64 = 20240811;
    let mut replications: usize = 50_000;
    let mut out_path = String::from("crates/core/data/adf_quadratic_critical_values.csv");

    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        let value = |args: &mut dyn Iterator<Item = String>| {
            args.next().unwrap_or_else(|| {
                eprintln!("missing value for {arg}");
                std::process::exit(2);
            })
        };
        match arg.as_str() {
            "--seed" => seed = value(&mut args).parse().expect("seed"),
            "--replications" => replications = value(&mut args).parse().expect("replications"),
            "--out" => out_path = value(&mut args),
            other => {
                eprintln!("unknown argument {other}");
                std::process::exit(2);
            }
        }
    }

    let rows = generate_quadratic_cv_table(seed, replications, &SIZES).expect("simulation");
    let mut file = std::fs::File::create(&out_path).expect("create output");
    writeln!(
        file,
        "# Monte Carlo critical values for the quadratic-deterministics unit-root t-statistic."
    )
    .unwrap();
    writeln!(
        file,
        "# {replications} Gaussian random-walk replications per size, seed {seed}."
    )
    .unwrap();
    writeln!(
        file,
        "# Regenerate with: cargo run -p trendpipe --release --bin gen-adf-table -- --seed {seed} --replications {replications}"
    )
    .unwrap();
    writeln!(file, "n,cv_1pct,cv_5pct,cv_10pct").unwrap();
    for r in rows {
        writeln!(file, "{},{:.5},{:.5},{:.5}", r.n, r.cv_1pct, r.cv_5pct, r.cv_10pct).unwrap();
    }
    println!("wrote {out_path}");
}
