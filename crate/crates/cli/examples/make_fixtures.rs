//! Regenerates the CSV fixtures under `fixtures/`. Run from the workspace
//! root:
//!
//! ```text
//! cargo run -p hdwilks-cli --example make_fixtures
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use hdwilks::linmodel::DesignDims;
use hdwilks::simulate::{gen_replication, replication_stream, SimConfig, StreamRole};
use hdwilks::testkit::TestMethod;

/// Seed of the shipped null dataset; the dataset is replication 0 at c0 = 0.
const FIXTURE_SEED: u64 = 2024;

fn write_csv(path: &Path, prefix: &str, m: &DMatrix<f64>) {
    let mut out = String::new();
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
    println!("wrote {}", path.display());
}

fn main() {
    let dir = Path::new("fixtures");
    std::fs::create_dir_all(dir).unwrap();

    // Null dataset at (p, n, q, q1) = (10, 100, 50, 30): the tested block
    // is exactly zero, so every test should accept at usual levels.
    let cfg = SimConfig {
        dims: DesignDims::new(10, 100, 50, 30).unwrap(),
        rho: 0.0,
        c0_grid: vec![0.0],
        reps: 1,
        seed: FIXTURE_SEED,
        tests: TestMethod::ALL.to_vec(),
        alpha: 0.05,
    };
    let (data, _) = gen_replication(&cfg, 0.0, 0).unwrap();
    write_csv(&dir.join("null_x.csv"), "x", data.x());
    write_csv(&dir.join("null_z.csv"), "z", data.z());

    // Small design whose third column is the sum of the first two.
    let (n, p) = (30, 3);
    let mut rng = replication_stream(FIXTURE_SEED, 1, StreamRole::Noise);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let z = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => 1.0,
        1 => i as f64 / n as f64,
        2 => 1.0 + i as f64 / n as f64,
        _ => (i % 5) as f64,
    });
    write_csv(&dir.join("rankdef_x.csv"), "x", &x);
    write_csv(&dir.join("rankdef_z.csv"), "z", &z);
}
