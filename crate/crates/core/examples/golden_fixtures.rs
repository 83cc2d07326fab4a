//! Regenerates the JSON fixtures and golden outputs in `fixtures/`.
//!
//! `cargo run -p nami-core --example golden_fixtures -- fixtures`
//!
//! The discrete `fig1a` model is found by trying seeds in order until the
//! exactly fitted heuristic inverse has expected KL above 1e-3; the first hit is
//! written out and never regenerated by tests.

use std::fs;
use std::path::PathBuf;

use nami::discrete::{expected_posterior_kl, fit_inverse_exact, DiscreteBN};
use nami::inversion::{nami, stuhlmuller_invert, Direction};
use nami::{fixtures, io};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    fs::create_dir_all(&dir)?;
    let write = |name: &str, text: String| fs::write(dir.join(name), text);

    for (name, bn) in [
        ("student.json", fixtures::student()),
        ("fig1a.json", fixtures::fig1a()),
        ("fig1d.json", fixtures::fig1d()),
        ("gmm5.json", fixtures::gmm(5)),
        ("tree3.json", fixtures::binary_tree(3)),
        ("chain5.json", fixtures::chain(5)),
    ] {
        write(name, format!("{:#}\n", io::bn_to_json(&bn)))?;
    }

    let student = nami(&fixtures::student(), Direction::Forward)?;
    write("student_trace.txt", student.trace.expect("trace").render(&fixtures::student()))?;

    let g = fixtures::fig1a();
    let h = stuhlmuller_invert(&g)?.graph;
    for seed in 0.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = DiscreteBN::random(g.clone(), vec![2; g.n()], &mut rng)?;
        let kl = expected_posterior_kl(&d, &fit_inverse_exact(&d, &h)?.q)?;
        if kl > 1e-3 {
            eprintln!("fig1a_discrete.json: seed {seed}, heuristic KL {kl:.6e}");
            write("fig1a_discrete.json", format!("{:#}\n", io::discrete_to_json(&d)))?;
            break;
        }
    }
    Ok(())
}
