//! One-tailed Wilcoxon signed-rank test on paired per-repetition scores.
//!
//! ```text
//! cargo run --example wilcoxon -- results_a.txt results_b.txt
//! ```
//!
//! Each file holds one score per line. Without arguments a built-in pair of
//! score lists is used.

use puforge::evaluation::wilcoxon_signed_rank;

fn read(path: &str) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse())
        .collect::<Result<_, _>>()?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (a, b) = match args.as_slice() {
        [a, b] => (read(a)?, read(b)?),
        _ => (
            vec![0.981, 0.975, 0.990, 0.968, 0.984, 0.979, 0.992, 0.970, 0.986, 0.977],
            vec![0.962, 0.975, 0.951, 0.944, 0.970, 0.981, 0.949, 0.958, 0.966, 0.953],
        ),
    };
    let w = wilcoxon_signed_rank(&a, &b)?;
    println!(
        "n = {}, W+ = {}, p = {:.3e} ({}) for median(a - b) > 0",
        w.n,
        w.w_plus,
        w.p_value,
        if w.exact { "exact" } else { "normal approximation" }
    );
    Ok(())
}
