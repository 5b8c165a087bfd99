//! Ranks methods across datasets, reading a score CSV from stdin when given
//! `-`, otherwise using a built-in example.
//!
//! cargo run --example rank_table
//! cargo run --example rank_table -- - < results/scores.csv

use std::io::Read;

use tabular_ssl::metrics::{rank_aggregate_with, read_score_matrix, TieRule};

const EXAMPLE: &str = "\
method,wine,adult,covertype
none,0.71,0.80,0.66
fpl,0.73,0.80,0.69
r-fpl,0.74,0.81,0.69
cpl,0.72,0.82,0.70
r-cpl,0.75,0.82,0.71
";

fn main() -> tabular_ssl::Result<()> {
    let mut text = EXAMPLE.to_string();
    if std::env::args().nth(1).as_deref() == Some("-") {
        text.clear();
        std::io::stdin()
            .read_to_string(&mut text)
            .expect("read scores from stdin");
    }
    let scores = read_score_matrix(text.as_bytes())?;
    for rule in [TieRule::Mean, TieRule::Min] {
        println!("ties: {rule:?}");
        print!("{}", rank_aggregate_with(&scores, true, rule)?.render_text());
    }
    Ok(())
}
