//! Regenerates the bundled 100-word table.
//!
//! Each row is a Zipf law over a row-specific random ordering of the vocabulary,
//! with the exponent drawn per row, so the next-word distributions are peaked
//! (entropy well below `ln 100`) but differ from row to row.
//!
//! ```text
//! cargo run -p stts-core --example gen_word_table -- data/word_table_100.json
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stts_core::priors::WordModelTable;

const SEED: u64 = 20_240_601;

const WORDS: [&str; 100] = [
    "the", "of", "and", "to", "in", "is", "you", "that", "it", "he", "was", "for", "on", "are", "as", "with", "his",
    "they", "at", "be", "this", "have", "from", "or", "one", "had", "by", "word", "but", "not", "what", "all", "were",
    "we", "when", "your", "can", "said", "there", "use", "an", "each", "which", "she", "do", "how", "their", "if",
    "will", "up", "other", "about", "out", "many", "then", "them", "these", "so", "some", "her", "would", "make",
    "like", "him", "into", "time", "has", "look", "two", "more", "write", "go", "see", "number", "no", "way", "could",
    "people", "my", "than", "first", "water", "been", "call", "who", "oil", "its", "now", "find", "long", "down",
    "day", "did", "get", "come", "made", "may", "part", "help", "home",
];

fn zipf_row(rng: &mut ChaCha8Rng, j: usize) -> Vec<f64> {
    let s: f64 = rng.random_range(1.1..2.2);
    let mut order: Vec<usize> = (0..j).collect();
    order.shuffle(rng);
    let mut row = vec![0.0; j];
    for (rank, &w) in order.iter().enumerate() {
        row[w] = ((rank + 1) as f64).powf(-s);
    }
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= z);
    row
}

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/word_table_100.json".into());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let j = WORDS.len();
    let initial = zipf_row(&mut rng, j);
    let transitions: Vec<Vec<f64>> = (0..j).map(|_| zipf_row(&mut rng, j)).collect();
    let vocab = WORDS.iter().map(|w| w.to_string()).collect();
    let table = WordModelTable::new(vocab, initial, transitions)?;
    let h = table.row_entropies();
    let mean_h = h.iter().sum::<f64>() / h.len() as f64;
    table.save(&out)?;
    println!(
        "wrote {out}: J = {j}, mean row entropy {mean_h:.3} nats (ln J = {:.3})",
        (j as f64).ln()
    );
    Ok(())
}
