//! Splits the 3-source simplex by longest-edge bisection and prints each
//! level's worst cell diameter next to the bound for that height.
//!
//! ```text
//! cargo run --example partition
//! ```

use mixmatch::simplex::{self, PartitionStrategy};

fn main() -> mixmatch::Result<()> {
    let k = 3;
    let depth = 8;
    let cells = simplex::enumerate_cells(k, depth, &PartitionStrategy::LongestEdgeBisection)?;
    println!("height  cells  max_diameter  bound");
    for h in 0..=depth {
        let level: Vec<_> = cells.iter().filter(|c| c.height() == h).collect();
        let worst = level.iter().map(|c| c.diameter()).fold(0.0, f64::max);
        println!("{h:>6}  {:>5}  {worst:>12.5}  {:.5}", level.len(), simplex::diameter_bound(h, k)?);
    }

    // Coordinate halving gives a different tiling of the same simplex.
    let halving = PartitionStrategy::CoordinateHalving { seed: 7 };
    let (a, b) = simplex::root_cell(k)?.split(&halving)?;
    println!("\ncoordinate halving, first split:\n  {}\n  {}", a.vertices_json(), b.vertices_json());
    Ok(())
}
