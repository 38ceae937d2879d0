//! Undo arbitrary rotations and reflections of a sequence of embeddings.
//!
//! cargo run --example procrustes

use dynlsm::align::{path_discrepancy, procrustes_align};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> dynlsm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base: DMatrix<f64> = DMatrix::from_fn(20, 2, |_, _| StandardNormal.sample(&mut rng));
    let seq: Vec<DMatrix<f64>> = (0..6)
        .map(|m| {
            let a = 0.9 * m as f64;
            let flip = if m % 2 == 0 { 1.0 } else { -1.0 };
            let o = DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), flip * a.sin(), flip * a.cos()]);
            &base * o
        })
        .collect();
    let aligned = procrustes_align(&seq)?;
    println!("discrepancy before: {:.4}", path_discrepancy(&seq));
    println!("discrepancy after:  {:.2e}", path_discrepancy(&aligned.aligned));
    for (m, o) in aligned.rotations.iter().enumerate() {
        println!("O_{m} det = {:+.1}", o.determinant());
    }
    Ok(())
}
