//! Evaluate a cubic B-spline basis and its difference penalty.
//!
//! cargo run --example basis

use dynlsm::basis::{default_basis_dim, diff_matrix, BasisSpec};

fn main() -> dynlsm::Result<()> {
    let knots = default_basis_dim(100, 10);
    let spec = BasisSpec::new(knots, 3)?;
    println!("K = {knots} interior knots, {} basis functions", spec.dim());
    println!("knot vector: {:?}", spec.knots());

    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let b = spec.eval(t)?;
        let row: Vec<String> = b.iter().map(|v| format!("{v:.4}")).collect();
        println!("b({t:.2}) = [{}]  sum = {:.12}", row.join(", "), b.sum());
    }

    let d1 = diff_matrix(spec.dim(), 1)?;
    println!("first differences:\n{}", d1.matrix());
    println!("penalty gram D'D:\n{:.0}", d1.gram());
    Ok(())
}
