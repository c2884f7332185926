//! Parse an expression and evaluate its value, gradient and Hessian exactly.
use cvf::expr::parse;

fn main() -> cvf::Result<()> {
    let e = parse("exp(x1) * sin(x2) + x1^2 * x3 / (1 + x2^2)", 3)?;
    let p = [0.3, -0.7, 1.2];
    let jet = e.jet(&p, 2)?;

    println!("f       = {e}");
    println!("f(p)    = {:.12}", jet.value());
    for i in 0..3 {
        println!("df/dx{} = {:.12}", i + 1, jet.d1(i));
    }
    println!("hessian:");
    for i in 0..3 {
        let row: Vec<String> = (0..3).map(|j| format!("{:>14.9}", jet.d2(i, j))).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
