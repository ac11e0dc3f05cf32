use binvar::gaussians::psi;
use binvar::oracles::psi_simpson;
fn main() {
    for &r in &[-0.999, -0.99, -0.95, -0.9, -0.5, 0.2, 0.7, 0.89, 0.9, 0.901, 0.95, 0.99, 0.999, 1.0] {
        let v = psi(0.0, 0.0, r);
        let expect = (r.min(1.0)).asin() / (2.0 * std::f64::consts::PI);
        println!("rho={r:>7}: psi={v:.12}  arcsin={expect:.12}  diff={:.3e}", v - expect);
    }
    println!("---- eta=(0.5,1.0)");
    for &r in &[0.5, 0.89, 0.91, 0.95] {
        let v = psi(0.5, 1.0, r);
        let s = psi_simpson(0.5, 1.0, r, 200000);
        println!("rho={r}: psi={v:.12} simpson={s:.12} diff={:.3e}", v - s);
    }
}
