//! Certifies candidate attack classes G(s) and shows the realised bias model.
//!
//! cargo run --example attack_class

use rol::attackclass::{check_admissible_filter, realize_bias_model};
use rol::model::TransferFunction;

fn main() {
    let cases = [
        ("410/(s+40)", TransferFunction::new(&[410.0], &[1.0, 40.0])),
        ("-1/(s+1)", TransferFunction::new(&[-1.0], &[1.0, 1.0])),
        ("2", TransferFunction::new(&[2.0], &[1.0])),
        ("(s^2+1)/(s+1)", TransferFunction::new(&[1.0, 0.0, 1.0], &[1.0, 1.0])),
    ];
    for (label, g) in cases {
        match check_admissible_filter(&g) {
            Ok(cert) if cert.stable => {
                let model = realize_bias_model(&g, 1).expect("stable class realises");
                println!(
                    "{label:>14}: admissible, g1 = {:.4e}, g2 = {:.4}, bias model order {}",
                    cert.g1,
                    cert.g2,
                    model.order()
                );
            }
            Ok(cert) => println!("{label:>14}: rejected, root {:?} of sD + N is not in the open left half plane", cert.offending_root),
            Err(e) => println!("{label:>14}: {e}"),
        }
    }
}
