use bvspec::bc::BoundaryConditions;
use bvspec::greenfn::{char_det, char_det_rel};
use bvspec::spectrum::{unperturbed_spectrum, RootSearchOptions};
use bvspec::C64;

fn main() {
    let r = |x: f64| C64::new(x, 0.0);
    let bcs = BoundaryConditions::new(
        3,
        0.0,
        1.0,
        &[
            (vec![r(1.0)], vec![]),
            (vec![r(0.0), r(2.0)], vec![r(0.0), r(3.0)]),
            (vec![], vec![r(1.0)]),
        ],
    )
    .unwrap();
    // Scan |det| along some radial/angular lines to see root locations.
    for k in 0..40 {
        let radius = 1.0 + 0.5 * k as f64;
        let mut min_rel = f64::INFINITY;
        let mut arg_at = 0.0;
        for i in 0..=200 {
            let th = -0.05 + (2.0 * std::f64::consts::PI / 3.0) * i as f64 / 200.0;
            let z = C64::from_polar(radius, th);
            let v = char_det_rel(&bcs, z);
            if v < min_rel {
                min_rel = v;
                arg_at = th;
            }
        }
        if min_rel < 1e-2 {
            println!("radius {radius:5.2}: min rel det {min_rel:.2e} at arg {arg_at:.3}");
        }
    }
    println!("det at 2+0.5i: {}", char_det(&bcs, C64::new(2.0, 0.5)));
    match unperturbed_spectrum(&bcs, 12, &RootSearchOptions::default()) {
        Ok(s) => println!("spectrum ok: {:?}", s.expanded().iter().take(4).collect::<Vec<_>>()),
        Err(e) => println!("spectrum error: {e}"),
    }
}
