//! Half-line m-functions of the free potential and of -2 sech², with the
//! Weyl disks that bound them and a boundary value on the real axis.

use schrodinger_measures::measures::SignedMeasure;
use schrodinger_measures::potentials;
use schrodinger_measures::schrodinger::C64;
use schrodinger_measures::weyl::{boundary_value, green_diagonal, m_halfline, weyl_disk, Side, WeylConfig, DEFAULT_Y_SCHEDULE};

fn main() {
    let cfg = WeylConfig::default();
    let soliton = potentials::standard_soliton();
    let z = C64::new(1.0, 0.5);

    for (name, mu) in [("free", SignedMeasure::zero()), ("soliton", soliton.clone())] {
        let p = m_halfline(&mu, 0.0, z, Side::Plus, &cfg).unwrap();
        let m = m_halfline(&mu, 0.0, z, Side::Minus, &cfg).unwrap();
        println!("{name:8} m+ = {:.8}  m- = {:.8}", p.value, m.value);
    }

    println!("\ndisk radii for the soliton at z = {z}");
    for r in [2.0, 5.0, 10.0, 20.0] {
        let d = weyl_disk(&soliton, 0.0, z, Side::Plus, r, &cfg).unwrap();
        println!("  R = {r:4}  center = {:.6}  radius = {:.3e}", d.center, d.radius);
    }

    let b = boundary_value(&soliton, 0.0, 1.0, Side::Plus, &DEFAULT_Y_SCHEDULE, &cfg).unwrap();
    println!("\nm+(0, 1 + i0) = {:.6} (error {:.1e}, converged {})", b.value, b.error, b.converged);

    let g = green_diagonal(&soliton, 0.0, C64::new(-4.0, 0.0), &cfg.solver).unwrap();
    println!("G(0, 0; -4) = {:.8}, Wronskian route {:.8}", g.value.re, g.via_wronskian.re);
}
