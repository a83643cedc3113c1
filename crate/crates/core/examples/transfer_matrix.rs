//! Transfer matrices across a point interaction and a density.

use schrodinger_measures::measures::SignedMeasure;
use schrodinger_measures::schrodinger::{solve_ivp, transfer_matrix, InitialData, SolverConfig, C64};

fn main() {
    let cfg = SolverConfig::default();
    let z = C64::new(2.0, 0.0);
    let mu = SignedMeasure::dirac(0.5, 1.5).add(&SignedMeasure::constant_density(0.0, 1.0, -0.3).unwrap());

    let t = transfer_matrix(&mu, z, 0.0, 1.0, &cfg).unwrap().matrix;
    println!("T(0, 1) = [[{:.6}, {:.6}], [{:.6}, {:.6}]]", t.a, t.b, t.c, t.d);
    println!("det T - 1 = {:.3e}", t.det() - 1.0);

    // f' jumps by 1.5 f(0.5) across the atom
    let init = InitialData::Classical { f: C64::new(1.0, 0.0), df: C64::new(0.0, 0.0) };
    for x in [0.5 - 1e-9, 0.5 + 1e-9] {
        let s = solve_ivp(&mu, z, 0.0, init, x, &cfg).unwrap();
        println!("x = {x:.9}  f = {:.6}  f' = {:.6}", s.f.re, s.df.re);
    }
}
