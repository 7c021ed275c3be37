use fractint_core::construct::lattice_thickening;
use fractint_core::energy::{energy_fourier, energy_fourier_direct, mu_hat_norm};
use fractint_core::grid::GridSpec;
use fractint_core::measure::DiscreteMeasure;

fn main() {
    let q = 32u32;
    let g = GridSpec::new(2, 10, 1).unwrap();
    let a = lattice_thickening(q, 1.5, &g).unwrap();
    let mu = DiscreteMeasure::uniform(a, "lat").unwrap();
    println!("|A| = {}", mu.support().len());
    for xi in [[1.0, 0.0, 0.0], [32.0, 0.0, 0.0], [64.0, 0.0, 0.0], [3.0, 4.0, 0.0]] {
        println!("  |mu_hat({:?})| = {:.8}", xi, mu_hat_norm(&mu, xi));
    }
    let direct = energy_fourier_direct(&mu, 1.2, 8).unwrap().value;
    let dense = energy_fourier(&mu, 1.2, 8).unwrap().value;
    println!("cap=8: direct={direct:.8} dense={dense:.8}");
    let dense48 = energy_fourier(&mu, 1.2, 48).unwrap().value;
    println!("cap=48: dense={dense48:.8}");
}
