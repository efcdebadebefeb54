//! Generate a diverse set of constraint-feasible seed filters by uniformly
//! sampling the coefficient hypercube (whose per-dimension extremes come from
//! linear programs) and rejecting candidates that violate the transmittance
//! bounds or sit within one degree of an already accepted filter.
//!
//!     cargo run --release --example seed_sampling

use chromafit::basis::cosine_basis;
use chromafit::seeding::generate_seed_set;
use chromafit::spectral::SpectralGrid;

fn main() -> chromafit::Result<()> {
    let grid = SpectralGrid::default_visible();

    for terms in [6, 8] {
        let basis = cosine_basis(&grid, terms)?;
        let seeds = generate_seed_set(&basis, 0.2, 1.0, 500, 1.0, 2024)?;

        println!("{terms}-term cosine basis, 500 seeds, f in [0.2, 1.0], theta 1 deg");
        println!("  coefficient hypercube:");
        for dim in 0..terms {
            println!(
                "    c[{dim}] in [{:+.4}, {:+.4}]",
                seeds.coeff_min[dim], seeds.coeff_max[dim]
            );
        }
        let (mean_nn, max_nn) = seeds.nearest_neighbour_stats().unwrap();
        println!("  nearest-neighbour angle: mean {mean_nn:.2} deg, max {max_nn:.2} deg");

        let min_t = seeds
            .filters
            .iter()
            .map(|f| f.min_value())
            .fold(f64::INFINITY, f64::min);
        let max_t = seeds
            .filters
            .iter()
            .map(|f| f.max_value())
            .fold(f64::NEG_INFINITY, f64::max);
        println!("  transmittance across the set: [{min_t:.3}, {max_t:.3}]\n");
    }
    Ok(())
}
