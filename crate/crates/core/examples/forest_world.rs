//! Generates a forest and a canyon, prints part of the geometry listing and a
//! laser scan from a respawn point.

use std::f64::consts::PI;

use plato::env::{
    generate_canyon, generate_forest, raycast_laser, respawn, CanyonParams, ForestParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> plato::Result<()> {
    let forest = generate_forest(
        4,
        &ForestParams {
            tree_radius: 1.0,
            avg_spacing: 6.0,
            ..ForestParams::default()
        },
    )?;
    println!("forest with {} trunks", forest.circles().len());
    for line in forest.to_listing().lines().take(6) {
        println!("  {line}");
    }

    let canyon = generate_canyon(4, &CanyonParams::default(), 0.25)?;
    let period = canyon.period()[0].unwrap_or(f64::NAN);
    println!("canyon with {} wall segments, period {period:.2} m", canyon.segments().len());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, field) in [("forest", &forest), ("canyon", &canyon)] {
        let x = respawn(field, 1.5, &mut rng)?;
        let scan = raycast_laser(field, &x, 15, PI, 10.0);
        let ranges: Vec<String> = scan.iter().map(|r| format!("{r:.1}")).collect();
        println!(
            "{name}: spawned at ({:.2}, {:.2}), clearance {:.2} m, scan [{}]",
            x.position.x,
            x.position.y,
            field.signed_distance(x.position),
            ranges.join(" ")
        );
    }
    Ok(())
}
