//! Closed-form quantities of the paper's fiber: acceptance angle, fringe
//! spacing, subsource and mode counts.

use pseudothermal::optics::{acceptance_angle, fringe_spacing, mode_count, subsource_count, FiberSpec};

fn main() {
    // 200 um core diameter, NA 0.39, HeNe laser
    let fiber = FiberSpec::new(100e-6, 0.39, 633e-9).unwrap();

    println!("fiber: core radius {} m, NA {}, wavelength {} m", fiber.core_radius(), fiber.numerical_aperture(), fiber.wavelength());
    println!("acceptance half-angle  : {:.4} rad ({:.2} deg)", acceptance_angle(&fiber), acceptance_angle(&fiber).to_degrees());
    println!("fringe spacing         : {:.4e} m", fringe_spacing(&fiber));
    println!("subsources per mode    : {:.3e}", subsource_count(&fiber));
    println!("guided modes (approx)  : {:.3e}", mode_count(&fiber));
    println!("mode/subsource ratio   : {:.6} (pi^2/2 = {:.6})", mode_count(&fiber) / subsource_count(&fiber), std::f64::consts::PI.powi(2) / 2.0);
}
