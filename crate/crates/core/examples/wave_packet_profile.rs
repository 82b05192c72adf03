//! Extracts the asymptotic profile γ(t, v) of a free wave by both routes and
//! prints how well the packet picture approximates u.

use dnls_lab::harness::config::gaussian_initial;
use dnls_lab::harness::experiment::relative_gap;
use dnls_lab::solver::LinearFlow;
use dnls_lab::vector_field::apply_l;
use dnls_lab::wave_packets::{
    default_v_grid, difference_bounds, extract_gamma, extract_gamma_fourier, profile_bounds, write_profile_csv,
    PacketProfile,
};
use dnls_lab::{grid, GridSpec};

fn main() -> dnls_lab::Result<()> {
    let g = GridSpec::new(1024.0, 32768)?;
    let u0 = gaussian_initial(g, 0.05, 1.0, 0.0, 0)?;
    let flow = LinearFlow::new(&u0);
    let profile = PacketProfile::bump();
    let v_grid = default_v_grid(&u0, 4.0);

    for t in [4.0, 16.0, 64.0] {
        let u = flow.at(t)?;
        let lu = apply_l(&u)?;
        let lux = apply_l(&grid::spectral_derivative(&u, 1)?)?;
        let physical = extract_gamma(&u, &v_grid, &profile)?;
        let fourier = extract_gamma_fourier(&u, &v_grid, &profile)?;
        let r = difference_bounds(&u, &lu, &lux, &profile)?;
        let b = profile_bounds(&u, &lu, &profile)?;
        println!(
            "t = {t}: ‖γ‖∞ {:.6e}, routes differ by {:.2e}",
            physical.linf(),
            relative_gap(&physical, &fourier)
        );
        for (name, value) in r.named() {
            println!("  {name:16} {value:.4e}");
        }
        println!(
            "  profile bounds: linf {:.4} l2 {:.4} ∂_v {:.4}",
            b.linf, b.l2, b.derivative_l2
        );
    }

    let u = flow.at(16.0)?;
    let gamma = extract_gamma(&u, &v_grid, &profile)?;
    let mut out = Vec::new();
    write_profile_csv(&gamma, &mut out).expect("in-memory write");
    let text = String::from_utf8(out).expect("csv is utf-8");
    println!("first rows of the profile file:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
