#include "ness/spectral.hpp"

#include <cmath>
#include <string>

#include "ness/error.hpp"

namespace ness::spectral {

namespace {

void check_jc(const JaynesCummingsParams& p) {
    require(p.g > 0.0 && std::isfinite(p.g), "Jaynes-Cummings coupling g must be positive and finite");
    require(std::isfinite(p.delta), "atom-cavity detuning must be finite");
}

void check_excitation(int n) {
    require(n >= 1, "excitation number must be >= 1 (the ground state has no branch), got " + std::to_string(n));
}

double sign(Branch b) { return b == Branch::Plus ? 1.0 : -1.0; }

// root - half_delta with root = sqrt(half_delta^2 + n_g2), rewritten as
// n_g2 / (root + half_delta) when the difference would cancel.
double root_minus(double half_delta, double root, double n_g2) {
    return half_delta > 0.0 ? n_g2 / (root + half_delta) : root - half_delta;
}

}  // namespace

PolaritonMode polariton_mode(int n, Branch branch, const JaynesCummingsParams& p) {
    check_excitation(n);
    check_jc(p);
    const double s = sign(branch);
    const double n_g2 = n * p.g * p.g;
    const double chi = std::sqrt(p.delta * p.delta + 4.0 * n_g2);
    // chi - s*delta, which vanishes asymptotically on the branch dominated by
    // the atom; 4 n g^2 / (chi + s*delta) there.
    const double c = root_minus(0.5 * s * p.delta, 0.5 * chi, n_g2) * 2.0;

    PolaritonMode mode;
    mode.n = n;
    mode.branch = branch;
    mode.chi = chi;
    // -delta/2 + s chi/2 = s (chi/2 - s delta/2)
    mode.frequency_offset = s * 0.5 * c;
    mode.alpha = std::sqrt(c / (2.0 * chi));
    mode.beta = s * 2.0 * p.g * std::sqrt(static_cast<double>(n)) / std::sqrt(2.0 * chi * c);
    return mode;
}

double jc_resonance_detuning(int n, Branch branch, const JaynesCummingsParams& p) {
    return polariton_mode(n, branch, p).frequency_offset / n;
}

double bh_resonance_detuning(int n, const KerrParams& k) {
    check_excitation(n);
    return 0.5 * k.u * (n - 1);
}

double effective_kerr(const JaynesCummingsParams& p) {
    check_jc(p);
    const double x = p.delta / (2.0 * p.g);
    if (x >= 0.0) return p.g * (x + 2.0 * std::sqrt(x * x + 1.0) - std::sqrt(x * x + 2.0));
    // For delta < 0 the closed form cancels to ~ (g/delta)^3; evaluate
    // omega_2^- - 2 omega_1^- with omega_n^- = -n g^2 / (|delta|/2 + s_n).
    const double h = -0.5 * p.delta;
    const double g2 = p.g * p.g;
    const double s1 = std::sqrt(h * h + g2);
    const double s2 = std::sqrt(h * h + 2.0 * g2);
    return 2.0 * g2 * g2 / ((h + s1) * (h + s2) * (s1 + s2));
}

PhotonicLimitParams photonic_limit(const JaynesCummingsParams& p) {
    check_jc(p);
    require(p.delta != 0.0, "photonic-limit expansion is undefined at zero atom-cavity detuning");
    const double ratio = p.g / std::abs(p.delta);
    PhotonicLimitParams out;
    out.delta_shift = -p.g * p.g / std::abs(p.delta);
    out.u_approx = 2.0 * p.g * ratio * ratio * ratio;
    out.in_validity_range = p.delta < 0.0 && std::abs(p.delta) / p.g >= 5.0;
    return out;
}

AtomicLimitParams atomic_limit_params(const JaynesCummingsParams& p) {
    check_jc(p);
    require(p.delta > 0.0, "atomic-limit expansion requires a positive atom-cavity detuning");
    const double ratio = p.g / p.delta;
    AtomicLimitParams out;
    out.shifted_frequency_offset = -p.g * p.g / p.delta;
    out.u_approx = p.g * ratio * ratio * ratio;
    out.vacuum_offset = p.delta;
    out.in_validity_range = p.delta / p.g >= 5.0;
    return out;
}

double delocalized_resonance(double k, Branch branch, const JaynesCummingsParams& p, double j_hop) {
    check_jc(p);
    require(std::isfinite(k), "ring momentum must be finite");
    const double eps = -2.0 * j_hop * std::cos(k);
    const double delta_k = p.delta + eps;
    const double chi_k = std::sqrt(p.g * p.g + 0.25 * delta_k * delta_k);
    return eps - 0.5 * delta_k + sign(branch) * chi_k;
}

EffectivePolaritonRates polariton_rates(const JaynesCummingsParams& p, double j_hop,
                                        std::complex<double> omega, double gamma_p) {
    const double beta = polariton_mode(1, Branch::Minus, p).beta;
    EffectivePolaritonRates out;
    out.j_pol = beta * beta * j_hop;
    out.gamma_pol = beta * beta * gamma_p;
    out.omega_pol = beta * omega;
    return out;
}

}  // namespace ness::spectral
