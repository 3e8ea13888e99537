#pragma once

// Closed-form eigenstructure of a single Jaynes-Cummings or Kerr resonator and
// of the one-excitation band of a resonator ring. All frequencies are offsets
// in the frame of the bare cavity (the cavity frequency never appears), in the
// same rate units as the photon loss.

#include <complex>

namespace ness::spectral {

enum class Branch { Plus, Minus };

struct JaynesCummingsParams {
    double g = 1.0;      ///< atom-photon coupling, > 0
    double delta = 0.0;  ///< cavity minus atom frequency
};

struct KerrParams {
    double u = 0.0;
    /// Negative strengths are accepted but describe an attractive nonlinearity.
    bool repulsive() const { return u >= 0.0; }
};

/// Dressed state |n,+/-> = alpha |e,n-1> + beta |g,n>.
struct PolaritonMode {
    int n = 1;
    Branch branch = Branch::Minus;
    double frequency_offset = 0.0;  ///< omega_n - n * omega_c
    double alpha = 0.0;
    double beta = 0.0;
    double chi = 0.0;               ///< sqrt(delta^2 + 4 n g^2)
};

struct EffectivePolaritonRates {
    double j_pol = 0.0;
    std::complex<double> omega_pol;
    double gamma_pol = 0.0;
};

struct PhotonicLimitParams {
    double delta_shift = 0.0;
    double u_approx = 0.0;
    bool in_validity_range = true;  ///< delta < 0 and |delta|/g >= 5
};

/// Coefficients of the effective "vacuum shifted" ladder Hamiltonian valid for
/// delta >> g.
struct AtomicLimitParams {
    double shifted_frequency_offset = 0.0;  ///< -g^2/delta
    double u_approx = 0.0;                  ///< g (g/delta)^3, coefficient of a+ a+ a a
    double vacuum_offset = 0.0;             ///< delta
    bool in_validity_range = true;          ///< delta/g >= 5
};

PolaritonMode polariton_mode(int n, Branch branch, const JaynesCummingsParams& p);

/// Drive detuning at which n photons resonantly excite |n,branch> from vacuum,
/// i.e. (omega_n - n omega_c) / n.
double jc_resonance_detuning(int n, Branch branch, const JaynesCummingsParams& p);

/// U (n - 1) / 2.
double bh_resonance_detuning(int n, const KerrParams& k);

/// omega_2^- - 2 omega_1^-: energy penalty for putting two lower polaritons in
/// one resonator. Strictly positive and increasing in delta.
double effective_kerr(const JaynesCummingsParams& p);

PhotonicLimitParams photonic_limit(const JaynesCummingsParams& p);
AtomicLimitParams atomic_limit_params(const JaynesCummingsParams& p);

/// Drive detuning resonant with the one-excitation polariton of ring momentum k
/// (hopping -J (a_j^+ a_j' + h.c.), Bloch energy -2J cos k).
double delocalized_resonance(double k, Branch branch, const JaynesCummingsParams& p, double j_hop);

/// Hopping, drive and loss seen by hard-core lower polaritons; only their
/// photonic component participates.
EffectivePolaritonRates polariton_rates(const JaynesCummingsParams& p, double j_hop,
                                        std::complex<double> omega, double gamma_p);

}  // namespace ness::spectral
