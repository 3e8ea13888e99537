#pragma once

// Truncated product bases and sparse operator assembly for driven, lossy
// resonator arrays in the frame rotating at the drive frequency.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ness/spectral.hpp"

namespace ness {

using Complex = std::complex<double>;
using Operator = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using StateVector = Eigen::VectorXcd;

enum class ModelKind { JCH, BH };

struct ModelSpec {
    ModelKind kind = ModelKind::BH;
    std::optional<spectral::JaynesCummingsParams> jc;
    std::optional<spectral::KerrParams> kerr;
    double drive_detuning = 0.0;  ///< laser minus cavity frequency

    static ModelSpec jaynes_cummings(double g, double delta, double drive_detuning);
    static ModelSpec bose_hubbard(double u, double drive_detuning);

    /// Throws Error(Config) unless exactly the parameter block matching `kind` is set.
    void validate() const;
};

enum class Boundary { Ring, Chain };

struct ArraySpec {
    int m = 1;
    Boundary boundary = Boundary::Ring;
    double j_hop = 0.0;

    void validate() const;
    /// Unordered nearest-neighbour pairs (j < j'). A two-site ring has a single bond.
    std::vector<std::pair<int, int>> bonds() const;
};

struct DriveSpec {
    std::vector<Complex> amplitudes;

    static DriveSpec homogeneous(int m, Complex omega);
    /// omega * exp(i * phase_step * j) on site j.
    static DriveSpec phased(int m, Complex omega, double phase_step);
};

struct DissipationSpec {
    double gamma_p = 1.0;
    double gamma_a = 0.0;  ///< atomic spontaneous emission is not modelled; must stay 0

    void validate() const;
};

struct TruncationPolicy {
    int photons_per_site = 1;                   ///< local photon levels 0..p
    std::optional<int> total_excitation_cap;    ///< keep states with sum_j N_j <= P

    void validate() const;
};

/// Largest Hilbert-space dimension build_basis accepts unless told otherwise.
inline constexpr std::size_t kDefaultMaxDimension = 4'000'000;

/// Enumeration of product states. Local states are indexed photon-major then
/// atom: local = n * 2 + s for JCH (s = 1 excited), local = n for BH. Global
/// states are ordered lexicographically with site 0 most significant.
class Basis {
public:
    static Basis build(const ArraySpec& array, ModelKind kind, const TruncationPolicy& trunc,
                       std::size_t max_dimension = kDefaultMaxDimension);

    std::size_t dim() const { return states_.size() / static_cast<std::size_t>(sites_); }
    int sites() const { return sites_; }
    int local_dim() const { return local_dim_; }
    int max_photons() const { return max_photons_; }
    ModelKind kind() const { return kind_; }
    bool has_atoms() const { return kind_ == ModelKind::JCH; }
    std::optional<int> excitation_cap() const { return cap_; }

    std::span<const std::uint8_t> local_states(std::size_t index) const {
        return {states_.data() + index * sites_, static_cast<std::size_t>(sites_)};
    }
    int photons(std::size_t index, int site) const { return photons_of(local_states(index)[site]); }
    int atom(std::size_t index, int site) const { return atom_of(local_states(index)[site]); }
    int excitations(std::size_t index) const;

    int photons_of(int local) const { return has_atoms() ? local / 2 : local; }
    int atom_of(int local) const { return has_atoms() ? local % 2 : 0; }
    int local_index(int photons, int atom) const { return has_atoms() ? photons * 2 + atom : photons; }

    /// Index of a configuration, or npos when it lies outside the truncated space.
    std::size_t index_of(std::span<const std::uint8_t> locals) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::uint64_t encode(std::span<const std::uint8_t> locals) const;

    int sites_ = 0;
    int local_dim_ = 0;
    int max_photons_ = 0;
    ModelKind kind_ = ModelKind::BH;
    std::optional<int> cap_;
    std::vector<std::uint8_t> states_;
    std::vector<std::uint64_t> codes_;  // sorted, parallel to state order
};

Basis build_basis(const ArraySpec& array, const ModelSpec& model, const TruncationPolicy& trunc,
                  std::size_t max_dimension = kDefaultMaxDimension);

Operator annihilation(const Basis& basis, int site);
Operator atom_lowering(const Basis& basis, int site);
Operator number_operator(const Basis& basis, int site);
/// sum_j (a_j^+ a_j + sigma_j^+ sigma_j^-), or sum_j a_j^+ a_j for BH.
Operator total_excitation_operator(const Basis& basis);

/// sum_j h_j + sum_j (Omega_j a_j^+ + Omega_j^* a_j) - J sum_<j,j'> (a_j^+ a_j' + h.c.)
/// with h_j = -dc a^+a + (-dc - delta) s^+s^- + g (a^+ s^- + a s^+)  (JCH)
///      h_j = -dc a^+a + U/2 a^+a^+aa                                 (BH)
Operator build_hamiltonian(const Basis& basis, const ArraySpec& array, const ModelSpec& model,
                           const DriveSpec& drive);

/// H - i gamma_p / 2 sum_j a_j^+ a_j
Operator build_effective_hamiltonian(const Operator& hamiltonian, const DissipationSpec& diss,
                                     const Basis& basis);

/// Lindblad generator L[rho] = -i (H_eff rho - rho H_eff^+) + gamma_p sum_j a_j rho a_j^+.
class Liouvillian {
public:
    Liouvillian(Operator h_eff, std::vector<Operator> jumps, double gamma_p);

    std::size_t dim() const { return static_cast<std::size_t>(h_eff_.rows()); }
    const Operator& effective_hamiltonian() const { return h_eff_; }
    const std::vector<Operator>& jumps() const { return jumps_; }
    double gamma_p() const { return gamma_p_; }

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const;

    /// Column-stacked superoperator: vec(L[rho]) = S vec(rho), dimension dim^2.
    Operator vectorized() const;

    /// max_i |(H_eff)_ii| + gamma_p * M, a cheap scale for relative tolerances.
    double scale() const { return scale_; }

private:
    Operator h_eff_;
    Operator h_eff_adj_;
    std::vector<Operator> jumps_;
    std::vector<Operator> jumps_adj_;
    double gamma_p_;
    double scale_;
};

/// Largest dim^2 build_liouvillian will materialize as a sparse superoperator.
inline constexpr std::size_t kMaxSuperoperatorDimension = 1'500'000;

Liouvillian build_liouvillian(const Operator& hamiltonian, const DissipationSpec& diss,
                              const Basis& basis);

/// Coordinate list, one "row col re im" line per stored entry.
void write_coo(std::ostream& os, const Operator& op);

/// Permutation matrix for the cyclic shift j -> j+1 of all site labels.
Operator translation_operator(const Basis& basis);

}  // namespace ness
