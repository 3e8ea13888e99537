#pragma once

// Matrix product states with second-order TEBD for the non-Hermitian
// Hamiltonian on chains and rings, and the MPS backend of the trajectory engine.

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ness/hilbert.hpp"
#include "ness/observables.hpp"
#include "ness/trajectory.hpp"

namespace ness {

struct TruncationControl {
    int chi_max = 40;
    double discard_tol = 1e-8;  ///< discarded weight allowed per truncation, relative to the bond norm
    double budget = 1e-3;       ///< cumulative discarded weight that raises a warning flag

    /// No truncation beyond numerical zeros.
    static TruncationControl unbounded() { return {std::numeric_limits<int>::max(), 0.0, 1e-3}; }
    void validate() const;
};

/// Singular values below this fraction of the largest are dropped even without truncation.
inline constexpr double kNumericalZero = 1e-14;

struct TruncationStats {
    double discarded = 0.0;  ///< cumulative discarded weight
    int max_bond = 1;
    int chi_limited = 0;     ///< truncations where chi_max forced more than discard_tol
};

/// Sites carry tensors A_j[s] (left bond x right bond). The state is kept in
/// mixed canonical form around center(): tensors to the left are left
/// isometries, those to the right are right isometries.
class Mps {
public:
    /// Bond dimension 1 product state; each local vector is normalized.
    static Mps from_product(const std::vector<Eigen::VectorXcd>& local_states);
    /// Exact MPS of a dense vector over d^M product states (site 0 most significant).
    static Mps from_dense(const Eigen::VectorXcd& psi, int sites, int local_dim);

    int sites() const { return static_cast<int>(tensors_.size()); }
    int local_dim() const { return d_; }
    int center() const { return center_; }
    /// Dimension of the bond between sites b and b+1.
    int bond_dim(int b) const;
    int max_bond_dim() const;
    const std::vector<Eigen::MatrixXcd>& tensor(int site) const { return tensors_[static_cast<std::size_t>(site)]; }
    /// Singular values from the last SVD at bond b (empty if none yet).
    const Eigen::VectorXd& singular_values(int b) const { return singular_[static_cast<std::size_t>(b)]; }

    double norm2() const;
    void move_center(int site);
    void scale(Complex factor);

    /// Applies a d^2 x d^2 gate to sites (b, b+1), index s_b * d + s_{b+1}, and
    /// splits by SVD. Returns the discarded weight relative to the bond norm.
    double apply_two_site_gate(int b, const Eigen::MatrixXcd& gate, const TruncationControl& trunc,
                               TruncationStats* stats = nullptr);
    /// A_site <- op A_site. Returns the squared norm afterwards.
    double apply_local_operator(int site, const Eigen::MatrixXcd& op);

    /// <op_j op_k> / <psi|psi>; for j == k the product op_j op_k acts on one site.
    Complex expectation_two_site(int j, int k, const Eigen::MatrixXcd& op_j, const Eigen::MatrixXcd& op_k) const;
    Complex expectation(int j, const Eigen::MatrixXcd& op) const;
    /// Dense amplitudes, site 0 most significant.
    Eigen::VectorXcd to_dense() const;
    /// Largest deviation from the isometry conditions of the canonical form.
    double isometry_defect() const;

    /// Moments of the normalized state for a fused local space with
    /// photon number photons[s] and atom occupation atoms[s] per local index.
    Moments moments(const std::vector<int>& photons, const std::vector<int>& atoms, bool with_atoms,
                    int top_level) const;
    /// <psi| n_j |psi> (unnormalized) for diagonal local weights.
    std::vector<double> site_expectations_unnormalized(const std::vector<double>& diag) const;

private:
    void shift_right(int site);
    void shift_left(int site);
    std::vector<Eigen::MatrixXcd> left_environments() const;
    std::vector<Eigen::MatrixXcd> right_environments() const;

    int d_ = 0;
    int center_ = 0;
    std::vector<std::vector<Eigen::MatrixXcd>> tensors_;
    std::vector<Eigen::VectorXd> singular_;
};

/// Local operators of the fused site space (photon-major, then atom for JCH).
struct LocalSpace {
    int dim = 0;
    int max_photons = 0;
    bool atoms = false;
    Eigen::MatrixXcd a;       ///< photon annihilation
    Eigen::MatrixXcd sigma;   ///< atom lowering (zero for BH)
    std::vector<int> photons;
    std::vector<int> atom;
};

LocalSpace make_local_space(ModelKind kind, int photons_per_site);

/// d^2 x d^2 exchange of two sites.
Eigen::MatrixXcd swap_gate(int d);

/// One Trotter step as an ordered list of gate applications. Bonds are split
/// into even and odd layers plus the ring-closure bond, with Strang ordering
/// A(dt/2) B(dt/2) C(dt) B(dt/2) A(dt/2); for even M the closure bond commutes
/// with the odd layer and the step reduces to A(dt/2) (B + C)(dt) A(dt/2).
/// On-site terms are shared equally among the bonds touching a site. The
/// closure bond (M-1, 0) is applied after swapping site M-1 next to site 0 and
/// is swapped back afterwards.
class TebdSchedule {
public:
    struct Op {
        enum Kind { Gate, Swap, Local } kind;
        int bond;   ///< MPS bond (positions bond, bond+1), or site for Local
        int gate;   ///< index into gates()
    };

    TebdSchedule(const ArraySpec& array, const ModelSpec& model, const DriveSpec& drive,
                 const DissipationSpec& diss, int photons_per_site, double dt);

    void step(Mps& mps, const TruncationControl& trunc, TruncationStats* stats = nullptr) const;
    const std::vector<Op>& ops() const { return ops_; }
    const std::vector<Eigen::MatrixXcd>& gates() const { return gates_; }
    const LocalSpace& local() const { return local_; }
    int sites() const { return m_; }
    double dt() const { return dt_; }
    /// H_eff restricted to one site (drive, detunings, coupling, loss).
    const Eigen::MatrixXcd& site_hamiltonian(int j) const { return site_h_[static_cast<std::size_t>(j)]; }

private:
    int add_gate(Eigen::MatrixXcd g);
    Eigen::MatrixXcd bond_hamiltonian(int i, int k, double wi, double wk) const;

    int m_;
    double dt_;
    double j_hop_;
    LocalSpace local_;
    std::vector<Eigen::MatrixXcd> site_h_;
    std::vector<Eigen::MatrixXcd> gates_;
    std::vector<Op> ops_;
};

/// MPS backend of the trajectory engine.
class MpsState final : public TrajectoryState {
public:
    MpsState(const TebdSchedule& schedule, const TruncationControl& trunc);

    int sites() const override { return schedule_->sites(); }
    void reset_vacuum() override;
    double norm2() const override { return mps_.norm2(); }
    void propagate() override;
    std::vector<double> jump_weights() const override;
    void apply_jump(int site) override;
    Moments moments() const override;
    std::vector<std::string> flags() const override;

    const Mps& mps() const { return mps_; }
    void set_mps(Mps m) { mps_ = std::move(m); }
    const TruncationStats& stats() const { return stats_; }
    /// Per-step lines "t discarded max_bond b_0 b_1 ...", or nullptr to stop.
    void set_dump(std::ostream* out) { dump_ = out; }

private:
    const TebdSchedule* schedule_;
    TruncationControl trunc_;
    TruncationStats stats_;
    Mps mps_;
    std::ostream* dump_ = nullptr;
    long steps_ = 0;
};

}  // namespace ness
