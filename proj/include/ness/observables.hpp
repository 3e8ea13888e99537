#pragma once

// Populations, equal-time photon coherences g2(j,k), detuning sweeps and peak
// location. All observables here are diagonal in the Fock basis, so every
// state representation reduces to the same set of moments.

#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ness/hilbert.hpp"
#include "ness/steady.hpp"

namespace ness {

/// Populations below this make g2 undefined.
inline constexpr double kG2Floor = 1e-10;
/// Top-photon-level population per site above which a state is flagged as truncated.
inline constexpr double kTruncationSentinel = 1e-4;

/// Marker for values that do not exist (g2 of an empty mode, failed sweep points).
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
inline bool is_undefined(double x) { return std::isnan(x); }

/// Fock-diagonal moments of a normalized state.
struct Moments {
    Eigen::VectorXd photons;    ///< <a_j^+ a_j>
    Eigen::VectorXd atoms;      ///< <s_j^+ s_j^->; empty without atoms
    Eigen::MatrixXd pairs;      ///< <a_j^+ a_k^+ a_j a_k>, symmetric
    Eigen::VectorXd top_level;  ///< probability of the highest retained photon level on site j

    static Moments zero(int sites, bool with_atoms);
    int sites() const { return static_cast<int>(photons.size()); }
    bool has_atoms() const { return atoms.size() > 0; }

    Moments& operator+=(const Moments& other);
    Moments& operator*=(double s);
    /// Throws Error(InvalidArgument) when the shapes differ.
    void require_same_shape(const Moments& other) const;
};

/// Moments from the occupation probabilities p_i of the basis states (sum 1).
Moments moments_from_probabilities(const Basis& basis, const Eigen::VectorXd& probabilities);
Moments moments(const Basis& basis, const DensityMatrix& rho);
/// The state is normalized first; a zero state is an error.
Moments moments(const Basis& basis, const StateVector& psi);

/// g2(j,k) = <a_j^+ a_k^+ a_j a_k> / (<a_j^+ a_j> <a_k^+ a_k>), or kUndefined
/// when either population is at or below `floor`.
double g2(const Moments& m, int j, int k, double floor = kG2Floor);
double g2(const Basis& basis, const DensityMatrix& rho, int j, int k);
double g2(const Basis& basis, const StateVector& psi, int j, int k);

struct ObservableSet {
    Eigen::VectorXd photon_number;
    Eigen::VectorXd atomic_excitation;  ///< empty without atoms
    Eigen::MatrixXd g2;                 ///< symmetric; kUndefined where a mode is empty
    double total_n = 0.0;               ///< sum_j (<a_j^+ a_j> + <s_j^+ s_j^->)
    double n_avg = 0.0;                 ///< site averages
    double atom_avg = 0.0;
    Eigen::VectorXd g2_separation;      ///< mean over j of g2(j, j+r mod M), r = 0..M/2
    bool truncated = false;             ///< truncation sentinel tripped

    int sites() const { return static_cast<int>(photon_number.size()); }
    bool has_atoms() const { return atomic_excitation.size() > 0; }
    /// All fields zero (used as the error set of exact points).
    static ObservableSet zero(int sites, bool with_atoms);
};

ObservableSet observables_from(const Moments& m);
ObservableSet observe(const Basis& basis, const DensityMatrix& rho);
ObservableSet observe(const Basis& basis, const StateVector& psi);

/// Per-site populations only (g2 left empty).
ObservableSet populations(const Basis& basis, const DensityMatrix& rho);
ObservableSet populations(const Basis& basis, const StateVector& psi);

/// Mean and standard error of ensemble observables from per-sample moments.
/// Ratios are formed from averaged numerators and denominators; errors are
/// jackknife estimates, which equal std/sqrt(R) for the linear observables.
/// With a single sample the errors are undefined.
struct Estimate {
    ObservableSet mean;
    ObservableSet error;
    Moments moments;  ///< averaged moments
    int samples = 0;
};
Estimate estimate(const std::vector<Moments>& samples);

/// One detuning point of a sweep.
struct SpectrumPoint {
    double delta_c = 0.0;
    ObservableSet value;
    ObservableSet error;  ///< standard errors; zero for exact solves
    bool ok = true;
    std::vector<std::string> flags;
};

struct SpectrumTable {
    std::string axis = "delta_c";  ///< name of the swept variable (first CSV column)
    int sites = 0;
    bool has_atoms = false;
    std::vector<SpectrumPoint> points;

    std::vector<double> grid() const;
    /// Numeric column names in CSV order, without delta_c and the SE duplicates.
    std::vector<std::string> observable_columns() const;
    /// Values of a named column; failed points and undefined values give kUndefined.
    /// A "se_" prefix selects the standard error of the column.
    std::vector<double> column(const std::string& name) const;
};

/// Shortest round-trip decimal form; NA for undefined values.
std::string format_number(double x);

/// CSV with header: axis, observables, se_ columns, status, flags. Undefined values are NA.
void write_csv(const SpectrumTable& table, std::ostream& out);

using PointSolver = std::function<SpectrumPoint(double delta_c)>;

struct SweepOptions {
    int workers = 1;                  ///< 0 = hardware concurrency
    double max_abs_detuning = 1e6;    ///< grid bound, in units of gamma_p
    std::size_t max_points = 100000;
};

/// Evaluates `solve` at every grid point. A point whose solver throws is kept,
/// marked failed with the message as a flag, and the sweep continues.
SpectrumTable sweep_spectrum(int sites, bool has_atoms, const std::vector<double>& grid,
                             const PointSolver& solve, const SweepOptions& opts = {});

/// n points from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

struct Peak {
    double center = 0.0;
    double height = 0.0;
    double width = kUndefined;  ///< full width at half prominence
    double prominence = 0.0;
};

struct PeakOptions {
    double min_prominence = 0.0;
    /// Peaks with prominence below this fraction of the data range are dropped.
    double min_relative_prominence = 1e-6;
};

/// Local maxima refined by a parabola through the three grid points around
/// each, ordered by position. Undefined values split the data into segments.
std::vector<Peak> locate_peaks(const std::vector<double>& x, const std::vector<double>& y,
                               const PeakOptions& opts = {});
std::vector<Peak> locate_peaks(const SpectrumTable& table, const std::string& column,
                               const PeakOptions& opts = {});
/// Peak of largest height, if any.
std::optional<Peak> highest_peak(const std::vector<Peak>& peaks);

/// The grid value nearest to x and its index.
std::size_t nearest_index(const std::vector<double>& grid, double x);

}  // namespace ness
