#pragma once

// Experiment configuration (flat key = value text), preset experiments, the
// run driver that dispatches to the dense or trajectory solvers and writes
// result tables, and the validation suites.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ness/hilbert.hpp"
#include "ness/mps.hpp"
#include "ness/observables.hpp"
#include "ness/trajectory.hpp"

namespace ness {

enum class SolverKind { Dense, TrajDense, TrajMps };

/// Which model parameter a sweep varies.
enum class SweepVariable {
    DriveDetuning,  ///< Delta_c directly
    DeltaOverG,     ///< atom-cavity detuning in units of g; dependent "auto" values follow
};

struct SweepSpec {
    SweepVariable variable = SweepVariable::DriveDetuning;
    double from = 0.0;
    double to = 0.0;
    std::size_t points = 1;
};

/// All rates are in units of gamma_p, which is therefore fixed to 1.
struct ExperimentConfig {
    std::string name = "experiment";
    std::string preset;  ///< informational

    // model
    ModelKind kind = ModelKind::JCH;
    double g = 0.0;                        ///< JCH coupling; reference coupling for U = auto
    double delta = 0.0;                    ///< cavity minus atom frequency
    std::optional<double> u;               ///< Kerr strength; empty = effective_kerr(g, delta)
    std::optional<double> drive_detuning;  ///< empty = one-particle resonance at drive_momentum

    // array and drive
    int sites = 1;
    Boundary boundary = Boundary::Ring;
    double hopping = 0.0;
    Complex omega = 2.0;                   ///< drive on site 0
    double phase_step = 0.0;               ///< Omega_j = omega exp(i j phase_step)
    std::vector<Complex> site_amplitudes;  ///< explicit per-site drive; overrides omega/phase_step
    double drive_momentum = 0.0;           ///< ring momentum used by drive_detuning = auto

    DissipationSpec dissipation;
    TruncationPolicy truncation{4, std::nullopt};

    SolverKind solver = SolverKind::Dense;
    double dt = 0.01;                      ///< in units of 1/gamma_p or 1/g (dt_in_g_units)
    bool dt_in_g_units = false;
    std::optional<double> t_transient;     ///< empty = default_transient
    int n_avg_steps = 1000;
    int n_trajectories = 100;
    std::uint64_t seed = 1;
    int workers = 1;
    TruncationControl mps;

    std::optional<SweepSpec> sweep;        ///< empty = single point
    std::string out_dir = ".";
    std::string format = "csv";            ///< csv or json

    /// Throws Error(Config) for missing or inconsistent fields.
    void validate() const;

    /// Swept variable values; without a sweep, the resolved drive detuning.
    std::vector<double> grid() const;
    /// "delta_c" or "delta_over_g".
    std::string axis_name() const;

    /// Model at a sweep value (ignored without a sweep), with the dependent
    /// "auto" quantities resolved.
    ModelSpec model_at(double x) const;
    /// Model at the first grid point.
    ModelSpec model() const;
    ArraySpec array() const { return ArraySpec{sites, boundary, hopping}; }
    DriveSpec drive() const;
    /// dt in units of 1/gamma_p.
    double dt_gamma() const;
    TrajectoryConfig trajectory() const;
};

/// Parses key = value lines; '#' starts a comment. Unknown keys or malformed
/// values throw Error(Config) naming the line.
ExperimentConfig parse_config(std::string_view text);
/// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const ExperimentConfig& config);
/// Sets one key. Besides the config keys, "hardcore = true" sets one photon per site.
void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);
/// "key=value" strings, applied in order.
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& assignments);

struct PresetInfo {
    std::string name;
    std::string description;
};

const std::vector<PresetInfo>& preset_list();
/// Fully specified configuration of a preset; `full` selects the large-scale
/// variant where a desk-scaled default exists. Overrides are applied last.
ExperimentConfig expand_preset(std::string_view name, const std::vector<std::string>& overrides = {},
                               bool full = false);

struct RunResult {
    SpectrumTable table;
    std::vector<std::uint64_t> point_seeds;  ///< master seed per point (trajectory solvers)
    std::vector<std::string> flags;          ///< run-level diagnostics
    int exit_status = 0;                     ///< 0, or 2 when a point failed to converge
    double seconds = 0.0;
};

/// Solves every grid point with the configured solver.
RunResult run_experiment(const ExperimentConfig& config);

/// Steady state observables of one point by the dense solver (null space,
/// falling back to time integration when the iterative solve stalls).
SpectrumPoint solve_dense_point(const ExperimentConfig& config, double x);
/// Ensemble estimate of one point by the trajectory engine.
SpectrumPoint solve_trajectory_point(const ExperimentConfig& config, double x, std::uint64_t master_seed,
                                     int workers);

/// Writes <out_dir>/<name>.csv (or .json) and the sidecar <name>.meta.json,
/// each through a temporary file and rename. Returns the data file path.
std::string write_outputs(const ExperimentConfig& config, const RunResult& result);
/// Table as JSON: {"axis", "columns", "rows": [{...}]}.
std::string table_json(const SpectrumTable& table);
/// Sidecar: config text, seeds, version, flags, status.
std::string sidecar_json(const ExperimentConfig& config, const RunResult& result);

/// Writes `contents` to `path` via a temporary file in the same directory.
void write_file_atomic(const std::string& path, const std::string& contents);

const char* version_string();

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct ValidateOptions {
    bool full = false;
    /// Test hook: flips the sign of the hopping in the Bloch-mode check.
    bool corrupt_hopping_sign = false;
    int workers = 1;
};

/// fast: analytic limits and closed-form identities. full: adds cross-checks
/// of the dense, trajectory and MPS solvers on small systems and the
/// acceptance suite.
std::vector<CheckResult> validate_suite(const ValidateOptions& opts);

}  // namespace ness
