#pragma once

// Acceptance suite: one check per published observable or property, each
// with its own runtime budget. Criteria whose projected runtime exceeds the
// budget report the projection instead of running, unless run_long is set.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ness/experiments.hpp"

namespace ness {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    int workers = 1;
    /// Run criteria whose projected runtime exceeds their budget.
    bool run_long = false;
    /// Criteria to run (1..10); empty = all.
    std::vector<int> only;
    /// Called after each criterion finishes.
    std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// Dense sweep of `config` over `grid` (drive detuning or the configured sweep variable).
SpectrumTable dense_scan(const ExperimentConfig& config, const std::vector<double>& grid, int workers);

/// Extremum of a column near `reference`: a coarse scan over reference +- halfwidth
/// picks the largest peak (or deepest dip), then a fine scan of three coarse
/// steps around it refines the location. Empty when the window holds no extremum.
std::optional<Peak> refine_extremum(const ExperimentConfig& config, const std::string& column, double reference,
                                    double halfwidth, double coarse_step, double fine_step, bool maximum,
                                    int workers);

/// Drive detunings of the zero-momentum one-particle resonance (lower branch
/// for JCH) and of the two-particle resonance of a ring: half the energy of the
/// two-excitation eigenstate with the largest overlap with the state the drive
/// creates from vacuum in second order. For JCH the search is restricted to the
/// lower quarter of the polariton spectrum.
struct RingResonances {
    double one_particle = 0.0;
    double two_particle = 0.0;
};
RingResonances ring_resonances(const ExperimentConfig& config);

}  // namespace ness
