#include <numbers>

#include "ness/error.hpp"
#include "ness/experiments.hpp"

namespace ness {

namespace {

ExperimentConfig base(const char* name) {
    ExperimentConfig c;
    c.name = name;
    c.preset = name;
    return c;
}

void sweep_detuning(ExperimentConfig& c, double from, double to, std::size_t points) {
    c.sweep = SweepSpec{SweepVariable::DriveDetuning, from, to, points};
}

ExperimentConfig single_jc() {
    auto c = base("single-jc");
    c.kind = ModelKind::JCH;
    c.g = 20.0;
    c.delta = 0.0;
    c.omega = 2.0;
    c.truncation = {10, std::nullopt};
    sweep_detuning(c, -30.0, 30.0, 400);
    return c;
}

ExperimentConfig single_kerr() {
    auto c = base("single-kerr");
    c.kind = ModelKind::BH;
    c.g = 20.0;  // U = effective Kerr strength of the g = 20, delta = 0 resonator
    c.omega = 2.0;
    c.truncation = {12, std::nullopt};
    sweep_detuning(c, -10.0, 20.0, 301);
    return c;
}

ExperimentConfig photonic_limit() {
    auto c = base("photonic-limit");
    c.kind = ModelKind::JCH;
    c.g = 20.0;
    c.delta = -200.0;
    c.omega = 2.0;
    c.truncation = {40, std::nullopt};
    sweep_detuning(c, -8.0, 4.0, 121);
    return c;
}

ExperimentConfig ring3(const char* name, ModelKind kind) {
    auto c = base(name);
    c.kind = kind;
    c.sites = 3;
    c.hopping = 1.0;
    c.g = 20.0;
    c.delta = kind == ModelKind::JCH ? 2.0 : 0.0;
    c.omega = 2.0;
    c.truncation = {4, 4};
    if (kind == ModelKind::JCH)
        sweep_detuning(c, -24.0, 21.0, 181);
    else
        sweep_detuning(c, -6.0, 10.0, 161);
    return c;
}

ExperimentConfig ness_vs_delta(bool full) {
    auto c = base("ness-vs-delta");
    c.kind = ModelKind::JCH;
    c.sites = full ? 16 : 8;
    c.hopping = 1.0;
    c.g = 20.0;
    c.omega = 2.0;
    c.drive_momentum = 0.0;
    c.truncation = {5, std::nullopt};  // p = 6 for the BH comparison
    c.solver = SolverKind::TrajMps;
    c.dt = 0.05;
    c.t_transient = full ? std::nullopt : std::optional<double>(10.0);
    c.n_avg_steps = full ? 5000 : 300;
    c.n_trajectories = full ? 100 : 4;
    c.sweep = SweepSpec{SweepVariable::DeltaOverG, -2.0, 2.0, full ? 9u : 5u};
    return c;
}

ExperimentConfig fermionize_bh() {
    auto c = base("fermionize-bh");
    c.kind = ModelKind::BH;
    c.sites = 3;
    c.hopping = 20.0;
    c.u = 23.4 * 20.0;
    c.omega = 0.5;
    c.truncation = {3, std::nullopt};
    sweep_detuning(c, -60.0, 40.0, 201);
    return c;
}

ExperimentConfig fermionize_jch() {
    auto c = base("fermionize-jch");
    c.kind = ModelKind::JCH;
    c.sites = 3;
    c.hopping = 20.0;
    c.g = 800.0;
    c.delta = 0.0;
    c.omega = 0.25;
    c.truncation = {2, std::nullopt};
    sweep_detuning(c, -840.0, -770.0, 141);
    return c;
}

ExperimentConfig crystal(const char* name, ModelKind kind, bool full) {
    auto c = base(name);
    c.kind = kind;
    c.sites = full ? 16 : 8;
    c.hopping = 2.0;
    c.g = 10.0;
    c.delta = 0.0;
    c.omega = 2.0;
    c.phase_step = std::numbers::pi / 2.0;
    c.drive_momentum = std::numbers::pi / 2.0;
    c.truncation = {3, std::nullopt};
    c.solver = SolverKind::TrajMps;
    c.dt = 0.5;
    c.dt_in_g_units = true;
    c.n_avg_steps = full ? 5000 : 1000;
    c.n_trajectories = full ? 100 : 20;
    c.mps.chi_max = 40;
    if (kind == ModelKind::JCH) c.sweep = SweepSpec{SweepVariable::DeltaOverG, 0.0, 1.0, 3};
    return c;
}

}  // namespace

const std::vector<PresetInfo>& preset_list() {
    static const std::vector<PresetInfo> list = {
        {"single-jc", "single JC resonator, g=20, delta=0, Omega=2: photon number and g2 vs drive detuning (dense)"},
        {"single-kerr", "single Kerr resonator with U matched to g=20: photon number and g2 vs drive detuning (dense)"},
        {"photonic-limit", "far-detuned JC resonator, delta/g=-10: near-Lorentzian response at the shifted cavity (dense)"},
        {"ring3-jch", "3-site JCH ring, J=1, g=20, delta=2J, P=4: delocalized polariton resonances (dense)"},
        {"ring3-bh", "3-site BH ring, J=1, matched U: zero-momentum Bloch mode at -2J (dense)"},
        {"ness-vs-delta", "8-site JCH ring driven at its one-particle resonance, populations vs delta/g (MPS trajectories)"},
        {"fermionize-bh", "3-site BH ring, U/J=23.4, J=20: one- and two-particle peaks; hardcore=true keeps p=1 (dense)"},
        {"fermionize-jch", "3-site JCH ring, g=800, J=20: hard-core polariton peaks; hardcore=true keeps p=1 (dense)"},
        {"crystal-jch", "8-site JCH ring, pi/2-phased drive: g2(j,k) vs separation for delta/g = 0, 1/2, 1 (MPS trajectories)"},
        {"crystal-bh", "8-site BH ring with matched U, pi/2-phased drive: g2(j,k) vs separation (MPS trajectories)"},
    };
    return list;
}

ExperimentConfig expand_preset(std::string_view name, const std::vector<std::string>& overrides, bool full) {
    ExperimentConfig c;
    if (name == "single-jc") c = single_jc();
    else if (name == "single-kerr") c = single_kerr();
    else if (name == "photonic-limit") c = photonic_limit();
    else if (name == "ring3-jch") c = ring3("ring3-jch", ModelKind::JCH);
    else if (name == "ring3-bh") c = ring3("ring3-bh", ModelKind::BH);
    else if (name == "ness-vs-delta") c = ness_vs_delta(full);
    else if (name == "fermionize-bh") c = fermionize_bh();
    else if (name == "fermionize-jch") c = fermionize_jch();
    else if (name == "crystal-jch") c = crystal("crystal-jch", ModelKind::JCH, full);
    else if (name == "crystal-bh") c = crystal("crystal-bh", ModelKind::BH, full);
    else fail(ErrorKind::Config, "unknown preset '" + std::string(name) + "' (see list-presets)");
    apply_overrides(c, overrides);
    c.validate();
    return c;
}

}  // namespace ness
