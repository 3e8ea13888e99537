#include "ness/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#include "ness/error.hpp"
#include "ness/steady.hpp"

namespace ness {

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::Config, msg); }

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
        config_error(std::string(key) + ": expected a finite number, got '" + std::string(v) + "'");
    return x;
}

long long parse_integer(std::string_view key, std::string_view v) {
    long long x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        config_error(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
    return x;
}

int parse_int(std::string_view key, std::string_view v) {
    const long long x = parse_integer(key, v);
    if (x < -1'000'000'000LL || x > 1'000'000'000LL) config_error(std::string(key) + ": value out of range");
    return static_cast<int>(x);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
    std::uint64_t x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        config_error(std::string(key) + ": expected an unsigned integer, got '" + std::string(v) + "'");
    return x;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    config_error(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::optional<double> parse_auto_double(std::string_view key, std::string_view v) {
    if (v == "auto") return std::nullopt;
    return parse_double(key, v);
}

std::string num(double x) { return format_number(x); }

std::string auto_num(const std::optional<double>& x) { return x ? num(*x) : "auto"; }

const char* solver_name(SolverKind s) {
    switch (s) {
    case SolverKind::Dense: return "dense";
    case SolverKind::TrajDense: return "traj-dense";
    case SolverKind::TrajMps: return "traj-mps";
    }
    return "dense";
}

const char* variable_name(SweepVariable v) {
    return v == SweepVariable::DriveDetuning ? "drive_detuning" : "delta_over_g";
}

SweepSpec& sweep_of(ExperimentConfig& c) {
    if (!c.sweep) c.sweep = SweepSpec{};
    return *c.sweep;
}

// "drive.amplitude_re[3]" -> ("drive.amplitude_re", 3)
std::optional<std::pair<std::string, std::size_t>> indexed_key(std::string_view key) {
    const auto open = key.find('[');
    if (open == std::string_view::npos || key.back() != ']') return std::nullopt;
    const std::string_view idx = key.substr(open + 1, key.size() - open - 2);
    std::size_t i = 0;
    auto res = std::from_chars(idx.data(), idx.data() + idx.size(), i);
    if (res.ec != std::errc() || res.ptr != idx.data() + idx.size() || idx.empty())
        config_error(std::string(key) + ": malformed site index");
    if (i >= 100000) config_error(std::string(key) + ": site index out of range");
    return std::make_pair(std::string(key.substr(0, open)), i);
}

}  // namespace

void apply_override(ExperimentConfig& c, std::string_view key_in, std::string_view value_in) {
    const std::string_view key = trim(key_in);
    const std::string_view v = trim(value_in);
    const std::string k(key);
    if (v.empty()) config_error(k + ": missing value");

    if (auto idx = indexed_key(key)) {
        const auto& [base, i] = *idx;
        if (base != "drive.amplitude_re" && base != "drive.amplitude_im") config_error("unknown key '" + k + "'");
        if (c.site_amplitudes.size() <= i) c.site_amplitudes.resize(i + 1, Complex(0.0));
        const double x = parse_double(key, v);
        Complex& a = c.site_amplitudes[i];
        a = base == "drive.amplitude_re" ? Complex(x, a.imag()) : Complex(a.real(), x);
        return;
    }

    if (k == "name") c.name = std::string(v);
    else if (k == "preset") c.preset = std::string(v);
    else if (k == "model.kind") {
        if (v == "jch") c.kind = ModelKind::JCH;
        else if (v == "bh") c.kind = ModelKind::BH;
        else config_error("model.kind: expected jch or bh");
    } else if (k == "model.g") c.g = parse_double(key, v);
    else if (k == "model.delta") c.delta = parse_double(key, v);
    else if (k == "model.u") c.u = parse_auto_double(key, v);
    else if (k == "model.drive_detuning") c.drive_detuning = parse_auto_double(key, v);
    else if (k == "array.sites") c.sites = parse_int(key, v);
    else if (k == "array.boundary") {
        if (v == "ring") c.boundary = Boundary::Ring;
        else if (v == "chain") c.boundary = Boundary::Chain;
        else config_error("array.boundary: expected ring or chain");
    } else if (k == "array.hopping") c.hopping = parse_double(key, v);
    else if (k == "drive.omega_re") c.omega = Complex(parse_double(key, v), c.omega.imag());
    else if (k == "drive.omega_im") c.omega = Complex(c.omega.real(), parse_double(key, v));
    else if (k == "drive.phase_step") c.phase_step = parse_double(key, v);
    else if (k == "drive.momentum") c.drive_momentum = parse_double(key, v);
    else if (k == "drive.amplitudes") {
        if (v != "derived") config_error("drive.amplitudes: only 'derived' resets explicit amplitudes");
        c.site_amplitudes.clear();
    } else if (k == "dissipation.gamma_p") c.dissipation.gamma_p = parse_double(key, v);
    else if (k == "dissipation.gamma_a") c.dissipation.gamma_a = parse_double(key, v);
    else if (k == "truncation.photons_per_site") c.truncation.photons_per_site = parse_int(key, v);
    else if (k == "truncation.excitation_cap") {
        if (v == "none") c.truncation.total_excitation_cap.reset();
        else c.truncation.total_excitation_cap = parse_int(key, v);
    } else if (k == "hardcore" || k == "truncation.hardcore") {
        if (parse_bool(key, v)) c.truncation.photons_per_site = 1;
    } else if (k == "solver") {
        if (v == "dense") c.solver = SolverKind::Dense;
        else if (v == "traj-dense") c.solver = SolverKind::TrajDense;
        else if (v == "traj-mps") c.solver = SolverKind::TrajMps;
        else config_error("solver: expected dense, traj-dense or traj-mps");
    } else if (k == "trajectory.dt") c.dt = parse_double(key, v);
    else if (k == "trajectory.dt_units") {
        if (v == "gamma") c.dt_in_g_units = false;
        else if (v == "g") c.dt_in_g_units = true;
        else config_error("trajectory.dt_units: expected gamma or g");
    } else if (k == "trajectory.t_transient") c.t_transient = parse_auto_double(key, v);
    else if (k == "trajectory.n_avg_steps") c.n_avg_steps = parse_int(key, v);
    else if (k == "trajectory.n_trajectories") c.n_trajectories = parse_int(key, v);
    else if (k == "trajectory.seed") c.seed = parse_u64(key, v);
    else if (k == "trajectory.workers") c.workers = parse_int(key, v);
    else if (k == "mps.chi_max") c.mps.chi_max = parse_int(key, v);
    else if (k == "mps.discard_tol") c.mps.discard_tol = parse_double(key, v);
    else if (k == "mps.budget") c.mps.budget = parse_double(key, v);
    else if (k == "sweep.variable") {
        if (v == "none") c.sweep.reset();
        else if (v == "drive_detuning") sweep_of(c).variable = SweepVariable::DriveDetuning;
        else if (v == "delta_over_g") sweep_of(c).variable = SweepVariable::DeltaOverG;
        else config_error("sweep.variable: expected none, drive_detuning or delta_over_g");
    } else if (k == "sweep.from") sweep_of(c).from = parse_double(key, v);
    else if (k == "sweep.to") sweep_of(c).to = parse_double(key, v);
    else if (k == "sweep.points") {
        const long long n = parse_integer(key, v);
        if (n < 1) config_error("sweep.points must be at least 1");
        sweep_of(c).points = static_cast<std::size_t>(n);
    } else if (k == "output.dir") c.out_dir = std::string(v);
    else if (k == "output.format") c.format = std::string(v);
    else config_error("unknown key '" + k + "'");
}

void apply_overrides(ExperimentConfig& c, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) config_error("override '" + a + "' is not of the form key=value");
        apply_override(c, std::string_view(a).substr(0, eq), std::string_view(a).substr(eq + 1));
    }
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            config_error("line " + std::to_string(line_no) + ": expected key = value");
        try {
            apply_override(c, line.substr(0, eq), line.substr(eq + 1));
        } catch (const Error& e) {
            config_error("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return c;
}

std::string to_text(const ExperimentConfig& c) {
    std::ostringstream os;
    auto kv = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
    kv("name", c.name);
    if (!c.preset.empty()) kv("preset", c.preset);
    kv("model.kind", c.kind == ModelKind::JCH ? "jch" : "bh");
    kv("model.g", num(c.g));
    kv("model.delta", num(c.delta));
    kv("model.u", auto_num(c.u));
    kv("model.drive_detuning", auto_num(c.drive_detuning));
    kv("array.sites", std::to_string(c.sites));
    kv("array.boundary", c.boundary == Boundary::Ring ? "ring" : "chain");
    kv("array.hopping", num(c.hopping));
    kv("drive.omega_re", num(c.omega.real()));
    kv("drive.omega_im", num(c.omega.imag()));
    kv("drive.phase_step", num(c.phase_step));
    kv("drive.momentum", num(c.drive_momentum));
    for (std::size_t j = 0; j < c.site_amplitudes.size(); ++j) {
        os << "drive.amplitude_re[" << j << "] = " << num(c.site_amplitudes[j].real()) << '\n';
        os << "drive.amplitude_im[" << j << "] = " << num(c.site_amplitudes[j].imag()) << '\n';
    }
    kv("dissipation.gamma_p", num(c.dissipation.gamma_p));
    kv("dissipation.gamma_a", num(c.dissipation.gamma_a));
    kv("truncation.photons_per_site", std::to_string(c.truncation.photons_per_site));
    kv("truncation.excitation_cap",
       c.truncation.total_excitation_cap ? std::to_string(*c.truncation.total_excitation_cap) : "none");
    kv("solver", solver_name(c.solver));
    kv("trajectory.dt", num(c.dt));
    kv("trajectory.dt_units", c.dt_in_g_units ? "g" : "gamma");
    kv("trajectory.t_transient", auto_num(c.t_transient));
    kv("trajectory.n_avg_steps", std::to_string(c.n_avg_steps));
    kv("trajectory.n_trajectories", std::to_string(c.n_trajectories));
    kv("trajectory.seed", std::to_string(c.seed));
    kv("trajectory.workers", std::to_string(c.workers));
    kv("mps.chi_max", std::to_string(c.mps.chi_max));
    kv("mps.discard_tol", num(c.mps.discard_tol));
    kv("mps.budget", num(c.mps.budget));
    if (c.sweep) {
        kv("sweep.variable", variable_name(c.sweep->variable));
        kv("sweep.from", num(c.sweep->from));
        kv("sweep.to", num(c.sweep->to));
        kv("sweep.points", std::to_string(c.sweep->points));
    } else {
        kv("sweep.variable", "none");
    }
    kv("output.dir", c.out_dir);
    kv("output.format", c.format);
    return os.str();
}

void ExperimentConfig::validate() const {
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
        config_error("name must be non-empty and contain no path separators");
    if (dissipation.gamma_p != 1.0)
        config_error("rates are in units of the photon loss: dissipation.gamma_p must be 1");
    dissipation.validate();
    if (sites < 1) config_error("array.sites must be at least 1");
    if (kind == ModelKind::JCH && !(g > 0.0)) config_error("model.g must be positive for the JCH model");
    if (kind == ModelKind::BH && !u && !(g > 0.0))
        config_error("model.u = auto needs a positive model.g to map onto the effective Kerr strength");
    if (!drive_detuning && boundary == Boundary::Chain && sites > 2)
        config_error("model.drive_detuning = auto needs a ring (momentum resonances)");
    if (!site_amplitudes.empty() && static_cast<int>(site_amplitudes.size()) != sites)
        config_error("explicit drive amplitudes must list every site");
    truncation.validate();
    if (dt_in_g_units && !(g > 0.0)) config_error("trajectory.dt_units = g needs a positive model.g");
    if (solver != SolverKind::Dense) {
        trajectory().validate(dissipation.gamma_p);
        if (workers < 0) config_error("trajectory.workers must be non-negative");
    }
    if (solver == SolverKind::TrajMps) {
        if (truncation.total_excitation_cap) config_error("the MPS solver does not support a total excitation cap");
        mps.validate();
    }
    if (sweep) {
        if (sweep->points < 1) config_error("sweep.points must be at least 1");
        if (sweep->points > 1 && !(sweep->to > sweep->from)) config_error("sweep.to must exceed sweep.from");
        if (sweep->variable == SweepVariable::DeltaOverG && !(g > 0.0))
            config_error("a delta_over_g sweep needs a positive model.g");
    }
    if (format != "csv" && format != "json") config_error("output.format must be csv or json");
    model().validate();
    array().validate();
}

std::vector<double> ExperimentConfig::grid() const {
    if (!sweep) return {model_at(0.0).drive_detuning};
    if (sweep->points == 1) return {sweep->from};
    return linear_grid(sweep->from, sweep->to, sweep->points);
}

std::string ExperimentConfig::axis_name() const {
    return sweep && sweep->variable == SweepVariable::DeltaOverG ? "delta_over_g" : "delta_c";
}

ModelSpec ExperimentConfig::model_at(double x) const {
    double d = delta;
    std::optional<double> dc = drive_detuning;
    if (sweep && sweep->variable == SweepVariable::DeltaOverG) d = x * g;
    if (sweep && sweep->variable == SweepVariable::DriveDetuning) dc = x;
    if (!dc) {
        // ring of M >= 3 has Bloch energies -2J cos k; two sites share a single bond
        const double j_eff = sites >= 3 ? hopping : (sites == 2 ? 0.5 * hopping : 0.0);
        if (kind == ModelKind::JCH)
            dc = spectral::delocalized_resonance(drive_momentum, spectral::Branch::Minus, {g, d}, j_eff);
        else
            dc = -2.0 * j_eff * std::cos(drive_momentum);
    }
    if (kind == ModelKind::JCH) return ModelSpec::jaynes_cummings(g, d, *dc);
    const double uu = u ? *u : spectral::effective_kerr({g, d});
    return ModelSpec::bose_hubbard(uu, *dc);
}

ModelSpec ExperimentConfig::model() const { return model_at(sweep ? sweep->from : 0.0); }

DriveSpec ExperimentConfig::drive() const {
    if (!site_amplitudes.empty()) return DriveSpec{site_amplitudes};
    return DriveSpec::phased(sites, omega, phase_step);
}

double ExperimentConfig::dt_gamma() const { return dt_in_g_units ? dt / g : dt; }

TrajectoryConfig ExperimentConfig::trajectory() const {
    TrajectoryConfig t;
    t.dt = dt_gamma();
    t.t_transient = t_transient ? *t_transient
                                : default_transient(kind == ModelKind::JCH ? std::optional<double>(g) : std::nullopt,
                                                    dissipation.gamma_p);
    t.n_avg_steps = n_avg_steps;
    t.n_trajectories = n_trajectories;
    t.master_seed = seed;
    t.backend = solver == SolverKind::TrajMps ? Backend::Mps : Backend::Dense;
    t.workers = workers;
    return t;
}

SpectrumPoint solve_dense_point(const ExperimentConfig& config, double x) {
    const ModelSpec model = config.model_at(x);
    const ArraySpec array = config.array();
    const Basis basis = build_basis(array, model, config.truncation);
    const Operator h = build_hamiltonian(basis, array, model, config.drive());
    const Liouvillian l = build_liouvillian(h, config.dissipation, basis);
    SpectrumPoint p;
    SteadyStateSolution sol;
    try {
        sol = steady_state_nullspace(l);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonConvergence || std::string(e.what()).rfind("steady state is not unique", 0) == 0)
            throw;
        std::vector<std::uint8_t> vac(static_cast<std::size_t>(basis.sites()), 0);
        StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(basis.dim()));
        psi[static_cast<Eigen::Index>(basis.index_of(vac))] = 1.0;
        sol = steady_state_timeevolve(l, DensityMatrix::pure(psi));
        if (!sol.converged)
            fail(ErrorKind::NonConvergence, std::string("null-space solve failed (") + e.what() +
                                                 ") and time integration did not converge");
        p.flags.push_back("time-evolution-fallback");
    }
    p.value = observe(basis, sol.rho);
    p.error = ObservableSet::zero(basis.sites(), basis.has_atoms());
    return p;
}

SpectrumPoint solve_trajectory_point(const ExperimentConfig& config, double x, std::uint64_t master_seed,
                                     int workers) {
    const ModelSpec model = config.model_at(x);
    const ArraySpec array = config.array();
    const DriveSpec drive = config.drive();
    TrajectoryConfig tc = config.trajectory();
    tc.master_seed = master_seed;
    tc.workers = workers;
    tc.validate(config.dissipation.gamma_p);

    std::vector<TrajectoryResult> results;
    if (config.solver == SolverKind::TrajDense) {
        const Basis basis = build_basis(array, model, config.truncation);
        const Operator h = build_hamiltonian(basis, array, model, drive);
        const Liouvillian l = build_liouvillian(h, config.dissipation, basis);
        results = run_ensemble(tc, [&] { return std::make_unique<DenseState>(basis, l, tc.dt); });
    } else {
        const TebdSchedule schedule(array, model, drive, config.dissipation, config.truncation.photons_per_site,
                                    tc.dt);
        results = run_ensemble(tc, [&] { return std::make_unique<MpsState>(schedule, config.mps); });
    }
    const EnsembleEstimate e = ensemble_average(results);
    SpectrumPoint p;
    p.value = e.estimate.mean;
    p.error = e.estimate.error;
    p.flags = e.flags;
    return p;
}

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> grid = config.grid();
    const bool atoms = config.kind == ModelKind::JCH;
    RunResult r;
    if (config.solver == SolverKind::Dense) {
        SweepOptions so;
        so.workers = config.workers;
        r.table = sweep_spectrum(config.sites, atoms, grid, [&](double x) { return solve_dense_point(config, x); }, so);
    } else {
        for (std::size_t i = 0; i < grid.size(); ++i) r.point_seeds.push_back(derive_seed(config.seed, i));
        SweepOptions so;
        so.workers = 1;  // the worker pool goes to the trajectories of each point
        r.table = sweep_spectrum(
            config.sites, atoms, grid,
            [&](double x) {
                const auto i = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), x) - grid.begin());
                return solve_trajectory_point(config, x, r.point_seeds.at(i), config.workers);
            },
            so);
    }
    r.table.axis = config.axis_name();
    for (const auto& p : r.table.points) {
        if (!p.ok) r.exit_status = static_cast<int>(ErrorKind::NonConvergence);
        for (const auto& f : p.flags)
            if (f.rfind("error: ", 0) != 0 && std::find(r.flags.begin(), r.flags.end(), f) == r.flags.end())
                r.flags.push_back(f);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

const char* version_string() { return "0.1.0"; }

void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    std::error_code ec;
    if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + target.parent_path().string() + ": " + ec.message());
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        out << contents;
        out.flush();
        if (!out) fail(ErrorKind::Io, "write to " + tmp.string() + " failed");
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        fail(ErrorKind::Io, "cannot rename onto " + target.string() + ": " + ec.message());
    }
}

std::string table_json(const SpectrumTable& table) {
    nlohmann::ordered_json j;
    j["axis"] = table.axis;
    const auto cols = table.observable_columns();
    j["columns"] = cols;
    auto value = [](double x) -> nlohmann::ordered_json {
        if (is_undefined(x)) return nullptr;
        return x;
    };
    std::map<std::string, std::vector<double>> data;
    for (const auto& c : cols) {
        data[c] = table.column(c);
        data["se_" + c] = table.column("se_" + c);
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < table.points.size(); ++i) {
        const auto& p = table.points[i];
        nlohmann::ordered_json row;
        row[table.axis] = p.delta_c;
        for (const auto& c : cols) row[c] = value(data[c][i]);
        for (const auto& c : cols) row["se_" + c] = value(data["se_" + c][i]);
        row["status"] = p.ok ? "ok" : "failed";
        row["flags"] = p.flags;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j.dump(1) + "\n";
}

std::string sidecar_json(const ExperimentConfig& config, const RunResult& result) {
    nlohmann::ordered_json j;
    j["version"] = version_string();
    j["name"] = config.name;
    j["preset"] = config.preset;
    j["solver"] = solver_name(config.solver);
    j["config"] = to_text(config);
    j["master_seed"] = config.seed;
    j["point_seeds"] = result.point_seeds;
    if (config.solver != SolverKind::Dense) {
        nlohmann::ordered_json dt;
        dt["gamma_p_units"] = config.dt_gamma();
        if (config.g > 0.0) dt["g_units"] = config.dt_gamma() * config.g;
        j["dt"] = dt;
        j["t_transient"] = config.trajectory().t_transient;
    }
    j["axis"] = result.table.axis;
    j["points"] = result.table.points.size();
    j["exit_status"] = result.exit_status;
    j["flags"] = result.flags;
    return j.dump(1) + "\n";
}

std::string write_outputs(const ExperimentConfig& config, const RunResult& result) {
    namespace fs = std::filesystem;
    const fs::path dir(config.out_dir);
    std::string data;
    if (config.format == "json") {
        data = table_json(result.table);
    } else {
        std::ostringstream os;
        write_csv(result.table, os);
        data = os.str();
    }
    const std::string data_path = (dir / (config.name + "." + config.format)).string();
    write_file_atomic(data_path, data);
    write_file_atomic((dir / (config.name + ".meta.json")).string(), sidecar_json(config, result));
    return data_path;
}

}  // namespace ness
