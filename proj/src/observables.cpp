#include "ness/observables.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <sstream>

#include "ness/error.hpp"
#include "ness/parallel.hpp"

namespace ness {

Moments Moments::zero(int sites, bool with_atoms) {
    Moments m;
    m.photons = Eigen::VectorXd::Zero(sites);
    m.atoms = with_atoms ? Eigen::VectorXd::Zero(sites) : Eigen::VectorXd();
    m.pairs = Eigen::MatrixXd::Zero(sites, sites);
    m.top_level = Eigen::VectorXd::Zero(sites);
    return m;
}

void Moments::require_same_shape(const Moments& other) const {
    if (sites() != other.sites() || has_atoms() != other.has_atoms())
        fail(ErrorKind::InvalidArgument, "moments of different systems cannot be combined");
}

Moments& Moments::operator+=(const Moments& other) {
    require_same_shape(other);
    photons += other.photons;
    if (has_atoms()) atoms += other.atoms;
    pairs += other.pairs;
    top_level += other.top_level;
    return *this;
}

Moments& Moments::operator*=(double s) {
    photons *= s;
    atoms *= s;
    pairs *= s;
    top_level *= s;
    return *this;
}

Moments moments_from_probabilities(const Basis& basis, const Eigen::VectorXd& probabilities) {
    require(static_cast<std::size_t>(probabilities.size()) == basis.dim(),
            "probability vector does not match the basis dimension");
    const int m = basis.sites();
    Moments out = Moments::zero(m, basis.has_atoms());
    int top = basis.max_photons();
    if (basis.excitation_cap()) top = std::min(top, *basis.excitation_cap());
    std::vector<int> n(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const double w = probabilities[static_cast<Eigen::Index>(i)];
        if (w == 0.0) continue;
        const auto locals = basis.local_states(i);
        for (int j = 0; j < m; ++j) {
            n[j] = basis.photons_of(locals[j]);
            out.photons[j] += w * n[j];
            if (out.has_atoms()) out.atoms[j] += w * basis.atom_of(locals[j]);
            if (n[j] == top) out.top_level[j] += w;
        }
        for (int j = 0; j < m; ++j) {
            out.pairs(j, j) += w * n[j] * (n[j] - 1);
            for (int k = j + 1; k < m; ++k) out.pairs(j, k) += w * n[j] * n[k];
        }
    }
    for (int j = 0; j < m; ++j)
        for (int k = j + 1; k < m; ++k) out.pairs(k, j) = out.pairs(j, k);
    return out;
}

Moments moments(const Basis& basis, const DensityMatrix& rho) {
    require(static_cast<std::size_t>(rho.dim()) == basis.dim(), "density matrix does not match the basis");
    const double tr = rho.trace().real();
    require(tr > 0.0, "density matrix has non-positive trace");
    Eigen::VectorXd p = rho.data.diagonal().real() / tr;
    return moments_from_probabilities(basis, p);
}

Moments moments(const Basis& basis, const StateVector& psi) {
    require(static_cast<std::size_t>(psi.size()) == basis.dim(), "state does not match the basis");
    const double norm2 = psi.squaredNorm();
    require(norm2 > 0.0, "state has zero norm");
    Eigen::VectorXd p = psi.cwiseAbs2() / norm2;
    return moments_from_probabilities(basis, p);
}

double g2(const Moments& m, int j, int k, double floor) {
    require(j >= 0 && j < m.sites() && k >= 0 && k < m.sites(), "site index out of range");
    const double nj = m.photons[j];
    const double nk = m.photons[k];
    if (!(nj > floor) || !(nk > floor)) return kUndefined;
    return m.pairs(j, k) / (nj * nk);
}

double g2(const Basis& basis, const DensityMatrix& rho, int j, int k) { return g2(moments(basis, rho), j, k); }
double g2(const Basis& basis, const StateVector& psi, int j, int k) { return g2(moments(basis, psi), j, k); }

ObservableSet ObservableSet::zero(int sites, bool with_atoms) {
    ObservableSet s;
    s.photon_number = Eigen::VectorXd::Zero(sites);
    s.atomic_excitation = with_atoms ? Eigen::VectorXd::Zero(sites) : Eigen::VectorXd();
    s.g2 = Eigen::MatrixXd::Zero(sites, sites);
    s.g2_separation = Eigen::VectorXd::Zero(sites / 2 + 1);
    return s;
}

std::string format_number(double x) {
    if (is_undefined(x)) return "NA";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

ObservableSet undefined_set(int sites, bool with_atoms) {
    ObservableSet s = ObservableSet::zero(sites, with_atoms);
    s.photon_number.setConstant(kUndefined);
    s.atomic_excitation.setConstant(kUndefined);
    s.g2.setConstant(kUndefined);
    s.total_n = s.n_avg = kUndefined;
    s.atom_avg = with_atoms ? kUndefined : 0.0;
    s.g2_separation.setConstant(kUndefined);
    return s;
}

// Every numeric field in a fixed order, for jackknife estimates.
std::vector<double> flatten(const ObservableSet& s) {
    std::vector<double> v;
    v.insert(v.end(), s.photon_number.data(), s.photon_number.data() + s.photon_number.size());
    v.insert(v.end(), s.atomic_excitation.data(), s.atomic_excitation.data() + s.atomic_excitation.size());
    v.insert(v.end(), s.g2.data(), s.g2.data() + s.g2.size());
    v.push_back(s.total_n);
    v.push_back(s.n_avg);
    v.push_back(s.atom_avg);
    v.insert(v.end(), s.g2_separation.data(), s.g2_separation.data() + s.g2_separation.size());
    return v;
}

void unflatten(const std::vector<double>& v, ObservableSet& s) {
    std::size_t i = 0;
    auto take = [&](double* p, Eigen::Index n) {
        for (Eigen::Index k = 0; k < n; ++k) p[k] = v[i++];
    };
    take(s.photon_number.data(), s.photon_number.size());
    take(s.atomic_excitation.data(), s.atomic_excitation.size());
    take(s.g2.data(), s.g2.size());
    s.total_n = v[i++];
    s.n_avg = v[i++];
    s.atom_avg = v[i++];
    take(s.g2_separation.data(), s.g2_separation.size());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

ObservableSet observables_from(const Moments& m) {
    const int sites = m.sites();
    ObservableSet s = ObservableSet::zero(sites, m.has_atoms());
    s.photon_number = m.photons;
    s.atomic_excitation = m.atoms;
    for (int j = 0; j < sites; ++j)
        for (int k = j; k < sites; ++k) s.g2(j, k) = s.g2(k, j) = g2(m, j, k);
    s.total_n = m.photons.sum() + (m.has_atoms() ? m.atoms.sum() : 0.0);
    s.n_avg = sites > 0 ? m.photons.mean() : 0.0;
    s.atom_avg = m.has_atoms() ? m.atoms.mean() : 0.0;
    for (int r = 0; r <= sites / 2; ++r) {
        double acc = 0.0;
        for (int j = 0; j < sites; ++j) acc += s.g2(j, (j + r) % sites);
        s.g2_separation[r] = acc / sites;  // undefined entries propagate
    }
    s.truncated = (m.top_level.array() > kTruncationSentinel).any();
    return s;
}

ObservableSet observe(const Basis& basis, const DensityMatrix& rho) { return observables_from(moments(basis, rho)); }
ObservableSet observe(const Basis& basis, const StateVector& psi) { return observables_from(moments(basis, psi)); }

ObservableSet populations(const Basis& basis, const DensityMatrix& rho) {
    ObservableSet s = observe(basis, rho);
    s.g2.resize(0, 0);
    s.g2_separation.resize(0);
    return s;
}

ObservableSet populations(const Basis& basis, const StateVector& psi) {
    ObservableSet s = observe(basis, psi);
    s.g2.resize(0, 0);
    s.g2_separation.resize(0);
    return s;
}

Estimate estimate(const std::vector<Moments>& samples) {
    require(!samples.empty(), "estimate needs at least one sample");
    const auto r = samples.size();
    Moments sum = samples.front();
    for (std::size_t i = 1; i < r; ++i) sum += samples[i];
    Estimate out;
    out.samples = static_cast<int>(r);
    out.moments = sum;
    out.moments *= 1.0 / static_cast<double>(r);
    out.mean = observables_from(out.moments);
    if (r == 1) {
        out.error = undefined_set(sum.sites(), sum.has_atoms());
        return out;
    }
    const std::vector<double> center = flatten(out.mean);
    std::vector<std::vector<double>> loo;
    loo.reserve(r);
    for (std::size_t i = 0; i < r; ++i) {
        Moments m = sum;
        Moments drop = samples[i];
        drop *= -1.0;
        m += drop;
        m *= 1.0 / static_cast<double>(r - 1);
        loo.push_back(flatten(observables_from(m)));
    }
    std::vector<double> se(center.size());
    for (std::size_t k = 0; k < center.size(); ++k) {
        double mean = 0.0;
        for (const auto& v : loo) mean += v[k];
        mean /= static_cast<double>(r);
        double ss = 0.0;
        for (const auto& v : loo) ss += (v[k] - mean) * (v[k] - mean);
        se[k] = std::sqrt(ss * static_cast<double>(r - 1) / static_cast<double>(r));  // NaN propagates
    }
    out.error = ObservableSet::zero(sum.sites(), sum.has_atoms());
    unflatten(se, out.error);
    return out;
}

std::vector<double> SpectrumTable::grid() const {
    std::vector<double> g;
    g.reserve(points.size());
    for (const auto& p : points) g.push_back(p.delta_c);
    return g;
}

namespace {

using Getter = std::function<double(const ObservableSet&)>;

std::vector<std::pair<std::string, Getter>> getters(int sites, bool has_atoms) {
    std::vector<std::pair<std::string, Getter>> out;
    for (int j = 0; j < sites; ++j)
        out.emplace_back("n_" + std::to_string(j), [j](const ObservableSet& s) { return s.photon_number[j]; });
    if (has_atoms)
        for (int j = 0; j < sites; ++j)
            out.emplace_back("atom_" + std::to_string(j),
                             [j](const ObservableSet& s) { return s.atomic_excitation[j]; });
    for (int j = 0; j < sites; ++j)
        for (int k = j; k < sites; ++k)
            out.emplace_back("g2_" + std::to_string(j) + "_" + std::to_string(k),
                             [j, k](const ObservableSet& s) { return s.g2(j, k); });
    out.emplace_back("total_n", [](const ObservableSet& s) { return s.total_n; });
    out.emplace_back("n_avg", [](const ObservableSet& s) { return s.n_avg; });
    if (has_atoms) out.emplace_back("atom_avg", [](const ObservableSet& s) { return s.atom_avg; });
    for (int r = 0; r <= sites / 2; ++r)
        out.emplace_back("g2_r" + std::to_string(r), [r](const ObservableSet& s) { return s.g2_separation[r]; });
    return out;
}

}  // namespace

std::vector<std::string> SpectrumTable::observable_columns() const {
    std::vector<std::string> names;
    for (auto& [name, get] : getters(sites, has_atoms)) names.push_back(name);
    return names;
}

std::vector<double> SpectrumTable::column(const std::string& name) const {
    if (name == axis) return grid();
    const bool se = name.rfind("se_", 0) == 0;
    const std::string base = se ? name.substr(3) : name;
    for (auto& [n, get] : getters(sites, has_atoms)) {
        if (n != base) continue;
        std::vector<double> out;
        out.reserve(points.size());
        for (const auto& p : points) out.push_back(p.ok ? get(se ? p.error : p.value) : kUndefined);
        return out;
    }
    fail(ErrorKind::InvalidArgument, "unknown column '" + name + "'");
}

void write_csv(const SpectrumTable& table, std::ostream& out) {
    const auto cols = getters(table.sites, table.has_atoms);
    out << csv_field(table.axis);
    for (auto& [name, get] : cols) out << ',' << name;
    for (auto& [name, get] : cols) out << ",se_" << name;
    out << ",status,flags\n";
    for (const auto& p : table.points) {
        out << format_number(p.delta_c);
        for (auto& [name, get] : cols) out << ',' << (p.ok ? format_number(get(p.value)) : "NA");
        for (auto& [name, get] : cols) out << ',' << (p.ok ? format_number(get(p.error)) : "NA");
        std::string flags;
        for (const auto& f : p.flags) flags += (flags.empty() ? "" : ";") + f;
        out << ',' << (p.ok ? "ok" : "failed") << ',' << csv_field(flags) << '\n';
    }
}

SpectrumTable sweep_spectrum(int sites, bool has_atoms, const std::vector<double>& grid, const PointSolver& solve,
                             const SweepOptions& opts) {
    if (grid.empty()) fail(ErrorKind::Config, "sweep grid is empty");
    if (grid.size() > opts.max_points) fail(ErrorKind::Config, "sweep grid has too many points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || std::abs(grid[i]) > opts.max_abs_detuning)
            fail(ErrorKind::Config, "sweep grid value out of bounds");
        if (i > 0 && !(grid[i] > grid[i - 1])) fail(ErrorKind::Config, "sweep grid must be strictly increasing");
    }
    SpectrumTable table;
    table.sites = sites;
    table.has_atoms = has_atoms;
    table.points.resize(grid.size());
    parallel_for(grid.size(), opts.workers, [&](std::size_t i) {
        SpectrumPoint p;
        try {
            p = solve(grid[i]);
        } catch (const std::exception& e) {
            p = SpectrumPoint{};
            p.ok = false;
            p.value = undefined_set(sites, has_atoms);
            p.error = undefined_set(sites, has_atoms);
            p.flags.push_back(std::string("error: ") + e.what());
        }
        p.delta_c = grid[i];
        if (p.ok && p.value.truncated &&
            std::find(p.flags.begin(), p.flags.end(), "truncation") == p.flags.end())
            p.flags.push_back("truncation");
        table.points[i] = std::move(p);
    });
    return table;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    require(n >= 2 && hi > lo, "linear_grid needs n >= 2 and hi > lo");
    std::vector<double> g(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
    g.back() = hi;
    return g;
}

namespace {

// Peaks of one run of defined samples [lo, hi).
void segment_peaks(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo, std::size_t hi,
                   double threshold, std::vector<Peak>& out) {
    if (hi - lo < 3) return;
    for (std::size_t i = lo + 1; i + 1 < hi; ++i) {
        if (!(y[i] > y[i - 1])) continue;
        std::size_t j = i;
        while (j + 1 < hi && y[j + 1] == y[i]) ++j;
        if (j + 1 >= hi || !(y[j + 1] < y[i])) {
            i = j;
            continue;
        }
        const std::size_t c = (i + j) / 2;
        const double h = y[c];
        double left_min = h;
        for (std::size_t k = i; k-- > lo;) {
            if (y[k] > h) break;
            left_min = std::min(left_min, y[k]);
        }
        double right_min = h;
        for (std::size_t k = j + 1; k < hi; ++k) {
            if (y[k] > h) break;
            right_min = std::min(right_min, y[k]);
        }
        const double prominence = h - std::max(left_min, right_min);
        if (prominence <= threshold) {
            i = j;
            continue;
        }
        Peak p;
        p.prominence = prominence;
        p.center = x[c];
        p.height = h;
        if (i == j) {
            // parabola through (x0,y0), (x1,y1), (x2,y2)
            const double x0 = x[c - 1], x1 = x[c], x2 = x[c + 1];
            const double y0 = y[c - 1], y1 = y[c], y2 = y[c + 1];
            const double d01 = (y1 - y0) / (x1 - x0);
            const double d12 = (y2 - y1) / (x2 - x1);
            const double a = (d12 - d01) / (x2 - x0);
            if (a < 0.0) {
                const double b = d01 - a * (x0 + x1);
                const double xv = std::clamp(-b / (2.0 * a), x0, x2);
                p.center = xv;
                p.height = y1 + (xv - x1) * (d01 + a * (xv - x0));
            }
        }
        const double level = h - prominence / 2.0;
        double left = kUndefined, right = kUndefined;
        for (std::size_t k = i; k-- > lo;) {
            if (y[k] < level) {
                left = x[k] + (level - y[k]) * (x[k + 1] - x[k]) / (y[k + 1] - y[k]);
                break;
            }
        }
        for (std::size_t k = j + 1; k < hi; ++k) {
            if (y[k] < level) {
                right = x[k - 1] + (level - y[k - 1]) * (x[k] - x[k - 1]) / (y[k] - y[k - 1]);
                break;
            }
        }
        p.width = right - left;  // undefined when a crossing is missing
        out.push_back(p);
        i = j;
    }
}

}  // namespace

std::vector<Peak> locate_peaks(const std::vector<double>& x, const std::vector<double>& y, const PeakOptions& opts) {
    require(x.size() == y.size(), "locate_peaks: x and y differ in length");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : y)
        if (!is_undefined(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    std::vector<Peak> out;
    if (!(hi > lo)) return out;
    const double threshold = std::max(opts.min_prominence, opts.min_relative_prominence * (hi - lo));
    std::size_t start = 0;
    for (std::size_t i = 0; i <= y.size(); ++i) {
        if (i == y.size() || is_undefined(y[i])) {
            segment_peaks(x, y, start, i, threshold, out);
            start = i + 1;
        }
    }
    return out;
}

std::vector<Peak> locate_peaks(const SpectrumTable& table, const std::string& column, const PeakOptions& opts) {
    return locate_peaks(table.grid(), table.column(column), opts);
}

std::optional<Peak> highest_peak(const std::vector<Peak>& peaks) {
    if (peaks.empty()) return std::nullopt;
    return *std::max_element(peaks.begin(), peaks.end(),
                             [](const Peak& a, const Peak& b) { return a.height < b.height; });
}

std::size_t nearest_index(const std::vector<double>& grid, double x) {
    require(!grid.empty(), "nearest_index on an empty grid");
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (std::abs(grid[i] - x) < std::abs(grid[best] - x)) best = i;
    return best;
}

}  // namespace ness
