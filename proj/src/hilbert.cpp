#include "ness/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "ness/error.hpp"

namespace ness {

using Triplet = Eigen::Triplet<Complex>;

ModelSpec ModelSpec::jaynes_cummings(double g, double delta, double drive_detuning) {
    ModelSpec m;
    m.kind = ModelKind::JCH;
    m.jc = spectral::JaynesCummingsParams{g, delta};
    m.drive_detuning = drive_detuning;
    return m;
}

ModelSpec ModelSpec::bose_hubbard(double u, double drive_detuning) {
    ModelSpec m;
    m.kind = ModelKind::BH;
    m.kerr = spectral::KerrParams{u};
    m.drive_detuning = drive_detuning;
    return m;
}

void ModelSpec::validate() const {
    if (kind == ModelKind::JCH) {
        if (!jc || kerr) fail(ErrorKind::Config, "JCH model needs Jaynes-Cummings parameters and no Kerr block");
        if (!(jc->g > 0.0)) fail(ErrorKind::Config, "JCH coupling g must be positive");
    } else {
        if (!kerr || jc) fail(ErrorKind::Config, "BH model needs a Kerr block and no Jaynes-Cummings parameters");
    }
    if (!std::isfinite(drive_detuning)) fail(ErrorKind::Config, "drive detuning must be finite");
}

void ArraySpec::validate() const {
    if (m < 1) fail(ErrorKind::Config, "array needs at least one site");
    if (!(j_hop >= 0.0)) fail(ErrorKind::Config, "hopping J must be non-negative");
}

std::vector<std::pair<int, int>> ArraySpec::bonds() const {
    std::vector<std::pair<int, int>> out;
    for (int j = 0; j + 1 < m; ++j) out.emplace_back(j, j + 1);
    if (boundary == Boundary::Ring && m > 2) out.emplace_back(0, m - 1);
    return out;
}

DriveSpec DriveSpec::homogeneous(int m, Complex omega) {
    return DriveSpec{std::vector<Complex>(static_cast<std::size_t>(m), omega)};
}

DriveSpec DriveSpec::phased(int m, Complex omega, double phase_step) {
    DriveSpec d;
    d.amplitudes.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) d.amplitudes.push_back(omega * std::polar(1.0, phase_step * j));
    return d;
}

void DissipationSpec::validate() const {
    if (!(gamma_p > 0.0)) fail(ErrorKind::Config, "photon loss rate must be positive");
    if (gamma_a != 0.0) fail(ErrorKind::Config, "atomic loss is not supported (gamma_a must be 0)");
}

void TruncationPolicy::validate() const {
    if (photons_per_site < 1) fail(ErrorKind::Config, "photons_per_site must be >= 1");
    if (photons_per_site > 250) fail(ErrorKind::Config, "photons_per_site must be <= 250");
    if (total_excitation_cap && *total_excitation_cap < 0)
        fail(ErrorKind::Config, "total excitation cap must be non-negative");
}

namespace {

// Number of configurations with at most `cap` excitations, by dynamic
// programming over sites.
double count_states(int sites, int local_dim, const std::vector<int>& local_exc, std::optional<int> cap) {
    if (!cap) return std::pow(static_cast<double>(local_dim), sites);
    std::vector<double> ways(static_cast<std::size_t>(*cap) + 1, 0.0);
    ways[0] = 1.0;
    for (int j = 0; j < sites; ++j) {
        std::vector<double> next(ways.size(), 0.0);
        for (std::size_t e = 0; e < ways.size(); ++e) {
            if (ways[e] == 0.0) continue;
            for (int l = 0; l < local_dim; ++l) {
                const std::size_t e2 = e + static_cast<std::size_t>(local_exc[l]);
                if (e2 < next.size()) next[e2] += ways[e];
            }
        }
        ways = std::move(next);
    }
    double total = 0.0;
    for (double w : ways) total += w;
    return total;
}

}  // namespace

Basis Basis::build(const ArraySpec& array, ModelKind kind, const TruncationPolicy& trunc,
                   std::size_t max_dimension) {
    array.validate();
    trunc.validate();
    Basis b;
    b.sites_ = array.m;
    b.kind_ = kind;
    b.max_photons_ = trunc.photons_per_site;
    b.local_dim_ = (trunc.photons_per_site + 1) * (kind == ModelKind::JCH ? 2 : 1);
    b.cap_ = trunc.total_excitation_cap;

    std::vector<int> local_exc(static_cast<std::size_t>(b.local_dim_));
    for (int l = 0; l < b.local_dim_; ++l) local_exc[l] = b.photons_of(l) + b.atom_of(l);

    const double count = count_states(b.sites_, b.local_dim_, local_exc, b.cap_);
    if (count > static_cast<double>(max_dimension)) {
        std::ostringstream os;
        os << "Hilbert space dimension " << static_cast<long double>(count) << " exceeds the limit "
           << max_dimension;
        fail(ErrorKind::Config, os.str());
    }
    if (b.sites_ * std::log2(static_cast<double>(b.local_dim_)) > 63.0)
        fail(ErrorKind::Config, "configuration codes do not fit in 64 bits");

    const auto n = static_cast<std::size_t>(count);
    b.states_.reserve(n * static_cast<std::size_t>(b.sites_));
    b.codes_.reserve(n);

    // Depth-first over sites (site 0 most significant), pruning on the cap,
    // which yields configurations in increasing code order.
    std::vector<std::uint8_t> cur(static_cast<std::size_t>(b.sites_), 0);
    const int cap = b.cap_.value_or(1 << 30);
    auto visit = [&](auto&& self, int site, int used) -> void {
        if (site == b.sites_) {
            b.states_.insert(b.states_.end(), cur.begin(), cur.end());
            b.codes_.push_back(b.encode(cur));
            return;
        }
        for (int l = 0; l < b.local_dim_; ++l) {
            if (used + local_exc[l] > cap) continue;
            cur[site] = static_cast<std::uint8_t>(l);
            self(self, site + 1, used + local_exc[l]);
        }
    };
    visit(visit, 0, 0);
    return b;
}

std::uint64_t Basis::encode(std::span<const std::uint8_t> locals) const {
    std::uint64_t code = 0;
    for (auto l : locals) code = code * static_cast<std::uint64_t>(local_dim_) + l;
    return code;
}

std::size_t Basis::index_of(std::span<const std::uint8_t> locals) const {
    const std::uint64_t code = encode(locals);
    auto it = std::lower_bound(codes_.begin(), codes_.end(), code);
    if (it == codes_.end() || *it != code) return npos;
    return static_cast<std::size_t>(it - codes_.begin());
}

int Basis::excitations(std::size_t index) const {
    int e = 0;
    for (auto l : local_states(index)) e += photons_of(l) + atom_of(l);
    return e;
}

Basis build_basis(const ArraySpec& array, const ModelSpec& model, const TruncationPolicy& trunc,
                  std::size_t max_dimension) {
    model.validate();
    return Basis::build(array, model.kind, trunc, max_dimension);
}

namespace {

Operator from_triplets(std::size_t dim, const std::vector<Triplet>& t) {
    Operator op(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    op.setFromTriplets(t.begin(), t.end());
    op.makeCompressed();
    return op;
}

void check_site(const Basis& basis, int site) {
    require(site >= 0 && site < basis.sites(), "site index out of range");
}

}  // namespace

Operator annihilation(const Basis& basis, int site) {
    check_site(basis, site);
    std::vector<Triplet> t;
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(basis.sites()));
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        auto loc = basis.local_states(i);
        const int n = basis.photons_of(loc[site]);
        if (n == 0) continue;
        std::copy(loc.begin(), loc.end(), buf.begin());
        buf[site] = static_cast<std::uint8_t>(basis.local_index(n - 1, basis.atom_of(loc[site])));
        const std::size_t k = basis.index_of(buf);
        if (k != Basis::npos) t.emplace_back(static_cast<int>(k), static_cast<int>(i), std::sqrt(double(n)));
    }
    return from_triplets(basis.dim(), t);
}

Operator atom_lowering(const Basis& basis, int site) {
    check_site(basis, site);
    std::vector<Triplet> t;
    if (basis.has_atoms()) {
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(basis.sites()));
        for (std::size_t i = 0; i < basis.dim(); ++i) {
            auto loc = basis.local_states(i);
            if (basis.atom_of(loc[site]) == 0) continue;
            std::copy(loc.begin(), loc.end(), buf.begin());
            buf[site] = static_cast<std::uint8_t>(basis.local_index(basis.photons_of(loc[site]), 0));
            const std::size_t k = basis.index_of(buf);
            if (k != Basis::npos) t.emplace_back(static_cast<int>(k), static_cast<int>(i), 1.0);
        }
    }
    return from_triplets(basis.dim(), t);
}

Operator number_operator(const Basis& basis, int site) {
    check_site(basis, site);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const int n = basis.photons(i, site);
        if (n) t.emplace_back(static_cast<int>(i), static_cast<int>(i), double(n));
    }
    return from_triplets(basis.dim(), t);
}

Operator total_excitation_operator(const Basis& basis) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const int e = basis.excitations(i);
        if (e) t.emplace_back(static_cast<int>(i), static_cast<int>(i), double(e));
    }
    return from_triplets(basis.dim(), t);
}

Operator build_hamiltonian(const Basis& basis, const ArraySpec& array, const ModelSpec& model,
                           const DriveSpec& drive) {
    model.validate();
    array.validate();
    if (model.kind != basis.kind()) fail(ErrorKind::Config, "model kind does not match the basis");
    if (array.m != basis.sites()) fail(ErrorKind::Config, "array size does not match the basis");
    if (drive.amplitudes.size() != static_cast<std::size_t>(array.m))
        fail(ErrorKind::Config, "drive needs one amplitude per site");

    const double dc = model.drive_detuning;
    const bool jch = model.kind == ModelKind::JCH;
    const double g = jch ? model.jc->g : 0.0;
    const double delta = jch ? model.jc->delta : 0.0;
    const double u = jch ? 0.0 : model.kerr->u;
    const auto bonds = array.bonds();

    std::vector<Triplet> t;
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(basis.sites()));
    // Adds amp * |target><i| if the target configuration is retained.
    auto hop_to = [&](std::size_t i, Complex amp) {
        const std::size_t k = basis.index_of(buf);
        if (k != Basis::npos && amp != Complex(0.0)) t.emplace_back(static_cast<int>(k), static_cast<int>(i), amp);
    };

    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto loc = basis.local_states(i);
        double diag = 0.0;
        for (int j = 0; j < basis.sites(); ++j) {
            const int n = basis.photons_of(loc[j]);
            const int s = basis.atom_of(loc[j]);
            diag += -dc * n;
            if (jch) diag += (-dc - delta) * s;
            else diag += 0.5 * u * n * (n - 1);

            // JC exchange: |g,n> -> |e,n-1> with g sqrt(n) and its adjoint.
            if (jch) {
                std::copy(loc.begin(), loc.end(), buf.begin());
                if (s == 0 && n > 0) {
                    buf[j] = static_cast<std::uint8_t>(basis.local_index(n - 1, 1));
                    hop_to(i, g * std::sqrt(double(n)));
                } else if (s == 1) {
                    buf[j] = static_cast<std::uint8_t>(basis.local_index(n + 1, 0));
                    if (n + 1 <= basis.max_photons()) hop_to(i, g * std::sqrt(double(n + 1)));
                }
            }
            // Drive: Omega a^+ and Omega^* a.
            const Complex om = drive.amplitudes[j];
            if (om != Complex(0.0)) {
                std::copy(loc.begin(), loc.end(), buf.begin());
                if (n + 1 <= basis.max_photons()) {
                    buf[j] = static_cast<std::uint8_t>(basis.local_index(n + 1, s));
                    hop_to(i, om * std::sqrt(double(n + 1)));
                }
                if (n > 0) {
                    buf[j] = static_cast<std::uint8_t>(basis.local_index(n - 1, s));
                    hop_to(i, std::conj(om) * std::sqrt(double(n)));
                }
            }
        }
        if (diag != 0.0) t.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);

        if (array.j_hop != 0.0) {
            for (auto [a, b] : bonds) {
                for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
                    // -J a_to^+ a_from
                    const int nf = basis.photons_of(loc[from]);
                    const int nt = basis.photons_of(loc[to]);
                    if (nf == 0 || nt + 1 > basis.max_photons()) continue;
                    std::copy(loc.begin(), loc.end(), buf.begin());
                    buf[from] = static_cast<std::uint8_t>(basis.local_index(nf - 1, basis.atom_of(loc[from])));
                    buf[to] = static_cast<std::uint8_t>(basis.local_index(nt + 1, basis.atom_of(loc[to])));
                    hop_to(i, -array.j_hop * std::sqrt(double(nf) * double(nt + 1)));
                }
            }
        }
    }
    return from_triplets(basis.dim(), t);
}

Operator build_effective_hamiltonian(const Operator& hamiltonian, const DissipationSpec& diss,
                                     const Basis& basis) {
    diss.validate();
    require(static_cast<std::size_t>(hamiltonian.rows()) == basis.dim(), "Hamiltonian does not match basis");
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        int n = 0;
        for (int j = 0; j < basis.sites(); ++j) n += basis.photons(i, j);
        if (n) t.emplace_back(static_cast<int>(i), static_cast<int>(i), Complex(0.0, -0.5 * diss.gamma_p * n));
    }
    Operator loss = from_triplets(basis.dim(), t);
    Operator h_eff = hamiltonian + loss;
    h_eff.makeCompressed();
    return h_eff;
}

Liouvillian::Liouvillian(Operator h_eff, std::vector<Operator> jumps, double gamma_p)
    : h_eff_(std::move(h_eff)), jumps_(std::move(jumps)), gamma_p_(gamma_p) {
    h_eff_adj_ = h_eff_.adjoint();
    for (const auto& a : jumps_) jumps_adj_.push_back(a.adjoint());
    double d = 0.0;
    for (Eigen::Index i = 0; i < h_eff_.outerSize(); ++i)
        for (Operator::InnerIterator it(h_eff_, i); it; ++it) d = std::max(d, std::abs(it.value()));
    scale_ = d + gamma_p_ * static_cast<double>(jumps_.size());
}

Eigen::MatrixXcd Liouvillian::apply(const Eigen::MatrixXcd& rho) const {
    const Complex mi(0.0, -1.0);
    Eigen::MatrixXcd out = mi * (h_eff_ * rho);
    out.noalias() -= mi * (rho * h_eff_adj_);
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
        Eigen::MatrixXcd ar = jumps_[k] * rho;
        out.noalias() += gamma_p_ * (ar * jumps_adj_[k]);
    }
    return out;
}

Operator Liouvillian::vectorized() const {
    const std::size_t d = dim();
    if (d * d > kMaxSuperoperatorDimension) {
        std::ostringstream os;
        os << "superoperator dimension " << d * d << " exceeds the limit " << kMaxSuperoperatorDimension;
        fail(ErrorKind::Config, os.str());
    }
    Operator id(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    id.setIdentity();
    const Complex mi(0.0, -1.0);
    // vec(A rho B) = (B^T kron A) vec(rho)
    Operator hc = h_eff_.conjugate();
    Operator s = mi * Operator(Eigen::kroneckerProduct(id, h_eff_)) - mi * Operator(Eigen::kroneckerProduct(hc, id));
    for (const auto& a : jumps_) {
        Operator ac = a.conjugate();
        s += gamma_p_ * Operator(Eigen::kroneckerProduct(ac, a));
    }
    s.makeCompressed();
    return s;
}

Liouvillian build_liouvillian(const Operator& hamiltonian, const DissipationSpec& diss, const Basis& basis) {
    Operator h_eff = build_effective_hamiltonian(hamiltonian, diss, basis);
    std::vector<Operator> jumps;
    jumps.reserve(static_cast<std::size_t>(basis.sites()));
    for (int j = 0; j < basis.sites(); ++j) jumps.push_back(annihilation(basis, j));
    return Liouvillian(std::move(h_eff), std::move(jumps), diss.gamma_p);
}

void write_coo(std::ostream& os, const Operator& op) {
    const auto old = os.precision(17);
    for (Eigen::Index r = 0; r < op.outerSize(); ++r)
        for (Operator::InnerIterator it(op, r); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
    os.precision(old);
}

Operator translation_operator(const Basis& basis) {
    std::vector<Triplet> t;
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(basis.sites()));
    const int m = basis.sites();
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        auto loc = basis.local_states(i);
        for (int j = 0; j < m; ++j) buf[(j + 1) % m] = loc[j];
        const std::size_t k = basis.index_of(buf);
        if (k != Basis::npos) t.emplace_back(static_cast<int>(k), static_cast<int>(i), 1.0);
    }
    return from_triplets(basis.dim(), t);
}

}  // namespace ness
