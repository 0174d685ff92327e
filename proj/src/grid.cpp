#include "nlheat/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "nlheat/errors.hpp"

namespace nlheat {

// ---------------------------------------------------------------------------
// RectDomain / GridFunction

RectDomain::RectDomain(double lx, double ly, int nx, int ny, YBoundary ybc)
    : lx_(lx), ly_(ly), nx_(nx), ny_(ny), ybc_(ybc) {
    if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("domain side lengths must be > 0");
    if (nx < 3 || ny < 3) throw ConfigError("grid needs at least 3 interior nodes per axis");
    hx_ = lx / (nx + 1);
    hy_ = ybc == YBoundary::Periodic ? ly / ny : ly / (ny + 1);
}

Point RectDomain::node(int i, int j) const noexcept {
    const double y = ybc_ == YBoundary::Periodic ? j * hy_ : (j + 1) * hy_;
    return {(i + 1) * hx_, y};
}

GridFunction::GridFunction(const RectDomain& d, std::vector<double> values)
    : domain_(d), values_(std::move(values)) {
    if (values_.size() != d.size()) throw ConfigError("grid function length does not match domain");
}

bool GridFunction::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
}

GridFunction& GridFunction::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

// ---------------------------------------------------------------------------
// Operators and functionals

void apply_laplacian(const RectDomain& d, std::span<const double> u, std::span<double> out) {
    const int nx = d.nx();
    const int ny = d.ny();
    const double cx = 1.0 / (d.hx() * d.hx());
    const double cy = 1.0 / (d.hy() * d.hy());
    const bool periodic = d.y_boundary() == YBoundary::Periodic;
    for (int j = 0; j < ny; ++j) {
        const double* row = u.data() + static_cast<std::size_t>(j) * nx;
        const double* below = nullptr;
        const double* above = nullptr;
        if (j > 0) below = row - nx;
        else if (periodic) below = u.data() + static_cast<std::size_t>(ny - 1) * nx;
        if (j < ny - 1) above = row + nx;
        else if (periodic) above = u.data();
        double* o = out.data() + static_cast<std::size_t>(j) * nx;
        for (int i = 0; i < nx; ++i) {
            const double c = row[i];
            const double w = i > 0 ? row[i - 1] : 0.0;
            const double e = i < nx - 1 ? row[i + 1] : 0.0;
            const double s = below ? below[i] : 0.0;
            const double n = above ? above[i] : 0.0;
            o[i] = cx * (2.0 * c - w - e) + cy * (2.0 * c - s - n);
        }
    }
}

GridFunction laplacian_apply(const GridFunction& u) {
    GridFunction out(u.domain());
    apply_laplacian(u.domain(), u.values(), out.data());
    return out;
}

double inner(const GridFunction& u, const GridFunction& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
    return s * u.domain().cell_area();
}

double integrate(const GridFunction& u) {
    double s = 0.0;
    for (double v : u.values()) s += v;
    return s * u.domain().cell_area();
}

double norm_l2(const GridFunction& u) { return std::sqrt(inner(u, u)); }

double norm_h1(const GridFunction& u) {
    const GridFunction au = laplacian_apply(u);
    return std::sqrt(std::max(0.0, inner(au, u)));
}

double norm_h1_forward_difference(const GridFunction& u) {
    const RectDomain& d = u.domain();
    const int nx = d.nx();
    const int ny = d.ny();
    auto at = [&](int i, int j) -> double {
        if (i < 0 || i >= nx) return 0.0;
        if (d.y_boundary() == YBoundary::Periodic) j = (j + ny) % ny;
        else if (j < 0 || j >= ny) return 0.0;
        return u[d.index(i, j)];
    };
    double gx = 0.0;
    double gy = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = -1; i < nx; ++i) {
            const double dx = at(i + 1, j) - at(i, j);
            gx += dx * dx;
        }
    const int jstart = d.y_boundary() == YBoundary::Periodic ? 0 : -1;
    for (int j = jstart; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double dy = at(i, j + 1) - at(i, j);
            gy += dy * dy;
        }
    const double form = (gx / (d.hx() * d.hx()) + gy / (d.hy() * d.hy())) * d.cell_area();
    return std::sqrt(form);
}

double energy(const GridFunction& u, const ProblemSpec& spec) {
    const double h1 = norm_h1(u);
    double fsum = 0.0;
    for (double v : u.values()) fsum += F_eval(spec.f, v);
    return 0.5 * h1 * h1 - fsum * u.domain().cell_area();
}

double nonlocal_value(const GridFunction& u, const NonlocalModel& g, bool* overflow) {
    double s = 0.0;
    bool of = false;
    for (double v : u.values()) {
        const Evaluated e = g_eval(g, v);
        s += e.value;
        of = of || e.overflow;
    }
    if (overflow) *overflow = of;
    return s * u.domain().cell_area();
}

// ---------------------------------------------------------------------------
// Spectral basis

double dirichlet_eigenvalue(const RectDomain& d, int k, int l) {
    const double sx = std::sin(k * std::numbers::pi * d.hx() / (2.0 * d.lx()));
    const double sy = std::sin(l * std::numbers::pi * d.hy() / (2.0 * d.ly()));
    return 4.0 / (d.hx() * d.hx()) * sx * sx + 4.0 / (d.hy() * d.hy()) * sy * sy;
}

namespace {

double dirichlet_1d_eigenvalue(double h, int n, int k) {
    const double s = std::sin(k * std::numbers::pi / (2.0 * (n + 1)));
    return 4.0 / (h * h) * s * s;
}

}  // namespace

SpectralBasis::SpectralBasis(const RectDomain& d) : domain_(d) {
    const int nx = d.nx();
    const int ny = d.ny();
    const double pi = std::numbers::pi;

    sx_.assign(static_cast<std::size_t>(nx) * nx, 0.0);
    std::vector<double> lamx(nx);
    const double nxs = std::sqrt(2.0 / (nx + 1));
    for (int k = 1; k <= nx; ++k) {
        lamx[k - 1] = dirichlet_1d_eigenvalue(d.hx(), nx, k);
        for (int i = 0; i < nx; ++i)
            sx_[static_cast<std::size_t>(k - 1) * nx + i] = nxs * std::sin(k * pi * (i + 1) / (nx + 1));
    }

    sy_.assign(static_cast<std::size_t>(ny) * ny, 0.0);
    std::vector<double> lamy(ny);
    if (d.y_boundary() == YBoundary::Dirichlet) {
        const double nys = std::sqrt(2.0 / (ny + 1));
        for (int l = 1; l <= ny; ++l) {
            lamy[l - 1] = dirichlet_1d_eigenvalue(d.hy(), ny, l);
            for (int j = 0; j < ny; ++j)
                sy_[static_cast<std::size_t>(l - 1) * ny + j] = nys * std::sin(l * pi * (j + 1) / (ny + 1));
        }
    } else {
        const double c0 = 1.0 / std::sqrt(static_cast<double>(ny));
        const double c1 = std::sqrt(2.0 / ny);
        const double scale = 4.0 / (d.hy() * d.hy());
        for (int slot = 0; slot < ny; ++slot) {
            const int m = (slot + 1) / 2;
            const bool nyquist = (ny % 2 == 0) && slot == ny - 1;
            const double s = std::sin(pi * m / ny);
            lamy[slot] = slot == 0 ? 0.0 : scale * s * s;
            for (int j = 0; j < ny; ++j) {
                double v;
                if (slot == 0) v = c0;
                else if (nyquist) v = c0 * ((j % 2 == 0) ? 1.0 : -1.0);
                else if (slot % 2 == 1) v = c1 * std::cos(2.0 * pi * m * j / ny);
                else v = c1 * std::sin(2.0 * pi * m * j / ny);
                sy_[static_cast<std::size_t>(slot) * ny + j] = v;
            }
        }
    }

    const bool dir = d.y_boundary() == YBoundary::Dirichlet;
    modes_.reserve(d.size());
    for (int k = 1; k <= nx; ++k)
        for (int slot = 0; slot < ny; ++slot)
            modes_.push_back({k, dir ? slot + 1 : slot, lamx[k - 1] + lamy[slot]});
    std::stable_sort(modes_.begin(), modes_.end(), [](const ModeIndex& a, const ModeIndex& b) {
        if (a.eigenvalue != b.eigenvalue) return a.eigenvalue < b.eigenvalue;
        if (a.k != b.k) return a.k < b.k;
        return a.l < b.l;
    });
}

GridFunction SpectralBasis::eigenvector(std::size_t m) const {
    const int nx = domain_.nx();
    const int ny = domain_.ny();
    const ModeIndex& mi = modes_.at(m);
    const int slot = domain_.y_boundary() == YBoundary::Dirichlet ? mi.l - 1 : mi.l;
    const double inv = 1.0 / std::sqrt(domain_.cell_area());
    GridFunction v(domain_);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            v[domain_.index(i, j)] = inv * sx_[static_cast<std::size_t>(mi.k - 1) * nx + i] *
                                     sy_[static_cast<std::size_t>(slot) * ny + j];
    return v;
}

std::vector<double> SpectralBasis::to_modal(const GridFunction& u) const {
    const int nx = domain_.nx();
    const int ny = domain_.ny();
    // T(k, j) = sum_i X_k(i) u(i, j)
    std::vector<double> t(static_cast<std::size_t>(nx) * ny, 0.0);
    for (int k = 0; k < nx; ++k)
        for (int j = 0; j < ny; ++j) {
            double s = 0.0;
            for (int i = 0; i < nx; ++i) s += sx_[static_cast<std::size_t>(k) * nx + i] * u[domain_.index(i, j)];
            t[static_cast<std::size_t>(k) * ny + j] = s;
        }
    const double scale = std::sqrt(domain_.cell_area());
    std::vector<double> c(modes_.size());
    const bool dir = domain_.y_boundary() == YBoundary::Dirichlet;
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        const int k = modes_[m].k - 1;
        const int slot = dir ? modes_[m].l - 1 : modes_[m].l;
        double s = 0.0;
        for (int j = 0; j < ny; ++j)
            s += t[static_cast<std::size_t>(k) * ny + j] * sy_[static_cast<std::size_t>(slot) * ny + j];
        c[m] = s * scale;
    }
    return c;
}

GridFunction SpectralBasis::from_modal(std::span<const double> coeffs) const {
    const int nx = domain_.nx();
    const int ny = domain_.ny();
    const bool dir = domain_.y_boundary() == YBoundary::Dirichlet;
    // W(k, j) = sum_slot c(k, slot) Y_slot(j)
    std::vector<double> w(static_cast<std::size_t>(nx) * ny, 0.0);
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        const double c = coeffs[m];
        if (c == 0.0) continue;
        const int k = modes_[m].k - 1;
        const int slot = dir ? modes_[m].l - 1 : modes_[m].l;
        for (int j = 0; j < ny; ++j)
            w[static_cast<std::size_t>(k) * ny + j] += c * sy_[static_cast<std::size_t>(slot) * ny + j];
    }
    const double inv = 1.0 / std::sqrt(domain_.cell_area());
    GridFunction u(domain_);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double s = 0.0;
            for (int k = 0; k < nx; ++k)
                s += sx_[static_cast<std::size_t>(k) * nx + i] * w[static_cast<std::size_t>(k) * ny + j];
            u[domain_.index(i, j)] = s * inv;
        }
    return u;
}

std::vector<GridFunction> SpectralBasis::dense_eigenvectors() const {
    if (domain_.size() > kDenseGuard) {
        throw ConfigError(fmt::format(
            "dense eigenvector set requested for {} nodes (guard {}); use eigenvector(m) or "
            "to_modal/from_modal instead",
            domain_.size(), kDenseGuard));
    }
    std::vector<GridFunction> out;
    out.reserve(modes_.size());
    for (std::size_t m = 0; m < modes_.size(); ++m) out.push_back(eigenvector(m));
    return out;
}

SpectralBasis spectral_basis(const RectDomain& d) { return SpectralBasis(d); }

GridFunction first_mode(const RectDomain& d) { return SpectralBasis(d).eigenvector(0); }

// ---------------------------------------------------------------------------
// Text exports

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void write_field_dump(std::ostream& os, const GridFunction& u) {
    const RectDomain& d = u.domain();
    os << d.nx() << ' ' << d.ny() << ' ' << format_real(d.lx()) << ' ' << format_real(d.ly()) << '\n';
    for (double v : u.values()) os << format_real(v) << '\n';
}

void write_field_dump(const std::string& path, const GridFunction& u) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_field_dump(os, u);
}

GridFunction read_field_dump(std::istream& is, YBoundary ybc) {
    int nx = 0;
    int ny = 0;
    double lx = 0.0;
    double ly = 0.0;
    if (!(is >> nx >> ny >> lx >> ly)) throw ConfigError("field dump: malformed header");
    RectDomain d(lx, ly, nx, ny, ybc);
    std::vector<double> values(d.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(is >> values[k]))
            throw ConfigError(fmt::format("field dump: expected {} values, got {}", values.size(), k));
    }
    return GridFunction(d, std::move(values));
}

GridFunction read_field_dump(const std::string& path, YBoundary ybc) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open field dump " + path);
    return read_field_dump(is, ybc);
}

void write_field_csv(std::ostream& os, const GridFunction& u) {
    os << "x,y,value\n";
    const RectDomain& d = u.domain();
    for (std::size_t k = 0; k < u.size(); ++k) {
        const Point p = d.node(k);
        os << format_real(p.x) << ',' << format_real(p.y) << ',' << format_real(u[k]) << '\n';
    }
}

void write_field_csv(const std::string& path, const GridFunction& u) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_field_csv(os, u);
}

GridFunction random_smooth_field(const RectDomain& d, std::uint64_t seed, std::size_t n_modes) {
    const SpectralBasis basis(d);
    std::vector<double> c(basis.size(), 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t m = 0; m < std::min(n_modes, c.size()); ++m) c[m] = normal(rng) / static_cast<double>(m + 1);
    return basis.from_modal(c);
}

}  // namespace nlheat
