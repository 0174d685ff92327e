#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nlheat/domain.hpp"
#include "nlheat/model.hpp"

namespace nlheat {

/// Writes A u = -Delta_h u (five-point stencil, zero ghost values on
/// Dirichlet sides, wrap-around on a periodic y axis) into `out`.
void apply_laplacian(const RectDomain& d, std::span<const double> u, std::span<double> out);

GridFunction laplacian_apply(const GridFunction& u);

/// Discrete L2 inner product: sum u v hx hy.
double inner(const GridFunction& u, const GridFunction& v);

/// Rectangle rule: sum u hx hy.
double integrate(const GridFunction& u);

double norm_l2(const GridFunction& u);

/// sqrt(<A u, u> hx hy), the discrete Dirichlet form.
double norm_h1(const GridFunction& u);

/// sqrt of the forward-difference gradient sum, including the boundary
/// differences against the zero ghost values. Equal to norm_h1 in exact
/// arithmetic; kept as an independent discretisation for cross-checks.
double norm_h1_forward_difference(const GridFunction& u);

/// E(u) = 1/2 |u|_{H1}^2 - int F(u).
double energy(const GridFunction& u, const ProblemSpec& spec);

/// Nonlocal argument z = int g(u). Sets `overflow` if any node clamps.
double nonlocal_value(const GridFunction& u, const NonlocalModel& g, bool* overflow = nullptr);

/// Evaluates fn at every interior node.
template <class Fn>
GridFunction sample(const RectDomain& d, Fn&& fn) {
    GridFunction u(d);
    for (std::size_t k = 0; k < d.size(); ++k) u[k] = fn(d.node(k));
    return u;
}

// ---------------------------------------------------------------------------
// Spectral decomposition of A on a rectangle (closed-form tensor modes).

/// One eigenpair index: x mode k >= 1 and y mode l. On a Dirichlet axis
/// l >= 1 is the sine number; on a periodic axis l = 0 is the constant,
/// l = 2m-1 / 2m the cosine / sine of wavenumber m.
struct ModeIndex {
    int k = 1;
    int l = 1;
    double eigenvalue = 0.0;
};

/// Discrete Dirichlet eigenvalue (4/hx^2) sin^2(k pi hx / (2 Lx)) + same in y.
double dirichlet_eigenvalue(const RectDomain& d, int k, int l);

class SpectralBasis {
public:
    explicit SpectralBasis(const RectDomain& d);

    const RectDomain& domain() const noexcept { return domain_; }
    std::size_t size() const noexcept { return modes_.size(); }
    const std::vector<ModeIndex>& modes() const noexcept { return modes_; }
    double eigenvalue(std::size_t m) const { return modes_[m].eigenvalue; }

    /// m-th eigenvector (ascending eigenvalue), orthonormal in the discrete
    /// L2 inner product.
    GridFunction eigenvector(std::size_t m) const;

    /// Coefficients <u, v_m> in ascending-eigenvalue order.
    std::vector<double> to_modal(const GridFunction& u) const;
    GridFunction from_modal(std::span<const double> coeffs) const;

    /// Largest grid for which dense_eigenvectors() materialises all pairs.
    static constexpr std::size_t kDenseGuard = 64 * 64;
    /// All eigenvectors as rows; throws ConfigError above kDenseGuard nodes.
    std::vector<GridFunction> dense_eigenvectors() const;

private:
    RectDomain domain_;
    std::vector<ModeIndex> modes_;
    std::vector<double> sx_;       ///< nx x nx, row = mode k-1, unit discrete norm
    std::vector<double> sy_;       ///< ny x ny, row = y-mode slot
};

SpectralBasis spectral_basis(const RectDomain& d);

/// First eigenvector, normalised to unit L2 and positive.
GridFunction first_mode(const RectDomain& d);

/// Seeded random combination of the lowest `n_modes` eigenvectors with
/// N(0,1)/(m+1) weights. Not normalised.
GridFunction random_smooth_field(const RectDomain& d, std::uint64_t seed, std::size_t n_modes = 8);

// ---------------------------------------------------------------------------
// Field dump: "nx ny Lx Ly" header then row-major values, one per line.

void write_field_dump(std::ostream& os, const GridFunction& u);
void write_field_dump(const std::string& path, const GridFunction& u);
/// Reads a dump; the y boundary is taken from `ybc` since the header does
/// not carry it.
GridFunction read_field_dump(std::istream& is, YBoundary ybc = YBoundary::Dirichlet);
GridFunction read_field_dump(const std::string& path, YBoundary ybc = YBoundary::Dirichlet);

/// CSV with columns x,y,value.
void write_field_csv(std::ostream& os, const GridFunction& u);
void write_field_csv(const std::string& path, const GridFunction& u);

/// Round-trip decimal representation used by every text export.
std::string format_real(double v);

}  // namespace nlheat
