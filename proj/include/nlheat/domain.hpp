#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nlheat {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Boundary treatment of the y axis. Periodic turns the rectangle into a
/// channel, which is how quasi-one-dimensional strips are modelled; x is
/// always Dirichlet-zero.
enum class YBoundary { Dirichlet, Periodic };

/// Uniform rectangle [0,Lx]x[0,Ly] sampled at interior nodes.
///
/// Dirichlet axes carry n interior nodes at spacing L/(n+1); a periodic y axis
/// carries ny nodes at spacing Ly/ny starting at y = 0.
class RectDomain {
public:
    RectDomain() = default;
    RectDomain(double lx, double ly, int nx, int ny, YBoundary ybc = YBoundary::Dirichlet);

    double lx() const noexcept { return lx_; }
    double ly() const noexcept { return ly_; }
    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    YBoundary y_boundary() const noexcept { return ybc_; }
    double hx() const noexcept { return hx_; }
    double hy() const noexcept { return hy_; }
    double cell_area() const noexcept { return hx_ * hy_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }

    /// Row-major: x varies fastest.
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * nx_ + i;
    }
    /// Coordinates of interior node (i, j), zero-based.
    Point node(int i, int j) const noexcept;
    Point node(std::size_t k) const noexcept {
        return node(static_cast<int>(k % nx_), static_cast<int>(k / nx_));
    }

    bool operator==(const RectDomain& o) const noexcept {
        return lx_ == o.lx_ && ly_ == o.ly_ && nx_ == o.nx_ && ny_ == o.ny_ && ybc_ == o.ybc_;
    }

private:
    double lx_ = 1.0;
    double ly_ = 1.0;
    int nx_ = 3;
    int ny_ = 3;
    YBoundary ybc_ = YBoundary::Dirichlet;
    double hx_ = 0.25;
    double hy_ = 0.25;
};

/// Nodal values of a scalar field at the interior nodes of a RectDomain.
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(const RectDomain& d) : domain_(d), values_(d.size(), 0.0) {}
    GridFunction(const RectDomain& d, std::vector<double> values);

    const RectDomain& domain() const noexcept { return domain_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> data() noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& operator[](std::size_t k) noexcept { return values_[k]; }

    bool all_finite() const noexcept;

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(double s);

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

private:
    RectDomain domain_;
    std::vector<double> values_;
};

}  // namespace nlheat
