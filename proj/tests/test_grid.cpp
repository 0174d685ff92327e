#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "nlheat/errors.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/presets.hpp"

using namespace nlheat;

namespace {

/// Five-point matrix assembled entry by entry, independent of apply_laplacian.
Eigen::MatrixXd dense_laplacian(const RectDomain& d) {
    const int nx = d.nx(), ny = d.ny();
    const double ix2 = 1.0 / (d.hx() * d.hx()), iy2 = 1.0 / (d.hy() * d.hy());
    const bool periodic = d.y_boundary() == YBoundary::Periodic;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nx * ny, nx * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int k = j * nx + i;
            A(k, k) = 2 * ix2 + 2 * iy2;
            if (i > 0) A(k, k - 1) -= ix2;
            if (i < nx - 1) A(k, k + 1) -= ix2;
            if (j > 0) A(k, k - nx) -= iy2;
            else if (periodic) A(k, (ny - 1) * nx + i) -= iy2;
            if (j < ny - 1) A(k, k + nx) -= iy2;
            else if (periodic) A(k, i) -= iy2;
        }
    }
    return A;
}

}  // namespace

TEST_CASE("apply_laplacian matches the dense 16x16 matrix") {
    for (YBoundary ybc : {YBoundary::Dirichlet, YBoundary::Periodic}) {
        const RectDomain d(1.0, 0.7, 4, 4, ybc);
        const Eigen::MatrixXd A = dense_laplacian(d);
        const GridFunction u = random_smooth_field(d, 3, 16);
        const Eigen::VectorXd ue = Eigen::Map<const Eigen::VectorXd>(u.values().data(), 16);
        const Eigen::VectorXd ref = A * ue;
        const GridFunction Au = laplacian_apply(u);
        for (int k = 0; k < 16; ++k) CHECK(Au[k] == doctest::Approx(ref(k)).epsilon(1e-13).scale(1.0));
    }
}

TEST_CASE("spectral basis eigenvalues match a dense symmetric eigensolver") {
    for (YBoundary ybc : {YBoundary::Dirichlet, YBoundary::Periodic}) {
        const RectDomain d(1.3, 1.0, 4, 4, ybc);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_laplacian(d));
        const SpectralBasis b(d);
        REQUIRE(b.size() == 16);
        for (std::size_t m = 0; m < 16; ++m)
            CHECK(b.eigenvalue(m) == doctest::Approx(es.eigenvalues()(static_cast<int>(m))).epsilon(1e-12));
    }
}

TEST_CASE("closed-form Dirichlet eigenvalue is the smallest dense eigenvalue") {
    const RectDomain d(1.0, 1.0, 16, 16);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_laplacian(d));
    CHECK(dirichlet_eigenvalue(d, 1, 1) == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-12));
    const double h = 1.0 / 17;
    CHECK(dirichlet_eigenvalue(d, 1, 1) == doctest::Approx(8.0 / (h * h) * std::pow(std::sin(M_PI * h / 2), 2)));
}

TEST_CASE("eigenvectors are orthonormal and satisfy A v = lambda v") {
    const RectDomain d(1.0, 2.0, 6, 5);
    const SpectralBasis b(d);
    for (std::size_t m = 0; m < b.size(); m += 7) {
        const GridFunction v = b.eigenvector(m);
        CHECK(inner(v, v) == doctest::Approx(1.0).epsilon(1e-12));
        const GridFunction r = laplacian_apply(v) - b.eigenvalue(m) * v;
        CHECK(norm_l2(r) < 1e-10 * b.eigenvalue(m));
        if (m + 1 < b.size()) CHECK(std::abs(inner(v, b.eigenvector(m + 1))) < 1e-12);
    }
}

TEST_CASE("modal round trip") {
    const RectDomain d(1.0, 1.0, 9, 7);
    const SpectralBasis b(d);
    const GridFunction u = random_smooth_field(d, 11, 30);
    const GridFunction w = b.from_modal(b.to_modal(u));
    CHECK(norm_l2(w - u) < 1e-13 * norm_l2(u));
}

TEST_CASE("first mode is positive, unit L2 and has |e1|_H1^2 = lambda_1") {
    const RectDomain d(1.0, 1.0, 12, 12);
    const GridFunction e1 = first_mode(d);
    CHECK(norm_l2(e1) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::all_of(e1.values().begin(), e1.values().end(), [](double x) { return x > 0.0; }));
    CHECK(norm_h1(e1) * norm_h1(e1) == doctest::Approx(dirichlet_eigenvalue(d, 1, 1)).epsilon(1e-12));
}

TEST_CASE("H1 norm from the stencil equals the forward-difference gradient norm") {
    for (YBoundary ybc : {YBoundary::Dirichlet, YBoundary::Periodic}) {
        const RectDomain d(1.0, 0.5, 10, 6, ybc);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const GridFunction u = random_smooth_field(d, seed, 20);
            CHECK(norm_h1(u) == doctest::Approx(norm_h1_forward_difference(u)).epsilon(1e-12));
        }
    }
}

TEST_CASE("inner, integrate and norms on constants") {
    const RectDomain d(2.0, 1.0, 3, 3);
    const GridFunction one = sample(d, [](Point) { return 1.0; });
    CHECK(integrate(one) == doctest::Approx(9 * d.cell_area()));
    CHECK(norm_l2(one) == doctest::Approx(std::sqrt(9 * d.cell_area())));
}

TEST_CASE("energy and nonlocal value on simple models") {
    const RectDomain d(1.0, 1.0, 8, 8);
    const GridFunction u = random_smooth_field(d, 5);
    const ProblemSpec heat = make_preset("heat", d);
    CHECK(energy(u, heat) == doctest::Approx(0.5 * norm_h1(u) * norm_h1(u)).epsilon(1e-14));
    const ProblemSpec cubic = make_preset("cubic", d);
    double quartic = 0.0;
    for (double x : u.values()) quartic += x * x * x * x / 4.0;
    CHECK(energy(u, cubic) ==
          doctest::Approx(0.5 * norm_h1(u) * norm_h1(u) - quartic * d.cell_area()).epsilon(1e-13));
    CHECK(nonlocal_value(u, NonlocalModel::power_q(2.0)) == doctest::Approx(inner(u, u)).epsilon(1e-14));
}

TEST_CASE("random smooth fields are seeded") {
    const RectDomain d(1.0, 1.0, 8, 8);
    const GridFunction a = random_smooth_field(d, 7), b = random_smooth_field(d, 7), c = random_smooth_field(d, 8);
    CHECK(a.vector() == b.vector());
    CHECK(a.vector() != c.vector());
}

TEST_CASE("field dump round-trips bit-exactly") {
    const RectDomain d(1.5, 0.75, 5, 4);
    const GridFunction u = random_smooth_field(d, 2);
    std::stringstream ss;
    write_field_dump(ss, u);
    const GridFunction w = read_field_dump(ss);
    CHECK(w.domain() == d);
    CHECK(w.vector() == u.vector());
}

TEST_CASE("field CSV has x,y,value rows") {
    const RectDomain d(1.0, 1.0, 3, 3);
    std::stringstream ss;
    write_field_csv(ss, first_mode(d));
    std::string line;
    std::getline(ss, line);
    CHECK(line == "x,y,value");
    int rows = 0;
    while (std::getline(ss, line)) ++rows;
    CHECK(rows == 9);
}

TEST_CASE("malformed dumps and tiny grids are rejected") {
    std::stringstream ss("3 3 1 1\n0.5\n");
    CHECK_THROWS_AS(read_field_dump(ss), ConfigError);
    CHECK_THROWS_AS(RectDomain(1, 1, 2, 5), ConfigError);
    CHECK_THROWS_AS(RectDomain(0, 1, 5, 5), ConfigError);
}

TEST_CASE("format_real round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_real(v)) == v);
}

TEST_CASE("sample evaluates at interior nodes") {
    const RectDomain d(1.0, 1.0, 3, 3);
    const GridFunction u = sample(d, [](Point p) { return p.x + 10 * p.y; });
    CHECK(u[d.index(0, 0)] == doctest::Approx(0.25 + 2.5));
    CHECK(u[d.index(2, 1)] == doctest::Approx(0.75 + 5.0));
}
