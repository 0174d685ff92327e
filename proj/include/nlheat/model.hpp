#pragma once

#include <functional>
#include <string>

#include "nlheat/domain.hpp"

namespace nlheat {

/// Exponents above this (natural-log scale) are clamped and flagged instead
/// of producing inf.
inline constexpr double kExpClamp = 700.0;

/// A scalar evaluation that may have hit the exponent clamp.
struct Evaluated {
    double value = 0.0;
    bool overflow = false;
};

// ---------------------------------------------------------------------------
// Local nonlinearity f and its primitive F.

enum class NonlinearityKind {
    Polynomial,     ///< |t|^{p-1}t + |t|^{r-1}t
    ExponentialN2,  ///< |t|^{p-2}t exp(|t|^tau)
    Power,          ///< |t|^{p-1}t
    Custom,
};

enum class PrimitiveMode { ClosedForm, Quadrature };

struct NonlinearityModel {
    NonlinearityKind kind = NonlinearityKind::Polynomial;
    double p = 1.4;
    double r = 1.2;
    double tau = 0.0;
    double xi = 0.0;  ///< companion exponent of g, only used for validation
    double gamma = 0.2;
    PrimitiveMode F_mode = PrimitiveMode::ClosedForm;
    std::string label;

    // Custom hooks. custom_F may be empty, in which case F is integrated.
    std::function<double(double)> custom_f;
    std::function<double(double)> custom_fprime;
    std::function<double(double)> custom_F;

    static NonlinearityModel polynomial(double p, double r, double gamma);
    static NonlinearityModel exponential_n2(double p, double tau, double xi, double gamma);
    static NonlinearityModel power(double p, double gamma);
    static NonlinearityModel custom(std::string label, std::function<double(double)> f,
                                    std::function<double(double)> fprime,
                                    std::function<double(double)> F, double gamma);
    /// f(t) = c t.
    static NonlinearityModel linear(double c, double gamma = 0.0);
    static NonlinearityModel zero();

    /// Throws ConfigError when a preset invariant is violated.
    void validate() const;
};

Evaluated f_eval(const NonlinearityModel& m, double t);
Evaluated fprime_eval(const NonlinearityModel& m, double t);

/// F(t) = int_0^t f. Closed form where available, otherwise adaptive Simpson
/// at relative tolerance `tol`. Throws NumericError when the quadrature does
/// not reach the tolerance.
double F_eval(const NonlinearityModel& m, double t, double tol = 1e-10);

/// Adaptive Simpson quadrature of f over [0, t], ignoring any closed form.
double F_quadrature(const NonlinearityModel& m, double t, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Nonlocal density g.

enum class NonlocalKind {
    PowerQ,         ///< |t|^q
    ExponentialXi,  ///< exp(|t|^xi)
    Custom,
};

struct NonlocalModel {
    NonlocalKind kind = NonlocalKind::PowerQ;
    double q = 3.0;
    double xi = 1.5;
    std::string label;
    std::function<double(double)> custom_g;
    std::function<double(double)> custom_gprime;

    static NonlocalModel power_q(double q);
    static NonlocalModel exponential(double xi);
    static NonlocalModel constant(double c);
    static NonlocalModel custom(std::string label, std::function<double(double)> g,
                                std::function<double(double)> gprime);

    void validate() const;
};

Evaluated g_eval(const NonlocalModel& m, double t);
Evaluated gprime_eval(const NonlocalModel& m, double t);

// ---------------------------------------------------------------------------
// Coefficient a(x, z) = 1 + B(x) h(z).

/// Spatial profile B.
struct SpatialProfile {
    std::string id;
    std::function<double(Point)> eval;

    static SpatialProfile zero();
    static SpatialProfile one();
    /// sin(pi x / lx) sin(pi y / ly).
    static SpatialProfile sine(double lx, double ly);
};

/// Cutoff profile h with its derivative.
struct CutoffProfile {
    std::string id;
    std::function<double(double)> eval;
    std::function<double(double)> derivative;

    static CutoffProfile none();
    /// c (1 - (z/K)^2)^2 for |z| < K, else 0. C^1 with compact support.
    static CutoffProfile bump(double c, double K);
    /// c max(0, 1 - |z|/K).
    static CutoffProfile hat(double c, double K);
    /// c exp(-(z/K)^2); never vanishes, so it violates saturation.
    static CutoffProfile gaussian(double c, double K);
};

struct CoefficientModel {
    double a0 = 0.5;
    double K = 1.0;
    SpatialProfile B = SpatialProfile::zero();
    CutoffProfile h = CutoffProfile::none();

    static CoefficientModel unit(double K = 1.0);
    static CoefficientModel product(double a0, double K, SpatialProfile B, CutoffProfile h);

    /// True when B h vanishes identically by construction.
    bool is_unit() const noexcept { return B.id == "zero" || h.id == "none"; }
};

double a_eval(const CoefficientModel& c, Point x, double z);
/// Partial derivative of a with respect to the nonlocal argument z.
double a_dz(const CoefficientModel& c, Point x, double z);

// ---------------------------------------------------------------------------

/// Problem data: domain plus the (f, g, a) triple. `hypothesis_dim` selects
/// which growth conditions the verifier applies (2, or >= 3).
struct ProblemSpec {
    RectDomain domain;
    NonlinearityModel f;
    NonlocalModel g;
    CoefficientModel a;
    int hypothesis_dim = 2;
    std::string name;

    /// Checks the component invariants and that 1 + B h stays >= a0 > 0 on a
    /// sample lattice. Throws ConfigError.
    void validate() const;
};

/// Psi(x, t, z) = (1/a(x, z) - 1) f(t). Exactly +0 whenever a(x, z) == 1.
Evaluated psi_eval(const ProblemSpec& spec, Point x, double t, double z);

}  // namespace nlheat
