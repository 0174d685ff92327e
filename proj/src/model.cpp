#include "nlheat/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nlheat/errors.hpp"

namespace nlheat {

namespace {

double signum(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

/// sign * exp(log_mag) with the exponent clamp applied.
Evaluated clamped_exp(double sign, double log_mag) {
    if (log_mag > kExpClamp) return {sign * std::exp(kExpClamp), true};
    return {sign * std::exp(log_mag), false};
}

Evaluated checked(double v) { return {v, !std::isfinite(v)}; }

struct SimpsonState {
    int max_depth = 50;
    bool hit_depth = false;
    double worst_error = 0.0;
    bool overflow = false;
};

template <class Fn>
double simpson_recurse(const Fn& fn, double a, double b, double fa, double fm, double fb,
                       double whole, double eps, int depth, SimpsonState& st) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = fn(lm);
    const double frm = fn(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    if (depth >= st.max_depth) {
        st.hit_depth = true;
        st.worst_error = std::max(st.worst_error, std::abs(delta) / 15.0);
        return left + right + delta / 15.0;
    }
    return simpson_recurse(fn, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1, st) +
           simpson_recurse(fn, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1, st);
}

}  // namespace

// ---------------------------------------------------------------------------
// NonlinearityModel

NonlinearityModel NonlinearityModel::polynomial(double p, double r, double gamma) {
    NonlinearityModel m;
    m.kind = NonlinearityKind::Polynomial;
    m.p = p;
    m.r = r;
    m.gamma = gamma;
    m.label = "polynomial";
    return m;
}

NonlinearityModel NonlinearityModel::exponential_n2(double p, double tau, double xi, double gamma) {
    NonlinearityModel m;
    m.kind = NonlinearityKind::ExponentialN2;
    m.p = p;
    m.tau = tau;
    m.xi = xi;
    m.gamma = gamma;
    m.F_mode = PrimitiveMode::Quadrature;
    m.label = "exponential";
    return m;
}

NonlinearityModel NonlinearityModel::power(double p, double gamma) {
    NonlinearityModel m;
    m.kind = NonlinearityKind::Power;
    m.p = p;
    m.gamma = gamma;
    m.label = "power";
    return m;
}

NonlinearityModel NonlinearityModel::custom(std::string label, std::function<double(double)> f,
                                            std::function<double(double)> fprime,
                                            std::function<double(double)> F, double gamma) {
    NonlinearityModel m;
    m.kind = NonlinearityKind::Custom;
    m.gamma = gamma;
    m.label = std::move(label);
    m.custom_f = std::move(f);
    m.custom_fprime = std::move(fprime);
    m.custom_F = std::move(F);
    m.F_mode = m.custom_F ? PrimitiveMode::ClosedForm : PrimitiveMode::Quadrature;
    return m;
}

NonlinearityModel NonlinearityModel::linear(double c, double gamma) {
    return custom(
        "linear", [c](double t) { return c * t; }, [c](double) { return c; },
        [c](double t) { return 0.5 * c * t * t; }, gamma);
}

NonlinearityModel NonlinearityModel::zero() {
    return custom(
        "zero", [](double) { return 0.0; }, [](double) { return 0.0; },
        [](double) { return 0.0; }, 0.0);
}

void NonlinearityModel::validate() const {
    std::ostringstream err;
    switch (kind) {
        case NonlinearityKind::Polynomial:
            if (!(p > 1.0)) err << "f.p must be > 1 (got " << p << "); ";
            if (!(r > 1.0)) err << "f.r must be > 1 (got " << r << "); ";
            break;
        case NonlinearityKind::ExponentialN2:
            if (!(p > 2.0)) err << "f.p must be > 2 (got " << p << "); ";
            if (!(1.0 < 2.0 * tau && 2.0 * tau < xi && xi < 2.0))
                err << "exponential model requires 1 < 2*tau < xi < 2 (tau=" << tau
                    << ", xi=" << xi << "); ";
            break;
        case NonlinearityKind::Power:
            if (!(p > 1.0)) err << "f.p must be > 1 (got " << p << "); ";
            break;
        case NonlinearityKind::Custom:
            if (!custom_f || !custom_fprime) err << "custom f needs f and f' hooks; ";
            break;
    }
    if (kind != NonlinearityKind::Custom && !(gamma > 0.0))
        err << "f.gamma must be > 0 (got " << gamma << "); ";
    if (!err.str().empty()) throw ConfigError(err.str());
}

Evaluated f_eval(const NonlinearityModel& m, double t) {
    const double a = std::abs(t);
    switch (m.kind) {
        case NonlinearityKind::Polynomial:
            return checked(std::pow(a, m.p - 1.0) * t + std::pow(a, m.r - 1.0) * t);
        case NonlinearityKind::Power:
            return checked(std::pow(a, m.p - 1.0) * t);
        case NonlinearityKind::ExponentialN2:
            if (a == 0.0) return {0.0, false};
            return clamped_exp(signum(t), (m.p - 1.0) * std::log(a) + std::pow(a, m.tau));
        case NonlinearityKind::Custom:
            return checked(m.custom_f(t));
    }
    return {};
}

Evaluated fprime_eval(const NonlinearityModel& m, double t) {
    const double a = std::abs(t);
    switch (m.kind) {
        case NonlinearityKind::Polynomial:
            return checked(m.p * std::pow(a, m.p - 1.0) + m.r * std::pow(a, m.r - 1.0));
        case NonlinearityKind::Power:
            return checked(m.p * std::pow(a, m.p - 1.0));
        case NonlinearityKind::ExponentialN2: {
            if (a == 0.0) return {m.p == 2.0 ? 1.0 : 0.0, false};
            const double s = std::pow(a, m.tau);
            return clamped_exp(1.0, (m.p - 2.0) * std::log(a) + s + std::log(m.p - 1.0 + m.tau * s));
        }
        case NonlinearityKind::Custom:
            return checked(m.custom_fprime(t));
    }
    return {};
}

double F_quadrature(const NonlinearityModel& m, double t, double tol) {
    if (t == 0.0) return 0.0;
    SimpsonState st;
    auto fn = [&](double s) {
        const Evaluated e = f_eval(m, s);
        st.overflow = st.overflow || e.overflow;
        return e.value;
    };
    const double a = 0.0;
    const double b = t;
    const double fa = fn(a);
    const double fm = fn(0.5 * (a + b));
    const double fb = fn(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Seed the error budget from a 4-panel estimate; the 1-panel one can be
    // far off for the exponential model.
    double scale = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double lo = a + (b - a) * k / 4.0;
        const double hi = a + (b - a) * (k + 1) / 4.0;
        scale += (hi - lo) / 6.0 * (fn(lo) + 4.0 * fn(0.5 * (lo + hi)) + fn(hi));
    }
    const double eps = tol * std::max(std::abs(scale), 1e-300);
    const double value = simpson_recurse(fn, a, b, fa, fm, fb, whole, eps, 0, st);
    if (st.overflow) {
        std::ostringstream msg;
        msg << "F quadrature overflow: f exceeds exp(" << kExpClamp << ") on [0, " << t << "]";
        throw NumericError(msg.str());
    }
    if (st.hit_depth && st.worst_error > 15.0 * eps) {
        std::ostringstream msg;
        msg << "F quadrature did not converge on [0, " << t << "]: requested rel tol " << tol
            << ", achieved error " << st.worst_error;
        throw NumericError(msg.str());
    }
    return value;
}

double F_eval(const NonlinearityModel& m, double t, double tol) {
    const double a = std::abs(t);
    switch (m.kind) {
        case NonlinearityKind::Polynomial:
            if (m.F_mode == PrimitiveMode::ClosedForm)
                return std::pow(a, m.p + 1.0) / (m.p + 1.0) + std::pow(a, m.r + 1.0) / (m.r + 1.0);
            break;
        case NonlinearityKind::Power:
            if (m.F_mode == PrimitiveMode::ClosedForm) return std::pow(a, m.p + 1.0) / (m.p + 1.0);
            break;
        case NonlinearityKind::Custom:
            if (m.custom_F) return m.custom_F(t);
            break;
        case NonlinearityKind::ExponentialN2:
            break;
    }
    return F_quadrature(m, t, tol);
}

// ---------------------------------------------------------------------------
// NonlocalModel

NonlocalModel NonlocalModel::power_q(double q) {
    NonlocalModel m;
    m.kind = NonlocalKind::PowerQ;
    m.q = q;
    m.label = "powerq";
    return m;
}

NonlocalModel NonlocalModel::exponential(double xi) {
    NonlocalModel m;
    m.kind = NonlocalKind::ExponentialXi;
    m.xi = xi;
    m.label = "exponential";
    return m;
}

NonlocalModel NonlocalModel::constant(double c) {
    return custom("constant", [c](double) { return c; }, [](double) { return 0.0; });
}

NonlocalModel NonlocalModel::custom(std::string label, std::function<double(double)> g,
                                    std::function<double(double)> gprime) {
    NonlocalModel m;
    m.kind = NonlocalKind::Custom;
    m.label = std::move(label);
    m.custom_g = std::move(g);
    m.custom_gprime = std::move(gprime);
    return m;
}

void NonlocalModel::validate() const {
    switch (kind) {
        case NonlocalKind::PowerQ:
            if (!(q >= 1.0)) {
                std::ostringstream msg;
                msg << "g.q must be >= 1 (got " << q << ")";
                throw ConfigError(msg.str());
            }
            break;
        case NonlocalKind::ExponentialXi:
            if (!(xi > 0.0)) {
                std::ostringstream msg;
                msg << "g.xi must be > 0 (got " << xi << ")";
                throw ConfigError(msg.str());
            }
            break;
        case NonlocalKind::Custom:
            if (!custom_g || !custom_gprime) throw ConfigError("custom g needs g and g' hooks");
            break;
    }
}

Evaluated g_eval(const NonlocalModel& m, double t) {
    const double a = std::abs(t);
    switch (m.kind) {
        case NonlocalKind::PowerQ:
            return checked(std::pow(a, m.q));
        case NonlocalKind::ExponentialXi:
            return clamped_exp(1.0, std::pow(a, m.xi));
        case NonlocalKind::Custom:
            return checked(m.custom_g(t));
    }
    return {};
}

Evaluated gprime_eval(const NonlocalModel& m, double t) {
    const double a = std::abs(t);
    switch (m.kind) {
        case NonlocalKind::PowerQ:
            if (a == 0.0) return {0.0, false};
            return checked(signum(t) * m.q * std::pow(a, m.q - 1.0));
        case NonlocalKind::ExponentialXi: {
            if (a == 0.0) return {0.0, false};
            const double s = std::pow(a, m.xi);
            const Evaluated e = clamped_exp(signum(t), s + std::log(m.xi) + (m.xi - 1.0) * std::log(a));
            return e;
        }
        case NonlocalKind::Custom:
            return checked(m.custom_gprime(t));
    }
    return {};
}

// ---------------------------------------------------------------------------
// Coefficient profiles

SpatialProfile SpatialProfile::zero() { return {"zero", [](Point) { return 0.0; }}; }

SpatialProfile SpatialProfile::one() { return {"one", [](Point) { return 1.0; }}; }

SpatialProfile SpatialProfile::sine(double lx, double ly) {
    return {"sine", [lx, ly](Point x) {
                return std::sin(std::numbers::pi * x.x / lx) * std::sin(std::numbers::pi * x.y / ly);
            }};
}

CutoffProfile CutoffProfile::none() {
    return {"none", [](double) { return 0.0; }, [](double) { return 0.0; }};
}

CutoffProfile CutoffProfile::bump(double c, double K) {
    return {"bump",
            [c, K](double z) {
                if (std::abs(z) >= K) return 0.0;
                const double w = 1.0 - (z / K) * (z / K);
                return c * w * w;
            },
            [c, K](double z) {
                if (std::abs(z) >= K) return 0.0;
                const double w = 1.0 - (z / K) * (z / K);
                return -4.0 * c * w * z / (K * K);
            }};
}

CutoffProfile CutoffProfile::hat(double c, double K) {
    return {"hat",
            [c, K](double z) { return c * std::max(0.0, 1.0 - std::abs(z) / K); },
            [c, K](double z) {
                if (std::abs(z) >= K) return 0.0;
                return -c * signum(z) / K;
            }};
}

CutoffProfile CutoffProfile::gaussian(double c, double K) {
    return {"gaussian",
            [c, K](double z) { return c * std::exp(-(z / K) * (z / K)); },
            [c, K](double z) { return -2.0 * c * z / (K * K) * std::exp(-(z / K) * (z / K)); }};
}

CoefficientModel CoefficientModel::unit(double K) {
    CoefficientModel c;
    c.a0 = 1.0;
    c.K = K;
    return c;
}

CoefficientModel CoefficientModel::product(double a0, double K, SpatialProfile B, CutoffProfile h) {
    CoefficientModel c;
    c.a0 = a0;
    c.K = K;
    c.B = std::move(B);
    c.h = std::move(h);
    return c;
}

double a_eval(const CoefficientModel& c, Point x, double z) {
    const double hz = c.h.eval(z);
    if (hz == 0.0) return 1.0;
    return 1.0 + c.B.eval(x) * hz;
}

double a_dz(const CoefficientModel& c, Point x, double z) {
    const double dh = c.h.derivative(z);
    if (dh == 0.0) return 0.0;
    return c.B.eval(x) * dh;
}

// ---------------------------------------------------------------------------

void ProblemSpec::validate() const {
    f.validate();
    g.validate();
    if (!(a.a0 > 0.0)) throw ConfigError("a.a0 must be > 0");
    if (!(a.K > 0.0)) throw ConfigError("a.K must be > 0");
    // Coarse lattice including the boundary, z across the cutoff support.
    const int nxs = 17;
    const int nzs = 401;
    for (int i = 0; i < nxs; ++i) {
        for (int j = 0; j < nxs; ++j) {
            const Point x{domain.lx() * i / (nxs - 1), domain.ly() * j / (nxs - 1)};
            for (int k = 0; k < nzs; ++k) {
                const double z = -4.0 * a.K + 8.0 * a.K * k / (nzs - 1);
                const double av = a_eval(a, x, z);
                if (!(av >= a.a0)) {
                    std::ostringstream msg;
                    msg << "coefficient a(x,z) = " << av << " < a0 = " << a.a0 << " at x=(" << x.x
                        << "," << x.y << "), z=" << z;
                    throw ConfigError(msg.str());
                }
            }
        }
    }
}

Evaluated psi_eval(const ProblemSpec& spec, Point x, double t, double z) {
    const double av = a_eval(spec.a, x, z);
    const Evaluated fv = f_eval(spec.f, t);
    if (av == 1.0) return {0.0, fv.overflow};
    return {(1.0 / av - 1.0) * fv.value, fv.overflow};
}

}  // namespace nlheat
