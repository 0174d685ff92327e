#include "nlheat/presets.hpp"

#include <fmt/format.h>

#include "nlheat/errors.hpp"

namespace nlheat {

ProblemSpec make_preset(std::string_view name, const RectDomain& domain) {
    ProblemSpec s{domain, NonlinearityModel::zero(), NonlocalModel::power_q(2.0), CoefficientModel::unit(1.0), 2,
                  std::string(name)};
    const SpatialProfile sine = SpatialProfile::sine(domain.lx(), domain.ly());
    if (name == "example2") {
        s.f = NonlinearityModel::polynomial(1.4, 1.2, 0.2);
        s.g = NonlocalModel::power_q(3.0);
        s.a = CoefficientModel::product(0.5, 1.0, sine, CutoffProfile::bump(0.5, 1.0));
        s.hypothesis_dim = 3;
    } else if (name == "example1") {
        // g >= 1 puts z >= |Omega|, so K must exceed the domain area for Psi to act.
        const double K = 2.0 * domain.lx() * domain.ly();
        s.f = NonlinearityModel::exponential_n2(3.0, 0.6, 1.5, 1.0);
        s.g = NonlocalModel::exponential(1.5);
        s.a = CoefficientModel::product(0.5, K, sine, CutoffProfile::bump(0.5, K));
        s.hypothesis_dim = 2;
    } else if (name == "cubic") {
        s.f = NonlinearityModel::power(3.0, 2.0);
        s.g = NonlocalModel::power_q(2.0);
    } else if (name == "heat") {
        s.f = NonlinearityModel::zero();
    } else {
        throw ConfigError(fmt::format("unknown preset '{}' (known: example1, example2, cubic, heat)", name));
    }
    return s;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"example1", "example2", "cubic", "heat"};
    return names;
}

}  // namespace nlheat
