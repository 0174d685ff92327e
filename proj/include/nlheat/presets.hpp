#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nlheat/model.hpp"

namespace nlheat {

/// Named problems on a given domain.
///   example2  f = |u|^0.4 u + |u|^0.2 u, g = |t|^3, a = 1 + B h with
///             B = sin sin, h = bump(0.5, K=1), a0 = 0.5; checked as N >= 3.
///   example1  f = |u| u e^{|u|^0.6}, g = e^{|t|^1.5}, same a with K = 2; N = 2.
///   cubic     f = u^3 (gamma = 2), a = 1.
///   heat      f = 0, a = 1.
ProblemSpec make_preset(std::string_view name, const RectDomain& domain);

const std::vector<std::string>& preset_names();

}  // namespace nlheat
