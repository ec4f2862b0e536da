#pragma once

#include <initializer_list>

#include "fluxobs/types.hpp"

namespace testing {

inline fluxobs::Vec vec(std::initializer_list<double> v) {
  fluxobs::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

}  // namespace testing
