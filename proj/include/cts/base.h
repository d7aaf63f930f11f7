// cts/base.h

// Copyright 2026  ctskit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CTS_BASE_H_
#define CTS_BASE_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace cts {

/// All recoverable failures in the toolkit are reported with this type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] void ThrowError(Args &&...args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  throw Error(os.str());
}

#define CTS_ASSERT(cond)                                                   \
  do {                                                                     \
    if (!(cond))                                                           \
      ::cts::ThrowError("assertion failed: ", #cond, " (", __FILE__, ":",  \
                        __LINE__, ")");                                    \
  } while (0)

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double LogAdd(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double LogSumExp(std::span<const double> v) {
  double m = kLogZero;
  for (double x : v) m = std::max(m, x);
  if (m == kLogZero) return kLogZero;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

inline bool ApproxEqual(double a, double b, double rel_tol) {
  if (a == b) return true;
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace cts

#endif  // CTS_BASE_H_
