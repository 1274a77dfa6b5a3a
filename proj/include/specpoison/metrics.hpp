#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>

namespace specpoison {

/// Error decomposition of a binary classifier. Label 1 is the positive class
/// (busy / ACK): a misdetection is a positive predicted negative, a false
/// alarm a negative predicted positive. Ratios are absent when their
/// denominator class does not occur.
struct ClassifierMetrics {
  std::size_t n_md = 0;
  std::size_t n_fa = 0;
  std::size_t n_positive = 0;  // n_busy for the transmitter
  std::size_t n_negative = 0;  // n_idle for the transmitter
  std::optional<double> e_md;
  std::optional<double> e_fa;
  std::optional<double> e;

  bool operator==(const ClassifierMetrics&) const = default;
};

inline ClassifierMetrics metrics_from_counts(std::size_t n_md, std::size_t n_positive, std::size_t n_fa,
                                             std::size_t n_negative) {
  ClassifierMetrics m{n_md, n_fa, n_positive, n_negative, {}, {}, {}};
  if (n_positive > 0) m.e_md = static_cast<double>(n_md) / static_cast<double>(n_positive);
  if (n_negative > 0) m.e_fa = static_cast<double>(n_fa) / static_cast<double>(n_negative);
  if (m.e_md && m.e_fa) m.e = std::max(*m.e_md, *m.e_fa);
  else if (m.e_md) m.e = m.e_md;
  else if (m.e_fa) m.e = m.e_fa;
  return m;
}

inline ClassifierMetrics evaluate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and truth lengths differ");
  if (truth.empty()) throw std::invalid_argument("cannot evaluate an empty trace");
  std::size_t md = 0, fa = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++pos;
      md += predicted[i] == 0 ? 1 : 0;
    } else {
      ++neg;
      fa += predicted[i] == 1 ? 1 : 0;
    }
  }
  return metrics_from_counts(md, pos, fa, neg);
}

}  // namespace specpoison
