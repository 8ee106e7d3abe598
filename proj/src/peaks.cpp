#include "sbldoa/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sbldoa/errors.hpp"

namespace sbldoa {

namespace {

// Highest first, lower index on equal height.
std::vector<std::size_t> top_k(std::vector<std::size_t> candidates,
                               std::span<const double> values, std::size_t k) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::vector<std::size_t> find_peaks(std::span<const double> values, std::size_t k) {
  const std::size_t n = values.size();
  if (k == 0) throw DomainError("number of peaks must be positive");
  if (k > n) throw DomainError("asked for more peaks than there are grid points");
  for (double v : values)
    if (std::isnan(v)) throw DegenerateInputError("spectrum contains NaN");

  const auto positive = static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double v) { return v > 0.0; }));
  if (positive < k)
    throw DegenerateInputError("only " + std::to_string(positive) +
                               " positive entries, need " + std::to_string(k));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw DegenerateInputError("flat spectrum has no peaks");

  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || values[i] >= values[i - 1];
    const bool right_ok = i + 1 == n || values[i] >= values[i + 1];
    if (left_ok && right_ok && values[i] > 0.0) peaks.push_back(i);
  }
  if (peaks.size() >= k) return top_k(std::move(peaks), values, k);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return top_k(std::move(all), values, k);
}

}  // namespace sbldoa
