#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sbldoa {

// Indices (ascending) of the k largest local maxima of values. An entry is a
// local maximum when it is >= both neighbours; the end points compare against
// their single neighbour. Equal heights prefer the lower index. When fewer
// than k strictly positive local maxima exist, the k largest values are taken
// instead.
//
// Throws DegenerateInputError when values has fewer than k strictly positive
// entries or is constant.
std::vector<std::size_t> find_peaks(std::span<const double> values, std::size_t k);

}  // namespace sbldoa
