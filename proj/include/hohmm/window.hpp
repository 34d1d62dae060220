#pragma once

// Kernels over window tensors: a tensor over `width` consecutive state
// variables with k values each, flattened lexicographically with the latest
// variable varying fastest. Positions are 0-based.

#include <cstddef>
#include <span>

#include "hohmm/model.hpp"

namespace hohmm::window {

/// Sums out the variable at `position`. Same result as multiplying by the
/// Kronecker marginalization matrix I (x) ... (x) 1_k' (x) ... (x) I.
Tensor marginalize(std::span<const double> values, std::size_t k, std::size_t width,
                   std::size_t position);

/// 1_{k^count} (x) values: new leading variables the result is constant over.
Tensor prepend(std::span<const double> values, std::size_t k, std::size_t count);

/// values (x) 1_{k^count}: new trailing variables.
Tensor append(std::span<const double> values, std::size_t k, std::size_t count);

/// Replicates `values` into a tensor of width `target_width`, where source
/// variable i lands at target position positions[i] (strictly increasing).
Tensor expand_broadcast(std::span<const double> values, std::size_t k,
                        std::span<const std::size_t> positions, std::size_t target_width);

/// Number of variables of a tensor of this length; requires k >= 2.
std::size_t width_of(std::size_t length, std::size_t k);

}  // namespace hohmm::window
