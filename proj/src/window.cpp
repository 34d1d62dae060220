#include "hohmm/window.hpp"

#include <string>

#include "hohmm/error.hpp"

namespace hohmm::window {

namespace {

void require_length(std::size_t length, std::size_t k, std::size_t width) {
  if (k == 0) throw Error("recursion", "k must be positive");
  if (length != ipow(k, width)) {
    throw Error("recursion", "tensor of length " + std::to_string(length) +
                                 " is not k^" + std::to_string(width) + " with k = " +
                                 std::to_string(k));
  }
}

}  // namespace

Tensor marginalize(std::span<const double> values, std::size_t k, std::size_t width,
                   std::size_t position) {
  require_length(values.size(), k, width);
  if (position >= width) throw Error("recursion", "marginalized position out of range");
  const std::size_t outer = ipow(k, position);
  const std::size_t inner = ipow(k, width - position - 1);
  Tensor out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t v = 0; v < k; ++v) {
      const double* src = values.data() + (o * k + v) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return out;
}

Tensor prepend(std::span<const double> values, std::size_t k, std::size_t count) {
  const std::size_t reps = ipow(k, count);
  Tensor out;
  out.reserve(reps * values.size());
  for (std::size_t r = 0; r < reps; ++r) out.insert(out.end(), values.begin(), values.end());
  return out;
}

Tensor append(std::span<const double> values, std::size_t k, std::size_t count) {
  const std::size_t reps = ipow(k, count);
  Tensor out;
  out.reserve(reps * values.size());
  for (double v : values) out.insert(out.end(), reps, v);
  return out;
}

Tensor expand_broadcast(std::span<const double> values, std::size_t k,
                        std::span<const std::size_t> positions, std::size_t target_width) {
  require_length(values.size(), k, positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= target_width || (i > 0 && positions[i] <= positions[i - 1])) {
      throw Error("recursion", "incompatible windows in expand_broadcast");
    }
  }
  // Stride of each source variable inside the source tensor, indexed by
  // target position (0 for inserted variables).
  std::vector<std::size_t> stride(target_width, 0);
  std::size_t s = 1;
  for (std::size_t i = positions.size(); i-- > 0;) {
    stride[positions[i]] = s;
    s *= k;
  }
  const std::size_t n = ipow(k, target_width);
  Tensor out(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rest = idx;
    std::size_t src = 0;
    for (std::size_t p = target_width; p-- > 0;) {
      src += (rest % k) * stride[p];
      rest /= k;
    }
    out[idx] = values[src];
  }
  return out;
}

std::size_t width_of(std::size_t length, std::size_t k) {
  if (k < 2) throw Error("recursion", "width_of needs k >= 2");
  std::size_t width = 0;
  std::size_t n = 1;
  while (n < length) {
    n *= k;
    ++width;
  }
  if (n != length) {
    throw Error("recursion", "tensor length " + std::to_string(length) +
                                 " is not a power of k = " + std::to_string(k));
  }
  return width;
}

}  // namespace hohmm::window
