// Small fixtures shared by the unit tests.
#pragma once

#include "coke/core.hpp"
#include "coke/rng.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace coke::testing {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t key, double lo = -1.0, double hi = 1.0) {
  CounterRng rng(key);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Vector random_vector(Index n, std::uint64_t key, double lo = -1.0, double hi = 1.0) {
  CounterRng rng(key);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

/// Labeled data with alternating arms so both are always present.
inline LabeledDataset alternating_dataset(Index n, Index p, std::uint64_t key) {
  LabeledDataset d;
  d.z = random_matrix(n, p, key);
  d.y = random_vector(n, key + 1);
  d.a.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d.a[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
  return d;
}

template <typename F>
void expect_error_kind(F&& f, ErrorKind kind) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind) << " error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace coke::testing
