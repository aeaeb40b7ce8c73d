// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "triaug/diffcore/graph.hpp"

namespace triaug::diff {

// Primitive differentiable operations. Row-wise ops treat a rank-1 tensor as a
// single row and preserve the input rank. All ops throw ShapeError with both
// operand shapes on mismatch.

Var matmul(Var a, Var b);     // [m x k] * [k x n]
Var transpose(Var a);         // rank 2 only
Var add(Var a, Var b);        // identical shapes
Var sub(Var a, Var b);
Var add_row(Var a, Var row);  // a [n x c] (or [c]) plus row [c] broadcast over rows
Var scale(Var a, double factor);
Var relu(Var a);
Var concat(Var a, Var b);     // along the last axis, equal row counts

/// Row-wise sum of the entries whose mask bit is set: [n x c] -> [n x 1].
Var masked_sum(Var v, std::span<const std::uint8_t> mask);
/// Row-wise log(sum(exp(v_c))) over the masked entries: [n x c] -> [n x 1].
Var masked_logsumexp(Var v, std::span<const std::uint8_t> mask);

/// Row-wise v / ||v||. With `norm_floor` == 0 a zero row is a
/// DegenerateInputError; otherwise the norm is clamped below at `norm_floor`.
Var l2_normalize(Var v, double norm_floor = 0.0);
Var log_softmax(Var v);

/// Picks v[r, index[r]] for every row: [n x c] -> [n].
Var pick(Var v, std::span<const std::size_t> index);
Var sum(Var v);   // -> scalar
Var mean(Var v);  // -> scalar

}  // namespace triaug::diff
