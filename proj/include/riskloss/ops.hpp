#pragma once

// Differentiable operations on Tape values. Every op checks shapes, records
// its output on the inputs' tape and rejects non-finite results.

#include <cstddef>
#include <span>
#include <vector>

#include "riskloss/tape.hpp"

namespace riskloss::ad {

inline constexpr double kLayerNormEpsilon = 1e-5;

// Elementwise with broadcasting: the shorter shape must be a suffix of the
// longer one (e.g. [B,W,D] + [D], [B,W,D] * [W,D]).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

// [..., m, k] x [k, n] or [..., m, k] x [..., k, n] with identical batch dims.
Var matmul(Var a, Var b);
// Swaps the last two axes.
Var transpose(Var a);

// Subgradient at 0 is 0.
Var relu(Var a);
// Over the last axis, max-subtracted.
Var softmax(Var a);
// Over the last axis; gain and bias have shape [last dim].
Var layer_norm(Var x, Var gain, Var bias, double epsilon = kLayerNormEpsilon);

// Full reductions to a scalar.
Var sum(Var a);
Var mean(Var a);

Var scale(Var a, double factor);
Var power2(Var a);

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length);
Var concat(std::span<const Var> parts, std::size_t axis);
Var reshape(Var a, Shape shape);

// Scalar node whose value and gradient w.r.t. `input` are supplied by the
// caller (bridges closed-form objectives onto the tape).
Var scalar_objective(Var input, double value, std::vector<double> gradient);

}  // namespace riskloss::ad
