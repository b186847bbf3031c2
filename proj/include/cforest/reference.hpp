#pragma once

// Serial, loop-literal versions of the scoring kernels. They exist to check the
// parallel kernels and must agree with them bit for bit.

#include <span>

#include "cforest/kernels.hpp"

namespace cforest::reference {

SetMatrix split_sets(const Matrix& probs, double tau, const RapsParams& params, std::span<const double> u);

GiqsTensor cross_giqs(const Tensor3& oob_probs, const RapsParams& params, std::span<const double> u);

Matrix pvalues(std::span<const double> calib_scores, const GiqsTensor& giqs);

}  // namespace cforest::reference
