// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "mpogpt/mpo.hpp"

namespace mpogpt {

struct PlanRequest {
  std::size_t out = 1;
  std::size_t in = 1;
  std::size_t sites = 1;
  std::size_t chi = 1;
};

/// Every ordered L-tuple of positive integers whose product is n, in
/// lexicographic order. Tuples containing 1 are included.
std::vector<std::vector<std::size_t>> enumerate_factorizations(std::size_t n, std::size_t sites);

/// Balanced plan: among non-decreasing factorizations of out and in, the pair
/// with the smallest clipped parameter count; ties go to the smaller maximum
/// local dimension, then to the lexicographically smaller (d_out, d_in).
///
/// With allow_unit_dims = false, factors equal to 1 are excluded and an
/// infeasible request throws InputError.
FactorizationPlan plan_balanced(const PlanRequest& req, bool allow_unit_dims = true);

/// Same objective and tie-breaks over all ordered factorizations.
FactorizationPlan plan_min_params(const PlanRequest& req, bool allow_unit_dims = true);

}  // namespace mpogpt
