// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/factorize.hpp"

#include <algorithm>
#include <optional>
#include <tuple>

namespace mpogpt {

namespace {

void extend(std::size_t n, std::size_t sites, std::vector<std::size_t>& prefix,
            std::vector<std::vector<std::size_t>>& out) {
  if (sites == 1) {
    prefix.push_back(n);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (std::size_t d = 1; d <= n; ++d) {
    if (n % d) continue;
    prefix.push_back(d);
    extend(n / d, sites - 1, prefix, out);
    prefix.pop_back();
  }
}

using Candidates = std::vector<std::vector<std::size_t>>;

Candidates filtered(std::size_t n, std::size_t sites, bool sorted_only, bool allow_unit) {
  Candidates all = enumerate_factorizations(n, sites);
  std::erase_if(all, [&](const std::vector<std::size_t>& f) {
    if (sorted_only && !std::is_sorted(f.begin(), f.end())) return true;
    if (!allow_unit && std::find(f.begin(), f.end(), std::size_t{1}) != f.end()) return true;
    return false;
  });
  return all;
}

FactorizationPlan search(const PlanRequest& req, bool sorted_only, bool allow_unit) {
  if (req.out == 0 || req.in == 0 || req.sites == 0 || req.chi == 0)
    throw InputError("plan request fields must all be >= 1");
  const Candidates outs = filtered(req.out, req.sites, sorted_only, allow_unit);
  const Candidates ins = filtered(req.in, req.sites, sorted_only, allow_unit);
  if (outs.empty() || ins.empty())
    throw InputError("no factorization of (" + std::to_string(req.out) + ", " + std::to_string(req.in) + ") into " +
                     std::to_string(req.sites) + " sites without unit dimensions");

  using Key = std::tuple<std::size_t, std::size_t, const std::vector<std::size_t>*, const std::vector<std::size_t>*>;
  std::optional<Key> best;
  auto less = [](const Key& a, const Key& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    if (*std::get<2>(a) != *std::get<2>(b)) return *std::get<2>(a) < *std::get<2>(b);
    return *std::get<3>(a) < *std::get<3>(b);
  };
  for (const auto& d_out : outs)
    for (const auto& d_in : ins) {
      const FactorizationPlan plan{d_out, d_in, req.chi};
      const std::size_t max_dim = std::max(*std::max_element(d_out.begin(), d_out.end()),
                                           *std::max_element(d_in.begin(), d_in.end()));
      Key key{param_count(plan), max_dim, &d_out, &d_in};
      if (!best || less(key, *best)) best = key;
    }
  return FactorizationPlan{*std::get<2>(*best), *std::get<3>(*best), req.chi};
}

}  // namespace

std::vector<std::vector<std::size_t>> enumerate_factorizations(std::size_t n, std::size_t sites) {
  if (n == 0 || sites == 0) throw InputError("enumerate_factorizations: n and sites must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> prefix;
  extend(n, sites, prefix, out);
  return out;
}

FactorizationPlan plan_balanced(const PlanRequest& req, bool allow_unit_dims) {
  return search(req, true, allow_unit_dims);
}

FactorizationPlan plan_min_params(const PlanRequest& req, bool allow_unit_dims) {
  return search(req, false, allow_unit_dims);
}

}  // namespace mpogpt
