/**
 * Copyright 2026 The Plasmodium Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace plasmodium::testing {

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string counterexample;  // first failure

  bool passed() const noexcept { return failures == 0 && cases > 0; }
};

inline constexpr int kPropertyCases = 1000;

PropertyResult confusion_report_invariants(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult mcc_bounds_and_relabel_symmetry(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult auc_matches_pairwise_concordance(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult auc_monotone_invariance(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult split_partition(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult split_determinism(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult split_balance(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult flip_involution(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult augment_identity(std::uint64_t seed, int cases = kPropertyCases);
PropertyResult augment_range_and_shape(std::uint64_t seed, int cases = kPropertyCases);

/// Every suite above, in order.
std::vector<PropertyResult> run_all_properties(std::uint64_t seed, int cases = kPropertyCases);

}  // namespace plasmodium::testing
