#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "mbpi/model.hpp"

namespace mbpi {

struct CheckOptions {
  std::uint64_t seed = 20240601;
  std::size_t replicates = 10000;
  unsigned threads = 0;
};

struct CheckItem {
  std::string name;
  std::string status;  // "pass", "fail" or "skipped"
  nlohmann::json detail;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Cross-validates the analytic modules against the simulator and the
/// truncated-generator oracle. The model must use resurrection = immigration;
/// absorbing quantities are taken on its absorptive companion.
/// Output depends only on (model, options).
CheckReport run_check(const ValidatedModel& model, const CheckOptions& options);

}  // namespace mbpi
