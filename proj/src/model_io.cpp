#include "mbpi/model_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mbpi {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedInput, what); }

RateDistribution parse_distribution(const json& d, std::size_t n, DistributionKind kind, int branchType,
                                    const std::string& label) {
  if (!d.is_object()) malformed(label + " must be an object");
  if (!d.contains("entries") || !d["entries"].is_array()) malformed(label + ".entries must be an array");
  std::vector<RateEntry> entries;
  for (const auto& e : d["entries"]) {
    if (!e.is_object() || !e.contains("j") || !e.contains("rate")) malformed(label + ": entry needs \"j\" and \"rate\"");
    if (!e["j"].is_array()) malformed(label + ": \"j\" must be an array of integers");
    std::vector<int> coords;
    for (const auto& c : e["j"]) {
      if (!c.is_number_integer()) malformed(label + ": \"j\" must be an array of integers");
      coords.push_back(c.get<int>());
    }
    if (coords.size() != n) {
      throw Error(ErrorCode::DimensionMismatch,
                  label + ": index of length " + std::to_string(coords.size()) + ", expected " + std::to_string(n));
    }
    if (!e["rate"].is_number()) malformed(label + ": \"rate\" must be a number");
    const double rate = e["rate"].get<double>();
    if (rate < 0.0) {
      throw Error(ErrorCode::NegativeRate, label + ": negative rate " + std::to_string(rate));
    }
    entries.push_back({MultiIndex(std::move(coords)), rate});
  }
  RateDistribution dist = RateDistribution::conservative_from(kind, branchType, std::move(entries));
  if (d.contains("exit_rate")) {
    if (!d["exit_rate"].is_number()) malformed(label + ".exit_rate must be a number");
    const double exit = d["exit_rate"].get<double>();
    if (!(exit > 0.0)) throw Error(ErrorCode::DiagonalMismatch, label + ".exit_rate must be positive");
    dist.diagonal = -exit;
  }
  return dist;
}

json distribution_to_json(const RateDistribution& d) {
  json entries = json::array();
  for (const auto& e : d.entries) entries.push_back({{"j", e.offset.coords()}, {"rate", e.rate}});
  json out = {{"entries", entries}};
  if (!d.conservative()) out["exit_rate"] = -d.diagonal;
  return out;
}

}  // namespace

ModelSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) malformed("model document must be a JSON object");
  if (!doc.contains("n") || !doc["n"].is_number_integer()) malformed("\"n\" must be an integer");
  const long n = doc["n"].get<long>();
  if (n < 1) throw Error(ErrorCode::DimensionMismatch, "\"n\" must be at least 1");
  ModelSpec spec;
  spec.n = static_cast<std::size_t>(n);
  if (!doc.contains("immigration")) malformed("missing \"immigration\"");
  spec.immigration = parse_distribution(doc["immigration"], spec.n, DistributionKind::Immigration, -1, "immigration");

  const json res = doc.value("resurrection", json("same_as_immigration"));
  if (res.is_string()) {
    const auto s = res.get<std::string>();
    if (s == "same_as_immigration") {
      spec.resurrectionMode = ResurrectionMode::SameAsImmigration;
    } else if (s == "absorbing") {
      spec.resurrectionMode = ResurrectionMode::Absorbing;
    } else {
      malformed("unknown resurrection marker \"" + s + "\"");
    }
  } else {
    spec.resurrectionMode = ResurrectionMode::Custom;
    spec.resurrection = parse_distribution(res, spec.n, DistributionKind::Resurrection, -1, "resurrection");
  }

  if (!doc.contains("branch") || !doc["branch"].is_array()) malformed("\"branch\" must be an array");
  if (doc["branch"].size() != spec.n) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(spec.n) + " branch distributions, got " +
                                                  std::to_string(doc["branch"].size()));
  }
  for (std::size_t k = 0; k < spec.n; ++k) {
    spec.branch.push_back(parse_distribution(doc["branch"][k], spec.n, DistributionKind::Branch, static_cast<int>(k),
                                             "branch[" + std::to_string(k) + "]"));
  }
  return spec;
}

ModelSpec spec_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  return spec_from_json(doc);
}

ModelSpec spec_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) malformed("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return spec_from_json_text(ss.str());
}

json spec_to_json(const ModelSpec& spec) {
  json out;
  out["n"] = spec.n;
  out["immigration"] = distribution_to_json(spec.immigration);
  switch (spec.resurrectionMode) {
    case ResurrectionMode::SameAsImmigration: out["resurrection"] = "same_as_immigration"; break;
    case ResurrectionMode::Absorbing: out["resurrection"] = "absorbing"; break;
    case ResurrectionMode::Custom: out["resurrection"] = distribution_to_json(spec.resurrection); break;
  }
  json branch = json::array();
  for (const auto& b : spec.branch) branch.push_back(distribution_to_json(b));
  out["branch"] = branch;
  return out;
}

std::string digest_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mbpi
