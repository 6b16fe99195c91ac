#pragma once

#include "date/discovery.hpp"
#include "date/generation.hpp"
#include "date/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace date {

// Run directory layout:
//   config.json  examples.json  models/<id>.json  transcripts/  arms.json
//   mds_trace.json  report.json  augmented.csv  stats.json

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void save_config(const std::filesystem::path& dir, const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& dir);

/// examples.json, models/ and stats.json.
void save_discovery(const std::filesystem::path& dir, const DiscoveryResult& d);
/// Example rows are looked up by id in `train`.
DiscoveryResult load_discovery(const std::filesystem::path& dir, const Table& train);

void save_arms(const std::filesystem::path& dir, const std::vector<ArmCandidate>& arms, const GenerationStats& stats);
std::vector<ArmCandidate> load_arms(const std::filesystem::path& dir, const SchemaPtr& schema);

void save_selection(const std::filesystem::path& dir, const Selection& s);
Selection load_selection(const std::filesystem::path& dir);

void save_report(const std::filesystem::path& dir, const RunReport& r);

}  // namespace date
