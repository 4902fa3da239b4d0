#pragma once

// JSON (de)serialization of the configuration structs. Readers start from
// `base`, override the keys present and reject unknown keys.

#include "ilasr/drift_stream.hpp"
#include "ilasr/experiments.hpp"
#include "ilasr/orchestrator.hpp"

#include <filesystem>
#include <string>

#include <json.hpp>

namespace ilasr {

using Json = nlohmann::json;

WorldConfig world_config_from_json(const Json& j, WorldConfig base = {});
Json to_json(const WorldConfig& c);
EvalSizes eval_sizes_from_json(const Json& j, EvalSizes base = {});
Json to_json(const EvalSizes& s);
LrSchedule schedule_from_json(const Json& j, LrSchedule base = LrSchedule::desk_preset());
Json to_json(const LrSchedule& s);
WorkerConfig worker_config_from_json(const Json& j, WorkerConfig base = {});
Json to_json(const WorkerConfig& c);
SelectionConfig selection_config_from_json(const Json& j, SelectionConfig base = {});
Json to_json(const SelectionConfig& c);
CampaignConfig campaign_config_from_json(const Json& j, CampaignConfig base = {});
Json to_json(const CampaignConfig& c);
TierConfig tier_config_from_json(const Json& j, TierConfig base = {});
Json to_json(const TierConfig& c);
/// Starts from ExperimentConfig::defaults(); `tiers` entries override per tier.
ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentConfig& c);
Json to_json(const WorldSpec& w);

/// Reads and validates an experiment config; ConfigError on any problem, FileError if unreadable.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace ilasr
