#include "ilasr/config_io.hpp"

#include "ilasr/errors.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace ilasr {

namespace {

void check_keys(const Json& j, const char* what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

WorldConfig world_config_from_json(const Json& j, WorldConfig c) {
  check_keys(j, "world",
             {"vocab", "featdim", "months", "feature_std", "mean_scale", "zipf_exponent", "trending_count",
              "trending_growth", "drift_rate", "new_types", "new_type_mass", "pretrain_volume", "month_volume",
              "length_min", "length_max"});
  read(j, "vocab", c.vocab);
  read(j, "featdim", c.featdim);
  read(j, "months", c.months);
  read(j, "feature_std", c.feature_std);
  read(j, "mean_scale", c.mean_scale);
  read(j, "zipf_exponent", c.zipf_exponent);
  read(j, "trending_count", c.trending_count);
  read(j, "trending_growth", c.trending_growth);
  read(j, "drift_rate", c.drift_rate);
  if (j.contains("new_types")) {
    if (!j["new_types"].is_array()) throw ConfigError("new_types: expected an array");
    c.new_types.clear();
    for (const auto& t : j["new_types"]) {
      check_keys(t, "new_types[]", {"month", "count"});
      NewTypeIntro intro;
      read(t, "month", intro.month);
      read(t, "count", intro.count);
      c.new_types.push_back(intro);
    }
  }
  read(j, "new_type_mass", c.new_type_mass);
  read(j, "pretrain_volume", c.pretrain_volume);
  read(j, "month_volume", c.month_volume);
  read(j, "length_min", c.length_min);
  read(j, "length_max", c.length_max);
  return c;
}

Json to_json(const WorldConfig& c) {
  Json types = Json::array();
  for (const auto& t : c.new_types) types.push_back({{"month", t.month}, {"count", t.count}});
  return {{"vocab", c.vocab},
          {"featdim", c.featdim},
          {"months", c.months},
          {"feature_std", c.feature_std},
          {"mean_scale", c.mean_scale},
          {"zipf_exponent", c.zipf_exponent},
          {"trending_count", c.trending_count},
          {"trending_growth", c.trending_growth},
          {"drift_rate", c.drift_rate},
          {"new_types", types},
          {"new_type_mass", c.new_type_mass},
          {"pretrain_volume", c.pretrain_volume},
          {"month_volume", c.month_volume},
          {"length_min", c.length_min},
          {"length_max", c.length_max}};
}

EvalSizes eval_sizes_from_json(const Json& j, EvalSizes s) {
  check_keys(j, "eval_sizes", {"general", "rare", "delta", "monthly", "gate"});
  read(j, "general", s.general);
  read(j, "rare", s.rare);
  read(j, "delta", s.delta);
  read(j, "monthly", s.monthly);
  read(j, "gate", s.gate);
  return s;
}

Json to_json(const EvalSizes& s) {
  return {{"general", s.general}, {"rare", s.rare}, {"delta", s.delta}, {"monthly", s.monthly}, {"gate", s.gate}};
}

LrSchedule schedule_from_json(const Json& j, LrSchedule base) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "desk") return LrSchedule::desk_preset();
    if (name == "production") return LrSchedule::production_preset();
    throw ConfigError("unknown schedule preset '" + name + "' (expected desk or production)");
  }
  check_keys(j, "schedule",
             {"preset", "warmup_steps", "warmup_lr", "const_lr", "const_until_step", "final_lr", "final_step"});
  if (j.contains("preset")) base = schedule_from_json(j["preset"]);
  read(j, "warmup_steps", base.warmup_steps);
  read(j, "warmup_lr", base.warmup_lr);
  read(j, "const_lr", base.const_lr);
  read(j, "const_until_step", base.const_until_step);
  read(j, "final_lr", base.final_lr);
  read(j, "final_step", base.final_step);
  return base;
}

Json to_json(const LrSchedule& s) {
  return {{"warmup_steps", s.warmup_steps},         {"warmup_lr", s.warmup_lr}, {"const_lr", s.const_lr},
          {"const_until_step", s.const_until_step}, {"final_lr", s.final_lr},   {"final_step", s.final_step}};
}

WorkerConfig worker_config_from_json(const Json& j, WorkerConfig c) {
  check_keys(j, "worker",
             {"effective_batch_size", "micro_batch_size", "local_steps", "schedule", "optimizer", "accumulation"});
  read(j, "effective_batch_size", c.effective_batch_size);
  read(j, "micro_batch_size", c.micro_batch_size);
  read(j, "local_steps", c.local_steps);
  if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"], c.schedule);
  try {
    if (j.contains("optimizer")) c.optimizer = optimizer_kind_from_string(j["optimizer"].get<std::string>());
    if (j.contains("accumulation")) {
      c.accumulation = accumulation_mode_from_string(j["accumulation"].get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("worker: ") + e.what());
  }
  return c;
}

Json to_json(const WorkerConfig& c) {
  return {{"effective_batch_size", c.effective_batch_size},
          {"micro_batch_size", c.micro_batch_size},
          {"local_steps", c.local_steps},
          {"schedule", to_json(c.schedule)},
          {"optimizer", to_string(c.optimizer)},
          {"accumulation", to_string(c.accumulation)}};
}

SelectionConfig selection_config_from_json(const Json& j, SelectionConfig c) {
  check_keys(j, "selection", {"bin_edges", "target_count", "rare_token_filter"});
  read(j, "bin_edges", c.bin_edges);
  read(j, "target_count", c.target_count);
  if (j.contains("rare_token_filter") && !j["rare_token_filter"].is_null()) {
    std::set<int> filter;
    read(j, "rare_token_filter", filter);
    c.rare_token_filter = std::move(filter);
  }
  return c;
}

Json to_json(const SelectionConfig& c) {
  Json j = {{"bin_edges", c.bin_edges}, {"target_count", c.target_count}};
  j["rare_token_filter"] = c.rare_token_filter ? Json(*c.rare_token_filter) : Json(nullptr);
  return j;
}

CampaignConfig campaign_config_from_json(const Json& j, CampaignConfig c) {
  check_keys(j, "campaign",
             {"workers", "rounds_per_month", "ordering", "replay_ratio", "selection", "worker", "aggregation",
              "teacher_tier", "seed", "ttl_ticks", "initial_step", "lr_spikes", "utterances_per_month"});
  read(j, "workers", c.workers);
  read(j, "rounds_per_month", c.rounds_per_month);
  read(j, "replay_ratio", c.replay_ratio);
  if (j.contains("selection")) c.selection = selection_config_from_json(j["selection"], c.selection);
  if (j.contains("worker")) c.worker = worker_config_from_json(j["worker"], c.worker);
  read(j, "teacher_tier", c.teacher_tier);
  read(j, "seed", c.seed);
  read(j, "ttl_ticks", c.ttl_ticks);
  read(j, "initial_step", c.initial_step);
  read(j, "utterances_per_month", c.utterances_per_month);
  try {
    if (j.contains("ordering")) c.ordering = ordering_from_string(j["ordering"].get<std::string>());
    if (j.contains("aggregation")) c.aggregation = aggregation_mode_from_string(j["aggregation"].get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("campaign: ") + e.what());
  }
  if (j.contains("lr_spikes")) {
    if (!j["lr_spikes"].is_object()) throw ConfigError("lr_spikes: expected an object of round -> multiplier");
    for (const auto& [round, scale] : j["lr_spikes"].items()) {
      try {
        c.lr_spikes[std::stoi(round)] = scale.get<double>();
      } catch (const std::exception&) {
        throw ConfigError("lr_spikes: bad entry '" + round + "'");
      }
    }
  }
  return c;
}

Json to_json(const CampaignConfig& c) {
  Json spikes = Json::object();
  for (const auto& [round, scale] : c.lr_spikes) spikes[std::to_string(round)] = scale;
  return {{"workers", c.workers},
          {"rounds_per_month", c.rounds_per_month},
          {"ordering", to_string(c.ordering)},
          {"replay_ratio", c.replay_ratio},
          {"selection", to_json(c.selection)},
          {"worker", to_json(c.worker)},
          {"aggregation", to_string(c.aggregation)},
          {"teacher_tier", c.teacher_tier},
          {"seed", c.seed},
          {"ttl_ticks", c.ttl_ticks},
          {"initial_step", c.initial_step},
          {"lr_spikes", spikes},
          {"utterances_per_month", c.utterances_per_month}};
}

TierConfig tier_config_from_json(const Json& j, TierConfig base) {
  check_keys(j, "tier", {"hidden", "epochs", "batch_size", "data_fraction", "schedule"});
  read(j, "hidden", base.hidden);
  read(j, "epochs", base.epochs);
  read(j, "batch_size", base.batch_size);
  read(j, "data_fraction", base.data_fraction);
  if (j.contains("schedule")) base.schedule = schedule_from_json(j["schedule"], base.schedule);
  return base;
}

Json to_json(const TierConfig& c) {
  return {{"hidden", c.hidden},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"data_fraction", c.data_fraction},
          {"schedule", to_json(c.schedule)}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  check_keys(j, "experiment",
             {"world", "eval_sizes", "tiers", "campaign", "seeds", "replay_ratios", "batch_sizes", "freeze_month",
              "continue_schedule"});
  auto c = ExperimentConfig::defaults();
  if (j.contains("world")) c.world = world_config_from_json(j["world"], c.world);
  if (j.contains("eval_sizes")) c.eval_sizes = eval_sizes_from_json(j["eval_sizes"], c.eval_sizes);
  if (j.contains("tiers")) {
    check_keys(j["tiers"], "tiers", {"student", "T1", "T2", "T3"});
    for (const auto& [name, t] : j["tiers"].items()) c.tiers[name] = tier_config_from_json(t, c.tiers[name]);
  }
  if (j.contains("campaign")) c.campaign = campaign_config_from_json(j["campaign"], c.campaign);
  read(j, "seeds", c.seeds);
  read(j, "replay_ratios", c.replay_ratios);
  read(j, "batch_sizes", c.batch_sizes);
  read(j, "freeze_month", c.freeze_month);
  read(j, "continue_schedule", c.continue_schedule);
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json tiers = Json::object();
  for (const auto& [name, t] : c.tiers) tiers[name] = to_json(t);
  return {{"world", to_json(c.world)},
          {"eval_sizes", to_json(c.eval_sizes)},
          {"tiers", tiers},
          {"campaign", to_json(c.campaign)},
          {"seeds", c.seeds},
          {"replay_ratios", c.replay_ratios},
          {"batch_sizes", c.batch_sizes},
          {"freeze_month", c.freeze_month},
          {"continue_schedule", c.continue_schedule}};
}

Json to_json(const WorldSpec& w) {
  Json months = Json::array();
  for (const auto& m : w.months) {
    months.push_back({{"index", m.index},
                      {"token_prior", m.token_prior},
                      {"length_min", m.length_min},
                      {"length_max", m.length_max},
                      {"volume", m.volume}});
  }
  std::vector<std::vector<double>> means(static_cast<std::size_t>(w.token_feature_means.rows()));
  for (Eigen::Index r = 0; r < w.token_feature_means.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.token_feature_means.cols(); ++c) {
      means[static_cast<std::size_t>(r)].push_back(w.token_feature_means(r, c));
    }
  }
  return {{"vocab", w.vocab},
          {"featdim", w.featdim},
          {"seed", w.seed},
          {"feature_std", w.feature_std},
          {"intro_month", w.intro_month},
          {"trending", w.trending},
          {"token_feature_means", means},
          {"months", months}};
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto c = experiment_config_from_json(j);
  c.validate();
  return c;
}

}  // namespace ilasr
