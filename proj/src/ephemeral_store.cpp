#include "ilasr/ephemeral_store.hpp"

#include "ilasr/errors.hpp"

#include <json.hpp>

namespace ilasr {

std::string AuditReport::to_jsonl(int round) const {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["tick"] = tick;
  j["retained_count"] = retained_count;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : violations) arr.push_back({{"id", v.id}, {"reason", v.reason}});
  j["violations"] = arr;
  return j.dump();
}

EphemeralStore::EphemeralStore(Tick ttl_ticks) : ttl_(ttl_ticks) {
  if (ttl_ticks < 1) throw ConfigError("ttl_ticks must be >= 1");
}

void EphemeralStore::put(Utterance utterance, Tick now) {
  std::lock_guard lock(mutex_);
  const std::string id = utterance.id;
  if (items_.count(id) > 0 || purged_.count(id) > 0) {
    throw UsageError("ephemeral store already holds (or held) id '" + id + "'");
  }
  StoredUtterance stored;
  utterance.ingest_time = now;
  stored.utterance = std::move(utterance);
  stored.ingest_time = now;
  stored.deadline = now + ttl_;
  items_.emplace(id, std::move(stored));
}

std::vector<Utterance> EphemeralStore::take_for_training(const std::vector<std::string>& ids, Tick now) {
  std::lock_guard lock(mutex_);
  std::set<std::string> seen;
  for (const auto& id : ids) {
    auto it = items_.find(id);
    if (it == items_.end()) {
      throw CustodyError(purged_.count(id) > 0 ? "id '" + id + "' was purged"
                                               : "id '" + id + "' is not in the store");
    }
    if (it->second.consumed || !seen.insert(id).second) {
      throw CustodyError("id '" + id + "' was already consumed");
    }
    if (now > it->second.deadline) {
      throw CustodyError("id '" + id + "' expired at tick " + std::to_string(it->second.deadline));
    }
  }
  std::vector<Utterance> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto& stored = items_.at(id);
    stored.consumed = true;
    stored.consumed_time = now;
    out.push_back(stored.utterance);
  }
  return out;
}

std::vector<std::string> EphemeralStore::purge(Tick now) {
  std::lock_guard lock(mutex_);
  std::vector<std::string> removed;
  for (auto it = items_.begin(); it != items_.end();) {
    if (it->second.consumed || it->second.deadline < now) {
      removed.push_back(it->first);
      purged_.insert(it->first);
      it = items_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

AuditReport EphemeralStore::audit(Tick now) const {
  std::lock_guard lock(mutex_);
  AuditReport report;
  report.tick = now;
  report.retained_count = items_.size();
  for (const auto& [id, stored] : items_) {
    if (stored.consumed) report.violations.push_back({id, "consumed-retained"});
    if (stored.deadline < now) report.violations.push_back({id, "past-deadline"});
  }
  return report;
}

std::size_t EphemeralStore::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

bool EphemeralStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return items_.count(id) > 0;
}

}  // namespace ilasr
