#pragma once

// Custody layer for streaming utterances. Items live until their first
// training pass or their TTL deadline, whichever comes first; purge removes
// them and audit lists anything that should already be gone.

#include "ilasr/drift_stream.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ilasr {

using Tick = std::int64_t;

struct StoredUtterance {
  Utterance utterance;
  Tick ingest_time = 0;
  Tick deadline = 0;
  bool consumed = false;
  std::optional<Tick> consumed_time;
};

struct AuditViolation {
  std::string id;
  std::string reason;  // "past-deadline" or "consumed-retained"

  bool operator==(const AuditViolation&) const = default;
};

struct AuditReport {
  Tick tick = 0;
  std::size_t retained_count = 0;
  std::vector<AuditViolation> violations;

  bool passed() const { return violations.empty(); }
  /// {"round":r,"tick":t,"retained_count":n,"violations":[{"id","reason"}...]}
  std::string to_jsonl(int round) const;
};

class EphemeralStore {
 public:
  explicit EphemeralStore(Tick ttl_ticks = 10);

  void put(Utterance utterance, Tick now);
  /// Marks every id consumed and hands back copies. All-or-nothing.
  std::vector<Utterance> take_for_training(const std::vector<std::string>& ids, Tick now);
  /// Removes consumed items and items whose deadline is before `now`.
  std::vector<std::string> purge(Tick now);
  AuditReport audit(Tick now) const;

  std::size_t size() const;
  bool contains(const std::string& id) const;
  Tick ttl() const { return ttl_; }

 private:
  Tick ttl_;
  mutable std::mutex mutex_;
  std::map<std::string, StoredUtterance> items_;
  std::set<std::string> purged_;
};

}  // namespace ilasr
