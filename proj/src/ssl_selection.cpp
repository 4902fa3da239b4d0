#include "ilasr/ssl_selection.hpp"

#include "ilasr/errors.hpp"
#include "ilasr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <iterator>

namespace ilasr {

std::string ConfidenceBin::label() const {
  return "(" + std::to_string(lo) + "," + std::to_string(hi) + "]";
}

ConfidenceBinList ConfidenceBinList::equal_quotas(std::vector<std::pair<int, int>> edges, int target) {
  if (target < 0) throw ConfigError("selection target must be >= 0");
  ConfidenceBinList list;
  const int n = static_cast<int>(edges.size());
  for (int i = 0; i < n; ++i) {
    const int quota = n == 0 ? 0 : target / n + (i < target % n ? 1 : 0);
    list.bins.push_back({edges[static_cast<std::size_t>(i)].first, edges[static_cast<std::size_t>(i)].second, quota});
  }
  list.validate();
  return list;
}

ConfidenceBinList ConfidenceBinList::default_bins(int target) {
  return equal_quotas({{600, 700}, {700, 800}, {800, 900}, {900, 1000}}, target);
}

int ConfidenceBinList::total_quota() const {
  int total = 0;
  for (const auto& b : bins) total += b.quota;
  return total;
}

void ConfidenceBinList::validate() const {
  for (const auto& b : bins) {
    if (b.lo >= b.hi || b.lo < -1 || b.hi > 1000) {
      throw ConfigError("confidence bin " + b.label() + " must satisfy -1 <= lo < hi <= 1000");
    }
    if (b.quota < 0) throw ConfigError("confidence bin " + b.label() + " has a negative quota");
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    for (std::size_t j = i + 1; j < bins.size(); ++j) {
      if (bins[i].lo < bins[j].hi && bins[j].lo < bins[i].hi) {
        throw ConfigError("confidence bins " + bins[i].label() + " and " + bins[j].label() + " overlap");
      }
    }
  }
}

std::string SelectionReport::to_json() const {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& b : bins) {
    arr.push_back({{"range", b.range}, {"eligible", b.eligible}, {"selected", b.selected}, {"shortfall", b.shortfall}});
  }
  j["bins"] = arr;
  j["selected"] = total_selected;
  j["shortfall"] = total_shortfall;
  return j.dump();
}

std::vector<Utterance> teacher_decode_pool(const ParamSet& teacher, std::vector<Utterance> pool) {
  for (auto& u : pool) {
    if (u.machine_transcript) {
      throw UsageError("utterance '" + u.id + "' already carries a machine transcript");
    }
    const Logits logits = forward(teacher, u.feats);
    u.machine_transcript = decode(logits);
    u.confidence = confidence(logits);
  }
  return pool;
}

std::vector<Utterance> calc_utterance_confidence(const ParamSet& teacher, std::vector<Utterance> pool) {
  for (auto& u : pool) {
    if (!u.machine_transcript) {
      throw UsageError("utterance '" + u.id + "' has no machine transcript to score");
    }
    u.confidence = confidence(forward(teacher, u.feats));
  }
  return pool;
}

BinnedPool bin_utterances(const std::vector<Utterance>& pool, const ConfidenceBinList& bins) {
  bins.validate();
  BinnedPool out;
  out.bins = bins;
  out.members.resize(bins.bins.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& conf = pool[i].confidence;
    if (!conf) throw UsageError("utterance '" + pool[i].id + "' has no confidence");
    bool placed = false;
    for (std::size_t b = 0; b < bins.bins.size() && !placed; ++b) {
      if (bins.bins[b].contains(*conf)) {
        out.members[b].push_back(i);
        placed = true;
      }
    }
    if (!placed) ++out.dropped;
  }
  return out;
}

Selection select_utterances(const std::vector<Utterance>& pool, const BinnedPool& binned,
                            const SelectionCriteria& criteria) {
  Selection out;
  std::vector<std::size_t> chosen;
  for (std::size_t b = 0; b < binned.bins.bins.size(); ++b) {
    const auto& bin = binned.bins.bins[b];
    std::vector<std::size_t> eligible;
    for (auto idx : binned.members[b]) {
      if (criteria.rare_token_filter) {
        const auto& hyp = pool.at(idx).machine_transcript;
        const bool has = hyp && std::any_of(hyp->begin(), hyp->end(), [&](int t) {
                           return criteria.rare_token_filter->count(t) > 0;
                         });
        if (!has) continue;
      }
      eligible.push_back(idx);
    }
    const auto quota = static_cast<std::size_t>(bin.quota);
    const auto before = chosen.size();
    auto rng = make_rng(criteria.seed, {0x5e1, b});
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(chosen), quota, rng);

    BinReport report;
    report.range = bin.label();
    report.eligible = eligible.size();
    report.selected = chosen.size() - before;
    report.shortfall = quota - report.selected;
    out.report.total_selected += report.selected;
    out.report.total_shortfall += report.shortfall;
    out.report.bins.push_back(report);
  }
  // Keep arrival order so chronological campaigns stay chronological.
  std::sort(chosen.begin(), chosen.end());
  out.dataset.reserve(chosen.size());
  for (auto idx : chosen) out.dataset.push_back(pool[idx]);
  return out;
}

}  // namespace ilasr
