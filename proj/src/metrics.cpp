#include "ilasr/metrics.hpp"

#include "ilasr/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ilasr {

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int edit_distance(std::span<const int> hyp, std::span<const int> ref) {
  // Single-row DP over the reference.
  std::vector<int> row(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const int up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (hyp[i - 1] == ref[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[ref.size()];
}

WerResult corpus_wer(std::span<const UtteranceScore> scores) {
  if (scores.empty()) throw UsageError("corpus_wer on an empty eval set");
  WerResult r;
  r.per_utterance.assign(scores.begin(), scores.end());
  for (const auto& s : scores) {
    r.total_edits += s.edits;
    r.total_ref_len += s.ref_len;
  }
  if (r.total_ref_len <= 0) throw UsageError("corpus_wer: eval set has zero reference length");
  r.wer = static_cast<double>(r.total_edits) / static_cast<double>(r.total_ref_len);
  return r;
}

WerResult corpus_wer(const ParamSet& model, std::span<const Utterance> eval_set) {
  if (eval_set.empty()) throw UsageError("corpus_wer on an empty eval set");
  std::vector<UtteranceScore> scores;
  scores.reserve(eval_set.size());
  for (const auto& u : eval_set) {
    const TokenSeq hyp = decode(forward(model, u.feats));
    scores.push_back({u.id, edit_distance(hyp, u.truth), static_cast<int>(u.truth.size())});
  }
  return corpus_wer(scores);
}

double werr(double base_wer, double new_wer) {
  if (base_wer == 0.0) throw UndefinedError("WERR is undefined for a zero baseline WER");
  return 100.0 * (base_wer - new_wer) / base_wer;
}

std::string report_csv(std::span<const ReportRow> rows) {
  std::string out = "experiment,variant,seed,month,test_set,wer,werr_vs_pretrained,rounds,accepted_rounds\n";
  for (const auto& r : rows) {
    out += r.experiment + "," + r.variant + "," + std::to_string(r.seed) + "," + std::to_string(r.month) + "," +
           r.test_set + "," + fixed(r.wer, 6) + "," + fixed(r.werr_vs_pretrained, 4) + "," +
           std::to_string(r.rounds) + "," + std::to_string(r.accepted_rounds) + "\n";
  }
  return out;
}

std::string report_jsonl(std::span<const ReportRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["experiment"] = r.experiment;
    j["variant"] = r.variant;
    j["seed"] = r.seed;
    j["month"] = r.month;
    j["test_set"] = r.test_set;
    j["wer"] = r.wer;
    if (std::isnan(r.werr_vs_pretrained)) {
      j["werr_vs_pretrained"] = nullptr;
    } else {
      j["werr_vs_pretrained"] = r.werr_vs_pretrained;
    }
    j["rounds"] = r.rounds;
    j["accepted_rounds"] = r.accepted_rounds;
    out += j.dump() + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw FileError("failed writing '" + path.string() + "'");
}

}  // namespace ilasr
