#pragma once

// Edit distance, corpus WER, WERR and experiment report tables.

#include "ilasr/drift_stream.hpp"
#include "ilasr/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ilasr {

/// Unit-cost Levenshtein distance.
int edit_distance(std::span<const int> hyp, std::span<const int> ref);

struct UtteranceScore {
  std::string id;
  int edits = 0;
  int ref_len = 0;
};

struct WerResult {
  long total_edits = 0;
  long total_ref_len = 0;
  double wer = 0.0;
  std::vector<UtteranceScore> per_utterance;
};

/// Micro-averaged WER: sum of edits over sum of reference lengths.
WerResult corpus_wer(const ParamSet& model, std::span<const Utterance> eval_set);
WerResult corpus_wer(std::span<const UtteranceScore> scores);

/// 100 * (base - new) / base.
double werr(double base_wer, double new_wer);

struct ReportRow {
  std::string experiment;
  std::string variant;
  std::uint64_t seed = 0;
  int month = 0;
  std::string test_set;
  double wer = 0.0;
  double werr_vs_pretrained = 0.0;  // NaN when the baseline WER is zero
  int rounds = 0;
  int accepted_rounds = 0;
};

/// experiment,variant,seed,month,test_set,wer,werr_vs_pretrained,rounds,accepted_rounds
std::string report_csv(std::span<const ReportRow> rows);
std::string report_jsonl(std::span<const ReportRow> rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ilasr
