#pragma once

// A small world and model set that keeps unit tests fast.

#include "ilasr/experiments.hpp"

namespace tiny {

inline ilasr::ExperimentConfig config(int months = 2) {
  auto c = ilasr::ExperimentConfig::defaults();
  c.world.months = months;
  c.world.new_types = months > 0 ? std::vector<ilasr::NewTypeIntro>{{1, 1}} : std::vector<ilasr::NewTypeIntro>{};
  c.world.pretrain_volume = 1500;
  c.world.month_volume = 240;
  c.eval_sizes = {60, 60, 60, 60, 60};
  c.tiers["T1"].hidden = 32;
  c.tiers["T1"].epochs = 6;
  c.campaign.workers = 2;
  c.campaign.rounds_per_month = 2;
  c.campaign.selection.target_count = 40;
  c.campaign.worker.effective_batch_size = 8;
  c.seeds = {1};
  c.replay_ratios = {0.0, 0.25};
  c.batch_sizes = {8, 16};
  c.freeze_month = 1;
  return c;
}

}  // namespace tiny
