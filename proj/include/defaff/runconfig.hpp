#pragma once

#include <string>

#include "defaff/collect.hpp"
#include "defaff/rollout.hpp"

namespace defaff::config {

struct RunConfig {
    task::TaskConfig task;
    data::CollectionConfig collect;
    train::TrainConfig train;
    rollout::EvalConfig eval;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = leave the OpenMP default
};

// key = value lines, '#' comments. Unknown keys are rejected.
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

// DEFAFF_SEED and DEFAFF_OUT override the file; CLI flags override both.
void apply_env_overrides(RunConfig& cfg);

// Canonical dump of the effective configuration (round-trips through the
// parser).
std::string config_echo(const RunConfig& cfg);

void apply_thread_cap(int threads);

}  // namespace defaff::config
