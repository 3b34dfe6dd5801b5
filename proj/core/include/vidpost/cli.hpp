// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace vidpost::cli {

/// Experiment runner entry point. Subcommands: grpo-run, dpo-run, sched-plan,
/// sim-pipeline, gsb, selftest. Returns 0 on success, 1 on module errors,
/// 2 on usage errors.
int run(const std::vector<std::string>& args);

}  // namespace vidpost::cli
