// SPDX-License-Identifier: Apache-2.0
//
// Reward-stage scheduling math: per-worker quota scaling profiles, group
// makespan under a shared compute budget, quota equalization by bisection,
// greedy grouping, and an exhaustive partition oracle.
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vidpost/errors.hpp"

namespace vidpost::sched {

struct QuotaSample {
  double quota = 1.0;    // fraction of device compute, in (0, 1]
  double runtime = 1.0;  // measured seconds at that quota
};

/// Measured scaling profile of one reward worker. Quotas strictly increase,
/// runtimes are positive and non-increasing in quota, and q=1.0 is present.
struct WorkerProfile {
  std::string name;
  std::vector<QuotaSample> samples;
};

void validate_profile(const WorkerProfile& profile);

/// Runtime at quota q: piecewise-linear between samples; below the smallest
/// sampled quota, inverse-quota extrapolation runtime(q_min) * q_min / q.
double worker_runtime(const WorkerProfile& profile, double q);

struct Assignment {
  std::string worker;
  double quota = 1.0;
};

/// Concurrent groups executed sequentially; each worker appears exactly once
/// and every group's quotas sum to at most 1.
struct SchedulePlan {
  std::vector<std::vector<Assignment>> groups;
  double predicted_makespan = 0.0;
};

void validate_plan(const SchedulePlan& plan,
                   const std::vector<WorkerProfile>& profiles);

/// Slowest member under its assigned quota. Throws ConstraintError when the
/// group quota budget (sum <= 1) is violated.
double group_makespan(std::span<const WorkerProfile> members,
                      std::span<const double> quotas);

/// Sum of group makespans, resolving worker names against `profiles`.
double plan_makespan(const SchedulePlan& plan,
                     const std::vector<WorkerProfile>& profiles);

/// Sum of q=1 runtimes: the serial reward-stage baseline.
double serial_makespan(const std::vector<WorkerProfile>& profiles);

struct EqualizeResult {
  std::vector<double> quotas;  // scaled so they sum to 1
  double makespan = 0.0;
};

/// Bisection on the target time T: each member takes the least quota whose
/// runtime meets T; feasible when the quotas fit the budget. Throws
/// ConstraintError when no T at or below the serial sum fits.
EqualizeResult equalize_quotas(std::span<const WorkerProfile> members);

/// LPT-ordered greedy: each worker joins the existing group that minimizes
/// the total plan makespan, or opens a singleton when no join strictly
/// improves on it. Ties among existing groups go to the earliest-created.
SchedulePlan greedy_plan(const std::vector<WorkerProfile>& workers);

/// Exhaustive set-partition oracle; |W| <= 6.
SchedulePlan brute_force_plan(const std::vector<WorkerProfile>& workers);

}  // namespace vidpost::sched
