// SPDX-License-Identifier: Apache-2.0
#include "vidpost/sched.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>

namespace vidpost::sched {

namespace {

constexpr double kBudgetSlack = 1e-12;
constexpr double kBisectTol = 1e-6;

const QuotaSample& full_quota_sample(const WorkerProfile& p) {
  return p.samples.back();
}

/// Least quota at which the profile meets target time T, or a value > 1 when
/// even q=1 is too slow.
double quota_needed(const WorkerProfile& p, double target) {
  const auto& samples = p.samples;
  if (target < full_quota_sample(p).runtime) return 2.0;  // infeasible sentinel

  const QuotaSample& lo = samples.front();
  if (target >= lo.runtime) {
    // Inverse-quota extrapolation region below the smallest sample.
    return lo.quota * lo.runtime / target;
  }
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    if (target >= b.runtime) {
      if (a.runtime == b.runtime) return a.quota;  // flat segment
      const double f = (a.runtime - target) / (a.runtime - b.runtime);
      return a.quota + f * (b.quota - a.quota);
    }
  }
  return 1.0;  // target == runtime(1) handled above; defensive
}

}  // namespace

void validate_profile(const WorkerProfile& profile) {
  if (profile.samples.empty())
    throw ConfigError("profile '" + profile.name + "': no samples");
  double prev_q = 0.0;
  double prev_r = std::numeric_limits<double>::infinity();
  for (const auto& s : profile.samples) {
    if (!(s.quota > prev_q))
      throw ConfigError("profile '" + profile.name + "': quotas must strictly increase");
    if (!(s.quota <= 1.0))
      throw ConfigError("profile '" + profile.name + "': quota > 1");
    if (!(s.runtime > 0.0))
      throw ConfigError("profile '" + profile.name + "': runtime must be > 0");
    if (s.runtime > prev_r)
      throw ConfigError("profile '" + profile.name + "': runtimes must be non-increasing");
    prev_q = s.quota;
    prev_r = s.runtime;
  }
  if (profile.samples.back().quota != 1.0)
    throw ConfigError("profile '" + profile.name + "': q=1.0 sample required");
}

double worker_runtime(const WorkerProfile& profile, double q) {
  validate_profile(profile);
  if (!(q > 0.0) || q > 1.0)
    throw ConfigError("worker_runtime: q must be in (0, 1]");

  const auto& samples = profile.samples;
  if (q < samples.front().quota) {
    const auto& lo = samples.front();
    return lo.runtime * lo.quota / q;
  }
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    if (q == a.quota) return a.runtime;
    if (q < b.quota) {
      const double f = (q - a.quota) / (b.quota - a.quota);
      return a.runtime + f * (b.runtime - a.runtime);
    }
  }
  return samples.back().runtime;
}

double group_makespan(std::span<const WorkerProfile> members,
                      std::span<const double> quotas) {
  if (members.size() != quotas.size())
    throw ConfigError("group_makespan: member/quota length mismatch");
  if (members.empty()) throw ConfigError("group_makespan: empty group");
  double budget = 0.0;
  for (double q : quotas) budget += q;
  if (budget > 1.0 + kBudgetSlack)
    throw ConstraintError("group_makespan: quota budget exceeded");
  double worst = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i)
    worst = std::max(worst, worker_runtime(members[i], quotas[i]));
  return worst;
}

double plan_makespan(const SchedulePlan& plan,
                     const std::vector<WorkerProfile>& profiles) {
  std::map<std::string, const WorkerProfile*> by_name;
  for (const auto& p : profiles) by_name[p.name] = &p;
  double total = 0.0;
  for (const auto& group : plan.groups) {
    std::vector<WorkerProfile> members;
    std::vector<double> quotas;
    for (const auto& a : group) {
      const auto it = by_name.find(a.worker);
      if (it == by_name.end())
        throw ConfigError("plan_makespan: unknown worker '" + a.worker + "'");
      members.push_back(*it->second);
      quotas.push_back(a.quota);
    }
    total += group_makespan(members, quotas);
  }
  return total;
}

double serial_makespan(const std::vector<WorkerProfile>& profiles) {
  double total = 0.0;
  for (const auto& p : profiles) {
    validate_profile(p);
    total += full_quota_sample(p).runtime;
  }
  return total;
}

void validate_plan(const SchedulePlan& plan,
                   const std::vector<WorkerProfile>& profiles) {
  std::map<std::string, int> seen;
  for (const auto& group : plan.groups) {
    double budget = 0.0;
    for (const auto& a : group) {
      if (!(a.quota > 0.0) || a.quota > 1.0)
        throw ConstraintError("plan: quota out of (0,1] for '" + a.worker + "'");
      budget += a.quota;
      seen[a.worker] += 1;
    }
    if (budget > 1.0 + kBudgetSlack)
      throw ConstraintError("plan: group quota budget exceeded");
  }
  for (const auto& p : profiles) {
    const auto it = seen.find(p.name);
    if (it == seen.end() || it->second != 1)
      throw ConstraintError("plan: worker '" + p.name + "' must appear exactly once");
  }
  if (seen.size() != profiles.size())
    throw ConstraintError("plan: unknown workers present");
}

EqualizeResult equalize_quotas(std::span<const WorkerProfile> members) {
  if (members.empty()) throw ConfigError("equalize_quotas: empty group");
  for (const auto& m : members) validate_profile(m);

  if (members.size() == 1) {
    EqualizeResult r;
    r.quotas = {1.0};
    r.makespan = full_quota_sample(members[0]).runtime;
    return r;
  }

  const auto feasible = [&](double target) {
    double total = 0.0;
    for (const auto& m : members) {
      total += quota_needed(m, target);
      if (total > 1.0) return false;
    }
    return true;
  };

  double lo = 0.0;  // fastest any member can go alone
  double hi = 0.0;  // serial sum: grouping must not be worse than serial
  for (const auto& m : members) {
    const double r1 = full_quota_sample(m).runtime;
    lo = std::max(lo, r1);
    hi += r1;
  }
  if (!feasible(hi))
    throw ConstraintError("equalize_quotas: group infeasible at any shared target");

  if (feasible(lo)) {
    hi = lo;
  } else {
    while (hi - lo > kBisectTol) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(mid))
        hi = mid;
      else
        lo = mid;
    }
  }

  EqualizeResult r;
  r.quotas.resize(members.size());
  double total = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    r.quotas[i] = quota_needed(members[i], hi);
    total += r.quotas[i];
  }
  // Surplus never hurts under non-increasing runtimes: hand it out
  // proportionally so the budget is fully used.
  for (double& q : r.quotas) q /= total;
  r.makespan = group_makespan(members, r.quotas);
  return r;
}

namespace {

struct PlanBuilder {
  // Worker indices; each group kept sorted ascending so a given partition
  // evaluates bit-identically regardless of how it was discovered.
  std::vector<std::vector<int>> groups;
  std::vector<double> group_makespans;

  double total() const {
    return std::accumulate(group_makespans.begin(), group_makespans.end(), 0.0);
  }
};

SchedulePlan finalize(PlanBuilder b, const std::vector<WorkerProfile>& workers) {
  // Canonical group order: by smallest member index (the order the
  // exhaustive enumeration produces).
  std::sort(b.groups.begin(), b.groups.end(),
            [](const auto& a, const auto& c) { return a.front() < c.front(); });
  SchedulePlan plan;
  double total = 0.0;
  for (const auto& idx : b.groups) {
    std::vector<WorkerProfile> members;
    for (int i : idx) members.push_back(workers[static_cast<std::size_t>(i)]);
    const auto eq = equalize_quotas(members);
    std::vector<Assignment> group;
    for (std::size_t i = 0; i < members.size(); ++i)
      group.push_back({members[i].name, eq.quotas[i]});
    plan.groups.push_back(std::move(group));
    total += eq.makespan;
  }
  plan.predicted_makespan = total;
  return plan;
}

}  // namespace

SchedulePlan greedy_plan(const std::vector<WorkerProfile>& workers) {
  if (workers.empty()) throw ConfigError("greedy_plan: no workers");
  for (const auto& w : workers) validate_profile(w);

  std::vector<int> order(workers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return full_quota_sample(workers[static_cast<std::size_t>(a)]).runtime >
           full_quota_sample(workers[static_cast<std::size_t>(b)]).runtime;
  });

  PlanBuilder b;
  for (int widx : order) {
    const double singleton_makespan =
        full_quota_sample(workers[static_cast<std::size_t>(widx)]).runtime;
    const double base = b.total();
    double best_total = base + singleton_makespan;  // open a fresh group
    int best_group = -1;
    double best_group_makespan = singleton_makespan;

    for (std::size_t gi = 0; gi < b.groups.size(); ++gi) {
      std::vector<int> idx = b.groups[gi];
      idx.insert(std::lower_bound(idx.begin(), idx.end(), widx), widx);
      std::vector<WorkerProfile> members;
      for (int i : idx) members.push_back(workers[static_cast<std::size_t>(i)]);
      double joined;
      try {
        joined = equalize_quotas(members).makespan;
      } catch (const ConstraintError&) {
        continue;  // this group cannot absorb the worker
      }
      const double candidate = base - b.group_makespans[gi] + joined;
      // Joining must strictly beat the fresh singleton; among existing
      // groups the earliest-created wins ties (strict < preserves it).
      if (candidate < best_total) {
        best_total = candidate;
        best_group = static_cast<int>(gi);
        best_group_makespan = joined;
      }
    }

    if (best_group < 0) {
      b.groups.push_back({widx});
      b.group_makespans.push_back(singleton_makespan);
    } else {
      auto& idx = b.groups[static_cast<std::size_t>(best_group)];
      idx.insert(std::lower_bound(idx.begin(), idx.end(), widx), widx);
      b.group_makespans[static_cast<std::size_t>(best_group)] = best_group_makespan;
    }
  }
  return finalize(std::move(b), workers);
}

SchedulePlan brute_force_plan(const std::vector<WorkerProfile>& workers) {
  if (workers.empty()) throw ConfigError("brute_force_plan: no workers");
  if (workers.size() > 6)
    throw ConfigError("brute_force_plan: limited to |W| <= 6");
  for (const auto& w : workers) validate_profile(w);

  const int n = static_cast<int>(workers.size());
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  double best_total = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> best_groups;

  // Restricted-growth enumeration of all set partitions.
  const auto evaluate = [&]() {
    const int blocks = 1 + *std::max_element(assign.begin(), assign.end());
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(blocks));
    for (int i = 0; i < n; ++i)
      groups[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])].push_back(i);
    double total = 0.0;
    for (const auto& g : groups) {
      std::vector<WorkerProfile> members;
      for (int i : g) members.push_back(workers[static_cast<std::size_t>(i)]);
      try {
        total += equalize_quotas(members).makespan;
      } catch (const ConstraintError&) {
        return;  // prune partitions containing an infeasible group
      }
      if (total >= best_total) return;
    }
    best_total = total;
    best_groups = groups;
  };

  const auto recurse = [&](auto&& self, int i, int max_used) -> void {
    if (i == n) {
      evaluate();
      return;
    }
    for (int b = 0; b <= max_used + 1; ++b) {
      assign[static_cast<std::size_t>(i)] = b;
      self(self, i + 1, std::max(max_used, b));
    }
  };
  recurse(recurse, 1, 0);  // worker 0 is always in block 0

  PlanBuilder b;
  b.groups = best_groups;
  return finalize(std::move(b), workers);
}

}  // namespace vidpost::sched
