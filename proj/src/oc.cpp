#include "nto/oc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nto/error.hpp"

namespace nto {

namespace {

struct Pool {
  const std::vector<Eigen::VectorXd>& rho;
  const std::vector<Eigen::VectorXd>& sens;
  const std::vector<Mask>* fixed;
  const OcParams& params;
  double count = 0.0;

  bool is_fixed(std::size_t b, Eigen::Index i) const { return fixed && (*fixed)[b](i); }

  // Fills targets for a given lambda and returns the pooled mean.
  double apply(double lambda, std::vector<Eigen::VectorXd>& out) const {
    double total = 0.0;
    const double m = params.move_limit;
    for (std::size_t b = 0; b < rho.size(); ++b) {
      const Eigen::VectorXd& r = rho[b];
      const Eigen::VectorXd& s = sens[b];
      Eigen::VectorXd& t = out[b];
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (is_fixed(b, i)) {
          t(i) = r(i);
        } else {
          const double B = std::max(0.0, -s(i) / lambda);
          const double raw = r(i) * std::pow(B, params.damping);
          t(i) = std::clamp(raw, std::max(0.0, r(i) - m), std::min(1.0, r(i) + m));
        }
        total += t(i);
      }
    }
    return total / count;
  }

  // Every free sample at its lower (upper = false) or upper move limit.
  double saturate(bool upper, std::vector<Eigen::VectorXd>& out) const {
    double total = 0.0;
    for (std::size_t b = 0; b < rho.size(); ++b) {
      for (Eigen::Index i = 0; i < rho[b].size(); ++i) {
        const double r = rho[b](i);
        if (is_fixed(b, i)) {
          out[b](i) = r;
        } else {
          out[b](i) = upper ? std::min(1.0, r + params.move_limit) : std::max(0.0, r - params.move_limit);
        }
        total += out[b](i);
      }
    }
    return total / count;
  }
};

}  // namespace

void OcParams::validate() const {
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw ConfigError("oc.move_limit must lie in (0, 1]");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("oc.damping must lie in (0, 1]");
  if (!(lambda_lo > 0.0 && lambda_hi > lambda_lo)) throw ConfigError("oc lambda bracket must satisfy 0 < lo < hi");
  if (!(volume_tolerance > 0.0)) throw ConfigError("oc.volume_tolerance must be positive");
  if (max_steps < 1) throw ConfigError("oc.max_steps must be positive");
}

double volume_estimate(const std::vector<Eigen::VectorXd>& rho) {
  double total = 0.0;
  Eigen::Index n = 0;
  for (const auto& r : rho) {
    total += r.sum();
    n += r.size();
  }
  if (n == 0) throw ContractViolation("volume estimate needs at least one sample");
  return total / static_cast<double>(n);
}

OcResult oc_targets(const std::vector<Eigen::VectorXd>& rho, const std::vector<Eigen::VectorXd>& sens,
                    double target_volume, const OcParams& params, const std::vector<Mask>* fixed) {
  params.validate();
  if (!(target_volume > 0.0 && target_volume < 1.0)) throw ConfigError("target volume must lie in (0, 1)");
  if (rho.size() != sens.size() || rho.empty()) throw ContractViolation("oc needs matching, nonempty rho and s columns");
  if (fixed && fixed->size() != rho.size()) throw ContractViolation("oc constraint masks must match the batches");

  Pool pool{rho, sens, fixed, params};
  double max_abs_s = 0.0;
  for (std::size_t b = 0; b < rho.size(); ++b) {
    if (rho[b].size() != sens[b].size()) throw ContractViolation("oc batch columns differ in length");
    if (!sens[b].allFinite()) throw NumericalError("oc received non-finite sensitivities in batch " + std::to_string(b));
    pool.count += static_cast<double>(rho[b].size());
    for (Eigen::Index i = 0; i < rho[b].size(); ++i) {
      if (!pool.is_fixed(b, i)) max_abs_s = std::max(max_abs_s, std::abs(sens[b](i)));
    }
  }
  if (pool.count == 0.0) throw ContractViolation("oc needs at least one sample");

  OcResult res;
  res.targets.reserve(rho.size());
  for (const auto& r : rho) res.targets.emplace_back(r.size());
  const double tol = params.volume_tolerance;

  if (max_abs_s == 0.0) {
    // Nothing to rank samples by: scale uniformly toward the target volume.
    res.degenerate = true;
    const double current = volume_estimate(rho);
    const double factor = current > 0.0 ? target_volume / current : 1.0;
    double total = 0.0;
    for (std::size_t b = 0; b < rho.size(); ++b) {
      for (Eigen::Index i = 0; i < rho[b].size(); ++i) {
        const double r = rho[b](i);
        double t = r;
        if (!pool.is_fixed(b, i)) {
          const double goal = current > 0.0 ? r * factor : target_volume;
          t = std::clamp(goal, std::max(0.0, r - params.move_limit), std::min(1.0, r + params.move_limit));
        }
        res.targets[b](i) = t;
        total += t;
      }
    }
    res.volume = total / pool.count;
    res.feasible = std::abs(res.volume - target_volume) <= tol;
    return res;
  }

  const double v_max = pool.saturate(true, res.targets);
  if (v_max < target_volume - tol) {
    res.volume = v_max;
    res.feasible = false;
    res.lambda = 0.0;
    return res;
  }
  const double v_min = pool.saturate(false, res.targets);
  if (v_min > target_volume + tol) {
    res.volume = v_min;
    res.feasible = false;
    res.lambda = std::numeric_limits<double>::infinity();
    return res;
  }

  double lo = params.lambda_lo;
  double hi = params.lambda_hi;
  auto straddles = [&] {
    return pool.apply(lo, res.targets) >= target_volume - tol && pool.apply(hi, res.targets) <= target_volume + tol;
  };
  if (!straddles()) {
    lo *= 1e-6;
    hi *= 1e6;
    if (!straddles()) {
      std::ostringstream msg;
      msg << "oc bracket [" << lo << ", " << hi << "] does not straddle volume " << target_volume
          << " (volume at lo " << pool.apply(lo, res.targets) << ", at hi " << pool.apply(hi, res.targets)
          << ", max |s~| " << max_abs_s << ")";
      throw NumericalError(msg.str());
    }
  }

  double log_lo = std::log(lo);
  double log_hi = std::log(hi);
  double lambda = std::exp(0.5 * (log_lo + log_hi));
  double volume = 0.0;
  int step = 0;
  for (; step < params.max_steps; ++step) {
    const double mid = 0.5 * (log_lo + log_hi);
    lambda = std::exp(mid);
    volume = pool.apply(lambda, res.targets);
    // Keep refining well past the acceptance tolerance so lambda itself is accurate.
    if (std::abs(volume - target_volume) <= 1e-3 * tol) break;
    if (volume > target_volume) {
      log_lo = mid;
    } else {
      log_hi = mid;
    }
  }
  res.lambda = lambda;
  res.volume = volume;
  res.steps = step + 1;
  res.feasible = std::abs(volume - target_volume) <= tol;
  if (!res.feasible) {
    spdlog::warn("oc bisection stopped {:.3g} away from the target volume", volume - target_volume);
  }
  return res;
}

OcResult oc_update(std::vector<SampleBatch>& batches, double target_volume, const OcParams& params) {
  std::vector<Eigen::VectorXd> rho;
  std::vector<Eigen::VectorXd> sens;
  std::vector<Mask> fixed;
  bool any_fixed = false;
  for (const auto& b : batches) {
    rho.push_back(b.rho);
    sens.push_back(b.filtered.size() == b.rho.size() ? b.filtered : b.sensitivity);
    fixed.push_back(b.constrained.size() == b.rho.size() ? b.constrained : Mask::Constant(b.rho.size(), false));
    any_fixed = any_fixed || fixed.back().any();
  }
  OcResult res = oc_targets(rho, sens, target_volume, params, any_fixed ? &fixed : nullptr);
  for (std::size_t b = 0; b < batches.size(); ++b) batches[b].target = res.targets[b];
  return res;
}

}  // namespace nto
