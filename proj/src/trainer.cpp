#include "nto/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nto/density.hpp"
#include "nto/elasticity.hpp"
#include "nto/error.hpp"
#include "nto/random.hpp"

namespace nto {

namespace {

constexpr std::uint64_t kDisplacementInit = 0xd15b0001;
constexpr std::uint64_t kDensityInit = 0xde450001;
constexpr std::uint64_t kSimStream = 0x51a00001;
constexpr std::uint64_t kSimLoadStream = 0x51a00002;
constexpr std::uint64_t kBatchStream = 0xba7c0001;
constexpr std::uint64_t kParamStream = 0x9a7a0001;
constexpr std::uint64_t kAssignStream = 0x9a7a0002;
constexpr std::uint64_t kShuffleStream = 0x5bf10001;

struct SimBatch {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd modulus;
  LoadSamples loads;
  double weight = 0.0;
};

std::vector<int> sampling_grid(const ProblemSpec& problem, const TrainConfig& config) {
  return config.grid.empty() ? problem.grid : config.grid;
}

// One Adam step on the simulation loss.
double sim_step(TrainingState& state, const ProblemSpec& problem, const TrainConfig& config, const SimBatch& sb,
                ad::Tape& tape) {
  tape.reset();
  const BoundNetwork net = bind(tape, state.displacement);
  const SimLoss loss = sim_loss(tape, net, sb.inputs, sb.weight, sb.modulus, sb.loads, problem);
  tape.backward(loss.loss);
  adam_step(state.displacement, gradients(tape, net), state.displacement_adam, config.learning_rate);
  state.last_internal_energy = loss.internal_energy.value()(0, 0);
  state.last_work = loss.external_work.value()(0, 0);
  return loss.loss.value()(0, 0);
}

void check_divergence(double loss, double& best, int step) {
  if (!std::isfinite(loss)) throw NumericalError("simulation loss is not finite at step " + std::to_string(step));
  best = std::min(best, loss);
  if (best < 0.0 && loss > 10.0 * std::abs(best)) {
    throw NumericalError("simulation diverged at step " + std::to_string(step) + ": loss " + std::to_string(loss) +
                         " after reaching " + std::to_string(best));
  }
}

// Masked mean squared error step; returns the loss before the update.
double fit_step(TrainingState& state, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& target, const Mask& fixed,
                const TrainConfig& config, ad::Tape& tape) {
  const Eigen::Index n = inputs.cols();
  Eigen::MatrixXd w(1, n);
  Eigen::Index free = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool f = fixed.size() == n && fixed(i);
    w(0, i) = f ? 0.0 : 1.0;
    free += f ? 0 : 1;
  }
  if (free == 0) return 0.0;
  w /= static_cast<double>(free);
  tape.reset();
  const BoundNetwork net = bind(tape, state.density);
  const ad::Var rho = density(tape, net, inputs);
  const ad::Var diff = rho - tape.constant(Eigen::MatrixXd(target.transpose()));
  const ad::Var loss = tape.sum(tape.square(diff) * tape.constant(w));
  tape.backward(loss);
  adam_step(state.density, gradients(tape, net), state.density_adam, config.learning_rate);
  return loss.value()(0, 0);
}

Eigen::MatrixXd with_extra(const Eigen::MatrixXd& positions, const Vec& extra) {
  if (extra.size() == 0) return positions;
  Eigen::MatrixXd in(positions.rows() + extra.size(), positions.cols());
  in.topRows(positions.rows()) = positions;
  in.bottomRows(extra.size()) = extra.replicate(1, positions.cols());
  return in;
}

void filter_batches(std::vector<SampleBatch>& batches, const TrainConfig& config) {
  for (auto& b : batches) {
    b.filtered = config.ablation == Ablation::no_filter ? b.sensitivity
                                                        : filter_sensitivities(b.rho, b.sensitivity, b, config.filter);
  }
}

double binariness(const std::vector<SampleBatch>& batches) {
  double total = 0.0;
  Eigen::Index n = 0;
  for (const auto& b : batches) {
    total += (b.rho.array() * (1.0 - b.rho.array())).sum();
    n += b.size();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double volume_of(const std::vector<SampleBatch>& batches) {
  std::vector<Eigen::VectorXd> cols;
  for (const auto& b : batches) cols.push_back(b.rho);
  return volume_estimate(cols);
}

SimBatch single_sim_batch(TrainingState& state, const ProblemSpec& problem, const TrainConfig& config,
                          const DensityOverride& rho_override) {
  const std::uint64_t counter = state.sim_counter++;
  const auto grid = sampling_grid(problem, config);
  const SampleBatch batch = stratified_batch(problem.domain.box, grid, derive_seed(config.seed, kSimStream, counter));
  SimBatch sb;
  sb.inputs = batch.positions;
  sb.weight = batch.weight;
  sb.modulus = simp_modulus(rho_override ? rho_override(sb.inputs) : density(state.density, sb.inputs, problem.domain),
                            problem.material);
  sb.loads = load_samples(problem, derive_seed(config.seed, kSimLoadStream, counter));
  return sb;
}

// Spatial batch whose samples are spread over the given parameter values; loads are averaged over them.
SimBatch space_sim_batch(TrainingState& state, const ProblemSpec& problem, const SolutionSpace& space,
                         const TrainConfig& config, const Eigen::VectorXd& qs) {
  const std::uint64_t counter = state.sim_counter++;
  const auto grid = sampling_grid(problem, config);
  const SampleBatch batch = stratified_batch(problem.domain.box, grid, derive_seed(config.seed, kSimStream, counter));
  const Eigen::Index n = batch.size();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(config.seed, kAssignStream, counter));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  SimBatch sb;
  sb.inputs.resize(batch.dim() + 1, n);
  sb.inputs.topRows(batch.dim()) = batch.positions;
  for (Eigen::Index i = 0; i < n; ++i) {
    sb.inputs(batch.dim(), i) = space.scaled(qs(perm[static_cast<std::size_t>(i)] % qs.size()));
  }
  sb.weight = batch.weight;
  sb.modulus = simp_modulus(density(state.density, sb.inputs, problem.domain), problem.material);
  const double share = 1.0 / static_cast<double>(qs.size());
  for (Eigen::Index k = 0; k < qs.size(); ++k) {
    const ProblemSpec inst = space.instance(problem, qs(k));
    sb.loads.append(load_samples(inst, derive_seed(config.seed, kSimLoadStream, counter),
                                 Vec::Constant(1, space.scaled(qs(k))), share));
  }
  return sb;
}

std::vector<double> space_equilibrium(TrainingState& state, const ProblemSpec& problem, const SolutionSpace& space,
                                      const TrainConfig& config, int steps, const Eigen::VectorXd* fixed_qs) {
  std::vector<double> trace;
  ad::Tape tape;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXd qs =
        fixed_qs ? *fixed_qs
                 : sample_parameters(space.lo, space.hi, space.samples_per_iteration,
                                     derive_seed(config.seed, kParamStream, 0x8000000000000000ULL + state.sim_counter));
    const double loss = sim_step(state, problem, config, space_sim_batch(state, problem, space, config, qs), tape);
    check_divergence(loss, best, s);
    trace.push_back(loss);
  }
  return trace;
}

}  // namespace

std::string to_string(Ablation mode) {
  switch (mode) {
    case Ablation::none:
      return "none";
    case Ablation::no_filter:
      return "no_filter";
    case Ablation::naive_gradient:
      return "naive_gradient";
  }
  return "none";
}

Ablation ablation_from_string(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "no_filter") return Ablation::no_filter;
  if (name == "naive_gradient" || name == "naive") return Ablation::naive_gradient;
  throw ConfigError("unknown ablation mode '" + name + "' (expected none, no_filter, naive_gradient)");
}

std::string to_string(SolutionSpace::Kind kind) {
  return kind == SolutionSpace::Kind::volume ? "volume" : "load_location";
}

SolutionSpace::Kind space_kind_from_string(const std::string& name) {
  if (name == "volume") return SolutionSpace::Kind::volume;
  if (name == "load_location") return SolutionSpace::Kind::load_location;
  throw ConfigError("unknown solution space kind '" + name + "' (expected volume, load_location)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
  if (n_opt < 0 || n_sim < 1 || warm_start < 0 || n_b < 1) {
    throw ConfigError("training counts must be positive (n_opt, warm_start may be zero)");
  }
  if (hidden_dim < 0 || hidden_layers < 1) throw ConfigError("training network size must be positive");
  if (!(omega0 > 0.0)) throw ConfigError("training.omega0 must be positive");
  if (!(filter.epsilon > 0.0)) throw ConfigError("filter.epsilon must be positive");
  oc.validate();
}

void SolutionSpace::validate(const ProblemSpec& problem) const {
  if (!(hi > lo)) throw ConfigError("solution_space.range must satisfy lo < hi");
  if (samples_per_iteration < 1 || batches_per_sample < 1) throw ConfigError("solution_space sample counts must be positive");
  if (density_hidden < 1) throw ConfigError("solution_space.density_hidden must be positive");
  if (!(input_span > 0.0)) throw ConfigError("solution_space.input_span must be positive");
  if (kind == Kind::volume) {
    if (!(lo > 0.0 && hi < 1.0)) throw ConfigError("volume range must lie inside (0, 1)");
  } else {
    if (load_index >= problem.point_loads.size()) throw ConfigError("solution_space.load_index has no point load");
    if (segment_start.size() != problem.dim() || segment_end.size() != problem.dim()) {
      throw ConfigError("solution_space.segment endpoints need one coordinate per axis");
    }
    if (!problem.domain.box.contains(segment_start, 1e-9) || !problem.domain.box.contains(segment_end, 1e-9)) {
      throw ConfigError("solution_space.segment must lie inside the domain");
    }
  }
}

double SolutionSpace::clamp(double q) const { return std::clamp(q, lo, hi); }

ProblemSpec SolutionSpace::instance(const ProblemSpec& base, double q) const {
  ProblemSpec p = base;
  if (kind == Kind::volume) {
    p.volume_fraction = q;
  } else {
    const double t = (q - lo) / (hi - lo);
    p.point_loads[load_index].location = segment_start + t * (segment_end - segment_start);
  }
  return p;
}

MlpArchitecture displacement_architecture(const ProblemSpec& problem, const TrainConfig& config, int extra_inputs) {
  MlpArchitecture a;
  a.input_dim = problem.dim() + extra_inputs;
  a.output_dim = problem.dim();
  a.hidden_dim = config.hidden_dim > 0 ? config.hidden_dim : (problem.dim() == 2 ? 60 : 180);
  a.hidden_layers = config.hidden_layers;
  a.activation = config.activation;
  a.omega0 = config.omega0;
  a.residual = config.residual;
  a.validate();
  return a;
}

MlpArchitecture density_architecture(const ProblemSpec& problem, const TrainConfig& config, int extra_inputs,
                                     int hidden_override) {
  MlpArchitecture a = displacement_architecture(problem, config, extra_inputs);
  a.output_dim = 1;
  if (hidden_override > 0) a.hidden_dim = hidden_override;
  a.validate();
  return a;
}

TrainingState init_state(const ProblemSpec& problem, const TrainConfig& config, int extra_inputs,
                         double initial_volume, int density_hidden) {
  TrainingState s;
  s.displacement = init_network(displacement_architecture(problem, config, extra_inputs),
                                derive_seed(config.seed, kDisplacementInit));
  s.density = init_density_head(
      init_network(density_architecture(problem, config, extra_inputs, density_hidden), derive_seed(config.seed, kDensityInit)),
      initial_volume > 0.0 ? initial_volume : problem.volume_fraction);
  s.displacement_adam = make_adam(s.displacement);
  s.density_adam = make_adam(s.density);
  return s;
}

std::vector<double> solve_equilibrium(TrainingState& state, const ProblemSpec& problem, const TrainConfig& config,
                                      int steps, const DensityOverride& rho_override) {
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(std::max(0, steps)));
  ad::Tape tape;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < steps; ++s) {
    const double loss = sim_step(state, problem, config, single_sim_batch(state, problem, config, rho_override), tape);
    check_divergence(loss, best, s);
    trace.push_back(loss);
  }
  return trace;
}

Eigen::MatrixXd batch_inputs(const SampleBatch& batch, const Vec& extra) { return with_extra(batch.positions, extra); }

std::vector<SampleBatch> collect_density_batches(TrainingState& state, const ProblemSpec& problem,
                                                 const TrainConfig& config, int count, const Vec& extra) {
  const auto grid = sampling_grid(problem, config);
  std::vector<SampleBatch> batches;
  batches.reserve(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    SampleBatch batch =
        stratified_batch(problem.domain.box, grid, derive_seed(config.seed, kBatchStream, state.batch_counter++));
    const Eigen::MatrixXd inputs = batch_inputs(batch, extra);
    batch.rho = density(state.density, inputs, problem.domain);
    batch.constrained = hole_mask(problem.domain, batch.positions);
    const Eigen::VectorXd energy = unit_compliance_at(state.displacement, inputs, problem);
    batch.sensitivity = sensitivity(batch.rho, energy, problem.material);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      if (batch.constrained(i)) batch.sensitivity(i) = 0.0;
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

double mmse_loss(const NetworkParams& density_net, const SampleBatch& batch, const Vec& extra) {
  const Eigen::VectorXd rho = density(density_net, batch_inputs(batch, extra), DomainSpec{batch.domain, {}});
  double total = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (batch.constrained.size() == batch.size() && batch.constrained(i)) continue;
    const double d = rho(i) - batch.target(i);
    total += d * d;
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

FitStats mmse_fit(TrainingState& state, const std::vector<SampleBatch>& batches, const TrainConfig& config,
                  const std::vector<Vec>& extras) {
  FitStats stats;
  ad::Tape tape;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Vec extra = extras.empty() ? Vec() : extras[b];
    const double loss =
        fit_step(state, batch_inputs(batches[b], extra), batches[b].target, batches[b].constrained, config, tape);
    if (b == 0) stats.first_loss = loss;
    stats.mean_loss += loss;
  }
  if (!batches.empty()) stats.mean_loss /= static_cast<double>(batches.size());
  return stats;
}

TrainResult optimize(const ProblemSpec& problem, const TrainConfig& config, const ProgressFn& progress) {
  problem.validate();
  config.validate();
  if (config.ablation == Ablation::naive_gradient) return naive_baseline(problem, config, progress);
  degenerate_point_loads(problem);

  TrainingState state = init_state(problem, config);
  TrainResult result;
  result.warm_start_trace = solve_equilibrium(state, problem, config, config.warm_start);
  for (int it = 1; it <= config.n_opt; ++it) {
    HistoryRecord rec;
    rec.iteration = it;
    const auto trace = solve_equilibrium(state, problem, config, config.n_sim);
    rec.sim_loss = trace.back();
    rec.internal_energy = state.last_internal_energy;
    rec.compliance = state.last_work;

    std::vector<SampleBatch> batches = collect_density_batches(state, problem, config, config.n_b);
    filter_batches(batches, config);
    const OcResult oc = oc_update(batches, problem.volume_fraction, config.oc);
    rec.volume = volume_of(batches);
    rec.binariness = binariness(batches);
    rec.target_volume = oc.volume;
    rec.lambda = oc.lambda;
    rec.oc_feasible = oc.feasible;

    rec.mmse_before = mmse_loss(state.density, batches.front());
    mmse_fit(state, batches, config);
    rec.mmse_after = mmse_loss(state.density, batches.front());
    if (progress) progress(rec);
    result.history.push_back(rec);
  }
  result.displacement = state.displacement;
  result.density = state.density;
  return result;
}

TrainResult naive_baseline(const ProblemSpec& problem, const TrainConfig& config, const ProgressFn& progress) {
  problem.validate();
  config.validate();
  TrainingState state = init_state(problem, config);
  TrainResult result;
  result.warm_start_trace = solve_equilibrium(state, problem, config, config.warm_start);
  const auto grid = sampling_grid(problem, config);
  const Eigen::MatrixXd dense = cell_centers(problem.domain.box, grid);
  ad::Tape tape;
  for (int it = 1; it <= config.n_opt; ++it) {
    HistoryRecord rec;
    rec.iteration = it;
    const auto trace = solve_equilibrium(state, problem, config, config.n_sim);
    rec.sim_loss = trace.back();
    rec.internal_energy = state.last_internal_energy;
    rec.compliance = state.last_work;

    std::vector<SampleBatch> batches = collect_density_batches(state, problem, config, 1);
    const SampleBatch& batch = batches.front();
    rec.volume = batch.rho.mean();
    rec.binariness = binariness(batches);

    Eigen::VectorXd rho_before;
    Eigen::VectorXd s_dense;
    if (it == 1) {
      rho_before = density(state.density, dense, problem.domain);
      s_dense = sensitivity(rho_before, unit_compliance_at(state.displacement, dense, problem), problem.material);
    }

    // d/dtheta of sum_i s_i rho_i(theta), normalized, plus a quadratic volume penalty.
    const double s_scale = std::max(1e-300, batch.sensitivity.cwiseAbs().mean());
    Eigen::MatrixXd coeff = batch.sensitivity.transpose() / (s_scale * static_cast<double>(batch.size()));
    tape.reset();
    const BoundNetwork net = bind(tape, state.density);
    const ad::Var rho = density(tape, net, batch.positions);
    const ad::Var linear = tape.sum(rho * tape.constant(coeff));
    const ad::Var excess = tape.add_scalar(tape.mean(rho), -problem.volume_fraction);
    const ad::Var loss = linear + tape.scale(tape.square(excess), config.naive_volume_penalty);
    tape.backward(loss);
    adam_step(state.density, gradients(tape, net), state.density_adam, config.learning_rate);

    if (it == 1) {
      const Eigen::VectorXd delta = density(state.density, dense, problem.domain) - rho_before;
      const double denom = delta.norm() * s_dense.norm();
      rec.direction_cosine = denom > 0.0 ? -delta.dot(s_dense) / denom : 0.0;
    }
    rec.target_volume = problem.volume_fraction;
    if (progress) progress(rec);
    result.history.push_back(rec);
  }
  result.displacement = state.displacement;
  result.density = state.density;
  return result;
}

TrainResult train_solution_space(const ProblemSpec& problem, const SolutionSpace& space, const TrainConfig& config,
                                 const ProgressFn& progress) {
  problem.validate();
  config.validate();
  space.validate(problem);
  const double initial_volume =
      space.kind == SolutionSpace::Kind::volume ? 0.5 * (space.lo + space.hi) : problem.volume_fraction;
  TrainingState state = init_state(problem, config, 1, initial_volume, space.density_hidden);
  TrainResult result;
  result.warm_start_trace = space_equilibrium(state, problem, space, config, config.warm_start, nullptr);

  for (int it = 1; it <= config.n_opt; ++it) {
    HistoryRecord rec;
    rec.iteration = it;
    const Eigen::VectorXd qs = sample_parameters(space.lo, space.hi, space.samples_per_iteration,
                                                 derive_seed(config.seed, kParamStream, static_cast<std::uint64_t>(it)));
    // Per-q equilibrium, sensitivities, filtering and volume-constrained targets.
    std::vector<SampleBatch> pooled;
    std::vector<Vec> extras;
    double violation = 0.0;
    double lambda_log = 0.0;
    bool feasible = true;
    for (Eigen::Index k = 0; k < qs.size(); ++k) {
      const ProblemSpec inst = space.instance(problem, qs(k));
      const Vec extra = Vec::Constant(1, space.scaled(qs(k)));
      const Eigen::VectorXd single = Eigen::VectorXd::Constant(1, qs(k));
      const auto trace = space_equilibrium(state, problem, space, config, config.n_sim, &single);
      const double share = 1.0 / static_cast<double>(qs.size());
      rec.sim_loss += share * trace.back();
      rec.internal_energy += share * state.last_internal_energy;
      rec.compliance += share * state.last_work;
      std::vector<SampleBatch> batches = collect_density_batches(state, inst, config, space.batches_per_sample, extra);
      filter_batches(batches, config);
      const OcResult oc = oc_update(batches, inst.volume_fraction, config.oc);
      violation += std::abs(volume_of(batches) - inst.volume_fraction);
      lambda_log += std::log(std::max(oc.lambda, 1e-300));
      feasible = feasible && oc.feasible;
      for (auto& b : batches) {
        pooled.push_back(std::move(b));
        extras.push_back(extra);
      }
    }
    rec.volume = violation / static_cast<double>(qs.size());  // mean |V(q) - V_target(q)| before the update
    rec.binariness = binariness(pooled);
    rec.lambda = std::exp(lambda_log / static_cast<double>(qs.size()));
    rec.oc_feasible = feasible;
    rec.target_volume = space.kind == SolutionSpace::Kind::volume ? qs.mean() : problem.volume_fraction;

    // Shuffle the pooled (x, q, target) triples and refit in batch-sized chunks.
    const Eigen::Index n = pooled.front().size();
    const auto total = static_cast<Eigen::Index>(pooled.size()) * n;
    const int dims = pooled.front().dim() + 1;
    Eigen::MatrixXd inputs(dims, total);
    Eigen::VectorXd targets(total);
    Mask fixed(total);
    for (std::size_t b = 0; b < pooled.size(); ++b) {
      const auto off = static_cast<Eigen::Index>(b) * n;
      inputs.middleCols(off, n) = batch_inputs(pooled[b], extras[b]);
      targets.segment(off, n) = pooled[b].target;
      fixed.segment(off, n) = pooled[b].constrained;
    }
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(total));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(it)));
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    rec.mmse_before = mmse_loss(state.density, pooled.front(), extras.front());
    ad::Tape tape;
    Eigen::MatrixXd chunk_in(dims, n);
    Eigen::VectorXd chunk_t(n);
    Mask chunk_f(n);
    for (std::size_t b = 0; b < pooled.size(); ++b) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index src = perm[b * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
        chunk_in.col(j) = inputs.col(src);
        chunk_t(j) = targets(src);
        chunk_f(j) = fixed(src);
      }
      fit_step(state, chunk_in, chunk_t, chunk_f, config, tape);
    }
    rec.mmse_after = mmse_loss(state.density, pooled.front(), extras.front());
    if (progress) progress(rec);
    result.history.push_back(rec);
  }
  result.displacement = state.displacement;
  result.density = state.density;
  return result;
}

Eigen::VectorXd rasterize(const NetworkParams& density_net, const DomainSpec& domain, std::span<const int> grid,
                          const Vec& extra) {
  return density(density_net, with_extra(cell_centers(domain.box, grid), extra), domain);
}

}  // namespace nto
