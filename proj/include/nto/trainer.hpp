#pragma once

// Alternating equilibrium solves and density fits, the solution-space variant, and the
// direct-gradient baseline.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nto/adam.hpp"
#include "nto/filter.hpp"
#include "nto/networks.hpp"
#include "nto/oc.hpp"
#include "nto/problem.hpp"
#include "nto/sampling.hpp"

namespace nto {

enum class Ablation { none, no_filter, naive_gradient };

std::string to_string(Ablation mode);
Ablation ablation_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 3e-4;
  int n_opt = 200;
  int n_sim = 20;
  int warm_start = 1000;
  int n_b = 50;
  /// Sampling grid; empty uses the problem's grid.
  std::vector<int> grid;
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::none;
  Activation activation = Activation::siren;
  /// Hidden width; 0 picks 60 in 2D and 180 in 3D.
  int hidden_dim = 0;
  int hidden_layers = 4;
  double omega0 = 60.0;
  bool residual = true;
  FilterSpec filter;
  OcParams oc;
  /// Weight of (V - V_target)^2 in the direct-gradient baseline.
  double naive_volume_penalty = 1000.0;

  void validate() const;
};

/// Parameter sweep learned by a single pair of networks.
struct SolutionSpace {
  enum class Kind { volume, load_location };
  Kind kind = Kind::volume;
  double lo = 0.3;
  double hi = 0.7;
  int samples_per_iteration = 25;
  int batches_per_sample = 2;
  int density_hidden = 256;
  /// Half-width of the network input range for q. Small values keep both fields smooth in q.
  double input_span = 0.25;
  /// load_location: point load `load_index` moves from segment_start (q = lo) to segment_end (q = hi).
  std::size_t load_index = 0;
  Vec segment_start;
  Vec segment_end;

  void validate(const ProblemSpec& problem) const;
  /// q mapped to [-input_span, input_span] for use as a network input.
  [[nodiscard]] double scaled(double q) const { return input_span * (2.0 * (q - lo) / (hi - lo) - 1.0); }
  /// Clamps q into [lo, hi].
  [[nodiscard]] double clamp(double q) const;
  /// The single problem the space represents at q.
  [[nodiscard]] ProblemSpec instance(const ProblemSpec& base, double q) const;
};

std::string to_string(SolutionSpace::Kind kind);
SolutionSpace::Kind space_kind_from_string(const std::string& name);

struct HistoryRecord {
  int iteration = 0;
  double sim_loss = 0.0;
  double internal_energy = 0.0;
  double compliance = 0.0;  // external work at the current equilibrium estimate
  double volume = 0.0;      // Monte Carlo volume of the collected densities
  double target_volume = 0.0;
  double lambda = 0.0;
  bool oc_feasible = true;
  double mmse_before = 0.0;
  double mmse_after = 0.0;
  double binariness = 0.0;
  /// Direct-gradient baseline only: cosine between the realized density change and -s.
  std::optional<double> direction_cosine;
};

struct TrainResult {
  NetworkParams displacement;
  NetworkParams density;
  std::vector<HistoryRecord> history;
  std::vector<double> warm_start_trace;
};

/// Networks and optimizer state carried through training.
struct TrainingState {
  NetworkParams displacement;
  NetworkParams density;
  AdamState displacement_adam;
  AdamState density_adam;
  std::uint64_t sim_counter = 0;
  std::uint64_t batch_counter = 0;
  /// Components of the most recent simulation loss.
  double last_internal_energy = 0.0;
  double last_work = 0.0;
};

using ProgressFn = std::function<void(const HistoryRecord&)>;

MlpArchitecture displacement_architecture(const ProblemSpec& problem, const TrainConfig& config, int extra_inputs);
MlpArchitecture density_architecture(const ProblemSpec& problem, const TrainConfig& config, int extra_inputs,
                                     int hidden_override = 0);
TrainingState init_state(const ProblemSpec& problem, const TrainConfig& config, int extra_inputs = 0,
                         double initial_volume = -1.0, int density_hidden = 0);

/// Replaces the density network during a solve (e.g. a uniform design); maps inputs to rho.
using DensityOverride = std::function<Eigen::VectorXd(const Eigen::MatrixXd& inputs)>;

/// `steps` Adam steps on the simulation loss with fresh batches; density is frozen.
/// Returns the loss trace. Throws NumericalError if the loss blows up.
std::vector<double> solve_equilibrium(TrainingState& state, const ProblemSpec& problem, const TrainConfig& config,
                                      int steps, const DensityOverride& rho_override = {});

/// Fresh batches carrying rho, s and the hole mask.
std::vector<SampleBatch> collect_density_batches(TrainingState& state, const ProblemSpec& problem,
                                                 const TrainConfig& config, int count, const Vec& extra = Vec());

/// Network inputs for a batch: positions with constant `extra` rows appended.
Eigen::MatrixXd batch_inputs(const SampleBatch& batch, const Vec& extra);

struct FitStats {
  double first_loss = 0.0;
  double mean_loss = 0.0;
};

/// One Adam step per batch on the masked mean squared error to the batch targets, in order.
FitStats mmse_fit(TrainingState& state, const std::vector<SampleBatch>& batches, const TrainConfig& config,
                  const std::vector<Vec>& extras = {});

/// Mean squared error of the current density against one batch's targets (hole samples excluded).
double mmse_loss(const NetworkParams& density, const SampleBatch& batch, const Vec& extra = Vec());

TrainResult optimize(const ProblemSpec& problem, const TrainConfig& config, const ProgressFn& progress = {});
TrainResult naive_baseline(const ProblemSpec& problem, const TrainConfig& config, const ProgressFn& progress = {});
TrainResult train_solution_space(const ProblemSpec& problem, const SolutionSpace& space, const TrainConfig& config,
                                 const ProgressFn& progress = {});

/// Cell-center densities of a trained field (holes applied); `extra` rows are appended to inputs.
Eigen::VectorXd rasterize(const NetworkParams& density, const DomainSpec& domain, std::span<const int> grid,
                          const Vec& extra = Vec());

}  // namespace nto
