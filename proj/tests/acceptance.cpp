// Acceptance suite: one PASS/FAIL line per primary criterion.
// Usage: nto_acceptance <path-to-nto> [--only 1,2,...] [--work DIR]

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "nto/canonical.hpp"
#include "nto/density.hpp"
#include "nto/elasticity.hpp"
#include "nto/explorer.hpp"
#include "nto/fem.hpp"
#include "nto/filter.hpp"
#include "nto/io.hpp"
#include "nto/oc.hpp"
#include "nto/random.hpp"
#include "nto/trainer.hpp"

namespace fs = std::filesystem;
using namespace nto;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;

void log_line(const std::string& text) {
  std::fprintf(stderr, "  %s\n", text.c_str());
  std::fflush(stderr);
}

// ---------------------------------------------------------------- 1

Outcome gradient_check() {
  const auto t0 = Clock::now();
  ProblemSpec problem = canonical_problem("ShortBeam");
  TrainConfig cfg;
  cfg.hidden_dim = 16;
  cfg.hidden_layers = 2;
  const TrainingState st = init_state(problem, cfg);
  const std::vector<int> grid{20, 10};
  const SampleBatch batch = stratified_batch(problem.domain.box, grid, 5);
  const LoadSamples loads = load_samples(problem, 1);
  Rng rng(17);
  Eigen::VectorXd rho(batch.size()), target(batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    rho(i) = rng.uniform(0.05, 1.0);
    target(i) = rng.uniform(0.0, 1.0);
  }
  const Eigen::VectorXd modulus = simp_modulus(rho, problem.material);

  NetworkParams u_net = st.displacement;
  const ad::FlatLossFn sim = [&](std::span<const double> p, std::vector<double>* grad) {
    u_net.unflatten(p);
    ad::Tape tape;
    const BoundNetwork net = bind(tape, u_net);
    const SimLoss l = sim_loss(tape, net, batch.positions, batch.weight, modulus, loads, problem);
    if (grad) {
      tape.backward(l.loss);
      grad->clear();
      for (const auto& layer : gradients(tape, net)) {
        grad->insert(grad->end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        grad->insert(grad->end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
      }
    }
    return l.loss.value()(0, 0);
  };
  // Plain SIREN weights for both networks.
  NetworkParams rho_net = init_siren(st.density.arch, 99);
  const ad::FlatLossFn topo = [&](std::span<const double> p, std::vector<double>* grad) {
    rho_net.unflatten(p);
    ad::Tape tape;
    const BoundNetwork net = bind(tape, rho_net);
    ad::Var r = density(tape, net, batch.positions);
    ad::Var diff = r - tape.constant(Eigen::MatrixXd(target.transpose()));
    ad::Var loss = tape.mean(tape.square(diff));
    if (grad) {
      tape.backward(loss);
      grad->clear();
      for (const auto& layer : gradients(tape, net)) {
        grad->insert(grad->end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        grad->insert(grad->end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
      }
    }
    return loss.value()(0, 0);
  };
  const auto sim_params = st.displacement.flatten();
  const auto topo_params = rho_net.flatten();
  const ad::GradCheckResult a = ad::grad_check(sim, sim_params, 1e-5);
  const ad::GradCheckResult b = ad::grad_check(topo, topo_params, 1e-5);
  const double t = seconds_since(t0);
  const double worst = std::max(a.max_relative_error, b.max_relative_error);
  Outcome o;
  o.pass = a.finite && b.finite && worst < 1e-4 && t < 10.0;
  o.detail = fmt::format("sim max rel err {:.2e} ({} params), topo max rel err {:.2e} ({} params), {:.1f} s",
                         a.max_relative_error, sim_params.size(), b.max_relative_error, topo_params.size(), t);
  return o;
}

// ---------------------------------------------------------------- 2

Outcome forward_solve() {
  const auto t0 = Clock::now();
  const ProblemSpec p = canonical_problem("Cantilever");
  TrainConfig cfg;
  cfg.seed = 1;
  TrainingState st = init_state(p, cfg);
  const int steps = 3000;
  solve_equilibrium(st, p, cfg, steps, [](const Eigen::MatrixXd& in) { return Eigen::VectorXd::Ones(in.cols()); });
  Eigen::MatrixXd tip(2, 201);
  for (int i = 0; i <= 200; ++i) tip.col(i) << 1.5, 0.5 * i / 200.0;
  const double mesh_free = displacement_at(st.displacement, tip, p).row(1).mean();
  const double t = seconds_since(t0);

  const fem::FemModel model = fem::build_model(p, {60, 20});
  Eigen::VectorXd u;
  fem::compliance(model, Eigen::VectorXd::Ones(model.element_count()), &u);
  double sum = 0.0;
  int count = 0;
  for (int j = 0; j <= 20; ++j) {
    const std::array<int, 2> ij{60, j};
    sum += u(2 * model.node_index(ij) + 1);
    ++count;
  }
  const double reference = sum / count;
  const double err = std::abs(mesh_free - reference) / std::abs(reference);
  Outcome o;
  o.pass = err < 0.05 && t < 300.0;
  o.detail = fmt::format("tip u_y mesh-free {:.3f} vs FEM {:.3f}, error {:.2f}% ({} steps, {:.0f} s)", mesh_free,
                         reference, 100 * err, steps, t);
  return o;
}

// ---------------------------------------------------------------- 3

Outcome filter_oracle() {
  const auto t0 = Clock::now();
  const Box unit{Vec::Zero(2), Vec::Ones(2)};
  const std::vector<int> grid{20, 20};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const SampleBatch b = stratified_batch(unit, grid, derive_seed(3, 1, static_cast<std::uint64_t>(trial)));
    Rng rng(derive_seed(3, 2, static_cast<std::uint64_t>(trial)));
    Eigen::VectorXd rho(b.size()), s(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      rho(i) = rng.uniform();
      s(i) = -rng.uniform(0.0, 5.0);
    }
    const FilterSpec spec;
    const double r = resolve_radius(spec, b);
    const Eigen::VectorXd got = filter_sensitivities(rho, s, b, spec);
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      double num = 0.0, den = 0.0;
      for (Eigen::Index k = 0; k < b.size(); ++k) {
        const double h = r - (b.positions.col(j) - b.positions.col(k)).norm();
        if (h > 0.0) {
          num += h * rho(k) * s(k);
          den += h;
        }
      }
      worst = std::max(worst, std::abs(got(j) - num / (std::max(spec.epsilon, rho(j)) * den)));
    }
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = worst < 1e-12 && t < 10.0;
  o.detail = fmt::format("max abs err {:.2e} over 100 trials, {:.2f} s", worst, t);
  return o;
}

// ---------------------------------------------------------------- 4

// Pooled post-update volume at a given lambda, straight from the update formula.
double sweep_volume(const Eigen::VectorXd& rho, const Eigen::VectorXd& s, double lambda, const OcParams& p) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    const double b = std::max(0.0, -s(i) / lambda);
    const double v = rho(i) * std::pow(b, p.damping);
    total += std::clamp(v, std::max(0.0, rho(i) - p.move_limit), std::min(1.0, rho(i) + p.move_limit));
  }
  return total / static_cast<double>(rho.size());
}

Outcome oc_contract() {
  const auto t0 = Clock::now();
  const OcParams params;
  Rng rng(404);
  int volume_fail = 0, bound_fail = 0, infeasible = 0;
  double worst_volume = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int batches = 1 + static_cast<int>(rng.below(5));
    std::vector<Eigen::VectorXd> rho, s;
    for (int b = 0; b < batches; ++b) {
      const int n = 10 + static_cast<int>(rng.below(200));
      Eigen::VectorXd r(n), g(n);
      for (int i = 0; i < n; ++i) {
        r(i) = rng.uniform();
        g(i) = -std::exp(rng.uniform(-8.0, 4.0));
      }
      rho.push_back(r);
      s.push_back(g);
    }
    // Targets reachable within one move-limited step.
    const double v0 = volume_estimate(rho);
    const double target = std::clamp(v0 + rng.uniform(-0.1, 0.1), 0.02, 0.98);
    const OcResult res = oc_targets(rho, s, target, params);
    if (!res.feasible) {
      ++infeasible;
      continue;
    }
    const double dv = std::abs(volume_estimate(res.targets) - target);
    worst_volume = std::max(worst_volume, dv);
    if (dv > 1e-4) ++volume_fail;
    for (int b = 0; b < batches; ++b) {
      const auto& t = res.targets[static_cast<std::size_t>(b)];
      const auto& r = rho[static_cast<std::size_t>(b)];
      if ((t - r).cwiseAbs().maxCoeff() > params.move_limit + 1e-15 || t.minCoeff() < 0.0 || t.maxCoeff() > 1.0) {
        ++bound_fail;
      }
    }
  }
  // Two-sample closed-form instances against a dense log-lambda sweep.
  int sig_fail = 0;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd r(2), g(2);
    r << rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7);
    g << -rng.uniform(0.5, 5.0), -rng.uniform(0.5, 5.0);
    const double target = r.mean() + rng.uniform(-0.05, 0.05);
    const OcResult res = oc_targets({r}, {g}, target, params);
    const int n = 400001;
    double best = 0.0, best_gap = 1e300;
    for (int k = 0; k < n; ++k) {
      const double lambda = std::exp(std::log(1e-3) + (std::log(1e3) - std::log(1e-3)) * k / (n - 1));
      const double gap = std::abs(sweep_volume(r, g, lambda, params) - target);
      if (gap < best_gap) {
        best_gap = gap;
        best = lambda;
      }
    }
    const double rel = std::abs(res.lambda - best) / best;
    worst_rel = std::max(worst_rel, rel);
    if (rel > 5e-4) ++sig_fail;
  }
  // The worked two-point example.
  Eigen::VectorXd r2(2), g2(2);
  r2 << 0.5, 0.5;
  g2 << -4.0, -1.0;
  const OcResult toy = oc_targets({r2}, {g2}, 0.5, params);
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = volume_fail == 0 && bound_fail == 0 && infeasible == 0 && sig_fail == 0 && t < 30.0;
  o.detail = fmt::format(
      "1000 instances: worst |V - target| {:.1e}, bound violations {}, infeasible {}; "
      "lambda vs sweep worst rel {:.1e} ({} misses); toy lambda {:.4f} rho [{:.4f}, {:.4f}]; {:.1f} s",
      worst_volume, bound_fail, infeasible, worst_rel, sig_fail, toy.lambda, toy.targets[0](0), toy.targets[0](1), t);
  return o;
}

// ---------------------------------------------------------------- shared helpers for 5-7

struct RunSummary {
  double fem_compliance = 0.0;
  double volume = 0.0;
  double binariness = 0.0;
  double seconds = 0.0;
};

RunSummary summarize(const ProblemSpec& p, const NetworkParams& density_net, const std::vector<int>& grid,
                     const Vec& extra, const std::string& image) {
  const Eigen::VectorXd rho = rasterize(density_net, p.domain, grid, extra);
  RunSummary s;
  s.volume = rho.mean();
  s.binariness = (rho.array() * (1.0 - rho.array())).mean();
  s.fem_compliance = fem::compliance(fem::build_model(p, grid), rho);
  if (!image.empty() && grid.size() == 2) write_pgm(g_work / image, rho, grid[0], grid[1]);
  return s;
}

RunSummary single_run(ProblemSpec p, TrainConfig cfg, const std::string& tag) {
  const auto t0 = Clock::now();
  const TrainResult r = optimize(p, cfg, [&](const HistoryRecord& h) {
    if (h.iteration % 20 == 0) {
      log_line(fmt::format("{} it {} C {:.3f} vol {:.4f} bin {:.4f} ({:.0f} s)", tag, h.iteration, h.compliance,
                           h.volume, h.binariness, seconds_since(t0)));
    }
  });
  write_history(g_work / (tag + ".jsonl"), r.history);
  RunSummary s = summarize(p, r.density, p.grid, Vec(), tag + ".pgm");
  s.seconds = seconds_since(t0);
  log_line(fmt::format("{}: FEM C {:.3f} vol {:.4f} bin {:.4f} ({:.0f} s)", tag, s.fem_compliance, s.volume,
                       s.binariness, s.seconds));
  return s;
}

std::map<std::string, double> g_simp_cache;

// SIMP filter radius in element widths matching the default sample filter (2.5 cell diagonals).
double matched_simp_radius(const ProblemSpec& p) {
  const Vec extent = p.domain.box.extent();
  double diag2 = 0.0;
  for (int k = 0; k < p.dim(); ++k) diag2 += std::pow(extent(k) / p.grid[k], 2);
  return 2.5 * std::sqrt(diag2) / (extent(0) / p.grid[0]);
}

double simp_reference(const ProblemSpec& p) {
  const std::string key = fmt::format("{}-{}x{}-{}", p.name, p.grid[0], p.grid[1], p.volume_fraction);
  if (auto it = g_simp_cache.find(key); it != g_simp_cache.end()) return it->second;
  fem::SimpOptions opts;
  opts.filter_radius = matched_simp_radius(p);
  const fem::SimpResult r = fem::simp_optimize(p, p.grid, opts);
  write_pgm(g_work / ("simp-" + key + ".pgm"), r.rho, p.grid[0], p.grid[1]);
  log_line(fmt::format("SIMP {}: C {:.3f} vol {:.4f} ({} its)", key, r.compliance, r.volume, r.iterations));
  g_simp_cache[key] = r.compliance;
  return r.compliance;
}

constexpr int kParityIterations = 120;
constexpr int kReducedIterations = 100;

ProblemSpec reduced_beam() {
  ProblemSpec p = canonical_problem("ShortBeam");
  p.grid = {96, 32};
  return p;
}

std::optional<RunSummary> g_reduced_default;

const RunSummary& reduced_default() {
  if (!g_reduced_default) {
    TrainConfig cfg;
    cfg.n_opt = kReducedIterations;
    g_reduced_default = single_run(reduced_beam(), cfg, "reduced-default");
  }
  return *g_reduced_default;
}

// ---------------------------------------------------------------- 5

Outcome parity() {
  const ProblemSpec p = canonical_problem("ShortBeam");
  TrainConfig cfg;
  cfg.n_opt = kParityIterations;
  const RunSummary s = single_run(p, cfg, "parity-150x50");
  const double simp = simp_reference(p);
  const double ratio = s.fem_compliance / simp;
  Outcome o;
  o.pass = ratio <= 1.10 && s.binariness < 0.10 && std::abs(s.volume - 0.5) <= 0.01 && s.seconds <= 7200.0;
  o.detail = fmt::format("150x50, {} its: FEM C {:.3f} vs SIMP {:.3f} at r={:.2f} (ratio {:.3f}), binariness {:.4f}, volume {:.4f}, "
                         "{:.0f} s",
                         kParityIterations, s.fem_compliance, simp, matched_simp_radius(p), ratio, s.binariness, s.volume, s.seconds);
  return o;
}

// ---------------------------------------------------------------- 6

Outcome ablations() {
  const RunSummary& base = reduced_default();
  auto variant = [&](auto tweak, const std::string& tag) {
    TrainConfig cfg;
    cfg.n_opt = kReducedIterations;
    tweak(cfg);
    return single_run(reduced_beam(), cfg, tag);
  };
  const RunSummary naive = variant([](TrainConfig& c) { c.ablation = Ablation::naive_gradient; }, "ablate-naive");
  const RunSummary nofilter = variant([](TrainConfig& c) { c.ablation = Ablation::no_filter; }, "ablate-no-filter");
  const RunSummary relu = variant([](TrainConfig& c) { c.activation = Activation::relu; }, "ablate-relu");
  const RunSummary fourier = variant([](TrainConfig& c) { c.activation = Activation::fourier; }, "ablate-fourier");
  const double rn = naive.fem_compliance / base.fem_compliance;
  const double rf = nofilter.fem_compliance / base.fem_compliance;
  const double rr = relu.fem_compliance / base.fem_compliance;
  const double rq = fourier.fem_compliance / base.fem_compliance;
  const bool a = rn >= 1.5;
  const bool b = rf >= 1.05 || nofilter.binariness >= 0.10;
  const bool c1 = rr >= 1.02;
  const bool c2 = std::abs(rq - 1.0) <= 0.05;
  Outcome o;
  o.pass = a && b && c1 && c2;
  o.detail = fmt::format(
      "96x32, {} its, default C {:.3f}: naive x{:.3f} [{}], no_filter x{:.3f} bin {:.4f} [{}], relu x{:.3f} [{}], "
      "fourier x{:.3f} [{}]",
      kReducedIterations, base.fem_compliance, rn, a ? "ok" : "fail", rf, nofilter.binariness, b ? "ok" : "fail", rr,
      c1 ? "ok" : "fail", rq, c2 ? "ok" : "fail");
  return o;
}

// ---------------------------------------------------------------- 7

constexpr int kSpaceIterations = 100;

std::optional<fs::path> g_space_checkpoint;

Outcome solution_space() {
  const auto t0 = Clock::now();
  const ProblemSpec base = reduced_beam();
  TrainConfig cfg;
  cfg.n_opt = kSpaceIterations;
  SolutionSpace space;
  space.density_hidden = 128;
  const TrainResult r = train_solution_space(base, space, cfg, [&](const HistoryRecord& h) {
    if (h.iteration % 10 == 0) {
      log_line(fmt::format("space it {} C {:.3f} mean |V - q| {:.4f} ({:.0f} s)", h.iteration, h.compliance, h.volume,
                           seconds_since(t0)));
    }
  });
  const double train_seconds = seconds_since(t0);
  write_history(g_work / "space.jsonl", r.history);
  Checkpoint ck;
  ck.config.problem = base;
  ck.config.training = cfg;
  ck.config.space = space;
  ck.displacement = r.displacement;
  ck.density = r.density;
  ck.mode = "solution_space";
  ck.iterations = kSpaceIterations;
  save_checkpoint(ck, g_work / "space.ntock");
  g_space_checkpoint = g_work / "space.ntock";

  double mean_violation = 0.0, max_violation = 0.0, mean_err = 0.0, max_err = 0.0;
  std::string per_q;
  const std::vector<double> qs{0.3, 0.4, 0.5, 0.6, 0.7};
  for (double q : qs) {
    const ProblemSpec inst = space.instance(base, q);
    const RunSummary s = summarize(inst, r.density, inst.grid, Vec::Constant(1, space.scaled(q)),
                                   fmt::format("space-q{:.1f}.pgm", q));
    TrainConfig ref_cfg;
    ref_cfg.n_opt = kReducedIterations;
    const RunSummary ref = q == 0.5 ? reduced_default() : single_run(inst, ref_cfg, fmt::format("space-ref-q{:.1f}", q));
    const double violation = std::abs(s.volume - q) / q;
    const double err = std::abs(s.fem_compliance - ref.fem_compliance) / ref.fem_compliance;
    mean_violation += violation / static_cast<double>(qs.size());
    mean_err += err / static_cast<double>(qs.size());
    max_violation = std::max(max_violation, violation);
    max_err = std::max(max_err, err);
    per_q += fmt::format(" q={:.1f}: V {:.4f} C {:.2f}/{:.2f};", q, s.volume, s.fem_compliance, ref.fem_compliance);
  }
  Outcome o;
  o.pass = mean_violation < 0.015 && max_violation < 0.04 && max_err <= 0.10 && train_seconds <= 6 * 3600.0;
  o.detail = fmt::format(
      "96x32, {} its ({:.0f} s): volume violation mean {:.2f}% max {:.2f}%, compliance error mean {:.2f}% max "
      "{:.2f}%;{}",
      kSpaceIterations, train_seconds, 100 * mean_violation, 100 * max_violation, 100 * mean_err, 100 * max_err,
      per_q);
  return o;
}

// ---------------------------------------------------------------- 8

Outcome latency() {
  Checkpoint ck;
  if (g_space_checkpoint) {
    ck = load_checkpoint(*g_space_checkpoint);
  } else {
    // Untrained network of the deployed size; latency does not depend on the weights.
    ck.config.problem = reduced_beam();
    SolutionSpace space;
    space.density_hidden = 128;
    ck.config.space = space;
    const TrainingState st = init_state(ck.config.problem, ck.config.training, 1, 0.5, space.density_hidden);
    ck.displacement = st.displacement;
    ck.density = st.density;
  }
  const Explorer ex(ck);
  const std::vector<int> res{300, 100};
  (void)ex.infer(0.5, res);
  std::vector<double> times;
  for (int i = 0; i < 20; ++i) {
    const auto t0 = Clock::now();
    const Inference inf = ex.infer(0.3 + 0.02 * i, res);
    times.push_back(seconds_since(t0));
    if (inf.grid.size() != 30000) return {false, "wrong grid size"};
  }
  std::sort(times.begin(), times.end());
  const double median = times[times.size() / 2];
  Outcome o;
  o.pass = median < 0.100;
  o.detail = fmt::format("300x100 grid, width {} density net: median {:.1f} ms, max {:.1f} ms",
                         ck.density.arch.hidden_dim, 1e3 * median, 1e3 * times.back());
  return o;
}

// ---------------------------------------------------------------- 9

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& nto) {
  RunConfig c;
  c.problem = canonical_problem("ShortBeam");
  c.problem.grid = {48, 16};
  c.training.n_opt = 5;
  c.training.warm_start = 100;
  c.training.n_b = 5;
  c.training.seed = 7;
  const fs::path cfg = g_work / "determinism.json";
  std::ofstream(cfg) << config_to_json(c) << "\n";
  std::vector<std::string> logs;
  for (const char* run : {"det-a", "det-b"}) {
    const fs::path out = g_work / run;
    fs::remove_all(out);
    const std::string cmd = fmt::format("\"{}\" --quiet optimize \"{}\" -o \"{}\" > \"{}\" 2>&1", nto, cfg.string(),
                                        out.string(), (g_work / (std::string(run) + ".log")).string());
    if (std::system(cmd.c_str()) != 0) return {false, fmt::format("command failed: {}", cmd)};
    logs.push_back(read_file(out / "history.jsonl"));
  }
  std::size_t lines = 0;
  for (char ch : logs[0]) lines += ch == '\n';
  Outcome o;
  o.pass = lines == 5 && logs[0] == logs[1];
  o.detail = fmt::format("two `nto optimize` runs, seed 7: {} history lines each, {}", lines,
                         logs[0] == logs[1] ? "byte-identical" : "DIFFERENT");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string nto;
  std::string only;
  std::string work = "acceptance_work";
  app.add_option("nto", nto, "Path to the nto binary")->required();
  app.add_option("--only", only, "Comma-separated criteria to run");
  app.add_option("--work", work, "Directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);
  g_work = work;
  fs::create_directories(g_work);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');) selected.insert(std::stoi(item));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_check},
      {"forward solve", forward_solve},
      {"filter oracle", filter_oracle},
      {"OC contract", oc_contract},
      {"end-to-end parity", parity},
      {"ablations", ablations},
      {"solution space", solution_space},
      {"inference latency", latency},
      {"determinism", [&] { return determinism(nto); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d (%s): %s: %s\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
