// nto: command-line entry point.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nto/error.hpp"
#include "nto/explorer.hpp"
#include "nto/fem.hpp"
#include "nto/io.hpp"
#include "nto/trainer.hpp"

namespace fs = std::filesystem;
using namespace nto;

namespace {

struct DesignMetrics {
  double fem_compliance = 0.0;
  double volume = 0.0;
  double binariness = 0.0;
};

DesignMetrics evaluate(const ProblemSpec& problem, const Eigen::VectorXd& rho, const std::vector<int>& mesh, bool fem) {
  DesignMetrics m;
  m.volume = rho.mean();
  m.binariness = (rho.array() * (1.0 - rho.array())).mean();
  if (fem) m.fem_compliance = fem::compliance(fem::build_model(problem, mesh), rho);
  return m;
}

void export_design(const fs::path& out, const ProblemSpec& problem, const Eigen::VectorXd& rho,
                   const std::vector<int>& mesh, std::vector<std::string>& outputs) {
  if (problem.dim() == 2) {
    write_pgm(out / "density.pgm", rho, mesh[0], mesh[1]);
    outputs.emplace_back("density.pgm");
  } else {
    write_raw_volume(out / "density.raw", rho, mesh, problem.domain.box);
    outputs.emplace_back("density.raw");
    outputs.emplace_back("density.raw.hdr");
  }
}

ProgressFn progress_logger(bool quiet) {
  if (quiet) return {};
  return [](const HistoryRecord& r) {
    spdlog::info("iter {:4d}  compliance {:.5g}  volume {:.4f}  binariness {:.4f}  mmse {:.3e}", r.iteration,
                 r.compliance, r.volume, r.binariness, r.mmse_after);
  };
}

int run_training(const RunConfig& config, const fs::path& out, const std::string& command, bool quiet) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool space = command == "train-space";
  const TrainResult result = space ? train_solution_space(config.problem, *config.space, config.training, progress_logger(quiet))
                                   : optimize(config.problem, config.training, progress_logger(quiet));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Checkpoint ck;
  ck.config = config;
  ck.displacement = result.displacement;
  ck.density = result.density;
  ck.mode = space ? "solution_space" : "optimize";
  ck.iterations = static_cast<int>(result.history.size());
  ck.metrics["train_seconds"] = seconds;

  Manifest manifest;
  manifest.command = command;
  manifest.config_hash = config_hash(config);
  manifest.seed = config.training.seed;
  fs::create_directories(out);
  write_history(out / "history.jsonl", result.history);
  manifest.outputs = {"checkpoint.ntock", "history.jsonl", "config.json"};

  const auto mesh = config.fem_mesh();
  if (!space) {
    const Eigen::VectorXd rho = rasterize(result.density, config.problem.domain, mesh);
    const DesignMetrics m = evaluate(config.problem, rho, mesh, true);
    ck.metrics["fem_compliance"] = m.fem_compliance;
    ck.metrics["volume"] = m.volume;
    ck.metrics["binariness"] = m.binariness;
    export_design(out, config.problem, rho, mesh, manifest.outputs);
    std::printf("{\"fem_compliance\": %.9g, \"volume\": %.6f, \"binariness\": %.6f, \"seconds\": %.1f}\n",
                m.fem_compliance, m.volume, m.binariness, seconds);
  } else {
    std::printf("{\"iterations\": %zu, \"seconds\": %.1f}\n", result.history.size(), seconds);
  }
  save_checkpoint(ck, out / "checkpoint.ntock");
  std::ofstream(out / "config.json") << config_to_json(config) << "\n";
  manifest.metrics = ck.metrics;
  write_manifest(out / "manifest.json", manifest);
  return 0;
}

std::vector<int> parse_resolution(const std::string& text, int dim) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('x', start);
    const std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    try {
      std::size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--res expects positive integers like 300x100, got '" + text + "'");
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (static_cast<int>(out.size()) != dim) throw ConfigError("--res needs " + std::to_string(dim) + " sizes");
  return out;
}

void structured_error(const std::string& kind, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh-free neural topology optimization"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print final results");

  std::string config_path;
  std::string out_dir = "out";
  int iterations = -1;
  long long seed = -1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("-o,--out", out_dir, "Output directory");
    sub->add_option("--iterations", iterations, "Override the outer iteration count");
    sub->add_option("--seed", seed, "Override the master seed");
  };

  CLI::App* opt = app.add_subcommand("optimize", "Optimize one problem");
  add_common(opt);
  CLI::App* space = app.add_subcommand("train-space", "Learn a solution space over a parameter range");
  add_common(space);
  CLI::App* femopt = app.add_subcommand("fem-opt", "Reference SIMP optimization on a regular mesh");
  add_common(femopt);
  CLI::App* ablate = app.add_subcommand("ablate", "Run an ablation variant");
  add_common(ablate);
  std::string mode;
  ablate->add_option("--mode", mode, "naive | no_filter | relu | fourier")
      ->required()
      ->check(CLI::IsMember({"naive", "no_filter", "relu", "fourier"}));

  CLI::App* eval = app.add_subcommand("eval", "Rasterize a checkpoint and report volume (and FEM compliance)");
  std::string checkpoint_path;
  double q = std::numeric_limits<double>::quiet_NaN();
  std::string res;
  bool with_fem = false;
  std::string image;
  eval->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("--q", q, "Solution-space parameter");
  eval->add_option("--res", res, "Resolution, e.g. 300x100");
  eval->add_flag("--fem", with_fem, "Evaluate compliance with the FEM oracle");
  eval->add_option("--image", image, "Write the rasterized field (PGM in 2D, raw f32 in 3D)");

  CLI::App* serve_cmd = app.add_subcommand("serve", "Serve a solution-space checkpoint over HTTP");
  int port = 8080;
  std::string static_dir;
  bool reject = false;
  serve_cmd->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--static", static_dir, "Directory with the web UI bundle");
  serve_cmd->add_flag("--reject-out-of-range", reject, "Answer 422 instead of clamping q");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (opt->parsed() || space->parsed() || femopt->parsed() || ablate->parsed()) {
      RunConfig config = load_config(config_path);
      if (iterations >= 0) config.training.n_opt = iterations;
      if (seed >= 0) config.training.seed = static_cast<std::uint64_t>(seed);
      if (opt->parsed()) return run_training(config, out_dir, "optimize", quiet);
      if (space->parsed()) {
        if (!config.space) throw ConfigError(config_path + ": train-space needs a solution_space section");
        return run_training(config, out_dir, "train-space", quiet);
      }
      if (ablate->parsed()) {
        if (mode == "naive") config.training.ablation = Ablation::naive_gradient;
        if (mode == "no_filter") config.training.ablation = Ablation::no_filter;
        if (mode == "relu") config.training.activation = Activation::relu;
        if (mode == "fourier") config.training.activation = Activation::fourier;
        return run_training(config, out_dir, "optimize", quiet);
      }
      const auto mesh = config.fem_mesh();
      fem::SimpOptions simp = config.fem.simp;
      if (iterations >= 0) simp.max_iterations = iterations;
      const auto t0 = std::chrono::steady_clock::now();
      const fem::SimpResult r = fem::simp_optimize(config.problem, mesh, simp);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const fs::path out(out_dir);
      fs::create_directories(out);
      Manifest manifest;
      manifest.command = "fem-opt";
      manifest.config_hash = config_hash(config);
      manifest.seed = config.training.seed;
      manifest.outputs = {"fem_history.jsonl"};
      export_design(out, config.problem, r.rho, mesh, manifest.outputs);
      std::ofstream hist(out / "fem_history.jsonl");
      for (std::size_t i = 0; i < r.history.size(); ++i) {
        hist << nlohmann::json{{"iteration", i + 1}, {"compliance", r.history[i]}}.dump() << "\n";
      }
      manifest.metrics = {{"fem_compliance", r.compliance}, {"volume", r.volume}, {"iterations", r.iterations}};
      write_manifest(out / "manifest.json", manifest);
      std::printf("{\"fem_compliance\": %.9g, \"volume\": %.6f, \"iterations\": %d, \"seconds\": %.1f}\n", r.compliance,
                  r.volume, r.iterations, seconds);
      return 0;
    }

    const Checkpoint ck = load_checkpoint(checkpoint_path);
    if (eval->parsed()) {
      const ProblemSpec& base = ck.config.problem;
      const std::vector<int> grid = res.empty() ? ck.config.fem_mesh() : parse_resolution(res, base.dim());
      ProblemSpec problem = base;
      Vec extra;
      double q_used = q;
      if (ck.config.space) {
        if (std::isnan(q)) throw ConfigError("eval of a solution-space checkpoint needs --q");
        q_used = ck.config.space->clamp(q);
        if (q_used != q) spdlog::warn("q {} clamped to {}", q, q_used);
        problem = ck.config.space->instance(base, q_used);
        extra = Vec::Constant(1, ck.config.space->scaled(q_used));
      } else if (!std::isnan(q)) {
        throw ConfigError("--q only applies to solution-space checkpoints");
      }
      const Eigen::VectorXd rho = rasterize(ck.density, problem.domain, grid, extra);
      const DesignMetrics m = evaluate(problem, rho, grid, with_fem);
      if (!image.empty()) {
        if (problem.dim() == 2) {
          write_pgm(image, rho, grid[0], grid[1]);
        } else {
          write_raw_volume(image, rho, grid, problem.domain.box);
        }
      }
      nlohmann::json j = {{"volume", m.volume}, {"binariness", m.binariness}};
      if (with_fem) j["fem_compliance"] = m.fem_compliance;
      if (ck.config.space) j["q"] = q_used;
      std::printf("%s\n", j.dump().c_str());
      return 0;
    }
    ExplorerOptions options;
    options.policy = reject ? QPolicy::reject : QPolicy::clamp;
    options.static_dir = static_dir;
    const Explorer explorer(ck, options);
    return serve(explorer, port);
  } catch (const ConfigError& e) {
    structured_error("config", e.what());
  } catch (const NumericalError& e) {
    structured_error("numerical", e.what());
  } catch (const ContractViolation& e) {
    structured_error("contract", e.what());
  } catch (const std::exception& e) {
    structured_error("internal", e.what());
  }
  return 1;
}
