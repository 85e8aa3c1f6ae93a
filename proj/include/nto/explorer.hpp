#pragma once

// HTTP front end for solution-space checkpoints.

#include <Eigen/Dense>

#include <map>
#include <stop_token>
#include <string>
#include <vector>

#include "nto/io.hpp"

namespace nto {

enum class QPolicy { clamp, reject };

struct ExplorerOptions {
  QPolicy policy = QPolicy::clamp;
  long long max_cells = 1024LL * 1024LL;
  /// Directory served at "/" when non-empty and present.
  std::string static_dir;
};

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

struct Inference {
  Eigen::VectorXf grid;  // x fastest, row 0 at the lowest y
  std::vector<int> dims;
  double volume = 0.0;
  double q = 0.0;
  bool clamped = false;
};

class Explorer {
 public:
  /// Throws ConfigError when the checkpoint carries no solution space.
  Explorer(Checkpoint checkpoint, ExplorerOptions options = {});

  /// Cell-center densities at q. Throws ConfigError for bad resolutions or (reject policy) q outside the range.
  [[nodiscard]] Inference infer(double q, const std::vector<int>& resolution) const;

  [[nodiscard]] HttpReply meta() const;
  [[nodiscard]] HttpReply handle_infer(const std::string& body) const;
  [[nodiscard]] const Checkpoint& checkpoint() const { return checkpoint_; }
  [[nodiscard]] const ExplorerOptions& options() const { return options_; }

 private:
  Checkpoint checkpoint_;
  ExplorerOptions options_;
  SolutionSpace space_;
  FloatNetwork density_;
};

/// Blocks serving /api/meta, /api/infer, /healthz and the static bundle. The bind address
/// defaults to 127.0.0.1 and can be overridden with NTO_BIND_ADDRESS. Returns once `stop` is requested.
int serve(const Explorer& explorer, int port, std::stop_token stop = {});

}  // namespace nto
