#include "nto/explorer.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "nto/density.hpp"
#include "nto/error.hpp"
#include "nto/sampling.hpp"

namespace nto {

using json = nlohmann::json;

namespace {

HttpReply json_reply(int status, const json& body) {
  HttpReply r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpReply field_error(int status, const std::string& field, const std::string& message) {
  return json_reply(status, {{"errors", json::array({{{"field", field}, {"message", message}}})}});
}

std::string dims_text(const std::vector<int>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s;
}

}  // namespace

Explorer::Explorer(Checkpoint checkpoint, ExplorerOptions options)
    : checkpoint_(std::move(checkpoint)), options_(std::move(options)), density_(checkpoint_.density) {
  if (!checkpoint_.config.space) throw ConfigError("checkpoint has no solution space; train it with train-space");
  space_ = *checkpoint_.config.space;
  if (options_.max_cells < 1) throw ConfigError("max_cells must be positive");
}

Inference Explorer::infer(double q, const std::vector<int>& resolution) const {
  const ProblemSpec& problem = checkpoint_.config.problem;
  if (static_cast<int>(resolution.size()) != problem.dim()) {
    throw ConfigError("resolution needs " + std::to_string(problem.dim()) + " entries");
  }
  long long cells = 1;
  for (int r : resolution) {
    if (r < 1) throw ConfigError("resolution entries must be positive");
    cells *= r;
    if (cells > options_.max_cells) throw ConfigError("resolution exceeds the limit of " + std::to_string(options_.max_cells) + " cells");
  }
  if (!std::isfinite(q)) throw ConfigError("q must be finite");
  Inference out;
  out.q = space_.clamp(q);
  out.clamped = out.q != q;
  if (out.clamped && options_.policy == QPolicy::reject) {
    throw ConfigError("q outside the trained range");
  }
  out.dims = resolution;
  const Eigen::MatrixXd centers = cell_centers(problem.domain.box, resolution);
  Eigen::MatrixXf inputs(centers.rows() + 1, centers.cols());
  inputs.topRows(centers.rows()) = centers.cast<float>();
  inputs.row(centers.rows()).setConstant(static_cast<float>(space_.scaled(out.q)));
  out.grid = density(density_, inputs, problem.domain);
  out.volume = static_cast<double>(out.grid.cast<double>().mean());
  return out;
}

HttpReply Explorer::meta() const {
  const ProblemSpec& p = checkpoint_.config.problem;
  json domain = {{"min", std::vector<double>(p.domain.box.lo.data(), p.domain.box.lo.data() + p.dim())},
                 {"max", std::vector<double>(p.domain.box.hi.data(), p.domain.box.hi.data() + p.dim())}};
  json metrics = json::object();
  for (const auto& [k, v] : checkpoint_.metrics) metrics[k] = v;
  json body = {{"parameter_kind", to_string(space_.kind)},
               {"range", {space_.lo, space_.hi}},
               {"problem", p.name},
               {"dim", p.dim()},
               {"domain", domain},
               {"default_resolution", p.grid},
               {"max_cells", options_.max_cells},
               {"q_policy", options_.policy == QPolicy::clamp ? "clamp" : "reject"},
               {"training",
                {{"mode", checkpoint_.mode},
                 {"iterations", checkpoint_.iterations},
                 {"seed", checkpoint_.config.training.seed},
                 {"metrics", metrics}}}};
  return json_reply(200, body);
}

HttpReply Explorer::handle_infer(const std::string& body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    return field_error(400, "body", std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) return field_error(400, "body", "expected a JSON object");
  json errors = json::array();
  for (auto it = req.begin(); it != req.end(); ++it) {
    if (it.key() != "q" && it.key() != "resolution" && it.key() != "encoding") {
      errors.push_back({{"field", it.key()}, {"message", "unknown field"}});
    }
  }
  double q = 0.0;
  if (!req.contains("q")) {
    errors.push_back({{"field", "q"}, {"message", "required"}});
  } else {
    json v = req["q"];
    if (v.is_array() && v.size() == 1) v = v[0];
    if (!v.is_number()) {
      errors.push_back({{"field", "q"}, {"message", "expected a number"}});
    } else {
      q = v.get<double>();
    }
  }
  std::vector<int> res = checkpoint_.config.problem.grid;
  if (req.contains("resolution")) {
    const json& r = req["resolution"];
    res.clear();
    bool ok = r.is_array() && static_cast<int>(r.size()) == checkpoint_.config.problem.dim();
    if (ok) {
      for (const auto& v : r) {
        if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > options_.max_cells) {
          ok = false;
          break;
        }
        res.push_back(v.get<int>());
      }
    }
    if (!ok) {
      errors.push_back({{"field", "resolution"},
                        {"message", "expected " + std::to_string(checkpoint_.config.problem.dim()) +
                                        " positive integers"}});
    }
  }
  std::string encoding = "raw";
  if (req.contains("encoding")) {
    if (!req["encoding"].is_string() || (req["encoding"] != "raw" && req["encoding"] != "image")) {
      errors.push_back({{"field", "encoding"}, {"message", "expected \"raw\" or \"image\""}});
    } else {
      encoding = req["encoding"].get<std::string>();
    }
  }
  if (encoding == "image" && res.size() != 2) errors.push_back({{"field", "encoding"}, {"message", "image needs a 2D grid"}});
  if (!errors.empty()) return json_reply(400, {{"errors", errors}});

  long long cells = 1;
  for (int r : res) cells *= r;
  if (cells > options_.max_cells) {
    return field_error(400, "resolution", "exceeds the limit of " + std::to_string(options_.max_cells) + " cells");
  }
  if (options_.policy == QPolicy::reject && space_.clamp(q) != q) {
    return field_error(422, "q", "outside the trained range [" + std::to_string(space_.lo) + ", " +
                                     std::to_string(space_.hi) + "]");
  }

  Inference inf;
  try {
    inf = infer(q, res);
  } catch (const ConfigError& e) {
    return field_error(400, "request", e.what());
  }
  HttpReply reply;
  if (encoding == "raw") {
    reply.content_type = "application/octet-stream";
    reply.body = encode_f32(inf.grid);
  } else {
    reply.content_type = "image/x-portable-graymap";
    reply.body = encode_pgm(inf.grid.cast<double>(), res[0], res[1]);
  }
  reply.headers["X-Grid-Dims"] = dims_text(inf.dims);
  reply.headers["X-Grid-Order"] = "x-fastest,y-up";
  reply.headers["X-Volume"] = fmt::format("{:.6f}", inf.volume);
  reply.headers["X-Q"] = fmt::format("{}", inf.q);
  reply.headers["X-Clamped"] = inf.clamped ? "true" : "false";
  if (inf.clamped) reply.headers["X-Warning"] = fmt::format("q {} clamped to {}", q, inf.q);
  return reply;
}

int serve(const Explorer& explorer, int port, std::stop_token stop) {
  httplib::Server server;
  const std::stop_callback on_stop(stop, [&server] { server.stop(); });
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(reply.body, reply.content_type);
  };
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
  server.Get("/api/meta", [&](const httplib::Request&, httplib::Response& res) { send(res, explorer.meta()); });
  server.Post("/api/infer", [&](const httplib::Request& req, httplib::Response& res) {
    const HttpReply reply = explorer.handle_infer(req.body);
    if (reply.headers.count("X-Warning")) spdlog::warn("{}", reply.headers.at("X-Warning"));
    send(res, reply);
  });
  const std::string& dir = explorer.options().static_dir;
  if (!dir.empty()) {
    if (std::filesystem::is_directory(dir)) {
      server.set_mount_point("/", dir);
    } else {
      spdlog::warn("static directory {} not found; serving the API only", dir);
    }
  }
  const char* env = std::getenv("NTO_BIND_ADDRESS");
  const std::string host = env && *env ? env : "127.0.0.1";
  spdlog::info("explorer listening on {}:{}", host, port);
  if (!server.listen(host, port)) {
    spdlog::error("cannot bind {}:{}", host, port);
    return 1;
  }
  return 0;
}

}  // namespace nto
