#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "nto/canonical.hpp"
#include "nto/error.hpp"
#include "nto/io.hpp"

using namespace nto;

namespace {

const char* kMinimal = R"({
  "domain": {"min": [0, 0], "max": [1.5, 0.5]},
  "dirichlet": [{"shape": "plane", "axis": 0, "offset": 0, "components": [0, 1]}],
  "point_loads": [{"location": [1.5, 0.25], "force": [0, -1]}],
  "grid": [30, 10]
})";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.config = parse_config(kMinimal);
  c.config.training.hidden_dim = 6;
  c.config.training.hidden_layers = 2;
  c.displacement = init_state(c.config.problem, c.config.training).displacement;
  c.density = init_state(c.config.problem, c.config.training).density;
  c.iterations = 7;
  c.metrics["fem_compliance"] = 12.5;
  return c;
}

}  // namespace

TEST_CASE("minimal configuration takes documented defaults") {
  const RunConfig c = parse_config(kMinimal);
  CHECK(c.problem.dim() == 2);
  CHECK(c.problem.volume_fraction == 0.5);
  CHECK(c.problem.material.nu == 0.3);
  CHECK(c.training.n_opt == 200);
  CHECK(c.training.n_b == 50);
  CHECK(c.training.learning_rate == 3e-4);
  CHECK(c.fem_mesh() == std::vector<int>{30, 10});
  CHECK_FALSE(c.space.has_value());
}

TEST_CASE("errors name the offending field") {
  std::string text = kMinimal;
  text.insert(1, R"("trainig": {},)");
  CHECK(error_of(text).find("trainig") != std::string::npos);
  CHECK(error_of(text).find("unknown key") != std::string::npos);

  text = kMinimal;
  text.insert(1, R"("training": {"n_opt": "many"},)");
  CHECK(error_of(text).find("training.n_opt") != std::string::npos);

  text = kMinimal;
  text.insert(1, R"("volume_fraction": 1.5,)");
  CHECK_FALSE(error_of(text).empty());

  CHECK(error_of("{\n  \"domain\": [1,\n}").rfind("cfg.json:3:", 0) == 0);
}

TEST_CASE("canonical rendering round trips") {
  for (const auto& name : canonical_names()) {
    RunConfig c;
    c.problem = canonical_problem(name);
    const RunConfig back = parse_config(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(config_hash(back) == config_hash(c));
  }
  RunConfig a = parse_config(kMinimal);
  RunConfig b = a;
  b.training.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("checkpoints round trip and reject other versions") {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = encode_checkpoint(c);
  CHECK(bytes.compare(0, 8, std::string("NTOCKPT\0", 8)) == 0);
  const Checkpoint d = decode_checkpoint(bytes);
  CHECK(d.iterations == 7);
  CHECK(d.metrics.at("fem_compliance") == 12.5);
  CHECK(config_hash(d.config) == config_hash(c.config));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 16);
  // Parameters are stored in single precision.
  CHECK((forward(d.density, x) - forward(c.density, x)).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((forward(d.displacement, x) - forward(c.displacement, x)).cwiseAbs().maxCoeff() < 1e-5);

  std::string bumped = bytes;
  bumped[8] = 2;
  CHECK_THROWS_WITH_AS(decode_checkpoint(bumped), doctest::Contains("version 2"), ConfigError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 4)), ConfigError);
  CHECK_THROWS_AS(decode_checkpoint("garbage"), ConfigError);
}

TEST_CASE("grayscale export maps solid to black and puts max y first") {
  CHECK(gray_level(1.0) == 0);
  CHECK(gray_level(0.0) == 255);
  CHECK(gray_level(0.5) == 128);
  Eigen::VectorXd rho(6);
  rho << 1, 1, 1, 0, 0, 0;  // bottom row solid
  const std::string pgm = encode_pgm(rho, 3, 2);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 6);
  CHECK(pgm.compare(0, header.size(), header) == 0);
  CHECK(static_cast<unsigned char>(pgm[header.size()]) == 255);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 3]) == 0);
  CHECK_THROWS_AS(encode_pgm(rho, 4, 2), ContractViolation);
}

TEST_CASE("raw export is little-endian f32") {
  Eigen::VectorXf v(2);
  v << 1.0f, -0.5f;
  const std::string bytes = encode_f32(v);
  REQUIRE(bytes.size() == 8);
  float back[2];
  std::memcpy(back, bytes.data(), 8);
  CHECK(back[0] == 1.0f);
  CHECK(back[1] == -0.5f);
}

TEST_CASE("history lines are JSON with finite numbers") {
  HistoryRecord r;
  r.iteration = 3;
  r.compliance = 1.25;
  r.lambda = std::nan("");
  const auto j = nlohmann::json::parse(history_line(r));
  CHECK(j["iteration"] == 3);
  CHECK(j["compliance"] == 1.25);
  CHECK(j["lambda"] == 0.0);
  CHECK_FALSE(j.contains("direction_cosine"));
  r.direction_cosine = 0.25;
  CHECK(nlohmann::json::parse(history_line(r))["direction_cosine"] == 0.25);
}

TEST_CASE("files land on disk with a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "nto_io_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(sample_checkpoint(), dir / "c.ntock");
  CHECK(load_checkpoint(dir / "c.ntock").iterations == 7);
  Manifest m;
  m.command = "optimize";
  m.seed = 4;
  m.outputs = {"c.ntock"};
  write_manifest(dir / "manifest.json", m);
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["command"] == "optimize");
  CHECK(j["seed"] == 4);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ntock"), ConfigError);
  std::filesystem::remove_all(dir);
}
