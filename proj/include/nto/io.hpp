#pragma once

// Run configuration, checkpoints, field exports and run manifests.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nto/fem.hpp"
#include "nto/networks.hpp"
#include "nto/problem.hpp"
#include "nto/trainer.hpp"

namespace nto {

struct FemSettings {
  /// Mesh for the reference optimizer and compliance evaluation; empty uses the problem grid.
  std::vector<int> mesh;
  fem::SimpOptions simp;
};

struct RunConfig {
  ProblemSpec problem;
  TrainConfig training;
  FemSettings fem;
  std::optional<SolutionSpace> space;

  [[nodiscard]] std::vector<int> fem_mesh() const { return fem.mesh.empty() ? problem.grid : fem.mesh; }
};

/// Parses and validates a JSON run configuration. Unknown keys are rejected. Errors name the
/// offending field path, or the line and column for syntax errors; `source` labels messages.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON rendering (sorted keys, every field explicit).
std::string config_to_json(const RunConfig& config, int indent = 2);
/// FNV-1a 64 over the canonical rendering.
std::uint64_t config_hash(const RunConfig& config);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  NetworkParams displacement;
  NetworkParams density;
  /// "optimize" or "solution_space".
  std::string mode = "optimize";
  int iterations = 0;
  std::map<std::string, double> metrics;
};

/// Layout: "NTOCKPT\0", u32 version, u64 header length, JSON header, then f32 little-endian
/// parameters (displacement net, then density net; each layer's weight column-major then bias).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

/// floor(255 (1 - rho) + 0.5): solid is black. Row 0 of the image is the top of the domain (max y).
std::uint8_t gray_level(double rho);
/// PGM P5 for a 2D grid stored x-fastest.
void write_pgm(const std::filesystem::path& path, const Eigen::VectorXd& rho, int nx, int ny);
std::string encode_pgm(const Eigen::VectorXd& rho, int nx, int ny);
/// Raw little-endian f32 (x fastest) plus `<path>.hdr` with dims and extents.
void write_raw_volume(const std::filesystem::path& path, const Eigen::VectorXd& rho, std::span<const int> dims,
                      const Box& box);

std::string history_line(const HistoryRecord& record);
void write_history(const std::filesystem::path& path, const std::vector<HistoryRecord>& history);

struct Manifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::map<std::string, double> metrics;
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Little-endian f32 bytes of a grid, as served to clients.
std::string encode_f32(const Eigen::VectorXf& values);

std::string version_string();

}  // namespace nto
