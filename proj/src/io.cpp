#include "nto/io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "nto/error.hpp"

namespace nto {

using json = nlohmann::json;

namespace {

// Strict object reader: typed lookups with field paths, unknown keys rejected by finish().
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "top level" : path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    if (!has(key)) fail(at(key), "missing required field");
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(at(key), "missing required field");
      return *fallback;
    }
    const json& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }

  long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(at(key), "missing required field");
      return *fallback;
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(at(key), "missing required field");
      return *fallback;
    }
    const json& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  Vec vec(const std::string& key, std::optional<Vec> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(at(key), "missing required field");
      return *fallback;
    }
    return to_vec(j_.at(key), at(key));
  }

  std::vector<int> ints(const std::string& key, std::optional<std::vector<int>> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(at(key), "missing required field");
      return *fallback;
    }
    const json& v = j_.at(key);
    if (!v.is_array()) fail(at(key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) fail(at(key) + "[" + std::to_string(i) + "]", "expected an integer");
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  const json* array(const std::string& key) {
    if (!has(key)) return nullptr;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(at(key), "expected an array");
    return &v;
  }

  const json* object(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

  static Vec to_vec(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(where + "[" + std::to_string(i) + "]", "expected a number");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Shape::Kind shape_kind(const std::string& name, const std::string& where) {
  if (name == "plane") return Shape::Kind::plane;
  if (name == "point") return Shape::Kind::point;
  if (name == "sphere" || name == "circle") return Shape::Kind::sphere;
  Fields::fail(where, "unknown shape '" + name + "' (expected plane, point, sphere)");
}

std::string shape_name(Shape::Kind kind) {
  switch (kind) {
    case Shape::Kind::plane:
      return "plane";
    case Shape::Kind::point:
      return "point";
    case Shape::Kind::sphere:
      return "sphere";
  }
  return "plane";
}

ProblemSpec read_problem(Fields& top) {
  ProblemSpec p;
  p.name = top.text("name", "problem");
  {
    Fields d(top.raw("domain"), "domain");
    p.domain.box.lo = d.vec("min");
    p.domain.box.hi = d.vec("max");
    d.finish();
    if (p.domain.box.lo.size() != p.domain.box.hi.size()) Fields::fail("domain", "min and max differ in length");
  }
  const int dim = static_cast<int>(p.domain.box.lo.size());
  if (const json* holes = top.array("holes")) {
    for (std::size_t i = 0; i < holes->size(); ++i) {
      Fields h((*holes)[i], "holes[" + std::to_string(i) + "]");
      p.domain.holes.push_back({h.vec("center"), h.number("radius"), h.number("value", 0.0)});
      h.finish();
    }
  }
  if (const json* mat = top.object("material")) {
    Fields m(*mat, "material");
    p.material.E1 = m.number("E1", 1.0);
    p.material.nu = m.number("nu", 0.3);
    p.material.penalty = m.number("p", 3.0);
    p.material.min_ratio = m.number("E_min_ratio", 1e-4);
    p.material.use_floor = m.boolean("use_floor", true);
    m.finish();
  }
  p.volume_fraction = top.number("volume_fraction", 0.5);
  p.grid = top.ints("grid");
  p.displacement_scale = top.number("displacement_scale", 1.0);
  if (const json* dir = top.array("dirichlet")) {
    for (std::size_t i = 0; i < dir->size(); ++i) {
      const std::string where = "dirichlet[" + std::to_string(i) + "]";
      Fields r((*dir)[i], where);
      DirichletRegion region;
      region.shape.kind = shape_kind(r.text("shape"), where + ".shape");
      if (region.shape.kind == Shape::Kind::plane) {
        region.shape.axis = static_cast<int>(r.integer("axis"));
        region.shape.offset = r.number("offset");
      } else {
        region.shape.center = r.vec("center");
        if (region.shape.kind == Shape::Kind::sphere) region.shape.radius = r.number("radius");
      }
      std::vector<int> all(static_cast<std::size_t>(dim));
      for (int c = 0; c < dim; ++c) all[static_cast<std::size_t>(c)] = c;
      region.components = r.ints("components", all);
      region.value = r.vec("value", Vec::Zero(dim));
      r.finish();
      p.dirichlet.push_back(std::move(region));
    }
  } else {
    Fields::fail("dirichlet", "missing required field");
  }
  if (const json* loads = top.array("point_loads")) {
    for (std::size_t i = 0; i < loads->size(); ++i) {
      Fields l((*loads)[i], "point_loads[" + std::to_string(i) + "]");
      p.point_loads.push_back({l.vec("location"), l.vec("force")});
      l.finish();
    }
  }
  if (const json* loads = top.array("distributed_loads")) {
    for (std::size_t i = 0; i < loads->size(); ++i) {
      Fields l((*loads)[i], "distributed_loads[" + std::to_string(i) + "]");
      DistributedLoad load;
      load.region = {l.vec("min"), l.vec("max")};
      load.force = l.vec("force");
      load.samples = static_cast<int>(l.integer("samples", 256));
      l.finish();
      p.distributed_loads.push_back(std::move(load));
    }
  }
  return p;
}

json problem_json(const ProblemSpec& p) {
  json j;
  j["name"] = p.name;
  j["domain"] = {{"min", vec_json(p.domain.box.lo)}, {"max", vec_json(p.domain.box.hi)}};
  j["holes"] = json::array();
  for (const auto& h : p.domain.holes) {
    j["holes"].push_back({{"center", vec_json(h.center)}, {"radius", h.radius}, {"value", h.value}});
  }
  j["material"] = {{"E1", p.material.E1},
                   {"nu", p.material.nu},
                   {"p", p.material.penalty},
                   {"E_min_ratio", p.material.min_ratio},
                   {"use_floor", p.material.use_floor}};
  j["volume_fraction"] = p.volume_fraction;
  j["grid"] = p.grid;
  j["displacement_scale"] = p.displacement_scale;
  j["dirichlet"] = json::array();
  for (const auto& r : p.dirichlet) {
    json o;
    o["shape"] = shape_name(r.shape.kind);
    if (r.shape.kind == Shape::Kind::plane) {
      o["axis"] = r.shape.axis;
      o["offset"] = r.shape.offset;
    } else {
      o["center"] = vec_json(r.shape.center);
      if (r.shape.kind == Shape::Kind::sphere) o["radius"] = r.shape.radius;
    }
    o["components"] = r.components;
    o["value"] = vec_json(r.value);
    j["dirichlet"].push_back(o);
  }
  j["point_loads"] = json::array();
  for (const auto& l : p.point_loads) j["point_loads"].push_back({{"location", vec_json(l.location)}, {"force", vec_json(l.force)}});
  j["distributed_loads"] = json::array();
  for (const auto& l : p.distributed_loads) {
    j["distributed_loads"].push_back({{"min", vec_json(l.region.lo)},
                                      {"max", vec_json(l.region.hi)},
                                      {"force", vec_json(l.force)},
                                      {"samples", l.samples}});
  }
  return j;
}

json config_json(const RunConfig& c) {
  json j = problem_json(c.problem);
  const TrainConfig& t = c.training;
  j["training"] = {{"learning_rate", t.learning_rate},
                   {"n_opt", t.n_opt},
                   {"n_sim", t.n_sim},
                   {"warm_start", t.warm_start},
                   {"n_b", t.n_b},
                   {"grid", t.grid},
                   {"seed", t.seed},
                   {"ablation", to_string(t.ablation)},
                   {"activation", to_string(t.activation)},
                   {"hidden_dim", t.hidden_dim},
                   {"hidden_layers", t.hidden_layers},
                   {"omega0", t.omega0},
                   {"residual", t.residual},
                   {"naive_volume_penalty", t.naive_volume_penalty}};
  j["filter"] = {{"radius", t.filter.radius}, {"epsilon", t.filter.epsilon}};
  j["oc"] = {{"move_limit", t.oc.move_limit},
             {"damping", t.oc.damping},
             {"lambda_min", t.oc.lambda_lo},
             {"lambda_max", t.oc.lambda_hi},
             {"volume_tolerance", t.oc.volume_tolerance},
             {"max_steps", t.oc.max_steps}};
  j["fem"] = {{"mesh", c.fem.mesh},
              {"filter_radius", c.fem.simp.filter_radius},
              {"move_limit", c.fem.simp.move_limit},
              {"damping", c.fem.simp.damping},
              {"change_tolerance", c.fem.simp.change_tolerance},
              {"max_iterations", c.fem.simp.max_iterations}};
  if (c.space) {
    const SolutionSpace& s = *c.space;
    json o = {{"kind", to_string(s.kind)},
              {"range", {s.lo, s.hi}},
              {"samples_per_iteration", s.samples_per_iteration},
              {"batches_per_sample", s.batches_per_sample},
              {"density_hidden", s.density_hidden},
              {"input_span", s.input_span}};
    if (s.kind == SolutionSpace::Kind::load_location) {
      o["load_index"] = s.load_index;
      o["segment"] = {vec_json(s.segment_start), vec_json(s.segment_end)};
    }
    j["solution_space"] = o;
  }
  return j;
}

RunConfig config_from_json(const json& root) {
  Fields top(root, "");
  RunConfig c;
  c.problem = read_problem(top);
  TrainConfig& t = c.training;
  if (const json* tr = top.object("training")) {
    Fields f(*tr, "training");
    t.learning_rate = f.number("learning_rate", t.learning_rate);
    t.n_opt = static_cast<int>(f.integer("n_opt", t.n_opt));
    t.n_sim = static_cast<int>(f.integer("n_sim", t.n_sim));
    t.warm_start = static_cast<int>(f.integer("warm_start", t.warm_start));
    t.n_b = static_cast<int>(f.integer("n_b", t.n_b));
    t.grid = f.ints("grid", std::vector<int>{});
    const long long seed = f.integer("seed", static_cast<long long>(t.seed));
    if (seed < 0) Fields::fail("training.seed", "must be non-negative");
    t.seed = static_cast<std::uint64_t>(seed);
    try {
      t.ablation = ablation_from_string(f.text("ablation", "none"));
      t.activation = activation_from_string(f.text("activation", "siren"));
    } catch (const ConfigError& e) {
      Fields::fail("training", e.what());
    }
    t.hidden_dim = static_cast<int>(f.integer("hidden_dim", t.hidden_dim));
    t.hidden_layers = static_cast<int>(f.integer("hidden_layers", t.hidden_layers));
    t.omega0 = f.number("omega0", t.omega0);
    t.residual = f.boolean("residual", t.residual);
    t.naive_volume_penalty = f.number("naive_volume_penalty", t.naive_volume_penalty);
    f.finish();
  }
  if (const json* fl = top.object("filter")) {
    Fields f(*fl, "filter");
    t.filter.radius = f.number("radius", t.filter.radius);
    t.filter.epsilon = f.number("epsilon", t.filter.epsilon);
    f.finish();
  }
  if (const json* oc = top.object("oc")) {
    Fields f(*oc, "oc");
    t.oc.move_limit = f.number("move_limit", t.oc.move_limit);
    t.oc.damping = f.number("damping", t.oc.damping);
    t.oc.lambda_lo = f.number("lambda_min", t.oc.lambda_lo);
    t.oc.lambda_hi = f.number("lambda_max", t.oc.lambda_hi);
    t.oc.volume_tolerance = f.number("volume_tolerance", t.oc.volume_tolerance);
    t.oc.max_steps = static_cast<int>(f.integer("max_steps", t.oc.max_steps));
    f.finish();
  }
  if (const json* fe = top.object("fem")) {
    Fields f(*fe, "fem");
    c.fem.mesh = f.ints("mesh", std::vector<int>{});
    c.fem.simp.filter_radius = f.number("filter_radius", c.fem.simp.filter_radius);
    c.fem.simp.move_limit = f.number("move_limit", c.fem.simp.move_limit);
    c.fem.simp.damping = f.number("damping", c.fem.simp.damping);
    c.fem.simp.change_tolerance = f.number("change_tolerance", c.fem.simp.change_tolerance);
    c.fem.simp.max_iterations = static_cast<int>(f.integer("max_iterations", c.fem.simp.max_iterations));
    f.finish();
  }
  if (const json* sp = top.object("solution_space")) {
    Fields f(*sp, "solution_space");
    SolutionSpace s;
    try {
      s.kind = space_kind_from_string(f.text("kind"));
    } catch (const ConfigError& e) {
      Fields::fail("solution_space.kind", e.what());
    }
    const Vec range = f.vec("range");
    if (range.size() != 2) Fields::fail("solution_space.range", "expected [lo, hi]");
    s.lo = range(0);
    s.hi = range(1);
    s.samples_per_iteration = static_cast<int>(f.integer("samples_per_iteration", s.samples_per_iteration));
    s.batches_per_sample = static_cast<int>(f.integer("batches_per_sample", s.batches_per_sample));
    s.density_hidden = static_cast<int>(f.integer("density_hidden", s.density_hidden));
    s.input_span = f.number("input_span", s.input_span);
    const long long idx = f.integer("load_index", 0);
    if (idx < 0) Fields::fail("solution_space.load_index", "must be non-negative");
    s.load_index = static_cast<std::size_t>(idx);
    if (const json* seg = f.array("segment")) {
      if (seg->size() != 2) Fields::fail("solution_space.segment", "expected [start, end]");
      s.segment_start = Fields::to_vec((*seg)[0], "solution_space.segment[0]");
      s.segment_end = Fields::to_vec((*seg)[1], "solution_space.segment[1]");
    }
    f.finish();
    c.space = s;
  }
  top.finish();

  c.problem.validate();
  t.validate();
  if (!t.grid.empty() && static_cast<int>(t.grid.size()) != c.problem.dim()) {
    Fields::fail("training.grid", "needs one cell count per axis");
  }
  if (!c.fem.mesh.empty() && static_cast<int>(c.fem.mesh.size()) != c.problem.dim()) {
    Fields::fail("fem.mesh", "needs one element count per axis");
  }
  if (c.space) c.space->validate(c.problem);
  return c;
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json arch_json(const NetworkParams& n) {
  const MlpArchitecture& a = n.arch;
  return {{"input_dim", a.input_dim},
          {"hidden_dim", a.hidden_dim},
          {"hidden_layers", a.hidden_layers},
          {"output_dim", a.output_dim},
          {"activation", to_string(a.activation)},
          {"omega0", a.omega0},
          {"fourier_features", a.fourier_features},
          {"fourier_scale", a.fourier_scale},
          {"residual", a.residual},
          {"seed", n.seed},
          {"parameters", n.parameter_count()}};
}

NetworkParams network_from_json(const json& j, const std::string& where) {
  Fields f(j, where);
  MlpArchitecture a;
  a.input_dim = static_cast<int>(f.integer("input_dim"));
  a.hidden_dim = static_cast<int>(f.integer("hidden_dim"));
  a.hidden_layers = static_cast<int>(f.integer("hidden_layers"));
  a.output_dim = static_cast<int>(f.integer("output_dim"));
  a.activation = activation_from_string(f.text("activation"));
  a.omega0 = f.number("omega0");
  a.fourier_features = static_cast<int>(f.integer("fourier_features"));
  a.fourier_scale = f.number("fourier_scale");
  a.residual = f.boolean("residual", true);
  const json& seed = f.raw("seed");
  f.integer("parameters");
  f.finish();
  a.validate();
  return init_network(a, seed.get<std::uint64_t>());
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}
void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

constexpr char kMagic[8] = {'N', 'T', 'O', 'C', 'K', 'P', 'T', '\0'};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing " + path.string());
}

double json_double(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    const auto pos = what.find("parse error");
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error (" +
                      (pos == std::string::npos ? what : what.substr(pos)) + ")");
  }
  try {
    return config_from_json(root);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path), path.string()); }

std::string config_to_json(const RunConfig& config, int indent) { return config_json(config).dump(indent); }

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_json(config).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string encode_checkpoint(const Checkpoint& c) {
  json header;
  header["config"] = config_json(c.config);
  header["displacement"] = arch_json(c.displacement);
  header["density"] = arch_json(c.density);
  header["mode"] = c.mode;
  header["iterations"] = c.iterations;
  json metrics = json::object();
  for (const auto& [k, v] : c.metrics) metrics[k] = v;
  header["metrics"] = metrics;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  for (const NetworkParams* net : {&c.displacement, &c.density}) {
    for (double v : net->flatten()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("not a checkpoint file (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = get_le(bytes, 12, 8);
  if (20 + header_len > bytes.size()) throw ConfigError("checkpoint header is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(20, header_len));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("checkpoint header is corrupt: ") + e.what());
  }
  Checkpoint c;
  c.config = config_from_json(header.at("config"));
  c.displacement = network_from_json(header.at("displacement"), "displacement");
  c.density = network_from_json(header.at("density"), "density");
  c.mode = header.at("mode").get<std::string>();
  c.iterations = header.at("iterations").get<int>();
  for (auto it = header.at("metrics").begin(); it != header.at("metrics").end(); ++it) {
    c.metrics[it.key()] = it.value().is_number() ? it.value().get<double>() : 0.0;
  }

  std::size_t at = 20 + header_len;
  const std::size_t expected = c.displacement.parameter_count() + c.density.parameter_count();
  if (bytes.size() - at != 4 * expected) {
    throw ConfigError("checkpoint payload holds " + std::to_string((bytes.size() - at) / 4) + " values, architecture needs " +
                      std::to_string(expected));
  }
  for (NetworkParams* net : {&c.displacement, &c.density}) {
    std::vector<double> values(net->parameter_count());
    for (double& v : values) {
      v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, at, 4))));
      at += 4;
    }
    net->unflatten(values);
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::uint8_t gray_level(double rho) {
  const double r = std::clamp(rho, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * (1.0 - r) + 0.5));
}

std::string encode_pgm(const Eigen::VectorXd& rho, int nx, int ny) {
  if (nx < 1 || ny < 1 || rho.size() != static_cast<Eigen::Index>(nx) * ny) {
    throw ContractViolation("image dimensions do not match the grid");
  }
  std::string out = "P5\n" + std::to_string(nx) + " " + std::to_string(ny) + "\n255\n";
  for (int j = ny - 1; j >= 0; --j) {
    for (int i = 0; i < nx; ++i) out.push_back(static_cast<char>(gray_level(rho(i + static_cast<Eigen::Index>(nx) * j))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Eigen::VectorXd& rho, int nx, int ny) {
  write_file(path, encode_pgm(rho, nx, ny));
}

std::string encode_f32(const Eigen::VectorXf& values) {
  std::string out;
  out.reserve(static_cast<std::size_t>(values.size()) * 4);
  for (Eigen::Index i = 0; i < values.size(); ++i) put_f32(out, values(i));
  return out;
}

void write_raw_volume(const std::filesystem::path& path, const Eigen::VectorXd& rho, std::span<const int> dims,
                      const Box& box) {
  Eigen::Index n = 1;
  for (int d : dims) n *= d;
  if (rho.size() != n) throw ContractViolation("volume dimensions do not match the grid");
  write_file(path, encode_f32(rho.cast<float>()));
  std::ostringstream hdr;
  hdr << "format f32le\norder x-fastest\ndims";
  for (int d : dims) hdr << ' ' << d;
  hdr << "\nmin";
  for (Eigen::Index a = 0; a < box.lo.size(); ++a) hdr << ' ' << box.lo(a);
  hdr << "\nmax";
  for (Eigen::Index a = 0; a < box.hi.size(); ++a) hdr << ' ' << box.hi(a);
  hdr << '\n';
  write_file(path.string() + ".hdr", hdr.str());
}

std::string history_line(const HistoryRecord& r) {
  json j = {{"iteration", r.iteration},
            {"sim_loss", json_double(r.sim_loss)},
            {"internal_energy", json_double(r.internal_energy)},
            {"compliance", json_double(r.compliance)},
            {"volume", json_double(r.volume)},
            {"target_volume", json_double(r.target_volume)},
            {"lambda", json_double(r.lambda)},
            {"oc_feasible", r.oc_feasible},
            {"mmse_before", json_double(r.mmse_before)},
            {"mmse_after", json_double(r.mmse_after)},
            {"binariness", json_double(r.binariness)}};
  if (r.direction_cosine) j["direction_cosine"] = *r.direction_cosine;
  return j.dump();
}

void write_history(const std::filesystem::path& path, const std::vector<HistoryRecord>& history) {
  std::string out;
  for (const auto& r : history) out += history_line(r) + "\n";
  write_file(path, out);
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ostringstream hash;
  hash << std::hex << m.config_hash;
  json j = {{"command", m.command},
            {"config_hash", hash.str()},
            {"seed", m.seed},
            {"version", version_string()},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"outputs", m.outputs}};
  json metrics = json::object();
  for (const auto& [k, v] : m.metrics) metrics[k] = v;
  j["metrics"] = metrics;
  write_file(path, j.dump(2) + "\n");
}

std::string version_string() { return "nto 0.1.0"; }

}  // namespace nto
