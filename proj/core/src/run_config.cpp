#include "nova/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nova/error.hpp"
#include "nova/manifest.hpp"

namespace nova {
namespace {

struct BadValue {
  std::string message;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) throw BadValue{"'" + v + "' is not a valid number"};
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw BadValue{"'" + v + "' is not a boolean (true|false)"};
}

std::string str(double v) { return format_double(v); }
std::string str(int v) { return std::to_string(v); }
std::string str(std::uint64_t v) { return std::to_string(v); }
std::string str(bool v) { return v ? "true" : "false"; }

const char* shape_name(fidelity::ShapeChoice s) {
  switch (s) {
    case fidelity::ShapeChoice::random: return "random";
    case fidelity::ShapeChoice::rectangle: return "rectangle";
    case fidelity::ShapeChoice::ellipse: return "ellipse";
    case fidelity::ShapeChoice::polygon: return "polygon";
  }
  return "random";
}

fidelity::ShapeChoice parse_shape(const std::string& v) {
  for (auto s : {fidelity::ShapeChoice::random, fidelity::ShapeChoice::rectangle, fidelity::ShapeChoice::ellipse,
                 fidelity::ShapeChoice::polygon})
    if (v == shape_name(s)) return s;
  throw BadValue{"'" + v + "' is not a shape (random|rectangle|ellipse|polygon)"};
}

std::string ops_string(const std::vector<anchor::DegradeOp>& ops) {
  std::string out;
  for (auto op : ops) {
    if (!out.empty()) out += ',';
    out += op == anchor::DegradeOp::affine ? "affine" : "blur";
  }
  return out.empty() ? "none" : out;
}

std::string ints_string(const std::vector<int>& v) {
  std::string out;
  for (int x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

std::vector<int> parse_ints(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(trim(item)));
  if (out.empty()) throw BadValue{"expected a comma-separated integer list"};
  return out;
}

std::vector<anchor::DegradeOp> parse_ops(const std::string& v) {
  std::vector<anchor::DegradeOp> ops;
  if (v == "none") return ops;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "affine")
      ops.push_back(anchor::DegradeOp::affine);
    else if (item == "blur")
      ops.push_back(anchor::DegradeOp::blur);
    else
      throw BadValue{"'" + item + "' is not a degradation op (affine|blur)"};
  }
  return ops;
}

// Wraps enum parsers that throw nova::Error into BadValue.
template <typename F>
auto via(F&& f, const std::string& v) {
  try {
    return f(v);
  } catch (const Error& e) {
    throw BadValue{e.what()};
  }
}

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define NOVA_FIELD(KEY, DOC, MEMBER, TYPE)                                          \
  Field {                                                                           \
    KEY, DOC, [](const RunConfig& c) { return str(c.MEMBER); },                     \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_number<TYPE>(v); } \
  }
#define NOVA_BOOL(KEY, DOC, MEMBER)                                                                             \
  Field {                                                                                                       \
    KEY, DOC, [](const RunConfig& c) { return str(c.MEMBER); }, [](RunConfig& c, const std::string& v) { \
      c.MEMBER = parse_bool(v);                                                                                 \
    }                                                                                                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      NOVA_FIELD("seed", "master seed for every random stream", seed, std::uint64_t),
      NOVA_FIELD("workers", "worker threads for data synthesis and batches", workers, int),
      NOVA_FIELD("data.height", "clip height in pixels", data.height, int),
      NOVA_FIELD("data.width", "clip width in pixels", data.width, int),
      NOVA_FIELD("data.frames", "frames per clip (T+1)", data.frames, int),
      NOVA_FIELD("data.channels", "1 (gray) or 3 (RGB)", data.channels, int),
      NOVA_FIELD("data.clips", "clips generated by make-dataset", clips, int),
      NOVA_FIELD("data.shapes_min", "fewest sprites per clip", data.shapes_min, int),
      NOVA_FIELD("data.shapes_max", "most sprites per clip", data.shapes_max, int),
      NOVA_FIELD("data.shape_size_min", "sprite diameter / min(H, W), lower bound", data.shape_size_min, double),
      NOVA_FIELD("data.shape_size_max", "sprite diameter / min(H, W), upper bound", data.shape_size_max, double),
      NOVA_FIELD("data.shape_speed_max", "sprite speed bound, px/frame at W=16", data.shape_speed_max, double),
      NOVA_FIELD("data.background_speed_min", "background pan speed lower bound", data.background_speed_min, double),
      NOVA_FIELD("data.background_speed_max", "background pan speed upper bound", data.background_speed_max, double),
      NOVA_FIELD("keyframe.interval", "training keyframe interval; 0 = random interior keyframes", keyframe_interval,
                 int),
      NOVA_FIELD("keyframe.n_interior", "random interior keyframes per clip", keyframe_n_interior, int),
      NOVA_FIELD("degrade.p_geometric", "probability of the zoom-stretch warp", degrade.p_geometric, double),
      NOVA_FIELD("degrade.p_appearance", "probability of the blurred blob", degrade.p_appearance, double),
      NOVA_FIELD("degrade.zoom_min", "zoom factor lower bound", degrade.zoom_min, double),
      NOVA_FIELD("degrade.zoom_max", "zoom factor upper bound", degrade.zoom_max, double),
      NOVA_FIELD("degrade.stretch_min", "per-axis stretch lower bound", degrade.stretch_min, double),
      NOVA_FIELD("degrade.stretch_max", "per-axis stretch upper bound", degrade.stretch_max, double),
      NOVA_FIELD("degrade.rotation_deg", "rotation bound in degrees", degrade.rotation_deg, double),
      NOVA_FIELD("degrade.sigma_min", "blur sigma lower bound, px", degrade.sigma_min, double),
      NOVA_FIELD("degrade.sigma_max", "blur sigma upper bound, px", degrade.sigma_max, double),
      NOVA_FIELD("degrade.blob_min", "blob area fraction lower bound", degrade.blob_min, double),
      NOVA_FIELD("degrade.blob_max", "blob area fraction upper bound", degrade.blob_max, double),
      NOVA_FIELD("degrade.blob_edge", "blob soft edge width, px", degrade.blob_edge, double),
      Field{"degrade.ops", "enabled degradations: affine,blur | none",
            [](const RunConfig& c) { return ops_string(c.degrade.ops); },
            [](RunConfig& c, const std::string& v) { c.degrade.ops = parse_ops(v); }},
      Field{"fidelity.shape", "mask shape: random|rectangle|ellipse|polygon",
            [](const RunConfig& c) { return std::string(shape_name(c.fidelity.shape)); },
            [](RunConfig& c, const std::string& v) { c.fidelity.shape = parse_shape(v); }},
      NOVA_FIELD("fidelity.size_min", "mask size / min(H, W), lower bound", fidelity.size_min, double),
      NOVA_FIELD("fidelity.size_max", "mask size / min(H, W), upper bound", fidelity.size_max, double),
      NOVA_FIELD("fidelity.aspect_min", "mask aspect ratio lower bound", fidelity.aspect_min, double),
      NOVA_FIELD("fidelity.aspect_max", "mask aspect ratio upper bound", fidelity.aspect_max, double),
      NOVA_FIELD("fidelity.speed_min", "mask speed lower bound, px/frame at W=64", fidelity.speed_min, double),
      NOVA_FIELD("fidelity.speed_max", "mask speed upper bound, px/frame at W=64", fidelity.speed_max, double),
      NOVA_FIELD("fidelity.spin_min", "mask angular rate lower bound, rad/frame", fidelity.spin_min, double),
      NOVA_FIELD("fidelity.spin_max", "mask angular rate upper bound, rad/frame", fidelity.spin_max, double),
      NOVA_FIELD("fidelity.scale_min", "mask scale lower bound", fidelity.scale_min, double),
      NOVA_FIELD("fidelity.scale_max", "mask scale upper bound", fidelity.scale_max, double),
      NOVA_FIELD("fidelity.vertices_min", "polygon vertex count lower bound", fidelity.vertices_min, int),
      NOVA_FIELD("fidelity.vertices_max", "polygon vertex count upper bound", fidelity.vertices_max, int),
      NOVA_FIELD("model.dim", "token width", model.dim, int),
      NOVA_FIELD("model.layers", "blocks per branch", model.layers, int),
      NOVA_FIELD("model.heads", "attention heads", model.heads, int),
      NOVA_FIELD("model.patch", "spatial patch size", model.patch, int),
      NOVA_FIELD("model.patch_t", "temporal patch size", model.patch_t, int),
      NOVA_FIELD("model.mlp_ratio", "MLP hidden width / dim", model.mlp_ratio, int),
      Field{"model.sparse", "sparse hint: additive|cross",
            [](const RunConfig& c) { return std::string(denoiser::to_string(c.model.sparse)); },
            [](RunConfig& c, const std::string& v) { c.model.sparse = via(denoiser::parse_sparse_mode, v); }},
      Field{"model.dense", "dense branch: independent|shared|off",
            [](const RunConfig& c) { return std::string(denoiser::to_string(c.model.dense)); },
            [](RunConfig& c, const std::string& v) { c.model.dense = via(denoiser::parse_dense_mode, v); }},
      NOVA_FIELD("schedule.steps", "diffusion timesteps", model.schedule_steps, int),
      NOVA_FIELD("train.steps", "optimizer steps", train.steps, int),
      NOVA_FIELD("train.batch", "samples per step", train.batch, int),
      NOVA_FIELD("train.lr", "AdamW learning rate", train.optimizer.lr, double),
      NOVA_FIELD("train.beta1", "AdamW first-moment decay", train.optimizer.beta1, double),
      NOVA_FIELD("train.beta2", "AdamW second-moment decay", train.optimizer.beta2, double),
      NOVA_FIELD("train.eps", "AdamW epsilon", train.optimizer.eps, double),
      NOVA_FIELD("train.weight_decay", "decoupled weight decay on weight matrices", train.optimizer.weight_decay,
                 double),
      Field{"train.freeze", "freeze policy: none|cross_only|two_phase",
            [](const RunConfig& c) { return std::string(denoiser::to_string(c.train.freeze)); },
            [](RunConfig& c, const std::string& v) { c.train.freeze = via(denoiser::parse_freeze_policy, v); }},
      NOVA_FIELD("train.phase_split", "fraction of steps in the first two_phase phase", train.phase_split, double),
      NOVA_FIELD("train.smooth", "loss smoothing window", train.smooth_window, int),
      NOVA_FIELD("train.log_every", "log a loss line every n steps", log_every, int),
      NOVA_FIELD("infer.interval", "keyframe interval at inference", infer_interval, int),
      NOVA_FIELD("infer.steps", "denoising steps at inference", infer_steps, int),
      Field{"infer.mode", "keyframe editing: anchored|independent",
            [](const RunConfig& c) { return std::string(inference::to_string(c.infer_mode)); },
            [](RunConfig& c, const std::string& v) { c.infer_mode = via(inference::parse_editing_mode, v); }},
      NOVA_BOOL("infer.clip_x0", "clamp each x0 estimate to the pixel range", infer_clip_x0),
      Field{"eval.tc_reference", "temporal consistency anchor: edited_first|generated_first",
            [](const RunConfig& c) { return c.eval_tc_reference; },
            [](RunConfig& c, const std::string& v) {
              if (v != "edited_first" && v != "generated_first")
                throw BadValue{"'" + v + "' is not edited_first|generated_first"};
              c.eval_tc_reference = v;
            }},
      NOVA_FIELD("ablate.cases", "edit cases per ablation variant", ablate_cases, int),
      NOVA_FIELD("ablate.frames", "frames per ablation clip", ablate_frames, int),
      Field{"ablate.intervals", "keyframe intervals swept at inference",
            [](const RunConfig& c) { return ints_string(c.ablate_intervals); },
            [](RunConfig& c, const std::string& v) { c.ablate_intervals = parse_ints(v); }},
      NOVA_FIELD("ablate.band", "allowed BG-SSIM deviation from interval 10", ablate_band, double),
      NOVA_FIELD("ablate.jitter", "recolor editor hue jitter in degrees", ablate_jitter, double),
  };
  return table;
}

#undef NOVA_FIELD
#undef NOVA_BOOL

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

struct Setting {
  std::string key, value, origin;
};

// On failure, replays the settings in order and blames the first one after
// which the configuration stops validating.
void validate_settings(RunConfig& c, const std::vector<Setting>& settings) {
  c.resolve();
  try {
    c.validate();
    return;
  } catch (const Error& e) {
    RunConfig probe;
    for (const auto& s : settings) {
      apply_setting(probe, s.key, s.value, s.origin);
      RunConfig resolved = probe;
      resolved.resolve();
      try {
        resolved.validate();
      } catch (const Error&) {
        throw Error(ErrorKind::config, s.origin + ": " + e.what());
      }
    }
    throw Error(ErrorKind::config, e.what());
  }
}

}  // namespace

anchor::KeyframeMode RunConfig::keyframe_mode() const {
  return keyframe_interval > 0 ? anchor::KeyframeMode::fixed(keyframe_interval)
                               : anchor::KeyframeMode::random(keyframe_n_interior);
}

void RunConfig::resolve() {
  model.height = data.height;
  model.width = data.width;
  model.frames = data.frames;
  model.channels = data.channels;
  degrade.workers = workers;
  fidelity.workers = workers;
  fidelity.seed = seed;
  train.seed = seed;
  train.workers = workers;
  train.keyframes = keyframe_mode();
  train.degrade = degrade;
  train.fidelity = fidelity;
}

void RunConfig::validate() const {
  const auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::config, msg);
  };
  check(workers >= 1, "workers must be at least 1");
  check(clips >= 1, "data.clips must be at least 1");
  try {
    data.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  check(keyframe_interval >= 0, "keyframe.interval must be non-negative");
  if (keyframe_interval > 0) check_interval(data.frames - 1, keyframe_interval, "keyframe.interval");
  check(keyframe_n_interior >= 0 && keyframe_n_interior <= data.frames - 2,
        "keyframe.n_interior must lie in [0, data.frames - 2]");
  model.validate();
  train.validate();
  check(log_every >= 1, "train.log_every must be positive");
  check(infer_interval >= 1, "infer.interval must be positive");
  check(infer_steps >= 1 && infer_steps <= model.schedule_steps, "infer.steps must lie in [1, schedule.steps]");
  check(ablate_cases >= 1, "ablate.cases must be positive");
  check(ablate_frames >= data.frames, "ablate.frames must be at least data.frames");
  for (int i : ablate_intervals) check_interval(ablate_frames - 1, i, "ablate.intervals");
  check(ablate_band >= 0.0, "ablate.band must be non-negative");
  check(ablate_jitter >= 0.0, "ablate.jitter must be non-negative");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back({f.key, f.doc});
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& origin) {
  const Field* f = find_field(key);
  if (!f) fail(ErrorKind::config, origin + ": unknown key '" + key + "'");
  try {
    f->set(cfg, value);
  } catch (const BadValue& e) {
    fail(ErrorKind::config, origin + ": " + key + ": " + e.message);
  }
}

std::string get_setting(const RunConfig& cfg, const std::string& key) {
  const Field* f = find_field(key);
  if (!f) fail(ErrorKind::config, "unknown key '" + key + "'");
  return f->get(cfg);
}

RunConfig parse_config(const std::string& text, const Overrides& overrides) {
  RunConfig cfg;
  std::map<std::string, std::string> origins;
  std::vector<Setting> settings;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string origin = "line " + std::to_string(number);
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, origin + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    if (origins.count(key)) fail(ErrorKind::config, origin + ": duplicate key '" + key + "'");
    settings.push_back({key, trim(t.substr(eq + 1)), origin});
    apply_setting(cfg, key, settings.back().value, origin);
    origins[key] = origin;
  }
  for (const auto& [key, value] : overrides) {
    const std::string origin = "--set " + key;
    apply_setting(cfg, key, value, origin);
    settings.push_back({key, value, origin});
  }
  validate_settings(cfg, settings);
  return cfg;
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), overrides);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string snapshot(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(cfg) + "\n";
  return out;
}

std::vector<int> suggest_intervals(int last_index) {
  std::vector<int> good, all;
  for (int d = 1; d <= last_index; ++d) {
    if (last_index % d != 0) continue;
    all.push_back(d);
    const int segments = last_index / d;
    if (segments >= 4 && segments <= 10) good.push_back(d);
  }
  return good.empty() ? all : good;
}

void check_interval(int last_index, int interval, const std::string& where) {
  if (interval >= 1 && interval <= last_index && last_index % interval == 0) return;
  std::string s;
  for (int d : suggest_intervals(last_index)) s += (s.empty() ? "" : "/") + std::to_string(d);
  fail(ErrorKind::config, where + "=" + std::to_string(interval) + " does not divide " + std::to_string(last_index) +
                              " (" + std::to_string(last_index + 1) + " frames); try " + s);
}

}  // namespace nova
