#include "app.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nova/anchor.hpp"
#include "nova/denoiser/checkpoint.hpp"
#include "nova/denoiser/sample.hpp"
#include "nova/denoiser/train.hpp"
#include "nova/error.hpp"
#include "nova/fidelity.hpp"
#include "nova/metrics.hpp"
#include "nova/nvt.hpp"
#include "nova/video_io.hpp"

namespace fs = std::filesystem;

namespace nova::app {
namespace {

// Files in a run directory that are not compared on replay.
bool is_bookkeeping(const std::string& rel) {
  return rel == "manifest.txt" || rel == "snapshot.cfg" || rel == "log.txt";
}

class RunDir {
 public:
  RunDir(const Invocation& inv, bool quiet) : inv_(inv), dir_(inv.args.at("out")) {
    fs::create_directories(dir_);
    std::vector<spdlog::sink_ptr> sinks;
    sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>((dir_ / "log.txt").string(), true));
    if (!quiet) sinks.push_back(std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
    log_ = std::make_shared<spdlog::logger>("nova", sinks.begin(), sinks.end());
    log_->set_pattern("[%H:%M:%S.%e] %v");
    log_->flush_on(spdlog::level::info);
    std::ofstream(dir_ / "snapshot.cfg") << snapshot(inv.config);
    log_->info("{} -> {}", inv.command, dir_.string());
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& rel) const { return dir_ / rel; }
  spdlog::logger& log() { return *log_; }

  void finish() {
    Manifest m;
    m.set("command", inv_.command);
    for (const auto& [k, v] : inv_.args)
      if (k != "out") m.set("arg." + k, v);
    const Manifest cfg = Manifest::parse(snapshot(inv_.config));
    m.merge(cfg, "config.");
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir_))
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir_).generic_string());
    std::sort(files.begin(), files.end());
    for (const auto& rel : files)
      if (!is_bookkeeping(rel)) m.set("output." + rel, file_digest(dir_ / rel));
    m.write(dir_ / "manifest.txt");
    log_->info("done; {} outputs recorded in manifest.txt", files.size());
    log_->flush();
  }

 private:
  const Invocation& inv_;
  fs::path dir_;
  std::shared_ptr<spdlog::logger> log_;
};

const std::string& arg(const Invocation& inv, const std::string& name) {
  const auto it = inv.args.find(name);
  if (it == inv.args.end()) fail(ErrorKind::config, inv.command + ": missing --" + name);
  return it->second;
}

std::optional<std::string> opt_arg(const Invocation& inv, const std::string& name) {
  const auto it = inv.args.find(name);
  if (it == inv.args.end()) return std::nullopt;
  return it->second;
}

int int_arg(const Invocation& inv, const std::string& name) {
  const std::string& v = arg(inv, name);
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos == v.size()) return out;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::config, inv.command + ": --" + name + " expects an integer, got '" + v + "'");
}

void save_both(const Video& v, const fs::path& dir, const std::string& name) {
  save_video(v, dir / (name + ".nvt"), VideoFormat::container);
  save_video(v, dir / name, VideoFormat::frames);
}

void save_masks_both(const MaskSequence& m, const fs::path& dir, const std::string& name) {
  save_masks(m, dir / (name + ".nvt"), VideoFormat::container);
  save_masks(m, dir / name, VideoFormat::frames);
}

Image load_frame(const fs::path& p) {
  if (p.extension() == ".png") return load_png(p);
  return load_video(p).frame(0);
}

denoiser::SampleConfig sample_config(const RunConfig& cfg, std::uint64_t seed) {
  denoiser::SampleConfig sc;
  sc.steps = cfg.infer_steps;
  sc.seed = seed;
  sc.clip_x0 = cfg.infer_clip_x0;
  return sc;
}

std::vector<Video> dataset_clips(const Invocation& inv, const RunConfig& cfg) {
  if (const auto data = opt_arg(inv, "data")) return load_collection(*data);
  return shapes::generate_dataset(cfg.data, cfg.clips, cfg.seed);
}

denoiser::TrainResult train_model(const RunConfig& cfg, const std::vector<Video>& clips, spdlog::logger* log) {
  const auto params = denoiser::init_params<float>(cfg.model, cfg.seed);
  return denoiser::train(clips, params, cfg.train, [&](int step, double loss) {
    if (log && (step % cfg.log_every == 0 || step + 1 == cfg.train.steps)) log->info("step {} loss {:.6f}", step, loss);
  });
}

// ---------------------------------------------------------------- commands

void cmd_synth_source(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const Video target = load_video(arg(inv, "target"));
  const std::vector<Video> pool = load_collection(arg(inv, "pool"));
  fidelity::FidelityConfig fc = cfg.fidelity;
  fc.seed = cfg.seed;
  const fidelity::PseudoSource ps = fidelity::synth_pseudo_source(target, pool, fc);
  save_both(ps.video, run.dir(), "source");
  save_masks_both(ps.masks, run.dir(), "masks");
  ps.log.write(run.path("sampled.txt"));
  run.log().info("pseudo-source: {} frames, pool of {}", ps.video.length(), pool.size());
}

void cmd_synth_anchor(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const Video target = load_video(arg(inv, "target"));
  anchor::KeyframeMode mode = cfg.keyframe_mode();
  if (inv.args.count("interval")) {
    const int interval = int_arg(inv, "interval");
    check_interval(target.last_index(), interval, "--interval");
    mode = anchor::KeyframeMode::fixed(interval);
  } else if (inv.args.count("n-interior")) {
    mode = anchor::KeyframeMode::random(int_arg(inv, "n-interior"));
  } else if (mode.kind == anchor::KeyframeMode::Kind::fixed) {
    check_interval(target.last_index(), mode.value, "keyframe.interval");
  }
  const anchor::DegradedReference ref = anchor::build_degraded_reference(target, cfg.degrade, mode, Rng(cfg.seed));
  save_both(ref.video, run.dir(), "reference");
  ref.manifest().write(run.path("degradation.txt"));
  run.log().info("reference with {} keyframes", ref.keyframes.size());
}

void cmd_make_dataset(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const int count = inv.args.count("count") ? int_arg(inv, "count") : cfg.clips;
  if (count < 1) fail(ErrorKind::config, "make-dataset: --count must be positive");
  const std::vector<Video> clips = shapes::generate_dataset(cfg.data, count, cfg.seed);
  fs::create_directories(run.path("clips"));
  for (std::size_t i = 0; i < clips.size(); ++i) {
    std::ostringstream name;
    name << "clip_" << std::setw(5) << std::setfill('0') << i << ".nvt";
    save_video(clips[i], run.path("clips") / name.str(), VideoFormat::container);
  }
  run.log().info("{} clips of {}x{}x{}", clips.size(), cfg.data.frames, cfg.data.height, cfg.data.width);
}

void cmd_train(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const std::vector<Video> clips = dataset_clips(inv, cfg);
  run.log().info("training on {} clips for {} steps", clips.size(), cfg.train.steps);
  const denoiser::TrainResult r = train_model(cfg, clips, &run.log());
  denoiser::save_checkpoint(run.path("checkpoint.nvt"), r.params);
  denoiser::write_loss_csv(run.path("loss.csv"), r.losses);
  const auto s = denoiser::smooth(r.losses, cfg.train.smooth_window);
  const std::size_t first = std::min<std::size_t>(s.size(), static_cast<std::size_t>(cfg.train.smooth_window)) - 1;
  Manifest summary;
  summary.set("initial_smoothed_loss", s[first]);
  summary.set("final_smoothed_loss", s.back());
  summary.write(run.path("summary.txt"));
  run.log().info("smoothed loss {:.5f} -> {:.5f}", s[first], s.back());
}

void cmd_infer(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const Video source = load_video(arg(inv, "source"));
  const int interval = inv.args.count("interval") ? int_arg(inv, "interval") : cfg.infer_interval;
  check_interval(source.last_index(), interval, "--interval");
  std::optional<MaskSequence> masks;
  if (const auto m = opt_arg(inv, "mask")) masks = load_masks(*m);
  std::optional<Video> truth;
  if (const auto t = opt_arg(inv, "truth")) truth = load_video(*t);
  const std::string editor_id = arg(inv, "editor");
  const auto editor = inference::make_editor(editor_id, cfg.seed, truth);
  const auto params = denoiser::load_checkpoint(arg(inv, "checkpoint"));
  if (params.config.height != source.height() || params.config.width != source.width() ||
      params.config.channels != source.channels())
    fail(ErrorKind::data, "infer: source raster differs from the checkpoint's training raster");

  inference::EditRequest req{source, KeyframeSet::fixed_interval(source.last_index(), interval), arg(inv, "prompt"),
                             masks, editor_id};
  inference::RunOptions ro;
  ro.mode = cfg.infer_mode;
  ro.sampling = sample_config(cfg, cfg.seed);
  ro.workers = cfg.workers;
  const auto schedule = denoiser::NoiseSchedule::cosine(params.config.schedule_steps);
  const inference::EditResult r = inference::run_edit(req, *editor, params, schedule, ro);
  save_both(r.video, run.dir(), "edited");
  save_video(r.reference, run.path("reference.nvt"), VideoFormat::container);
  std::vector<TensorBlob> keys;
  for (const auto& [k, frame] : r.keyframes) keys.push_back(to_blob(Video({frame, frame}), "keyframe_" + std::to_string(k)));
  write_nvt(run.path("keyframes.nvt"), keys);
  r.manifest.write(run.path("edit.txt"));
  run.log().info("edited {} frames with {} keyframes", r.video.length(), req.keyframes.size());
}

nlohmann::json series_json(const metrics::Series& s) { return {{"mean", s.mean}, {"per_frame", s.per_frame}}; }

void cmd_eval(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const Video gen = load_video(arg(inv, "gen"));
  const Video src = load_video(arg(inv, "src"));
  std::optional<MaskSequence> mask;
  if (const auto m = opt_arg(inv, "mask")) mask = load_masks(*m);
  std::optional<Image> first;
  if (cfg.eval_tc_reference == "edited_first")
    if (const auto f = opt_arg(inv, "first-edit")) first = load_frame(*f);
  const metrics::ToyEmbedder embedder;
  metrics::EvalInputs in{gen, src, mask ? &*mask : nullptr, first ? &*first : nullptr,
                         mask ? opt_arg(inv, "mask").value() : "none"};
  const metrics::MetricReport r = metrics::evaluate(in, embedder);

  nlohmann::json j;
  j["embedder"] = r.embedder;
  j["mask_source"] = r.mask_source;
  j["tc_reference"] = r.tc_reference;
  j["frames"] = r.frames;
  j["tc"] = series_json(r.tc);
  j["fc"] = series_json(r.fc);
  j["psnr"] = r.psnr;
  if (r.bg_ssim) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& v : r.bg_ssim->per_frame) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    j["bg_ssim"] = {{"mean", r.bg_ssim->mean}, {"per_frame", per}};
    j["background_psnr"] = *r.background_psnr;
  } else {
    j["bg_ssim"] = nullptr;
    j["background_psnr"] = nullptr;
  }
  const std::string name = opt_arg(inv, "report").value_or("report.json");
  std::ofstream(run.path(name)) << j.dump(2) << '\n';
  run.log().info("TC {:.4f} FC {:.4f} PSNR {:.2f}", r.tc.mean, r.fc.mean, r.psnr);
}

void cmd_ablate(const Invocation& inv, RunDir& run) {
  const RunConfig& cfg = inv.config;
  const auto load_or_train = [&](const std::string& flag, denoiser::DenseMode dense) {
    if (const auto ck = opt_arg(inv, flag)) return denoiser::load_checkpoint(*ck);
    RunConfig variant = cfg;
    variant.model.dense = dense;
    run.log().info("training variant dense={}", denoiser::to_string(dense));
    const auto clips = dataset_clips(inv, variant);
    auto r = train_model(variant, clips, &run.log());
    denoiser::save_checkpoint(run.path(std::string("checkpoint_") + denoiser::to_string(dense) + ".nvt"), r.params);
    return r.params;
  };
  const auto full = load_or_train("checkpoint-full", denoiser::DenseMode::independent);
  const auto no_dense = load_or_train("checkpoint-no-dense", denoiser::DenseMode::off);

  std::ostringstream csv;
  csv << "experiment,case,variant,value\n";
  int wins = 0;
  const auto cases = ablation_cases(cfg, cfg.ablate_cases, cfg.ablate_frames, cfg.seed);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const double a = edit_background_psnr(cases[i], full, cfg, cfg.infer_interval, cfg.seed);
    const double b = edit_background_psnr(cases[i], no_dense, cfg, cfg.infer_interval, cfg.seed);
    wins += a > b;
    csv << "dense," << i << ",full," << format_double(a) << "\n";
    csv << "dense," << i << ",no_dense," << format_double(b) << "\n";
    run.log().info("dense ablation case {}: full {:.2f} dB, no-dense {:.2f} dB", i, a, b);
  }
  const auto rows = consistency_ablation(cfg, cfg.ablate_cases, cfg.ablate_frames, cfg.infer_interval,
                                         cfg.ablate_jitter, cfg.seed);
  int lower = 0;
  for (const auto& r : rows) {
    lower += r.anchored < r.independent;
    csv << "consistency," << r.case_index << ",anchored," << format_double(r.anchored) << "\n";
    csv << "consistency," << r.case_index << ",independent," << format_double(r.independent) << "\n";
  }
  std::vector<shapes::EditCase> recolor;
  for (int i = 0; i < cfg.ablate_cases; ++i) {
    shapes::ClipSpec spec = cfg.data;
    spec.frames = cfg.ablate_frames;
    recolor.push_back(shapes::make_edit_case(spec, shapes::EditKind::recolor,
                                             Rng(cfg.seed).fork(Stage::fixture, 1000 + static_cast<std::uint64_t>(i))));
  }
  const auto sweep = interval_sweep(recolor, full, cfg, cfg.ablate_intervals, cfg.seed);
  double base = 0.0;
  for (const auto& r : sweep)
    if (r.interval == 10) base = r.bg_ssim;
  bool within = true;
  for (const auto& r : sweep) {
    csv << "interval," << r.interval << ",bg_ssim," << format_double(r.bg_ssim) << "\n";
    within = within && std::abs(r.bg_ssim - base) <= cfg.ablate_band;
  }
  std::ofstream(run.path("ablation.csv")) << csv.str();

  Manifest verdict;
  verdict.set("dense.full_wins", wins);
  verdict.set("dense.cases", static_cast<int>(cases.size()));
  verdict.set("dense.pass", 5 * wins >= 4 * static_cast<int>(cases.size()));
  verdict.set("consistency.anchored_lower", lower);
  verdict.set("consistency.pass", lower == static_cast<int>(rows.size()));
  verdict.set("interval.pass", within);
  verdict.write(run.path("verdict.txt"));
  run.log().info("dense: full wins {}/{}; consistency: anchored lower {}/{}; intervals within band: {}", wins,
                 cases.size(), lower, rows.size(), within ? "yes" : "no");
}

using Command = void (*)(const Invocation&, RunDir&);

Command find_command(const std::string& name) {
  static const std::map<std::string, Command> table = {
      {"synth-source", cmd_synth_source}, {"synth-anchor", cmd_synth_anchor}, {"make-dataset", cmd_make_dataset},
      {"train", cmd_train},               {"infer", cmd_infer},               {"eval", cmd_eval},
      {"ablate", cmd_ablate},
  };
  const auto it = table.find(name);
  if (it == table.end()) fail(ErrorKind::config, "unknown command '" + name + "'");
  return it->second;
}

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::vector<Video> load_collection(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::data, "not a directory: " + dir.string());
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() || e.path().extension() == ".nvt") entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  if (entries.empty()) fail(ErrorKind::data, "no videos in " + dir.string());
  std::vector<Video> out;
  for (const auto& p : entries) out.push_back(load_video(p));
  return out;
}

RunConfig resolve_config(const std::optional<std::string>& config_path, const Overrides& sets,
                         const std::optional<std::uint64_t>& seed_flag) {
  Overrides all = sets;
  bool seeded = seed_flag.has_value();
  for (const auto& kv : sets) seeded = seeded || kv.first == "seed";
  std::string text;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) fail(ErrorKind::config, "cannot read config file " + *config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto b = line.find_first_not_of(" \t");
      if (b != std::string::npos && line.compare(b, 4, "seed") == 0) {
        const auto rest = line.find_first_not_of(" \t", b + 4);
        seeded = seeded || (rest != std::string::npos && line[rest] == '=');
      }
    }
  }
  if (seed_flag) {
    all.emplace_back("seed", std::to_string(*seed_flag));
  } else if (!seeded) {
    if (const char* env = std::getenv("NOVA_SEED")) all.emplace_back("seed", env);
  }
  try {
    return parse_config(text, all);
  } catch (const Error& e) {
    throw Error(e.kind(), (config_path ? *config_path + ": " : std::string()) + e.what());
  }
}

void execute(const Invocation& inv, bool quiet) {
  const Command cmd = find_command(inv.command);
  arg(inv, "out");
  RunDir run(inv, quiet);
  try {
    cmd(inv, run);
  } catch (const std::exception& e) {
    run.log().error("{}", e.what());
    throw;
  }
  run.finish();
}

ReplayReport replay(const fs::path& manifest_path, const fs::path& out, bool quiet) {
  const Manifest m = Manifest::read(manifest_path);
  Invocation inv;
  inv.command = m.require("command");
  std::string cfg_text;
  std::map<std::string, std::string> expected;
  for (const auto& [k, v] : m.entries()) {
    if (k.rfind("arg.", 0) == 0) inv.args[k.substr(4)] = v;
    if (k.rfind("config.", 0) == 0) cfg_text += k.substr(7) + "=" + v + "\n";
    if (k.rfind("output.", 0) == 0) expected[k.substr(7)] = v;
  }
  inv.config = parse_config(cfg_text);
  inv.args["out"] = out.string();
  execute(inv, quiet);

  ReplayReport report;
  for (const auto& [rel, digest] : expected) {
    const fs::path p = out / rel;
    if (!fs::exists(p))
      report.missing.push_back(rel);
    else if (file_digest(p) == digest)
      report.identical.push_back(rel);
    else
      report.differing.push_back(rel);
  }
  return report;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("nova");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, const char* const* argv) {
  CLI::App cli{"Sparse-control / dense-synthesis video editing toolkit"};
  cli.require_subcommand(1);
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::map<std::string, std::string> values;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", sets, "override a config key (key=value), repeatable");
    sub->add_option("--seed", seed, "master seed (overrides config and NOVA_SEED)");
    sub->add_flag("--quiet", quiet, "log to the run directory only");
  };
  const auto option = [&](CLI::App* sub, const std::string& name, const std::string& help, bool required) {
    auto* o = sub->add_option_function<std::string>("--" + name, [&values, name](const std::string& v) { values[name] = v; },
                                                    help);
    if (required) o->required();
  };

  auto* synth_source = cli.add_subcommand("synth-source", "composite a moving filler patch onto a target video");
  option(synth_source, "target", "target video (frame directory or .nvt)", true);
  option(synth_source, "pool", "directory of filler videos", true);
  option(synth_source, "out", "run directory", true);

  auto* synth_anchor = cli.add_subcommand("synth-anchor", "build a degraded, keyframe-interpolated reference");
  option(synth_anchor, "target", "target video (frame directory or .nvt)", true);
  option(synth_anchor, "interval", "fixed keyframe interval", false);
  option(synth_anchor, "n-interior", "number of random interior keyframes", false);
  option(synth_anchor, "out", "run directory", true);
  synth_anchor->get_option("--interval")->excludes(synth_anchor->get_option("--n-interior"));

  auto* make_dataset = cli.add_subcommand("make-dataset", "generate procedural moving-shape clips");
  option(make_dataset, "count", "number of clips (default data.clips)", false);
  option(make_dataset, "out", "run directory", true);

  auto* train = cli.add_subcommand("train", "train the denoiser");
  option(train, "data", "directory of training clips (default: generate from config)", false);
  option(train, "out", "run directory", true);

  auto* infer = cli.add_subcommand("infer", "edit a video from keyframe edits");
  option(infer, "source", "source video", true);
  option(infer, "interval", "keyframe interval (default infer.interval)", false);
  option(infer, "editor", "identity | recolor[:jitter] | paste", true);
  option(infer, "prompt", "editor prompt, e.g. recolor:#ff0000", true);
  option(infer, "checkpoint", "trained checkpoint (.nvt)", true);
  option(infer, "mask", "per-frame edit masks", false);
  option(infer, "truth", "clean video for paste removal", false);
  option(infer, "out", "run directory", true);

  auto* eval = cli.add_subcommand("eval", "compute TC, FC, BG-SSIM and PSNR");
  option(eval, "gen", "generated video", true);
  option(eval, "src", "source video", true);
  option(eval, "mask", "edit masks (1 = edited)", false);
  option(eval, "first-edit", "edited first frame (.png or .nvt)", false);
  option(eval, "out", "report path (.json) or run directory", true);

  auto* ablate = cli.add_subcommand("ablate", "dense-branch, keyframe-editing and interval ablations");
  option(ablate, "checkpoint-full", "trained full model (default: train from config)", false);
  option(ablate, "checkpoint-no-dense", "trained model without dense branch (default: train from config)", false);
  option(ablate, "data", "training clips when training variants", false);
  option(ablate, "out", "run directory", true);

  auto* replay_cmd = cli.add_subcommand("replay", "re-run a recorded command and compare outputs");
  option(replay_cmd, "manifest", "manifest.txt of a previous run", true);
  option(replay_cmd, "out", "run directory for the re-run", true);

  for (auto* sub : {synth_source, synth_anchor, make_dataset, train, infer, eval, ablate}) common(sub);
  replay_cmd->add_flag("--quiet", quiet, "log to the run directory only");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return exit_code(ErrorKind::config);
  }

  try {
    CLI::App* sub = cli.get_subcommands().front();
    if (sub == replay_cmd) {
      const ReplayReport r = replay(values.at("manifest"), values.at("out"), quiet);
      for (const auto& f : r.differing) std::cerr << "replay: output differs: " << f << "\n";
      for (const auto& f : r.missing) std::cerr << "replay: output missing: " << f << "\n";
      std::cerr << "replay: " << r.identical.size() << " outputs identical, " << r.differing.size() << " differ, "
                << r.missing.size() << " missing\n";
      return r.ok() ? 0 : exit_code(ErrorKind::data);
    }
    Overrides overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(ErrorKind::config, "--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    Invocation inv;
    inv.command = sub->get_name();
    inv.config = resolve_config(config_path, overrides, seed);
    for (auto [k, v] : values) {
      // Paths are stored absolute so a manifest replays from any directory.
      if (k != "interval" && k != "n-interior" && k != "count" && k != "editor" && k != "prompt" && !v.empty())
        v = fs::absolute(v).lexically_normal().string();
      inv.args[k] = v;
    }
    if (inv.command == "eval" && fs::path(inv.args["out"]).extension() == ".json") {
      const fs::path report = inv.args["out"];
      inv.args["report"] = report.filename().string();
      inv.args["out"] = report.parent_path().string();
    }
    execute(inv, quiet);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return exit_code(ErrorKind::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ------------------------------------------------------------- ablations

std::vector<shapes::EditCase> ablation_cases(const RunConfig& cfg, int count, int frames, std::uint64_t seed) {
  shapes::ClipSpec spec = cfg.data;
  spec.frames = frames;
  std::vector<shapes::EditCase> out;
  for (int i = 0; i < count; ++i) {
    const auto kind = i % 2 == 0 ? shapes::EditKind::add : shapes::EditKind::remove;
    out.push_back(shapes::make_edit_case(spec, kind, Rng(seed).fork(Stage::fixture, static_cast<std::uint64_t>(i))));
  }
  return out;
}

double edit_background_psnr(const shapes::EditCase& ec, const denoiser::DenoiserParams<float>& params,
                            const RunConfig& cfg, int interval, std::uint64_t seed) {
  const inference::PasteSpriteEditor editor(ec.truth);
  inference::EditRequest req{ec.source, KeyframeSet::fixed_interval(ec.source.last_index(), interval), ec.prompt,
                             ec.mask, "paste"};
  inference::RunOptions ro;
  ro.sampling = sample_config(cfg, seed);
  const auto schedule = denoiser::NoiseSchedule::cosine(params.config.schedule_steps);
  const auto r = inference::run_edit(req, editor, params, schedule, ro);
  return metrics::background_psnr(r.video, ec.truth, ec.mask);
}

std::vector<ConsistencyRow> consistency_ablation(const RunConfig& cfg, int count, int frames, int interval,
                                                 double jitter, std::uint64_t seed) {
  shapes::ClipSpec spec = cfg.data;
  spec.frames = frames;
  std::vector<ConsistencyRow> rows;
  for (int i = 0; i < count; ++i) {
    const Rng rng = Rng(seed).fork(Stage::fixture, 2000 + static_cast<std::uint64_t>(i));
    const shapes::EditCase ec = shapes::make_edit_case(spec, shapes::EditKind::recolor, rng);
    const inference::RecolorEditor editor(jitter, rng.fork(1).next_u64());
    inference::EditRequest req{ec.source, KeyframeSet::fixed_interval(ec.source.last_index(), interval), ec.prompt,
                               ec.mask, "recolor"};
    ConsistencyRow row;
    row.case_index = i;
    row.anchored = inference::keyframe_hue_variance(
        inference::edit_keyframes(req, editor, inference::EditingMode::anchored), ec.mask);
    row.independent = inference::keyframe_hue_variance(
        inference::edit_keyframes(req, editor, inference::EditingMode::independent), ec.mask);
    rows.push_back(row);
  }
  return rows;
}

std::vector<IntervalRow> interval_sweep(const std::vector<shapes::EditCase>& cases,
                                        const denoiser::DenoiserParams<float>& params, const RunConfig& cfg,
                                        const std::vector<int>& intervals, std::uint64_t seed) {
  const auto schedule = denoiser::NoiseSchedule::cosine(params.config.schedule_steps);
  std::vector<IntervalRow> rows;
  for (const int interval : intervals) {
    double sum = 0.0, psnr = 0.0;
    int n = 0;
    for (const auto& ec : cases) {
      const inference::RecolorEditor editor;
      inference::EditRequest req{ec.source, KeyframeSet::fixed_interval(ec.source.last_index(), interval), ec.prompt,
                                 ec.mask, "recolor"};
      inference::RunOptions ro;
      ro.sampling = sample_config(cfg, seed);
      const auto r = inference::run_edit(req, editor, params, schedule, ro);
      for (int t = 0; t < r.video.length(); ++t)
        if (const auto s = metrics::masked_ssim(r.video[t], ec.source[t], ec.mask[t])) {
          sum += *s;
          ++n;
        }
      psnr += metrics::background_psnr(r.video, ec.source, ec.mask);
    }
    if (n == 0) fail(ErrorKind::data, "interval sweep: no background windows in any fixture frame");
    rows.push_back({interval, sum / n, psnr / static_cast<double>(cases.size())});
  }
  return rows;
}

}  // namespace nova::app
