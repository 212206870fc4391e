#include "memosort/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

namespace memosort::io {
namespace {

using json = nlohmann::ordered_json;

// Walks one JSON object against the expected schema: known keys are consumed
// with a type check, finish() rejects whatever is left. `root` names the file
// kind in messages, `path` the dotted location of this object.
class Reader {
 public:
  Reader(const json& obj, std::string root, std::string path)
      : obj_(obj), root_(std::move(root)), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw ConfigError(root_ + ": " + where("") + " must be a JSON object");
    }
  }

  void number(const char* k, double* out) {
    const json* v = take(k);
    if (v == nullptr) {
      return;
    }
    if (!v->is_number()) {
      throw ConfigError(root_ + ": " + where(k) + " must be a number");
    }
    *out = v->get<double>();
  }

  void integer(const char* k, int* out) {
    const json* v = take(k);
    if (v == nullptr) {
      return;
    }
    if (!v->is_number_integer()) {
      throw ConfigError(root_ + ": " + where(k) + " must be an integer");
    }
    const std::int64_t raw = v->get<std::int64_t>();
    if (raw < std::numeric_limits<int>::min() ||
        raw > std::numeric_limits<int>::max()) {
      throw ConfigError(root_ + ": " + where(k) + " is out of range");
    }
    *out = static_cast<int>(raw);
  }

  void uint64(const char* k, std::uint64_t* out) {
    const json* v = take(k);
    if (v == nullptr) {
      return;
    }
    if (!v->is_number_integer() ||
        (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
      throw ConfigError(root_ + ": " + where(k) +
                        " must be a non-negative integer");
    }
    *out = v->get<std::uint64_t>();
  }

  void text(const char* k, std::string* out) {
    const json* v = take(k);
    if (v == nullptr) {
      return;
    }
    if (!v->is_string()) {
      throw ConfigError(root_ + ": " + where(k) + " must be a string");
    }
    *out = v->get<std::string>();
  }

  // Nested object, or nullptr when absent.
  const json* child(const char* k) { return take(k); }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (seen_.count(item.key()) == 0) {
        throw ConfigError(root_ + ": unknown key \"" + where(item.key().c_str()) +
                          "\"");
      }
    }
  }

  std::string where(const char* k) const {
    if (path_.empty()) {
      return *k == '\0' ? std::string("top level") : std::string(k);
    }
    return *k == '\0' ? path_ : path_ + "." + k;
  }

 private:
  const json* take(const char* k) {
    seen_.insert(k);
    const auto it = obj_.find(k);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& obj_;
  std::string root_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_text(const std::string& text, const char* root) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(root) + ": " + e.what());
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path + ": cannot open");
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

void spill(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError(path + ": cannot open for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw ConfigError(path + ": write failed");
  }
}

json box_json(const BBox& b) {
  return json::array({b.x(), b.y(), b.w(), b.h()});
}

BBox box_from_json(const json& v, const std::string& at) {
  if (!v.is_array() || v.size() != 4 || !v[0].is_number() ||
      !v[1].is_number() || !v[2].is_number() || !v[3].is_number()) {
    throw ConfigError("scenario: " + at + " must be a [x, y, w, h] array");
  }
  try {
    return BBox(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                v[3].get<double>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario: " + at + ": " + e.what());
  }
}

synth::Regime regime_from_name(const std::string& name) {
  for (synth::Regime r :
       {synth::Regime::kConstantVelocity, synth::Regime::kCircular,
        synth::Regime::kFigureSpin, synth::Regime::kStopAndDash}) {
    if (name == synth::regime_name(r)) {
      return r;
    }
  }
  throw ConfigError("scenario: unknown regime \"" + name + "\"");
}

}  // namespace

void RunConfig::validate() const {
  if (!(frame_width > 0.0) || !(frame_height > 0.0) ||
      !std::isfinite(frame_width) || !std::isfinite(frame_height)) {
    throw std::invalid_argument(
        "config: frame dimensions must be positive and finite");
  }
  if (lstm_hidden < 1 || mlp_hidden < 1) {
    throw std::invalid_argument("config: hidden sizes must be >= 1");
  }
  tracker.validate();
  noise.validate();
  train.validate();
}

RunConfig parse_config(const std::string& text) {
  const json j = parse_text(text, "config");
  RunConfig cfg;
  Reader r(j, "config", "");
  r.uint64("seed", &cfg.seed);
  r.number("frame_width", &cfg.frame_width);
  r.number("frame_height", &cfg.frame_height);
  r.text("weights", &cfg.weights);
  r.integer("lstm_hidden", &cfg.lstm_hidden);
  r.integer("mlp_hidden", &cfg.mlp_hidden);
  if (const json* t = r.child("tracker")) {
    Reader rt(*t, "config", "tracker");
    rt.number("tau_high", &cfg.tracker.tau_high);
    rt.number("tau_low", &cfg.tracker.tau_low);
    rt.number("gate_high", &cfg.tracker.gate_high);
    rt.number("gate_low", &cfg.tracker.gate_low);
    rt.integer("min_hits", &cfg.tracker.min_hits);
    rt.integer("max_age", &cfg.tracker.max_age);
    rt.number("appearance_weight", &cfg.tracker.appearance_weight);
    if (const json* m = rt.child("mat")) {
      Reader rm(*m, "config", "tracker.mat");
      rm.number("m_slow", &cfg.tracker.mat.m_slow);
      rm.number("m_fast", &cfg.tracker.mat.m_fast);
      rm.number("n_slow", &cfg.tracker.mat.n_slow);
      rm.number("n_fast", &cfg.tracker.mat.n_fast);
      rm.number("theta_center", &cfg.tracker.mat.theta_center);
      rm.number("theta_height", &cfg.tracker.mat.theta_height);
      rm.finish();
    }
    rt.finish();
  }
  if (const json* n = r.child("noise")) {
    Reader rn(*n, "config", "noise");
    rn.number("sigma_p", &cfg.noise.sigma_p);
    rn.number("sigma_v", &cfg.noise.sigma_v);
    rn.number("sigma_m", &cfg.noise.sigma_m);
    rn.number("min_extent", &cfg.noise.min_extent);
    rn.number("init_vel_factor", &cfg.noise.init_vel_factor);
    rn.finish();
  }
  if (const json* t = r.child("train")) {
    Reader rt(*t, "config", "train");
    if (const json* o = rt.child("optimizer")) {
      Reader ro(*o, "config", "train.optimizer");
      ro.number("lr", &cfg.train.opt.lr);
      ro.number("beta1", &cfg.train.opt.beta1);
      ro.number("beta2", &cfg.train.opt.beta2);
      ro.number("eps", &cfg.train.opt.eps);
      ro.number("weight_decay", &cfg.train.opt.weight_decay);
      ro.finish();
    }
    rt.integer("window", &cfg.train.window);
    rt.integer("stride", &cfg.train.stride);
    rt.number("min_coverage", &cfg.train.min_coverage);
    rt.integer("batch", &cfg.train.batch);
    rt.integer("epochs", &cfg.train.epochs);
    rt.number("alpha_pred", &cfg.train.alpha_pred);
    rt.number("alpha_meas", &cfg.train.alpha_meas);
    rt.number("val_split", &cfg.train.val_split);
    rt.number("grad_clip", &cfg.train.grad_clip);
    rt.uint64("seed", &cfg.train.seed);
    rt.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config(slurp(path));
}

std::string serialize_config(const RunConfig& cfg) {
  cfg.validate();
  json j;
  j["seed"] = cfg.seed;
  j["frame_width"] = cfg.frame_width;
  j["frame_height"] = cfg.frame_height;
  j["weights"] = cfg.weights;
  j["lstm_hidden"] = cfg.lstm_hidden;
  j["mlp_hidden"] = cfg.mlp_hidden;
  json tracker;
  tracker["tau_high"] = cfg.tracker.tau_high;
  tracker["tau_low"] = cfg.tracker.tau_low;
  tracker["gate_high"] = cfg.tracker.gate_high;
  tracker["gate_low"] = cfg.tracker.gate_low;
  tracker["min_hits"] = cfg.tracker.min_hits;
  tracker["max_age"] = cfg.tracker.max_age;
  tracker["appearance_weight"] = cfg.tracker.appearance_weight;
  json mat;
  mat["m_slow"] = cfg.tracker.mat.m_slow;
  mat["m_fast"] = cfg.tracker.mat.m_fast;
  mat["n_slow"] = cfg.tracker.mat.n_slow;
  mat["n_fast"] = cfg.tracker.mat.n_fast;
  mat["theta_center"] = cfg.tracker.mat.theta_center;
  mat["theta_height"] = cfg.tracker.mat.theta_height;
  tracker["mat"] = std::move(mat);
  j["tracker"] = std::move(tracker);
  json noise;
  noise["sigma_p"] = cfg.noise.sigma_p;
  noise["sigma_v"] = cfg.noise.sigma_v;
  noise["sigma_m"] = cfg.noise.sigma_m;
  noise["min_extent"] = cfg.noise.min_extent;
  noise["init_vel_factor"] = cfg.noise.init_vel_factor;
  j["noise"] = std::move(noise);
  json train;
  json opt;
  opt["lr"] = cfg.train.opt.lr;
  opt["beta1"] = cfg.train.opt.beta1;
  opt["beta2"] = cfg.train.opt.beta2;
  opt["eps"] = cfg.train.opt.eps;
  opt["weight_decay"] = cfg.train.opt.weight_decay;
  train["optimizer"] = std::move(opt);
  train["window"] = cfg.train.window;
  train["stride"] = cfg.train.stride;
  train["min_coverage"] = cfg.train.min_coverage;
  train["batch"] = cfg.train.batch;
  train["epochs"] = cfg.train.epochs;
  train["alpha_pred"] = cfg.train.alpha_pred;
  train["alpha_meas"] = cfg.train.alpha_meas;
  train["val_split"] = cfg.train.val_split;
  train["grad_clip"] = cfg.train.grad_clip;
  train["seed"] = cfg.train.seed;
  j["train"] = std::move(train);
  return j.dump(2) + "\n";
}

void save_config(const RunConfig& cfg, const std::string& path) {
  spill(serialize_config(cfg), path);
}

bool apply_env_seed(RunConfig& cfg) {
  const char* env = std::getenv("MEMOSORT_SEED");
  if (env == nullptr || *env == '\0') {
    return false;
  }
  const std::string s(env);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("MEMOSORT_SEED is not an unsigned integer: \"" + s +
                      "\"");
  }
  cfg.seed = v;
  cfg.train.seed = v;
  return true;
}

std::string serialize_scenario(const synth::Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["seed"] = sc.seed;
  j["frames"] = sc.frames;
  j["arena_w"] = sc.arena_w;
  j["arena_h"] = sc.arena_h;
  json regimes = json::array();
  for (synth::Regime r : sc.regimes) {
    regimes.push_back(synth::regime_name(r));
  }
  j["regimes"] = std::move(regimes);
  json truth = json::array();
  for (const auto& path : sc.truth) {
    json boxes = json::array();
    for (const BBox& b : path) {
      boxes.push_back(box_json(b));
    }
    truth.push_back(std::move(boxes));
  }
  j["truth"] = std::move(truth);
  json frames = json::array();
  for (int f = 0; f < sc.frames; ++f) {
    json dets = json::array();
    for (std::size_t i = 0; i < sc.detections[f].size(); ++i) {
      json d;
      d["box"] = box_json(sc.detections[f][i].box);
      d["score"] = sc.detections[f][i].score;
      d["target"] = sc.det_target[f][i];
      dets.push_back(std::move(d));
    }
    frames.push_back(std::move(dets));
  }
  j["detections"] = std::move(frames);
  return j.dump(2) + "\n";
}

synth::Scenario parse_scenario(const std::string& text) {
  const json j = parse_text(text, "scenario");
  synth::Scenario sc;
  Reader r(j, "scenario", "");
  r.text("name", &sc.name);
  r.uint64("seed", &sc.seed);
  r.integer("frames", &sc.frames);
  r.number("arena_w", &sc.arena_w);
  r.number("arena_h", &sc.arena_h);
  const json* regimes = r.child("regimes");
  const json* truth = r.child("truth");
  const json* frames = r.child("detections");
  r.finish();
  if (sc.frames < 0) {
    throw ConfigError("scenario: frames must be >= 0");
  }
  if (!(sc.arena_w > 0.0) || !(sc.arena_h > 0.0) ||
      !std::isfinite(sc.arena_w) || !std::isfinite(sc.arena_h)) {
    throw ConfigError("scenario: arena extents must be positive and finite");
  }
  if (regimes == nullptr || !regimes->is_array()) {
    throw ConfigError("scenario: regimes must be an array");
  }
  for (const json& v : *regimes) {
    if (!v.is_string()) {
      throw ConfigError("scenario: regimes must be an array of strings");
    }
    sc.regimes.push_back(regime_from_name(v.get<std::string>()));
  }
  if (truth == nullptr || !truth->is_array() ||
      truth->size() != sc.regimes.size()) {
    throw ConfigError("scenario: truth must be an array with one path per "
                      "regime entry");
  }
  const int n_targets = static_cast<int>(sc.regimes.size());
  for (int t = 0; t < n_targets; ++t) {
    const json& path = (*truth)[t];
    if (!path.is_array() || static_cast<int>(path.size()) != sc.frames) {
      throw ConfigError("scenario: truth[" + std::to_string(t) +
                        "] must list one box per frame");
    }
    std::vector<BBox> boxes;
    boxes.reserve(path.size());
    for (int f = 0; f < sc.frames; ++f) {
      boxes.push_back(box_from_json(
          path[f],
          "truth[" + std::to_string(t) + "][" + std::to_string(f) + "]"));
    }
    sc.truth.push_back(std::move(boxes));
  }
  if (frames == nullptr || !frames->is_array() ||
      static_cast<int>(frames->size()) != sc.frames) {
    throw ConfigError("scenario: detections must list one array per frame");
  }
  for (int f = 0; f < sc.frames; ++f) {
    const json& dets = (*frames)[f];
    if (!dets.is_array()) {
      throw ConfigError("scenario: detections[" + std::to_string(f) +
                        "] must be an array");
    }
    sc.detections.emplace_back();
    sc.det_target.emplace_back();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const std::string at =
          "detections[" + std::to_string(f) + "][" + std::to_string(i) + "]";
      Reader rd(dets[i], "scenario", at);
      double score = -1.0;
      int target = -1;
      const json* box = rd.child("box");
      rd.number("score", &score);
      rd.integer("target", &target);
      rd.finish();
      if (box == nullptr) {
        throw ConfigError("scenario: " + at + " is missing its box");
      }
      if (score < 0.0 || score > 1.0 || !std::isfinite(score)) {
        throw ConfigError("scenario: " + at + " score must be in [0, 1]");
      }
      if (target < 0 || target >= n_targets) {
        throw ConfigError("scenario: " + at + " target is out of range");
      }
      sc.detections[f].push_back(
          Detection{box_from_json(*box, at + ".box"), score, f});
      sc.det_target[f].push_back(target);
    }
  }
  return sc;
}

void save_scenario(const synth::Scenario& sc, const std::string& path) {
  spill(serialize_scenario(sc), path);
}

synth::Scenario load_scenario(const std::string& path) {
  return parse_scenario(slurp(path));
}

}  // namespace memosort::io
