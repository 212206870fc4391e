#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "memosort/mekf.hpp"
#include "memosort/pipeline.hpp"
#include "memosort/synthgen.hpp"
#include "memosort/trainer.hpp"

// JSON run configuration and scenario files. Parsing is schema-strict: every
// key must be known (errors name the full dotted path of the offender) and
// type-correct; omitted keys keep their defaults, so "{}" is the shipped
// configuration. Serialization emits every field in a fixed order with
// shortest-round-trip numbers, making serialize(parse(s)) a fixed point and
// dumps byte-stable across runs.
namespace memosort::io {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything one run needs. `weights` is a weights-file path; empty means no
// learned gates (the filter degenerates to its plain Kalman form). The
// hidden sizes only matter when a fresh model is initialized for training —
// a loaded weights file carries its own architecture.
struct RunConfig {
  std::uint64_t seed = 1;
  double frame_width = 1920.0;
  double frame_height = 1080.0;
  std::string weights;
  int lstm_hidden = 64;
  int mlp_hidden = 64;
  TrackerConfig tracker;
  NoiseConfig noise;
  train::TrainConfig train;

  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

// When MEMOSORT_SEED is set, it overrides cfg.seed and cfg.train.seed (every
// stochastic choice of a run), returning true. Non-numeric values throw.
bool apply_env_seed(RunConfig& cfg);

// Scenario files carry the full generator output — truth paths, detections,
// and each detection's source target — so training supervision can be
// rebuilt exactly. Numbers round-trip bit for bit.
std::string serialize_scenario(const synth::Scenario& sc);
synth::Scenario parse_scenario(const std::string& text);
void save_scenario(const synth::Scenario& sc, const std::string& path);
synth::Scenario load_scenario(const std::string& path);

}  // namespace memosort::io
