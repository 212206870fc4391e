#include "memosort/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "memosort/rng.hpp"

namespace memosort::synth {
namespace {

constexpr double kPi = 3.14159265358979323846;

double lerp(double u, double lo, double hi) { return lo + u * (hi - lo); }

// Reflect x into [lo, hi] (triangle wave), the bounce off the arena walls.
double fold(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double t = std::fmod(x - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

Motion draw_motion(Rng& rng, const ScenarioConfig& cfg, Regime regime) {
  double u[16];
  for (double& v : u) v = rng.uniform();
  Motion m;
  m.regime = regime;
  m.w0 = lerp(u[0], 30.0, 80.0);
  m.h0 = lerp(u[1], 50.0, 130.0);
  m.x0 = lerp(u[2], 0.1, 0.9) * cfg.arena_w;
  m.y0 = lerp(u[3], 0.1, 0.9) * cfg.arena_h;
  switch (regime) {
    case Regime::kConstantVelocity:
      m.a = lerp(u[4], -6.0, 6.0);
      m.b = lerp(u[5], -4.0, 4.0);
      break;
    case Regime::kCircular:
      m.a = lerp(u[4], 40.0, 200.0);
      m.b = (u[6] < 0.5 ? -1.0 : 1.0) * lerp(u[5], 0.05, 0.25);
      m.c = 2.0 * kPi * u[7];
      break;
    case Regime::kFigureSpin:
      m.a = lerp(u[4], 40.0, 120.0);
      m.b = lerp(u[5], 30.0, 90.0);
      m.c = lerp(u[6], 0.08, 0.2);
      m.d = 2.0 * kPi * u[7];
      m.e = lerp(u[8], -2.0, 2.0);
      m.f = lerp(u[9], -1.5, 1.5);
      break;
    case Regime::kStopAndDash:
      m.a = 10.0 + std::floor(u[4] * 20.0);
      m.b = lerp(u[5], 0.3, 0.7);
      m.c = lerp(u[6], -8.0, 8.0);
      m.d = lerp(u[7], -5.0, 5.0);
      break;
  }
  return m;
}

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double h =
      std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kConstantVelocity: return "constant_velocity";
    case Regime::kCircular: return "circular";
    case Regime::kFigureSpin: return "figure_spin";
    case Regime::kStopAndDash: return "stop_and_dash";
  }
  return "unknown";
}

BBox truth_box(const Motion& m, int frame, double arena_w, double arena_h) {
  const double t = frame;
  double cx = m.x0, cy = m.y0, w = m.w0, h = m.h0;
  switch (m.regime) {
    case Regime::kConstantVelocity:
      cx += m.a * t;
      cy += m.b * t;
      break;
    case Regime::kCircular:
      cx += m.a * std::cos(m.b * t + m.c);
      cy += m.a * std::sin(m.b * t + m.c);
      break;
    case Regime::kFigureSpin: {
      const double th = m.c * t + m.d;
      cx += m.e * t + m.a * std::cos(th);
      cy += m.f * t + m.b * std::sin(2.0 * th);
      h *= 1.0 + 0.15 * std::sin(th);
      break;
    }
    case Regime::kStopAndDash: {
      const int period = std::max(2, static_cast<int>(std::lround(m.a)));
      const int stopped = std::clamp(
          static_cast<int>(std::lround(m.b * period)), 0, period - 1);
      const int rem = frame % period;
      const double moving =
          (frame / period) * (period - stopped) + std::max(0, rem - stopped);
      cx += m.c * moving;
      cy += m.d * moving;
      break;
    }
  }
  w = std::min(w, arena_w);
  h = std::min(h, arena_h);
  return BBox(fold(cx, 0.5 * w, arena_w - 0.5 * w),
              fold(cy, 0.5 * h, arena_h - 0.5 * h), w, h);
}

void ScenarioConfig::validate() const {
  if (!(arena_w > 0.0) || !(arena_h > 0.0)) {
    throw std::invalid_argument("scenario: arena dimensions must be positive");
  }
  if (frames < 1) throw std::invalid_argument("scenario: need >= 1 frame");
  const int n_targets =
      explicit_targets.empty() ? targets
                               : static_cast<int>(explicit_targets.size());
  if (n_targets < 0) throw std::invalid_argument("scenario: negative targets");
  if (explicit_targets.empty() && targets > 0 && regime_mix.empty()) {
    throw std::invalid_argument("scenario: empty regime mix");
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("scenario: negative noise sigma");
  }
  if (!(miss_rate >= 0.0) || !(miss_rate <= 1.0)) {
    throw std::invalid_argument("scenario: miss rate outside [0, 1]");
  }
  if (!(conf_floor >= 0.0) || !(conf_base <= 1.0) || conf_floor > conf_base ||
      !(conf_penalty >= 0.0)) {
    throw std::invalid_argument("scenario: bad confidence model");
  }
  for (const OcclusionEvent& ev : occlusions) {
    if (ev.target < 0 || ev.target >= n_targets || ev.begin < 0 ||
        ev.begin >= ev.end || ev.end > frames) {
      throw std::invalid_argument("scenario: occlusion event out of range");
    }
  }
  for (const Motion& m : explicit_targets) {
    if (!(m.w0 > 0.0) || !(m.h0 > 0.0)) {
      throw std::invalid_argument("scenario: explicit target needs extents");
    }
  }
}

Scenario generate(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Scenario s;
  s.seed = seed;
  s.frames = cfg.frames;
  s.arena_w = cfg.arena_w;
  s.arena_h = cfg.arena_h;

  std::vector<Motion> motions;
  if (cfg.explicit_targets.empty()) {
    motions.reserve(cfg.targets);
    for (int k = 0; k < cfg.targets; ++k) {
      const Regime regime = cfg.regime_mix[k % cfg.regime_mix.size()];
      motions.push_back(draw_motion(rng, cfg, regime));
    }
  } else {
    motions = cfg.explicit_targets;
  }
  const int n = static_cast<int>(motions.size());
  for (const Motion& m : motions) s.regimes.push_back(m.regime);

  s.truth.assign(n, {});
  for (int k = 0; k < n; ++k) {
    s.truth[k].reserve(cfg.frames);
    for (int f = 0; f < cfg.frames; ++f) {
      s.truth[k].push_back(truth_box(motions[k], f, cfg.arena_w, cfg.arena_h));
    }
  }

  s.detections.assign(cfg.frames, {});
  s.det_target.assign(cfg.frames, {});
  for (int f = 0; f < cfg.frames; ++f) {
    for (int k = 0; k < n; ++k) {
      const double nx = rng.normal(), ny = rng.normal();
      const double nw = rng.normal(), nh = rng.normal();
      const double miss_u = rng.uniform();
      bool occluded = false;
      for (const OcclusionEvent& ev : cfg.occlusions) {
        occluded |= ev.target == k && f >= ev.begin && f < ev.end;
      }
      if (occluded || miss_u < cfg.miss_rate) continue;
      const BBox& gt = s.truth[k][f];
      const BBox box(gt.x() + cfg.noise_sigma * gt.w() * nx,
                     gt.y() + cfg.noise_sigma * gt.h() * ny,
                     std::max(gt.w() + cfg.noise_sigma * gt.w() * nw, 1.0),
                     std::max(gt.h() + cfg.noise_sigma * gt.h() * nh, 1.0));
      double covered = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == k) continue;
        covered = std::max(
            covered, intersection_area(gt, s.truth[j][f]) / gt.area());
      }
      const double score =
          std::clamp(cfg.conf_base - cfg.conf_penalty * covered,
                     cfg.conf_floor, 1.0);
      s.detections[f].push_back(Detection{box, score, f});
      s.det_target[f].push_back(k);
    }
  }
  return s;
}

std::vector<Scenario> occlusion_suite() {
  std::vector<Scenario> out;
  const auto make = [&](ScenarioConfig cfg, std::uint64_t seed,
                        const char* name) {
    Scenario s = generate(cfg, seed);
    s.name = name;
    out.push_back(std::move(s));
  };

  {  // two equal pedestrians walking through each other
    ScenarioConfig cfg;
    cfg.frames = 140;
    cfg.noise_sigma = 0.02;
    cfg.miss_rate = 0.02;
    Motion left;
    left.w0 = 60.0;
    left.h0 = 120.0;
    left.x0 = 400.0;
    left.y0 = 540.0;
    left.a = 8.0;
    Motion right = left;
    right.x0 = 1520.0;
    right.y0 = 560.0;
    right.a = -8.0;
    cfg.explicit_targets = {left, right};
    make(cfg, 101, "crossing");
  }

  for (const int len : {5, 10, 20}) {  // walker vanishes behind a pillar
    ScenarioConfig cfg;
    cfg.frames = 130;
    cfg.noise_sigma = 0.02;
    cfg.miss_rate = 0.02;
    Motion walker;
    walker.w0 = 60.0;
    walker.h0 = 110.0;
    walker.x0 = 300.0;
    walker.y0 = 500.0;
    walker.a = 10.0;
    Motion pillar;
    pillar.w0 = 70.0;
    pillar.h0 = 120.0;
    pillar.x0 = 960.0;
    pillar.y0 = 510.0;
    cfg.explicit_targets = {walker, pillar};
    const int begin = 66 - len / 2;  // centered on the pass-behind frame
    cfg.occlusions = {{0, begin, begin + len}};
    char name[32];
    std::snprintf(name, sizeof(name), "occlusion_%d", len);
    make(cfg, 101 + len, name);
  }

  {  // anti-phase dancers repeating the same jump-then-spin figure
    ScenarioConfig cfg;
    cfg.frames = 160;
    cfg.noise_sigma = 0.02;
    cfg.miss_rate = 0.02;
    Motion one;
    one.regime = Regime::kFigureSpin;
    one.w0 = 55.0;
    one.h0 = 100.0;
    one.x0 = 860.0;
    one.y0 = 540.0;
    one.a = 150.0;
    one.b = 80.0;
    one.c = 0.1;
    one.d = 0.0;
    Motion two = one;
    two.x0 = 1060.0;
    two.d = kPi;
    cfg.explicit_targets = {one, two};
    make(cfg, 131, "spin_after_jump");
  }
  return out;
}

}  // namespace memosort::synth
