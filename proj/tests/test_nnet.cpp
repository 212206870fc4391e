#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memosort/nnet.hpp"
#include "memosort/reference.hpp"
#include "memosort/rng.hpp"

using memosort::AdamW;
using memosort::AdamWConfig;
using memosort::GateWeights;
using memosort::LstmCell;
using memosort::Matrix;
using memosort::Mlp;
using memosort::Rng;
using memosort::Vector;
using memosort::WeightsError;
using memosort::reference::finite_difference_gradient;
using memosort::reference::max_rel_error;

namespace {

Vector random_vector(Rng& rng, int n, double bound = 0.5) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-bound, bound);
  return v;
}

// Loss touching every parameter: the four heads on fixed inputs plus the
// LSTM unrolled over a short sequence, all squared-norm terms.
struct CompositeProblem {
  std::vector<Vector> head_inputs;  // one per mlp1..mlp4
  std::vector<Vector> lstm_inputs;

  static CompositeProblem make(const GateWeights& w, Rng& rng, int steps) {
    CompositeProblem p;
    p.head_inputs.push_back(random_vector(rng, w.lstm_hidden()));
    p.head_inputs.push_back(random_vector(rng, w.lstm_hidden()));
    p.head_inputs.push_back(random_vector(rng, w.state_dim()));
    p.head_inputs.push_back(random_vector(rng, w.state_dim()));
    for (int t = 0; t < steps; ++t) {
      p.lstm_inputs.push_back(random_vector(rng, w.state_dim()));
    }
    return p;
  }

  double loss(const GateWeights& w) const {
    double total = 0.0;
    const Mlp* heads[] = {&w.mlp1, &w.mlp2, &w.mlp3, &w.mlp4};
    for (int k = 0; k < 4; ++k) {
      total += 0.5 * heads[k]->forward(head_inputs[k]).squaredNorm();
    }
    LstmCell::State st = LstmCell::zero_state(w.lstm_hidden());
    for (const Vector& x : lstm_inputs) {
      st = w.lstm.forward(x, st);
      total += 0.5 * st.h.squaredNorm() + 0.5 * st.c.squaredNorm();
    }
    return total;
  }

  Vector analytic_grad(const GateWeights& w) const {
    GateWeights g = GateWeights::zeros_like(w);
    const Mlp* heads[] = {&w.mlp1, &w.mlp2, &w.mlp3, &w.mlp4};
    Mlp* grads[] = {&g.mlp1, &g.mlp2, &g.mlp3, &g.mlp4};
    for (int k = 0; k < 4; ++k) {
      Mlp::Cache cache;
      const Vector y = heads[k]->forward(head_inputs[k], cache);
      heads[k]->backward(cache, y, *grads[k]);
    }
    const int steps = static_cast<int>(lstm_inputs.size());
    std::vector<LstmCell::Cache> caches(steps);
    std::vector<LstmCell::State> states(steps);
    LstmCell::State st = LstmCell::zero_state(w.lstm_hidden());
    for (int t = 0; t < steps; ++t) {
      st = w.lstm.forward(lstm_inputs[t], st, caches[t]);
      states[t] = st;
    }
    Vector gh = Vector::Zero(w.lstm_hidden());
    Vector gc = Vector::Zero(w.lstm_hidden());
    for (int t = steps - 1; t >= 0; --t) {
      gh += states[t].h;
      gc += states[t].c;
      Vector gh_prev = Vector::Zero(w.lstm_hidden());
      Vector gc_prev = Vector::Zero(w.lstm_hidden());
      w.lstm.backward(caches[t], gh, gc, g.lstm, gh_prev, gc_prev);
      gh = gh_prev;
      gc = gc_prev;
    }
    return g.to_vector();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

void replace_once(std::string& text, const std::string& from,
                  const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  text.replace(at, from.size(), to);
}

std::optional<WeightsError::Kind> load_failure_kind(const std::string& path) {
  try {
    memosort::load_weights(path);
  } catch (const WeightsError& e) {
    return e.kind;
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("mlp forward frozen cases") {
  Mlp single = Mlp::zeros({3, 3});
  single.layers[0].w = Matrix::Identity(3, 3);
  Vector x(3);
  x << 0.25, -1.0, 2.0;
  CHECK(single.forward(x) == x);

  Mlp hidden = Mlp::zeros({1, 1, 1});
  hidden.layers[0].w(0, 0) = 1.0;
  hidden.layers[1].w(0, 0) = 1.0;
  Vector half(1);
  half << 0.5;
  CHECK(hidden.forward(half)(0) ==
        doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  CHECK(hidden.forward(half)(0) == doctest::Approx(0.46212).epsilon(1e-4));

  const Mlp zero = Mlp::zeros({4, 6, 2});
  CHECK(zero.forward(Vector::Ones(4)).norm() == 0.0);
  CHECK_THROWS_AS(zero.forward(Vector::Ones(3)), std::invalid_argument);
}

TEST_CASE("lstm frozen cases and shapes") {
  const LstmCell cell = LstmCell::zeros(3, 2);
  const LstmCell::State zero = LstmCell::zero_state(2);
  LstmCell::State out = cell.forward(Vector::Zero(3), zero);
  CHECK(out.h.norm() == 0.0);
  CHECK(out.c.norm() == 0.0);

  LstmCell::State ones{Vector::Zero(2), Vector::Ones(2)};
  out = cell.forward(Vector::Ones(3), ones);
  CHECK(out.c(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.c(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.h(0) ==
        doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-12));
  CHECK(out.h(0) == doctest::Approx(0.23106).epsilon(1e-4));
  CHECK(out.h.size() == 2);
  CHECK(out.c.size() == 2);
  CHECK_THROWS_AS(cell.forward(Vector::Zero(4), zero), std::invalid_argument);
}

TEST_CASE("mlp gradient matches finite differences") {
  Rng rng(31);
  GateWeights w = GateWeights::zeros(3, 2, 4, 5);
  Vector theta = random_vector(rng, w.param_count());
  w.from_vector(theta);
  const Vector x = random_vector(rng, 4);

  // loss through mlp1 only
  GateWeights g = GateWeights::zeros_like(w);
  Mlp::Cache cache;
  const Vector y = w.mlp1.forward(x, cache);
  w.mlp1.backward(cache, y, g.mlp1);
  const Vector analytic = g.to_vector();

  GateWeights probe = w;
  const Vector fd = finite_difference_gradient(
      [&](const Vector& t) {
        probe.from_vector(t);
        return 0.5 * probe.mlp1.forward(x).squaredNorm();
      },
      theta);
  CHECK(max_rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("zero weight matrices kill the hidden gradient but not the bias") {
  Rng rng(32);
  Mlp m = Mlp::zeros({3, 4, 2});
  m.layers[0].b = random_vector(rng, 4);
  m.layers[1].b = random_vector(rng, 2, 1.0);
  const Vector x = random_vector(rng, 3);

  Mlp grad = Mlp::zeros({3, 4, 2});
  Mlp::Cache cache;
  const Vector y = m.forward(x, cache);
  m.backward(cache, y, grad);
  CHECK(grad.layers[0].w.norm() == 0.0);  // blocked by the zero output matrix
  CHECK(grad.layers[0].b.norm() == 0.0);
  CHECK(grad.layers[1].b.norm() > 0.0);
  CHECK((grad.layers[1].b - y).norm() == 0.0);
}

TEST_CASE("full parameter-set gradient matches finite differences") {
  Rng rng(33);
  GateWeights w = GateWeights::zeros(3, 2, 4, 5);
  Vector theta = random_vector(rng, w.param_count());
  w.from_vector(theta);
  const CompositeProblem prob = CompositeProblem::make(w, rng, 5);

  const Vector analytic = prob.analytic_grad(w);
  GateWeights probe = w;
  const Vector fd = finite_difference_gradient(
      [&](const Vector& t) {
        probe.from_vector(t);
        return prob.loss(probe);
      },
      theta);
  CHECK(max_rel_error(analytic, fd) < 1e-4);
  // constant functions differentiate to exactly zero
  const Vector zero_fd = finite_difference_gradient(
      [](const Vector&) { return 5.0; }, theta.head(7));
  CHECK(zero_fd.norm() == 0.0);
}

TEST_CASE("adamw frozen one-step update and identities") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt(1, cfg);
  Vector p = Vector::Zero(1);
  Vector g = Vector::Ones(1);
  opt.step(p, g);
  CHECK(opt.steps_taken() == 1);
  CHECK(p(0) == doctest::Approx(-1e-4).epsilon(1e-6));

  // lr = 0 is the identity
  AdamWConfig frozen;
  frozen.lr = 0.0;
  AdamW opt2(3, frozen);
  Vector q = Vector::Ones(3) * 0.7;
  const Vector q_before = q;
  opt2.step(q, Vector::Ones(3));
  CHECK(q == q_before);

  // zero grads, zero decay: unchanged
  AdamWConfig no_decay;
  no_decay.weight_decay = 0.0;
  AdamW opt3(2, no_decay);
  Vector r = Vector::Ones(2) * 2.5;
  const Vector r_before = r;
  opt3.step(r, Vector::Zero(2));
  CHECK(r == r_before);

  // zero grads, decay > 0: pure multiplicative shrink
  AdamWConfig decay;
  decay.weight_decay = 0.01;
  AdamW opt4(2, decay);
  Vector s = Vector::Ones(2) * 2.0;
  opt4.step(s, Vector::Zero(2));
  CHECK(s(0) == doctest::Approx(2.0 * (1.0 - 1e-4 * 0.01)).epsilon(1e-14));
}

TEST_CASE("gate weights init, flatten, and determinism") {
  Rng rng_a(7);
  Rng rng_b(7);
  Rng rng_c(8);
  const GateWeights a = GateWeights::init(8, 4, 64, 64, rng_a);
  const GateWeights b = GateWeights::init(8, 4, 64, 64, rng_b);
  const GateWeights c = GateWeights::init(8, 4, 64, 64, rng_c);
  CHECK(a.param_count() == 29720);
  CHECK(a.to_vector() == b.to_vector());
  CHECK(a.to_vector() != c.to_vector());
  CHECK_NOTHROW(a.validate());

  // heads' output layers start at zero; forget-gate bias at one
  CHECK(a.mlp1.layers[1].w.norm() == 0.0);
  CHECK(a.mlp4.layers[1].w.norm() == 0.0);
  CHECK(a.mlp1.layers[1].b.norm() == 0.0);
  CHECK(a.lstm.b.segment(64, 64) == Vector::Ones(64));
  CHECK(a.lstm.b.segment(0, 64).norm() == 0.0);

  GateWeights copy = GateWeights::zeros_like(a);
  copy.from_vector(a.to_vector());
  CHECK(copy.to_vector() == a.to_vector());

  // forward determinism on the same inputs
  const Vector x = Vector::Ones(8) * 0.3;
  CHECK(a.lstm.forward(x, LstmCell::zero_state(64)).h ==
        a.lstm.forward(x, LstmCell::zero_state(64)).h);
}

TEST_CASE("weight files round-trip bit-exactly") {
  Rng rng(77);
  GateWeights w = GateWeights::zeros(3, 2, 4, 5);
  w.from_vector(random_vector(rng, w.param_count(), 2.0));
  const std::string path = "tmp_nnet_roundtrip.json";
  memosort::save_weights(w, path);
  const GateWeights r = memosort::load_weights(path);
  CHECK(r.to_vector() == w.to_vector());
  CHECK(r.state_dim() == 3);
  CHECK(r.meas_dim() == 2);
  CHECK(r.lstm_hidden() == 4);
  CHECK(r.mlp_hidden() == 5);
  std::remove(path.c_str());
}

TEST_CASE("weight file failure kinds are distinguishable") {
  Rng rng(78);
  GateWeights w = GateWeights::zeros(3, 2, 4, 5);
  w.from_vector(random_vector(rng, w.param_count()));
  const std::string path = "tmp_nnet_tamper.json";

  CHECK(load_failure_kind("tmp_nnet_does_not_exist.json") ==
        WeightsError::Kind::io);

  memosort::save_weights(w, path);
  std::string good = slurp(path);

  std::string versioned = good;
  replace_once(versioned, "\"version\": 1", "\"version\": 3");
  spit(path, versioned);
  CHECK(load_failure_kind(path) == WeightsError::Kind::version);

  std::string resized = good;
  replace_once(resized, "\"lstm_hidden\": 4", "\"lstm_hidden\": 6");
  spit(path, resized);
  CHECK(load_failure_kind(path) == WeightsError::Kind::shape);

  spit(path, good.substr(0, good.size() / 2));
  CHECK(load_failure_kind(path) == WeightsError::Kind::corrupt);

  std::string renamed = good;
  replace_once(renamed, "\"lstm.b\"", "\"lstm.bb\"");
  spit(path, renamed);
  CHECK(load_failure_kind(path) == WeightsError::Kind::corrupt);

  spit(path, good);
  CHECK_NOTHROW(memosort::load_weights(path));
  std::remove(path.c_str());
}

}  // TEST_SUITE
