#include "memosort/nnet.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace memosort {
namespace {

using nlohmann::json;

Vector sigmoid(const Vector& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Vector tanh_v(const Vector& z) { return z.array().tanh().matrix(); }

void check_same_arch(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) {
    throw std::invalid_argument("mlp backward: gradient shape mismatch");
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].w.rows() != b.layers[i].w.rows() ||
        a.layers[i].w.cols() != b.layers[i].w.cols()) {
      throw std::invalid_argument("mlp backward: gradient shape mismatch");
    }
  }
}

}  // namespace

Mlp Mlp::zeros(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw std::invalid_argument("mlp: need at least input and output dims");
  }
  for (const int d : dims) {
    if (d <= 0) throw std::invalid_argument("mlp: nonpositive layer dim");
  }
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back({Matrix::Zero(dims[i + 1], dims[i]),
                        Vector::Zero(dims[i + 1])});
  }
  return m;
}

Vector Mlp::forward(const Vector& x) const {
  Cache scratch;
  return forward(x, scratch);
}

Vector Mlp::forward(const Vector& x, Cache& cache) const {
  if (x.size() != in_dim()) {
    throw std::invalid_argument("mlp forward: input dimension mismatch");
  }
  cache.inputs.clear();
  Vector a = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cache.inputs.push_back(a);
    Vector z = layers[i].w * a + layers[i].b;
    a = (i + 1 < layers.size()) ? tanh_v(z) : std::move(z);
  }
  return a;
}

Vector Mlp::backward(const Cache& cache, const Vector& gy, Mlp& grad) const {
  check_same_arch(*this, grad);
  if (cache.inputs.size() != layers.size() || gy.size() != out_dim()) {
    throw std::invalid_argument("mlp backward: cache/gradient mismatch");
  }
  Vector dz = gy;
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    grad.layers[i].w += dz * cache.inputs[i].transpose();
    grad.layers[i].b += dz;
    Vector ga = layers[i].w.transpose() * dz;
    if (i == 0) return ga;
    // inputs[i] is the tanh output feeding layer i
    dz = (ga.array() * (1.0 - cache.inputs[i].array().square())).matrix();
  }
  return Vector();  // unreachable; layers is never empty
}

LstmCell LstmCell::zeros(int in, int hidden) {
  if (in <= 0 || hidden <= 0) {
    throw std::invalid_argument("lstm: nonpositive dimension");
  }
  LstmCell c;
  c.wx = Matrix::Zero(4 * hidden, in);
  c.wh = Matrix::Zero(4 * hidden, hidden);
  c.b = Vector::Zero(4 * hidden);
  return c;
}

LstmCell::State LstmCell::zero_state(int hidden) {
  return {Vector::Zero(hidden), Vector::Zero(hidden)};
}

LstmCell::State LstmCell::forward(const Vector& x, const State& prev) const {
  Cache scratch;
  return forward(x, prev, scratch);
}

LstmCell::State LstmCell::forward(const Vector& x, const State& prev,
                                  Cache& cache) const {
  const int h = hidden_dim();
  if (x.size() != in_dim() || prev.h.size() != h || prev.c.size() != h) {
    throw std::invalid_argument("lstm forward: dimension mismatch");
  }
  const Vector z = wx * x + wh * prev.h + b;
  cache.x = x;
  cache.h_prev = prev.h;
  cache.c_prev = prev.c;
  cache.i = sigmoid(z.segment(0, h));
  cache.f = sigmoid(z.segment(h, h));
  cache.g = tanh_v(z.segment(2 * h, h));
  cache.o = sigmoid(z.segment(3 * h, h));
  State out;
  out.c = cache.f.cwiseProduct(prev.c) + cache.i.cwiseProduct(cache.g);
  cache.c_new = out.c;
  out.h = cache.o.cwiseProduct(tanh_v(out.c));
  return out;
}

Vector LstmCell::backward(const Cache& cache, const Vector& gh,
                          const Vector& gc, LstmCell& grad, Vector& gh_prev,
                          Vector& gc_prev) const {
  const int h = hidden_dim();
  if (grad.wx.rows() != wx.rows() || grad.wx.cols() != wx.cols() ||
      grad.wh.cols() != wh.cols() || gh.size() != h || gc.size() != h ||
      gh_prev.size() != h || gc_prev.size() != h) {
    throw std::invalid_argument("lstm backward: dimension mismatch");
  }
  const Vector tc = tanh_v(cache.c_new);
  const Vector gc_tot =
      gc + (gh.array() * cache.o.array() * (1.0 - tc.array().square()))
               .matrix();
  const Vector go = gh.cwiseProduct(tc);
  const Vector gi = gc_tot.cwiseProduct(cache.g);
  const Vector gf = gc_tot.cwiseProduct(cache.c_prev);
  const Vector gg = gc_tot.cwiseProduct(cache.i);
  Vector dz(4 * h);
  dz.segment(0, h) =
      (gi.array() * cache.i.array() * (1.0 - cache.i.array())).matrix();
  dz.segment(h, h) =
      (gf.array() * cache.f.array() * (1.0 - cache.f.array())).matrix();
  dz.segment(2 * h, h) =
      (gg.array() * (1.0 - cache.g.array().square())).matrix();
  dz.segment(3 * h, h) =
      (go.array() * cache.o.array() * (1.0 - cache.o.array())).matrix();
  grad.wx += dz * cache.x.transpose();
  grad.wh += dz * cache.h_prev.transpose();
  grad.b += dz;
  gh_prev += wh.transpose() * dz;
  gc_prev += gc_tot.cwiseProduct(cache.f);
  return wx.transpose() * dz;
}

GateWeights GateWeights::zeros(int state_dim, int meas_dim, int lstm_hidden,
                               int mlp_hidden) {
  GateWeights w;
  w.lstm = LstmCell::zeros(state_dim, lstm_hidden);
  w.mlp1 = Mlp::zeros({lstm_hidden, mlp_hidden, state_dim});
  w.mlp2 = Mlp::zeros({lstm_hidden, mlp_hidden, state_dim});
  w.mlp3 = Mlp::zeros({state_dim, mlp_hidden, meas_dim});
  w.mlp4 = Mlp::zeros({state_dim, mlp_hidden, meas_dim});
  return w;
}

GateWeights GateWeights::zeros_like(const GateWeights& other) {
  return zeros(other.state_dim(), other.meas_dim(), other.lstm_hidden(),
               other.mlp_hidden());
}

GateWeights GateWeights::init(int state_dim, int meas_dim, int lstm_hidden,
                              int mlp_hidden, Rng& rng) {
  GateWeights w = zeros(state_dim, meas_dim, lstm_hidden, mlp_hidden);
  auto fill = [&rng](Matrix& m) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, c) = rng.uniform(-bound, bound);
      }
    }
  };
  fill(w.lstm.wx);
  fill(w.lstm.wh);
  w.lstm.b.segment(lstm_hidden, lstm_hidden).setOnes();  // forget gate
  fill(w.mlp1.layers[0].w);
  fill(w.mlp2.layers[0].w);
  fill(w.mlp3.layers[0].w);
  fill(w.mlp4.layers[0].w);
  return w;
}

void GateWeights::validate() const {
  const int s = state_dim();
  const int m = meas_dim();
  const int hl = lstm_hidden();
  const int hm = mlp_hidden();
  auto fail = [](const char* what) {
    throw std::invalid_argument(std::string("weights: ") + what);
  };
  if (s <= 0 || m <= 0 || hl <= 0 || hm <= 0) fail("nonpositive dimension");
  if (lstm.wx.rows() != 4 * hl || lstm.wh.rows() != 4 * hl ||
      lstm.b.size() != 4 * hl) {
    fail("lstm gate stack is not 4x hidden");
  }
  auto check_head = [&](const Mlp& head, int in, int out, const char* name) {
    if (head.layers.empty()) fail(name);
    if (head.layers.front().w.cols() != in ||
        head.layers.back().w.rows() != out) {
      fail(name);
    }
    for (std::size_t i = 0; i < head.layers.size(); ++i) {
      if (head.layers[i].b.size() != head.layers[i].w.rows()) fail(name);
      if (i + 1 < head.layers.size() &&
          head.layers[i + 1].w.cols() != head.layers[i].w.rows()) {
        fail(name);
      }
    }
  };
  check_head(mlp1, hl, s, "mlp1 shape chain broken");
  check_head(mlp2, hl, s, "mlp2 shape chain broken");
  check_head(mlp3, s, m, "mlp3 shape chain broken");
  check_head(mlp4, s, m, "mlp4 shape chain broken");
}

namespace {

std::vector<std::pair<double*, Eigen::Index>> tensor_spans(GateWeights& w) {
  std::vector<std::pair<double*, Eigen::Index>> spans;
  auto add = [&spans](auto& tensor) {
    spans.emplace_back(tensor.data(), tensor.size());
  };
  add(w.lstm.wx);
  add(w.lstm.wh);
  add(w.lstm.b);
  for (Mlp* mlp : {&w.mlp1, &w.mlp2, &w.mlp3, &w.mlp4}) {
    for (auto& layer : mlp->layers) {
      add(layer.w);
      add(layer.b);
    }
  }
  return spans;
}

}  // namespace

int GateWeights::param_count() const {
  int n = 0;
  for (const auto& [ptr, len] : tensor_spans(const_cast<GateWeights&>(*this))) {
    (void)ptr;
    n += static_cast<int>(len);
  }
  return n;
}

Vector GateWeights::to_vector() const {
  Vector theta(param_count());
  Eigen::Index at = 0;
  for (const auto& [ptr, len] : tensor_spans(const_cast<GateWeights&>(*this))) {
    theta.segment(at, len) = Eigen::Map<const Vector>(ptr, len);
    at += len;
  }
  return theta;
}

void GateWeights::from_vector(const Vector& theta) {
  if (theta.size() != param_count()) {
    throw std::invalid_argument("weights: flat vector length mismatch");
  }
  Eigen::Index at = 0;
  for (auto& [ptr, len] : tensor_spans(*this)) {
    Eigen::Map<Vector>(ptr, len) = theta.segment(at, len);
    at += len;
  }
}

AdamW::AdamW(int dim, const AdamWConfig& cfg) : cfg_(cfg) {
  if (dim <= 0) throw std::invalid_argument("adamw: nonpositive dimension");
  m_ = Vector::Zero(dim);
  v_ = Vector::Zero(dim);
}

void AdamW::step(Vector& params, const Vector& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("adamw: dimension mismatch");
  }
  t_ += 1;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = (cfg_.beta2 * v_.array() +
        (1.0 - cfg_.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  params -= cfg_.lr * ((m_.array() / bc1) /
                           ((v_.array() / bc2).sqrt() + cfg_.eps) +
                       cfg_.weight_decay * params.array())
                          .matrix();
}

namespace {

constexpr const char* kFormatTag = "memosort-weights";
constexpr int kFormatVersion = 1;

json tensor_json(const Matrix& m) {
  json e;
  e["shape"] = {m.rows(), m.cols()};
  e["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return e;
}

json tensor_json(const Vector& v) {
  json e;
  e["shape"] = {v.size()};
  e["data"] = std::vector<double>(v.data(), v.data() + v.size());
  return e;
}

struct ExpectedTensor {
  std::string name;
  std::vector<Eigen::Index> shape;
  double* dst;
  Eigen::Index len;
};

// The canonical layout: one hidden layer per head. Shapes are fully
// determined by the architecture header.
std::vector<ExpectedTensor> expected_tensors(GateWeights& w) {
  std::vector<ExpectedTensor> out;
  auto add_m = [&out](const std::string& name, Matrix& m) {
    out.push_back({name, {m.rows(), m.cols()}, m.data(), m.size()});
  };
  auto add_v = [&out](const std::string& name, Vector& v) {
    out.push_back({name, {v.size()}, v.data(), v.size()});
  };
  add_m("lstm.wx", w.lstm.wx);
  add_m("lstm.wh", w.lstm.wh);
  add_v("lstm.b", w.lstm.b);
  const char* head_names[] = {"mlp1", "mlp2", "mlp3", "mlp4"};
  Mlp* heads[] = {&w.mlp1, &w.mlp2, &w.mlp3, &w.mlp4};
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < heads[k]->layers.size(); ++i) {
      const std::string idx = std::to_string(i);
      add_m(std::string(head_names[k]) + ".w" + idx, heads[k]->layers[i].w);
      add_v(std::string(head_names[k]) + ".b" + idx, heads[k]->layers[i].b);
    }
  }
  return out;
}

}  // namespace

void save_weights(const GateWeights& w, const std::string& path) {
  w.validate();
  for (const Mlp* head : {&w.mlp1, &w.mlp2, &w.mlp3, &w.mlp4}) {
    if (head->layers.size() != 2) {
      throw std::invalid_argument(
          "save_weights: only the canonical one-hidden-layer heads serialize");
    }
  }
  json j;
  j["format"] = kFormatTag;
  j["version"] = kFormatVersion;
  j["arch"] = {{"state_dim", w.state_dim()},
               {"meas_dim", w.meas_dim()},
               {"lstm_hidden", w.lstm_hidden()},
               {"mlp_hidden", w.mlp_hidden()}};
  json params = json::object();
  params["lstm.wx"] = tensor_json(w.lstm.wx);
  params["lstm.wh"] = tensor_json(w.lstm.wh);
  params["lstm.b"] = tensor_json(w.lstm.b);
  const char* head_names[] = {"mlp1", "mlp2", "mlp3", "mlp4"};
  const Mlp* heads[] = {&w.mlp1, &w.mlp2, &w.mlp3, &w.mlp4};
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < heads[k]->layers.size(); ++i) {
      const std::string idx = std::to_string(i);
      params[std::string(head_names[k]) + ".w" + idx] =
          tensor_json(heads[k]->layers[i].w);
      params[std::string(head_names[k]) + ".b" + idx] =
          tensor_json(heads[k]->layers[i].b);
    }
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) {
    throw WeightsError(WeightsError::Kind::io,
                       "weights: cannot open for writing: " + path);
  }
  out << j.dump(1) << "\n";
  out.flush();
  if (!out) {
    throw WeightsError(WeightsError::Kind::io,
                       "weights: write failed: " + path);
  }
}

GateWeights load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw WeightsError(WeightsError::Kind::io,
                       "weights: cannot open: " + path);
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw WeightsError(WeightsError::Kind::corrupt,
                       std::string("weights: unparseable file: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string() ||
      j["format"].get<std::string>() != kFormatTag) {
    throw WeightsError(WeightsError::Kind::corrupt,
                       "weights: missing or wrong format tag");
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw WeightsError(WeightsError::Kind::corrupt,
                       "weights: missing schema version");
  }
  if (j["version"].get<int>() != kFormatVersion) {
    throw WeightsError(WeightsError::Kind::version,
                       "weights: unsupported schema version " +
                           std::to_string(j["version"].get<int>()));
  }
  if (!j.contains("arch") || !j["arch"].is_object()) {
    throw WeightsError(WeightsError::Kind::corrupt,
                       "weights: missing architecture header");
  }
  const json& arch = j["arch"];
  auto arch_int = [&arch](const char* key) {
    if (!arch.contains(key) || !arch[key].is_number_integer()) {
      throw WeightsError(WeightsError::Kind::corrupt,
                         std::string("weights: bad arch field ") + key);
    }
    const int v = arch[key].get<int>();
    if (v <= 0) {
      throw WeightsError(WeightsError::Kind::shape,
                         std::string("weights: nonpositive arch field ") + key);
    }
    return v;
  };
  GateWeights w =
      GateWeights::zeros(arch_int("state_dim"), arch_int("meas_dim"),
                         arch_int("lstm_hidden"), arch_int("mlp_hidden"));
  if (!j.contains("params") || !j["params"].is_object()) {
    throw WeightsError(WeightsError::Kind::corrupt,
                       "weights: missing params table");
  }
  const json& params = j["params"];
  const auto expected = expected_tensors(w);
  if (params.size() != expected.size()) {
    throw WeightsError(WeightsError::Kind::corrupt,
                       "weights: unexpected params table size");
  }
  for (const auto& exp : expected) {
    if (!params.contains(exp.name)) {
      throw WeightsError(WeightsError::Kind::corrupt,
                         "weights: missing tensor " + exp.name);
    }
    const json& entry = params[exp.name];
    if (!entry.is_object() || !entry.contains("shape") ||
        !entry.contains("data") || !entry["shape"].is_array() ||
        !entry["data"].is_array()) {
      throw WeightsError(WeightsError::Kind::corrupt,
                         "weights: malformed tensor " + exp.name);
    }
    const json& shape = entry["shape"];
    bool shape_ok = shape.size() == exp.shape.size();
    if (shape_ok) {
      for (std::size_t d = 0; d < exp.shape.size(); ++d) {
        if (!shape[d].is_number_integer() ||
            shape[d].get<Eigen::Index>() != exp.shape[d]) {
          shape_ok = false;
          break;
        }
      }
    }
    const json& data = entry["data"];
    if (!shape_ok ||
        static_cast<Eigen::Index>(data.size()) != exp.len) {
      throw WeightsError(WeightsError::Kind::shape,
                         "weights: shape mismatch for " + exp.name);
    }
    for (Eigen::Index i = 0; i < exp.len; ++i) {
      const json& value = data[static_cast<std::size_t>(i)];
      if (!value.is_number()) {
        throw WeightsError(WeightsError::Kind::corrupt,
                           "weights: non-numeric entry in " + exp.name);
      }
      const double d = value.get<double>();
      if (!std::isfinite(d)) {
        throw WeightsError(WeightsError::Kind::corrupt,
                           "weights: non-finite entry in " + exp.name);
      }
      exp.dst[i] = d;
    }
  }
  w.validate();
  return w;
}

}  // namespace memosort
