#include "memosort/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memosort/linalg.hpp"
#include "memosort/rng.hpp"

namespace memosort::train {
namespace {

constexpr double kTwoPi = 6.28318530717958647693;

// Everything one training step needs to replay backward.
struct StepTape {
  Mlp::Cache c1, c2;      // heads on the memory (inputs cached inside)
  Vector delta_f, pf;     // scaled transition compensations
  Vector mean_pred;
  Matrix cov_pred;
  Vector res;             // truth minus predicted box, 4-vector
  bool has_det = false;
  Mlp::Cache c3, c4;      // heads on the normalized prediction
  Vector delta_h, ph;     // scaled observation compensations
  Matrix a_mat;           // P' H^T
  Matrix s_mat;           // innovation covariance
  Matrix k;               // gain
  Vector r;               // innovation
  LstmCell::Cache lc;     // memory advance on the adopted mean
};

struct Tape {
  Vector scale8, scale4;
  Matrix fmat, hmat;
  std::vector<StepTape> steps;        // steps[t-1] belongs to frame t
  std::vector<TrackState> states;     // adopted states, index 0 = init
  double loss = 0.0;
};

Matrix diag_noise(const Vector& stds) {
  return stds.array().square().matrix().asDiagonal();
}

Matrix process_noise(const NoiseConfig& n, double rw, double rh) {
  Vector s(8);
  s << n.sigma_p * rw, n.sigma_p * rh, n.sigma_p * rw, n.sigma_p * rh,
      n.sigma_v * rw, n.sigma_v * rh, n.sigma_v * rw, n.sigma_v * rh;
  return diag_noise(s);
}

Matrix measurement_noise(const NoiseConfig& n, double rw, double rh) {
  Vector s(4);
  s << n.sigma_m * rw, n.sigma_m * rh, n.sigma_m * rw, n.sigma_m * rh;
  return diag_noise(s);
}

Vector box4(const BBox& b) {
  Vector v(4);
  v << b.x(), b.y(), b.w(), b.h();
  return v;
}

Tape run_forward(const Window& win, const GateWeights& w,
                 const NoiseConfig& noise, const TrainConfig& cfg,
                 bool keep_states) {
  const int frames = static_cast<int>(win.truth.size());
  if (frames < 2 || win.dets.size() != win.truth.size()) {
    throw std::invalid_argument("window: need >= 2 aligned truth/det frames");
  }
  if (!win.dets[0].has_value()) {
    throw std::invalid_argument("window: first frame must have a detection");
  }
  if (!(win.frame_w > 0.0) || !(win.frame_h > 0.0)) {
    throw std::invalid_argument("window: frame dimensions must be positive");
  }
  Tape tp;
  tp.scale8 = Vector(8);
  tp.scale8 << win.frame_w, win.frame_h, win.frame_w, win.frame_h, win.frame_w,
      win.frame_h, win.frame_w, win.frame_h;
  tp.scale4 = tp.scale8.head(4);
  tp.fmat = Matrix::Identity(8, 8);
  tp.fmat.block(0, 4, 4, 4) = Matrix::Identity(4, 4);
  tp.hmat = Matrix::Zero(4, 8);
  tp.hmat.block(0, 0, 4, 4) = Matrix::Identity(4, 4);
  const int hidden = w.lstm_hidden();

  // same initialization as the deployed filter
  TrackState s;
  const BBox& det0 = *win.dets[0];
  s.mean = Vector::Zero(8);
  s.mean << det0.x(), det0.y(), std::max(det0.w(), noise.min_extent),
      std::max(det0.h(), noise.min_extent), 0.0, 0.0, 0.0, 0.0;
  s.ref_w = det0.w();
  s.ref_h = det0.h();
  {
    Vector stds(8);
    const double pw = 2.0 * noise.sigma_m * s.ref_w;
    const double ph = 2.0 * noise.sigma_m * s.ref_h;
    stds << pw, ph, pw, ph, noise.init_vel_factor * pw,
        noise.init_vel_factor * ph, noise.init_vel_factor * pw,
        noise.init_vel_factor * ph;
    s.cov = diag_noise(stds);
  }
  s.memory.h = Vector::Zero(hidden);
  s.memory.c = Vector::Zero(hidden);
  if (keep_states) tp.states.push_back(s);

  double loss_pred = 0.0, loss_meas = 0.0;
  tp.steps.reserve(frames - 1);
  for (int t = 1; t < frames; ++t) {
    StepTape st;
    st.delta_f = w.mlp1.forward(s.memory.h, st.c1).cwiseProduct(tp.scale8);
    st.pf = w.mlp2.forward(s.memory.h, st.c2).cwiseProduct(tp.scale8);
    st.mean_pred = tp.fmat * s.mean + st.delta_f;
    st.cov_pred =
        symmetrized(tp.fmat * s.cov * tp.fmat.transpose() + outer(st.pf) +
                    process_noise(noise, s.ref_w, s.ref_h));
    st.res = box4(win.truth[t]) - st.mean_pred.head(4);
    for (int i = 0; i < 4; ++i) {
      const double var = st.cov_pred(i, i);
      if (!(var > 0.0)) {
        throw std::runtime_error("training: non-positive predicted variance");
      }
      loss_pred +=
          0.5 * (std::log(kTwoPi * var) + st.res(i) * st.res(i) / var);
    }
    Vector mean_post;
    Matrix cov_post;
    double ref_w = s.ref_w, ref_h = s.ref_h;
    if (win.dets[t].has_value()) {
      st.has_det = true;
      const Vector pred_norm = st.mean_pred.cwiseQuotient(tp.scale8);
      st.delta_h = w.mlp3.forward(pred_norm, st.c3).cwiseProduct(tp.scale4);
      st.ph = w.mlp4.forward(pred_norm, st.c4).cwiseProduct(tp.scale4);
      st.a_mat = st.cov_pred * tp.hmat.transpose();
      st.s_mat = symmetrized(tp.hmat * st.a_mat + outer(st.ph) +
                             measurement_noise(noise, s.ref_w, s.ref_h));
      st.k = spd_solve(st.s_mat, tp.hmat * st.cov_pred).transpose();
      st.r = box4(*win.dets[t]) - tp.hmat * st.mean_pred - st.delta_h;
      mean_post = st.mean_pred + st.k * st.r;
      cov_post =
          symmetrized((Matrix::Identity(8, 8) - st.k * tp.hmat) * st.cov_pred);
      loss_meas += st.r.squaredNorm();
      ref_w = win.dets[t]->w();
      ref_h = win.dets[t]->h();
    } else {
      mean_post = st.mean_pred;
      cov_post = symmetrized(st.cov_pred);
    }
    const LstmCell::State next = w.lstm.forward(
        mean_post.cwiseQuotient(tp.scale8), {s.memory.h, s.memory.c}, st.lc);
    s.mean = std::move(mean_post);
    s.cov = std::move(cov_post);
    s.memory = {next.h, next.c};
    s.ref_w = ref_w;
    s.ref_h = ref_h;
    if (!s.mean.allFinite() || !s.cov.allFinite() || !next.h.allFinite() ||
        !next.c.allFinite()) {
      throw std::runtime_error("training: non-finite filter state");
    }
    tp.steps.push_back(std::move(st));
    if (keep_states) tp.states.push_back(s);
  }
  tp.loss = (cfg.alpha_pred * loss_pred + cfg.alpha_meas * loss_meas) /
            (frames - 1);
  if (!std::isfinite(tp.loss)) {
    throw std::runtime_error("training: non-finite loss");
  }
  return tp;
}

void run_backward(const Window& win, const GateWeights& w,
                  const TrainConfig& cfg, const Tape& tp, GateWeights& grad) {
  const int frames = static_cast<int>(win.truth.size());
  const double denom = frames - 1;
  const int hidden = w.lstm_hidden();
  Vector gb = Vector::Zero(8);
  Matrix gp = Matrix::Zero(8, 8);
  Vector gh = Vector::Zero(hidden), gc = Vector::Zero(hidden);
  for (int t = frames - 1; t >= 1; --t) {
    const StepTape& st = tp.steps[t - 1];
    // memory advance consumed the adopted mean
    Vector gh_prev = Vector::Zero(hidden), gc_prev = Vector::Zero(hidden);
    const Vector gx = w.lstm.backward(st.lc, gh, gc, grad.lstm, gh_prev,
                                      gc_prev);
    gb += gx.cwiseQuotient(tp.scale8);
    Vector gh_n = std::move(gh_prev), gc_n = std::move(gc_prev);

    // update or coast, back to the prediction
    Vector gmu;
    Matrix gpp;
    if (st.has_det) {
      const Matrix gps = 0.5 * (gp + gp.transpose());
      const Vector gr =
          st.k.transpose() * gb + (2.0 * cfg.alpha_meas / denom) * st.r;
      const Matrix gk = gb * st.r.transpose() - gps * st.a_mat;
      gpp = gps - (st.k * tp.hmat).transpose() * gps;
      const Matrix ga = spd_solve(st.s_mat, gk.transpose()).transpose();
      const Matrix gs = -st.k.transpose() * ga;
      const Matrix gss = 0.5 * (gs + gs.transpose());
      gpp += tp.hmat.transpose() * gss * tp.hmat + ga * tp.hmat;
      const Vector g_ph = 2.0 * gss * st.ph;
      gmu = gb - tp.hmat.transpose() * gr;
      const Vector g_dh = -gr;
      const Vector gx3 =
          w.mlp3.backward(st.c3, g_dh.cwiseProduct(tp.scale4), grad.mlp3);
      const Vector gx4 =
          w.mlp4.backward(st.c4, g_ph.cwiseProduct(tp.scale4), grad.mlp4);
      gmu += (gx3 + gx4).cwiseQuotient(tp.scale8);
    } else {
      gpp = 0.5 * (gp + gp.transpose());
      gmu = gb;
    }

    // the prediction NLL consumed the predicted mean and diagonal
    for (int i = 0; i < 4; ++i) {
      const double var = st.cov_pred(i, i);
      gmu(i) += (cfg.alpha_pred / denom) * (-st.res(i) / var);
      gpp(i, i) += (cfg.alpha_pred / denom) * 0.5 *
                   (1.0 / var - st.res(i) * st.res(i) / (var * var));
    }

    // prediction back to the previous state and the transition heads
    const Matrix gpps = 0.5 * (gpp + gpp.transpose());
    const Vector g_pf = 2.0 * gpps * st.pf;
    gh_n += w.mlp1.backward(st.c1, gmu.cwiseProduct(tp.scale8), grad.mlp1);
    gh_n += w.mlp2.backward(st.c2, g_pf.cwiseProduct(tp.scale8), grad.mlp2);
    gb = tp.fmat.transpose() * gmu;
    gp = tp.fmat.transpose() * gpps * tp.fmat;
    gh = std::move(gh_n);
    gc = std::move(gc_n);
  }
}

void fisher_yates(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    std::swap(v[i], v[rng.uniform_int(i + 1)]);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (window < 2) throw std::invalid_argument("train: window must be >= 2");
  if (stride < 0) throw std::invalid_argument("train: negative stride");
  if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: negative epochs");
  if (!(opt.lr >= 0.0)) throw std::invalid_argument("train: negative lr");
  if (!(alpha_pred >= 0.0) || !(alpha_meas >= 0.0)) {
    throw std::invalid_argument("train: negative loss weight");
  }
  if (!(val_split >= 0.0) || !(val_split < 1.0)) {
    throw std::invalid_argument("train: val split outside [0, 1)");
  }
  if (!(grad_clip > 0.0)) throw std::invalid_argument("train: bad grad clip");
  if (!(min_coverage > 0.0) || !(min_coverage > 0.0 && min_coverage <= 1.0)) {
    throw std::invalid_argument("train: coverage outside (0, 1]");
  }
}

std::vector<Window> build_dataset(const std::vector<synth::Scenario>& scenarios,
                                  const TrainConfig& cfg) {
  cfg.validate();
  const int w_len = cfg.window;
  const int stride = cfg.stride > 0 ? cfg.stride : std::max(1, w_len / 2);
  std::vector<Window> out;
  for (const synth::Scenario& sc : scenarios) {
    const int n_targets = static_cast<int>(sc.truth.size());
    for (int k = 0; k < n_targets; ++k) {
      std::vector<std::optional<BBox>> det(sc.frames);
      for (int f = 0; f < sc.frames; ++f) {
        for (size_t i = 0; i < sc.det_target[f].size(); ++i) {
          if (sc.det_target[f][i] == k) det[f] = sc.detections[f][i].box;
        }
      }
      for (int s0 = 0; s0 + w_len <= sc.frames; s0 += stride) {
        if (!det[s0].has_value()) continue;
        int covered = 0;
        for (int f = s0; f < s0 + w_len; ++f) covered += det[f].has_value();
        if (covered + 1e-9 < cfg.min_coverage * w_len) continue;
        Window win;
        win.frame_w = sc.arena_w;
        win.frame_h = sc.arena_h;
        win.truth.assign(sc.truth[k].begin() + s0,
                         sc.truth[k].begin() + s0 + w_len);
        win.dets.assign(det.begin() + s0, det.begin() + s0 + w_len);
        out.push_back(std::move(win));
      }
    }
  }
  return out;
}

double window_loss(const Window& win, const GateWeights& w,
                   const NoiseConfig& noise, const TrainConfig& cfg) {
  return run_forward(win, w, noise, cfg, false).loss;
}

double window_loss_grad(const Window& win, const GateWeights& w,
                        const NoiseConfig& noise, const TrainConfig& cfg,
                        GateWeights& grad) {
  const Tape tp = run_forward(win, w, noise, cfg, false);
  run_backward(win, w, cfg, tp, grad);
  return tp.loss;
}

std::vector<TrackState> window_states(const Window& win, const GateWeights& w,
                                      const NoiseConfig& noise) {
  return run_forward(win, w, noise, TrainConfig{}, true).states;
}

TrainResult train(const std::vector<Window>& dataset, const GateWeights& init,
                  const NoiseConfig& noise, const TrainConfig& cfg) {
  cfg.validate();
  noise.validate();
  init.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  Rng rng(cfg.seed);
  std::vector<int> idx(dataset.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  fisher_yates(idx, rng);
  const int n_val = static_cast<int>(
      std::min<double>(std::floor(cfg.val_split * idx.size()),
                       static_cast<double>(idx.size()) - 1.0));
  const std::vector<int> val(idx.begin(), idx.begin() + std::max(n_val, 0));
  std::vector<int> tr(idx.begin() + std::max(n_val, 0), idx.end());

  const auto mean_loss = [&](const std::vector<int>& set,
                             const GateWeights& w) {
    double sum = 0.0;
    for (const int i : set) sum += window_loss(dataset[i], w, noise, cfg);
    return set.empty() ? 0.0 : sum / set.size();
  };

  TrainResult res;
  res.weights = init;
  GateWeights cur = init;
  const double train0 = mean_loss(tr, cur);
  const double val0 = val.empty() ? train0 : mean_loss(val, cur);
  res.curve.push_back({0, train0, val0});
  res.best_epoch = 0;
  res.best_val = val0;

  Vector theta = cur.to_vector();
  AdamW opt(static_cast<int>(theta.size()), cfg.opt);
  for (int e = 1; e <= cfg.epochs && !res.diverged; ++e) {
    fisher_yates(tr, rng);
    double run_loss = 0.0;
    int counted = 0;
    for (size_t b0 = 0; b0 < tr.size() && !res.diverged; b0 += cfg.batch) {
      const size_t b1 = std::min(b0 + cfg.batch, tr.size());
      GateWeights g = GateWeights::zeros_like(cur);
      double batch_loss = 0.0;
      try {
        for (size_t i = b0; i < b1; ++i) {
          batch_loss += window_loss_grad(dataset[tr[i]], cur, noise, cfg, g);
        }
      } catch (const std::runtime_error& err) {
        res.diverged = true;
        res.note = err.what();
        break;
      }
      Vector gv = g.to_vector() / static_cast<double>(b1 - b0);
      const double norm = gv.norm();
      if (!std::isfinite(norm)) {
        res.diverged = true;
        res.note = "non-finite gradient";
        break;
      }
      if (norm > cfg.grad_clip) gv *= cfg.grad_clip / norm;
      opt.step(theta, gv);
      cur.from_vector(theta);
      run_loss += batch_loss;
      counted += static_cast<int>(b1 - b0);
    }
    if (res.diverged) break;
    const double etrain = counted > 0 ? run_loss / counted : 0.0;
    const double eval = val.empty() ? etrain : mean_loss(val, cur);
    res.curve.push_back({e, etrain, eval});
    if (!theta.allFinite()) {
      res.diverged = true;
      res.note = "non-finite weights after optimizer step";
      break;
    }
    if (eval < res.best_val) {
      res.best_val = eval;
      res.best_epoch = e;
      res.weights = cur;
    }
    if (etrain > 1000.0 * std::max(std::abs(train0), 1e-12)) {
      res.diverged = true;
      res.note = "training loss diverged past 1000x the initial loss";
      break;
    }
  }
  return res;
}

}  // namespace memosort::train
