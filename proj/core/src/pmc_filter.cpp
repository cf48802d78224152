#include "pursuit/pmc_filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace pursuit::filter {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

FilterInput build_filter_input(const std::vector<world::Detection>& log, int t,
                               Vec2 start, int t_max) {
  if (t < 0) throw world::ContractError("build_filter_input: t < 0");
  FilterInput in;
  in.v[0] = start.x;
  in.v[1] = start.y;
  in.v[2] = static_cast<double>(t) / t_max;
  for (int s = 0; s < 2; ++s) {
    int idx = static_cast<int>(log.size()) - 1 - s;
    double* slot = &in.v[3 + 5 * s];
    if (idx >= 0) {
      const world::Detection& d = log[idx];
      slot[0] = d.pos.x;
      slot[1] = d.pos.y;
      slot[2] = d.vel.x;
      slot[3] = d.vel.y;
      slot[4] = static_cast<double>(t - d.timestep) / t_max;
    } else {
      slot[0] = start.x;
      slot[1] = start.y;
      slot[2] = 0;
      slot[3] = 0;
      slot[4] = static_cast<double>(t) / t_max;
    }
  }
  return in;
}

Vec2 motion_extrapolate(const MotionState& m, int k) {
  if (k < m.timestep)
    throw world::ContractError("motion_extrapolate: k before last detection");
  return clamp01(m.pos + m.vel * static_cast<double>(k - m.timestep));
}

Vec2 extrapolate_input(const FilterInput& in, int t_max) {
  double dk = std::round(in.slot_staleness(0) * t_max);
  return clamp01(in.slot_pos(0) + in.slot_vel(0) * dk);
}

// ---------------------------------------------------------------------------
// Models

using grad::Tape;
using grad::Value;

namespace {

// Splits the 40-wide decoder output into the three mixture heads.
MixtureHead split_heads(Tape& t, Value decoder_out) {
  MixtureHead h;
  h.lambda_logits = t.slice_cols(decoder_out, 0, kNumComponents);
  h.mu = t.slice_cols(decoder_out, kNumComponents, 3 * kNumComponents);
  Value sig_raw =
      t.slice_cols(decoder_out, 3 * kNumComponents, 5 * kNumComponents);
  h.sigma = t.add_const(t.softplus(sig_raw), kSigmaMin);
  return h;
}

}  // namespace

PmcModel::PmcModel(const FilterHyper& h, std::uint64_t seed, int t_max)
    : t_max_(t_max) {
  std::mt19937_64 rng(seed);
  enc1_ = grad::make_linear(params_, "prior.fc1", 3, h.prior_hidden, rng);
  enc2_ = grad::make_linear(params_, "prior.fc2", h.prior_hidden,
                            h.prior_hidden, rng);
  enc3_ = grad::make_linear(params_, "prior.fc3", h.prior_hidden, h.embed, rng);
  mot1_ = grad::make_linear(params_, "motion.fc1", 2, h.branch_hidden, rng);
  mot2_ = grad::make_linear(params_, "motion.fc2", h.branch_hidden, h.embed,
                            rng);
  conf1_ = grad::make_linear(params_, "conf.fc1", kInputDim, h.branch_hidden,
                             rng);
  conf2_ = grad::make_linear(params_, "conf.fc2", h.branch_hidden, 1, rng);
  dec1_ = grad::make_linear(params_, "dec.fc1", h.embed, h.decoder_hidden, rng);
  dec2_ = grad::make_linear(params_, "dec.fc2", h.decoder_hidden,
                            5 * kNumComponents, rng);
}

MixtureHead PmcModel::forward(Tape& t, const double* inputs, int batch) {
  return forward_impl(t, inputs, batch, nullptr, nullptr);
}

MixtureHead PmcModel::forward_train(Tape& t, const double* inputs, int batch,
                                    std::mt19937_64& rng) {
  // Branch dropout: hard-route a fraction of samples through a single branch
  // so the decoder learns to read each embedding on its own and the gate gets
  // gradient against pure-branch decodings instead of co-adapting to an
  // even blend.
  std::vector<double> keep(batch), force(batch);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < batch; ++i) {
    const double* row = inputs + i * kInputDim;
    // Padding slots carry staleness equal to the current time, so a smaller
    // slot-0 staleness means at least one real detection exists. Samples
    // without one are never routed motion-only: their motion embedding is
    // indistinguishable from a fresh detection at the start location, and
    // training the decoder on that ambiguity blurs both cases.
    bool has_detection = row[7] < row[2] - 1e-12;
    double r = u(rng);
    double p = branch_dropout_;
    if (has_detection && r < p) {      // motion only: alpha' = 0
      keep[i] = 0;
      force[i] = 0;
    } else if (r < 2 * p) {            // prior only: alpha' = 1
      keep[i] = 0;
      force[i] = 1;
    } else {                           // learned gate
      keep[i] = 1;
      force[i] = 0;
    }
  }
  return forward_impl(t, inputs, batch, keep.data(), force.data());
}

MixtureHead PmcModel::forward_impl(Tape& t, const double* inputs, int batch,
                                   const double* keep, const double* force) {
  Value x = t.leaf(inputs, batch, kInputDim);

  Value prior_in = t.slice_cols(x, 0, 3);
  Value p_h = apply_linear(t, enc3_,
               t.relu(apply_linear(t, enc2_,
               t.relu(apply_linear(t, enc1_, prior_in)))));

  // Motion extrapolation is input plumbing, not part of the learned graph.
  std::vector<double> extrap(static_cast<std::size_t>(batch) * 2);
  for (int i = 0; i < batch; ++i) {
    FilterInput fi;
    std::copy(inputs + i * kInputDim, inputs + (i + 1) * kInputDim,
              fi.v.begin());
    Vec2 m = extrapolate_input(fi, t_max_);
    extrap[2 * i] = m.x;
    extrap[2 * i + 1] = m.y;
  }
  Value mot_in = t.leaf(extrap.data(), batch, 2);
  Value m_h = apply_linear(t, mot2_,
               t.relu(apply_linear(t, mot1_, mot_in)));

  Value alpha =
      t.sigmoid(apply_linear(t, conf2_, t.relu(apply_linear(t, conf1_, x))));
  if (keep) {
    Value k = t.leaf(keep, batch, 1);
    Value c = t.leaf(force, batch, 1);
    alpha = t.add(t.mul_colvec(alpha, k), c);
  }
  Value one_minus = t.add_const(t.scale(alpha, -1.0), 1.0);
  Value blended =
      t.add(t.mul_colvec(p_h, alpha), t.mul_colvec(m_h, one_minus));

  Value dec = apply_linear(t, dec2_, t.relu(apply_linear(t, dec1_, blended)));
  return split_heads(t, dec);
}

FcModel::FcModel(const FilterHyper& h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  l1_ = grad::make_linear(params_, "fc.fc1", kInputDim, h.prior_hidden, rng);
  l2_ = grad::make_linear(params_, "fc.fc2", h.prior_hidden, h.prior_hidden,
                          rng);
  dec1_ = grad::make_linear(params_, "dec.fc1", h.prior_hidden,
                            h.decoder_hidden, rng);
  dec2_ = grad::make_linear(params_, "dec.fc2", h.decoder_hidden,
                            5 * kNumComponents, rng);
}

MixtureHead FcModel::forward(Tape& t, const double* inputs, int batch) {
  Value x = t.leaf(inputs, batch, kInputDim);
  Value h = t.relu(apply_linear(t, l2_, t.relu(apply_linear(t, l1_, x))));
  Value dec = apply_linear(t, dec2_, t.relu(apply_linear(t, dec1_, h)));
  return split_heads(t, dec);
}

std::unique_ptr<FilterModel> make_model(ModelKind kind, const FilterHyper& h,
                                        std::uint64_t seed, int t_max) {
  if (kind == ModelKind::Pmc)
    return std::make_unique<PmcModel>(h, seed, t_max);
  return std::make_unique<FcModel>(h, seed);
}

MixturePrediction FilterModel::predict(const FilterInput& in) {
  std::vector<MixturePrediction> out;
  predict_batch({in}, out);
  return out[0];
}

void FilterModel::predict_batch(const std::vector<FilterInput>& in,
                                std::vector<MixturePrediction>& out) {
  out.clear();
  out.reserve(in.size());
  const int chunk = 256;
  for (std::size_t base = 0; base < in.size(); base += chunk) {
    int b = static_cast<int>(std::min<std::size_t>(chunk, in.size() - base));
    std::vector<double> buf(static_cast<std::size_t>(b) * kInputDim);
    for (int i = 0; i < b; ++i)
      std::copy(in[base + i].v.begin(), in[base + i].v.end(),
                buf.begin() + i * kInputDim);
    Tape t;
    MixtureHead head = forward(t, buf.data(), b);
    Value lam = t.softmax_rows(head.lambda_logits);
    const auto& lv = t.val(lam);
    const auto& mv = t.val(head.mu);
    const auto& sv = t.val(head.sigma);
    for (int i = 0; i < b; ++i) {
      MixturePrediction p;
      for (int j = 0; j < kNumComponents; ++j) {
        p.lambda[j] = lv[i * kNumComponents + j];
        p.mu[j] = {mv[i * 2 * kNumComponents + 2 * j],
                   mv[i * 2 * kNumComponents + 2 * j + 1]};
        p.sigma[j] = {sv[i * 2 * kNumComponents + 2 * j],
                      sv[i * 2 * kNumComponents + 2 * j + 1]};
        if (!std::isfinite(p.lambda[j]))
          throw std::runtime_error("non-finite mixture weight head");
        if (!std::isfinite(p.mu[j].x) || !std::isfinite(p.mu[j].y))
          throw std::runtime_error("non-finite mean head");
        if (!std::isfinite(p.sigma[j].x) || !std::isfinite(p.sigma[j].y))
          throw std::runtime_error("non-finite sigma head");
      }
      out.push_back(p);
    }
  }
}

// ---------------------------------------------------------------------------
// NLL

Value nll_loss(Tape& t, const MixtureHead& head, const double* targets,
               int batch) {
  Value y = t.leaf(targets, batch, 2);
  Value logp_all;  // B x 8, per-component log density at y
  for (int j = 0; j < kNumComponents; ++j) {
    Value mu_j = t.slice_cols(head.mu, 2 * j, 2 * j + 2);
    Value sig_j = t.slice_cols(head.sigma, 2 * j, 2 * j + 2);
    Value z = t.div(t.sub(y, mu_j), sig_j);
    Value terms = t.add(t.log(sig_j), t.scale(t.mul(z, z), 0.5));  // B x 2
    std::vector<double> ones(2, 1.0);
    Value rowsum = t.matmul(terms, t.leaf(ones, 2, 1));            // B x 1
    Value logp = t.add_const(t.neg(rowsum), -kLog2Pi);
    logp_all = j == 0 ? logp : t.concat_cols(logp_all, logp);
  }
  // log sum_i lambda_i p_i = lse(logits + logp) - lse(logits)
  Value joint = t.logsumexp_rows(t.add(head.lambda_logits, logp_all));
  Value norm = t.logsumexp_rows(head.lambda_logits);
  return t.neg(t.mean_all(t.sub(joint, norm)));
}

double nll_value(const MixturePrediction& pred, Vec2 y) {
  double mx = -std::numeric_limits<double>::infinity();
  std::array<double, kNumComponents> lp;
  for (int j = 0; j < kNumComponents; ++j) {
    double zx = (y.x - pred.mu[j].x) / pred.sigma[j].x;
    double zy = (y.y - pred.mu[j].y) / pred.sigma[j].y;
    lp[j] = std::log(std::max(pred.lambda[j], 1e-300)) - kLog2Pi -
            std::log(pred.sigma[j].x) - std::log(pred.sigma[j].y) -
            0.5 * (zx * zx + zy * zy);
    mx = std::max(mx, lp[j]);
  }
  double s = 0;
  for (double v : lp) s += std::exp(v - mx);
  return -(mx + std::log(s));
}

// ---------------------------------------------------------------------------
// Training

TrainResult train_filter(FilterModel& model, const std::vector<Sample>& train,
                         const std::vector<Sample>& val,
                         const FilterHyper& hyper, std::uint64_t seed) {
  if (train.empty()) throw world::ConfigError("train_filter: empty dataset");
  std::mt19937_64 rng(seed);
  grad::AdamState opt;
  opt.cfg.lr = hyper.lr;

  auto eval_nll = [&](const std::vector<Sample>& set) {
    if (set.empty()) return 0.0;
    double total = 0;
    const int chunk = 512;
    for (std::size_t base = 0; base < set.size(); base += chunk) {
      int b = static_cast<int>(std::min<std::size_t>(chunk, set.size() - base));
      std::vector<double> xs(static_cast<std::size_t>(b) * kInputDim);
      std::vector<double> ys(static_cast<std::size_t>(b) * 2);
      for (int i = 0; i < b; ++i) {
        std::copy(set[base + i].first.v.begin(), set[base + i].first.v.end(),
                  xs.begin() + i * kInputDim);
        ys[2 * i] = set[base + i].second.x;
        ys[2 * i + 1] = set[base + i].second.y;
      }
      Tape t;
      MixtureHead h = model.forward(t, xs.data(), b);
      total += t.scalar_val(nll_loss(t, h, ys.data(), b)) * b;
    }
    return total / static_cast<double>(set.size());
  };

  TrainResult res;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;
  int since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  int halvings = 0;
  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    model.set_train_progress(std::min(
        1.0, std::max(static_cast<double>(epoch) /
                          std::max(hyper.max_epochs - 1, 1),
                      0.5 * halvings)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    int batches = 0;
    for (std::size_t base = 0; base < order.size();
         base += static_cast<std::size_t>(hyper.batch)) {
      int b = static_cast<int>(
          std::min<std::size_t>(hyper.batch, order.size() - base));
      std::vector<double> xs(static_cast<std::size_t>(b) * kInputDim);
      std::vector<double> ys(static_cast<std::size_t>(b) * 2);
      for (int i = 0; i < b; ++i) {
        const Sample& s = train[order[base + i]];
        std::copy(s.first.v.begin(), s.first.v.end(),
                  xs.begin() + i * kInputDim);
        ys[2 * i] = s.second.x;
        ys[2 * i + 1] = s.second.y;
      }
      Tape t;
      MixtureHead h = model.forward_train(t, xs.data(), b, rng);
      Value loss = nll_loss(t, h, ys.data(), b);
      epoch_loss += t.scalar_val(loss);
      ++batches;
      model.params().zero_grad();
      t.backward(loss);
      grad::adam_step(model.params(), opt);
    }
    res.train_nll.push_back(epoch_loss / std::max(batches, 1));
    double v = val.empty() ? res.train_nll.back() : eval_nll(val);
    res.val_nll.push_back(v);

    if (v < best_val - 1e-9) {
      best_val = v;
      res.best_epoch = epoch;
      since_best = 0;
      best_params.clear();
      for (const auto& p : model.params().all()) best_params.push_back(p->data);
    } else {
      if (++since_best >= hyper.patience) break;
      // Plateau: halve the step size (optimizer moments reset alongside).
      int plateau = std::max(2, hyper.patience / 3);
      if (since_best % plateau == 0) {
        ++halvings;
        double lr = opt.cfg.lr * 0.5;
        opt = grad::AdamState{};
        opt.cfg.lr = lr;
      }
    }
  }

  if (!best_params.empty()) {
    const auto& ps = model.params().all();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->data = best_params[i];
  }
  return res;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {
void check_lengths(std::size_t a, std::size_t b) {
  if (a != b || a == 0)
    throw world::ContractError("metric inputs empty or mismatched");
}
}  // namespace

double metric_ll(const std::vector<MixturePrediction>& preds,
                 const std::vector<Vec2>& targets) {
  check_lengths(preds.size(), targets.size());
  double s = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    s += -nll_value(preds[i], targets[i]);
  return s / static_cast<double>(preds.size());
}

double metric_ade(const std::vector<MixturePrediction>& preds,
                  const std::vector<Vec2>& targets) {
  check_lengths(preds.size(), targets.size());
  double s = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Vec2 mean{};
    for (int j = 0; j < kNumComponents; ++j)
      mean += preds[i].mu[j] * preds[i].lambda[j];
    s += dist(mean, targets[i]);
  }
  return s / static_cast<double>(preds.size());
}

double disk_probability(const MixturePrediction& pred, Vec2 center,
                        double delta) {
  if (delta <= 0) throw world::ConfigError("disk_probability: delta <= 0");
  const int n = 64;
  const double h = 2 * delta / n;
  const double r2 = delta * delta;
  double mass = 0;
  for (int iy = 0; iy < n; ++iy) {
    double y = center.y - delta + (iy + 0.5) * h;
    for (int ix = 0; ix < n; ++ix) {
      double x = center.x - delta + (ix + 0.5) * h;
      double dx = x - center.x, dy = y - center.y;
      // cell coverage: 1 inside, 0 outside, subsampled on the rim so the
      // mask error stays an order below the 1e-3 tolerance
      double near = std::hypot(std::abs(dx) - h / 2, std::abs(dy) - h / 2);
      double far = std::hypot(std::abs(dx) + h / 2, std::abs(dy) + h / 2);
      double cover;
      if (far * far <= r2) {
        cover = 1.0;
      } else if (std::abs(dx) > h / 2 && std::abs(dy) > h / 2 &&
                 near * near >= r2) {
        cover = 0.0;
      } else {
        const int s = 8;
        int in = 0;
        for (int sy = 0; sy < s; ++sy)
          for (int sx = 0; sx < s; ++sx) {
            double ux = dx - h / 2 + (sx + 0.5) * h / s;
            double uy = dy - h / 2 + (sy + 0.5) * h / s;
            if (ux * ux + uy * uy <= r2) ++in;
          }
        cover = static_cast<double>(in) / (s * s);
      }
      if (cover == 0.0) continue;
      double pdf = 0;
      for (int j = 0; j < kNumComponents; ++j) {
        double zx = (x - pred.mu[j].x) / pred.sigma[j].x;
        double zy = (y - pred.mu[j].y) / pred.sigma[j].y;
        pdf += pred.lambda[j] / (2 * std::numbers::pi * pred.sigma[j].x *
                                 pred.sigma[j].y) *
               std::exp(-0.5 * (zx * zx + zy * zy));
      }
      mass += pdf * cover * h * h;
    }
  }
  return mass;
}

double metric_ctp(const std::vector<MixturePrediction>& preds,
                  const std::vector<Vec2>& targets, double delta,
                  double p_thresh) {
  check_lengths(preds.size(), targets.size());
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (disk_probability(preds[i], targets[i], delta) >= p_thresh) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double metric_desv(const std::vector<MixturePrediction>& preds,
                   const std::vector<Vec2>& targets) {
  check_lengths(preds.size(), targets.size());
  const double ideal = 1.0 - std::exp(-0.5);
  int inside = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const MixturePrediction& p = preds[i];
    Vec2 y = targets[i];
    // max-responsibility component
    int best = 0;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < kNumComponents; ++j) {
      double zx = (y.x - p.mu[j].x) / p.sigma[j].x;
      double zy = (y.y - p.mu[j].y) / p.sigma[j].y;
      double lp = std::log(std::max(p.lambda[j], 1e-300)) -
                  std::log(p.sigma[j].x) - std::log(p.sigma[j].y) -
                  0.5 * (zx * zx + zy * zy);
      if (lp > best_lp) {
        best_lp = lp;
        best = j;
      }
    }
    double zx = (y.x - p.mu[best].x) / p.sigma[best].x;
    double zy = (y.y - p.mu[best].y) / p.sigma[best].y;
    if (zx * zx + zy * zy <= 1.0) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(preds.size()) -
         ideal;
}

double bench_runtime(FilterModel& model, int batch, int reps) {
  if (batch <= 0) throw world::ConfigError("bench_runtime: batch must be > 0");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0, 1);
  std::vector<double> xs(static_cast<std::size_t>(batch) * kInputDim);
  for (double& v : xs) v = uni(rng);
  std::vector<double> times;
  for (int r = 0; r < std::max(reps, 20); ++r) {
    auto t0 = std::chrono::steady_clock::now();
    Tape t;
    (void)model.forward(t, xs.data(), batch);
    auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace pursuit::filter
