// Copyright 2026 The reachkin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reachkin/agenet.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/random.hpp"

namespace reachkin {

void normalize_window(MotionWindow& w) {
  for (int c = 0; c < w.channels; ++c) {
    auto first = w.values.begin() + static_cast<std::ptrdiff_t>(c * w.frames);
    auto last = first + w.frames;
    const auto [lo, hi] = std::minmax_element(first, last);
    const double mn = *lo, mx = *hi;
    for (auto it = first; it != last; ++it) {
      *it = mx > mn ? 2.0 * (*it - mn) / (mx - mn) - 1.0 : 0.0;
    }
  }
}

std::vector<MotionWindow> window_sequence(const SkeletonSequence& seq, double label, int window,
                                          int stride) {
  const auto left = seq.track(Joint::left_wrist);
  const auto right = seq.track(Joint::right_wrist);
  const auto frames = static_cast<int>(std::min(left.size(), right.size()));
  if (frames < window) {
    throw Error(ErrorCode::SequenceTooShort, "participant '" + seq.participant_id + "' has " +
                                                 std::to_string(frames) + " frames, need " +
                                                 std::to_string(window));
  }
  if (stride < 1) throw Error(ErrorCode::ConfigError, "window stride must be positive");
  std::vector<MotionWindow> out;
  for (int start = 0; start + window <= frames; start += stride) {
    MotionWindow w;
    w.frames = window;
    w.label = label;
    w.participant_id = seq.participant_id;
    w.values.resize(static_cast<std::size_t>(4 * window));
    for (int t = 0; t < window; ++t) {
      const auto k = static_cast<std::size_t>(start + t);
      w.values[static_cast<std::size_t>(0 * window + t)] = left[k].position.x();
      w.values[static_cast<std::size_t>(1 * window + t)] = left[k].position.y();
      w.values[static_cast<std::size_t>(2 * window + t)] = right[k].position.x();
      w.values[static_cast<std::size_t>(3 * window + t)] = right[k].position.y();
    }
    normalize_window(w);
    out.push_back(std::move(w));
  }
  return out;
}

WindowDataset window_dataset(std::span<const WindowSource> sources, int window, int stride) {
  WindowDataset out;
  for (const auto& src : sources) {
    try {
      auto w = window_sequence(*src.sequence, src.label, window, stride);
      out.windows.insert(out.windows.end(), std::make_move_iterator(w.begin()),
                         std::make_move_iterator(w.end()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SequenceTooShort) throw;
      out.skipped.push_back(src.sequence->participant_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Architecture

std::vector<int> Architecture::stage_lengths() const {
  std::vector<int> lengths;
  int len = window;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    len = (len - kernels[i] + 1) / pools[i];
    lengths.push_back(len);
  }
  return lengths;
}

int Architecture::flatten_size() const {
  if (conv_channels.empty()) return input_channels * window;
  return conv_channels.back() * stage_lengths().back();
}

void Architecture::validate() const {
  auto fail = [](const std::string& what) { return Error(ErrorCode::InvalidArchitecture, what); };
  if (input_channels < 1 || window < 1) throw fail("input shape must be positive");
  if (kernels.size() != conv_channels.size() || pools.size() != conv_channels.size()) {
    throw fail("conv_channels, kernels and pools must have equal length");
  }
  int len = window;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    if (conv_channels[i] < 1 || kernels[i] < 1 || pools[i] < 1) {
      throw fail("layer sizes must be positive");
    }
    len = (len - kernels[i] + 1) / pools[i];
    if (len < 1) throw fail("conv stage " + std::to_string(i + 1) + " leaves no time steps");
  }
  for (int h : hidden) {
    if (h < 1) throw fail("hidden widths must be positive");
  }
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  int cin = input_channels;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    n += static_cast<std::size_t>(conv_channels[i] * cin * kernels[i] + conv_channels[i]);
    cin = conv_channels[i];
  }
  int in = flatten_size();
  for (int h : hidden) {
    n += static_cast<std::size_t>(h * in + h);
    in = h;
  }
  return n + static_cast<std::size_t>(in + 1);
}

namespace {

std::vector<int> parse_int_list(std::string_view value) {
  std::vector<int> out;
  if (csv::trim(value).empty()) return out;
  for (auto f : csv::split(value)) {
    long long v = 0;
    if (!csv::parse_int(f, v)) {
      throw Error(ErrorCode::InvalidArchitecture, "bad integer '" + std::string(f) + "'");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

Architecture Architecture::parse(std::istream& in) {
  Architecture a;
  std::string line;
  while (std::getline(in, line)) {
    if (csv::is_comment_or_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidArchitecture, "expected key = value");
    const auto key = csv::trim(std::string_view(line).substr(0, eq));
    const auto value = csv::trim(std::string_view(line).substr(eq + 1));
    const auto list = parse_int_list(value);
    auto single = [&] {
      if (list.size() != 1) {
        throw Error(ErrorCode::InvalidArchitecture, std::string(key) + " takes one value");
      }
      return list.front();
    };
    if (key == "input_channels") a.input_channels = single();
    else if (key == "window") a.window = single();
    else if (key == "conv_channels") a.conv_channels = list;
    else if (key == "kernels") a.kernels = list;
    else if (key == "pools") a.pools = list;
    else if (key == "hidden") a.hidden = list;
    else throw Error(ErrorCode::InvalidArchitecture, "unknown key '" + std::string(key) + "'");
  }
  a.validate();
  return a;
}

void Architecture::write(std::ostream& out) const {
  out << "input_channels = " << input_channels << '\n'
      << "window = " << window << '\n'
      << "conv_channels = " << join(conv_channels) << '\n'
      << "kernels = " << join(kernels) << '\n'
      << "pools = " << join(pools) << '\n'
      << "hidden = " << join(hidden) << '\n';
}

// ---------------------------------------------------------------------------
// Network evaluation

namespace {

struct ConvLayer {
  int cin, cout, kernel, pool, len_in, len_conv, len_pool;
  std::size_t w, b;
};

struct DenseLayer {
  int in, out;
  std::size_t w, b;
  bool relu;
};

struct Layout {
  std::vector<ConvLayer> convs;
  std::vector<DenseLayer> dense;
  std::size_t total = 0;
};

Layout make_layout(const Architecture& a) {
  a.validate();
  Layout l;
  std::size_t off = 0;
  int cin = a.input_channels, len = a.window;
  for (std::size_t i = 0; i < a.conv_channels.size(); ++i) {
    ConvLayer c{};
    c.cin = cin;
    c.cout = a.conv_channels[i];
    c.kernel = a.kernels[i];
    c.pool = a.pools[i];
    c.len_in = len;
    c.len_conv = len - c.kernel + 1;
    c.len_pool = c.len_conv / c.pool;
    c.w = off;
    off += static_cast<std::size_t>(c.cout * c.cin * c.kernel);
    c.b = off;
    off += static_cast<std::size_t>(c.cout);
    l.convs.push_back(c);
    cin = c.cout;
    len = c.len_pool;
  }
  int in = a.flatten_size();
  for (std::size_t j = 0; j <= a.hidden.size(); ++j) {
    const bool last = j == a.hidden.size();
    DenseLayer d{in, last ? 1 : a.hidden[j], 0, 0, !last};
    d.w = off;
    off += static_cast<std::size_t>(d.in * d.out);
    d.b = off;
    off += static_cast<std::size_t>(d.out);
    l.dense.push_back(d);
    in = d.out;
  }
  l.total = off;
  return l;
}

struct Cache {
  std::vector<std::vector<double>> conv_pre;  // cout x len_conv
  std::vector<std::vector<double>> pooled;    // cout x len_pool, after ReLU
  std::vector<std::vector<int>> argmax;       // index into len_conv
  std::vector<std::vector<double>> dense_in;  // input of each dense layer
  std::vector<std::vector<double>> dense_pre;
};

double run_forward(const Layout& l, std::span<const double> p, const MotionWindow& x, Cache& c) {
  c.conv_pre.resize(l.convs.size());
  c.pooled.resize(l.convs.size());
  c.argmax.resize(l.convs.size());
  std::span<const double> input(x.values);
  for (std::size_t i = 0; i < l.convs.size(); ++i) {
    const auto& L = l.convs[i];
    auto& pre = c.conv_pre[i];
    pre.assign(static_cast<std::size_t>(L.cout * L.len_conv), 0.0);
    for (int o = 0; o < L.cout; ++o) {
      double* out = pre.data() + o * L.len_conv;
      std::fill(out, out + L.len_conv, p[L.b + static_cast<std::size_t>(o)]);
      for (int ci = 0; ci < L.cin; ++ci) {
        const double* in = input.data() + ci * L.len_in;
        const double* w = p.data() + L.w + static_cast<std::size_t>((o * L.cin + ci) * L.kernel);
        for (int k = 0; k < L.kernel; ++k) {
          const double wk = w[k];
          for (int t = 0; t < L.len_conv; ++t) out[t] += wk * in[t + k];
        }
      }
    }
    auto& pooled = c.pooled[i];
    auto& arg = c.argmax[i];
    pooled.assign(static_cast<std::size_t>(L.cout * L.len_pool), 0.0);
    arg.assign(pooled.size(), 0);
    for (int o = 0; o < L.cout; ++o) {
      const double* row = pre.data() + o * L.len_conv;
      for (int t = 0; t < L.len_pool; ++t) {
        int best = t * L.pool;
        for (int k = 1; k < L.pool; ++k) {
          if (row[t * L.pool + k] > row[best]) best = t * L.pool + k;
        }
        const auto idx = static_cast<std::size_t>(o * L.len_pool + t);
        arg[idx] = best;
        pooled[idx] = std::max(row[best], 0.0);
      }
    }
    input = pooled;
  }
  c.dense_in.resize(l.dense.size());
  c.dense_pre.resize(l.dense.size());
  std::vector<double> act(input.begin(), input.end());
  for (std::size_t j = 0; j < l.dense.size(); ++j) {
    const auto& D = l.dense[j];
    c.dense_in[j] = act;
    auto& pre = c.dense_pre[j];
    pre.assign(static_cast<std::size_t>(D.out), 0.0);
    for (int o = 0; o < D.out; ++o) {
      const double* w = p.data() + D.w + static_cast<std::size_t>(o * D.in);
      double s = p[D.b + static_cast<std::size_t>(o)];
      for (int i = 0; i < D.in; ++i) s += w[i] * act[static_cast<std::size_t>(i)];
      pre[static_cast<std::size_t>(o)] = s;
    }
    act = pre;
    if (D.relu) {
      for (double& v : act) v = std::max(v, 0.0);
    }
  }
  return act.front();
}

void run_backward(const Layout& l, std::span<const double> p, const MotionWindow& x,
                  const Cache& c, double dout, std::span<double> grad, double weight) {
  std::vector<double> delta{dout * weight};
  for (std::size_t jj = l.dense.size(); jj-- > 0;) {
    const auto& D = l.dense[jj];
    if (D.relu) {
      for (std::size_t o = 0; o < delta.size(); ++o) {
        if (!(c.dense_pre[jj][o] > 0.0)) delta[o] = 0.0;
      }
    }
    const auto& in = c.dense_in[jj];
    std::vector<double> back(static_cast<std::size_t>(D.in), 0.0);
    for (int o = 0; o < D.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      double* gw = grad.data() + D.w + static_cast<std::size_t>(o * D.in);
      const double* w = p.data() + D.w + static_cast<std::size_t>(o * D.in);
      for (int i = 0; i < D.in; ++i) {
        gw[i] += d * in[static_cast<std::size_t>(i)];
        back[static_cast<std::size_t>(i)] += d * w[i];
      }
      grad[D.b + static_cast<std::size_t>(o)] += d;
    }
    delta = std::move(back);
  }
  // delta is now the gradient with respect to the flattened conv output.
  for (std::size_t ii = l.convs.size(); ii-- > 0;) {
    const auto& L = l.convs[ii];
    const auto& pre = c.conv_pre[ii];
    std::vector<double> dpre(pre.size(), 0.0);
    for (std::size_t k = 0; k < delta.size(); ++k) {
      const int o = static_cast<int>(k) / L.len_pool;
      const auto at = static_cast<std::size_t>(o * L.len_conv + c.argmax[ii][k]);
      if (pre[at] > 0.0) dpre[at] += delta[k];
    }
    const std::span<const double> input =
        ii == 0 ? std::span<const double>(x.values) : std::span<const double>(c.pooled[ii - 1]);
    std::vector<double> back(ii == 0 ? 0 : static_cast<std::size_t>(L.cin * L.len_in), 0.0);
    for (int o = 0; o < L.cout; ++o) {
      const double* d = dpre.data() + o * L.len_conv;
      double db = 0.0;
      for (int t = 0; t < L.len_conv; ++t) db += d[t];
      grad[L.b + static_cast<std::size_t>(o)] += db;
      for (int ci = 0; ci < L.cin; ++ci) {
        const double* in = input.data() + ci * L.len_in;
        const std::size_t woff = L.w + static_cast<std::size_t>((o * L.cin + ci) * L.kernel);
        for (int k = 0; k < L.kernel; ++k) {
          double g = 0.0;
          for (int t = 0; t < L.len_conv; ++t) g += d[t] * in[t + k];
          grad[woff + static_cast<std::size_t>(k)] += g;
          if (!back.empty()) {
            const double wk = p[woff + static_cast<std::size_t>(k)];
            double* b = back.data() + ci * L.len_in;
            for (int t = 0; t < L.len_conv; ++t) b[t + k] += wk * d[t];
          }
        }
      }
    }
    delta = std::move(back);
  }
}

ActivationPattern pattern_of(const Layout& l, const Cache& c) {
  ActivationPattern pat;
  for (std::size_t i = 0; i < l.convs.size(); ++i) {
    for (double v : c.conv_pre[i]) {
      pat.relu_active.push_back(v > 0.0 ? 1 : 0);
      pat.has_kink |= v == 0.0;
    }
    pat.pool_argmax.insert(pat.pool_argmax.end(), c.argmax[i].begin(), c.argmax[i].end());
  }
  for (std::size_t j = 0; j < l.dense.size(); ++j) {
    if (!l.dense[j].relu) continue;
    for (double v : c.dense_pre[j]) {
      pat.relu_active.push_back(v > 0.0 ? 1 : 0);
      pat.has_kink |= v == 0.0;
    }
  }
  return pat;
}

void check_window(const Architecture& a, const MotionWindow& w) {
  if (w.channels != a.input_channels || w.frames != a.window ||
      w.values.size() != static_cast<std::size_t>(w.channels * w.frames)) {
    throw Error(ErrorCode::InvalidArchitecture, "window shape does not match the architecture");
  }
}

}  // namespace

AgeNetModel AgeNetModel::initialize(const Architecture& arch, std::uint64_t seed) {
  const Layout l = make_layout(arch);
  AgeNetModel m;
  m.arch = arch;
  m.seed = seed;
  m.params.assign(l.total, 0.0);
  Rng rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t k = 0; k < count; ++k) m.params[off + k] = rng.uniform(-bound, bound);
  };
  for (const auto& c : l.convs) {
    fill(c.w, static_cast<std::size_t>(c.cout * c.cin * c.kernel), c.cin * c.kernel);
  }
  for (const auto& d : l.dense) fill(d.w, static_cast<std::size_t>(d.in * d.out), d.in);
  return m;
}

AgeNetModel AgeNetModel::zeros(const Architecture& arch) {
  AgeNetModel m;
  m.arch = arch;
  m.params.assign(make_layout(arch).total, 0.0);
  return m;
}

double forward(const AgeNetModel& model, const MotionWindow& window) {
  return forward(model, window, nullptr);
}

double forward(const AgeNetModel& model, const MotionWindow& window, ActivationPattern* pattern) {
  check_window(model.arch, window);
  const Layout l = make_layout(model.arch);
  Cache c;
  const double y = run_forward(l, model.params, window, c);
  if (pattern) *pattern = pattern_of(l, c);
  return y;
}

double loss_and_gradient(const AgeNetModel& model, const MotionWindow& window,
                         std::span<double> grad, double weight) {
  check_window(model.arch, window);
  const Layout l = make_layout(model.arch);
  Cache c;
  const double y = run_forward(l, model.params, window, c);
  const double err = y - window.label;
  run_backward(l, model.params, window, c, 2.0 * err, grad, weight);
  return err * err;
}

GradCheckReport grad_check(const AgeNetModel& model, const MotionWindow& window,
                           std::size_t samples, double step, std::uint64_t seed) {
  GradCheckReport report;
  std::vector<double> grad(model.params.size(), 0.0);
  loss_and_gradient(model, window, grad);
  ActivationPattern base;
  forward(model, window, &base);

  std::vector<std::size_t> order(model.params.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(std::min(samples, order.size()));
  std::sort(order.begin(), order.end());

  AgeNetModel probe = model;
  for (std::size_t idx : order) {
    const double original = probe.params[idx];
    ActivationPattern up, down;
    probe.params[idx] = original + step;
    const double yp = forward(probe, window, &up);
    probe.params[idx] = original - step;
    const double ym = forward(probe, window, &down);
    probe.params[idx] = original;
    if (!(up == base) || !(down == base)) {
      ++report.excluded;
      continue;
    }
    const double lp = (yp - window.label) * (yp - window.label);
    const double lm = (ym - window.label) * (ym - window.label);
    const double numeric = (lp - lm) / (2.0 * step);
    const double analytic = grad[idx];
    // Gradients below 1e-7 carry no relative information at this step size.
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
    report.max_relative_error =
        std::max(report.max_relative_error, std::abs(numeric - analytic) / scale);
    ++report.checked;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Training

namespace {

template <bool Parallel>
std::vector<double> predict_all(const AgeNetModel& model, std::span<const MotionWindow> windows) {
  std::vector<double> out(windows.size());
  const auto n = static_cast<std::ptrdiff_t>(windows.size());
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = forward(model, windows[static_cast<std::size_t>(i)]);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = forward(model, windows[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

template <bool Parallel>
double mse_impl(const AgeNetModel& model, std::span<const MotionWindow> windows) {
  if (windows.empty()) return 0.0;
  const auto pred = predict_all<Parallel>(model, windows);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - windows[i].label;
    sum += e * e;
  }
  return sum / static_cast<double>(windows.size());
}

template <bool Parallel>
TrainResult train_impl(AgeNetModel model, std::span<const MotionWindow> train_set,
                       std::span<const MotionWindow> val_set, const TrainOptions& opt) {
  if (train_set.empty()) throw Error(ErrorCode::TooFewParticipants, "empty training set");
  if (opt.batch_size < 1 || opt.epochs < 0) {
    throw Error(ErrorCode::ConfigError, "batch size and epochs must be positive");
  }
  if (opt.init_output_bias && opt.learning_rate != 0.0) {
    double mean = 0.0;
    for (const auto& w : train_set) mean += w.label;
    model.output_bias() = mean / static_cast<double>(train_set.size());
  }
  const std::size_t np = model.params.size();
  const auto batch_cap = static_cast<std::size_t>(opt.batch_size);
  std::vector<std::vector<double>> sample_grads(batch_cap, std::vector<double>(np));
  std::vector<double> sample_loss(batch_cap), velocity(np, 0.0), grad(np);

  TrainResult result;
  result.trace.push_back({0, mse_impl<Parallel>(model, train_set), mse_impl<Parallel>(model, val_set)});
  result.model = model;
  double best_val = result.trace.back().val_mse;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(opt.seed);
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_cap) {
      const std::size_t count = std::min(batch_cap, order.size() - start);
      const auto nb = static_cast<std::ptrdiff_t>(count);
      auto one = [&](std::ptrdiff_t b) {
        auto& g = sample_grads[static_cast<std::size_t>(b)];
        std::fill(g.begin(), g.end(), 0.0);
        sample_loss[static_cast<std::size_t>(b)] = loss_and_gradient(
            model, train_set[order[start + static_cast<std::size_t>(b)]], g);
      };
      if constexpr (Parallel) {
        std::exception_ptr failure;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < nb; ++b) {
          try {
            one(b);
          } catch (...) {
#pragma omp critical(reachkin_train_failure)
            if (!failure) failure = std::current_exception();
          }
        }
        if (failure) std::rethrow_exception(failure);
      } else {
        for (std::ptrdiff_t b = 0; b < nb; ++b) one(b);
      }
      // Fixed summation order keeps the update independent of thread count.
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = 0; b < count; ++b) {
        epoch_loss += sample_loss[b];
        const auto& g = sample_grads[b];
        for (std::size_t k = 0; k < np; ++k) grad[k] += g[k];
      }
      const double scale = 1.0 / static_cast<double>(count);
      for (std::size_t k = 0; k < np; ++k) {
        velocity[k] = opt.momentum * velocity[k] - opt.learning_rate * grad[k] * scale;
        model.params[k] += velocity[k];
      }
    }
    EpochLoss e{epoch, epoch_loss / static_cast<double>(train_set.size()),
                mse_impl<Parallel>(model, val_set)};
    result.trace.push_back(e);
    if (!std::isfinite(e.train_mse) || !std::isfinite(e.val_mse)) {
      std::ostringstream msg;
      msg << "loss became non-finite at epoch " << epoch << "; trace:";
      for (const auto& t : result.trace) msg << ' ' << t.epoch << ':' << t.train_mse << '/' << t.val_mse;
      throw Error(ErrorCode::DivergedLoss, msg.str());
    }
    if (e.val_mse < best_val) {
      best_val = e.val_mse;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace

double mean_squared_error(const AgeNetModel& model, std::span<const MotionWindow> windows) {
  return mse_impl<true>(model, windows);
}

TrainResult train(AgeNetModel model, std::span<const MotionWindow> train_set,
                  std::span<const MotionWindow> val_set, const TrainOptions& options) {
  return train_impl<true>(std::move(model), train_set, val_set, options);
}

TrainResult train_serial(AgeNetModel model, std::span<const MotionWindow> train_set,
                         std::span<const MotionWindow> val_set, const TrainOptions& options) {
  return train_impl<false>(std::move(model), train_set, val_set, options);
}

// ---------------------------------------------------------------------------
// Cross-validation

Regressor cnn_regressor(const CrossValOptions& options) {
  return [options](std::span<const MotionWindow> train_set, std::span<const MotionWindow> val_set,
                   int fold) {
    const auto fold_seed = mix_seed(options.seed, static_cast<std::uint64_t>(fold));
    TrainOptions topt = options.train;
    topt.seed = mix_seed(fold_seed, 1);
    auto model = AgeNetModel::initialize(options.arch, mix_seed(fold_seed, 2));
    const auto trained = train(std::move(model), train_set, val_set, topt);
    return predict_all<true>(trained.model, val_set);
  };
}

CrossValReport cross_validate(std::span<const MotionWindow> windows, const CrossValOptions& opt,
                              const Regressor& regressor) {
  opt.bins.validate();
  std::set<std::string> id_set;
  for (const auto& w : windows) id_set.insert(w.participant_id);
  const std::vector<std::string> ids(id_set.begin(), id_set.end());
  if (ids.size() < 10) {
    throw Error(ErrorCode::TooFewParticipants,
                std::to_string(ids.size()) + " participants, need at least 10");
  }
  if (opt.folds < 1 || !(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "folds must be positive and split inside (0, 1)");
  }
  const Regressor fit = regressor ? regressor : cnn_regressor(opt);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(opt.train_fraction * static_cast<double>(ids.size()))),
      1, ids.size() - 1);

  CrossValReport report;
  report.bins = opt.bins;
  const auto folds = static_cast<std::size_t>(opt.folds);
  report.train_participants.resize(folds);
  report.val_participants.resize(folds);
  std::vector<std::vector<Prediction>> fold_preds(folds);
  report.fold_rmse.assign(folds, 0.0);

  for (std::size_t f = 0; f < folds; ++f) {
    auto shuffled = ids;
    Rng rng(mix_seed(opt.seed, 1000 + f));
    rng.shuffle(shuffled);
    report.train_participants[f].assign(shuffled.begin(),
                                        shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    report.val_participants[f].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                                      shuffled.end());
    std::sort(report.train_participants[f].begin(), report.train_participants[f].end());
    std::sort(report.val_participants[f].begin(), report.val_participants[f].end());
  }

  std::exception_ptr failure;
  const auto nf = static_cast<std::ptrdiff_t>(folds);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t fi = 0; fi < nf; ++fi) {
    try {
      const auto f = static_cast<std::size_t>(fi);
      const std::set<std::string> train_ids(report.train_participants[f].begin(),
                                            report.train_participants[f].end());
      std::vector<MotionWindow> train_set, val_set;
      for (const auto& w : windows) {
        (train_ids.count(w.participant_id) ? train_set : val_set).push_back(w);
      }
      const auto pred = fit(train_set, val_set, static_cast<int>(f));
      if (pred.size() != val_set.size()) {
        throw Error(ErrorCode::ConfigError, "regressor returned the wrong number of predictions");
      }
      double sq = 0.0;
      for (std::size_t i = 0; i < val_set.size(); ++i) {
        fold_preds[f].push_back({static_cast<int>(f), val_set[i].participant_id,
                                 val_set[i].label, pred[i]});
        sq += (pred[i] - val_set[i].label) * (pred[i] - val_set[i].label);
      }
      report.fold_rmse[f] = val_set.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(val_set.size()));
    } catch (...) {
#pragma omp critical(reachkin_cv_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t nbins = opt.bins.size();
  report.confusion.assign(nbins, std::vector<int>(nbins, 0));
  double sq = 0.0, sum = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<bool> seen(nbins, false);
    for (const auto& p : fold_preds[f]) {
      report.predictions.push_back(p);
      sq += (p.predicted - p.label) * (p.predicted - p.label);
      sum += p.label;
      const auto truth = opt.bins.index_of_prediction(p.label);
      seen[truth] = true;
      report.confusion[truth][opt.bins.index_of_prediction(p.predicted)]++;
    }
    for (std::size_t b = 0; b < nbins; ++b) {
      if (!seen[b]) {
        report.warnings.push_back("BinEmpty: fold " + std::to_string(f + 1) +
                                  " has no validation window in bin " + opt.bins.label(b));
      }
    }
  }
  const auto n = static_cast<double>(report.predictions.size());
  report.pooled_rmse = std::sqrt(sq / n);
  const double mean = sum / n;
  double var = 0.0;
  for (const auto& p : report.predictions) var += (p.label - mean) * (p.label - mean);
  report.baseline_rmse = std::sqrt(var / n);
  return report;
}

void write_cv_report_csv(std::ostream& out, const CrossValReport& report) {
  out << "fold,rmse\n";
  for (std::size_t f = 0; f < report.fold_rmse.size(); ++f) {
    out << f + 1 << ',' << format_double(report.fold_rmse[f]) << '\n';
  }
  out << "pooled," << format_double(report.pooled_rmse) << '\n';
  out << "baseline," << format_double(report.baseline_rmse) << '\n';
}

void write_confusion_csv(std::ostream& out, const CrossValReport& report) {
  out << "true_bin";
  for (std::size_t b = 0; b < report.bins.size(); ++b) out << ',' << report.bins.label(b);
  out << '\n';
  for (std::size_t t = 0; t < report.confusion.size(); ++t) {
    out << report.bins.label(t);
    for (int count : report.confusion[t]) out << ',' << count;
    out << '\n';
  }
}

}  // namespace reachkin
