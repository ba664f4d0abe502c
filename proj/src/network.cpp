#include "lvo/network.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "lvo/error.hpp"

namespace lvo {

namespace {

/// Channel-major feature map.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// TensorFlow-style SAME padding: output side = ceil(side / stride).
struct Padding {
  int out = 0;
  int before = 0;
};

Padding same_padding(int side, int kernel, int stride) {
  const int out = (side + stride - 1) / stride;
  const int total = std::max((out - 1) * stride + kernel - side, 0);
  return {out, total / 2};
}

Tensor conv_forward(const ConvLayer& l, const Tensor& in) {
  const Padding py = same_padding(in.height, l.kernel, l.stride);
  const Padding px = same_padding(in.width, l.kernel, l.stride);
  Tensor out(l.out_channels, py.out, px.out);
  const int k = l.kernel;
  for (int o = 0; o < l.out_channels; ++o) {
    for (int oy = 0; oy < py.out; ++oy) {
      for (int ox = 0; ox < px.out; ++ox) {
        double acc = l.bias[o];
        for (int c = 0; c < l.in_channels; ++c) {
          const double* w = &l.weights[((static_cast<std::size_t>(o) * l.in_channels + c) * k) * k];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * l.stride + ky - py.before;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * l.stride + kx - px.before;
              if (ix < 0 || ix >= in.width) continue;
              acc += w[ky * k + kx] * in.at(c, iy, ix);
            }
          }
        }
        out.at(o, oy, ox) = acc;
      }
    }
  }
  return out;
}

/// Accumulates weight/bias gradients; fills `din` when non-null.
void conv_backward(const ConvLayer& l, const Tensor& in, const Tensor& dout,
                   ConvLayer& grad, Tensor* din) {
  const Padding py = same_padding(in.height, l.kernel, l.stride);
  const Padding px = same_padding(in.width, l.kernel, l.stride);
  const int k = l.kernel;
  if (din != nullptr) *din = Tensor(in.channels, in.height, in.width);
  for (int o = 0; o < l.out_channels; ++o) {
    for (int oy = 0; oy < dout.height; ++oy) {
      for (int ox = 0; ox < dout.width; ++ox) {
        const double g = dout.at(o, oy, ox);
        if (g == 0.0) continue;
        grad.bias[o] += g;
        for (int c = 0; c < l.in_channels; ++c) {
          const std::size_t base = ((static_cast<std::size_t>(o) * l.in_channels + c) * k) * k;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * l.stride + ky - py.before;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * l.stride + kx - px.before;
              if (ix < 0 || ix >= in.width) continue;
              grad.weights[base + ky * k + kx] += g * in.at(c, iy, ix);
              if (din != nullptr) din->at(c, iy, ix) += g * l.weights[base + ky * k + kx];
            }
          }
        }
      }
    }
  }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = std::max(x, 0.0);
}

/// Zeroes gradient entries whose post-relu activation is not positive.
void relu_backward(const std::vector<double>& activation, std::vector<double>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

std::vector<double> dense_forward(const DenseLayer& l, const std::vector<double>& in) {
  std::vector<double> out(l.bias);
  for (int j = 0; j < l.out_features; ++j) {
    const double* w = &l.weights[static_cast<std::size_t>(j) * l.in_features];
    double acc = 0.0;
    for (int i = 0; i < l.in_features; ++i) acc += w[i] * in[i];
    out[j] += acc;
  }
  return out;
}

std::vector<double> dense_backward(const DenseLayer& l, const std::vector<double>& in,
                                   const std::vector<double>& dout, DenseLayer& grad) {
  std::vector<double> din(l.in_features, 0.0);
  for (int j = 0; j < l.out_features; ++j) {
    const double g = dout[j];
    if (g == 0.0) continue;
    grad.bias[j] += g;
    const std::size_t row = static_cast<std::size_t>(j) * l.in_features;
    for (int i = 0; i < l.in_features; ++i) {
      grad.weights[row + i] += g * in[i];
      din[i] += g * l.weights[row + i];
    }
  }
  return din;
}

/// Activations kept for the backward pass. Stream entries hold the input
/// followed by each post-relu conv output.
struct ForwardCache {
  std::vector<Tensor> flow;
  std::vector<Tensor> depth;
  Tensor concat;
  Tensor squeezed;  // post-relu, also the flattened regressor input
  std::vector<std::vector<double>> translation;  // input + each layer output
  std::vector<std::vector<double>> rotation;
};

void check_input(const LvoConfig& cfg, const Flow3D& sample) {
  if (sample.width() != cfg.input_width || sample.height() != cfg.input_height) {
    throw ShapeError("network expects " + std::to_string(cfg.input_width) + "x" +
                     std::to_string(cfg.input_height) + " input, got " +
                     std::to_string(sample.width()) + "x" +
                     std::to_string(sample.height()));
  }
}

std::vector<std::vector<double>> run_head(const std::vector<DenseLayer>& head,
                                          std::vector<double> input) {
  std::vector<std::vector<double>> acts;
  acts.push_back(std::move(input));
  for (std::size_t i = 0; i < head.size(); ++i) {
    auto out = dense_forward(head[i], acts.back());
    if (i + 1 < head.size()) relu_inplace(out);
    acts.push_back(std::move(out));
  }
  return acts;
}

ForwardCache run_forward(const LvoModel& m, const Flow3D& sample) {
  check_input(m.config, sample);
  const int h = sample.height();
  const int w = sample.width();
  ForwardCache cache;
  Tensor flow_in(2, h, w);
  Tensor depth_in(1, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      flow_in.at(0, y, x) = sample.at(x, y, 0);
      flow_in.at(1, y, x) = sample.at(x, y, 1);
      depth_in.at(0, y, x) = sample.at(x, y, 2);
    }
  }
  cache.flow.push_back(std::move(flow_in));
  cache.depth.push_back(std::move(depth_in));
  for (std::size_t i = 0; i < m.flow_stream.size(); ++i) {
    Tensor a = conv_forward(m.flow_stream[i], cache.flow.back());
    relu_inplace(a.data);
    cache.flow.push_back(std::move(a));
    Tensor b = conv_forward(m.depth_stream[i], cache.depth.back());
    relu_inplace(b.data);
    cache.depth.push_back(std::move(b));
  }
  const Tensor& fa = cache.flow.back();
  const Tensor& fb = cache.depth.back();
  cache.concat = Tensor(fa.channels + fb.channels, fa.height, fa.width);
  std::copy(fa.data.begin(), fa.data.end(), cache.concat.data.begin());
  std::copy(fb.data.begin(), fb.data.end(),
            cache.concat.data.begin() + static_cast<std::ptrdiff_t>(fa.data.size()));
  cache.squeezed = conv_forward(m.squeeze, cache.concat);
  relu_inplace(cache.squeezed.data);
  cache.translation = run_head(m.translation_head, cache.squeezed.data);
  cache.rotation = run_head(m.rotation_head, cache.squeezed.data);
  return cache;
}

RawPoseOutput output_of(const ForwardCache& cache) {
  RawPoseOutput out;
  std::copy_n(cache.translation.back().begin(), 6, out.translation.begin());
  std::copy_n(cache.rotation.back().begin(), 3, out.rotation.begin());
  return out;
}

std::vector<double> head_backward(const std::vector<DenseLayer>& head,
                                  const std::vector<std::vector<double>>& acts,
                                  std::vector<double> dout,
                                  std::vector<DenseLayer>& grads) {
  for (std::size_t i = head.size(); i-- > 0;) {
    if (i + 1 < head.size()) relu_backward(acts[i + 1], dout);
    dout = dense_backward(head[i], acts[i], dout, grads[i]);
  }
  return dout;
}

ConvLayer make_conv(int out, int in, int kernel, int stride) {
  const std::size_t n = static_cast<std::size_t>(out) * in * kernel * kernel;
  return {out, in, kernel, stride, std::vector<double>(n, 0.0),
          std::vector<double>(out, 0.0)};
}

DenseLayer make_dense(int out, int in) {
  return {out, in, std::vector<double>(static_cast<std::size_t>(out) * in, 0.0),
          std::vector<double>(out, 0.0)};
}

}  // namespace

void LvoConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvariantError("LvoConfig: " + msg); };
  if (stream_channels.empty()) fail("stream_channels must not be empty");
  for (int c : stream_channels) {
    if (c < 1) fail("channel counts must be positive");
  }
  if (conv_kernel < 1 || conv_stride < 1) fail("kernel and stride must be >= 1");
  if (squeeze_divisor < 1) fail("squeeze_divisor must be >= 1");
  if (fc_hidden < 1) fail("fc_hidden must be >= 1");
  if (stream_channels.back() / squeeze_divisor < 1) {
    fail("squeeze_divisor leaves no squeeze channels");
  }
  long divisor = 1;
  for (std::size_t i = 0; i < stream_channels.size(); ++i) divisor *= conv_stride;
  if (input_width < 1 || input_height < 1 || input_width % divisor != 0 ||
      input_height % divisor != 0) {
    fail("input " + std::to_string(input_width) + "x" + std::to_string(input_height) +
         " must be divisible by stride^layers = " + std::to_string(divisor));
  }
}

LvoConfig::Shape LvoConfig::stream_output_shape() const {
  int h = input_height;
  int w = input_width;
  for (std::size_t i = 0; i < stream_channels.size(); ++i) {
    h = same_padding(h, conv_kernel, conv_stride).out;
    w = same_padding(w, conv_kernel, conv_stride).out;
  }
  return {stream_channels.back(), h, w};
}

LvoConfig::Shape LvoConfig::squeeze_output_shape() const {
  Shape s = stream_output_shape();
  s.channels = stream_channels.back() / squeeze_divisor;
  return s;
}

int LvoConfig::flattened_size() const {
  const Shape s = squeeze_output_shape();
  return s.channels * s.height * s.width;
}

std::size_t LvoModel::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](std::span<const double> t, bool) { n += t.size(); });
  return n;
}

double LvoModel::weights_sq_norm() const {
  double s = 0.0;
  for_each_tensor([&](std::span<const double> t, bool is_weight) {
    if (!is_weight) return;
    for (double v : t) s += v * v;
  });
  return s;
}

LvoModel LvoModel::zeros_like() const {
  LvoModel z = *this;
  z.for_each_tensor([](std::span<double> t, bool) { std::fill(t.begin(), t.end(), 0.0); });
  return z;
}

LvoModel make_model(const LvoConfig& cfg) {
  cfg.validate();
  LvoModel m;
  m.config = cfg;
  int in_flow = 2;
  int in_depth = 1;
  for (int c : cfg.stream_channels) {
    m.flow_stream.push_back(make_conv(c, in_flow, cfg.conv_kernel, cfg.conv_stride));
    m.depth_stream.push_back(make_conv(c, in_depth, cfg.conv_kernel, cfg.conv_stride));
    in_flow = in_depth = c;
  }
  m.squeeze = make_conv(cfg.squeeze_output_shape().channels, 2 * cfg.stream_channels.back(), 1, 1);
  const int flat = cfg.flattened_size();
  for (auto* head : {&m.translation_head, &m.rotation_head}) {
    const int out = head == &m.translation_head ? 6 : 3;
    head->push_back(make_dense(cfg.fc_hidden, flat));
    head->push_back(make_dense(cfg.fc_hidden, cfg.fc_hidden));
    head->push_back(make_dense(out, cfg.fc_hidden));
  }
  return m;
}

LvoModel init_model(const LvoConfig& cfg, std::uint64_t seed) {
  LvoModel m = make_model(cfg);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::vector<double>& w, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : w) v = dist(rng);
  };
  auto conv = [&](ConvLayer& l) {
    const double area = static_cast<double>(l.kernel) * l.kernel;
    fill(l.weights, l.in_channels * area, l.out_channels * area);
  };
  for (auto& l : m.flow_stream) conv(l);
  for (auto& l : m.depth_stream) conv(l);
  conv(m.squeeze);
  for (auto* head : {&m.translation_head, &m.rotation_head}) {
    for (auto& l : *head) fill(l.weights, l.in_features, l.out_features);
  }
  return m;
}

RawPoseOutput forward(const LvoModel& model, const Flow3D& sample) {
  return output_of(run_forward(model, sample));
}

std::vector<RawPoseOutput> forward(const LvoModel& model, std::span<const Flow3D> batch) {
  std::vector<RawPoseOutput> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(forward(model, s));
  return out;
}

RawPoseOutput accumulate_gradients(const LvoModel& m, const Flow3D& sample,
                                   const RawPoseOutput& upstream, LvoModel& g) {
  const ForwardCache cache = run_forward(m, sample);
  std::vector<double> d_flat = head_backward(
      m.translation_head, cache.translation,
      {upstream.translation.begin(), upstream.translation.end()}, g.translation_head);
  const std::vector<double> d_rot = head_backward(
      m.rotation_head, cache.rotation,
      {upstream.rotation.begin(), upstream.rotation.end()}, g.rotation_head);
  for (std::size_t i = 0; i < d_flat.size(); ++i) d_flat[i] += d_rot[i];

  Tensor d_squeezed = cache.squeezed;
  d_squeezed.data = std::move(d_flat);
  relu_backward(cache.squeezed.data, d_squeezed.data);
  Tensor d_concat;
  conv_backward(m.squeeze, cache.concat, d_squeezed, g.squeeze, &d_concat);

  const Tensor& fa = cache.flow.back();
  Tensor d_flow(fa.channels, fa.height, fa.width);
  Tensor d_depth(cache.depth.back().channels, fa.height, fa.width);
  const auto split = static_cast<std::ptrdiff_t>(fa.data.size());
  std::copy(d_concat.data.begin(), d_concat.data.begin() + split, d_flow.data.begin());
  std::copy(d_concat.data.begin() + split, d_concat.data.end(), d_depth.data.begin());

  auto stream_backward = [](const std::vector<ConvLayer>& layers,
                            const std::vector<Tensor>& acts, Tensor dout,
                            std::vector<ConvLayer>& grads) {
    for (std::size_t i = layers.size(); i-- > 0;) {
      relu_backward(acts[i + 1].data, dout.data);
      Tensor din;
      conv_backward(layers[i], acts[i], dout, grads[i], i > 0 ? &din : nullptr);
      dout = std::move(din);
    }
  };
  stream_backward(m.flow_stream, cache.flow, std::move(d_flow), g.flow_stream);
  stream_backward(m.depth_stream, cache.depth, std::move(d_depth), g.depth_stream);
  return output_of(cache);
}

LvoModel backward(const LvoModel& model, std::span<const Flow3D> batch,
                  std::span<const RawPoseOutput> upstream) {
  if (batch.size() != upstream.size()) {
    throw ShapeError("backward: " + std::to_string(batch.size()) + " samples vs " +
                     std::to_string(upstream.size()) + " upstream gradients");
  }
  LvoModel grads = model.zeros_like();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    accumulate_gradients(model, batch[i], upstream[i], grads);
  }
  return grads;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvariantError("batch_size must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvariantError("lr_decay must be in (0, 1]");
  if (!(learning_rate >= 0.0)) throw InvariantError("learning_rate must be >= 0");
  if (epochs < 0) throw InvariantError("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvariantError("Adam betas must be in [0, 1)");
  }
  if (!(epsilon >= 0.0)) throw InvariantError("epsilon must be >= 0");
}

AdamState AdamState::for_model(const LvoModel& model) {
  return {model.zeros_like(), model.zeros_like(), 0};
}

void adam_step(LvoModel& model, const LvoModel& grads, AdamState& state,
               const TrainConfig& cfg, int epoch) {
  state.t += 1;
  const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, epoch);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  std::vector<std::span<double>> params, m1, m2;
  std::vector<std::span<const double>> gs;
  model.for_each_tensor([&](std::span<double> t, bool) { params.push_back(t); });
  state.first_moment.for_each_tensor([&](std::span<double> t, bool) { m1.push_back(t); });
  state.second_moment.for_each_tensor([&](std::span<double> t, bool) { m2.push_back(t); });
  grads.for_each_tensor([&](std::span<const double> t, bool) { gs.push_back(t); });
  if (gs.size() != params.size() || m1.size() != params.size()) {
    throw ShapeError("adam_step: gradient layout does not match model");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (gs[k].size() != params[k].size()) {
      throw ShapeError("adam_step: gradient tensor size mismatch");
    }
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = gs[k][i];
      m1[k][i] = cfg.beta1 * m1[k][i] + (1.0 - cfg.beta1) * g;
      m2[k][i] = cfg.beta2 * m2[k][i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m1[k][i] / c1;
      const double vhat = m2[k][i] / c2;
      params[k][i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

TrainingSample mirror_augment(const TrainingSample& sample) {
  const Flow3D& in = sample.flow;
  TrainingSample out{Flow3D(in.width(), in.height()), sample.pose};
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      const int sx = in.width() - 1 - x;
      out.flow.at(x, y, 0) = -in.at(sx, y, 0);
      out.flow.at(x, y, 1) = in.at(sx, y, 1);
      out.flow.at(x, y, 2) = in.at(sx, y, 2);
    }
  }
  out.pose.translation.x() = -sample.pose.translation.x();
  out.pose.euler.y = -sample.pose.euler.y;
  out.pose.euler.z = -sample.pose.euler.z;
  return out;
}

TrainResult train(LvoModel model, std::span<const TrainingSample> dataset,
                  const TrainConfig& cfg, const LossWeights& weights) {
  cfg.validate();
  weights.validate();
  if (dataset.empty()) throw InvariantError("train: dataset is empty");

  TrainResult result;
  AdamState state = AdamState::for_model(model);
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution flip(0.5);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      LvoModel grads = model.zeros_like();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const TrainingSample& base = dataset[order[i]];
        const bool mirrored = cfg.mirror_augment && flip(rng);
        const TrainingSample sample = mirrored ? mirror_augment(base) : base;
        const RawPoseOutput raw = forward(model, sample.flow);
        const RawPoseOutput upstream = loss_gradients(raw, sample.pose, weights);
        accumulate_gradients(model, sample.flow, upstream, grads);
        batch_loss += sample_loss(decode(raw), sample.pose, weights);
      }
      batch_loss += weights.lambda3 * model.weights_sq_norm();
      // Regularizer gradient: d/dW lambda3 ||W||^2.
      std::vector<std::span<const double>> ws;
      model.for_each_tensor([&](std::span<const double> t, bool) { ws.push_back(t); });
      std::size_t k = 0;
      grads.for_each_tensor([&](std::span<double> t, bool is_weight) {
        if (is_weight) {
          for (std::size_t i = 0; i < t.size(); ++i) t[i] += 2.0 * weights.lambda3 * ws[k][i];
        }
        ++k;
      });
      adam_step(model, grads, state, cfg, epoch);
      epoch_total += batch_loss;
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(dataset.size()));
  }
  result.model = std::move(model);
  return result;
}

namespace {
constexpr std::string_view kCheckpointMagic = "LVOCKPT1";
}

void save_checkpoint(const LvoModel& model, const std::filesystem::path& path) {
  const LvoConfig& c = model.config;
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  for (int v : {c.input_width, c.input_height, c.conv_kernel, c.conv_stride,
                c.squeeze_divisor, c.fc_hidden,
                static_cast<int>(c.stream_channels.size())}) {
    w.put(static_cast<std::uint32_t>(v));
  }
  for (int ch : c.stream_channels) w.put(static_cast<std::uint32_t>(ch));
  w.put(static_cast<std::uint64_t>(model.parameter_count()));
  model.for_each_tensor([&](std::span<const double> t, bool) {
    for (double v : t) w.put(static_cast<float>(v));
  });
  const std::string& bytes = w.bytes();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
  w.put(crc);
  detail::write_file(path, w.bytes());
}

LvoModel load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  if (bytes.size() < kCheckpointMagic.size() + 4) {
    throw ParseError(name + ": too short for a checkpoint");
  }
  const std::string_view body(bytes.data(), bytes.size() - 4);
  detail::ByteReader tail(std::string_view(bytes).substr(body.size()), name);
  const auto stored_crc = tail.get<std::uint32_t>();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  if (crc != stored_crc) throw ParseError(name + ": checksum mismatch");

  detail::ByteReader r(body, name);
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw ParseError(name + ": bad magic");
  }
  LvoConfig c;
  c.input_width = static_cast<int>(r.get<std::uint32_t>());
  c.input_height = static_cast<int>(r.get<std::uint32_t>());
  c.conv_kernel = static_cast<int>(r.get<std::uint32_t>());
  c.conv_stride = static_cast<int>(r.get<std::uint32_t>());
  c.squeeze_divisor = static_cast<int>(r.get<std::uint32_t>());
  c.fc_hidden = static_cast<int>(r.get<std::uint32_t>());
  const auto layers = r.get<std::uint32_t>();
  if (layers == 0 || layers > 64) throw ParseError(name + ": implausible layer count");
  c.stream_channels.resize(layers);
  for (auto& ch : c.stream_channels) ch = static_cast<int>(r.get<std::uint32_t>());
  try {
    c.validate();
  } catch (const InvariantError& e) {
    throw ParseError(name + ": " + e.what());
  }
  LvoModel m = make_model(c);
  if (r.get<std::uint64_t>() != m.parameter_count()) {
    throw ParseError(name + ": parameter count does not match its config");
  }
  m.for_each_tensor([&](std::span<double> t, bool) {
    for (double& v : t) v = r.get<float>();
  });
  if (r.remaining() != 0) throw ParseError(name + ": trailing bytes");
  return m;
}

LvoModel quantize_to_float(LvoModel model) {
  model.for_each_tensor([](std::span<double> t, bool) {
    for (double& v : t) v = static_cast<float>(v);
  });
  return model;
}

}  // namespace lvo
