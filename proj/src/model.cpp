#include "evotraj/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evotraj/errors.hpp"
#include "evotraj/io_util.hpp"
#include "evotraj/nn/loss.hpp"
#include "evotraj/nn/optimizer.hpp"
#include "evotraj/nn/serialize.hpp"

namespace evotraj {

using nn::Tensor;

namespace {

constexpr int kModelFormatVersion = 1;
constexpr std::size_t kEvalChunk = 64;

std::filesystem::path suffixed(const std::filesystem::path& stem, const char* suffix) {
  std::filesystem::path p = stem;
  p += suffix;
  return p;
}

// Rows b*tau + t of [B*tau, F] gathered into step t's [B, F].
std::vector<Tensor> split_steps(const Tensor& features, std::size_t batch, std::size_t tau) {
  const std::size_t f = features.dim(1);
  std::vector<Tensor> xs(tau, Tensor({batch, f}));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < tau; ++t)
      std::copy_n(features.data() + (b * tau + t) * f, f, xs[t].data() + b * f);
  return xs;
}

Tensor merge_steps(const std::vector<Tensor>& xs, std::size_t batch) {
  const std::size_t tau = xs.size();
  const std::size_t f = xs.front().dim(1);
  Tensor out({batch * tau, f});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < tau; ++t)
      std::copy_n(xs[t].data() + b * f, f, out.data() + (b * tau + t) * f);
  return out;
}

}  // namespace

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  m.config_.learning_rate = config.resolved_learning_rate();  // what gets saved and reloaded
  m.seed_ = seed;
  Rng rng(derive_seed(seed, {0}));
  const LayerSizes& s = config.effective;
  m.conv_ = nn::ConvBlock("conv", config.grid_h, config.grid_w, config.channels, config.conv, s.cnn_flat1,
                          s.cnn_flat2, rng);
  std::size_t input = s.cnn_flat2;
  for (std::size_t k = 0; k < config.lstm_cells; ++k) {
    m.cells_.emplace_back("lstm" + std::to_string(k + 1), input, s.hidden_units, rng);
    m.cell_dropout_.emplace_back(config.tau, nn::Dropout(config.lstm_dropout));
    input = s.hidden_units;
  }
  m.flat1_ = nn::Dense("lstm_flat1", s.hidden_units, s.lstm_flat1, nn::Activation::ReLU, rng);
  m.flat2_ = nn::Dense("lstm_flat2", s.lstm_flat1, s.lstm_flat2, nn::Activation::ReLU, rng);
  m.flat_dropout_ = nn::Dropout(config.flat_dropout);
  m.head_ = nn::Dense("head", s.lstm_flat2, 2 * config.tau, nn::Activation::Identity, rng);
  return m;
}

std::vector<nn::Parameter*> Model::parameters() {
  std::vector<nn::Parameter*> ps = conv_.parameters();
  for (nn::LstmCell& c : cells_)
    for (nn::Parameter* p : c.parameters()) ps.push_back(p);
  for (nn::Dense* d : {&flat1_, &flat2_, &head_})
    for (nn::Parameter* p : d->parameters()) ps.push_back(p);
  return ps;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const nn::Parameter* p : const_cast<Model*>(this)->parameters()) n += p->value.size();
  return n;
}

Tensor Model::frames(const std::vector<const SequenceSample*>& batch) const {
  const std::size_t tau = config_.tau;
  const std::size_t cells = config_.grid_h * config_.grid_w * config_.channels;
  Tensor out({batch.size() * tau, config_.grid_h, config_.grid_w, config_.channels});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SequenceSample& s = *batch[b];
    if (s.inputs.size() != tau)
      throw ShapeError("model expects " + std::to_string(tau) + " input grids, got " +
                       std::to_string(s.inputs.size()));
    for (std::size_t t = 0; t < tau; ++t) {
      const OccupancyGrid& g = s.inputs[t];
      if (g.height != config_.grid_h || g.width != config_.grid_w || g.channels != config_.channels)
        throw ShapeError("model expects " + std::to_string(config_.grid_h) + "x" +
                         std::to_string(config_.grid_w) + "x" + std::to_string(config_.channels) +
                         " grids, got " + std::to_string(g.height) + "x" + std::to_string(g.width) + "x" +
                         std::to_string(g.channels));
      std::copy(g.cells.begin(), g.cells.end(), out.data() + (b * tau + t) * cells);
    }
  }
  return out;
}

Tensor Model::targets(const std::vector<const SequenceSample*>& batch) const {
  const std::size_t tau = config_.tau;
  Tensor out({batch.size(), 2 * tau});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b]->targets.size() != tau) throw ShapeError("sample target count does not match tau");
    for (std::size_t t = 0; t < tau; ++t) {
      out[b * 2 * tau + 2 * t] = static_cast<float>(batch[b]->targets[t].x / target_scale_.x);
      out[b * 2 * tau + 2 * t + 1] = static_cast<float>(batch[b]->targets[t].y / target_scale_.y);
    }
  }
  return out;
}

Tensor Model::forward(const Tensor& frames, std::size_t batch, nn::Mode mode, Rng& rng) {
  last_batch_ = batch;
  std::vector<Tensor> xs = split_steps(conv_.forward(frames), batch, config_.tau);
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    xs = cells_[k].forward(xs);
    for (std::size_t t = 0; t < xs.size(); ++t) xs[t] = cell_dropout_[k][t].forward(xs[t], mode, rng);
  }
  Tensor h = flat2_.forward(flat1_.forward(xs.back()));
  return head_.forward(flat_dropout_.forward(h, mode, rng));
}

void Model::backward(const Tensor& upstream) {
  Tensor g = flat1_.backward(flat2_.backward(flat_dropout_.backward(head_.backward(upstream))));
  std::vector<Tensor> dh(config_.tau, Tensor({last_batch_, config_.effective.hidden_units}));
  dh.back() = std::move(g);
  for (std::size_t k = cells_.size(); k-- > 0;) {
    for (std::size_t t = 0; t < dh.size(); ++t) dh[t] = cell_dropout_[k][t].backward(dh[t]);
    dh = cells_[k].backward(dh);
  }
  conv_.backward(merge_steps(dh, last_batch_));
}

std::uint64_t Model::activation_pattern() const {
  std::uint64_t h = conv_.activation_pattern(14695981039346656037ULL);
  h = flat1_.activation_pattern(h);
  return flat2_.activation_pattern(h);
}

std::vector<Trajectory> Model::predict(const std::vector<SequenceSample>& samples) {
  std::vector<Trajectory> out;
  out.reserve(samples.size());
  Rng unused(0);
  const std::size_t tau = config_.tau;
  for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, samples.size() - start);
    std::vector<const SequenceSample*> batch(n);
    for (std::size_t i = 0; i < n; ++i) batch[i] = &samples[start + i];
    const Tensor y = forward(frames(batch), n, nn::Mode::Eval, unused);
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<Vec2> points(tau);
      for (std::size_t t = 0; t < tau; ++t)
        points[t] = {y[b * 2 * tau + 2 * t] * target_scale_.x, y[b * 2 * tau + 2 * t + 1] * target_scale_.y};
      out.push_back(Trajectory::from_points(std::move(points), config_.dt));
    }
  }
  return out;
}

Trajectory Model::predict(const SequenceSample& sample) {
  return predict(std::vector<SequenceSample>{sample}).front();
}

void Model::save(const std::filesystem::path& stem) {
  const std::vector<nn::Parameter*> ps = parameters();
  nn::save_parameters(ps, stem);
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["config"] = model_config_to_json(config_);
  j["seed"] = seed_;
  j["target_scale"] = {target_scale_.x, target_scale_.y};
  write_file_atomic(suffixed(stem, ".model.json"), j.dump(2) + "\n");
}

Model Model::load(const std::filesystem::path& stem) {
  const std::filesystem::path file = suffixed(stem, ".model.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file, std::string("corrupt model descriptor: ") + e.what());
  }
  const int version = j.value("format_version", 0);
  if (version != kModelFormatVersion) throw FormatVersionError(file, version, kModelFormatVersion);
  Model m;
  try {
    m = build(model_config_from_json(j.at("config")), j.at("seed").get<std::uint64_t>());
    m.target_scale_ = {j.at("target_scale")[0].get<double>(), j.at("target_scale")[1].get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file, e.what());
  }
  const std::vector<nn::Parameter*> ps = m.parameters();
  nn::load_parameters(ps, stem);
  return m;
}

Vec2 target_rms(const std::vector<SequenceSample>& samples) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (const SequenceSample& s : samples)
    for (const Vec2& p : s.targets) {
      sx += p.x * p.x;
      sy += p.y * p.y;
      ++n;
    }
  if (n == 0) return {1.0, 1.0};
  return {std::max(0.1, std::sqrt(sx / static_cast<double>(n))), std::max(0.1, std::sqrt(sy / static_cast<double>(n)))};
}

double mean_step_distance(const std::vector<Trajectory>& predictions, const std::vector<SequenceSample>& samples) {
  if (predictions.size() != samples.size()) throw ShapeError("prediction and sample counts differ");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t t = 0; t < samples[i].targets.size(); ++t) {
      total += norm(predictions[i].points.at(t) - samples[i].targets[t]);
      ++n;
    }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

TrainedModel train(Model model, const Dataset& dataset, std::uint64_t seed) {
  const ModelConfig& config = model.config();
  if (dataset.train.empty()) throw ConfigError("training split is empty");
  if (dataset.manifest.tau != 0 && dataset.manifest.tau != config.tau)
    throw ConfigError("dataset tau " + std::to_string(dataset.manifest.tau) + " does not match model tau " +
                      std::to_string(config.tau));

  TrainedModel result;
  result.seed = seed;
  if (config.effective_epochs == 0) {
    result.model = std::move(model);
    return result;
  }
  model.set_target_scale(target_rms(dataset.train));

  const std::vector<nn::Parameter*> params = model.parameters();
  nn::OptimizerSettings settings = nn::OptimizerSettings::defaults(config.optimizer, config.momentum);
  settings.learning_rate = config.resolved_learning_rate();
  nn::OptimizerState optimizer(settings);
  optimizer.init(params);

  Rng shuffle_rng(derive_seed(seed, {1}));
  Rng dropout_rng(derive_seed(seed, {2}));
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  try {
    for (std::size_t epoch = 1; epoch <= config.effective_epochs; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t n = std::min(config.batch_size, order.size() - start);
        std::vector<const SequenceSample*> batch(n);
        for (std::size_t i = 0; i < n; ++i) batch[i] = &dataset.train[order[start + i]];
        for (nn::Parameter* p : params) p->zero_grad();
        const Tensor y = model.forward(model.frames(batch), n, nn::Mode::Train, dropout_rng);
        const nn::LossResult loss = nn::loss_eval(config.loss, y, model.targets(batch));
        if (!std::isfinite(loss.value))
          throw NumericalError("non-finite training loss in epoch " + std::to_string(epoch));
        loss_sum += loss.value * static_cast<double>(n);
        model.backward(loss.gradient);
        optimizer.apply(params);
        for (const nn::Parameter* p : params) nn::check_finite(p->value, p->name);
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.train_loss = loss_sum / static_cast<double>(order.size());
      rec.val_rmse = dataset.val.empty() ? 0.0 : mean_step_distance(model.predict(dataset.val), dataset.val);
      if (!std::isfinite(rec.val_rmse))
        throw NumericalError("non-finite validation RMSE in epoch " + std::to_string(epoch));
      result.history.push_back(rec);
    }
  } catch (const NumericalError& e) {
    result.failed = true;
    result.failure = e.what();
  }
  result.model = std::move(model);
  return result;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  auto sizes = [](const LayerSizes& s) {
    return nlohmann::json{{"hidden_units", s.hidden_units}, {"cnn_flat1", s.cnn_flat1}, {"cnn_flat2", s.cnn_flat2},
                          {"lstm_flat1", s.lstm_flat1},     {"lstm_flat2", s.lstm_flat2}};
  };
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"momentum", c.momentum},
          {"loss", std::string(nn::to_string(c.loss))},
          {"optimizer", std::string(nn::to_string(c.optimizer))},
          {"lstm_cells", c.lstm_cells},
          {"lstm_dropout", c.lstm_dropout},
          {"nominal", sizes(c.nominal)},
          {"flat_dropout", c.flat_dropout},
          {"effective_epochs", c.effective_epochs},
          {"effective", sizes(c.effective)},
          {"divisor", c.divisor},
          {"tau", c.tau},
          {"grid_w", c.grid_w},
          {"grid_h", c.grid_h},
          {"channels", c.channels},
          {"conv_filters", {c.conv.filters1, c.conv.filters2}},
          {"learning_rate", c.resolved_learning_rate()},
          {"dt", c.dt}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  auto sizes = [](const nlohmann::json& s) {
    return LayerSizes{s.at("hidden_units").get<std::size_t>(), s.at("cnn_flat1").get<std::size_t>(),
                      s.at("cnn_flat2").get<std::size_t>(), s.at("lstm_flat1").get<std::size_t>(),
                      s.at("lstm_flat2").get<std::size_t>()};
  };
  ModelConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.momentum = j.at("momentum").get<float>();
  const std::string loss = j.at("loss").get<std::string>();
  if (loss == nn::to_string(nn::LossKind::MSE)) {
    c.loss = nn::LossKind::MSE;
  } else if (loss == nn::to_string(nn::LossKind::LogCosh)) {
    c.loss = nn::LossKind::LogCosh;
  } else {
    throw ConfigError("unknown loss '" + loss + "'");
  }
  const auto opt = nn::optimizer_from_string(j.at("optimizer").get<std::string>());
  if (!opt) throw ConfigError("unknown optimizer '" + j.at("optimizer").get<std::string>() + "'");
  c.optimizer = *opt;
  c.lstm_cells = j.at("lstm_cells").get<std::size_t>();
  c.lstm_dropout = j.at("lstm_dropout").get<float>();
  c.nominal = sizes(j.at("nominal"));
  c.flat_dropout = j.at("flat_dropout").get<float>();
  c.effective_epochs = j.at("effective_epochs").get<std::size_t>();
  c.effective = sizes(j.at("effective"));
  c.divisor = j.at("divisor").get<std::size_t>();
  c.tau = j.at("tau").get<std::size_t>();
  c.grid_w = j.at("grid_w").get<std::size_t>();
  c.grid_h = j.at("grid_h").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.conv = {j.at("conv_filters")[0].get<std::size_t>(), j.at("conv_filters")[1].get<std::size_t>()};
  c.learning_rate = j.at("learning_rate").get<float>();
  c.dt = j.at("dt").get<double>();
  return c;
}

}  // namespace evotraj
