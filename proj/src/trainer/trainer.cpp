#include "sgcn/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace sgcn::trainer {
namespace {

using json = nlohmann::json;

/// Runs fn(i) for i in [0, n) on up to `workers` threads, in contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

chargraph::BatchedGraph make_batch(const PreparedSet& data, std::span<const std::size_t> idx) {
  std::vector<chargraph::CharGraph> graphs;
  graphs.reserve(idx.size());
  for (std::size_t i : idx) graphs.push_back(data.graphs[i]);
  return chargraph::batch_graphs(graphs);
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train: batch size must be at least 1");
  if (!(lr > 0)) throw std::invalid_argument("train: lr must be positive");
  if (!(lr_factor > 0 && lr_factor < 1)) throw std::invalid_argument("train: lr factor must lie in (0, 1)");
  if (!(min_lr > 0) || min_lr > lr) throw std::invalid_argument("train: min lr must lie in (0, lr]");
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("train: train fraction must lie in (0, 1)");
  }
  if (max_epochs == 0) throw std::invalid_argument("train: max epochs must be at least 1");
}

PreparedSet prepare(const ink::Dataset& data, std::span<const std::size_t> indices,
                    const network::ModelConfig& config, std::size_t workers) {
  PreparedSet out;
  out.graphs.resize(indices.size());
  out.labels.resize(indices.size());
  parallel_for(indices.size(), workers, [&](std::size_t k) {
    const ink::Sample& s = data.samples.at(indices[k]);
    try {
      out.graphs[k] = chargraph::prepare_graph(s.trajectory, config.interval, config.penup_edges);
    } catch (const std::exception& e) {
      throw std::invalid_argument("sample '" + s.id + "': " + e.what());
    }
    out.labels[k] = s.label;
  });
  return out;
}

PreparedSet prepare(const ink::Dataset& data, const network::ModelConfig& config,
                    std::size_t workers) {
  std::vector<std::size_t> all(data.samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return prepare(data, all, config, workers);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  numcore::Rng rng = numcore::Rng(seed).split(0x5917);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train(order.begin(), order.begin() + cut);
  std::vector<std::size_t> eval(order.begin() + cut, order.end());
  return {std::move(train), std::move(eval)};
}

std::vector<std::uint32_t> argmax_rows(const Tensor<float>& logits) {
  std::vector<std::uint32_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Metrics score_logits(const Tensor<float>& logits, std::span<const std::uint32_t> labels) {
  if (labels.size() != logits.rows()) throw std::invalid_argument("score: one label per row required");
  Metrics m;
  m.count = labels.size();
  if (m.count == 0) return m;
  const auto best = argmax_rows(logits);
  double loss = 0;
  std::size_t top1 = 0;
  std::size_t top5 = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const std::uint32_t y = labels[r];
    if (y >= row.size()) throw std::out_of_range("score: label out of range");
    if (best[r] == y) ++top1;
    // Rank of y: entries strictly above it, plus equal entries at lower index.
    std::size_t rank = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] > row[y] || (row[k] == row[y] && k < y)) ++rank;
    }
    if (rank < 5) ++top5;
    const double mx = row[best[r]];
    double z = 0;
    for (float v : row) z += std::exp(static_cast<double>(v) - mx);
    loss += std::log(z) + mx - row[y];
  }
  m.top1 = static_cast<double>(top1) / static_cast<double>(m.count);
  m.top5 = static_cast<double>(top5) / static_cast<double>(m.count);
  m.loss = loss / static_cast<double>(m.count);
  return m;
}

Metrics evaluate(Model& model, const PreparedSet& data, std::size_t batch_size,
                 std::size_t workers) {
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be at least 1");
  const std::size_t n = data.size();
  const std::size_t batches = (n + batch_size - 1) / batch_size;
  std::vector<Tensor<float>> logits(batches);
  parallel_for(batches, workers, [&](std::size_t b) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b * batch_size; i < std::min(n, (b + 1) * batch_size); ++i) idx.push_back(i);
    logits[b] = model.predict(make_batch(data, idx));
  });
  if (n == 0) return {};
  Tensor<float> all({n, model.config().num_classes});
  std::size_t row = 0;
  for (const auto& l : logits) {
    std::copy(l.values().begin(), l.values().end(), all.data() + row * all.cols());
    row += l.rows();
  }
  return score_logits(all, data.labels);
}

bool plateaued(std::span<const double> history, std::size_t patience, double tolerance) {
  if (history.empty()) return false;
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] > history[best] + tolerance) best = i;
  }
  return history.size() - 1 - best >= patience;
}

double lr_schedule_step(std::span<const double> history, double lr, std::size_t patience,
                        double factor, double min_lr, double tolerance) {
  if (history.empty()) throw std::invalid_argument("lr schedule: empty history");
  if (!plateaued(history, patience, tolerance)) return lr;
  return std::max(lr * factor, min_lr);
}

std::string metrics_csv(std::span<const EpochRecord> records) {
  std::string out = "epoch,loss,top1,lr,seconds\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + format_double("%.6f", r.loss) + "," +
           format_double("%.6f", r.top1) + "," + format_double("%.6g", r.lr) + "," +
           format_double("%.3f", r.seconds) + "\n";
  }
  return out;
}

std::string TrainState::to_json() const {
  json j;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["decay_start"] = decay_start;
  j["best_top1"] = best_top1;
  j["best_epoch"] = best_epoch;
  j["finished"] = finished;
  j["rng_state"] = rng_state;
  j["adam_step"] = adam_step;
  json rows = json::array();
  for (const auto& r : records) rows.push_back({r.epoch, r.loss, r.top1, r.lr, r.seconds});
  j["records"] = std::move(rows);
  return j.dump();
}

TrainState TrainState::from_json(const std::string& text) {
  TrainState s;
  try {
    const json j = json::parse(text);
    s.epoch = j.at("epoch").get<std::size_t>();
    s.lr = j.at("lr").get<double>();
    s.decay_start = j.at("decay_start").get<std::size_t>();
    s.best_top1 = j.at("best_top1").get<double>();
    s.best_epoch = j.at("best_epoch").get<std::size_t>();
    s.finished = j.at("finished").get<bool>();
    s.rng_state = j.at("rng_state").get<std::string>();
    s.adam_step = j.at("adam_step").get<std::uint64_t>();
    for (const auto& r : j.at("records")) {
      s.records.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(),
                           r.at(2).get<double>(), r.at(3).get<double>(), r.at(4).get<double>()});
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: train state: ") + e.what());
  }
  return s;
}

Trainer::Trainer(Model& model, TrainConfig config, Outputs outputs)
    : model_(model),
      config_(std::move(config)),
      outputs_(std::move(outputs)),
      rng_(numcore::Rng(config_.seed).split(0x7a11)) {
  config_.validate();
  state_.lr = config_.lr;
  adam_.lr = config_.lr;
}

void Trainer::resume(const std::filesystem::path& last_checkpoint) {
  const CheckpointFile file = read_checkpoint(last_checkpoint);
  if (file.config_json != model_.config().to_json()) {
    throw CheckpointError(last_checkpoint.string() + ": model config differs from the resumed run");
  }
  restore_model(file, model_);
  restore_optimizer(file, model_, adam_);
  state_ = TrainState::from_json(file.at("train_state").to_text());
  adam_.step = state_.adam_step;
  adam_.lr = state_.lr;
  rng_.restore(state_.rng_state);
}

CheckpointFile Trainer::snapshot(bool with_optimizer) const {
  CheckpointFile file;
  file.config_json = model_.config().to_json();
  add_model_sections(file, model_);
  TrainState s = state_;
  s.rng_state = rng_.state();
  s.adam_step = adam_.step;
  if (with_optimizer) add_optimizer_sections(file, model_, adam_);
  file.sections.push_back(Section::from_text("train_state", s.to_json()));
  return file;
}

bool Trainer::run_epoch(const PreparedSet& train, const PreparedSet& eval) {
  if (state_.finished || state_.epoch >= config_.max_epochs) return false;
  if (train.size() == 0) throw std::invalid_argument("train: empty training set");
  if (eval.size() == 0) throw std::invalid_argument("train: empty evaluation set");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_.engine());

  auto params = model_.store().parameters();
  adam_.lr = state_.lr;
  double loss_sum = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::span<const std::size_t> idx(order.data() + start,
                                           std::min(config_.batch_size, order.size() - start));
    const auto batch = make_batch(train, idx);
    std::vector<std::uint32_t> labels;
    labels.reserve(idx.size());
    for (std::size_t i : idx) labels.push_back(train.labels[i]);

    numcore::Tape<float> tape;
    const auto out = model_.forward(tape, batch, numcore::Mode::train, rng_);
    const Var loss = model_.loss(tape, out, labels);
    model_.store().zero_grad();
    tape.backward(loss);
    numcore::adam_step<float>(params, adam_);
    loss_sum += static_cast<double>(tape.value(loss)[0]) * static_cast<double>(idx.size());
  }

  const Metrics m = evaluate(model_, eval, config_.batch_size, config_.workers);
  const double seconds =
      config_.record_time
          ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
          : 0.0;
  ++state_.epoch;
  state_.records.push_back({state_.epoch, loss_sum / static_cast<double>(train.size()), m.top1,
                            state_.lr, seconds});

  const bool improved = m.top1 > state_.best_top1;
  if (improved) {
    state_.best_top1 = m.top1;
    state_.best_epoch = state_.epoch;
  }

  std::vector<double> since_decay;
  for (std::size_t i = state_.decay_start; i < state_.records.size(); ++i) {
    since_decay.push_back(state_.records[i].top1);
  }
  const bool plateau = plateaued(since_decay, config_.patience, config_.tolerance);
  if (plateau) {
    if (state_.lr <= config_.min_lr) {
      state_.finished = true;
    } else {
      state_.lr = lr_schedule_step(since_decay, state_.lr, config_.patience, config_.lr_factor,
                                   config_.min_lr, config_.tolerance);
      state_.decay_start = state_.records.size();
    }
  }
  if (outputs_.log) {
    const auto& r = state_.records.back();
    *outputs_.log << "epoch " << r.epoch << " loss " << format_double("%.4f", r.loss) << " top1 "
                  << format_double("%.4f", r.top1) << " lr " << format_double("%.3g", r.lr)
                  << " (" << format_double("%.1f", seconds) << " s)" << std::endl;
  }
  if (!outputs_.checkpoint.empty()) {
    if (improved) write_checkpoint(outputs_.checkpoint, snapshot(false));
    auto last = outputs_.checkpoint;
    last += ".last";
    write_checkpoint(last, snapshot(true));
  }
  if (!outputs_.metrics_csv.empty()) {
    std::ofstream csv(outputs_.metrics_csv, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + outputs_.metrics_csv.string());
    csv << metrics_csv(state_.records);
  }
  return !state_.finished && state_.epoch < config_.max_epochs;
}

void Trainer::run(const PreparedSet& train, const PreparedSet& eval) {
  while (run_epoch(train, eval)) {
  }
}

}  // namespace sgcn::trainer
