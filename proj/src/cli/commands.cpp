#include "sgcn/cli/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgcn/chargraph/graph.hpp"
#include "sgcn/cli/gradcheck_suite.hpp"
#include "sgcn/ink/dataset.hpp"
#include "sgcn/serve/server.hpp"
#include "sgcn/trainer/trainer.hpp"

namespace sgcn::cli {
namespace {

using json = nlohmann::json;

struct Options {
  std::uint64_t seed = 0;
  std::string config;
  std::string checkpoint;
  std::string data;

  // synth
  std::size_t classes = 10;
  std::size_t per_class = 200;
  ink::SynthSpec synth;

  // train / eval
  std::string test;
  std::string metrics;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 0.002;
  std::size_t patience = 3;
  double min_lr = 1e-5;
  double train_fraction = 0.8;
  bool resume = false;
  bool no_timing = false;
  bool large = false;
  std::string features;
  double width = 0;
  double sigma = 0;
  double margin = -1;
  double dropout = -1;
  double interval = 0;
  bool no_penup_edges = false;
  std::string split = "all";

  // infer
  std::string infer_file;
  std::size_t topk = 5;

  // cost
  std::vector<double> cost;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

network::ModelConfig model_config(const Options& o, const ink::Dataset& data) {
  network::ModelConfig cfg;
  if (!o.config.empty()) {
    auto j = json::parse(read_text(o.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw std::invalid_argument(o.config + ": malformed JSON");
    if (!j.contains("num_classes")) j["num_classes"] = data.num_classes();
    cfg = network::ModelConfig::from_json(j.dump());
  } else {
    cfg = o.large ? network::ModelConfig::large(data.num_classes())
                  : network::ModelConfig::small(data.num_classes());
  }
  if (cfg.num_classes != data.num_classes()) {
    throw std::invalid_argument("model config has " + std::to_string(cfg.num_classes) +
                                " classes, dataset has " + std::to_string(data.num_classes()));
  }
  if (!o.features.empty()) cfg.features = network::feature_set_from_string(o.features);
  if (o.width > 0) cfg.width_multiplier = o.width;
  if (o.sigma > 0) cfg.sigma = o.sigma;
  if (o.margin >= 0) cfg.margin = o.margin;
  if (o.dropout >= 0) cfg.dropout = o.dropout;
  if (o.interval > 0) cfg.interval = o.interval;
  if (o.no_penup_edges) cfg.penup_edges = false;
  cfg.class_names = data.class_names;
  cfg.validate();
  return cfg;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
  ink::SynthSpec spec = o.synth;
  spec.num_classes = o.classes;
  spec.samples_per_class = o.per_class;
  const ink::Dataset ds = ink::synth_dataset(spec, o.seed);
  ink::save_jsonl(ds, o.data);
  err << "wrote " << ds.samples.size() << " samples to " << o.data << "\n";
  out << json{{"path", o.data},
              {"samples", ds.samples.size()},
              {"classes", ds.num_classes()},
              {"seed", o.seed}}
             .dump()
      << "\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const ink::Dataset data = ink::load_jsonl(o.data);
  const network::ModelConfig cfg = model_config(o, data);
  const std::size_t workers = worker_count();

  trainer::TrainConfig tc;
  tc.batch_size = o.batch_size;
  tc.lr = o.lr;
  tc.patience = o.patience;
  tc.min_lr = o.min_lr;
  tc.max_epochs = o.epochs;
  tc.seed = o.seed;
  tc.train_fraction = o.train_fraction;
  tc.workers = workers;
  tc.record_time = !o.no_timing;
  tc.validate();

  trainer::PreparedSet train_set;
  trainer::PreparedSet eval_set;
  if (!o.test.empty()) {
    const ink::Dataset test = ink::load_jsonl(o.test, data.class_names);
    train_set = trainer::prepare(data, cfg, workers);
    eval_set = trainer::prepare(test, cfg, workers);
  } else {
    const auto [tr, ev] = trainer::split_indices(data.samples.size(), o.train_fraction, o.seed);
    train_set = trainer::prepare(data, tr, cfg, workers);
    eval_set = trainer::prepare(data, ev, cfg, workers);
  }
  err << "train " << train_set.size() << " samples, eval " << eval_set.size() << " samples\n";

  numcore::Rng init = numcore::Rng(o.seed).split(0x1417);
  trainer::Model model(cfg, init);
  const std::string metrics = o.metrics.empty() ? o.checkpoint + ".csv" : o.metrics;
  trainer::Trainer t(model, tc, {o.checkpoint, metrics, &err});
  if (o.resume) t.resume(o.checkpoint + ".last");
  t.run(train_set, eval_set);

  const auto& s = t.state();
  const auto count = model.param_count();
  out << json{{"checkpoint", o.checkpoint},
              {"metrics", metrics},
              {"epochs", s.epoch},
              {"best_top1", s.best_top1},
              {"best_epoch", s.best_epoch},
              {"final_lr", s.lr},
              {"num_params", count.num_params},
              {"storage_bytes", count.storage_bytes}}
             .dump()
      << "\n";
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  auto model = trainer::load_model<float>(o.checkpoint);
  const ink::Dataset data = ink::load_jsonl(o.data, model->config().class_names);
  trainer::PreparedSet set;
  if (o.split == "all") {
    set = trainer::prepare(data, model->config(), worker_count());
  } else {
    const auto [tr, ev] = trainer::split_indices(data.samples.size(), o.train_fraction, o.seed);
    set = trainer::prepare(data, o.split == "train" ? tr : ev, model->config(), worker_count());
  }
  const trainer::Metrics m = trainer::evaluate(*model, set, o.batch_size, worker_count());
  out << json{{"top1", m.top1}, {"top5", m.top5}, {"loss", m.loss}, {"count", m.count}}.dump() << "\n";
  return 0;
}

int cmd_infer(const Options& o, std::ostream& out, std::ostream&) {
  const serve::Recognizer rec(o.checkpoint);
  const auto samples = ink::load_unlabeled_jsonl(o.infer_file);
  json results = json::array();
  for (const auto& s : samples) {
    json strokes = json::array();
    for (const auto& stroke : s.trajectory.strokes) {
      json pts = json::array();
      for (const auto& p : stroke) pts.push_back({p.x, p.y});
      strokes.push_back(std::move(pts));
    }
    const auto reply = rec.recognize(json{{"strokes", strokes}, {"topk", std::min(o.topk, rec.num_classes())}}.dump());
    const json body = json::parse(reply.body);
    if (reply.status != 200) throw std::runtime_error("sample '" + s.id + "': " + body.at("error").get<std::string>());
    results.push_back({{"id", s.id}, {"predictions", body.at("predictions")}});
  }
  out << results.dump() << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  const auto entries = run_gradcheck_suite(o.seed);
  json ops = json::array();
  bool ok = true;
  for (const auto& e : entries) {
    ok = ok && e.passed();
    ops.push_back({{"op", e.op},
                   {"max_rel_error", e.result.max_rel_error},
                   {"tolerance", e.tolerance},
                   {"probes", e.result.probes},
                   {"passed", e.passed()}});
    if (!e.passed()) err << "gradcheck " << e.op << " failed at " << e.result.worst << "\n";
  }
  out << json{{"ops", ops}, {"passed", ok}}.dump() << "\n";
  return ok ? 0 : 1;
}

int cmd_cost(const Options& o, std::ostream& out, std::ostream&) {
  const auto r = chargraph::conv_cost_ratio(o.cost[0], o.cost[1], o.cost[2], o.cost[3]);
  out << json{{"H", r.height},
              {"W", r.width},
              {"num_nodes", r.num_nodes},
              {"avg_edges", r.avg_edges},
              {"image_cost", r.image_cost},
              {"graph_cost", r.graph_cost},
              {"ratio", r.ratio}}
             .dump()
      << "\n";
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  const serve::Recognizer rec(o.checkpoint);
  serve::Server server(rec, {o.host, o.port, o.ui_dir});
  const int port = server.bind();
  if (port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  out << json{{"host", o.host}, {"port", port}, {"checkpoint_id", rec.checkpoint_id()}}.dump() << std::endl;
  err << "serving on http://" << o.host << ":" << port << "\n";
  return server.listen_after_bind() ? 0 : 1;
}

}  // namespace

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SGCN_NUM_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
    } catch (const std::exception&) {
    }
  }
  return n;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Spatial graph convolutional network for online handwritten characters", "sgcn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic JSONL dataset (and classes.json)");
  common(synth);
  synth->add_option("--data,--out,-o", o.data, "Output JSONL path")->required();
  synth->add_option("--classes", o.classes, "Number of classes")->capture_default_str();
  synth->add_option("--per-class", o.per_class, "Samples per class")->capture_default_str();
  synth->add_option("--jitter", o.synth.jitter, "Per-point noise std")->capture_default_str();
  synth->add_option("--rotation", o.synth.rotation_range, "Max rotation (radians)")->capture_default_str();
  synth->add_option("--scale-min", o.synth.scale_min, "Min scale")->capture_default_str();
  synth->add_option("--scale-max", o.synth.scale_max, "Max scale")->capture_default_str();

  auto model_flags = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Model config JSON");
    sub->add_flag("--large", o.large, "Use the large default config");
    sub->add_option("--features", o.features, "Node features: full, spatial, temporal, constant");
    sub->add_option("--width", o.width, "Channel width multiplier");
    sub->add_option("--sigma", o.sigma, "Cosine logit scale");
    sub->add_option("--margin", o.margin, "Cosine margin");
    sub->add_option("--dropout", o.dropout, "Dropout probability");
    sub->add_option("--interval", o.interval, "Resampling interval");
    sub->add_flag("--no-penup-edges", o.no_penup_edges, "Do not link consecutive strokes");
  };

  auto* train = app.add_subcommand("train", "Train a model, writing a checkpoint and metrics CSV");
  common(train);
  model_flags(train);
  train->add_option("--data", o.data, "Training JSONL")->required();
  train->add_option("--test", o.test, "Evaluation JSONL (default: seeded split of --data)");
  train->add_option("--checkpoint", o.checkpoint, "Best-model checkpoint path")->required();
  train->add_option("--metrics", o.metrics, "Metrics CSV path (default: CHECKPOINT.csv)");
  train->add_option("--epochs", o.epochs, "Maximum epochs")->capture_default_str();
  train->add_option("--batch-size", o.batch_size, "Batch size")->capture_default_str();
  train->add_option("--lr", o.lr, "Initial learning rate")->capture_default_str();
  train->add_option("--patience", o.patience, "Plateau patience (evaluations)")->capture_default_str();
  train->add_option("--min-lr", o.min_lr, "Learning-rate floor")->capture_default_str();
  train->add_option("--train-fraction", o.train_fraction, "Train share of the seeded split")->capture_default_str();
  train->add_flag("--resume", o.resume, "Continue from CHECKPOINT.last");
  train->add_flag("--no-timing", o.no_timing, "Write 0 in the seconds column");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, printing metrics as JSON");
  common(eval);
  eval->add_option("--data", o.data, "JSONL dataset")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required();
  eval->add_option("--split", o.split, "all, train or eval (seeded split)")
      ->check(CLI::IsMember({"all", "train", "eval"}))
      ->capture_default_str();
  eval->add_option("--train-fraction", o.train_fraction, "Train share of the seeded split")->capture_default_str();
  eval->add_option("--batch-size", o.batch_size, "Batch size")->capture_default_str();

  auto* infer = app.add_subcommand("infer", "Print top-k predictions for each sample of a JSONL file");
  common(infer);
  infer->add_option("file", o.infer_file, "JSONL file")->required();
  infer->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required();
  infer->add_option("--topk", o.topk, "Predictions per sample")->capture_default_str()->check(CLI::PositiveNumber);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  common(gradcheck);

  auto* cost = app.add_subcommand("cost", "Image vs graph convolution cost: cost H W N E");
  common(cost);
  cost->add_option("dims", o.cost, "H W N E: image height, width, node count, average edges")->expected(4)->required();

  auto* serve = app.add_subcommand("serve", "HTTP recognition service");
  common(serve);
  serve->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required();
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--port", o.port, "Port")->capture_default_str();
  serve->add_option("--ui-dir", o.ui_dir, "Static UI bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    err << "error: " << e.what() << "\n\n" << target->help();
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o, out, err);
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*infer) return cmd_infer(o, out, err);
    if (*gradcheck) return cmd_gradcheck(o, out, err);
    if (*cost) return cmd_cost(o, out, err);
    if (*serve) return cmd_serve(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sgcn::cli
