#include "sgcn/serve/server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "httplib.h"
#include "json.hpp"
#include "sgcn/chargraph/graph.hpp"
#include "sgcn/trainer/checkpoint.hpp"

namespace sgcn::serve {
namespace {

using json = nlohmann::json;

HttpReply error_reply(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

ink::Trajectory parse_strokes(const json& strokes) {
  if (!strokes.is_array()) throw std::invalid_argument("'strokes' must be an array of strokes");
  ink::Trajectory traj;
  for (const auto& stroke : strokes) {
    if (!stroke.is_array()) throw std::invalid_argument("each stroke must be an array of [x, y] points");
    ink::Stroke s;
    for (const auto& p : stroke) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw std::invalid_argument("each point must be [x, y] with numeric coordinates");
      }
      s.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    traj.strokes.push_back(std::move(s));
  }
  return traj;
}

const char* kFallbackPage = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>sgcn</title>
<style>body{font-family:sans-serif;margin:2em}canvas{border:1px solid #888;touch-action:none}</style>
</head><body>
<canvas id="pad" width="320" height="320"></canvas>
<p><button id="go">Recognize</button> <button id="clear">Clear</button></p>
<pre id="out"></pre>
<script>
const pad = document.getElementById('pad'), ctx = pad.getContext('2d');
let strokes = [], cur = null;
pad.onpointerdown = e => { cur = [[e.offsetX, -e.offsetY]]; strokes.push(cur); };
pad.onpointermove = e => {
  if (!cur) return;
  const [x, y] = cur[cur.length - 1];
  cur.push([e.offsetX, -e.offsetY]);
  ctx.beginPath(); ctx.moveTo(x, -y); ctx.lineTo(e.offsetX, e.offsetY); ctx.stroke();
};
pad.onpointerup = () => { cur = null; };
document.getElementById('clear').onclick = () => { strokes = []; ctx.clearRect(0, 0, pad.width, pad.height); };
document.getElementById('go').onclick = async () => {
  const r = await fetch('/api/recognize', {method: 'POST', headers: {'Content-Type': 'application/json'},
                                           body: JSON.stringify({strokes, topk: 5})});
  const j = await r.json();
  document.getElementById('out').textContent = j.error ? j.error :
    j.predictions.map(p => p.label + '  ' + p.score.toFixed(3)).join('\n');
};
</script></body></html>
)html";

std::string host_of(const std::string& value) {
  // Strips scheme and port from an Origin or Host header value.
  std::string h = value;
  if (auto p = h.find("://"); p != std::string::npos) h = h.substr(p + 3);
  if (!h.empty() && h.front() == '[') return h.substr(0, h.find(']') + 1);
  return h.substr(0, h.find(':'));
}

void allow_same_host(const httplib::Request& req, httplib::Response& res) {
  const std::string origin = req.get_header_value("Origin");
  if (origin.empty()) return;
  if (host_of(origin) == host_of(req.get_header_value("Host"))) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Vary", "Origin");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  }
}

}  // namespace

Recognizer::Recognizer(const std::filesystem::path& checkpoint)
    : model_(trainer::load_model<float>(checkpoint)), checkpoint_id_(trainer::file_crc32(checkpoint)) {}

Recognizer::~Recognizer() = default;

std::size_t Recognizer::num_classes() const { return model_->config().num_classes; }
const network::ModelConfig& Recognizer::config() const { return model_->config(); }

HttpReply Recognizer::health() const {
  return {200, json{{"status", "ok"}, {"checkpoint_id", checkpoint_id_}, {"num_classes", num_classes()}}.dump()};
}

HttpReply Recognizer::recognize(const std::string& body) const {
  const auto t0 = std::chrono::steady_clock::now();
  if (body.size() > kMaxPayloadBytes) return error_reply(413, "payload exceeds 1 MB");
  const json req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return error_reply(400, "malformed JSON request");
  if (!req.contains("strokes")) return error_reply(400, "missing 'strokes'");

  std::size_t topk = kDefaultTopK;
  if (req.contains("topk")) {
    if (!req["topk"].is_number_integer() || req["topk"].get<long long>() < 1 ||
        req["topk"].get<long long>() > static_cast<long long>(num_classes())) {
      return error_reply(400, "'topk' must be an integer in [1, " + std::to_string(num_classes()) + "]");
    }
    topk = req["topk"].get<std::size_t>();
  }
  topk = std::min(topk, num_classes());

  const auto& cfg = model_->config();
  chargraph::CharGraph directed;
  chargraph::CharGraph graph;
  try {
    const ink::Trajectory traj = parse_strokes(req["strokes"]);
    traj.validate();
    directed = chargraph::build_graph(ink::resample(ink::normalize(traj), cfg.interval), cfg.penup_edges);
    graph = chargraph::to_undirected_self_loops(directed);
  } catch (const std::exception& e) {
    return error_reply(400, e.what());
  }

  const chargraph::CharGraph one[] = {graph};
  const numcore::Tensor<float> logits = model_->predict(chargraph::batch_graphs(one));
  const std::size_t k = logits.cols();
  std::vector<double> scores(k);
  const double mx = *std::max_element(logits.values().begin(), logits.values().end());
  double z = 0;
  for (std::size_t c = 0; c < k; ++c) z += scores[c] = std::exp(static_cast<double>(logits[c]) - mx);
  for (auto& s : scores) s /= z;
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  json predictions = json::array();
  for (std::size_t i = 0; i < topk; ++i) {
    const std::size_t c = order[i];
    const std::string label = cfg.class_names.empty() ? std::to_string(c) : cfg.class_names[c];
    predictions.push_back({{"label", label}, {"score", scores[c]}});
  }
  json nodes = json::array();
  for (std::size_t i = 0; i < directed.num_nodes(); ++i) {
    nodes.push_back({directed.coords(i, 0), directed.coords(i, 1)});
  }
  json edges = json::array();
  for (const auto& e : directed.edges) edges.push_back({e.src, e.dst});

  json res;
  res["predictions"] = std::move(predictions);
  res["graph"] = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  res["latency_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {200, res.dump()};
}

struct Server::Impl {
  Impl(const Recognizer& r, ServeOptions o) : recognizer(r), options(std::move(o)) {}
  const Recognizer& recognizer;
  ServeOptions options;
  httplib::Server http;
  int bound_port = -1;
};

Server::Server(const Recognizer& recognizer, ServeOptions options)
    : impl_(std::make_unique<Impl>(recognizer, std::move(options))) {
  auto& http = impl_->http;
  const Recognizer* rec = &recognizer;
  http.set_payload_max_length(kMaxPayloadBytes);
  http.Post("/api/recognize", [rec](const httplib::Request& req, httplib::Response& res) {
    allow_same_host(req, res);
    const HttpReply reply = rec->recognize(req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  http.Get("/api/health", [rec](const httplib::Request& req, httplib::Response& res) {
    allow_same_host(req, res);
    const HttpReply reply = rec->health();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  http.Options(R"(/api/.*)", [](const httplib::Request& req, httplib::Response& res) {
    allow_same_host(req, res);
    res.status = 204;
  });
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 413) res.set_content(error_reply(413, "payload exceeds 1 MB").body, "application/json");
  });
  const auto& ui = impl_->options.ui_dir;
  if (!ui.empty()) {
    if (!http.set_mount_point("/", ui.string())) {
      throw std::invalid_argument("ui directory " + ui.string() + " does not exist");
    }
  } else {
    http.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackPage, "text/html; charset=utf-8");
    });
  }
}

Server::~Server() = default;

int Server::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(o.host);
  } else {
    impl_->bound_port = impl_->http.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  return impl_->bound_port;
}

bool Server::listen_after_bind() { return impl_->http.listen_after_bind(); }

bool Server::listen() { return bind() >= 0 && listen_after_bind(); }

void Server::stop() { impl_->http.stop(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace sgcn::serve
