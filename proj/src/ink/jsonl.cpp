#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "json.hpp"

#include "sgcn/ink/dataset.hpp"

namespace sgcn::ink {
namespace {

using nlohmann::json;

Trajectory parse_strokes(const json& strokes) {
  if (!strokes.is_array()) throw std::invalid_argument("\"strokes\" must be an array");
  Trajectory traj;
  for (const auto& stroke : strokes) {
    if (!stroke.is_array()) throw std::invalid_argument("each stroke must be an array");
    Stroke s;
    for (const auto& pt : stroke) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        throw std::invalid_argument("points must be [x, y] number pairs");
      }
      s.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    traj.strokes.push_back(std::move(s));
  }
  traj.validate();
  return traj;
}

template <typename OnSample>
void read_lines(const std::filesystem::path& path, OnSample&& on_sample) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw std::invalid_argument("expected a JSON object");
      on_sample(obj);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
}

std::string read_id(const json& obj) {
  if (!obj.contains("id")) return {};
  const auto& id = obj.at("id");
  return id.is_string() ? id.get<std::string>() : id.dump();
}

}  // namespace

void Dataset::validate() const {
  for (const auto& s : samples) {
    if (s.label >= class_names.size()) {
      throw std::invalid_argument("sample '" + s.id + "' has label " + std::to_string(s.label) +
                                  " outside [0, " + std::to_string(class_names.size()) + ")");
    }
    s.trajectory.validate();
  }
}

std::vector<std::string> load_class_names(const std::filesystem::path& classes_json) {
  std::ifstream in(classes_json);
  if (!in) throw std::runtime_error("cannot open class list " + classes_json.string());
  const json doc = json::parse(in);
  if (!doc.is_array()) throw std::runtime_error(classes_json.string() + ": expected an array");
  return doc.get<std::vector<std::string>>();
}

Dataset load_jsonl(const std::filesystem::path& path,
                   const std::vector<std::string>& class_names) {
  Dataset ds;
  ds.class_names = class_names.empty() ? load_class_names(path.parent_path() / "classes.json")
                                       : class_names;
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) {
    index.emplace(ds.class_names[i], static_cast<std::uint32_t>(i));
  }
  read_lines(path, [&](const json& obj) {
    Sample s;
    const std::string label = obj.at("label").get<std::string>();
    const auto it = index.find(label);
    if (it == index.end()) throw std::invalid_argument("unknown label \"" + label + "\"");
    s.label = it->second;
    s.id = read_id(obj);
    s.trajectory = parse_strokes(obj.at("strokes"));
    ds.samples.push_back(std::move(s));
  });
  return ds;
}

std::vector<Sample> load_unlabeled_jsonl(const std::filesystem::path& path) {
  std::vector<Sample> out;
  read_lines(path, [&](const json& obj) {
    Sample s;
    s.id = read_id(obj);
    s.trajectory = parse_strokes(obj.at("strokes"));
    out.push_back(std::move(s));
  });
  return out;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : dataset.samples) {
    json strokes = json::array();
    for (const auto& stroke : s.trajectory.strokes) {
      json st = json::array();
      for (const Point& p : stroke) st.push_back({p.x, p.y});
      strokes.push_back(std::move(st));
    }
    json obj = {{"label", dataset.class_names[s.label]}, {"id", s.id}, {"strokes", strokes}};
    out << obj.dump() << '\n';
  }
  std::ofstream classes(path.parent_path() / "classes.json");
  if (!classes) throw std::runtime_error("cannot write class list next to " + path.string());
  classes << json(dataset.class_names).dump() << '\n';
}

}  // namespace sgcn::ink
