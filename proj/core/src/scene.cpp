#include "sgg/scene.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "sgg/error.hpp"

namespace sgg {

using nlohmann::json;

namespace {

int find_index(const std::vector<std::string>& names, const std::string& name, const char* kind) {
  for (std::size_t i = 1; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw DataError(std::string("unknown ") + kind + " label '" + name + "'");
}

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be an array [x, y, w, h]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw DataError("box has non-positive extent: " + to_string(b));
  return b;
}

}  // namespace

int LabelSet::class_index(const std::string& name) const { return find_index(classes, name, "object"); }
int LabelSet::predicate_index(const std::string& name) const { return find_index(predicates, name, "predicate"); }

LabelSet LabelSet::make(const std::vector<std::string>& classes, const std::vector<std::string>& predicates) {
  LabelSet s;
  s.classes.push_back(kBackgroundClass);
  s.classes.insert(s.classes.end(), classes.begin(), classes.end());
  s.predicates.push_back(kNoRelation);
  s.predicates.insert(s.predicates.end(), predicates.begin(), predicates.end());
  return s;
}

std::string scene_to_json_line(const Scene& scene, const LabelSet& labels) {
  json j;
  j["id"] = scene.id;
  j["width"] = scene.width;
  j["height"] = scene.height;
  j["image"] = scene.image;
  j["objects"] = json::array();
  for (const auto& o : scene.objects)
    j["objects"].push_back({{"box", {o.box.x, o.box.y, o.box.w, o.box.h}}, {"label", labels.classes.at(o.label)}});
  j["relations"] = json::array();
  for (const auto& r : scene.relations)
    j["relations"].push_back({{"subj", r.subj}, {"obj", r.obj}, {"predicate", labels.predicates.at(r.predicate)}});
  return j.dump();
}

Scene scene_from_json_line(const std::string& line, const LabelSet& labels, std::size_t line_no) {
  try {
    const json j = json::parse(line);
    Scene s;
    s.id = j.value("id", std::to_string(line_no));
    s.width = j.value("width", 64);
    s.height = j.value("height", 64);
    s.image = j.value("image", std::string());
    for (const auto& o : j.at("objects"))
      s.objects.push_back({box_from_json(o.at("box")), labels.class_index(o.at("label").get<std::string>())});
    if (j.contains("relations")) {
      for (const auto& r : j.at("relations")) {
        SceneRelation rel{r.at("subj").get<std::size_t>(), r.at("obj").get<std::size_t>(),
                          labels.predicate_index(r.at("predicate").get<std::string>())};
        if (rel.subj >= s.objects.size() || rel.obj >= s.objects.size() || rel.subj == rel.obj)
          throw DataError("relation endpoints out of range");
        s.relations.push_back(rel);
      }
    }
    return s;
  } catch (const DataError& e) {
    throw DataError("scenes line " + std::to_string(line_no) + ": " + e.what());
  } catch (const json::exception& e) {
    throw DataError("scenes line " + std::to_string(line_no) + ": " + e.what());
  }
}

void write_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes, const LabelSet& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : scenes) out << scene_to_json_line(s, labels) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Scene> read_scenes(const std::filesystem::path& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Scene> scenes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    scenes.push_back(scene_from_json_line(line, labels, line_no));
  }
  return scenes;
}

void write_labels(const std::filesystem::path& path, const LabelSet& labels) {
  json j;
  j["classes"] = std::vector<std::string>(labels.classes.begin() + 1, labels.classes.end());
  j["predicates"] = std::vector<std::string>(labels.predicates.begin() + 1, labels.predicates.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

LabelSet read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    const json j = json::parse(in);
    return LabelSet::make(j.at("classes").get<std::vector<std::string>>(),
                          j.at("predicates").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.root = dir;
  d.labels = read_labels(dir / "meta.json");
  d.scenes = read_scenes(dir / "scenes.jsonl", d.labels);
  if (d.scenes.empty()) throw DataError("dataset " + dir.string() + " has no scenes");
  return d;
}

}  // namespace sgg
